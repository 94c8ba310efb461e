//! Distributed estimation of Poisson arrival rates in asynchronous monitoring
//! networks.
//!
//! Every monitor observes counts from a Poisson process whose rate is drawn
//! from a shared Gamma prior with known shape `a` and unknown scale `b`. The
//! crate provides
//!
//! * the Gamma-Poisson model and its Empirical Bayes closed forms ([`model`]),
//! * time-varying digraphs, column-stochastic push-sum weights and the
//!   state-transition tracker ([`graph`]),
//! * the ad-hoc push-sum estimator ([`adhoc`]) and the subgradient-push
//!   Empirical Bayes estimator ([`push`]),
//! * closed-form performance predictions ([`theory`]),
//! * a deterministic, parallel Monte Carlo harness with figure pipelines
//!   ([`experiments`]).

pub mod adhoc;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod minimize;
pub mod model;
pub mod push;
pub mod theory;
pub mod trace;

pub use error::{Error, Result};
