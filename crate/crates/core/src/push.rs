//! Empirical Bayes distributed estimator: subgradient-push on the network ML
//! cost, followed by the local MMSE plug-in.
//!
//! The default [`Parametrization::Log`] runs the method on `u = log b`, where
//! the cost is convex and the per-node gradient `(a n_i b − σ_i)/(n_i b + 1)`
//! is bounded by `max(a, σ_i)`. [`Parametrization::Linear`] runs it on `b`
//! itself, clamping the ratio to `b_min` before every gradient evaluation.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::graph::{WeightMatrix, WeightSource};
use crate::model::{gradient_term, log_gradient_term, shrink, NetworkData};
use crate::trace::{spread, Readout, Trace};

/// Floor on `b̂` in the linear parametrization.
pub const B_MIN: f64 = 1e-9;

/// Domain the subgradient iterates live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    #[default]
    Log,
    Linear,
}

/// Diminishing step size `γ(t) = γ₀ / t^p`, `p ∈ (1/2, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub gamma0: f64,
    pub exponent: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            gamma0: 1.0,
            exponent: 1.0,
        }
    }
}

impl StepSchedule {
    pub fn new(gamma0: f64, exponent: f64) -> Result<Self> {
        let s = Self { gamma0, exponent };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("gamma0", self.gamma0)?;
        if !(self.exponent > 0.5 && self.exponent <= 1.0) {
            return Err(Error::Domain {
                name: "exponent",
                value: self.exponent,
                domain: "(0.5, 1]",
            });
        }
        Ok(())
    }

    /// `γ(t)` for `t ≥ 1`.
    pub fn gamma(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        self.gamma0 / (t as f64).powf(self.exponent)
    }
}

/// Subgradient-push state of every node at round `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PushState {
    pub v: DVector<f64>,
    pub y: DVector<f64>,
    pub x: DVector<f64>,
    pub b_hat: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub t: usize,
}

/// Fixed per-run inputs of the Empirical Bayes estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalBayes {
    n: Vec<f64>,
    sigma: Vec<f64>,
    a: f64,
    param: Parametrization,
}

impl EmpiricalBayes {
    pub fn new(data: &NetworkData, a: f64, param: Parametrization) -> Result<Self> {
        Self::from_stats(&data.sizes(), &data.sigmas(), a, param)
    }

    pub fn from_stats(sizes: &[u64], sigmas: &[u64], a: f64, param: Parametrization) -> Result<Self> {
        require_positive("a", a)?;
        if sizes.len() != sigmas.len() {
            return Err(Error::DimensionMismatch {
                expected: sizes.len(),
                found: sigmas.len(),
            });
        }
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidParameter("sample sizes must be non-empty and ≥ 1".into()));
        }
        Ok(Self {
            n: sizes.iter().map(|&x| x as f64).collect(),
            sigma: sigmas.iter().map(|&x| x as f64).collect(),
            a,
            param,
        })
    }

    pub fn nodes(&self) -> usize {
        self.n.len()
    }

    pub fn parametrization(&self) -> Parametrization {
        self.param
    }

    /// `y = 1`, `x = v` = the guarded local estimate `max(σ_i, 1)/(a n_i)`
    /// (its logarithm in the log parametrization).
    pub fn init(&self) -> PushState {
        let n = self.nodes();
        let b0: Vec<f64> = (0..n).map(|i| self.sigma[i].max(1.0) / (self.a * self.n[i])).collect();
        let x = DVector::from_iterator(
            n,
            b0.iter().map(|&b| match self.param {
                Parametrization::Log => b.ln(),
                Parametrization::Linear => b,
            }),
        );
        let lambda_hat = (0..n).map(|i| shrink(b0[i], self.n[i], self.sigma[i], self.a)).collect();
        PushState {
            v: x.clone(),
            y: DVector::from_element(n, 1.0),
            x,
            b_hat: b0,
            lambda_hat,
            t: 0,
        }
    }

    /// One round: `v ← W x`, `y ← W y`, `b̂ ← v/y`, `x ← v − γ ∇f(b̂)`.
    pub fn step(&self, st: &mut PushState, w: &WeightMatrix, gamma: f64) -> Result<()> {
        if w.nodes() != self.nodes() || st.x.len() != self.nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes(),
                found: w.nodes(),
            });
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Domain {
                name: "gamma",
                value: gamma,
                domain: "[0, ∞)",
            });
        }
        w.apply_into(&st.x, &mut st.v);
        st.y = w.apply(&st.y);
        st.t += 1;
        for i in 0..self.nodes() {
            let ratio = st.v[i] / st.y[i];
            let (n, s, a) = (self.n[i], self.sigma[i], self.a);
            let (b, g) = match self.param {
                Parametrization::Log => {
                    let b = ratio.exp().clamp(f64::MIN_POSITIVE, f64::MAX);
                    (b, log_gradient_term(b, n, s, a))
                }
                Parametrization::Linear => {
                    let b = ratio.max(B_MIN);
                    (b, gradient_term(b, n, s, a))
                }
            };
            st.b_hat[i] = b;
            st.x[i] = st.v[i] - gamma * g;
            st.lambda_hat[i] = shrink(b, n, s, a);
        }
        Ok(())
    }

    /// Runs `rounds` rounds with `γ(t)` from `steps`.
    pub fn run(
        &self,
        source: &impl WeightSource,
        steps: &StepSchedule,
        rounds: usize,
        readout: &Readout,
    ) -> Result<EbRun> {
        steps.validate()?;
        if source.nodes() != self.nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes(),
                found: source.nodes(),
            });
        }
        let mut trace = Trace::new(readout, self.nodes())?;
        let mut st = self.init();
        trace.offer(0, rounds, &st.b_hat, &st.lambda_hat);
        for t in 0..rounds {
            self.step(&mut st, &source.weights(t), steps.gamma(t + 1))?;
            trace.offer(t + 1, rounds, &st.b_hat, &st.lambda_hat);
        }
        let residual = spread(&st.b_hat);
        Ok(EbRun {
            trace,
            last: st,
            residual,
        })
    }
}

/// Output of [`EmpiricalBayes::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct EbRun {
    pub trace: Trace,
    pub last: PushState,
    /// Final consensus residual `max_{i,k} |b̂_i − b̂_k|`.
    pub residual: f64,
}

pub fn eb_init(data: &NetworkData, a: f64) -> Result<PushState> {
    Ok(EmpiricalBayes::new(data, a, Parametrization::default())?.init())
}

pub fn eb_step(st: &PushState, w: &WeightMatrix, data: &NetworkData, a: f64, gamma_next: f64) -> Result<PushState> {
    let est = EmpiricalBayes::new(data, a, Parametrization::default())?;
    let mut next = st.clone();
    est.step(&mut next, w, gamma_next)?;
    Ok(next)
}

pub fn eb_run(
    data: &NetworkData,
    source: &impl WeightSource,
    a: f64,
    steps: &StepSchedule,
    rounds: usize,
    readout: &Readout,
) -> Result<EbRun> {
    EmpiricalBayes::new(data, a, Parametrization::default())?.run(source, steps, rounds, readout)
}
