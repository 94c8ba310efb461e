//! Deterministic trial driver and the general-purpose Monte Carlo experiment.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Estimator, ExperimentConfig};
use super::stats::SampleStats;
use crate::adhoc::{AdHoc, Participation};
use crate::error::Result;
use crate::graph::{GraphSchedule, WeightCache};
use crate::model::{centralized_ml, decentralized_estimate, sample_network_with, shrink};
use crate::push::EmpiricalBayes;
use crate::trace::Readout;

/// Trials per reduction chunk. Results depend on this value, never on the
/// thread count.
pub const CHUNK: usize = 256;

/// Stream tag reserved for the frozen graph realization.
const GRAPH_STREAM: u64 = u64::MAX;

/// RNG for trial `trial` of the experiment keyed by `(seed, tag)`.
pub fn trial_rng(seed: u64, tag: u64, trial: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(trial);
    rng
}

/// Seed of the single graph realization shared by all trials when frozen.
pub fn frozen_graph_seed(seed: u64, tag: u64) -> u64 {
    trial_rng(seed, tag, GRAPH_STREAM).next_u64()
}

/// Runs `trials` independent trials, each filling a [`SampleStats`] of
/// `layout` series, and reduces them chunk by chunk in trial order.
pub fn run_trials<F>(trials: usize, layout: usize, parallel: bool, trial: F) -> Result<SampleStats>
where
    F: Fn(u64, &mut SampleStats) -> Result<()> + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let run_chunk = |c: usize| -> Result<SampleStats> {
        let mut acc = SampleStats::new(layout);
        for m in c * CHUNK..((c + 1) * CHUNK).min(trials) {
            trial(m as u64, &mut acc)?;
        }
        Ok(acc)
    };
    let parts: Vec<SampleStats> = if parallel {
        (0..chunks).into_par_iter().map(run_chunk).collect::<Result<_>>()?
    } else {
        (0..chunks).map(run_chunk).collect::<Result<_>>()?
    };
    let mut total = SampleStats::new(layout);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// One row of the Monte Carlo summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub estimator: &'static str,
    /// `b` or `lambda`.
    pub quantity: &'static str,
    /// 1-based node, or 0 for network-wide quantities.
    pub node: usize,
    pub trials: u64,
    pub mean: f64,
    pub sd: f64,
    pub bias: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub stats: SampleStats,
    pub rows: Vec<SummaryRow>,
}

struct Slot {
    estimator: Estimator,
    quantity: &'static str,
    node: usize,
}

/// Redraws the network (and the random schedule unless frozen) every trial,
/// runs each configured estimator for `cfg.rounds` rounds and accumulates the
/// final estimates against the ground truth.
pub fn run_montecarlo(cfg: &ExperimentConfig) -> Result<MonteCarloResult> {
    cfg.validate()?;
    const TAG: u64 = 1;
    let sizes = cfg.sizes()?;
    let n = cfg.nodes;
    let hp = cfg.hp;

    let mut slots = Vec::new();
    for &e in &[Estimator::Bhom, Estimator::CentralizedMl] {
        if cfg.wants(e) {
            slots.push(Slot { estimator: e, quantity: "b", node: 0 });
        }
    }
    for &e in &[Estimator::Adhoc, Estimator::Eb] {
        if cfg.wants(e) {
            for i in 0..n {
                slots.push(Slot { estimator: e, quantity: "b", node: i + 1 });
            }
        }
    }
    for &e in &[Estimator::Dec, Estimator::Adhoc, Estimator::Eb, Estimator::CentralizedMl] {
        if cfg.wants(e) {
            for i in 0..n {
                slots.push(Slot { estimator: e, quantity: "lambda", node: i + 1 });
            }
        }
    }
    let index_of = |e: Estimator, q: &str| slots.iter().position(|s| s.estimator == e && s.quantity == q);
    let bhom_at = index_of(Estimator::Bhom, "b");
    let ml_at = index_of(Estimator::CentralizedMl, "b");
    let adhoc_b = index_of(Estimator::Adhoc, "b");
    let eb_b = index_of(Estimator::Eb, "b");
    let dec_l = index_of(Estimator::Dec, "lambda");
    let adhoc_l = index_of(Estimator::Adhoc, "lambda");
    let eb_l = index_of(Estimator::Eb, "lambda");
    let ml_l = index_of(Estimator::CentralizedMl, "lambda");

    let frozen = if !cfg.schedule.is_random() || cfg.freeze_graph {
        let g = cfg.schedule.build(n, frozen_graph_seed(cfg.seed, TAG))?;
        Some(WeightCache::new(&g, cfg.rounds))
    } else {
        None
    };

    let stats = run_trials(cfg.trials, slots.len(), cfg.parallel, |m, acc| {
        let mut rng = trial_rng(cfg.seed, TAG, m);
        let graph_seed = rng.next_u64();
        let data = sample_network_with(hp, &sizes, &mut rng, &[])?;
        let local;
        let weights = match &frozen {
            Some(w) => w,
            None => {
                local = WeightCache::new(&cfg.schedule.build(n, graph_seed)?, cfg.rounds);
                &local
            }
        };
        let lambdas = data.lambdas();
        if let Some(k) = bhom_at {
            acc.push(k, data.b_hom(hp.a), hp.b);
        }
        if let Some(k) = dec_l {
            for (i, m) in data.monitors().iter().enumerate() {
                acc.push(k + i, decentralized_estimate(m), lambdas[i]);
            }
        }
        if ml_at.is_some() || ml_l.is_some() {
            let b_ml = ml_or_guard(&data, hp.a);
            if let Some(k) = ml_at {
                acc.push(k, b_ml, hp.b);
            }
            if let Some(k) = ml_l {
                for (i, m) in data.monitors().iter().enumerate() {
                    acc.push(k + i, shrink(b_ml, m.n() as f64, m.sigma() as f64, hp.a), lambdas[i]);
                }
            }
        }
        if adhoc_b.is_some() || adhoc_l.is_some() {
            let run = AdHoc::new(&data, hp.a, Participation::Included)?.run(weights, cfg.rounds, &Readout::FinalOnly)?;
            for (i, &lam) in lambdas.iter().enumerate() {
                if let Some(k) = adhoc_b {
                    acc.push(k + i, run.last.b_hat[i], hp.b);
                }
                if let Some(k) = adhoc_l {
                    acc.push(k + i, run.last.lambda_hat[i], lam);
                }
            }
        }
        if eb_b.is_some() || eb_l.is_some() {
            let est = EmpiricalBayes::new(&data, hp.a, cfg.parametrization)?;
            let run = est.run(weights, &cfg.steps, cfg.rounds, &Readout::FinalOnly)?;
            for (i, &lam) in lambdas.iter().enumerate() {
                if let Some(k) = eb_b {
                    acc.push(k + i, run.last.b_hat[i], hp.b);
                }
                if let Some(k) = eb_l {
                    acc.push(k + i, run.last.lambda_hat[i], lam);
                }
            }
        }
        Ok(())
    })?;

    let rows = slots
        .iter()
        .zip(&stats.series)
        .map(|(s, st)| SummaryRow {
            estimator: s.estimator.name(),
            quantity: s.quantity,
            node: s.node,
            trials: st.count(),
            mean: st.estimate.mean,
            sd: st.estimate.std_dev(),
            bias: st.error.mean,
            rmse: st.rmse(),
        })
        .collect();
    Ok(MonteCarloResult { stats, rows })
}

/// Centralized ML, falling back to the guarded local form when the network
/// saw no arrivals.
pub(crate) fn ml_or_guard(data: &crate::model::NetworkData, a: f64) -> f64 {
    centralized_ml(data, a).unwrap_or_else(|_| 1.0 / (a * data.n_total() as f64))
}

/// Schedule of the frozen realization, exposed for connectivity checks.
pub fn frozen_schedule(cfg: &ExperimentConfig, tag: u64) -> Result<GraphSchedule> {
    cfg.schedule.build(cfg.nodes, frozen_graph_seed(cfg.seed, tag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::SizePolicy;

    #[test]
    fn serial_and_parallel_reductions_agree() {
        let work = |m: u64, acc: &mut SampleStats| {
            let x = (m as f64 * 0.618).fract();
            acc.push(0, x, 0.5);
            Ok(())
        };
        let s = run_trials(1000, 1, false, work).unwrap();
        let p = run_trials(1000, 1, true, work).unwrap();
        assert_eq!(s, p);
        assert_eq!(s.get(0).count(), 1000);
    }

    #[test]
    fn trial_streams_are_distinct_and_reproducible() {
        let a = trial_rng(7, 1, 0).next_u64();
        assert_eq!(a, trial_rng(7, 1, 0).next_u64());
        assert_ne!(a, trial_rng(7, 1, 1).next_u64());
        assert_ne!(a, trial_rng(7, 2, 0).next_u64());
        assert_ne!(a, trial_rng(8, 1, 0).next_u64());
    }

    #[test]
    fn bhom_is_unbiased() {
        let cfg = ExperimentConfig {
            trials: 4000,
            rounds: 0,
            estimators: vec![Estimator::Bhom],
            ..Default::default()
        };
        let res = run_montecarlo(&cfg).unwrap();
        let s = res.stats.get(0);
        assert!((s.estimate.mean - 1.0).abs() < 3.0 * s.estimate.std_err());
    }

    #[test]
    fn one_trial_degenerates() {
        let cfg = ExperimentConfig {
            trials: 1,
            rounds: 5,
            nodes: 6,
            tracked_nodes: vec![1],
            size_policy: SizePolicy::Homogeneous { n: 2 },
            ..Default::default()
        };
        let res = run_montecarlo(&cfg).unwrap();
        for row in &res.rows {
            assert_eq!(row.trials, 1);
            assert!((row.rmse - row.bias.abs()).abs() < 1e-12);
        }
    }
}
