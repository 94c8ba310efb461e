//! Figure pipelines: Monte Carlo estimates next to their closed-form predictions.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::Serialize;

use super::config::{ExperimentConfig, ScheduleSpec, TargetMode};
use super::montecarlo::{frozen_graph_seed, run_trials, trial_rng};
use crate::adhoc::{AdHoc, Participation};
use crate::error::{Error, Result};
use crate::graph::{GraphSchedule, TransitionTracker, WeightCache, WeightSource};
use crate::model::{ml_fit_from_stats, sample_network_with, HyperParams};
use crate::theory::{self, Conditioning, TheoryInputs};
use crate::trace::Readout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    /// Transient RMSE of `b̂_i(t)` on the fixed benchmark digraph.
    Fig3,
    /// Same on an Erdős–Rényi schedule.
    Fig4,
    /// RMSE of `b̂^hom` and `b̂^ML` against the CRB over a sweep of `N`.
    Fig5,
    /// Normalized RMSE of the rate estimators at a pinned node over a sweep of `N`.
    Fig6,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig3, Figure::Fig4, Figure::Fig5, Figure::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Figure::Fig3 => 300,
            Figure::Fig4 => 400,
            Figure::Fig5 => 500,
            Figure::Fig6 => 600,
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

/// One `(t, node)` point of a transient figure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransientRow {
    pub t: usize,
    /// 1-based.
    pub node: usize,
    pub n_i: u64,
    pub mean_mc: f64,
    pub se_mean_mc: f64,
    pub rmse_mc: f64,
    pub se_rmse_mc: f64,
    /// `√VAR[b̂_i(t)]` along the realized `Φ(t)`.
    pub rmse_theory: f64,
    /// `√VAR[b̂^hom]`, the consensus line.
    pub rmse_consensus: f64,
    /// `|VAR[b̂_i(t)] − VAR[b̂^hom]|`.
    pub var_gap: f64,
    /// Ergodicity bound on `var_gap`.
    pub var_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientFigure {
    pub figure: Figure,
    pub trials: usize,
    pub rows: Vec<TransientRow>,
    /// Bound violations over every node, round and graph realization.
    pub bound_violations: u64,
    /// `(node, t)` checks behind `bound_violations`.
    pub bound_checks: u64,
    /// Smallest `μ̂(t)` seen.
    pub mu_hat_min: f64,
}

impl TransientFigure {
    /// Rows of one 1-based node in time order.
    pub fn node_rows(&self, node: usize) -> Vec<&TransientRow> {
        self.rows.iter().filter(|r| r.node == node).collect()
    }
}

/// Point of the CRB sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrbRow {
    pub nodes: usize,
    pub trials: usize,
    pub rmse_mc_bhom: f64,
    pub se_rmse_bhom: f64,
    pub rmse_mc_ml: f64,
    pub se_rmse_ml: f64,
    pub rmse_theory_bhom: f64,
    /// `√CRB`.
    pub crb: f64,
}

/// Point of the rate-estimation sweep. RMSEs are divided by `√(λ_j/n_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub nodes: usize,
    pub trials: usize,
    pub lambda_j: f64,
    pub n_j: u64,
    pub norm_rmse_dec: f64,
    pub norm_rmse_adhoc: f64,
    pub norm_rmse_eb: f64,
    pub se_adhoc: f64,
    pub se_eb: f64,
    /// Paired standard error of `norm_rmse_eb − norm_rmse_adhoc`.
    pub se_diff: f64,
    /// Closed-form ad-hoc prediction with the consensus variance of `b̂^hom`.
    pub theory_adhoc: f64,
    /// Large-`N` limit shared by both estimators.
    pub asymptote: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FigureOutput {
    Transient(TransientFigure),
    Crb(Vec<CrbRow>),
    Rate(Vec<RateRow>),
}

impl FigureOutput {
    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        match self {
            FigureOutput::Transient(f) => super::output::csv_bytes(&f.rows),
            FigureOutput::Crb(rows) => super::output::csv_bytes(rows),
            FigureOutput::Rate(rows) => super::output::csv_bytes(rows),
        }
    }
}

pub fn figure(cfg: &ExperimentConfig, which: Figure) -> Result<FigureOutput> {
    Ok(match which {
        Figure::Fig3 | Figure::Fig4 => FigureOutput::Transient(transient_figure(cfg, which)?),
        Figure::Fig5 => FigureOutput::Crb(crb_figure(cfg)?),
        Figure::Fig6 => FigureOutput::Rate(rate_figure(cfg)?),
    })
}

fn transient_schedule(cfg: &ExperimentConfig, which: Figure) -> ScheduleSpec {
    match (which, &cfg.schedule) {
        (Figure::Fig3, _) => ScheduleSpec::Benchmark,
        (_, s @ ScheduleSpec::ErdosRenyi { .. }) => s.clone(),
        _ => ScheduleSpec::ErdosRenyi { p: 0.01 },
    }
}

/// Closed-form side of a transient figure along one graph realization.
struct TransientTheory {
    /// `var[t][c]` for tracked column `c`.
    var: Vec<Vec<f64>>,
    violations: u64,
    checks: u64,
    mu_hat_min: f64,
    /// `(μ̂(t), δ(Φ(t)))`.
    ergodicity: Vec<(f64, f64)>,
}

fn transient_theory(
    hp: &HyperParams,
    sizes: &[u64],
    tracked: &[usize],
    weights: &impl WeightSource,
    rounds: usize,
) -> Result<TransientTheory> {
    let n = sizes.len();
    let n_max = *sizes.iter().max().expect("non-empty sizes");
    let consensus = theory::var_bhom(hp, sizes)?;
    let mut tr = TransitionTracker::new(n);
    let mut out = TransientTheory {
        var: Vec::with_capacity(rounds + 1),
        violations: 0,
        checks: 0,
        mu_hat_min: 1.0,
        ergodicity: Vec::with_capacity(rounds + 1),
    };
    for t in 0..=rounds {
        if t > 0 {
            tr.step(&weights.weights(t - 1))?;
        }
        let bound = theory::var_bhom_bound(hp, n_max, tr.mu_hat(), tr.delta().clamp(0.0, 1.0))?;
        let mut row_vars = vec![0.0; n];
        for (i, v) in row_vars.iter_mut().enumerate() {
            *v = theory::var_bhom_transient(hp, sizes, &tr.row(i))?;
            out.checks += 1;
            if !theory::within_bound(*v, consensus, bound) {
                out.violations += 1;
            }
        }
        out.var.push(tracked.iter().map(|&i| row_vars[i]).collect());
        out.mu_hat_min = out.mu_hat_min.min(tr.mu_hat());
        out.ergodicity.push((tr.mu_hat(), tr.delta()));
    }
    Ok(out)
}

pub fn transient_figure(cfg: &ExperimentConfig, which: Figure) -> Result<TransientFigure> {
    cfg.validate()?;
    let spec = transient_schedule(cfg, which);
    let tag = which.tag();
    let hp = cfg.hp;
    let n = cfg.nodes;
    let sizes = cfg.sizes()?;
    let n_max = *sizes.iter().max().expect("validated sizes");
    let tracked = cfg.tracked();
    let k = tracked.len();
    let rounds = cfg.rounds;
    let consensus = theory::var_bhom(&hp, &sizes)?;
    let frozen = !spec.is_random() || cfg.freeze_graph;

    let shared = if frozen {
        let g = spec.build(n, frozen_graph_seed(cfg.seed, tag))?;
        let w = WeightCache::new(&g, rounds);
        let th = transient_theory(&hp, &sizes, &tracked, &w, rounds)?;
        Some((w, th))
    } else {
        None
    };

    // Layout: estimate (t, c), then per-realization theory (t, c), then violations.
    let est_at = |t: usize, c: usize| t * k + c;
    let theory_at = |t: usize, c: usize| (rounds + 1) * k + t * k + c;
    let viol_at = 2 * (rounds + 1) * k;
    let layout = viol_at + 2;

    let estimator = |data: &crate::model::NetworkData| AdHoc::new(data, hp.a, Participation::Included);
    let stats = run_trials(cfg.trials, layout, cfg.parallel, |m, acc| {
        let mut rng = trial_rng(cfg.seed, tag, m);
        let graph_seed = rng.next_u64();
        let data = sample_network_with(hp, &sizes, &mut rng, &[])?;
        let local;
        let weights = match &shared {
            Some((w, _)) => w,
            None => {
                let g: GraphSchedule = spec.build(n, graph_seed)?;
                local = WeightCache::new(&g, rounds);
                let th = transient_theory(&hp, &sizes, &tracked, &local, rounds)?;
                for (t, vars) in th.var.iter().enumerate() {
                    for (c, &v) in vars.iter().enumerate() {
                        acc.push(theory_at(t, c), v, 0.0);
                    }
                }
                acc.push(viol_at, th.violations as f64, 0.0);
                acc.push(viol_at + 1, th.checks as f64, 0.0);
                &local
            }
        };
        let run = estimator(&data)?.run(weights, rounds, &Readout::Nodes(tracked.clone()))?;
        for (r, row) in run.trace.b_hat.iter().enumerate() {
            for (c, &b) in row.iter().enumerate() {
                acc.push(est_at(r, c), b, hp.b);
            }
        }
        Ok(())
    })?;

    let (violations, checks, mu_hat_min) = match &shared {
        Some((_, th)) => (th.violations, th.checks, th.mu_hat_min),
        None => {
            let total = |idx: usize| {
                let s = stats.get(idx).estimate;
                (s.mean * s.count as f64).round() as u64
            };
            (total(viol_at), total(viol_at + 1), f64::NAN)
        }
    };

    let mut rows = Vec::with_capacity((rounds + 1) * k);
    for t in 0..=rounds {
        for (c, &i) in tracked.iter().enumerate() {
            let s = stats.get(est_at(t, c));
            let var_t = match &shared {
                Some((_, th)) => th.var[t][c],
                None => stats.get(theory_at(t, c)).estimate.mean,
            };
            let var_bound = match &shared {
                Some((_, th)) => {
                    let (mu, delta) = th.ergodicity[t];
                    theory::var_bhom_bound(&hp, n_max, mu, delta.clamp(0.0, 1.0))?
                }
                None => f64::NAN,
            };
            rows.push(TransientRow {
                t,
                node: i + 1,
                n_i: sizes[i],
                mean_mc: s.estimate.mean,
                se_mean_mc: s.estimate.std_err(),
                rmse_mc: s.rmse(),
                se_rmse_mc: s.rmse_std_err(),
                rmse_theory: var_t.sqrt(),
                rmse_consensus: consensus.sqrt(),
                var_gap: (var_t - consensus).abs(),
                var_bound,
            });
        }
    }
    Ok(TransientFigure {
        figure: which,
        trials: cfg.trials,
        rows,
        bound_violations: violations,
        bound_checks: checks,
        mu_hat_min,
    })
}

/// CRB sweep using the steady-state values of the distributed estimators:
/// `σ/(a n)` for the ad-hoc consensus and the centralized minimizer for
/// subgradient-push.
pub fn crb_figure(cfg: &ExperimentConfig) -> Result<Vec<CrbRow>> {
    cfg.validate()?;
    let hp = cfg.hp;
    let mut rows = Vec::with_capacity(cfg.sweep.len());
    for (s, &n) in cfg.sweep.iter().enumerate() {
        let sizes = cfg.size_policy.sizes(n)?;
        let tag = Figure::Fig5.tag() + s as u64;
        let stats = run_trials(cfg.trials, 2, cfg.parallel, |m, acc| {
            let mut rng = trial_rng(cfg.seed, tag, m);
            let data = sample_network_with(hp, &sizes, &mut rng, &[])?;
            acc.push(0, data.b_hom(hp.a), hp.b);
            acc.push(1, super::montecarlo::ml_or_guard(&data, hp.a), hp.b);
            Ok(())
        })?;
        rows.push(CrbRow {
            nodes: n,
            trials: cfg.trials,
            rmse_mc_bhom: stats.get(0).rmse(),
            se_rmse_bhom: stats.get(0).rmse_std_err(),
            rmse_mc_ml: stats.get(1).rmse(),
            se_rmse_ml: stats.get(1).rmse_std_err(),
            rmse_theory_bhom: theory::var_bhom(&hp, &sizes)?.sqrt(),
            crb: theory::crb(&hp, &sizes)?.sqrt(),
        });
    }
    Ok(rows)
}

fn guarded_hom(sizes: &[u64], sigmas: &[u64], a: f64) -> f64 {
    let n: u64 = sizes.iter().sum();
    let s: u64 = sigmas.iter().sum();
    s.max(1) as f64 / (a * n as f64)
}

/// Rate-estimation sweep at the last node with `n_j` and `λ_j` pinned, using
/// the steady-state values of both distributed estimators.
pub fn rate_figure(cfg: &ExperimentConfig) -> Result<Vec<RateRow>> {
    cfg.validate()?;
    let hp = cfg.hp;
    let lambda_j = cfg.target.lambda(&hp);
    let n_j = cfg.target.n_j;
    let excluded = cfg.target.mode == TargetMode::Excluded;
    let norm = (lambda_j / n_j as f64).sqrt();
    let mut rows = Vec::with_capacity(cfg.sweep.len());
    for (s, &n) in cfg.sweep.iter().enumerate() {
        let mut sizes = cfg.size_policy.sizes(n)?;
        let j = n - 1;
        sizes[j] = n_j;
        let part: Vec<u64> = if excluded { sizes[..j].to_vec() } else { sizes.clone() };
        let tag = Figure::Fig6.tag() + s as u64;
        let stats = run_trials(cfg.trials, 4, cfg.parallel, |m, acc| {
            let mut rng = trial_rng(cfg.seed, tag, m);
            let data = sample_network_with(hp, &sizes, &mut rng, &[(j, lambda_j)])?;
            let sigmas = data.sigmas();
            let part_sig = if excluded { &sigmas[..j] } else { &sigmas[..] };
            let b_hom = guarded_hom(&part, part_sig, hp.a);
            let b_ml = ml_fit_from_stats(&part, part_sig, hp.a)
                .map(|f| f.b_hat)
                .unwrap_or(b_hom);
            let (nj, sj) = (n_j as f64, sigmas[j] as f64);
            let dec = sj / nj;
            let ad = crate::model::shrink(b_hom, nj, sj, hp.a);
            let eb = crate::model::shrink(b_ml, nj, sj, hp.a);
            acc.push(0, dec, lambda_j);
            acc.push(1, ad, lambda_j);
            acc.push(2, eb, lambda_j);
            acc.push(3, (eb - lambda_j).powi(2) - (ad - lambda_j).powi(2), 0.0);
            Ok(())
        })?;
        let inputs = TheoryInputs {
            hp,
            sample_sizes: sizes.clone(),
            target: j,
            lambda_j,
            conditioning: if excluded { Conditioning::Excluded } else { Conditioning::Included },
        };
        let var_b = theory::var_bhom(&hp, &part)?;
        let ad_theory = theory::adhoc_transient_moments(&inputs, var_b)?.rmse(lambda_j)?;
        let asym = theory::eb_asymptotic_moments(&inputs)?.rmse(lambda_j)?;
        let (r_ad, r_eb) = (stats.get(1).rmse(), stats.get(2).rmse());
        let diff = stats.get(3).estimate;
        rows.push(RateRow {
            nodes: n,
            trials: cfg.trials,
            lambda_j,
            n_j,
            norm_rmse_dec: stats.get(0).rmse() / norm,
            norm_rmse_adhoc: r_ad / norm,
            norm_rmse_eb: r_eb / norm,
            se_adhoc: stats.get(1).rmse_std_err() / norm,
            se_eb: stats.get(2).rmse_std_err() / norm,
            se_diff: diff.std_err() / (r_ad + r_eb) / norm,
            theory_adhoc: ad_theory / norm,
            asymptote: asym / norm,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::SizePolicy;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            trials: 300,
            rounds: 30,
            sweep: vec![2, 8],
            ..Default::default()
        }
    }

    #[test]
    fn figure_names_parse() {
        for f in Figure::ALL {
            assert_eq!(f.name().parse::<Figure>().unwrap(), f);
        }
        assert!(matches!("fig7".parse::<Figure>(), Err(Error::UnknownFigure(_))));
    }

    #[test]
    fn transient_theory_starts_at_local_variance() {
        let fig = transient_figure(&small(), Figure::Fig3).unwrap();
        let first = &fig.node_rows(11)[0];
        assert_eq!(first.t, 0);
        assert!((first.rmse_theory - 0.2f64.sqrt()).abs() < 1e-12);
        assert_eq!(fig.rows.len(), 31 * 4);
        assert_eq!(fig.bound_violations, 0);
        assert!(fig.mu_hat_min > 0.0);
    }

    #[test]
    fn homogeneous_control_matches_crb() {
        let cfg = ExperimentConfig {
            size_policy: SizePolicy::Homogeneous { n: 5 },
            ..small()
        };
        for row in crb_figure(&cfg).unwrap() {
            assert!((row.rmse_theory_bhom - row.crb).abs() < 1e-12 * row.crb);
        }
    }

    #[test]
    fn rate_rows_carry_the_asymptote() {
        let rows = rate_figure(&small()).unwrap();
        for r in &rows {
            assert!((r.asymptote - 0.527).abs() < 5e-4);
            assert!(r.theory_adhoc >= r.asymptote);
        }
        // Two nodes with the target excluded: both estimators see a single node.
        assert!((rows[0].norm_rmse_adhoc - rows[0].norm_rmse_eb).abs() < 1e-9);
    }

    #[test]
    fn unfrozen_random_schedule_runs() {
        let cfg = ExperimentConfig {
            trials: 20,
            rounds: 10,
            freeze_graph: false,
            ..Default::default()
        };
        let fig = transient_figure(&cfg, Figure::Fig4).unwrap();
        assert_eq!(fig.bound_violations, 0);
        assert_eq!(fig.bound_checks, 20 * 11 * 20);
        assert!(fig.rows.iter().all(|r| r.rmse_theory > 0.0));
    }
}
