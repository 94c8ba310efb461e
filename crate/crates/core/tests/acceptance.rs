//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use arrivals_core::adhoc::{AdHoc, Participation};
use arrivals_core::experiments::figures::{crb_figure, rate_figure, transient_figure, Figure};
use arrivals_core::experiments::{self, ExperimentConfig, ScheduleSpec, SizePolicy};
use arrivals_core::graph::{GraphSchedule, TransitionTracker, WeightCache, WeightSource};
use arrivals_core::model::{
    centralized_ml, log_marginal, ml_gradient, sample_network, HyperParams, MonitorData,
};
use arrivals_core::push::{EmpiricalBayes, Parametrization, StepSchedule};
use arrivals_core::theory::{self, Conditioning, TheoryInputs};
use arrivals_core::trace::Readout;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn split_sizes(n: usize) -> Vec<u64> {
    (0..n).map(|i| if i < n / 2 { 50 } else { 1 }).collect()
}

fn consensus_limit() -> Outcome {
    let start = Instant::now();
    let hp = HyperParams::default();
    let g = GraphSchedule::benchmark_fixed(20).unwrap();
    let w = WeightCache::new(&g, 1);
    let mut worst = 0.0f64;
    let mut ok = 0;
    for seed in 0..100 {
        let data = sample_network(hp, &split_sizes(20), 10_000 + seed).unwrap();
        let run = AdHoc::new(&data, hp.a, Participation::Included)
            .unwrap()
            .run(&w, 2000, &Readout::FinalOnly)
            .unwrap();
        let target = data.b_hom(hp.a);
        let gap = run.last.b_hat.iter().map(|b| (b - target).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
        if gap < 1e-8 {
            ok += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        ok == 100 && elapsed < Duration::from_secs(5),
        format!("{ok}/100 trials within 1e-8 (worst {worst:.2e}), {:.2}s", elapsed.as_secs_f64()),
    )
}

fn homogeneous_equivalence() -> Outcome {
    let hp = HyperParams::default();
    let mut worst = 0.0f64;
    for seed in 0..1000 {
        let data = sample_network(hp, &[5; 20], 20_000 + seed).unwrap();
        let ml = centralized_ml(&data, hp.a).unwrap();
        let hom = data.b_hom(hp.a);
        worst = worst.max((ml - hom).abs() / hom);
    }
    outcome(worst < 1e-8, format!("1000 trials, worst relative gap {worst:.2e}"))
}

fn fig3_config() -> ExperimentConfig {
    ExperimentConfig {
        trials: 10_000,
        rounds: 400,
        ..Default::default()
    }
}

fn unbiasedness(fig: &experiments::figures::TransientFigure) -> Outcome {
    let last = fig.rows.iter().map(|r| r.t).max().unwrap();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for r in fig.rows.iter().filter(|r| [0, 5, 50, last].contains(&r.t)) {
        worst = worst.max((r.mean_mc - 1.0).abs() / r.se_mean_mc);
        checked += 1;
    }
    outcome(
        worst < 3.0 && checked == 16,
        format!("{checked} (t, node) points at t ∈ {{0, 5, 50, {last}}}, worst |z| = {worst:.2}"),
    )
}

fn transient_variance(fig: &experiments::figures::TransientFigure, elapsed: Duration) -> Outcome {
    let worst = fig
        .rows
        .iter()
        .map(|r| (r.rmse_mc / r.rmse_theory - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        worst < 0.03 && elapsed < Duration::from_secs(120),
        format!(
            "{} points, worst relative deviation {:.2}%, {:.1}s",
            fig.rows.len(),
            100.0 * worst,
            elapsed.as_secs_f64()
        ),
    )
}

fn ergodicity_bound(fig3: &experiments::figures::TransientFigure) -> Outcome {
    let hp = HyperParams::default();
    let mut checks = fig3.bound_checks;
    let mut violations = fig3.bound_violations;

    // Frozen and redrawn Erdős–Rényi schedules.
    for freeze in [true, false] {
        let cfg = ExperimentConfig {
            trials: if freeze { 500 } else { 200 },
            rounds: 400,
            freeze_graph: freeze,
            ..Default::default()
        };
        let fig = transient_figure(&cfg, Figure::Fig4).unwrap();
        checks += fig.bound_checks;
        violations += fig.bound_violations;
    }

    // Random denser schedules over several sizes.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..40 {
        let n = rng.random_range(2..40usize);
        let p = rng.random_range(0.0..0.3);
        let sizes: Vec<u64> = (0..n).map(|_| rng.random_range(1..=50)).collect();
        let n_max = *sizes.iter().max().unwrap();
        let g = GraphSchedule::erdos_renyi(n, p, rng.random()).unwrap();
        let consensus = theory::var_bhom(&hp, &sizes).unwrap();
        let mut tr = TransitionTracker::new(n);
        for t in 0..300 {
            if t > 0 {
                tr.step(&g.weights(t - 1)).unwrap();
            }
            let bound = theory::var_bhom_bound(&hp, n_max, tr.mu_hat(), tr.delta().min(1.0)).unwrap();
            for i in 0..n {
                let v = theory::var_bhom_transient(&hp, &sizes, &tr.row(i)).unwrap();
                checks += 1;
                if !theory::within_bound(v, consensus, bound) {
                    violations += 1;
                }
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations in {checks} checks"))
}

fn crb_attainment() -> Outcome {
    let cfg = ExperimentConfig {
        trials: 10_000,
        sweep: vec![8, 16, 32],
        ..Default::default()
    };
    let rows = crb_figure(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &rows {
        let ml = r.rmse_mc_ml / r.crb - 1.0;
        let hom = r.rmse_mc_bhom / r.rmse_theory_bhom - 1.0;
        pass &= ml.abs() < 0.05 && hom.abs() < 0.03 && r.rmse_mc_ml <= r.rmse_mc_bhom;
        parts.push(format!("N={}: ml {:+.2}%, hom {:+.2}%", r.nodes, 100.0 * ml, 100.0 * hom));
    }
    outcome(pass, parts.join("; "))
}

fn fig6_behavior() -> Outcome {
    let cfg = ExperimentConfig {
        trials: 10_000,
        ..Default::default()
    };
    let rows = rate_figure(&cfg).unwrap();
    let inversions = |f: &dyn Fn(&experiments::figures::RateRow) -> f64| {
        rows.windows(2).filter(|w| f(&w[1]) > f(&w[0])).count()
    };
    let inv_ad = inversions(&|r| r.norm_rmse_adhoc);
    let inv_eb = inversions(&|r| r.norm_rmse_eb);
    // At N = 2 both estimators reduce to the same statistic and differ by rounding only.
    let eb_le = rows
        .iter()
        .all(|r| r.norm_rmse_eb <= r.norm_rmse_adhoc * (1.0 + 1e-12));
    let r16 = rows.iter().find(|r| r.nodes == 16).unwrap();
    let gap16 = (r16.norm_rmse_adhoc - r16.norm_rmse_eb).abs() / r16.norm_rmse_adhoc;
    let r64 = rows.iter().find(|r| r.nodes == 64).unwrap();
    let asym = (r64.norm_rmse_adhoc / 0.527 - 1.0).abs();
    let pass = inv_ad <= 1 && inv_eb <= 1 && eb_le && gap16 < 0.02 && asym < 0.05;
    let curve = |f: fn(&experiments::figures::RateRow) -> f64| {
        rows.iter().map(|r| format!("{:.3}", f(r))).collect::<Vec<_>>().join(" ")
    };
    outcome(
        pass,
        format!(
            "adhoc [{}] eb [{}]; inversions {inv_ad}/{inv_eb}; eb ≤ adhoc: {eb_le}; N=16 gap {:.2}%; N=64 vs 0.527 {:.2}%",
            curve(|r| r.norm_rmse_adhoc),
            curve(|r| r.norm_rmse_eb),
            100.0 * gap16,
            100.0 * asym
        ),
    )
}

fn subgradient_push() -> Outcome {
    let hp = HyperParams::default();
    let g = GraphSchedule::benchmark_fixed(20).unwrap();
    let w = WeightCache::new(&g, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for k in 0..20 {
        // Random inhomogeneous sizes, always including both extremes.
        let mut sizes: Vec<u64> = (0..20).map(|_| rng.random_range(1..=50)).collect();
        sizes[0] = 50;
        sizes[19] = 1;
        let data = sample_network(hp, &sizes, 30_000 + k).unwrap();
        let oracle = centralized_ml(&data, hp.a).unwrap();
        let est = EmpiricalBayes::new(&data, hp.a, Parametrization::Log).unwrap();
        let run = est.run(&w, &StepSchedule::default(), 100_000, &Readout::FinalOnly).unwrap();
        for &b in &run.last.b_hat {
            worst = worst.max((b - oracle).abs());
        }
    }
    outcome(worst < 1e-3, format!("20 instances, worst |b̂_i − b̂^ML| = {worst:.2e}"))
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut parts = Vec::new();
    let mut pass = true;

    let mut worst_fd = 0.0f64;
    for _ in 0..1000 {
        let b = 10f64.powf(rng.random_range(-3.0..3.0));
        let n = rng.random_range(1..=50u64);
        let s = rng.random_range(0..=2000u64);
        let a = rng.random_range(0.1..50.0);
        let h = 1e-6 * b;
        let (nf, sf) = (n as f64, s as f64);
        // Log ratios taken directly so the large cost terms never cancel.
        let diff = (sf + a) * (2.0 * nf * h / (1.0 + nf * (b - h))).ln_1p() - sf * (2.0 * h / (b - h)).ln_1p();
        let fd = diff / (2.0 * h);
        let g = ml_gradient(b, n, s, a).unwrap();
        let scale = g.abs().max(fd.abs()).max(1e-300);
        let trunc = ((sf + a) * nf / (1.0 + nf * b) + sf / b) * 1e-11;
        let rel = ((g - fd).abs() - trunc).max(0.0) / scale;
        worst_fd = worst_fd.max(rel);
    }
    pass &= worst_fd < 1e-6;
    parts.push(format!("gradient/FD {worst_fd:.1e}"));

    let mut worst_mass = 0.0f64;
    let mut worst_cols = 0.0f64;
    let hp = HyperParams::default();
    for k in 0..30 {
        let n = rng.random_range(2..30usize);
        let g = GraphSchedule::erdos_renyi(n, rng.random_range(0.0..0.4), k).unwrap();
        let sizes: Vec<u64> = (0..n).map(|_| rng.random_range(1..=50)).collect();
        let data = sample_network(hp, &sizes, k).unwrap();
        let ad = AdHoc::new(&data, hp.a, Participation::Included).unwrap();
        let eb = EmpiricalBayes::new(&data, hp.a, Parametrization::Log).unwrap();
        let mut sa = ad.init();
        let mut se = eb.init();
        let mut tr = TransitionTracker::new(n);
        let (s0, e0) = (sa.s.sum(), sa.eta.sum());
        for t in 0..200 {
            let w = g.weights_at(t);
            ad.step(&mut sa, &w).unwrap();
            let (x_mass, x_l1) = (se.x.sum(), se.x.abs().sum());
            eb.step(&mut se, &w, 1.0 / (t + 1) as f64).unwrap();
            tr.step(&w).unwrap();
            worst_mass = worst_mass
                .max((sa.s.sum() - s0).abs() / s0)
                .max((sa.eta.sum() - e0).abs() / e0)
                .max((se.y.sum() - n as f64).abs() / n as f64)
                .max((se.v.sum() - x_mass).abs() / x_l1.max(1.0));
            for c in w.column_sums().into_iter().chain(tr.column_sums()) {
                worst_cols = worst_cols.max((c - 1.0).abs());
            }
        }
    }
    pass &= worst_mass < 1e-8 && worst_cols < 1e-10;
    parts.push(format!("mass {worst_mass:.1e}, column sums {worst_cols:.1e}"));

    let total: f64 = (0..=200u64)
        .map(|y| log_marginal(&MonitorData::new(1, vec![y]).unwrap(), 1.0, 10.0).unwrap().exp())
        .sum();
    pass &= (total - 1.0).abs() < 1e-6;
    parts.push(format!("pmf mass {:.1e}", (total - 1.0).abs()));

    let mut thm_exact = true;
    let mut worst_rmse = 0.0f64;
    for _ in 0..1000 {
        let inputs = TheoryInputs {
            hp: HyperParams::new(rng.random_range(0.5..30.0), rng.random_range(0.05..5.0)).unwrap(),
            sample_sizes: vec![rng.random_range(1..=50), 3],
            target: 0,
            lambda_j: rng.random_range(0.1..40.0),
            conditioning: Conditioning::Excluded,
        };
        let a = theory::adhoc_transient_moments(&inputs, 0.0).unwrap();
        let e = theory::eb_asymptotic_moments(&inputs).unwrap();
        thm_exact &= a == e;
        let truth = rng.random_range(0.0..40.0);
        let r = theory::rmse(a.mean, a.var, truth).unwrap();
        let resid = (r * r - a.var - (a.mean - truth).powi(2)).abs() / (r * r).max(1e-300);
        worst_rmse = worst_rmse.max(resid);
    }
    pass &= thm_exact && worst_rmse < 8.0 * f64::EPSILON;
    parts.push(format!("thm2(0)=thm1 {thm_exact}, rmse identity {worst_rmse:.1e}"));
    outcome(pass, parts.join("; "))
}

fn determinism(dir: &Path) -> Outcome {
    let base = ExperimentConfig {
        trials: 700,
        rounds: 60,
        sweep: vec![2, 8],
        ..Default::default()
    };
    let mut same = true;
    let mut files = 0;
    let run = |cfg: &ExperimentConfig, sub: &str| -> Vec<(String, Vec<u8>)> {
        let d = dir.join(sub);
        let mut arts = Vec::new();
        for fig in Figure::ALL {
            arts.extend(experiments::write_figure(cfg, fig, &d).unwrap().artifacts);
        }
        arts.extend(experiments::write_montecarlo(cfg, &d).unwrap().1.artifacts);
        arts.extend(experiments::write_simulation(cfg, &d).unwrap().1.artifacts);
        arts.into_iter()
            .map(|a| {
                let bytes = std::fs::read(d.join(&a.file)).unwrap();
                (a.file, bytes)
            })
            .collect()
    };
    let serial = run(&ExperimentConfig { parallel: false, ..base.clone() }, "serial");
    let parallel = run(&ExperimentConfig { parallel: true, ..base.clone() }, "parallel");
    let again = run(&ExperimentConfig { parallel: true, ..base.clone() }, "again");
    let random = ExperimentConfig {
        schedule: ScheduleSpec::ErdosRenyi { p: 0.05 },
        freeze_graph: false,
        size_policy: SizePolicy::Homogeneous { n: 3 },
        ..base.clone()
    };
    let r1 = run(&ExperimentConfig { parallel: false, ..random.clone() }, "random_serial");
    let r2 = run(&ExperimentConfig { parallel: true, ..random }, "random_parallel");
    for (a, b) in [(&serial, &parallel), (&parallel, &again), (&r1, &r2)] {
        same &= a.len() == b.len();
        for ((fa, ba), (fb, bb)) in a.iter().zip(b.iter()) {
            same &= fa == fb && ba == bb;
            files += 1;
        }
    }
    outcome(same, format!("{files} CSV pairs compared byte for byte"))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();

    results.push((1, "consensus limit", consensus_limit()));
    results.push((2, "homogeneous equivalence", homogeneous_equivalence()));

    let start = Instant::now();
    let fig3 = transient_figure(&fig3_config(), Figure::Fig3).expect("fig3 pipeline");
    let fig3_time = start.elapsed();
    results.push((3, "unbiasedness", unbiasedness(&fig3)));
    results.push((4, "transient variance", transient_variance(&fig3, fig3_time)));
    results.push((5, "ergodicity bound", ergodicity_bound(&fig3)));
    results.push((6, "CRB attainment", crb_attainment()));
    results.push((7, "rate sweep behavior", fig6_behavior()));
    results.push((8, "subgradient-push oracle", subgradient_push()));
    results.push((9, "property suites", property_suites()));
    results.push((10, "determinism", determinism(dir.path())));

    let mut failed = 0;
    for (k, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {k:>2} {name}: {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
