use arrivals_core::adhoc::{AdHoc, Participation};
use arrivals_core::graph::{
    smallest_joint_q, EdgeSet, GraphSchedule, TransitionTracker, WeightCache, WeightSource,
};
use arrivals_core::model::{
    centralized_ml, centralized_ml_fit, network_cost, sample_network, HyperParams, MonitorData,
    NetworkData,
};
use arrivals_core::push::{EmpiricalBayes, Parametrization, StepSchedule};
use arrivals_core::trace::Readout;

fn spread(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn split(n: usize) -> Vec<u64> {
    (0..n).map(|i| if i < n / 2 { 50 } else { 1 }).collect()
}

#[test]
fn adhoc_reaches_pooled_estimate_exponentially() {
    let hp = HyperParams::default();
    let g = GraphSchedule::benchmark_fixed(20).unwrap();
    let data = sample_network(hp, &split(20), 5).unwrap();
    let target = data.b_hom(hp.a);
    let run = AdHoc::new(&data, hp.a, Participation::Included)
        .unwrap()
        .run(&g, 600, &Readout::All)
        .unwrap();
    assert!(run.last.b_hat.iter().all(|b| (b - target).abs() < 1e-6));

    // log of the worst error is linear in t until it reaches machine precision.
    let pts: Vec<(f64, f64)> = (0..run.trace.rounds.len())
        .filter_map(|k| {
            let err = run.trace.b_hat[k].iter().map(|b| (b - target).abs()).fold(0.0, f64::max);
            (err > 1e-13).then(|| (run.trace.rounds[k] as f64, err.ln()))
        })
        .filter(|&(t, _)| t >= 10.0)
        .collect();
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    assert!(slope < 0.0, "slope {slope}");
    assert!(r2 > 0.9, "r² {r2}");
}

#[test]
fn products_are_weakly_ergodic_on_connected_schedules() {
    let g = GraphSchedule::benchmark_fixed(12).unwrap();
    let q = smallest_joint_q(&g, 200, 50).unwrap().unwrap();
    let mut tr = TransitionTracker::new(12);
    let mut prev = tr.delta();
    for window in 0..10 {
        for t in 0..q {
            tr.step(&g.weights(window * q + t)).unwrap();
        }
        assert!(tr.delta() <= prev + 1e-15);
        prev = tr.delta();
    }
    assert!(prev < 0.5);
    assert!(tr.mu_hat() > 0.0);
}

#[test]
fn isolated_node_keeps_its_estimate_until_reached() {
    // Node 2 has no edges during the first five rounds.
    let hp = HyperParams::default();
    let mut steps = vec![EdgeSet::new(3, vec![(0, 1), (1, 0)]).unwrap(); 5];
    steps.push(EdgeSet::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap());
    let g = GraphSchedule::scripted(3, steps).unwrap();
    let data = sample_network(hp, &[4, 2, 7], 3).unwrap();
    let run = AdHoc::new(&data, hp.a, Participation::Included)
        .unwrap()
        .run(&g, 5, &Readout::All)
        .unwrap();
    let first = run.trace.b_hat[0][2];
    assert!(run.trace.b_hat.iter().all(|row| row[2] == first));
}

fn ml_grid(data: &NetworkData, a: f64) -> f64 {
    // Dense log grid, then a fine grid around the best coarse cell.
    let eval = |b: f64| network_cost(data, b, a).unwrap();
    let coarse = (0..=200_000).map(|k| 10f64.powf(-4.0 + 8.0 * k as f64 / 200_000.0));
    let best = coarse.min_by(|x, y| eval(*x).total_cmp(&eval(*y))).unwrap();
    let (lo, hi) = (best * (1.0 - 2e-4), best * (1.0 + 2e-4));
    (0..=800_000)
        .map(|k| lo + (hi - lo) * k as f64 / 800_000.0)
        .min_by(|x, y| eval(*x).total_cmp(&eval(*y)))
        .unwrap()
}

#[test]
fn centralized_ml_matches_grid_search() {
    let a = 10.0;
    let monitors = vec![
        MonitorData::new(0, vec![3, 8, 12, 6]).unwrap(),
        MonitorData::new(1, vec![1]).unwrap(),
        MonitorData::new(2, vec![15, 9, 11]).unwrap(),
        MonitorData::new(3, vec![0, 2]).unwrap(),
    ];
    let data = NetworkData::new(monitors, vec![1.0; 4]).unwrap();
    let grid = ml_grid(&data, a);
    let fit = centralized_ml_fit(&data, a).unwrap();
    assert!((fit.b_hat - grid).abs() / grid < 1e-6, "{} vs {grid}", fit.b_hat);
    assert!(fit.cost <= network_cost(&data, grid, a).unwrap() + 1e-9);
}

fn eb_final(g: &GraphSchedule, seed: u64, rounds: usize) -> (Vec<f64>, f64) {
    let hp = HyperParams::default();
    let data = sample_network(hp, &split(g.nodes()), seed).unwrap();
    let oracle = centralized_ml(&data, hp.a).unwrap();
    let run = EmpiricalBayes::new(&data, hp.a, Parametrization::Log)
        .unwrap()
        .run(g, &StepSchedule::default(), rounds, &Readout::FinalOnly)
        .unwrap();
    (run.last.b_hat, oracle)
}

#[test]
fn subgradient_push_agrees_on_well_mixed_graph() {
    let g = GraphSchedule::erdos_renyi(20, 0.3, 1).unwrap();
    for seed in [41, 42] {
        let (b, oracle) = eb_final(&g, seed, 100_000);
        assert!(spread(&b) < 1e-4, "spread {}", spread(&b));
        assert!(b.iter().all(|x| (x - oracle).abs() < 1e-4));
    }
}

#[test]
fn subgradient_disagreement_shrinks_like_step_size() {
    // On the sparse benchmark graph the spread tracks γ(T) = 1/T.
    let g = GraphSchedule::benchmark_fixed(20).unwrap();
    let (early, _) = eb_final(&g, 41, 10_000);
    let (late, oracle) = eb_final(&g, 41, 100_000);
    let ratio = spread(&late) / spread(&early);
    assert!((0.08..0.12).contains(&ratio), "ratio {ratio}");
    assert!(late.iter().all(|x| (x - oracle).abs() < 1e-3));
}

#[test]
fn subgradient_residual_decays_slower_than_adhoc() {
    let hp = HyperParams::default();
    let g = GraphSchedule::benchmark_fixed(20).unwrap();
    let w = WeightCache::new(&g, 1);
    let data = sample_network(hp, &split(20), 42).unwrap();
    let rounds = 400;
    let ad = AdHoc::new(&data, hp.a, Participation::Included)
        .unwrap()
        .run(&w, rounds, &Readout::FinalOnly)
        .unwrap();
    let eb = EmpiricalBayes::new(&data, hp.a, Parametrization::Log)
        .unwrap()
        .run(&w, &StepSchedule::default(), rounds, &Readout::FinalOnly)
        .unwrap();
    let (ad_res, eb_res) = (spread(&ad.last.b_hat), spread(&eb.last.b_hat));
    assert!(eb_res > 10.0 * ad_res.max(1e-15), "eb {eb_res} adhoc {ad_res}");
}

#[test]
fn homogeneous_sizes_make_both_limits_coincide() {
    let hp = HyperParams::default();
    let g = GraphSchedule::cycle(8).unwrap();
    let data = sample_network(hp, &[6; 8], 77).unwrap();
    let w = WeightCache::new(&g, 1);
    let ad = AdHoc::new(&data, hp.a, Participation::Included)
        .unwrap()
        .run(&w, 3000, &Readout::FinalOnly)
        .unwrap();
    let eb = EmpiricalBayes::new(&data, hp.a, Parametrization::Log)
        .unwrap()
        .run(&w, &StepSchedule::default(), 50_000, &Readout::FinalOnly)
        .unwrap();
    for (x, y) in ad.last.b_hat.iter().zip(&eb.last.b_hat) {
        assert!((x - y).abs() < 1e-3, "{x} vs {y}");
    }
}

#[test]
fn adhoc_consensus_on_random_schedules_after_two_hundred_windows() {
    let hp = HyperParams::default();
    let schedules = [
        GraphSchedule::erdos_renyi(20, 0.01, 4).unwrap(),
        GraphSchedule::erdos_renyi(20, 0.3, 4).unwrap(),
        GraphSchedule::erdos_renyi(30, 0.05, 3).unwrap(),
        GraphSchedule::erdos_renyi(50, 0.02, 4).unwrap(),
    ];
    for (k, g) in schedules.iter().enumerate() {
        let q = smallest_joint_q(g, 2000, 200).unwrap().expect("jointly connected");
        let data = sample_network(hp, &split(g.nodes()), k as u64).unwrap();
        let run = AdHoc::new(&data, hp.a, Participation::Included)
            .unwrap()
            .run(g, 200 * q, &Readout::FinalOnly)
            .unwrap();
        assert!(spread(&run.last.b_hat) < 1e-6, "schedule {k}, Q={q}: {}", spread(&run.last.b_hat));
    }
}

#[test]
fn adhoc_consensus_on_fixed_sparse_graphs() {
    // Q = 1 here; mixing takes on the order of N² rounds.
    let hp = HyperParams::default();
    for g in [
        GraphSchedule::benchmark_fixed(20).unwrap(),
        GraphSchedule::cycle(20).unwrap(),
        GraphSchedule::cycle(50).unwrap(),
    ] {
        let n = g.nodes();
        let data = sample_network(hp, &split(n), n as u64).unwrap();
        let run = AdHoc::new(&data, hp.a, Participation::Included)
            .unwrap()
            .run(&WeightCache::new(&g, 1), 4 * n * n, &Readout::FinalOnly)
            .unwrap();
        assert!(spread(&run.last.b_hat) < 1e-6, "N={n}: {}", spread(&run.last.b_hat));
    }
}
