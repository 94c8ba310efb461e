//! Monte Carlo harness, figure pipelines and artifact emission.
//!
//! Every trial draws from its own ChaCha20 stream keyed by `(seed, experiment
//! tag, trial index)`. Trials are grouped in fixed chunks that are reduced in
//! order, so serial and parallel runs produce bit-identical statistics.

pub mod config;
pub mod figures;
pub mod montecarlo;
pub mod output;
pub mod simulate;
pub mod stats;

use std::path::Path;

use serde::Serialize;

pub use config::{Estimator, ExperimentConfig, ScheduleSpec, SizePolicy, TargetMode, TargetSpec};
pub use figures::{figure, Figure, FigureOutput};
pub use montecarlo::{run_montecarlo, run_trials, trial_rng};
pub use output::{Artifact, RunManifest};
pub use simulate::simulate;
pub use stats::{Accumulator, SampleStats, SeriesStats};

use crate::error::Result;
use crate::graph::{smallest_joint_q, verify_joint_connectivity, Connectivity};
use crate::theory::{theory_report, Conditioning, TheoryInputs, TheoryReport};

/// Runs a figure pipeline and writes `<fig>.csv` plus the manifest into `dir`.
pub fn write_figure(cfg: &ExperimentConfig, which: Figure, dir: &Path) -> Result<RunManifest> {
    let out = figure(cfg, which)?;
    let art = output::write_artifact(dir, &format!("{which}.csv"), &out.csv_bytes()?)?;
    let manifest = RunManifest::new(format!("figure {which}"), cfg, vec![art]);
    manifest.write(dir)?;
    Ok(manifest)
}

/// Runs the Monte Carlo summary and writes `montecarlo.csv` plus the manifest.
pub fn write_montecarlo(cfg: &ExperimentConfig, dir: &Path) -> Result<(montecarlo::MonteCarloResult, RunManifest)> {
    let res = run_montecarlo(cfg)?;
    let art = output::write_artifact(dir, "montecarlo.csv", &output::csv_bytes(&res.rows)?)?;
    let manifest = RunManifest::new("montecarlo", cfg, vec![art]);
    manifest.write(dir)?;
    Ok((res, manifest))
}

/// Runs one trial and writes the per-round traces plus the manifest.
pub fn write_simulation(cfg: &ExperimentConfig, dir: &Path) -> Result<(simulate::SimulateSummary, RunManifest)> {
    let res = simulate(cfg)?;
    let mut arts = Vec::new();
    if let Some(run) = &res.adhoc {
        let rows = simulate::adhoc_records(&run.trace, 0);
        arts.push(output::write_artifact(dir, "simulate_adhoc.csv", &output::csv_bytes(&rows)?)?);
    }
    if let Some(run) = &res.eb {
        let rows = simulate::eb_records(&run.trace, 0);
        arts.push(output::write_artifact(dir, "simulate_eb.csv", &output::csv_bytes(&rows)?)?);
    }
    let manifest = RunManifest::new("simulate", cfg, arts);
    manifest.write(dir)?;
    Ok((res.summary, manifest))
}

/// Closed-form report for the configured network with the last node as target.
pub fn theory_for(cfg: &ExperimentConfig) -> Result<TheoryReport> {
    cfg.validate()?;
    let mut sizes = cfg.sizes()?;
    let j = sizes.len() - 1;
    sizes[j] = cfg.target.n_j;
    let inputs = TheoryInputs {
        hp: cfg.hp,
        sample_sizes: sizes,
        target: j,
        lambda_j: cfg.target.lambda(&cfg.hp),
        conditioning: match cfg.target.mode {
            TargetMode::Excluded => Conditioning::Excluded,
            TargetMode::Included => Conditioning::Included,
        },
    };
    theory_report(&inputs, None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectivityReport {
    pub q: usize,
    pub horizon: usize,
    pub holds: bool,
    pub first_failing_window: Option<usize>,
    pub windows_checked: usize,
    /// Smallest window length that works over the horizon, if any up to `q_max`.
    pub smallest_q: Option<usize>,
}

/// Joint-connectivity check of the configured schedule (frozen realization).
pub fn check_connectivity(cfg: &ExperimentConfig, q: usize, horizon: usize, q_max: usize) -> Result<ConnectivityReport> {
    cfg.validate()?;
    let g = montecarlo::frozen_schedule(cfg, 2)?;
    let Connectivity {
        holds,
        first_failing_window,
        windows_checked,
    } = verify_joint_connectivity(&g, q, horizon)?;
    Ok(ConnectivityReport {
        q,
        horizon,
        holds,
        first_failing_window,
        windows_checked,
        smallest_q: smallest_joint_q(&g, horizon, q_max)?,
    })
}
