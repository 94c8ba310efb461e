use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adhoc::Participation;
use crate::error::{Error, Result};
use crate::graph::GraphSchedule;
use crate::model::HyperParams;
use crate::push::{Parametrization, StepSchedule};

/// Desk-scale trial count.
pub const DEFAULT_TRIALS: usize = 10_000;
/// Trial count of the published experiments.
pub const PAPER_TRIALS: usize = 50_000;

/// How per-node sample sizes are assigned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizePolicy {
    /// The first `⌊N/2⌋` nodes hold `n_max` measurements, the rest one each.
    HalfMaxHalfOne { n_max: u64 },
    Explicit { sizes: Vec<u64> },
    Homogeneous { n: u64 },
}

impl Default for SizePolicy {
    fn default() -> Self {
        SizePolicy::HalfMaxHalfOne { n_max: 50 }
    }
}

impl SizePolicy {
    pub fn sizes(&self, nodes: usize) -> Result<Vec<u64>> {
        let sizes = match self {
            SizePolicy::HalfMaxHalfOne { n_max } => {
                (0..nodes).map(|i| if i < nodes / 2 { *n_max } else { 1 }).collect()
            }
            SizePolicy::Homogeneous { n } => vec![*n; nodes],
            SizePolicy::Explicit { sizes } => {
                if sizes.len() != nodes {
                    return Err(Error::DimensionMismatch {
                        expected: nodes,
                        found: sizes.len(),
                    });
                }
                sizes.clone()
            }
        };
        if sizes.contains(&0) {
            return Err(Error::InvalidParameter("sample sizes must be ≥ 1".into()));
        }
        Ok(sizes)
    }
}

/// Communication schedule family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum ScheduleSpec {
    /// Directed cycle plus `3→1, 3→2, 4→1, 4→2`.
    #[default]
    Benchmark,
    Cycle,
    ErdosRenyi { p: f64 },
    /// Script file in the `i>k` line format.
    Scripted { path: PathBuf },
}

impl ScheduleSpec {
    /// Builds the schedule; `graph_seed` only matters for random families.
    pub fn build(&self, nodes: usize, graph_seed: u64) -> Result<GraphSchedule> {
        match self {
            ScheduleSpec::Benchmark => GraphSchedule::benchmark_fixed(nodes),
            ScheduleSpec::Cycle => GraphSchedule::cycle(nodes),
            ScheduleSpec::ErdosRenyi { p } => GraphSchedule::erdos_renyi(nodes, *p, graph_seed),
            ScheduleSpec::Scripted { path } => {
                let text = std::fs::read_to_string(path)?;
                GraphSchedule::parse_scripted(nodes, &text)
            }
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, ScheduleSpec::ErdosRenyi { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Dec,
    Adhoc,
    Eb,
    CentralizedMl,
    Bhom,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Dec => "dec",
            Estimator::Adhoc => "adhoc",
            Estimator::Eb => "eb",
            Estimator::CentralizedMl => "centralized_ml",
            Estimator::Bhom => "bhom",
        }
    }
}

/// Participation of the conditioned node in the rate-estimation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    #[default]
    Excluded,
    Included,
}

/// The conditioned node of the rate-estimation sweep: always the last node,
/// with its sample size forced to `n_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSpec {
    pub n_j: u64,
    /// Defaults to the prior mode `(a − 1) b` (or `b·a` when `a ≤ 1`).
    pub lambda_j: Option<f64>,
    pub mode: TargetMode,
}

impl Default for TargetSpec {
    fn default() -> Self {
        Self {
            n_j: 1,
            lambda_j: None,
            mode: TargetMode::Excluded,
        }
    }
}

impl TargetSpec {
    pub fn lambda(&self, hp: &HyperParams) -> f64 {
        self.lambda_j
            .unwrap_or(if hp.a > 1.0 { (hp.a - 1.0) * hp.b } else { hp.a * hp.b })
    }
}

/// Every knob of a run. Missing JSON fields take these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hp: HyperParams,
    /// Node count `N` for single-size experiments.
    pub nodes: usize,
    pub size_policy: SizePolicy,
    pub schedule: ScheduleSpec,
    /// Monte Carlo trials `M`.
    pub trials: usize,
    /// Consensus rounds `T`.
    pub rounds: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// 1-based nodes recorded in transient experiments.
    pub tracked_nodes: Vec<usize>,
    /// Node counts of the size sweeps.
    pub sweep: Vec<usize>,
    pub target: TargetSpec,
    pub steps: StepSchedule,
    pub parametrization: Parametrization,
    /// Reuse one graph realization across trials.
    pub freeze_graph: bool,
    pub parallel: bool,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hp: HyperParams::default(),
            nodes: 20,
            size_policy: SizePolicy::default(),
            schedule: ScheduleSpec::default(),
            trials: DEFAULT_TRIALS,
            rounds: 400,
            seed: 2015,
            estimators: vec![
                Estimator::Dec,
                Estimator::Adhoc,
                Estimator::Eb,
                Estimator::CentralizedMl,
                Estimator::Bhom,
            ],
            tracked_nodes: vec![1, 2, 11, 12],
            sweep: vec![2, 4, 8, 16, 32, 64],
            target: TargetSpec::default(),
            steps: StepSchedule::default(),
            parametrization: Parametrization::default(),
            freeze_graph: true,
            parallel: true,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        self.steps.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be ≥ 1".into()));
        }
        if self.nodes < 2 {
            return Err(Error::InvalidParameter("distributed runs need N ≥ 2".into()));
        }
        if let Some(&bad) = self.tracked_nodes.iter().find(|&&i| i == 0 || i > self.nodes) {
            return Err(Error::InvalidParameter(format!(
                "tracked node {bad} outside 1..={}",
                self.nodes
            )));
        }
        if let Some(&bad) = self.sweep.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidParameter(format!("sweep entry N={bad} below 2")));
        }
        if self.target.n_j == 0 {
            return Err(Error::InvalidParameter("target n_j must be ≥ 1".into()));
        }
        if let Some(l) = self.target.lambda_j {
            crate::error::require_positive("target.lambda_j", l)?;
        }
        if let ScheduleSpec::ErdosRenyi { p } = self.schedule {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("edge probability {p} not in [0,1]")));
            }
        }
        self.sizes()?;
        Ok(())
    }

    pub fn sizes(&self) -> Result<Vec<u64>> {
        self.size_policy.sizes(self.nodes)
    }

    /// 0-based tracked nodes.
    pub fn tracked(&self) -> Vec<usize> {
        self.tracked_nodes.iter().map(|&i| i - 1).collect()
    }

    pub fn wants(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }

    /// Ad-hoc participation for a node count, per the target spec.
    pub fn participation(&self, nodes: usize) -> Participation {
        match self.target.mode {
            TargetMode::Included => Participation::Included,
            TargetMode::Excluded => Participation::Excluded {
                node: nodes - 1,
                proxy: nodes - 2,
            },
        }
    }
}
