use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use arrivals_core::experiments::{
    self, config::PAPER_TRIALS, ExperimentConfig, Figure, RunManifest, ScheduleSpec,
};

/// Simulator for distributed Poisson arrival-rate estimation.
#[derive(Debug, Parser)]
#[command(name = "arrivals", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the JSON config (or the defaults).
#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials M.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Use the published trial count.
    #[arg(long, global = true, conflicts_with = "trials")]
    paper_scale: bool,
    /// Consensus rounds T.
    #[arg(long, global = true)]
    rounds: Option<usize>,
    /// Node count N.
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Erdős–Rényi edge probability; switches the schedule to a random one.
    #[arg(long, global = true)]
    er_p: Option<f64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Share one graph realization across trials.
    #[arg(long, global = true, conflicts_with = "redraw_graph")]
    freeze_graph: bool,
    /// Redraw random schedules every trial.
    #[arg(long, global = true)]
    redraw_graph: bool,
    /// Run trials on a single thread (results are identical either way).
    #[arg(long, global = true)]
    serial: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One seeded trial with per-round traces of both distributed estimators.
    Simulate,
    /// Monte Carlo summary of every configured estimator.
    Montecarlo,
    /// Figure pipeline: MC and closed-form columns.
    Figure {
        /// fig3, fig4, fig5 or fig6.
        which: String,
    },
    /// Closed-form report for the configured network.
    Theory,
    /// Uniform joint strong connectivity of the configured schedule.
    CheckConnectivity {
        /// Window length Q.
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        /// Largest Q tried when searching for the smallest working window.
        #[arg(long, default_value_t = 200)]
        q_max: usize,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::from_path(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = c.trials {
        cfg.trials = m;
    }
    if c.paper_scale {
        cfg.trials = PAPER_TRIALS;
    }
    if let Some(t) = c.rounds {
        cfg.rounds = t;
    }
    if let Some(n) = c.nodes {
        cfg.nodes = n;
        cfg.tracked_nodes.retain(|&i| i <= n);
    }
    if let Some(p) = c.er_p {
        cfg.schedule = ScheduleSpec::ErdosRenyi { p };
    }
    if let Some(d) = &c.out_dir {
        cfg.out_dir = d.clone();
    }
    if c.freeze_graph {
        cfg.freeze_graph = true;
    }
    if c.redraw_graph {
        cfg.freeze_graph = false;
    }
    if c.serial {
        cfg.parallel = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(manifest: &RunManifest, dir: &std::path::Path) {
    for a in &manifest.artifacts {
        println!("wrote {} ({} bytes, sha256 {})", dir.join(&a.file).display(), a.bytes, a.sha256);
    }
    println!("wrote {}", dir.join(experiments::output::MANIFEST_FILE).display());
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli.common)?;
    let dir = cfg.out_dir.clone();
    match cli.command {
        Command::Simulate => {
            let (summary, manifest) = experiments::write_simulation(&cfg, &dir)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            report(&manifest, &dir);
        }
        Command::Montecarlo => {
            let (_, manifest) = experiments::write_montecarlo(&cfg, &dir)?;
            report(&manifest, &dir);
        }
        Command::Figure { which } => {
            let fig: Figure = which.parse()?;
            let manifest = experiments::write_figure(&cfg, fig, &dir)?;
            report(&manifest, &dir);
        }
        Command::Theory => {
            let rep = experiments::theory_for(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
        }
        Command::CheckConnectivity { q, horizon, q_max } => {
            let rep = experiments::check_connectivity(&cfg, q, horizon, q_max)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            if !rep.holds {
                std::process::exit(2);
            }
        }
    }
    Ok(())
}
