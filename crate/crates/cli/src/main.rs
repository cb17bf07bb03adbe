//! `trajvoi` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 the run
//! completed but some cells failed (see the error records in `voi.jsonl`).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use trajvoi::degrade::DegradationKind;
use trajvoi::pipeline::{self, EquivalenceQuery, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "trajvoi", version, about = "Value of information of GPS trajectories")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; omitted fields take their defaults.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override the seed list of the degradation matrix with a single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Process only the first N trajectories.
    #[arg(long, global = true)]
    limit: Option<usize>,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse PLT files into segmented trajectories.
    Ingest {
        /// Root of the PLT tree (overrides dataset.plt_root).
        #[arg(long)]
        plt_root: Option<PathBuf>,
    },
    /// Write degraded copies of the trajectory set.
    Degrade,
    /// Evaluate information gain over the degradation × prior matrix.
    Voi,
    /// Compute baseline metrics per trajectory.
    Baselines,
    /// Correlate information gain with the baselines.
    Analyze,
    /// Find the parameter of another degradation family with equal value.
    Equivalence {
        #[arg(long)]
        trajectory: String,
        #[arg(long, value_enum)]
        source: Family,
        #[arg(long)]
        param: f64,
        #[arg(long, value_enum)]
        target: Family,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Family {
    Perturbation,
    Truncation,
    Subsampling,
}

impl From<Family> for DegradationKind {
    fn from(f: Family) -> Self {
        match f {
            Family::Perturbation => DegradationKind::Perturbation,
            Family::Truncation => DegradationKind::Truncation,
            Family::Subsampling => DegradationKind::Subsampling,
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.degradation.seeds = vec![seed];
    }
    if let Some(limit) = common.limit {
        cfg.limit = Some(limit);
    }
    if let Some(jobs) = common.jobs {
        cfg.jobs = jobs;
    }
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Ingest { plt_root } => {
            if plt_root.is_some() {
                cfg.dataset.plt_root = plt_root;
            }
            let m = pipeline::run_ingest(&cfg).context("ingest failed")?;
            log::info!(
                "read {} files, {} records ({} lines skipped); {} trajectories, {} measurements",
                m.files_read,
                m.records_parsed,
                m.lines_skipped,
                m.trajectories_produced,
                m.measurements_retained
            );
        }
        Command::Degrade => {
            let files = pipeline::run_degrade(&cfg).context("degrade failed")?;
            log::info!("wrote {} degraded trajectory files", files.len());
        }
        Command::Voi => {
            let run = pipeline::run_voi(&cfg).context("voi failed")?;
            log::info!("{} cells evaluated, {} failed", run.outcomes.len(), run.failures);
            if run.failures > 0 {
                eprintln!("{} cells failed; see error records in {}", run.failures, pipeline::VOI_JSONL_FILE);
                return Ok(ExitCode::from(2));
            }
        }
        Command::Baselines => {
            let rows = pipeline::run_baselines(&cfg).context("baselines failed")?;
            log::info!("{} baseline rows", rows.len());
        }
        Command::Analyze => {
            let report = pipeline::run_analyze(&cfg).context("analyze failed")?;
            for c in report.study.ig.iter().chain(&report.study.baseline) {
                println!("{:<16} {:<20} rho={:+.3} n={} ({})", c.x, c.y, c.rho, c.n, c.strength());
            }
            for pair in &report.study.undefined {
                println!("{pair}: undefined (constant column)");
            }
        }
        Command::Equivalence {
            trajectory,
            source,
            param,
            target,
        } => {
            let query = EquivalenceQuery {
                trajectory_id: trajectory,
                source: source.into(),
                source_param: param,
                target: target.into(),
            };
            let report = pipeline::run_equivalence(&cfg, &query).context("equivalence failed")?;
            let eq = &report.equivalence;
            match eq.ig_bit_seconds {
                None => println!("source parameter {param} is outside the evaluated range"),
                Some(ig) if eq.crossing.is_empty() => {
                    println!("IG {ig:.6e} bit·s: no {} parameter reaches this value", target.into_name())
                }
                Some(ig) => {
                    println!("IG {ig:.6e} bit·s");
                    for p in &eq.crossing.params {
                        println!("  {} = {p}", target.into_name());
                    }
                    for (a, b) in &eq.crossing.overlaps {
                        println!("  {} in [{a}, {b}]", target.into_name());
                    }
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

impl Family {
    fn into_name(self) -> &'static str {
        DegradationKind::from(self).name()
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
