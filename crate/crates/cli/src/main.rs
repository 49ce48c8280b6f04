//! `greensla`: derives progressive SLA catalogs (availability and price per
//! tier) from energy-aware management simulations, then tests them against a
//! synthetic user population.
//!
//! One subcommand per stage plus `pipeline` to run everything. Stages
//! communicate through files in `--out`, so any stage can be re-run alone.
//!
//! Exit codes: 2 for configuration errors, 3 for missing or malformed data,
//! 4 for internal invariant violations.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use greensla_core::Error;

mod config;
mod report;
mod stages;

use config::PipelineConfig;
use stages::{Ctx, Stage};

#[derive(Debug, Parser)]
#[command(
    name = "greensla",
    version,
    about = "Progressive SLA catalogs for energy-aware clouds"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every stage.
#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; built-in defaults apply when omitted.
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory all artifacts are read from and written to.
    #[arg(short, long, default_value = "out", value_name = "DIR")]
    out: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write the hourly electricity price and temperature series.
    SynthGeo {
        #[command(flatten)]
        common: Common,
        /// Horizon override in hours (whole days).
        #[arg(long)]
        hours: Option<usize>,
    },
    /// Replay every management policy over the series and account energy costs.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Distil the traces into migration stats, savings fits and the downtime surface.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Build the SLA catalog from the measured statistics.
    Catalog {
        #[command(flatten)]
        common: Common,
        /// Number of tiers override.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Synthesize the workload corpora and sample the user population.
    Users {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate every user's walk down the catalog.
    Select {
        #[command(flatten)]
        common: Common,
    },
    /// Score every catalog size and bootstrap the best one.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Smallest catalog size tried.
        #[arg(long)]
        min_size: Option<usize>,
        /// Largest catalog size tried.
        #[arg(long)]
        max_size: Option<usize>,
        /// Independent populations per size.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Condense the artifacts into a human-readable summary.
    Summary {
        #[command(flatten)]
        common: Common,
    },
    /// Run all stages end to end and write the summary.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Number of tiers override.
        #[arg(long)]
        size: Option<usize>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, e)) => {
            eprintln!("greensla: {stage}: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Io { .. } | Error::Malformed { .. } | Error::Data(_) => 3,
                Error::Internal(_) => 4,
            })
        }
    }
}

type StagedResult = Result<(), (&'static str, Error)>;

fn dispatch(cli: Cli) -> StagedResult {
    match cli.cmd {
        Cmd::SynthGeo { common, hours } => {
            let mut ctx = context(&common)?;
            if let Some(h) = hours {
                ctx.cfg.geotemporal.hours = h;
            }
            run_one(&ctx, &stages::SYNTH_GEO)
        }
        Cmd::Simulate { common } => run_one(&context(&common)?, &stages::SIMULATE),
        Cmd::Analyze { common } => run_one(&context(&common)?, &stages::ANALYZE),
        Cmd::Catalog { common, size } => {
            let mut ctx = context(&common)?;
            if let Some(n) = size {
                ctx.cfg.catalog.size = n;
            }
            run_one(&ctx, &stages::CATALOG)
        }
        Cmd::Users { common } => run_one(&context(&common)?, &stages::USERS),
        Cmd::Select { common } => run_one(&context(&common)?, &stages::SELECT),
        Cmd::Sweep {
            common,
            min_size,
            max_size,
            runs,
        } => {
            let mut ctx = context(&common)?;
            if let Some(n) = min_size {
                ctx.cfg.sweep.min_size = n;
            }
            if let Some(n) = max_size {
                ctx.cfg.sweep.max_size = n;
            }
            if let Some(n) = runs {
                ctx.cfg.sweep.runs = n;
            }
            run_one(&ctx, &stages::SWEEP)
        }
        Cmd::Summary { common } => run_one(&context(&common)?, &stages::SUMMARY),
        Cmd::Pipeline { common, size } => {
            let mut ctx = context(&common)?;
            if let Some(n) = size {
                ctx.cfg.catalog.size = n;
            }
            ctx.cfg.validate().map_err(|e| ("config", e))?;
            for stage in stages::PIPELINE {
                stages::run_stage(&ctx, stage).map_err(|e| (stage.name, e))?;
            }
            Ok(())
        }
    }
}

/// Loads the config and applies the flags every stage shares.
fn context(common: &Common) -> Result<Ctx, (&'static str, Error)> {
    let mut cfg = PipelineConfig::load(common.config.as_deref()).map_err(|e| ("config", e))?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(Ctx {
        cfg,
        out: common.out.clone(),
    })
}

fn run_one(ctx: &Ctx, stage: &Stage) -> StagedResult {
    ctx.cfg.validate().map_err(|e| ("config", e))?;
    stages::run_stage(ctx, stage).map_err(|e| (stage.name, e))
}
