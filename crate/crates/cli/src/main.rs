//! `rezone`: reserve-zone design studies from the command line.
//!
//! Exit codes: 0 solved (within the requested gap), 1 configuration or
//! input error, 2 model infeasible, 3 solver limit reached, 4 internal
//! certification failure (big-M audit or lower-level objective mismatch).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::LimitReached;
use config::{ModelKind, RunConfig};
use rezone_core::markets::MarketError;
use rezone_core::partition::PartitionError;
use rezone_core::zonal::ZonalError;

#[derive(Parser)]
#[command(
    name = "rezone",
    about = "Design reserve zones and requirements for wind-dominated power systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct ConfigArg {
    /// Path to the TOML run manifest.
    #[arg(long, env = "REZONE_CONFIG")]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample (and optionally reduce) wind scenarios to a columnar file.
    Scen {
        #[command(flatten)]
        config: ConfigArg,
        /// Override the sampling seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the raw sample count.
        #[arg(long)]
        count: Option<usize>,
        /// Override the fast-forward reduction target.
        #[arg(long)]
        reduce_to: Option<usize>,
        /// Output file (default <out-dir>/scenarios.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Clear one market design and write the run report and cost tables.
    Solve {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        zones: Option<usize>,
        #[arg(long)]
        chi: Option<f64>,
        #[arg(long)]
        y_min: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Additionally dump the assembled zonal MILP as MPS.
        #[arg(long)]
        export_mps: bool,
    },
    /// Out-of-sample stability harness over freshly seeded scenario sets.
    Stability {
        #[command(flatten)]
        config: ConfigArg,
        /// Override the number of scenario sets (first one trains).
        #[arg(long)]
        omegas: Option<usize>,
        /// Parallel evaluations.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write the assembled zonal MILP in fixed-format MPS.
    Export {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Case-file utilities.
    Case {
        #[command(subcommand)]
        sub: CaseCmd,
    },
}

#[derive(Subcommand)]
enum CaseCmd {
    /// Validate a case document and print diagnostics.
    Validate { case: PathBuf },
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<LimitReached>().is_some() {
            return 3;
        }
        if let Some(z) = cause.downcast_ref::<ZonalError>() {
            return match z {
                ZonalError::Certification(_) => 4,
                ZonalError::Infeasible(_) => 2,
                ZonalError::Partition(PartitionError::SizingInfeasible { .. }) => 2,
                ZonalError::Config(_) => 1,
                _ => 2,
            };
        }
        if let Some(m) = cause.downcast_ref::<MarketError>() {
            return match m {
                MarketError::Infeasible { .. } | MarketError::Unbounded { .. } => 2,
                MarketError::Internal(_) => 4,
                _ => 1,
            };
        }
        if let Some(p) = cause.downcast_ref::<PartitionError>() {
            return match p {
                PartitionError::SizingInfeasible { .. } => 2,
                _ => 1,
            };
        }
        if let Some(b) = cause.downcast_ref::<rezone_core::benders::BendersError>() {
            return match b {
                rezone_core::benders::BendersError::Zonal(ZonalError::Certification(_)) => 4,
                rezone_core::benders::BendersError::MasterFailed(msg, _)
                    if msg.contains("infeasible") =>
                {
                    2
                }
                rezone_core::benders::BendersError::SubproblemFailed(..) => 4,
                _ => 1,
            };
        }
    }
    1
}

fn apply_solve_overrides(
    cfg: &mut RunConfig,
    model: Option<ModelKind>,
    q: Option<f64>,
    zones: Option<usize>,
    chi: Option<f64>,
    y_min: Option<u32>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
) {
    if let Some(m) = model {
        cfg.model = m;
    }
    if let Some(v) = q {
        cfg.q = v;
    }
    if let Some(v) = zones {
        cfg.zones = v;
    }
    if let Some(v) = chi {
        cfg.chi = v;
    }
    if y_min.is_some() {
        cfg.y_min = y_min;
    }
    if let Some(v) = seed {
        cfg.scenarios.seed = v;
    }
    if let Some(d) = out_dir {
        cfg.out_dir = d;
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Scen {
            config,
            seed,
            count,
            reduce_to,
            out,
        } => {
            let mut cfg = RunConfig::load(&config.config)?;
            if let Some(s) = seed {
                cfg.scenarios.seed = s;
            }
            if let Some(c) = count {
                cfg.scenarios.count = c;
            }
            if reduce_to.is_some() {
                cfg.scenarios.reduce_to = reduce_to;
            }
            cfg.validate()?;
            commands::cmd_scen(&cfg, out)
        }
        Cmd::Solve {
            config,
            model,
            q,
            zones,
            chi,
            y_min,
            seed,
            out_dir,
            export_mps,
        } => {
            let mut cfg = RunConfig::load(&config.config)?;
            apply_solve_overrides(&mut cfg, model, q, zones, chi, y_min, seed, out_dir);
            cfg.validate()?;
            commands::cmd_solve(&cfg, export_mps)
        }
        Cmd::Stability {
            config,
            omegas,
            jobs,
        } => {
            let mut cfg = RunConfig::load(&config.config)?;
            if let Some(o) = omegas {
                cfg.stability.omegas = o;
            }
            cfg.validate()?;
            commands::cmd_stability(&cfg, jobs)
        }
        Cmd::Export { config, out } => {
            let cfg = RunConfig::load(&config.config)?;
            commands::cmd_export(&cfg, out)
        }
        Cmd::Case { sub } => match sub {
            CaseCmd::Validate { case } => commands::cmd_case_validate(&case),
        },
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
