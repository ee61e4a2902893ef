//! `largen`: run large-N scenarios from JSON configs and write CSV/JSON results.
//!
//! Exit codes: 0 success, 1 I/O, 2 invalid config, 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use largen_core::ToleranceSpec;
use serde::de::DeserializeOwned;

use config::ToleranceOverride;
use run::{Failure, Output};

#[derive(Parser, Debug)]
#[command(name = "largen", version, about = "Large-N quantum dynamics scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Radial Schrödinger evolution of the O(N) quantum roll.
    QuantumRoll(Common),
    /// `y_min(N)` scan, critical `N_c` and an optional NLO potential profile.
    EffpotScan(Common),
    /// Pair creation in a homogeneous field with Maxwell backreaction.
    Schwinger(Common),
    /// Uncertainty function and x-p correlation over time.
    Classicality(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config (default: current dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel scans.
    #[arg(long, env = "LARGEN_THREADS")]
    threads: Option<usize>,
    /// Absolute integration tolerance.
    #[arg(long)]
    tol_abs: Option<f64>,
    /// Relative integration tolerance.
    #[arg(long)]
    tol_rel: Option<f64>,
}

impl Common {
    /// Flag, then the config's `tolerance` block, then the default.
    fn tolerance(&self, from_config: Option<ToleranceOverride>) -> Result<ToleranceSpec, Failure> {
        let base = ToleranceSpec::default();
        let cfg = from_config.unwrap_or(ToleranceOverride {
            abs_tol: None,
            rel_tol: None,
            max_steps: None,
        });
        run::check_tolerance(ToleranceSpec {
            abs_tol: self.tol_abs.or(cfg.abs_tol).unwrap_or(base.abs_tol),
            rel_tol: self.tol_rel.or(cfg.rel_tol).unwrap_or(base.rel_tol),
            max_steps: cfg.max_steps.unwrap_or(base.max_steps),
        })
    }

    fn out_dir(&self, from_config: Option<&PathBuf>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| from_config.cloned())
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn load<T: DeserializeOwned>(&self) -> Result<T, Failure> {
        if !self.config.is_file() {
            return Err(Failure::Io(anyhow!(
                "config {} not found",
                self.config.display()
            )));
        }
        config::load(&self.config).map_err(Failure::Validation)
    }
}

fn setup_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Validation(anyhow!("`--threads` must be >= 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Io(anyhow!(e)))?;
    }
    Ok(())
}

fn write_outputs(dir: &Path, out: &Output) -> Result<(), Failure> {
    let io = |e: anyhow::Error| Failure::Io(e);
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(io)?;
    for (name, body) in &out.files {
        let path = dir.join(name);
        std::fs::write(&path, body)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(io)?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let result = match &cli.command {
        Command::QuantumRoll(c) => {
            let cfg: config::QuantumRollConfig = c.load()?;
            setup_threads(c.threads)?;
            c.tolerance(cfg.tolerance)?;
            run::quantum_roll(&cfg).map(|o| (o, c.out_dir(cfg.out.as_ref())))
        }
        Command::EffpotScan(c) => {
            let cfg: config::EffpotScanConfig = c.load()?;
            setup_threads(c.threads)?;
            let tol = c.tolerance(cfg.tolerance)?;
            run::effpot_scan(&cfg, tol).map(|o| (o, c.out_dir(cfg.out.as_ref())))
        }
        Command::Schwinger(c) => {
            let cfg: config::SchwingerConfig = c.load()?;
            setup_threads(c.threads)?;
            let tol = c.tolerance(cfg.tolerance)?;
            run::schwinger(&cfg, tol).map(|o| (o, c.out_dir(cfg.out.as_ref())))
        }
        Command::Classicality(c) => {
            let cfg: config::ClassicalityConfig = c.load()?;
            setup_threads(c.threads)?;
            let tol = c.tolerance(cfg.tolerance)?;
            run::classicality(&cfg, tol).map(|o| (o, c.out_dir(cfg.out.as_ref())))
        }
    };
    let (output, dir) = result?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    write_outputs(&dir, &output)?;
    for line in &output.stdout {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let label = match f {
                Failure::Io(_) => "io error",
                Failure::Validation(_) => "invalid config",
                Failure::Numerical(_) => "numerical failure",
            };
            eprintln!("{label}: {:#}", f.error());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
