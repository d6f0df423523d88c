//! `ibo`: config-driven experiment runner.
//!
//! Every subcommand reads one JSON config, writes its CSV/SVG artifacts to
//! the output directory and finishes with `manifest.json`.
//!
//! Exit codes: 0 success, 1 validation or I/O error, 2 numerical
//! non-convergence (outputs are still written), 3 enumeration budget exceeded.

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use ibo_core::Units;

use crate::commands::Run;
use crate::config::Loaded;
use crate::output::{Outputs, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "ibo", version, about = "Exact information bottleneck experiments on finite worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Information report of one encoder
    Info(Common),
    /// Optimize the encoder for a single multiplier
    Optimize(Common),
    /// Sweep the multiplier and trace the information plane
    Sweep(Common),
    /// Variational upper bound for a list of betas
    Bounds(Common),
    /// Tempered posteriors and the bound of the encoders they induce
    Tempered(Common),
    /// Generalization gap against the mutual-information bound
    Genbound(Common),
    /// Trained-model objective under the loss constraint
    Trained(Common),
    /// Quantized I(X;f(X)) refinement sequence
    Appendix(Common),
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed` in the config)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = UnitsArg::Nats)]
    units: UnitsArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum UnitsArg {
    Nats,
    Bits,
}

impl From<UnitsArg> for Units {
    fn from(u: UnitsArg) -> Self {
        match u {
            UnitsArg::Nats => Units::Nats,
            UnitsArg::Bits => Units::Bits,
        }
    }
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Info(c) => ("info", c),
            Command::Optimize(c) => ("optimize", c),
            Command::Sweep(c) => ("sweep", c),
            Command::Bounds(c) => ("bounds", c),
            Command::Tempered(c) => ("tempered", c),
            Command::Genbound(c) => ("genbound", c),
            Command::Trained(c) => ("trained", c),
            Command::Appendix(c) => ("appendix", c),
        }
    }
}

fn execute(command: Command) -> Result<bool> {
    let (name, common) = command.parts();
    let loaded = Loaded::read(&common.config)?;
    let out_dir = loaded.output_dir(common.out.as_deref());
    let seed = common.seed.unwrap_or(loaded.config.seed);
    let units: Units = common.units.into();
    let run = Run { loaded, seed, units };
    let mut out = Outputs::create(&out_dir)?;
    let converged = match command {
        Command::Info(_) => commands::info(&run, &mut out),
        Command::Optimize(_) => commands::optimize(&run, &mut out),
        Command::Sweep(_) => commands::sweep(&run, &mut out),
        Command::Bounds(_) => commands::bounds(&run, &mut out),
        Command::Tempered(_) => commands::tempered(&run, &mut out),
        Command::Genbound(_) => commands::genbound(&run, &mut out),
        Command::Trained(_) => commands::trained(&run, &mut out),
        Command::Appendix(_) => commands::appendix(&run, &mut out),
    }?;
    let manifest = out.finish(RunManifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: run.loaded.path.display().to_string(),
        config_sha256: run.loaded.sha256.clone(),
        seed,
        units: units.suffix().to_string(),
        outputs: Vec::new(),
        converged,
        wall_time_seconds: 0.0,
    })?;
    for o in &manifest.outputs {
        println!("wrote {} ({})", out_dir.join(&o.file).display(), &o.sha256[..12]);
    }
    if !converged {
        eprintln!("warning: at least one optimization did not converge");
    }
    Ok(converged)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let budget = e
        .chain()
        .any(|c| matches!(c.downcast_ref::<ibo_core::Error>(), Some(ibo_core::Error::BudgetExceeded { .. })));
    if budget {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
