//! `tomo`: generalized Radon transforms and quantum tomography from the shell.
//!
//! Exit codes: 0 on success, 2 on invalid input or configuration, 3 when a
//! numerical budget is exceeded.

mod config;
mod io;
mod quantum;
mod radon;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde_json::Value;

use quantum::{Gtomo, Qtomo};
use radon::{BackprojectOpts, ForwardOpts, InvertOpts, PhantomOpts, ReportOpts};

#[derive(Parser, Debug)]
#[command(name = "tomo", version, about = "Generalized Radon transforms and quantum tomography")]
struct Cli {
    /// JSON file with option values; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// sample a test phantom on a grid
    Phantom(PhantomOpts),
    /// tomogram table of a field
    Forward(ForwardOpts),
    /// field from a tomogram table
    Invert(InvertOpts),
    /// unfiltered backprojection of a sinogram
    Backproject(BackprojectOpts),
    /// coherent-state tomography
    #[command(subcommand)]
    Qtomo(Qtomo),
    /// group-representation tomography
    #[command(subcommand)]
    Gtomo(Gtomo),
    /// round trips for every geometry with a JSON report
    Report(ReportOpts),
}

fn run(cli: Cli) -> Result<()> {
    let file: Option<Value> = cli.config.as_deref().map(config::load).transpose()?;
    let file = file.as_ref();
    use config::resolve;
    match cli.command {
        Command::Phantom(o) => radon::phantom(resolve(&o, file)?),
        Command::Forward(o) => radon::forward(resolve(&o, file)?),
        Command::Invert(o) => radon::invert(resolve(&o, file)?),
        Command::Backproject(o) => radon::backproject_cmd(resolve(&o, file)?),
        Command::Report(o) => radon::report(resolve(&o, file)?),
        Command::Qtomo(q) => quantum::qtomo(match q {
            Qtomo::Husimi(o) => Qtomo::Husimi(resolve(&o, file)?),
            Qtomo::Phi(o) => Qtomo::Phi(resolve(&o, file)?),
            Qtomo::Quantize(o) => Qtomo::Quantize(resolve(&o, file)?),
            Qtomo::Reconstruct(o) => Qtomo::Reconstruct(resolve(&o, file)?),
            Qtomo::Star(o) => Qtomo::Star(resolve(&o, file)?),
        }),
        Command::Gtomo(g) => quantum::gtomo(match g {
            Gtomo::Spin(o) => Gtomo::Spin(resolve(&o, file)?),
            Gtomo::Fourier(o) => Gtomo::Fourier(resolve(&o, file)?),
            Gtomo::Gram(o) => Gtomo::Gram(resolve(&o, file)?),
        }),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let budget = err
        .chain()
        .filter_map(|e| e.downcast_ref::<tomo_core::TomoError>())
        .any(|e| e.is_budget());
    if budget {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = tomo_core::thread_cap() {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("TOMO_THREADS ignored: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
