//! `pguide`: degrade, restore, evaluate and verify.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input or configuration.

mod commands;
mod measurement;
mod pnm;
mod settings;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use pguide::theory::VerifyOptions;

use commands::{DenoiserSpec, DEGRADE_KEYS, RESTORE_KEYS};
use measurement::Task;
use settings::Settings;

/// Bad input or configuration; maps to exit code 2.
#[derive(Debug)]
pub struct Invalid(String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let validation = err.chain().any(|e| {
        e.downcast_ref::<Invalid>().is_some()
            || e.downcast_ref::<pguide::Error>()
                .is_some_and(pguide::Error::is_validation)
    });
    if validation {
        2
    } else {
        1
    }
}

#[derive(Parser)]
#[command(
    name = "pguide",
    version,
    about = "Image restoration with preconditioned guidance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a measurement y = A x + e.
    Degrade(DegradeArgs),
    /// Restore an image from a measurement.
    Restore(RestoreArgs),
    /// PSNR and MSE against references.
    Eval {
        /// Reference image; repeat once per restored image, or give one for all.
        #[arg(long = "reference", short = 'r', required = true)]
        references: Vec<PathBuf>,
        #[arg(required = true)]
        restored: Vec<PathBuf>,
    },
    /// Numerical checks of the guidance theory.
    Verify {
        /// claim1..claim4 or theorem1; repeatable, default all.
        #[arg(long = "claim")]
        claims: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        mc_draws: Option<usize>,
        #[arg(long, hide = true)]
        force_equal_singular_values: bool,
    },
    /// Wiener denoiser: <input.pgt> <output.pgt> <sigma>.
    #[command(hide = true)]
    Denoise {
        input: PathBuf,
        output: PathBuf,
        sigma: f64,
    },
}

#[derive(Args)]
struct DegradeArgs {
    /// key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<Task>,
    /// Kernel text file: "H W" then H*W values.
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[arg(long)]
    scale: Option<usize>,
    /// Mask text file: "H W" then H*W zeros and ones.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    sigma_e: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// PGM/PPM or PGT1 image.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Measurement tensor; the record goes to <output>.meta.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RestoreArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    measurement: Option<PathBuf>,
    /// Defaults to <measurement>.meta.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// idpg, idbp, pgm_ls or ddpg.
    #[arg(long)]
    method: Option<String>,
    /// identity, gaussian, wiener or external:<command>.
    #[arg(long)]
    denoiser: Option<DenoiserSpec>,
    /// Defaults to the value in the measurement record.
    #[arg(long)]
    sigma_e: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    eta_tilde: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "T", id = "steps")]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// unit or ddim-ratio.
    #[arg(long)]
    step_size: Option<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Optional 8-bit PGM/PPM export.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Defaults to <output>.trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn base(config: &Option<PathBuf>, keys: &[&str]) -> Result<Settings> {
    match config {
        Some(path) => Settings::load(path, keys),
        None => Ok(Settings::default()),
    }
}

fn degrade_settings(a: &DegradeArgs) -> Result<Settings> {
    let mut s = base(&a.config, DEGRADE_KEYS)?;
    s.set("task", a.task);
    s.set("kernel", a.kernel.as_ref().map(|p| p.display()));
    s.set("scale", a.scale);
    s.set("mask", a.mask.as_ref().map(|p| p.display()));
    s.set("sigma_e", a.sigma_e);
    s.set("seed", a.seed);
    s.set("input", a.input.as_ref().map(|p| p.display()));
    s.set("output", a.output.as_ref().map(|p| p.display()));
    Ok(s)
}

fn restore_settings(a: &RestoreArgs) -> Result<Settings> {
    let mut s = base(&a.config, RESTORE_KEYS)?;
    s.set("measurement", a.measurement.as_ref().map(|p| p.display()));
    s.set("sidecar", a.sidecar.as_ref().map(|p| p.display()));
    s.set("method", a.method.as_ref());
    s.set("denoiser", a.denoiser.as_ref());
    s.set("sigma_e", a.sigma_e);
    s.set("gamma", a.gamma);
    s.set("zeta", a.zeta);
    s.set("eta_tilde", a.eta_tilde);
    s.set("c", a.c);
    s.set("T", a.steps);
    s.set("seed", a.seed);
    s.set("step_size", a.step_size.as_ref());
    s.set("output", a.output.as_ref().map(|p| p.display()));
    s.set("image", a.image.as_ref().map(|p| p.display()));
    s.set("trace", a.trace.as_ref().map(|p| p.display()));
    Ok(s)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Degrade(a) => commands::cmd_degrade(&degrade_settings(&a)?),
        Command::Restore(a) => commands::cmd_restore(&restore_settings(&a)?),
        Command::Eval {
            references,
            restored,
        } => commands::cmd_eval(&restored, &references),
        Command::Verify {
            claims,
            seed,
            instances,
            mc_draws,
            force_equal_singular_values,
        } => {
            let d = VerifyOptions::default();
            let opts = VerifyOptions {
                seed: seed.unwrap_or(d.seed),
                instances: instances.unwrap_or(d.instances),
                mc_draws: mc_draws.unwrap_or(d.mc_draws),
                force_equal_singular_values,
            };
            commands::cmd_verify(&claims, &opts)
        }
        Command::Denoise {
            input,
            output,
            sigma,
        } => commands::cmd_denoise(&input, &output, sigma),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&invalid("x")), 2);
        let e: anyhow::Error = pguide::Error::Assumption("(b)".into()).into();
        assert_eq!(exit_code(&e.context("claim4")), 2);
        let e: anyhow::Error = pguide::Error::Numerical("nan".into()).into();
        assert_eq!(exit_code(&e), 1);
    }

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
