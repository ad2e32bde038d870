use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use pguide::denoisers::{ExternalCommand, WienerPrior};
use pguide::guidance::eta_from_noise;
use pguide::io::{read_tensor, write_tensor};
use pguide::metrics::{degrade, mse, psnr, NoiseSpec};
use pguide::schemes::{self, Method, StepSizePolicy};
use pguide::theory::{verify_claim, Claim, VerifyOptions};
use pguide::{Denoiser, Image, SchemeConfig, Shape};

use crate::measurement::{load_image, require_file, OperatorSpec, Record};
use crate::settings::Settings;
use crate::{invalid, pnm};

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn nonneg(v: f64, name: &str) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be finite and >= 0, got {v}")))
    }
}

pub const DEGRADE_KEYS: &[&str] = &[
    "task", "kernel", "scale", "mask", "sigma_e", "seed", "input", "output",
];

/// Writes `y = A x + e`, its sidecar record and a config echo.
pub fn cmd_degrade(s: &Settings) -> Result<ExitCode> {
    let input: PathBuf = s.require("input")?;
    let output: PathBuf = s.require("output")?;
    let operator = OperatorSpec::from_settings(s)?;
    let sigma_e = nonneg(s.or("sigma_e", 0.0)?, "sigma_e")?;
    let seed: u64 = s.or("seed", 0)?;

    let x = load_image(&input)?;
    let op = operator.build(x.shape())?;
    let y = degrade(&op, &x, &NoiseSpec::new(sigma_e, seed)?)?;
    write_tensor(&output, &y).with_context(|| format!("writing {}", output.display()))?;
    Record {
        operator: operator.clone(),
        sigma_e,
        seed,
        input: x.shape(),
    }
    .write(&Record::sidecar_path(&output))?;

    let mut echo = Settings::default();
    operator.record(&mut echo);
    echo.insert("sigma_e", sigma_e);
    echo.insert("seed", seed);
    echo.insert("input", input.display());
    echo.insert("output", output.display());
    echo.write(&with_suffix(&output, ".cfg"), "pguide degrade")?;
    println!("{} {} -> {}", output.display(), x.shape(), y.shape());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserSpec {
    Identity,
    Gaussian,
    Wiener,
    External(String),
}

impl DenoiserSpec {
    fn build(&self, shape: Shape) -> Result<Denoiser> {
        Ok(match self {
            Self::Identity => Denoiser::Identity,
            Self::Gaussian => Denoiser::gaussian_smooth(),
            Self::Wiener => {
                Denoiser::WienerMmse(WienerPrior::default_for(shape.height, shape.width)?)
            }
            Self::External(cmd) => Denoiser::External(ExternalCommand::parse(cmd)?),
        })
    }
}

impl fmt::Display for DenoiserSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => f.write_str("identity"),
            Self::Gaussian => f.write_str("gaussian"),
            Self::Wiener => f.write_str("wiener"),
            Self::External(cmd) => write!(f, "external:{cmd}"),
        }
    }
}

impl FromStr for DenoiserSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(Self::Identity),
            "gaussian" => Ok(Self::Gaussian),
            "wiener" => Ok(Self::Wiener),
            _ => match s.strip_prefix("external:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(Self::External(cmd.trim().to_string())),
                _ => Err("expected identity, gaussian, wiener or external:<command>".into()),
            },
        }
    }
}

pub const RESTORE_KEYS: &[&str] = &[
    "measurement",
    "sidecar",
    "method",
    "denoiser",
    "sigma_e",
    "gamma",
    "zeta",
    "eta_tilde",
    "c",
    "T",
    "seed",
    "step_size",
    "output",
    "image",
    "trace",
];

/// Runs the selected scheme on a measurement; writes the estimate, the
/// trace, an optional 8-bit export and the resolved config.
pub fn cmd_restore(s: &Settings) -> Result<ExitCode> {
    let measurement: PathBuf = s.require("measurement")?;
    require_file(&measurement, "measurement")?;
    let sidecar: PathBuf = s.or("sidecar", Record::sidecar_path(&measurement))?;
    let record = Record::load(&sidecar)?;
    let output: PathBuf = s.require("output")?;
    let image: Option<PathBuf> = s.parsed("image")?;
    let trace_path: Option<PathBuf> = s.parsed("trace")?;
    let denoiser: DenoiserSpec = s.or("denoiser", DenoiserSpec::Wiener)?;
    let eta_tilde = nonneg(s.or("eta_tilde", 0.7)?, "eta_tilde")?;

    let mut cfg = SchemeConfig {
        method: s.or("method", Method::Idpg)?,
        c: s.or("c", 1.0)?,
        gamma: s.or("gamma", 8.0)?,
        zeta: s.or("zeta", 0.5)?,
        sigma_e: s.or("sigma_e", record.sigma_e)?,
        seed: s.or("seed", 0)?,
        steps: s.or("T", schemes::DEFAULT_STEPS)?,
        step_size: s.or("step_size", StepSizePolicy::Unit)?,
        ..SchemeConfig::default()
    };
    cfg.eta = eta_from_noise(cfg.sigma_e, eta_tilde);
    cfg.validate()?;

    let mut echo = Settings::default();
    echo.insert("measurement", measurement.display());
    echo.insert("sidecar", sidecar.display());
    echo.insert("method", cfg.method);
    echo.insert("denoiser", &denoiser);
    echo.insert("sigma_e", cfg.sigma_e);
    echo.insert("gamma", cfg.gamma);
    echo.insert("zeta", cfg.zeta);
    echo.insert("eta_tilde", eta_tilde);
    echo.insert("c", cfg.c);
    echo.insert("T", cfg.steps);
    echo.insert("seed", cfg.seed);
    echo.insert("step_size", cfg.step_size);
    echo.insert("output", output.display());
    echo.set("image", image.as_ref().map(|p| p.display()));
    echo.set("trace", trace_path.as_ref().map(|p| p.display()));

    let y: Image = read_tensor(&measurement)?;
    let op = record.operator.build(record.input)?;
    let den = denoiser.build(record.input)?;
    let (x, trace) = schemes::restore(&den, &op, &y, &cfg)
        .with_context(|| format!("{} on {}", cfg.method, measurement.display()))?;

    write_tensor(&output, &x).with_context(|| format!("writing {}", output.display()))?;
    if let Some(path) = &image {
        std::fs::write(path, pnm::encode(&x)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let trace_path = trace_path.unwrap_or_else(|| with_suffix(&output, ".trace"));
    std::fs::write(
        &trace_path,
        format!("# t delta objective residual\n{}", trace.to_lines()),
    )
    .with_context(|| format!("writing {}", trace_path.display()))?;
    echo.write(&with_suffix(&output, ".cfg"), "pguide restore")?;

    let residual = op.apply(&x)?.sub(&y).norm();
    println!(
        "{} method={} steps={} eta={:e} residual={:e}",
        output.display(),
        cfg.method,
        trace.len(),
        cfg.eta,
        residual
    );
    Ok(ExitCode::SUCCESS)
}

/// Prints `name psnr mse` per image and a `mean` line; values are clamped
/// to `[0, 1]` first.
pub fn cmd_eval(restored: &[PathBuf], references: &[PathBuf]) -> Result<ExitCode> {
    if references.len() != 1 && references.len() != restored.len() {
        return Err(invalid(format!(
            "{} images but {} references; give one reference or one per image",
            restored.len(),
            references.len()
        )));
    }
    let mut rows = Vec::with_capacity(restored.len());
    for (i, path) in restored.iter().enumerate() {
        let reference = &references[if references.len() == 1 { 0 } else { i }];
        let x = load_image(path)?.clamp(0.0, 1.0);
        let r = load_image(reference)?.clamp(0.0, 1.0);
        let p = psnr(&x, &r, 1.0)
            .with_context(|| format!("{} vs {}", path.display(), reference.display()))?;
        rows.push((path.display().to_string(), p, mse(&x, &r)?));
    }
    let n = rows.len() as f64;
    for (name, p, m) in &rows {
        println!("{name} {p:.2} {m:e}");
    }
    let mean_psnr = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let mean_mse = rows.iter().map(|r| r.2).sum::<f64>() / n;
    println!("mean {mean_psnr:.2} {mean_mse:e}");
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_verify(claims: &[String], opts: &VerifyOptions) -> Result<ExitCode> {
    let selected = if claims.is_empty() {
        Claim::ALL.to_vec()
    } else {
        claims
            .iter()
            .map(|c| Claim::parse(c))
            .collect::<pguide::Result<Vec<_>>>()?
    };
    let mut passed = 0;
    for claim in &selected {
        let report = verify_claim(*claim, opts).with_context(|| claim.name())?;
        println!("{}", report.line());
        passed += report.passed as usize;
    }
    println!("{passed}/{} passed seed={}", selected.len(), opts.seed);
    Ok(if passed == selected.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

/// Wiener denoiser with the default prior, in the external-command calling
/// convention.
pub fn cmd_denoise(input: &Path, output: &Path, sigma: f64) -> Result<ExitCode> {
    require_file(input, "input")?;
    let x: Image = read_tensor(input)?;
    let s = x.shape();
    let den = DenoiserSpec::Wiener.build(s)?;
    let out = pguide::denoisers::Denoise::denoise(&den, &x, sigma)?;
    write_tensor(output, &out)?;
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn denoiser_spec_round_trip() {
        for s in [
            "identity",
            "gaussian",
            "wiener",
            "external:/bin/prog --fast",
        ] {
            assert_eq!(s.parse::<DenoiserSpec>().unwrap().to_string(), s);
        }
        assert!("external:".parse::<DenoiserSpec>().is_err());
        assert!("bm3d".parse::<DenoiserSpec>().is_err());
    }

    #[test]
    fn restore_keys_cover_echo() {
        let echo = Settings::parse("T = 5\nstep_size = ddim-ratio\n", "t", RESTORE_KEYS).unwrap();
        assert_eq!(echo.or("T", 0usize).unwrap(), 5);
        assert_eq!(
            echo.or("step_size", StepSizePolicy::Unit).unwrap(),
            StepSizePolicy::DdimRatio
        );
    }
}
