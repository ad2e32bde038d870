//! Gaussian denoisers `D(x; sigma)`.
//!
//! The built-ins are classical: identity, Gaussian smoothing, and the exact
//! posterior mean under a stationary Gaussian prior. [`ExternalCommand`]
//! delegates to another process through `PGT1` tensor files.

use std::path::Path;
use std::process::Command;

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fft2::{signed_freq, Fft2};
use crate::io;
use crate::scalar::Real;
use crate::tensor::{ImageTensor, Shape};

/// Anything that can denoise an image at a given noise level.
pub trait Denoise<T: Real> {
    fn denoise(&self, x: &ImageTensor<T>, sigma: T) -> Result<ImageTensor<T>>;
}

#[derive(Debug, Clone)]
pub enum Denoiser<T: Real> {
    Identity,
    /// Gaussian blur with standard deviation `kappa * sigma` pixels.
    GaussianSmooth {
        kappa: T,
    },
    WienerMmse(WienerPrior<T>),
    External(ExternalCommand),
}

impl<T: Real> Denoiser<T> {
    pub fn gaussian_smooth() -> Self {
        Self::GaussianSmooth { kappa: T::one() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::GaussianSmooth { .. } => "gaussian",
            Self::WienerMmse(_) => "wiener",
            Self::External(_) => "external",
        }
    }
}

impl<T: Real> Denoise<T> for Denoiser<T> {
    fn denoise(&self, x: &ImageTensor<T>, sigma: T) -> Result<ImageTensor<T>> {
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(Error::validation(format!(
                "noise level must be >= 0, got {sigma}"
            )));
        }
        let out = match self {
            Self::Identity => x.clone(),
            Self::GaussianSmooth { kappa } => gaussian_smooth(x, *kappa * sigma),
            Self::WienerMmse(prior) => prior.posterior_mean(x, sigma)?,
            Self::External(cmd) => cmd.denoise(x, sigma)?,
        };
        if !out.is_finite() {
            return Err(Error::Numerical(format!(
                "{} denoiser produced non-finite output",
                self.name()
            )));
        }
        Ok(out)
    }
}

/// Circular Gaussian blur with the continuous Gaussian's transfer function
/// `exp(-2 pi^2 h^2 |f|^2)`; unit DC gain keeps the mean.
fn gaussian_smooth<T: Real>(x: &ImageTensor<T>, bandwidth: T) -> ImageTensor<T> {
    if bandwidth == T::zero() {
        return x.clone();
    }
    let s = x.shape();
    let fft = Fft2::new(s.height, s.width);
    let h2 = bandwidth.as_f64().powi(2);
    let gain: Vec<T> = (0..s.plane())
        .map(|i| {
            let fy = signed_freq(i / s.width, s.height) / s.height as f64;
            let fx = signed_freq(i % s.width, s.width) / s.width as f64;
            T::lit((-2.0 * std::f64::consts::PI.powi(2) * h2 * (fx * fx + fy * fy)).exp())
        })
        .collect();
    let mut out = Vec::with_capacity(x.len());
    for c in 0..s.channels {
        out.extend(fft.filter(x.channel(c), |i, v| v * gain[i]));
    }
    ImageTensor::from_raw(s, out)
}

/// Stationary Gaussian image prior: per-frequency variance `p(f)` (unitary
/// DFT convention) around a mean image, shared by every channel.
#[derive(Debug, Clone)]
pub struct WienerPrior<T: Real> {
    height: usize,
    width: usize,
    power: Vec<T>,
    mean: Vec<T>,
    fft: Fft2<T>,
}

impl<T: Real> WienerPrior<T> {
    pub fn new(height: usize, width: usize, power: Vec<T>, mean: Vec<T>) -> Result<Self> {
        let n = height * width;
        if n == 0 || power.len() != n || mean.len() != n {
            return Err(Error::InvalidShape(format!(
                "prior arrays must have {height}x{width} entries"
            )));
        }
        if power.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
            return Err(Error::validation(
                "prior power spectrum must be finite and >= 0",
            ));
        }
        for r in 0..height {
            for c in 0..width {
                let (nr, nc) = ((height - r) % height, (width - c) % width);
                if power[r * width + c] != power[nr * width + nc] {
                    return Err(Error::validation(
                        "prior power spectrum must be symmetric under frequency negation",
                    ));
                }
            }
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("prior mean"));
        }
        Ok(Self {
            height,
            width,
            power,
            mean,
            fft: Fft2::new(height, width),
        })
    }

    /// `p(f) = scale / (1 + |f|^2)` with `f` the signed integer frequency
    /// index, constant mean.
    pub fn inverse_quadratic(height: usize, width: usize, scale: T, mean: T) -> Result<Self> {
        let power = (0..height * width)
            .map(|i| {
                let fy = signed_freq(i / width, height);
                let fx = signed_freq(i % width, width);
                scale * T::lit(1.0 / (1.0 + fx * fx + fy * fy))
            })
            .collect();
        Self::new(height, width, power, vec![mean; height * width])
    }

    /// Default prior: `p(f) = 1 / (1 + |f|^2)`, zero mean.
    pub fn default_for(height: usize, width: usize) -> Result<Self> {
        Self::inverse_quadratic(height, width, T::one(), T::zero())
    }

    pub fn power(&self) -> &[T] {
        &self.power
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    fn check(&self, s: Shape) -> Result<()> {
        if s.height != self.height || s.width != self.width {
            return Err(Error::validation(format!(
                "prior is {}x{} but image is {}x{}",
                self.height, self.width, s.height, s.width
            )));
        }
        Ok(())
    }

    /// `mean + p / (p + sigma^2) (x - mean)` per frequency and channel.
    pub fn posterior_mean(&self, x: &ImageTensor<T>, sigma: T) -> Result<ImageTensor<T>> {
        let s = x.shape();
        self.check(s)?;
        if sigma == T::zero() {
            return Ok(x.clone());
        }
        let var = sigma * sigma;
        let mut out = Vec::with_capacity(x.len());
        for c in 0..s.channels {
            let centered: Vec<T> = x
                .channel(c)
                .iter()
                .zip(&self.mean)
                .map(|(&v, &m)| v - m)
                .collect();
            let filtered = self.fft.filter(&centered, |i, v| {
                let p = self.power[i];
                v * (p / (p + var))
            });
            out.extend(filtered.into_iter().zip(&self.mean).map(|(v, &m)| v + m));
        }
        Ok(ImageTensor::from_raw(s, out))
    }

    /// Draws an image from the prior: white noise shaped by `sqrt(p)`.
    pub fn sample<R: Rng + ?Sized>(&self, channels: usize, rng: &mut R) -> Result<ImageTensor<T>> {
        let s = Shape::new(channels, self.height, self.width)?;
        let mut out = Vec::with_capacity(s.len());
        for _ in 0..channels {
            let white: Vec<T> = (0..s.plane())
                .map(|_| T::lit(StandardNormal.sample(rng)))
                .collect();
            let shaped = self
                .fft
                .filter(&white, |i, v: Complex<T>| v * self.power[i].sqrt());
            out.extend(shaped.into_iter().zip(&self.mean).map(|(v, &m)| v + m));
        }
        Ok(ImageTensor::from_raw(s, out))
    }
}

/// External denoiser invoked as `<program> [args..] <input.pgt> <output.pgt> <sigma>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalCommand {
    /// Splits a whitespace-separated command spec; the first word is the program.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut words = spec.split_whitespace().map(str::to_string);
        let program = words
            .next()
            .ok_or_else(|| Error::validation("empty external denoiser command"))?;
        Ok(Self {
            program,
            args: words.collect(),
        })
    }

    pub fn denoise<T: Real>(&self, x: &ImageTensor<T>, sigma: T) -> Result<ImageTensor<T>> {
        let dir = tempfile::Builder::new()
            .prefix("pguide-denoise-")
            .tempdir()?;
        let input = dir.path().join("input.pgt");
        let output = dir.path().join("output.pgt");
        io::write_tensor(&input, x)?;
        self.run(&input, &output, sigma.as_f64())?;
        let out: ImageTensor<T> = io::read_tensor(&output).map_err(|e| {
            Error::ExternalDenoiser(format!("{}: unreadable output: {e}", self.program))
        })?;
        if out.shape() != x.shape() {
            return Err(Error::ExternalDenoiser(format!(
                "{}: output shape {} differs from input {}",
                self.program,
                out.shape(),
                x.shape()
            )));
        }
        Ok(out)
    }

    fn run(&self, input: &Path, output: &Path, sigma: f64) -> Result<()> {
        let result = Command::new(&self.program)
            .args(&self.args)
            .arg(input)
            .arg(output)
            .arg(format!("{sigma:e}"))
            .output()
            .map_err(|e| {
                Error::ExternalDenoiser(format!("{}: cannot launch: {e}", self.program))
            })?;
        if !result.status.success() {
            return Err(Error::ExternalDenoiser(format!(
                "{} exited with {}: {}",
                self.program,
                result.status,
                String::from_utf8_lossy(&result.stderr).trim()
            )));
        }
        Ok(())
    }
}
