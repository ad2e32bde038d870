//! Degradation synthesis and reconstruction quality.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linops::LinearOperator;
use crate::scalar::Real;
use crate::tensor::ImageTensor;

/// Additive white Gaussian observation noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<T> {
    pub sigma_e: T,
    pub seed: u64,
}

impl<T: Real> NoiseSpec<T> {
    pub fn new(sigma_e: T, seed: u64) -> Result<Self> {
        if !(sigma_e >= T::zero()) || !sigma_e.is_finite() {
            return Err(Error::validation("sigma_e must be finite and >= 0"));
        }
        Ok(Self { sigma_e, seed })
    }

    pub fn noiseless() -> Self {
        Self {
            sigma_e: T::zero(),
            seed: 0,
        }
    }
}

/// `y = A x* + sigma_e g`, `g` standard normal drawn from a stream seeded
/// by `noise.seed`.
pub fn degrade<T: Real>(
    op: &LinearOperator<T>,
    x_star: &ImageTensor<T>,
    noise: &NoiseSpec<T>,
) -> Result<ImageTensor<T>> {
    let clean = op.apply(x_star)?;
    if noise.sigma_e == T::zero() {
        return Ok(clean);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(noise.seed);
    let mut out = clean;
    for v in out.data_mut() {
        let g: f64 = StandardNormal.sample(&mut rng);
        *v = *v + noise.sigma_e * T::lit(g);
    }
    Ok(out)
}

pub fn mse<T: Real>(x: &ImageTensor<T>, reference: &ImageTensor<T>) -> Result<T> {
    x.expect_shape(reference.shape(), "mse")?;
    Ok(x.sub(reference).norm_sq() / T::from_usize(x.len()).unwrap())
}

/// `10 log10(peak^2 / MSE)` in dB; identical inputs give `+inf`.
pub fn psnr<T: Real>(x: &ImageTensor<T>, reference: &ImageTensor<T>, peak: T) -> Result<T> {
    if !(peak > T::zero()) {
        return Err(Error::validation("peak must be > 0"));
    }
    let m = mse(x, reference)?;
    if m == T::zero() {
        return Ok(T::infinity());
    }
    Ok(T::lit(10.0) * (peak * peak / m).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn img(v: Vec<f64>) -> ImageTensor<f64> {
        let n = v.len();
        ImageTensor::from_vec(Shape::new(1, 1, n).unwrap(), v).unwrap()
    }

    #[test]
    fn identical_is_infinite() {
        let a = img(vec![0.1, 0.2, 0.3]);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn constant_offset() {
        let a = img(vec![0.1, 0.2, 0.3, 0.9]);
        let b = a.map(|v| v + 0.1);
        assert!((psnr(&b, &a, 1.0).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch() {
        assert!(psnr(&img(vec![0.0; 2]), &img(vec![0.0; 3]), 1.0).is_err());
        assert!(psnr(&img(vec![0.0; 2]), &img(vec![0.0; 2]), 0.0).is_err());
    }
}
