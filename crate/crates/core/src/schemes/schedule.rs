use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::ImageTensor;

pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// DDPM noise schedule: `beta_1..beta_T` and cumulative products
/// `alpha_bar_0 = 1, alpha_bar_t = prod_{s<=t} (1 - beta_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule<T> {
    betas: Vec<T>,
    alpha_bar: Vec<T>,
}

impl<T: Real> DiffusionSchedule<T> {
    /// Linearly spaced betas from `beta_start` to `beta_end` inclusive.
    pub fn linear(steps: usize, beta_start: T, beta_end: T) -> Result<Self> {
        if steps == 0 {
            return Err(Error::validation("schedule needs at least one step"));
        }
        if !(beta_start > T::zero() && beta_start <= beta_end && beta_end <= T::one()) {
            return Err(Error::validation(format!(
                "need 0 < beta_start <= beta_end <= 1, got [{beta_start}, {beta_end}]"
            )));
        }
        let betas = if steps == 1 {
            vec![beta_start]
        } else {
            let span = beta_end - beta_start;
            let last = T::from_usize(steps - 1).unwrap();
            (0..steps)
                .map(|i| beta_start + span * T::from_usize(i).unwrap() / last)
                .collect()
        };
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<T>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::validation("schedule needs at least one step"));
        }
        if betas.iter().any(|&b| !(b > T::zero() && b <= T::one())) {
            return Err(Error::validation("betas must lie in (0, 1]"));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::validation("betas must be non-decreasing"));
        }
        let mut alpha_bar = Vec::with_capacity(betas.len() + 1);
        alpha_bar.push(T::one());
        for &b in &betas {
            let prev = *alpha_bar.last().unwrap();
            alpha_bar.push(prev * (T::one() - b));
        }
        Ok(Self { betas, alpha_bar })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[T] {
        &self.betas
    }

    /// `alpha_bar_0..alpha_bar_T` (length `T + 1`).
    pub fn alpha_bars(&self) -> &[T] {
        &self.alpha_bar
    }

    pub fn alpha_bar(&self, t: usize) -> T {
        self.alpha_bar[t]
    }

    /// Noise standard deviation of `x_t`: `sqrt(1 - alpha_bar_t)`.
    pub fn sigma(&self, t: usize) -> T {
        (T::one() - self.alpha_bar[t]).sqrt()
    }

    /// Noise level seen by a denoiser after rescaling `x_t` to unit signal:
    /// `sqrt((1 - alpha_bar_t) / alpha_bar_t)`.
    pub fn denoiser_sigma(&self, t: usize) -> T {
        ((T::one() - self.alpha_bar[t]) / self.alpha_bar[t]).sqrt()
    }
}

/// `x_{0|t} = (x_t - sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_bar_t)`.
pub fn x0_from_eps<T: Real>(
    x_t: &ImageTensor<T>,
    eps: &ImageTensor<T>,
    alpha_bar_t: T,
) -> Result<ImageTensor<T>> {
    if !(alpha_bar_t > T::zero() && alpha_bar_t <= T::one()) {
        return Err(Error::validation("alpha_bar_t must lie in (0, 1]"));
    }
    eps.expect_shape(x_t.shape(), "x0_from_eps")?;
    let s = (T::one() - alpha_bar_t).sqrt();
    let inv = T::one() / alpha_bar_t.sqrt();
    Ok(x_t.zip_map(eps, |x, e| (x - s * e) * inv))
}

/// Effective predicted noise `(x_t - sqrt(alpha_bar_t) x_tilde) / sqrt(1 - alpha_bar_t)`.
pub fn eps_effective<T: Real>(
    x_t: &ImageTensor<T>,
    x_tilde: &ImageTensor<T>,
    alpha_bar_t: T,
) -> Result<ImageTensor<T>> {
    if !(alpha_bar_t > T::zero() && alpha_bar_t < T::one()) {
        return Err(Error::validation(
            "alpha_bar_t must lie in (0, 1) for the effective noise",
        ));
    }
    x_tilde.expect_shape(x_t.shape(), "eps_effective")?;
    let a = alpha_bar_t.sqrt();
    let inv = T::one() / (T::one() - alpha_bar_t).sqrt();
    Ok(x_t.zip_map(x_tilde, |x, xt| (x - a * xt) * inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn single_step() {
        let s = DiffusionSchedule::linear(1, 0.02, 0.02).unwrap();
        assert!((s.alpha_bar(1) - 0.98f64).abs() < 1e-15);
        assert_eq!(s.alpha_bar(0), 1.0);
    }

    #[test]
    fn constant_half() {
        let s = DiffusionSchedule::from_betas(vec![0.5f64, 0.5]).unwrap();
        assert_eq!(s.alpha_bars(), &[1.0, 0.5, 0.25]);
    }

    #[test]
    fn default_schedule_decreases() {
        let s =
            DiffusionSchedule::<f64>::linear(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
                .unwrap();
        assert_eq!(s.steps(), 100);
        assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
        assert!((s.betas()[0] - 1e-4).abs() < 1e-18);
        assert!((s.betas()[99] - 0.02).abs() < 1e-15);
        assert!(s.alpha_bar(100) < s.alpha_bar(1));
    }

    #[test]
    fn bad_ranges() {
        assert!(DiffusionSchedule::<f64>::linear(0, 0.1, 0.2).is_err());
        assert!(DiffusionSchedule::<f64>::linear(5, 0.0, 0.2).is_err());
        assert!(DiffusionSchedule::<f64>::linear(5, 0.3, 0.2).is_err());
        assert!(DiffusionSchedule::<f64>::linear(5, 0.1, 1.2).is_err());
    }

    #[test]
    fn x0_and_eps_are_inverse() {
        let sh = Shape::new(1, 2, 2).unwrap();
        let xt = ImageTensor::<f64>::from_vec(sh, vec![0.3, -1.2, 2.0, 0.1]).unwrap();
        let eps = ImageTensor::from_vec(sh, vec![1.0, 0.5, -0.25, 3.0]).unwrap();
        let a: f64 = 0.37;
        let x0 = x0_from_eps(&xt, &eps, a).unwrap();
        let back = eps_effective(&xt, &x0, a).unwrap();
        for (u, v) in back.data().iter().zip(eps.data()) {
            assert!((u - v).abs() < 1e-12);
        }
        assert_eq!(x0_from_eps(&xt, &eps, 1.0).unwrap(), xt);
        assert!(eps_effective(&xt, &x0, 1.0).is_err());
        let zero = ImageTensor::zeros(sh);
        let e = eps_effective(&xt, &zero, a).unwrap();
        for (u, v) in e.data().iter().zip(xt.data()) {
            assert!((u - v / (1.0 - a).sqrt()).abs() < 1e-15);
        }
    }
}
