//! Back-projection and least-squares guidance directions, their convex
//! combination, the weighted least-squares objective they descend, and the
//! `delta` / `eta` schedules.

use crate::error::{Error, Result};
use crate::linops::LinearOperator;
use crate::scalar::Real;
use crate::tensor::ImageTensor;

/// Lower bound applied by [`eta_from_noise`].
pub const ETA_FLOOR: f64 = 1e-4;

/// Scalars and per-step schedules defining the guidance at each iteration.
///
/// `mu` and `delta` are indexed by `t - 1` for `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceConfig<T> {
    pub eta: T,
    pub c: T,
    pub mu: Vec<T>,
    pub delta: Vec<T>,
}

impl<T: Real> GuidanceConfig<T> {
    /// Single-step configuration with `mu = 1` and the given `delta`.
    pub fn fixed(eta: T, c: T, delta: T) -> Result<Self> {
        let cfg = Self {
            eta,
            c,
            mu: vec![T::one()],
            delta: vec![delta],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= T::zero()) || !self.eta.is_finite() {
            return Err(Error::validation("eta must be >= 0"));
        }
        if !(self.c > T::zero()) || !self.c.is_finite() {
            return Err(Error::validation("c must be > 0"));
        }
        if self.mu.len() != self.delta.len() {
            return Err(Error::validation("mu and delta schedules differ in length"));
        }
        if self.mu.iter().any(|&m| !(m >= T::zero()) || !m.is_finite()) {
            return Err(Error::validation("step sizes must be finite and >= 0"));
        }
        check_delta_schedule(&self.delta)
    }

    pub fn steps(&self) -> usize {
        self.delta.len()
    }

    /// `(delta_t, mu_t)` for `t` in `1..=T`.
    pub fn at(&self, t: usize) -> (T, T) {
        (self.delta[t - 1], self.mu[t - 1])
    }
}

/// `delta_t` in `[0, 1]` and non-increasing in `t` (index order).
fn check_delta_schedule<T: Real>(delta: &[T]) -> Result<()> {
    if delta.iter().any(|&d| !(d >= T::zero() && d <= T::one())) {
        return Err(Error::validation("delta must lie in [0, 1]"));
    }
    if delta.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::validation(
            "delta must not increase with t (it grows toward t = 0)",
        ));
    }
    Ok(())
}

fn check_delta<T: Real>(delta: T) -> Result<()> {
    if !(delta >= T::zero() && delta <= T::one()) {
        return Err(Error::validation(format!("delta = {delta} outside [0, 1]")));
    }
    Ok(())
}

fn residual<T: Real>(
    op: &LinearOperator<T>,
    x: &ImageTensor<T>,
    y: &ImageTensor<T>,
) -> Result<ImageTensor<T>> {
    y.expect_shape(op.output_shape(), "measurement")?;
    Ok(op.apply(x)?.sub(y))
}

/// Back-projection direction `A^T (A A^T + eta I)^{-1} (A x - y)`.
pub fn g_bp<T: Real>(
    op: &LinearOperator<T>,
    x: &ImageTensor<T>,
    y: &ImageTensor<T>,
    eta: T,
) -> Result<ImageTensor<T>> {
    op.apply_reg_pinv(&residual(op, x, y)?, eta)
}

/// Least-squares direction `c A^T (A x - y)`.
pub fn g_ls<T: Real>(
    op: &LinearOperator<T>,
    x: &ImageTensor<T>,
    y: &ImageTensor<T>,
    c: T,
) -> Result<ImageTensor<T>> {
    if !(c > T::zero()) {
        return Err(Error::validation("c must be > 0"));
    }
    Ok(op.apply_adjoint(&residual(op, x, y)?)?.scale(c))
}

/// `(1 - delta) g_bp + delta g_ls`. The endpoints return the pure directions.
pub fn g_delta<T: Real>(
    op: &LinearOperator<T>,
    x: &ImageTensor<T>,
    y: &ImageTensor<T>,
    delta: T,
    cfg: &GuidanceConfig<T>,
) -> Result<ImageTensor<T>> {
    check_delta(delta)?;
    if delta == T::zero() {
        return g_bp(op, x, y, cfg.eta);
    }
    if delta == T::one() {
        return g_ls(op, x, y, cfg.c);
    }
    let r = residual(op, x, y)?;
    let bp = op.apply_reg_pinv(&r, cfg.eta)?;
    let ls = op.apply_adjoint(&r)?.scale(cfg.c);
    Ok(bp.zip_map(&ls, |b, l| (T::one() - delta) * b + delta * l))
}

/// `1/2 r^T W r` with `r = A x - y` and
/// `W = (1 - delta)(A A^T + eta I)^{-1} + delta c I`.
pub fn wls_objective<T: Real>(
    op: &LinearOperator<T>,
    x: &ImageTensor<T>,
    y: &ImageTensor<T>,
    delta: T,
    cfg: &GuidanceConfig<T>,
) -> Result<T> {
    check_delta(delta)?;
    let r = residual(op, x, y)?;
    let rr = r.norm_sq();
    let bp_part = if delta < T::one() {
        r.dot(&op.solve_gram(&r, cfg.eta)?)
    } else {
        T::zero()
    };
    let v = T::half() * ((T::one() - delta) * bp_part + delta * cfg.c * rr);
    Ok(v.max(T::zero()))
}

/// `delta_t = alpha_bar_t^gamma`, `w_t = delta_t` for noisy measurements;
/// `delta_t = 0`, `w_t = 1` when `sigma_e = 0`.
///
/// `alpha_bar` holds `alpha_bar_1..alpha_bar_T`.
pub fn delta_schedule<T: Real>(alpha_bar: &[T], gamma: T, sigma_e: T) -> Result<(Vec<T>, Vec<T>)> {
    if alpha_bar.iter().any(|&a| !(a > T::zero() && a <= T::one())) {
        return Err(Error::validation("alpha_bar entries must lie in (0, 1]"));
    }
    if !(gamma >= T::zero()) {
        return Err(Error::validation("gamma must be >= 0"));
    }
    if !(sigma_e >= T::zero()) {
        return Err(Error::validation("sigma_e must be >= 0"));
    }
    if sigma_e == T::zero() {
        let n = alpha_bar.len();
        return Ok((vec![T::zero(); n], vec![T::one(); n]));
    }
    let delta: Vec<T> = alpha_bar
        .iter()
        .map(|&a| a.powf(gamma).max(T::zero()).min(T::one()))
        .collect();
    Ok((delta.clone(), delta))
}

/// `eta = max(1e-4, (2 sigma_e)^2 eta_tilde)`.
pub fn eta_from_noise<T: Real>(sigma_e: T, eta_tilde: T) -> T {
    let two = T::lit(2.0);
    T::lit(ETA_FLOOR).max((two * sigma_e).powi(2) * eta_tilde)
}

/// `c = 1` unless the largest singular value exceeds one, then `1 / lambda_1^2`.
pub fn default_c<T: Real>(op: &LinearOperator<T>) -> T {
    let l1 = op.largest_singular_value();
    if l1 > T::one() {
        T::one() / (l1 * l1)
    } else {
        T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_schedule_noiseless() {
        let (d, w) = delta_schedule(&[0.9, 0.5, 0.1], 3.0, 0.0).unwrap();
        assert_eq!(d, vec![0.0; 3]);
        assert_eq!(w, vec![1.0; 3]);
    }

    #[test]
    fn delta_schedule_powers() {
        let (d, w) = delta_schedule::<f64>(&[0.9, 0.5, 0.1], 2.0, 0.05).unwrap();
        let want = [0.81, 0.25, 0.01];
        for i in 0..3 {
            assert!((d[i] - want[i]).abs() < 1e-15);
        }
        assert_eq!(d, w);
        let (d1, _) = delta_schedule(&[0.9, 0.5, 0.1], 1.0, 0.05).unwrap();
        assert_eq!(d1, vec![0.9, 0.5, 0.1]);
    }

    #[test]
    fn delta_schedule_rejects_bad_alpha() {
        assert!(delta_schedule(&[1.2, 0.5], 1.0, 0.1).is_err());
        assert!(delta_schedule(&[0.5, 0.0], 1.0, 0.1).is_err());
    }

    #[test]
    fn eta_rule() {
        assert_eq!(eta_from_noise(0.0, 5.0), 1e-4);
        assert!((eta_from_noise::<f64>(0.05, 0.7) - 0.007).abs() < 1e-15);
        assert!((eta_from_noise::<f64>(0.5, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(GuidanceConfig::fixed(0.0, 1.0, 0.5).is_ok());
        assert!(GuidanceConfig::fixed(-1.0, 1.0, 0.5).is_err());
        assert!(GuidanceConfig::fixed(0.0, 0.0, 0.5).is_err());
        assert!(GuidanceConfig::fixed(0.0, 1.0, 1.5).is_err());
        let increasing = GuidanceConfig {
            eta: 0.0,
            c: 1.0,
            mu: vec![1.0, 1.0],
            delta: vec![0.2, 0.4],
        };
        assert!(increasing.validate().is_err());
    }
}
