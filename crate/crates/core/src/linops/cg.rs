use crate::error::{Error, Result};
use crate::scalar::Real;

/// Result of a conjugate-gradient solve. A run that hits `max_iters` is
/// returned with `converged == false` rather than as an error.
#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// `||G u - b|| / ||b||` of the returned iterate (0 when `b = 0`).
    pub relative_residual: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Solves `G u = b` for a symmetric positive definite `G` given only as a
/// matvec, stopping once `||G u - b|| <= tol ||b||`.
pub fn cg_solve<T, G>(gram: G, b: &[T], tol: T, max_iters: usize) -> Result<CgOutcome<T>>
where
    T: Real,
    G: Fn(&[T]) -> Vec<T>,
{
    if !(tol > T::zero()) {
        return Err(Error::validation("cg tolerance must be positive"));
    }
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if !b_norm.is_finite() {
        return Err(Error::Numerical("non-finite right-hand side".into()));
    }
    let mut u = vec![T::zero(); n];
    if b_norm == T::zero() {
        return Ok(CgOutcome {
            solution: u,
            iterations: 0,
            converged: true,
            relative_residual: T::zero(),
        });
    }
    let target = tol * b_norm;
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iters {
        let gp = gram(&p);
        let pgp = dot(&p, &gp);
        let alpha = rr / pgp;
        if !alpha.is_finite() {
            return Err(Error::Numerical(format!(
                "cg step size non-finite at iteration {iterations}"
            )));
        }
        for i in 0..n {
            u[i] = u[i] + alpha * p[i];
            r[i] = r[i] - alpha * gp[i];
        }
        iterations += 1;
        let rr_next = dot(&r, &r);
        if !rr_next.is_finite() {
            return Err(Error::Numerical(format!(
                "cg residual non-finite at iteration {iterations}"
            )));
        }
        if rr_next.sqrt() <= target {
            converged = true;
            break;
        }
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }

    let gu = gram(&u);
    let res: T = gu
        .iter()
        .zip(b)
        .map(|(&g, &bi)| (g - bi) * (g - bi))
        .sum::<T>()
        .sqrt();
    Ok(CgOutcome {
        solution: u,
        iterations,
        converged,
        relative_residual: res / b_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rhs() {
        let out = cg_solve(|v: &[f64]| v.to_vec(), &[0.0; 4], 1e-10, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.solution.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scaled_identity_one_iteration() {
        let eta = 0.25;
        let b = [1.0, -2.0, 3.0];
        let out = cg_solve(
            |v: &[f64]| v.iter().map(|x| (1.0 + eta) * x).collect(),
            &b,
            1e-12,
            10,
        )
        .unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        for (u, bi) in out.solution.iter().zip(b) {
            assert!((u - bi / (1.0 + eta)).abs() < 1e-15);
        }
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let diag = [1.0, 10.0, 100.0, 1000.0];
        let out = cg_solve(
            |v: &[f64]| v.iter().zip(diag).map(|(x, d)| x * d).collect(),
            &[1.0; 4],
            1e-14,
            1,
        )
        .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn non_finite_detected() {
        let r = cg_solve(
            |v: &[f64]| v.iter().map(|_| f64::NAN).collect(),
            &[1.0; 2],
            1e-8,
            5,
        );
        assert!(matches!(r, Err(Error::Numerical(_))));
    }
}
