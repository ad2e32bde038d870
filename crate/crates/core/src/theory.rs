//! Small dense Tikhonov instances on which the properties of the weighted
//! data term can be checked numerically: closed-form estimators, spectral
//! bias/variance, Hessian condition numbers, and the preconditioner
//! constructions.
//!
//! Everything here is `f64` and backed by `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::guidance::{g_delta, wls_objective, GuidanceConfig};
use crate::linops::{DenseMatrix, LinearOperator};
use crate::tensor::{ImageTensor, Shape};

/// Relative tolerance for "commutes" / "shares an eigenbasis".
pub const COMMUTE_TOL: f64 = 1e-8;

/// Relative spread below which singular values count as all equal.
pub const EQUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Ls,
    Bp,
    Wls,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Bp, Mode::Wls, Mode::Ls];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ls => "LS",
            Mode::Bp => "BP",
            Mode::Wls => "WLS",
        }
    }
}

/// `min_x  1/2 ||W^{1/2}(A x - y)||^2 + beta/2 ||D x||^2` with
/// `y = A x* + e`, `e ~ N(0, sigma_e^2 I)`.
#[derive(Debug, Clone)]
pub struct TikhonovProblem {
    a: DMatrix<f64>,
    d: DMatrix<f64>,
    beta: f64,
    sigma_e: f64,
    x_star: DVector<f64>,
    delta: f64,
    eta: f64,
    c: f64,
}

fn rel_norm(m: &DMatrix<f64>, scale: f64) -> f64 {
    m.norm() / scale.max(f64::MIN_POSITIVE)
}

impl TikhonovProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        d: DMatrix<f64>,
        beta: f64,
        sigma_e: f64,
        x_star: DVector<f64>,
        delta: f64,
        eta: f64,
        c: f64,
    ) -> Result<Self> {
        let (m, n) = a.shape();
        if m == 0 || m > n {
            return Err(Error::validation(format!(
                "A must be m x n with 0 < m <= n, got {m}x{n}"
            )));
        }
        if d.ncols() != n || x_star.len() != n {
            return Err(Error::InvalidShape(
                "D and x* must match the columns of A".into(),
            ));
        }
        if !(beta > 0.0) || !(sigma_e >= 0.0) || !(eta >= 0.0) || !(c > 0.0) {
            return Err(Error::validation(
                "need beta > 0, sigma_e >= 0, eta >= 0, c > 0",
            ));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::validation("delta must lie in [0, 1]"));
        }
        let dtd = d.transpose() * &d;
        let min_eig = SymmetricEigen::new(dtd.clone()).eigenvalues.min();
        if !(min_eig > 1e-12 * dtd.norm()) {
            return Err(Error::Assumption("D^T D must be invertible".into()));
        }
        let ata = a.transpose() * &a;
        let comm = &ata * &dtd - &dtd * &ata;
        if rel_norm(&comm, ata.norm() * dtd.norm()) > COMMUTE_TOL {
            return Err(Error::Assumption(
                "(a) A^T A and D^T D do not share an eigenbasis".into(),
            ));
        }
        Ok(Self {
            a,
            d,
            beta,
            sigma_e,
            x_star,
            delta,
            eta,
            c,
        })
    }

    /// Random instance satisfying the bias/variance theorem's assumptions:
    /// `A = U [diag(lambda) 0] V^T` with `lambda` uniform in `[0.1, 1]` (at
    /// least two distinct), `D = V diag(d) V^T` with `d` uniform in
    /// `[0.5, 2]`, `beta` uniform in `[0.1, 1]`, `sigma_e` uniform in
    /// `[0.05, 0.5]`, `eta = 0`, `c = 1`.
    pub fn conforming<R: Rng + ?Sized>(
        m: usize,
        n: usize,
        delta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut lambda: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..=1.0)).collect();
        while m > 1 && lambda.iter().all(|&l| l == lambda[0]) {
            lambda[0] = rng.random_range(0.1..=1.0);
        }
        Self::with_singular_values(&lambda, n, delta, rng)
    }

    /// Like [`TikhonovProblem::conforming`] with prescribed singular values.
    pub fn with_singular_values<R: Rng + ?Sized>(
        lambda: &[f64],
        n: usize,
        delta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let m = lambda.len();
        let mut lambda = lambda.to_vec();
        lambda.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let u = random_orthogonal(m, rng);
        let v = random_orthogonal(n, rng);
        let mut sigma = DMatrix::zeros(m, n);
        for (i, &l) in lambda.iter().enumerate() {
            sigma[(i, i)] = l;
        }
        let a = &u * sigma * v.transpose();
        let dvals = DVector::from_fn(n, |_, _| rng.random_range(0.5..=2.0));
        let d = &v * DMatrix::from_diagonal(&dvals) * v.transpose();
        let beta = rng.random_range(0.1..=1.0);
        let sigma_e = rng.random_range(0.05..=0.5);
        let x_star = gaussian_vector(n, rng);
        Self::new(a, d, beta, sigma_e, x_star, delta, 0.0, 1.0)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma_e(&self) -> f64 {
        self.sigma_e
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::validation("delta must lie in [0, 1]"));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn with_sigma_e(mut self, sigma_e: f64) -> Self {
        self.sigma_e = sigma_e;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Data-term weight: `I` (LS), `(A A^T + eta I)^{-1}` (BP),
    /// `(1 - delta)(A A^T + eta I)^{-1} + delta c I` (WLS).
    pub fn weight(&self, mode: Mode) -> Result<DMatrix<f64>> {
        let m = self.a.nrows();
        let eye = DMatrix::<f64>::identity(m, m);
        if mode == Mode::Ls {
            return Ok(eye);
        }
        let gram = &self.a * self.a.transpose() + &eye * self.eta;
        let inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Numerical("A A^T + eta I is singular".into()))?;
        Ok(match mode {
            Mode::Bp => inv,
            _ => inv * (1.0 - self.delta) + eye * (self.delta * self.c),
        })
    }

    /// Draws `y = A x* + sigma_e e`.
    pub fn observe<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        &self.a * &self.x_star + gaussian_vector(self.a.nrows(), rng) * self.sigma_e
    }

    /// Linear map `M` with `x_hat = M y`.
    pub fn estimator_matrix(&self, mode: Mode) -> Result<DMatrix<f64>> {
        let w = self.weight(mode)?;
        let at_w = self.a.transpose() * &w;
        let lhs = &at_w * &self.a + self.d.transpose() * &self.d * self.beta;
        lhs.lu()
            .solve(&at_w)
            .ok_or_else(|| Error::Numerical("normal equations are singular".into()))
    }
}

pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Haar-ish random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

/// Minimizer `(A^T W A + beta D^T D)^{-1} A^T W y` of the regularized problem.
pub fn tikhonov_estimate(
    p: &TikhonovProblem,
    mode: Mode,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    if y.len() != p.a.nrows() {
        return Err(Error::InvalidShape("y must have m entries".into()));
    }
    let w = p.weight(mode)?;
    let at_w = p.a.transpose() * &w;
    let lhs = &at_w * &p.a + p.d.transpose() * &p.d * p.beta;
    lhs.lu()
        .solve(&(&at_w * y))
        .ok_or_else(|| Error::Numerical("normal equations are singular".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasVariance {
    /// Squared bias `||E[x_hat] - x*||^2`.
    pub bias_sq: f64,
    /// `Tr Var(x_hat)`
    pub variance: f64,
}

impl BiasVariance {
    pub fn mse(&self) -> f64 {
        self.bias_sq + self.variance
    }
}

/// Spectral data of `A` in the shared eigenbasis: singular values, the
/// matching `D^T D` eigenvalues, row-range coordinates of `x*`, and the
/// null-space energy of `x*`.
struct Spectrum {
    lambda: Vec<f64>,
    gamma_sq: Vec<f64>,
    coords: Vec<f64>,
    null_energy: f64,
}

fn spectrum(p: &TikhonovProblem) -> Result<Spectrum> {
    let m = p.a.nrows();
    let ata = p.a.transpose() * &p.a;
    let dtd = p.d.transpose() * &p.d;
    // commuting symmetric matrices: eigenvectors of a generic combination
    // diagonalize both, even where either one alone is degenerate
    let tau = 0.618_033_988_749_894_9 * ata.norm() / dtd.norm();
    let eig = SymmetricEigen::new(&ata + &dtd * tau);
    let n = ata.nrows();
    let mut modes: Vec<(f64, f64, f64)> = Vec::with_capacity(n);
    for i in 0..n {
        let v = eig.eigenvectors.column(i).into_owned();
        let (av, dv) = (&ata * &v, &dtd * &v);
        let (l2, g) = (v.dot(&av), v.dot(&dv));
        if (av - &v * l2).norm() > COMMUTE_TOL * ata.norm()
            || (dv - &v * g).norm() > COMMUTE_TOL * dtd.norm()
        {
            return Err(Error::Assumption(
                "eigenbasis mismatch: A^T A and D^T D are not jointly diagonalizable".into(),
            ));
        }
        modes.push((l2, g, v.dot(&p.x_star)));
    }
    modes.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let null_energy = modes[m..].iter().map(|md| md.2 * md.2).sum();
    let range = &modes[..m];
    Ok(Spectrum {
        lambda: range.iter().map(|md| md.0.max(0.0).sqrt()).collect(),
        gamma_sq: range.iter().map(|md| md.1).collect(),
        coords: range.iter().map(|md| md.2).collect(),
        null_energy,
    })
}

/// Eigenvalue `s_i` of the data weight along the `i`-th left singular vector.
fn weight_eigen(p: &TikhonovProblem, mode: Mode, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    match mode {
        Mode::Ls => 1.0,
        Mode::Bp => 1.0 / (l2 + p.eta),
        Mode::Wls => (1.0 - p.delta) / (l2 + p.eta) + p.delta * p.c,
    }
}

/// Squared bias and variance from the spectral sums
/// `b^2 = sum_i (beta g_i^2 / (l_i^2 s_i + beta g_i^2))^2 <v_i, x*>^2 + ||P_null x*||^2`,
/// `v = sigma_e^2 sum_i l_i^2 s_i^2 / (l_i^2 s_i + beta g_i^2)^2`.
pub fn bias_variance_closed_form(p: &TikhonovProblem, mode: Mode) -> Result<BiasVariance> {
    let sp = spectrum(p)?;
    let mut bias_sq = sp.null_energy;
    let mut variance = 0.0;
    for i in 0..sp.lambda.len() {
        let l2 = sp.lambda[i] * sp.lambda[i];
        let s = weight_eigen(p, mode, sp.lambda[i]);
        let prior = p.beta * sp.gamma_sq[i];
        let denom = l2 * s + prior;
        bias_sq += (prior / denom).powi(2) * sp.coords[i].powi(2);
        variance += l2 * s * s / (denom * denom);
    }
    Ok(BiasVariance {
        bias_sq,
        variance: variance * p.sigma_e * p.sigma_e,
    })
}

/// Monte-Carlo estimate of squared bias and variance with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub draws: usize,
    pub bias_sq: f64,
    pub bias_sq_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

impl MonteCarlo {
    /// Both closed-form quantities within `k` standard errors (plus a
    /// rounding floor).
    pub fn agrees_with(&self, cf: &BiasVariance, k: f64) -> bool {
        let floor = 1e-10 * (1.0 + cf.bias_sq + cf.variance);
        (self.bias_sq - cf.bias_sq).abs() <= k * self.bias_sq_se + floor
            && (self.variance - cf.variance).abs() <= k * self.variance_se + floor
    }
}

/// Draws `draws` noisy observations and applies the estimator of `mode` to
/// each. The squared-bias estimate is debiased by `v / N`.
pub fn bias_variance_monte_carlo<R: Rng + ?Sized>(
    p: &TikhonovProblem,
    mode: Mode,
    draws: usize,
    rng: &mut R,
) -> Result<MonteCarlo> {
    let noise: Vec<DVector<f64>> = (0..draws)
        .map(|_| gaussian_vector(p.a.nrows(), rng))
        .collect();
    monte_carlo_from_noise(p, mode, &noise)
}

/// Same as [`bias_variance_monte_carlo`] on caller-supplied standard-normal
/// noise vectors, so several modes can share draws.
pub fn monte_carlo_from_noise(
    p: &TikhonovProblem,
    mode: Mode,
    noise: &[DVector<f64>],
) -> Result<MonteCarlo> {
    let draws = noise.len();
    if draws < 2 {
        return Err(Error::validation("need at least two Monte-Carlo draws"));
    }
    let n = p.a.ncols();
    let clean = &p.a * &p.x_star;
    let mut estimates = Vec::with_capacity(draws);
    // estimator applied per basis vector keeps this route independent of the spectral sums
    let m_mat = {
        let m = p.a.nrows();
        let mut cols = Vec::with_capacity(m);
        for j in 0..m {
            let mut e = DVector::zeros(m);
            e[j] = 1.0;
            cols.push(tikhonov_estimate(p, mode, &e)?);
        }
        DMatrix::from_columns(&cols)
    };
    let base = &m_mat * &clean;
    let scaled = &m_mat * p.sigma_e;
    for e in noise {
        estimates.push(&base + &scaled * e);
    }
    let nf = draws as f64;
    let mean = estimates.iter().fold(DVector::zeros(n), |acc, x| acc + x) / nf;
    let mut cov = DMatrix::<f64>::zeros(n, n);
    let mut q = Vec::with_capacity(draws);
    for x in &estimates {
        let d = x - &mean;
        cov += &d * d.transpose();
        q.push(d.norm_squared());
    }
    cov /= nf - 1.0;
    let variance = cov.trace();
    let q_mean = q.iter().sum::<f64>() / nf;
    let q_var = q.iter().map(|v| (v - q_mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let variance_se = (q_var / nf).sqrt();

    let dev = &mean - &p.x_star;
    let bias_sq = dev.norm_squared() - variance / nf;
    let quad = (dev.transpose() * &cov * &dev)[(0, 0)];
    let bias_sq_se = (4.0 * quad / nf + 2.0 * (&cov * &cov).trace() / (nf * nf)).sqrt();
    Ok(MonteCarlo {
        draws,
        bias_sq,
        bias_sq_se,
        variance,
        variance_se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Report {
    pub bp: BiasVariance,
    pub wls: BiasVariance,
    pub ls: BiasVariance,
    /// `b_BP < b_WLS < b_LS`
    pub bias_ordered: bool,
    /// `v_LS < v_WLS < v_BP`
    pub variance_ordered: bool,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.bias_ordered && self.variance_ordered
    }

    pub fn get(&self, mode: Mode) -> BiasVariance {
        match mode {
            Mode::Bp => self.bp,
            Mode::Wls => self.wls,
            Mode::Ls => self.ls,
        }
    }
}

/// Checks the theorem's assumptions, then evaluates the closed-form
/// bias/variance for BP, WLS and LS and both strict orderings.
pub fn verify_theorem1(p: &TikhonovProblem) -> Result<Theorem1Report> {
    if p.eta != 0.0 || p.c != 1.0 {
        return Err(Error::Assumption("(c) requires eta = 0 and c = 1".into()));
    }
    if !(p.delta > 0.0 && p.delta < 1.0) {
        return Err(Error::Assumption(
            "delta must lie strictly inside (0, 1)".into(),
        ));
    }
    let sv = p.a.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if !(lo > 0.0 && hi <= 1.0 + 1e-12) {
        return Err(Error::Assumption(format!(
            "(b) singular values must lie in (0, 1], found range [{lo}, {hi}]"
        )));
    }
    if hi - lo <= EQUAL_TOL * hi {
        return Err(Error::Assumption(
            "(b) singular values of A must not all be equal".into(),
        ));
    }
    let bp = bias_variance_closed_form(p, Mode::Bp)?;
    let wls = bias_variance_closed_form(p, Mode::Wls)?;
    let ls = bias_variance_closed_form(p, Mode::Ls)?;
    Ok(Theorem1Report {
        bp,
        wls,
        ls,
        bias_ordered: bp.bias_sq < wls.bias_sq && wls.bias_sq < ls.bias_sq,
        variance_ordered: ls.variance < wls.variance && wls.variance < bp.variance,
    })
}

/// Condition numbers of the data-term Hessians restricted to the row range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionNumbers {
    pub bp: f64,
    pub wls: f64,
    pub ls: f64,
}

impl ConditionNumbers {
    /// `kappa_BP < kappa_WLS < kappa_LS`
    pub fn strictly_ordered(&self) -> bool {
        self.bp < self.wls && self.wls < self.ls
    }
}

/// `kappa_BP = 1`, `kappa_LS = l_1^2 / l_m^2`,
/// `kappa_WLS = ((1 - delta) + delta c l_1^2) / ((1 - delta) + delta c l_m^2)`.
///
/// `lambda` must be sorted decreasing, positive, and not all equal.
pub fn condition_numbers(lambda: &[f64], delta: f64, c: f64) -> Result<ConditionNumbers> {
    if lambda.is_empty() || lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Assumption("singular values must be positive".into()));
    }
    if lambda.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::validation(
            "singular values must be sorted decreasing",
        ));
    }
    let (l1, lm) = (lambda[0], lambda[lambda.len() - 1]);
    if l1 - lm <= EQUAL_TOL * l1 {
        return Err(Error::Assumption(
            "singular values must not all be equal".into(),
        ));
    }
    if !(0.0..=1.0).contains(&delta) || !(c > 0.0) {
        return Err(Error::validation("need delta in [0, 1] and c > 0"));
    }
    let (l1s, lms) = (l1 * l1, lm * lm);
    Ok(ConditionNumbers {
        bp: 1.0,
        wls: ((1.0 - delta) + delta * c * l1s) / ((1.0 - delta) + delta * c * lms),
        ls: l1s / lms,
    })
}

/// Condition numbers from an explicit eigendecomposition of
/// `V^T H V` for each Hessian `H = A^T W A` (`eta = 0`), `V` an orthonormal
/// basis of the row range of the full-rank `A`.
pub fn hessian_condition_numbers(a: &DMatrix<f64>, delta: f64, c: f64) -> Result<ConditionNumbers> {
    let m = a.nrows();
    let svd = a.clone().svd(false, true);
    let v = svd.v_t.expect("requested V^T").rows(0, m).transpose();
    let gram = a * a.transpose();
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Numerical("A A^T is singular".into()))?;
    let eye = DMatrix::<f64>::identity(m, m);
    let kappa = |w: &DMatrix<f64>| {
        let h = v.transpose() * a.transpose() * w * a * &v;
        let h = (&h + h.transpose()) * 0.5;
        let e = SymmetricEigen::new(h).eigenvalues;
        e.max() / e.min()
    };
    Ok(ConditionNumbers {
        bp: kappa(&inv),
        wls: kappa(&(&inv * (1.0 - delta) + &eye * (delta * c))),
        ls: kappa(&eye),
    })
}

/// Residual of the preconditioner construction `P = V diag(Gamma, 1) V^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Claim2Outcome {
    /// `||A^T W A - P^{1/2} A^T A P^{1/2}||_F`
    pub residual: f64,
    /// `residual / ||A^T W A||_F`
    pub relative: f64,
}

/// Builds `P` from the eigenvalues of `W` along the left singular vectors of
/// `A` (ones on the null space) and measures how well
/// `P^{1/2} A^T A P^{1/2}` reproduces `A^T W A`.
pub fn verify_claim2(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<Claim2Outcome> {
    let (m, n) = a.shape();
    if m > n || w.shape() != (m, m) {
        return Err(Error::InvalidShape(
            "need A m x n with m <= n and W m x m".into(),
        ));
    }
    if (w - w.transpose()).norm() > COMMUTE_TOL * w.norm() {
        return Err(Error::Assumption("W must be symmetric".into()));
    }
    let w_eigs = SymmetricEigen::new(w.clone()).eigenvalues;
    if !(w_eigs.min() > 0.0) {
        return Err(Error::Assumption("W must be positive definite".into()));
    }
    let gram = a * a.transpose();
    let comm = &gram * w - w * &gram;
    if rel_norm(&comm, gram.norm() * w.norm()) > COMMUTE_TOL {
        return Err(Error::Assumption("W does not commute with A A^T".into()));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut p_half = DMatrix::<f64>::identity(n, n);
    for i in 0..m {
        let ui = u.column(i);
        let vi = v_t.row(i).transpose();
        let gamma = (ui.transpose() * w * ui)[(0, 0)];
        // replace the unit eigenvalue along v_i by sqrt(gamma_i)
        p_half += &vi * vi.transpose() * (gamma.sqrt() - 1.0);
    }
    let lhs = a.transpose() * w * a;
    let rhs = &p_half * a.transpose() * a * &p_half;
    let residual = (&lhs - rhs).norm();
    Ok(Claim2Outcome {
        residual,
        relative: residual / lhs.norm().max(f64::MIN_POSITIVE),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Claim1Outcome {
    /// `||A^T (A x - y)||` at the constructed exact solution.
    pub ls_at_solution: f64,
    /// `||A^T W (A x - y)||` at the constructed exact solution.
    pub weighted_at_solution: f64,
    /// Smallest `||A^T (A x - y)||` over the random probe points.
    pub ls_min_elsewhere: f64,
    /// Smallest `||A^T W (A x - y)||` over the random probe points.
    pub weighted_min_elsewhere: f64,
}

impl Claim1Outcome {
    /// Both gradients vanish together: zero at the solution, nonzero at every probe.
    pub fn holds(&self, threshold: f64) -> bool {
        self.ls_at_solution <= threshold
            && self.weighted_at_solution <= threshold
            && self.ls_min_elsewhere > threshold
            && self.weighted_min_elsewhere > threshold
    }
}

/// Probes the zero sets of `A^T W (A x - y)` and `A^T (A x - y)`: at an
/// exact solution plus a random null-space component, and at `probes`
/// random points.
pub fn verify_claim1<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    probes: usize,
    rng: &mut R,
) -> Result<Claim1Outcome> {
    let (m, n) = a.shape();
    let y = gaussian_vector(m, rng);
    let gram = a * a.transpose();
    let pinv_y = a.transpose()
        * gram
            .lu()
            .solve(&y)
            .ok_or_else(|| Error::Assumption("A must have full row rank".into()))?;
    let z = gaussian_vector(n, rng);
    let az = a * &z;
    let null_part = &z
        - a.transpose()
            * (a * a.transpose())
                .lu()
                .solve(&az)
                .expect("gram already factorized");
    let x_sol = pinv_y + null_part;
    let grads = |x: &DVector<f64>| {
        let r = a * x - &y;
        (
            (a.transpose() * &r).norm(),
            (a.transpose() * (w * &r)).norm(),
        )
    };
    let (ls0, w0) = grads(&x_sol);
    let mut ls_min = f64::INFINITY;
    let mut w_min = f64::INFINITY;
    for _ in 0..probes {
        let x = &x_sol + gaussian_vector(n, rng) * rng.random_range(1e-3..=1.0);
        let (l, g) = grads(&x);
        ls_min = ls_min.min(l);
        w_min = w_min.min(g);
    }
    Ok(Claim1Outcome {
        ls_at_solution: ls0,
        weighted_at_solution: w0,
        ls_min_elsewhere: ls_min,
        weighted_min_elsewhere: w_min,
    })
}

/// WLS objective before and after one unit guidance step on a dense instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentStep {
    pub before: f64,
    pub after: f64,
    pub step_norm: f64,
}

/// Takes `x' = x - g_delta(x)` with `c = 1 / lambda_1^2` through the dense
/// operator path and reports the WLS objective at both points.
pub fn descent_step(
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    delta: f64,
    eta: f64,
) -> Result<DescentStep> {
    let (m, n) = a.shape();
    let l1 = a.singular_values().max();
    let data: Vec<f64> = (0..m)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| a[(r, c)])
        .collect();
    let op = LinearOperator::dense(DenseMatrix::new(m, n, data)?, Shape::vector(n)?)?;
    let cfg = GuidanceConfig::fixed(eta, 1.0 / (l1 * l1), delta)?;
    let xt = ImageTensor::from_vec(Shape::vector(n)?, x.iter().copied().collect())?;
    let yt = ImageTensor::from_vec(Shape::vector(m)?, y.iter().copied().collect())?;
    let g = g_delta(&op, &xt, &yt, delta, &cfg)?;
    let next = xt.sub(&g);
    Ok(DescentStep {
        before: wls_objective(&op, &xt, &yt, delta, &cfg)?,
        after: wls_objective(&op, &next, &yt, delta, &cfg)?,
        step_norm: g.norm(),
    })
}

/// One verifiable statement of the battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Claim {
    /// `A^T W (Ax - y) = 0` iff `A^T (Ax - y) = 0`.
    Stationarity,
    /// `A^T W A = P^{1/2} A^T A P^{1/2}` for the constructed `P`.
    Preconditioner,
    /// A unit guidance step with `c = 1 / lambda_1^2` decreases the WLS objective.
    Descent,
    /// `kappa_BP < kappa_WLS < kappa_LS`.
    Conditioning,
    /// Bias and variance orderings of the three estimators.
    BiasVariance,
}

impl Claim {
    pub const ALL: [Claim; 5] = [
        Claim::Stationarity,
        Claim::Preconditioner,
        Claim::Descent,
        Claim::Conditioning,
        Claim::BiasVariance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Claim::Stationarity => "claim1",
            Claim::Preconditioner => "claim2",
            Claim::Descent => "claim3",
            Claim::Conditioning => "claim4",
            Claim::BiasVariance => "theorem1",
        }
    }

    /// Accepts `claim1`..`claim4`, `1`..`4`, `theorem1`, `t1`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "claim1" | "1" => Ok(Claim::Stationarity),
            "claim2" | "2" => Ok(Claim::Preconditioner),
            "claim3" | "3" => Ok(Claim::Descent),
            "claim4" | "4" => Ok(Claim::Conditioning),
            "theorem1" | "t1" => Ok(Claim::BiasVariance),
            other => Err(Error::validation(format!("unknown claim {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub instances: usize,
    pub mc_draws: usize,
    /// Generate instances whose singular values are all equal. Violates the
    /// assumptions of the conditioning and bias/variance statements.
    pub force_equal_singular_values: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            instances: 50,
            mc_draws: 20000,
            force_equal_singular_values: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimReport {
    pub claim: Claim,
    pub passed: bool,
    pub instances: usize,
    /// Seed of the first failing instance.
    pub failing_seed: Option<u64>,
    pub summary: String,
}

impl ClaimReport {
    pub fn line(&self) -> String {
        let mut s = format!(
            "{} {} instances={} {}",
            self.claim.name(),
            if self.passed { "PASS" } else { "FAIL" },
            self.instances,
            self.summary
        );
        if let Some(seed) = self.failing_seed {
            s.push_str(&format!(" failing_seed={seed}"));
        }
        s
    }
}

fn instance_sizes<R: Rng + ?Sized>(rng: &mut R) -> (usize, usize) {
    let m = rng.random_range(3..=8);
    (m, rng.random_range(m..=12))
}

fn battery_problem<R: Rng + ?Sized>(opts: &VerifyOptions, rng: &mut R) -> Result<TikhonovProblem> {
    let (m, n) = instance_sizes(rng);
    let delta = rng.random_range(0.1..0.9);
    if opts.force_equal_singular_values {
        let l = rng.random_range(0.1..=1.0);
        TikhonovProblem::with_singular_values(&vec![l; m], n, delta, rng)
    } else {
        TikhonovProblem::conforming(m, n, delta, rng)
    }
}

/// Runs one statement over `opts.instances` random instances; instance `i`
/// draws from a stream seeded with `opts.seed + i`. Assumption violations
/// are returned as errors rather than failed reports.
pub fn verify_claim(claim: Claim, opts: &VerifyOptions) -> Result<ClaimReport> {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    if opts.instances == 0 {
        return Err(Error::validation("need at least one instance"));
    }
    let mut failing_seed = None;
    let mut worst = 0.0f64;
    let mut worst_z = 0.0f64;
    for i in 0..opts.instances {
        let seed = opts.seed.wrapping_add(i as u64);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ok = match claim {
            Claim::Stationarity => {
                let p = battery_problem(opts, &mut rng)?;
                let out = verify_claim1(p.a(), &p.weight(Mode::Wls)?, 20, &mut rng)?;
                worst = worst.max(out.weighted_at_solution.max(out.ls_at_solution));
                out.holds(1e-10)
            }
            Claim::Preconditioner => {
                let p = battery_problem(opts, &mut rng)?;
                let w = if i % 2 == 0 {
                    p.weight(Mode::Bp)?
                } else {
                    p.weight(Mode::Wls)?
                };
                let out = verify_claim2(p.a(), &w)?;
                worst = worst.max(out.relative);
                out.relative <= 1e-8
            }
            Claim::Descent => {
                let p = battery_problem(opts, &mut rng)?;
                let (m, n) = p.a().shape();
                let x = gaussian_vector(n, &mut rng);
                let y = gaussian_vector(m, &mut rng);
                let delta = [0.0, 0.25, 0.5, 0.75, 1.0][i % 5];
                let step = descent_step(p.a(), &x, &y, delta, 0.0)?;
                worst = worst.max(step.after / step.before);
                step.after < step.before
            }
            Claim::Conditioning => {
                let p = battery_problem(opts, &mut rng)?;
                let mut lambda: Vec<f64> = p.a().singular_values().iter().copied().collect();
                lambda.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let k = condition_numbers(&lambda, p.delta(), p.c())?;
                let e = hessian_condition_numbers(p.a(), p.delta(), p.c())?;
                let mismatch = (k.wls - e.wls).abs() / k.wls;
                worst = worst.max(mismatch);
                k.bp == 1.0 && k.strictly_ordered() && mismatch <= 1e-8
            }
            Claim::BiasVariance => {
                let p = battery_problem(opts, &mut rng)?;
                let report = verify_theorem1(&p)?;
                let m = p.a().nrows();
                let noise: Vec<DVector<f64>> = (0..opts.mc_draws)
                    .map(|_| gaussian_vector(m, &mut rng))
                    .collect();
                let mut agree = true;
                for mode in Mode::ALL {
                    let cf = report.get(mode);
                    let mc = monte_carlo_from_noise(&p, mode, &noise)?;
                    worst_z = worst_z
                        .max((mc.bias_sq - cf.bias_sq).abs() / mc.bias_sq_se)
                        .max((mc.variance - cf.variance).abs() / mc.variance_se);
                    agree &= mc.agrees_with(&cf, 3.0);
                }
                report.passed() && agree
            }
        };
        if !ok && failing_seed.is_none() {
            failing_seed = Some(seed);
        }
    }
    let summary = match claim {
        Claim::Stationarity => format!("max_gradient_at_solution={worst:.3e}"),
        Claim::Preconditioner => format!("max_relative_residual={worst:.3e}"),
        Claim::Descent => format!("max_objective_ratio={worst:.6}"),
        Claim::Conditioning => format!("max_kappa_mismatch={worst:.3e}"),
        Claim::BiasVariance => format!("draws={} max_abs_z={worst_z:.3}", opts.mc_draws),
    };
    Ok(ClaimReport {
        claim,
        passed: failing_seed.is_none(),
        instances: opts.instances,
        failing_seed,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn kappa_examples() {
        let k = condition_numbers(&[1.0, 0.5], 1.0, 1.0).unwrap();
        assert!((k.ls - 4.0).abs() < 1e-15);
        let k = condition_numbers(&[1.0, 0.5], 0.5, 1.0).unwrap();
        assert!((k.wls - 1.6).abs() < 1e-15);
        assert_eq!(k.bp, 1.0);
        assert!(k.strictly_ordered());
    }

    #[test]
    fn kappa_rejects_degenerate() {
        assert!(condition_numbers(&[0.5, 0.5], 0.5, 1.0).is_err());
        assert!(condition_numbers(&[0.5, 1.0], 0.5, 1.0).is_err());
        assert!(condition_numbers(&[1.0, 0.0], 0.5, 1.0).is_err());
    }

    #[test]
    fn identity_problem_ls() {
        let n = 4;
        let eye = DMatrix::<f64>::identity(n, n);
        let p = TikhonovProblem::new(eye.clone(), eye, 0.5, 0.1, DVector::zeros(n), 0.5, 0.0, 1.0)
            .unwrap();
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let x = tikhonov_estimate(&p, Mode::Ls, &y).unwrap();
        assert!((x - &y / 1.5).norm() < 1e-14);
    }

    #[test]
    fn noncommuting_regularizer_rejected() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let r = TikhonovProblem::new(a, d, 1.0, 0.1, DVector::zeros(2), 0.5, 0.0, 1.0);
        assert!(matches!(r, Err(Error::Assumption(_))));
    }

    #[test]
    fn equal_singular_values_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let p = TikhonovProblem::with_singular_values(&[0.7, 0.7, 0.7], 5, 0.5, &mut rng).unwrap();
        assert!(matches!(verify_theorem1(&p), Err(Error::Assumption(_))));
    }

    #[test]
    fn claim_names_round_trip() {
        for c in Claim::ALL {
            assert_eq!(Claim::parse(c.name()).unwrap(), c);
        }
        assert!(Claim::parse("claim9").is_err());
    }

    #[test]
    fn forced_equal_values_surface_assumption() {
        let opts = VerifyOptions {
            instances: 2,
            force_equal_singular_values: true,
            ..VerifyOptions::default()
        };
        assert!(matches!(
            verify_claim(Claim::Conditioning, &opts),
            Err(Error::Assumption(_))
        ));
        assert!(matches!(
            verify_claim(Claim::BiasVariance, &opts),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn claim2_scalar_weight() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(3, 5, |_, _| StandardNormal.sample(&mut rng));
        let out = verify_claim2(&a, &DMatrix::identity(3, 3)).unwrap();
        assert!(out.residual < 1e-12);
        let out = verify_claim2(&a, &(DMatrix::identity(3, 3) * 2.0)).unwrap();
        assert!(out.relative < 1e-10);
    }
}
