//! Restoration loops: deterministic iterative denoising with preconditioned
//! guidance (IDPG, plus the IDBP and PGM-LS endpoints) and the stochastic
//! diffusion sampler (DDPG).

mod schedule;

pub use schedule::{
    eps_effective, x0_from_eps, DiffusionSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START,
    DEFAULT_STEPS,
};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::denoisers::Denoise;
use crate::error::{Error, Result};
use crate::guidance::{delta_schedule, g_delta, wls_objective, GuidanceConfig};
use crate::linops::LinearOperator;
use crate::scalar::Real;
use crate::tensor::{ImageTensor, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Preconditioned guidance, `delta_t` from the schedule.
    Idpg,
    /// Back-projection only, `delta_t = 0`.
    Idbp,
    /// Least-squares gradient only, `delta_t = 1`.
    PgmLs,
    /// Stochastic sampler with noise re-injection.
    Ddpg,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Idpg => "idpg",
            Method::Idbp => "idbp",
            Method::PgmLs => "pgm_ls",
            Method::Ddpg => "ddpg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idpg" => Ok(Method::Idpg),
            "idbp" => Ok(Method::Idbp),
            "pgm_ls" | "pgm-ls" => Ok(Method::PgmLs),
            "ddpg" => Ok(Method::Ddpg),
            _ => Err(Error::validation(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSizePolicy {
    /// `mu_t = 1`
    Unit,
    /// `mu_t = (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)`
    DdimRatio,
}

impl StepSizePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            StepSizePolicy::Unit => "unit",
            StepSizePolicy::DdimRatio => "ddim-ratio",
        }
    }

    pub fn step_sizes<T: Real>(self, schedule: &DiffusionSchedule<T>) -> Vec<T> {
        (1..=schedule.steps())
            .map(|t| match self {
                StepSizePolicy::Unit => T::one(),
                StepSizePolicy::DdimRatio => {
                    (T::one() - schedule.alpha_bar(t - 1)) / (T::one() - schedule.alpha_bar(t))
                }
            })
            .collect()
    }
}

impl fmt::Display for StepSizePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StepSizePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(StepSizePolicy::Unit),
            "ddim-ratio" => Ok(StepSizePolicy::DdimRatio),
            _ => Err(Error::validation(format!("unknown step-size policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig<T> {
    pub method: Method,
    pub eta: T,
    pub c: T,
    pub gamma: T,
    pub zeta: T,
    /// Observation noise level; zero switches to pure back-projection.
    pub sigma_e: T,
    pub seed: u64,
    pub steps: usize,
    pub beta_start: T,
    pub beta_end: T,
    pub step_size: StepSizePolicy,
}

impl<T: Real> Default for SchemeConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::Idpg,
            eta: T::lit(crate::guidance::ETA_FLOOR),
            c: T::one(),
            gamma: T::lit(8.0),
            zeta: T::half(),
            sigma_e: T::zero(),
            seed: 0,
            steps: DEFAULT_STEPS,
            beta_start: T::lit(DEFAULT_BETA_START),
            beta_end: T::lit(DEFAULT_BETA_END),
            step_size: StepSizePolicy::Unit,
        }
    }
}

/// Per-step quantities resolved from a [`SchemeConfig`].
#[derive(Debug, Clone)]
pub struct Plan<T> {
    pub schedule: DiffusionSchedule<T>,
    pub guidance: GuidanceConfig<T>,
    /// Noise-injection weights `w_t`, indexed by `t - 1`.
    pub w: Vec<T>,
}

impl<T: Real> SchemeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: T, name: &str| {
            if v >= T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!(
                    "{name} must be finite and >= 0, got {v}"
                )))
            }
        };
        nonneg(self.eta, "eta")?;
        nonneg(self.gamma, "gamma")?;
        nonneg(self.sigma_e, "sigma_e")?;
        if !(self.c > T::zero()) {
            return Err(Error::validation("c must be > 0"));
        }
        if !(self.zeta >= T::zero() && self.zeta <= T::one()) {
            return Err(Error::validation("zeta must lie in [0, 1]"));
        }
        if self.steps == 0 {
            return Err(Error::validation("T must be >= 1"));
        }
        Ok(())
    }

    pub fn plan(&self) -> Result<Plan<T>> {
        self.validate()?;
        let schedule = DiffusionSchedule::linear(self.steps, self.beta_start, self.beta_end)?;
        let (scheduled, w) = delta_schedule(&schedule.alpha_bars()[1..], self.gamma, self.sigma_e)?;
        let delta = match self.method {
            Method::Idpg | Method::Ddpg => scheduled,
            Method::Idbp => vec![T::zero(); self.steps],
            Method::PgmLs => vec![T::one(); self.steps],
        };
        let guidance = GuidanceConfig {
            eta: self.eta,
            c: self.c,
            mu: self.step_size.step_sizes(&schedule),
            delta,
        };
        guidance.validate()?;
        Ok(Plan {
            schedule,
            guidance,
            w,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<T> {
    pub t: usize,
    pub delta: T,
    /// WLS objective at the denoised estimate `x_{0|t}`.
    pub objective_before: T,
    /// WLS objective after the guidance step.
    pub objective: T,
    /// `||A x_{0|t} - y||`
    pub residual: T,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace<T> {
    pub records: Vec<TraceRecord<T>>,
}

impl<T: Real> RunTrace<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One `t delta objective residual` line per iteration.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&format!(
                "{} {:e} {:e} {:e}\n",
                r.t,
                r.delta.as_f64(),
                r.objective.as_f64(),
                r.residual.as_f64()
            ));
        }
        s
    }
}

fn at_step(t: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Iteration {
        t,
        source: Box::new(e),
    }
}

fn check_inputs<T: Real>(op: &LinearOperator<T>, y: &ImageTensor<T>) -> Result<()> {
    y.expect_shape(op.output_shape(), "measurement")?;
    if !y.is_finite() {
        return Err(Error::NonFinite("measurement"));
    }
    Ok(())
}

/// One guided step from the denoised estimate, with its trace record.
fn guided_step<T: Real>(
    op: &LinearOperator<T>,
    y: &ImageTensor<T>,
    guidance: &GuidanceConfig<T>,
    t: usize,
    x0: &ImageTensor<T>,
) -> Result<(ImageTensor<T>, TraceRecord<T>)> {
    let (delta, mu) = guidance.at(t);
    let g = g_delta(op, x0, y, delta, guidance)?;
    let next = x0.add_scaled(-mu, &g);
    let record = TraceRecord {
        t,
        delta,
        objective_before: wls_objective(op, x0, y, delta, guidance)?,
        objective: wls_objective(op, &next, y, delta, guidance)?,
        residual: op.apply(x0)?.sub(y).norm(),
    };
    Ok((next, record))
}

/// Deterministic iterative denoising with preconditioned guidance.
///
/// Starts from the back-projection `A^T (A A^T + eta I)^{-1} y`, then for
/// `t = T..1` denoises at `sqrt((1 - alpha_bar_t) / alpha_bar_t)` and takes
/// one guidance step. Returns the post-guidance estimate of the last step.
/// `cfg.method` selects the `delta` schedule (`Idpg`, `Idbp` or `PgmLs`).
pub fn idpg_run<T: Real, D: Denoise<T> + ?Sized>(
    denoiser: &D,
    op: &LinearOperator<T>,
    y: &ImageTensor<T>,
    cfg: &SchemeConfig<T>,
) -> Result<(ImageTensor<T>, RunTrace<T>)> {
    if cfg.method == Method::Ddpg {
        return Err(Error::validation("idpg_run does not run the ddpg method"));
    }
    check_inputs(op, y)?;
    let plan = cfg.plan()?;
    let mut x = op.apply_reg_pinv(y, cfg.eta)?;
    let mut trace = RunTrace::default();
    for t in (1..=plan.schedule.steps()).rev() {
        let x0 = denoiser
            .denoise(&x, plan.schedule.denoiser_sigma(t))
            .map_err(at_step(t))?;
        x0.expect_shape(op.input_shape(), "denoiser output")
            .map_err(at_step(t))?;
        let (next, record) = guided_step(op, y, &plan.guidance, t, &x0).map_err(at_step(t))?;
        trace.records.push(record);
        x = next;
    }
    Ok((x, trace))
}

/// Denoising diffusion with iterative preconditioned guidance.
pub fn ddpg_run<T: Real, D: Denoise<T> + ?Sized>(
    denoiser: &D,
    op: &LinearOperator<T>,
    y: &ImageTensor<T>,
    cfg: &SchemeConfig<T>,
) -> Result<(ImageTensor<T>, RunTrace<T>)> {
    ddpg_run_with_eps_hook(denoiser, op, y, cfg, |_, _| {})
}

/// [`ddpg_run`] with a hook that may rewrite the effective noise estimate
/// at each step before it is re-injected. Used to probe which terms the
/// output depends on.
#[doc(hidden)]
pub fn ddpg_run_with_eps_hook<T: Real, D: Denoise<T> + ?Sized>(
    denoiser: &D,
    op: &LinearOperator<T>,
    y: &ImageTensor<T>,
    cfg: &SchemeConfig<T>,
    mut hook: impl FnMut(usize, &mut ImageTensor<T>),
) -> Result<(ImageTensor<T>, RunTrace<T>)> {
    if cfg.method != Method::Ddpg {
        return Err(Error::validation(format!(
            "ddpg_run requires method ddpg, got {}",
            cfg.method
        )));
    }
    check_inputs(op, y)?;
    let plan = cfg.plan()?;
    let shape = op.input_shape();
    let sched = &plan.schedule;
    // Stream order: x_T first, then one eps_t block per step for t = T..1.
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut x = gaussian(shape, &mut rng);
    let mut trace = RunTrace::default();
    let root_zeta = cfg.zeta.sqrt();
    let root_keep = (T::one() - cfg.zeta).sqrt();

    for t in (1..=sched.steps()).rev() {
        let ab = sched.alpha_bar(t);
        let ab_prev = sched.alpha_bar(t - 1);
        let step = |x: &ImageTensor<T>| -> Result<(ImageTensor<T>, TraceRecord<T>)> {
            let eps = predicted_noise(denoiser, x, ab, sched.denoiser_sigma(t))?;
            let x0 = x0_from_eps(x, &eps, ab)?;
            guided_step(op, y, &plan.guidance, t, &x0)
        };
        let (x_tilde, record) = step(&x).map_err(at_step(t))?;
        trace.records.push(record);

        let mut eps_hat = eps_effective(&x, &x_tilde, ab).map_err(at_step(t))?;
        hook(t, &mut eps_hat);
        let fresh = gaussian(shape, &mut rng);
        let w = plan.w[t - 1];
        let (a, s) = (ab_prev.sqrt(), (T::one() - ab_prev).sqrt());
        let keep = w * root_keep;
        x = ImageTensor::from_raw(
            shape,
            x_tilde
                .data()
                .iter()
                .zip(eps_hat.data())
                .zip(fresh.data())
                .map(|((&xt, &eh), &e)| a * xt + s * (keep * eh + root_zeta * e))
                .collect(),
        );
    }
    Ok((x, trace))
}

/// Noise estimate from a signal-domain denoiser:
/// `(x_t - sqrt(alpha_bar) D(x_t / sqrt(alpha_bar); sigma)) / sqrt(1 - alpha_bar)`.
pub fn predicted_noise<T: Real, D: Denoise<T> + ?Sized>(
    denoiser: &D,
    x_t: &ImageTensor<T>,
    alpha_bar_t: T,
    sigma: T,
) -> Result<ImageTensor<T>> {
    let a = alpha_bar_t.sqrt();
    let denoised = denoiser.denoise(&x_t.scale(T::one() / a), sigma)?;
    denoised.expect_shape(x_t.shape(), "denoiser output")?;
    let inv = T::one() / (T::one() - alpha_bar_t).sqrt();
    Ok(x_t.zip_map(&denoised, |x, d| (x - a * d) * inv))
}

fn gaussian<T: Real>(shape: Shape, rng: &mut ChaCha20Rng) -> ImageTensor<T> {
    ImageTensor::from_raw(
        shape,
        (0..shape.len())
            .map(|_| T::lit(StandardNormal.sample(rng)))
            .collect(),
    )
}

/// Runs the scheme selected by `cfg.method`.
pub fn restore<T: Real, D: Denoise<T> + ?Sized>(
    denoiser: &D,
    op: &LinearOperator<T>,
    y: &ImageTensor<T>,
    cfg: &SchemeConfig<T>,
) -> Result<(ImageTensor<T>, RunTrace<T>)> {
    match cfg.method {
        Method::Ddpg => ddpg_run(denoiser, op, y, cfg),
        _ => idpg_run(denoiser, op, y, cfg),
    }
}
