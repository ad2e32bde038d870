//! Linear observation operators `A` with forward, adjoint and regularized
//! pseudoinverse application.
//!
//! Deblurring and super-resolution invert `A A^T + eta I` in the Fourier
//! domain; masks are tight frames; dense matrices use a Cholesky solve. The
//! conjugate-gradient solver in [`cg`] is a matrix-free alternative that only
//! needs `A` and `A^T`.

mod cg;
mod conv;
mod dense;
mod downsample;
mod kernel;
mod mask;

pub use cg::{cg_solve, CgOutcome};
pub use conv::CircularConvolution;
pub use dense::{cholesky_solve, Dense, DenseMatrix};
pub use downsample::DownsampleConvolution;
pub use kernel::Kernel;
pub use mask::Mask;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{ImageTensor, Shape};

/// Squared-magnitude threshold below which an eigenvalue of `A A^T` counts
/// as zero when inverting with `eta = 0`.
pub const SPECTRAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum LinearOperator<T: Real> {
    CircularConvolution(CircularConvolution<T>),
    DownsampleConvolution(DownsampleConvolution<T>),
    Mask(Mask),
    Dense(Dense<T>),
}

impl<T: Real> LinearOperator<T> {
    pub fn convolution(kernel: Kernel<T>, shape: Shape) -> Result<Self> {
        CircularConvolution::new(kernel, shape).map(Self::CircularConvolution)
    }

    pub fn downsample(kernel: Kernel<T>, scale: usize, shape: Shape) -> Result<Self> {
        DownsampleConvolution::new(kernel, scale, shape).map(Self::DownsampleConvolution)
    }

    pub fn mask(height: usize, width: usize, keep: Vec<bool>, channels: usize) -> Result<Self> {
        Mask::new(height, width, keep, channels).map(Self::Mask)
    }

    pub fn dense(matrix: DenseMatrix<T>, input: Shape) -> Result<Self> {
        Dense::new(matrix, input).map(Self::Dense)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::CircularConvolution(_) => "circular-convolution",
            Self::DownsampleConvolution(_) => "downsample-convolution",
            Self::Mask(_) => "mask",
            Self::Dense(_) => "dense",
        }
    }

    pub fn input_shape(&self) -> Shape {
        match self {
            Self::CircularConvolution(op) => op.shape(),
            Self::DownsampleConvolution(op) => op.input_shape(),
            Self::Mask(op) => op.input_shape(),
            Self::Dense(op) => op.input_shape(),
        }
    }

    pub fn output_shape(&self) -> Shape {
        match self {
            Self::CircularConvolution(op) => op.shape(),
            Self::DownsampleConvolution(op) => op.output_shape(),
            Self::Mask(op) => op.output_shape(),
            Self::Dense(op) => op.output_shape(),
        }
    }

    /// `A x`
    pub fn apply(&self, x: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        x.expect_shape(self.input_shape(), "apply")?;
        Ok(match self {
            Self::CircularConvolution(op) => op.apply(x),
            Self::DownsampleConvolution(op) => op.apply(x),
            Self::Mask(op) => op.apply(x),
            Self::Dense(op) => op.apply(x),
        })
    }

    /// `A^T r`
    pub fn apply_adjoint(&self, r: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        r.expect_shape(self.output_shape(), "apply_adjoint")?;
        Ok(match self {
            Self::CircularConvolution(op) => op.adjoint(r),
            Self::DownsampleConvolution(op) => op.adjoint(r),
            Self::Mask(op) => op.adjoint(r),
            Self::Dense(op) => op.adjoint(r),
        })
    }

    /// `(A A^T + eta I) z`
    pub fn apply_gram(&self, z: &ImageTensor<T>, eta: T) -> Result<ImageTensor<T>> {
        let g = self.apply(&self.apply_adjoint(z)?)?;
        Ok(g.add_scaled(eta, z))
    }

    /// `(A A^T + eta I)^{-1} z` in measurement space.
    pub fn solve_gram(&self, z: &ImageTensor<T>, eta: T) -> Result<ImageTensor<T>> {
        z.expect_shape(self.output_shape(), "solve_gram")?;
        check_eta(eta)?;
        match self {
            Self::CircularConvolution(op) => op.solve_gram(z, eta),
            Self::DownsampleConvolution(op) => op.solve_gram(z, eta),
            Self::Mask(_) => Ok(z.scale(T::one() / (T::one() + eta))),
            Self::Dense(op) => op.solve_gram(z, eta),
        }
    }

    /// Regularized pseudoinverse `A^T (A A^T + eta I)^{-1} z`.
    pub fn apply_reg_pinv(&self, z: &ImageTensor<T>, eta: T) -> Result<ImageTensor<T>> {
        z.expect_shape(self.output_shape(), "apply_reg_pinv")?;
        check_eta(eta)?;
        match self {
            Self::CircularConvolution(op) => op.reg_pinv(z, eta),
            Self::Mask(op) => Ok(op.adjoint(&z.scale(T::one() / (T::one() + eta)))),
            _ => self.apply_adjoint(&self.solve_gram(z, eta)?),
        }
    }

    /// Regularized pseudoinverse through conjugate gradients on the Gram
    /// operator. Returns the image and the CG outcome for diagnostics.
    pub fn apply_reg_pinv_cg(
        &self,
        z: &ImageTensor<T>,
        eta: T,
        tol: T,
        max_iters: usize,
    ) -> Result<(ImageTensor<T>, CgOutcome<T>)> {
        z.expect_shape(self.output_shape(), "apply_reg_pinv_cg")?;
        check_eta(eta)?;
        let shape = self.output_shape();
        let gram = |v: &[T]| -> Vec<T> {
            let t = ImageTensor::from_raw(shape, v.to_vec());
            self.apply_gram(&t, eta)
                .expect("gram shapes are consistent")
                .into_vec()
        };
        let out = cg_solve(gram, z.data(), tol, max_iters)?;
        let u = ImageTensor::from_raw(shape, out.solution.clone());
        Ok((self.apply_adjoint(&u)?, out))
    }

    /// Largest singular value of `A`. Exact from the spectrum for FFT
    /// operators and masks, 50-step power iteration for dense matrices.
    pub fn largest_singular_value(&self) -> T {
        match self {
            Self::CircularConvolution(op) => op.gram_max().sqrt(),
            Self::DownsampleConvolution(op) => op.gram_max().sqrt(),
            Self::Mask(_) => T::one(),
            Self::Dense(_) => self.power_iteration(50),
        }
    }

    /// Power iteration on `A^T A` from a fixed pseudorandom start.
    pub fn power_iteration(&self, iters: usize) -> T {
        let shape = self.input_shape();
        let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
        let start: Vec<T> = (0..shape.len())
            .map(|_| T::lit(StandardNormal.sample(&mut rng)))
            .collect();
        let mut v = ImageTensor::from_raw(shape, start);
        let mut sigma_sq = T::zero();
        for _ in 0..iters {
            let n = v.norm();
            if n == T::zero() {
                return T::zero();
            }
            v = v.scale(T::one() / n);
            let w = self
                .apply_adjoint(&self.apply(&v).expect("shape"))
                .expect("shape");
            sigma_sq = v.dot(&w);
            v = w;
        }
        sigma_sq.max(T::zero()).sqrt()
    }
}

fn check_eta<T: Real>(eta: T) -> Result<()> {
    if !(eta >= T::zero()) || !eta.is_finite() {
        return Err(Error::validation(format!(
            "eta must be finite and >= 0, got {eta}"
        )));
    }
    Ok(())
}
