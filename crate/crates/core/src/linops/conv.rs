use num_complex::Complex;

use super::{Kernel, SPECTRAL_FLOOR};
use crate::error::{Error, Result};
use crate::fft2::Fft2;
use crate::scalar::Real;
use crate::tensor::{ImageTensor, Shape};

/// Circular convolution with a fixed kernel, applied channel-wise.
#[derive(Debug, Clone)]
pub struct CircularConvolution<T: Real> {
    kernel: Kernel<T>,
    shape: Shape,
    response: Vec<Complex<T>>,
    fft: Fft2<T>,
}

impl<T: Real> CircularConvolution<T> {
    pub fn new(kernel: Kernel<T>, shape: Shape) -> Result<Self> {
        let fft = Fft2::new(shape.height, shape.width);
        let response = fft.forward_real(&kernel.to_grid(shape.height, shape.width)?);
        Ok(Self {
            kernel,
            shape,
            response,
            fft,
        })
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Frequency response `F(k)` on the image grid.
    pub fn response(&self) -> &[Complex<T>] {
        &self.response
    }

    fn per_channel(
        &self,
        x: &ImageTensor<T>,
        f: impl Fn(usize, Complex<T>) -> Complex<T>,
    ) -> ImageTensor<T> {
        let mut out = Vec::with_capacity(x.len());
        for c in 0..self.shape.channels {
            out.extend(self.fft.filter(x.channel(c), &f));
        }
        ImageTensor::from_raw(self.shape, out)
    }

    pub(crate) fn apply(&self, x: &ImageTensor<T>) -> ImageTensor<T> {
        self.per_channel(x, |i, v| self.response[i] * v)
    }

    pub(crate) fn adjoint(&self, r: &ImageTensor<T>) -> ImageTensor<T> {
        self.per_channel(r, |i, v| self.response[i].conj() * v)
    }

    fn check_invertible(&self, eta: T) -> Result<()> {
        if eta == T::zero() {
            let floor = T::lit(SPECTRAL_FLOOR);
            let count = self
                .response
                .iter()
                .filter(|h| h.norm_sqr() < floor)
                .count();
            if count > 0 {
                return Err(Error::Singular { count });
            }
        }
        Ok(())
    }

    /// `(A A^T + eta I)^{-1} z`
    pub(crate) fn solve_gram(&self, z: &ImageTensor<T>, eta: T) -> Result<ImageTensor<T>> {
        self.check_invertible(eta)?;
        Ok(self.per_channel(z, |i, v| v / (self.response[i].norm_sqr() + eta)))
    }

    /// `A^T (A A^T + eta I)^{-1} z` in one pass: `conj(F k) F z / (|F k|^2 + eta)`.
    pub(crate) fn reg_pinv(&self, z: &ImageTensor<T>, eta: T) -> Result<ImageTensor<T>> {
        self.check_invertible(eta)?;
        Ok(self.per_channel(z, |i, v| {
            let h = self.response[i];
            h.conj() * v / (h.norm_sqr() + eta)
        }))
    }

    pub(crate) fn gram_max(&self) -> T {
        self.response
            .iter()
            .map(|h| h.norm_sqr())
            .fold(T::zero(), T::max)
    }
}
