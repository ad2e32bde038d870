use num_complex::Complex;

use super::{Kernel, SPECTRAL_FLOOR};
use crate::error::{Error, Result};
use crate::fft2::Fft2;
use crate::scalar::Real;
use crate::tensor::{ImageTensor, Shape};

/// Circular blur followed by `s`-fold subsampling (`A = S B`), channel-wise.
///
/// Subsampling keeps pixels at `(s i, s j)`. The Gram operator `A A^T` is
/// circulant on the low-resolution grid with kernel `k0`, the `s`-subsampled
/// autocorrelation of the blur.
#[derive(Debug, Clone)]
pub struct DownsampleConvolution<T: Real> {
    kernel: Kernel<T>,
    scale: usize,
    input: Shape,
    output: Shape,
    response: Vec<Complex<T>>,
    gram_kernel: Vec<T>,
    gram_response: Vec<T>,
    fft_hi: Fft2<T>,
    fft_lo: Fft2<T>,
}

impl<T: Real> DownsampleConvolution<T> {
    pub fn new(kernel: Kernel<T>, scale: usize, input: Shape) -> Result<Self> {
        if scale == 0 {
            return Err(Error::validation("scale must be positive"));
        }
        if !input.height.is_multiple_of(scale) || !input.width.is_multiple_of(scale) {
            return Err(Error::validation(format!(
                "image sides {}x{} not divisible by scale {scale}",
                input.height, input.width
            )));
        }
        let output = Shape::new(input.channels, input.height / scale, input.width / scale)?;
        let fft_hi = Fft2::new(input.height, input.width);
        let fft_lo = Fft2::new(output.height, output.width);
        let response = fft_hi.forward_real(&kernel.to_grid(input.height, input.width)?);

        let autocorr = fft_hi.inverse_real(
            response
                .iter()
                .map(|h| Complex::new(h.norm_sqr(), T::zero()))
                .collect(),
        );
        let gram_kernel = subsample(&autocorr, input.width, output, scale);
        let gram_response = fft_lo
            .forward_real(&gram_kernel)
            .into_iter()
            .map(|v| v.re)
            .collect();

        Ok(Self {
            kernel,
            scale,
            input,
            output,
            response,
            gram_kernel,
            gram_response,
            fft_hi,
            fft_lo,
        })
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.output
    }

    /// Spatial kernel `k0` of `A A^T` on the low-resolution grid.
    pub fn gram_kernel(&self) -> &[T] {
        &self.gram_kernel
    }

    /// Eigenvalues of `A A^T` (real, nonnegative) in DFT order.
    pub fn gram_response(&self) -> &[T] {
        &self.gram_response
    }

    pub(crate) fn apply(&self, x: &ImageTensor<T>) -> ImageTensor<T> {
        let mut out = Vec::with_capacity(self.output.len());
        for c in 0..self.input.channels {
            let blurred = self
                .fft_hi
                .filter(x.channel(c), |i, v| self.response[i] * v);
            out.extend(subsample(
                &blurred,
                self.input.width,
                self.output,
                self.scale,
            ));
        }
        ImageTensor::from_raw(self.output, out)
    }

    pub(crate) fn adjoint(&self, r: &ImageTensor<T>) -> ImageTensor<T> {
        let mut out = Vec::with_capacity(self.input.len());
        for c in 0..self.input.channels {
            let up = upsample(r.channel(c), self.output, self.input, self.scale);
            out.extend(self.fft_hi.filter(&up, |i, v| self.response[i].conj() * v));
        }
        ImageTensor::from_raw(self.input, out)
    }

    pub(crate) fn solve_gram(&self, z: &ImageTensor<T>, eta: T) -> Result<ImageTensor<T>> {
        if eta == T::zero() {
            let floor = T::lit(SPECTRAL_FLOOR);
            let count = self.gram_response.iter().filter(|&&g| g < floor).count();
            if count > 0 {
                return Err(Error::Singular { count });
            }
        }
        let mut out = Vec::with_capacity(self.output.len());
        for c in 0..self.output.channels {
            out.extend(
                self.fft_lo
                    .filter(z.channel(c), |i, v| v / (self.gram_response[i] + eta)),
            );
        }
        Ok(ImageTensor::from_raw(self.output, out))
    }

    pub(crate) fn gram_max(&self) -> T {
        self.gram_response.iter().copied().fold(T::zero(), T::max)
    }
}

fn subsample<T: Real>(plane: &[T], width: usize, out: Shape, s: usize) -> Vec<T> {
    let mut v = Vec::with_capacity(out.plane());
    for r in 0..out.height {
        for c in 0..out.width {
            v.push(plane[r * s * width + c * s]);
        }
    }
    v
}

fn upsample<T: Real>(plane: &[T], lo: Shape, hi: Shape, s: usize) -> Vec<T> {
    let mut v = vec![T::zero(); hi.plane()];
    for r in 0..lo.height {
        for c in 0..lo.width {
            v[r * s * hi.width + c * s] = plane[r * lo.width + c];
        }
    }
    v
}
