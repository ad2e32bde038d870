//! Two-dimensional complex FFT on a fixed grid, built from 1-D rustfft plans.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

#[derive(Clone)]
pub(crate) struct Fft2<T: Real> {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Fft2<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.height, self.width)
    }
}

impl<T: Real> Fft2<T> {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    fn transform(&self, buf: &mut [Complex<T>], rows: &Arc<dyn Fft<T>>, cols: &Arc<dyn Fft<T>>) {
        debug_assert_eq!(buf.len(), self.len());
        let (h, w) = (self.height, self.width);
        rows.process(buf);
        if h > 1 {
            let mut t = vec![Complex::new(T::zero(), T::zero()); h * w];
            for r in 0..h {
                for c in 0..w {
                    t[c * h + r] = buf[r * w + c];
                }
            }
            cols.process(&mut t);
            for r in 0..h {
                for c in 0..w {
                    buf[r * w + c] = t[c * h + r];
                }
            }
        }
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, buf: &mut [Complex<T>]) {
        self.transform(buf, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform including the `1/(h w)` factor, in place.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.transform(buf, &self.row_inv, &self.col_inv);
        let k = T::one() / T::from_usize(self.len()).unwrap();
        for v in buf.iter_mut() {
            *v = *v * k;
        }
    }

    pub fn forward_real(&self, x: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&self, mut buf: Vec<Complex<T>>) -> Vec<T> {
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Real-to-real filtering by a frequency response `h`.
    pub fn filter(&self, x: &[T], h: impl Fn(usize, Complex<T>) -> Complex<T>) -> Vec<T> {
        let mut buf = self.forward_real(x);
        for (i, v) in buf.iter_mut().enumerate() {
            *v = h(i, *v);
        }
        self.inverse_real(buf)
    }
}

/// Signed integer frequency index for DFT bin `k` of an `n`-point transform.
pub(crate) fn signed_freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}
