use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{ImageTensor, Shape};

/// Pixel selection. `A A^T = I`, so the pseudoinverse is the adjoint.
///
/// The measurement of a `(c, h, w)` image is `(c, 1, m)` with `m` kept pixels
/// per channel, in row-major order.
#[derive(Debug, Clone)]
pub struct Mask {
    input: Shape,
    output: Shape,
    keep: Vec<bool>,
    indices: Vec<usize>,
}

impl Mask {
    pub fn new(height: usize, width: usize, keep: Vec<bool>, channels: usize) -> Result<Self> {
        let input = Shape::new(channels, height, width)?;
        if keep.len() != input.plane() {
            return Err(Error::InvalidShape(format!(
                "mask has {} entries for a {height}x{width} image",
                keep.len()
            )));
        }
        let indices: Vec<usize> = keep
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| k.then_some(i))
            .collect();
        if indices.is_empty() {
            return Err(Error::validation("mask keeps no pixels"));
        }
        let output = Shape::new(channels, 1, indices.len())?;
        Ok(Self {
            input,
            output,
            keep,
            indices,
        })
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn kept(&self) -> usize {
        self.indices.len()
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.output
    }

    pub(crate) fn apply<T: Real>(&self, x: &ImageTensor<T>) -> ImageTensor<T> {
        let mut out = Vec::with_capacity(self.output.len());
        for c in 0..self.input.channels {
            let plane = x.channel(c);
            out.extend(self.indices.iter().map(|&i| plane[i]));
        }
        ImageTensor::from_raw(self.output, out)
    }

    pub(crate) fn adjoint<T: Real>(&self, r: &ImageTensor<T>) -> ImageTensor<T> {
        let plane = self.input.plane();
        let mut out = vec![T::zero(); self.input.len()];
        for c in 0..self.input.channels {
            for (&i, &v) in self.indices.iter().zip(r.channel(c)) {
                out[c * plane + i] = v;
            }
        }
        ImageTensor::from_raw(self.input, out)
    }
}
