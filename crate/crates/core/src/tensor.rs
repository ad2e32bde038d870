use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `(channels, height, width)` of a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidShape(format!(
                "dimensions must be positive, got ({channels}, {height}, {width})"
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
        })
    }

    /// Flat vector of length `n`, stored as `(1, 1, n)`.
    pub fn vector(n: usize) -> Result<Self> {
        Self::new(1, 1, n)
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.channels * self.plane()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.channels, self.height, self.width)
    }
}

/// Dense real tensor in channel-major, row-major order.
///
/// Images and measurement vectors share this type; a measurement produced by
/// an operator carries the operator's output shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Real> ImageTensor<T> {
    /// Builds a tensor, rejecting length mismatches and non-finite entries.
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::InvalidShape(format!(
                "{} values supplied for shape {shape}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data"));
        }
        Ok(Self { shape, data })
    }

    pub(crate) fn from_raw(shape: Shape, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: Shape, value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let p = self.shape.plane();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn get(&self, c: usize, row: usize, col: usize) -> T {
        self.data[(c * self.shape.height + row) * self.shape.width + col]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(self.shape, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        Self::from_raw(
            self.shape,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|v| a * v)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    /// `self + a * other`
    pub fn add_scaled(&self, a: T, other: &Self) -> Self {
        self.zip_map(other, |u, v| u + a * v)
    }

    pub fn clamp(&self, lo: T, hi: T) -> Self {
        self.map(|v| v.max(lo).min(hi))
    }

    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::from_usize(self.len()).unwrap()
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        if shape.len() != self.data.len() {
            return Err(Error::InvalidShape(format!(
                "cannot reshape {} into {shape}",
                self.shape
            )));
        }
        Ok(Self {
            shape,
            data: self.data,
        })
    }

    pub fn cast<U: Real>(&self) -> ImageTensor<U> {
        ImageTensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }

    pub(crate) fn expect_shape(&self, expected: Shape, context: &'static str) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch {
                context,
                expected,
                found: self.shape,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let s = Shape::new(1, 1, 2).unwrap();
        assert!(ImageTensor::from_vec(s, vec![1.0, f64::NAN]).is_err());
        assert!(ImageTensor::from_vec(s, vec![1.0, f64::INFINITY]).is_err());
        assert!(ImageTensor::from_vec(s, vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(Shape::new(0, 2, 2).is_err());
        assert!(Shape::new(1, 0, 2).is_err());
    }

    #[test]
    fn length_mismatch() {
        let s = Shape::new(1, 2, 2).unwrap();
        assert!(ImageTensor::<f32>::from_vec(s, vec![0.0; 3]).is_err());
    }
}
