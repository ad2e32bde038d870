#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pguide::linops::{DenseMatrix, Kernel, LinearOperator};
use pguide::{ImageTensor, Shape};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_image<R: Rng>(shape: Shape, rng: &mut R) -> ImageTensor<f64> {
    let data = (0..shape.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    ImageTensor::from_vec(shape, data).unwrap()
}

pub fn to_vector(x: &ImageTensor<f64>) -> DVector<f64> {
    DVector::from_column_slice(x.data())
}

pub fn from_vector(v: &DVector<f64>, shape: Shape) -> ImageTensor<f64> {
    ImageTensor::from_vec(shape, v.iter().copied().collect()).unwrap()
}

/// Column-by-column assembly: column j is `A e_j`.
pub fn assemble(op: &LinearOperator<f64>) -> DMatrix<f64> {
    let (ins, outs) = (op.input_shape(), op.output_shape());
    let mut a = DMatrix::zeros(outs.len(), ins.len());
    for j in 0..ins.len() {
        let mut e = ImageTensor::zeros(ins);
        e.data_mut()[j] = 1.0;
        let col = op.apply(&e).unwrap();
        a.column_mut(j).copy_from_slice(col.data());
    }
    a
}

/// `A^T (A A^T + eta I)^{-1}` through an explicit SVD: `V diag(s / (s^2 + eta)) U^T`.
pub fn svd_reg_pinv(a: &DMatrix<f64>, eta: f64) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let f = svd.singular_values.map(|s| s / (s * s + eta));
    v_t.transpose() * DMatrix::from_diagonal(&f) * u.transpose()
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn rel_err_img(a: &ImageTensor<f64>, b: &ImageTensor<f64>) -> f64 {
    rel_err(&to_vector(a), &to_vector(b))
}

/// Random nonnegative kernel with unit sum.
pub fn random_kernel<R: Rng>(size: usize, rng: &mut R) -> Kernel<f64> {
    let taps: Vec<f64> = (0..size * size)
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    let s: f64 = taps.iter().sum();
    Kernel::new(size, size, taps.into_iter().map(|v| v / s).collect()).unwrap()
}

/// Kernel whose spectrum stays away from zero: a dominant center tap plus
/// small perturbations with total absolute mass below one half.
pub fn invertible_kernel<R: Rng>(size: usize, rng: &mut R) -> Kernel<f64> {
    let n = size * size;
    let mut taps: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let off: f64 = taps.iter().map(|v| v.abs()).sum();
    for v in &mut taps {
        *v *= 0.45 / off;
    }
    taps[n / 2] = 1.0;
    Kernel::new(size, size, taps).unwrap()
}

pub fn random_mask<R: Rng>(h: usize, w: usize, density: f64, rng: &mut R) -> Vec<bool> {
    let mut keep: Vec<bool> = (0..h * w).map(|_| rng.random_bool(density)).collect();
    keep[0] = true;
    keep
}

pub fn dense_op(a: &DMatrix<f64>) -> LinearOperator<f64> {
    let (m, n) = a.shape();
    let data = (0..m)
        .flat_map(|r| (0..n).map(move |c| a[(r, c)]))
        .collect();
    LinearOperator::dense(
        DenseMatrix::new(m, n, data).unwrap(),
        Shape::vector(n).unwrap(),
    )
    .unwrap()
}

pub fn random_matrix<R: Rng>(m: usize, n: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}
