mod common;

use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use pguide::guidance::{
    default_c, delta_schedule, g_bp, g_delta, g_ls, wls_objective, GuidanceConfig,
};
use pguide::linops::{Kernel, LinearOperator};
use pguide::theory::{gaussian_vector, verify_claim1};
use pguide::{ImageTensor, Shape};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[test]
fn zero_residual_gives_zero_directions() {
    let mut r = rng(1);
    let shape = Shape::new(1, 8, 8).unwrap();
    let op = LinearOperator::convolution(Kernel::gaussian(3, 1.0).unwrap(), shape).unwrap();
    let x = gaussian_image(shape, &mut r);
    let y = op.apply(&x).unwrap();
    assert_eq!(g_bp(&op, &x, &y, 0.1).unwrap().norm(), 0.0);
    assert_eq!(g_ls(&op, &x, &y, 2.0).unwrap().norm(), 0.0);
    let cfg = GuidanceConfig::fixed(0.1, 1.0, 0.3).unwrap();
    assert_eq!(wls_objective(&op, &x, &y, 0.3, &cfg).unwrap(), 0.0);
}

#[test]
fn identity_ls_direction_is_difference() {
    let mut r = rng(2);
    let shape = Shape::new(2, 4, 4).unwrap();
    let op = LinearOperator::convolution(Kernel::delta(1).unwrap(), shape).unwrap();
    let x = gaussian_image(shape, &mut r);
    let y = gaussian_image(shape, &mut r);
    let g = g_ls(&op, &x, &y, 1.0).unwrap();
    assert!(rel_err_img(&g, &x.sub(&y)) < 1e-14);
}

#[test]
fn tight_frame_directions_coincide() {
    let mut r = rng(3);
    let op = LinearOperator::mask(8, 8, random_mask(8, 8, 0.5, &mut r), 1).unwrap();
    let x = gaussian_image(op.input_shape(), &mut r);
    let y = gaussian_image(op.output_shape(), &mut r);
    let bp = g_bp(&op, &x, &y, 0.0).unwrap();
    assert_eq!(bp, g_ls(&op, &x, &y, 1.0).unwrap());
    let cfg = GuidanceConfig::fixed(0.0, 1.0, 0.0).unwrap();
    for delta in [0.0, 0.2, 0.5, 0.9, 1.0] {
        assert!(rel_err_img(&g_delta(&op, &x, &y, delta, &cfg).unwrap(), &bp) < 1e-15);
    }
}

#[test]
fn bp_matches_dense_oracle() {
    let mut r = rng(4);
    let shape = Shape::new(1, 8, 8).unwrap();
    let op = LinearOperator::convolution(random_kernel(3, &mut r), shape).unwrap();
    let a = assemble(&op);
    let x = gaussian_image(shape, &mut r);
    let y = gaussian_image(shape, &mut r);
    let want = svd_reg_pinv(&a, 0.05) * (&a * to_vector(&x) - to_vector(&y));
    assert!(rel_err(&to_vector(&g_bp(&op, &x, &y, 0.05).unwrap()), &want) < 1e-6);
}

#[test]
fn ls_direction_matches_finite_differences() {
    let mut r = rng(5);
    let shape = Shape::new(1, 6, 6).unwrap();
    let op = LinearOperator::downsample(random_kernel(3, &mut r), 2, shape).unwrap();
    let x = gaussian_image(shape, &mut r);
    let y = gaussian_image(op.output_shape(), &mut r);
    let c = 0.7;
    let g = g_ls(&op, &x, &y, c).unwrap().scale(1.0 / c);
    let loss = |z: &ImageTensor<f64>| 0.5 * op.apply(z).unwrap().sub(&y).norm_sq();
    let h = 1e-5;
    for _ in 0..10 {
        let d = gaussian_image(shape, &mut r);
        let fd = (loss(&x.add_scaled(h, &d)) - loss(&x.add_scaled(-h, &d))) / (2.0 * h);
        assert!((fd - g.dot(&d)).abs() < 1e-5 * (1.0 + fd.abs()));
    }
}

#[test]
fn delta_endpoints_are_bitwise() {
    let mut r = rng(6);
    let shape = Shape::new(1, 8, 8).unwrap();
    let op = LinearOperator::convolution(Kernel::gaussian(5, 2.0).unwrap(), shape).unwrap();
    let x = gaussian_image(shape, &mut r);
    let y = gaussian_image(shape, &mut r);
    let cfg = GuidanceConfig::fixed(0.02, 0.8, 0.0).unwrap();
    assert_eq!(
        g_delta(&op, &x, &y, 0.0, &cfg).unwrap(),
        g_bp(&op, &x, &y, 0.02).unwrap()
    );
    assert_eq!(
        g_delta(&op, &x, &y, 1.0, &cfg).unwrap(),
        g_ls(&op, &x, &y, 0.8).unwrap()
    );
    let half = g_delta(&op, &x, &y, 0.5, &cfg).unwrap();
    let avg = g_bp(&op, &x, &y, 0.02)
        .unwrap()
        .add(&g_ls(&op, &x, &y, 0.8).unwrap())
        .scale(0.5);
    assert!(rel_err_img(&half, &avg) < 1e-12);
    assert!(g_delta(&op, &x, &y, 1.5, &cfg).is_err());
}

#[test]
fn g_delta_is_affine_in_delta() {
    let mut r = rng(7);
    let shape = Shape::new(1, 8, 8).unwrap();
    let op = LinearOperator::downsample(Kernel::bicubic(2).unwrap(), 2, shape).unwrap();
    let x = gaussian_image(shape, &mut r);
    let y = gaussian_image(op.output_shape(), &mut r);
    let cfg = GuidanceConfig::fixed(0.01, 1.0, 0.0).unwrap();
    let (a, b, c) = (0.1, 0.4, 0.85);
    let ga = g_delta(&op, &x, &y, a, &cfg).unwrap();
    let gb = g_delta(&op, &x, &y, b, &cfg).unwrap();
    let gc = g_delta(&op, &x, &y, c, &cfg).unwrap();
    // gb - ga and gc - ga are parallel with ratio (b - a) / (c - a)
    let predicted = ga.add_scaled((b - a) / (c - a), &gc.sub(&ga));
    assert!(rel_err_img(&gb, &predicted) < 1e-12);
}

#[test]
fn wls_objective_endpoints_and_oracle() {
    let mut r = rng(8);
    let a = random_matrix(5, 9, &mut r);
    let op = dense_op(&a);
    let x = gaussian_image(op.input_shape(), &mut r);
    let y = gaussian_image(op.output_shape(), &mut r);
    let res = &a * to_vector(&x) - to_vector(&y);

    let cfg = GuidanceConfig::fixed(0.0, 1.0, 1.0).unwrap();
    let ls = wls_objective(&op, &x, &y, 1.0, &cfg).unwrap();
    assert!((ls - 0.5 * res.norm_squared()).abs() < 1e-12 * ls);

    let (delta, eta, c) = (0.35, 0.2, 0.6);
    let cfg = GuidanceConfig::fixed(eta, c, delta).unwrap();
    let got = wls_objective(&op, &x, &y, delta, &cfg).unwrap();
    let eye = DMatrix::<f64>::identity(5, 5);
    let w = (&a * a.transpose() + &eye * eta).try_inverse().unwrap() * (1.0 - delta)
        + &eye * (delta * c);
    let e = SymmetricEigen::new(w);
    let root = &e.eigenvectors
        * DMatrix::from_diagonal(&e.eigenvalues.map(f64::sqrt))
        * e.eigenvectors.transpose();
    let want = 0.5 * (root * res).norm_squared();
    assert!((got - want).abs() < 1e-8 * want);
}

#[test]
fn wls_gradient_is_g_delta() {
    let mut r = rng(9);
    let a = random_matrix(4, 7, &mut r);
    let op = dense_op(&a);
    let x = gaussian_image(op.input_shape(), &mut r);
    let y = gaussian_image(op.output_shape(), &mut r);
    let cfg = GuidanceConfig::fixed(0.1, 0.5, 0.4).unwrap();
    let g = g_delta(&op, &x, &y, 0.4, &cfg).unwrap();
    let h = 1e-5;
    for _ in 0..5 {
        let d = gaussian_image(op.input_shape(), &mut r);
        let f = |z: &ImageTensor<f64>| wls_objective(&op, z, &y, 0.4, &cfg).unwrap();
        let fd = (f(&x.add_scaled(h, &d)) - f(&x.add_scaled(-h, &d))) / (2.0 * h);
        assert!((fd - g.dot(&d)).abs() < 1e-6 * (1.0 + fd.abs()));
    }
}

#[test]
fn unit_step_descends_in_wls() {
    let mut r = rng(10);
    for delta in [0.0, 0.25, 0.5, 0.75, 1.0] {
        for _ in 0..50 {
            let a = random_matrix(4, 8, &mut r);
            let x = gaussian_vector(8, &mut r);
            let y = gaussian_vector(4, &mut r);
            let step = pguide::theory::descent_step(&a, &x, &y, delta, 0.01).unwrap();
            assert!(step.after < step.before);
        }
    }
}

#[test]
fn stationarity_sets_coincide() {
    let mut r = rng(11);
    for _ in 0..20 {
        let a = random_matrix(4, 9, &mut r);
        let eye = DMatrix::<f64>::identity(4, 4);
        let w = (&a * a.transpose()).try_inverse().unwrap() * 0.6 + eye * 0.4;
        let out = verify_claim1(&a, &w, 50, &mut r).unwrap();
        assert!(out.holds(1e-10), "{out:?}");
    }
}

#[test]
fn delta_schedule_validation() {
    assert!(delta_schedule(&[0.9, 1.5], 1.0, 0.1).is_err());
    let (d, w) = delta_schedule(&[0.99, 0.5], 3.0, 0.0).unwrap();
    assert_eq!((d, w), (vec![0.0, 0.0], vec![1.0, 1.0]));
    let (d, _) = delta_schedule(&[0.7, 0.2], 1.0, 0.3).unwrap();
    assert_eq!(d, vec![0.7, 0.2]);
}

#[test]
fn config_rejects_increasing_delta() {
    let cfg = GuidanceConfig {
        eta: 0.0,
        c: 1.0,
        mu: vec![1.0; 3],
        delta: vec![0.1, 0.5, 0.2],
    };
    assert!(cfg.validate().is_err());
    let cfg = GuidanceConfig {
        eta: 0.0,
        c: 1.0,
        mu: vec![1.0; 3],
        delta: vec![0.9, 0.5, 0.2],
    };
    assert!(cfg.validate().is_ok());
}

#[test]
fn default_c_follows_largest_singular_value() {
    let shape = Shape::new(1, 8, 8).unwrap();
    let blur =
        LinearOperator::convolution(Kernel::<f64>::gaussian(5, 1.0).unwrap(), shape).unwrap();
    assert_eq!(default_c(&blur), 1.0);
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
    assert!((default_c(&dense_op(&a)) - 1.0 / 9.0).abs() < 1e-10);
}
