mod common;

use std::os::unix::fs::PermissionsExt;

use common::*;
use pguide::denoisers::{Denoise, Denoiser, ExternalCommand, WienerPrior};
use pguide::metrics::mse;
use pguide::{Error, ImageTensor, Shape};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn script(dir: &std::path::Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn wiener_zero_sigma_is_identity() {
    let mut r = rng(1);
    let den = Denoiser::WienerMmse(WienerPrior::default_for(8, 6).unwrap());
    let x = gaussian_image(Shape::new(2, 8, 6).unwrap(), &mut r);
    assert_eq!(den.denoise(&x, 0.0).unwrap(), x);
    assert_eq!(Denoiser::Identity.denoise(&x, 3.0).unwrap(), x);
}

#[test]
fn flat_prior_halves() {
    let mut r = rng(2);
    let prior = WienerPrior::new(4, 4, vec![1.0; 16], vec![0.0; 16]).unwrap();
    let x = gaussian_image(Shape::new(1, 4, 4).unwrap(), &mut r);
    let out = prior.posterior_mean(&x, 1.0).unwrap();
    assert!(rel_err_img(&out, &x.scale(0.5)) < 1e-14);
}

#[test]
fn matched_prior_reduces_error_on_average() {
    let mut r = rng(3);
    let (h, w) = (16, 16);
    let prior = WienerPrior::<f64>::inverse_quadratic(h, w, 1.0, 0.5).unwrap();
    let den = Denoiser::WienerMmse(prior.clone());
    let sigma = 0.2;
    let (mut before, mut after) = (0.0, 0.0);
    for _ in 0..100 {
        let x = prior.sample(1, &mut r).unwrap();
        let noisy = x.add_scaled(sigma, &gaussian_image(x.shape(), &mut r));
        before += mse(&noisy, &x).unwrap();
        after += mse(&den.denoise(&noisy, sigma).unwrap(), &x).unwrap();
    }
    assert!(after <= before, "{after} > {before}");
}

#[test]
fn wiener_is_linear_around_mean() {
    let mut r = rng(4);
    let prior = WienerPrior::<f64>::inverse_quadratic(8, 8, 2.0, 0.0).unwrap();
    let shape = Shape::new(1, 8, 8).unwrap();
    let (a, b) = (gaussian_image(shape, &mut r), gaussian_image(shape, &mut r));
    let lhs = prior
        .posterior_mean(&a.scale(2.0).add_scaled(-3.0, &b), 0.4)
        .unwrap();
    let rhs = prior
        .posterior_mean(&a, 0.4)
        .unwrap()
        .scale(2.0)
        .add_scaled(-3.0, &prior.posterior_mean(&b, 0.4).unwrap());
    assert!(rel_err_img(&lhs, &rhs) < 1e-12);
}

#[test]
fn prior_samples_have_expected_variance() {
    let mut r = rng(5);
    let (h, w) = (16, 16);
    let prior = WienerPrior::<f64>::inverse_quadratic(h, w, 1.0, 0.0).unwrap();
    let want = prior.power().iter().sum::<f64>() / (h * w) as f64;
    let mut acc = 0.0;
    let draws = 400;
    for _ in 0..draws {
        acc += prior.sample(1, &mut r).unwrap().norm_sq() / (h * w) as f64;
    }
    let got = acc / draws as f64;
    assert!((got - want).abs() < 0.05 * want, "{got} vs {want}");
}

#[test]
fn gaussian_smoothing_keeps_mean() {
    let mut r = rng(6);
    let x = gaussian_image(Shape::new(3, 10, 12).unwrap(), &mut r);
    let out = Denoiser::gaussian_smooth().denoise(&x, 1.7).unwrap();
    assert!((out.mean() - x.mean()).abs() < 1e-13);
    assert!(out.norm() < x.norm());
}

#[test]
fn negative_sigma_rejected() {
    let x = ImageTensor::<f64>::zeros(Shape::new(1, 2, 2).unwrap());
    assert!(matches!(
        Denoiser::Identity.denoise(&x, -1.0),
        Err(Error::Validation(_))
    ));
}

#[test]
fn external_copy_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), "copy.sh", r#"cp "$1" "$2""#);
    let den = Denoiser::External(ExternalCommand::parse(&cmd).unwrap());
    let mut r = rng(7);
    let x = gaussian_image(Shape::new(2, 5, 4).unwrap(), &mut r)
        .cast::<f32>()
        .cast::<f64>();
    assert_eq!(den.denoise(&x, 0.3).unwrap(), x);
}

#[test]
fn external_receives_sigma_argument() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("sigma.txt");
    let cmd = script(
        dir.path(),
        "log.sh",
        &format!(r#"echo "$3" > {}; cp "$1" "$2""#, log.display()),
    );
    let den = Denoiser::External(ExternalCommand::parse(&cmd).unwrap());
    let x = ImageTensor::<f64>::zeros(Shape::new(1, 2, 2).unwrap());
    den.denoise(&x, 0.25).unwrap();
    let sigma: f64 = std::fs::read_to_string(&log)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert_eq!(sigma, 0.25);
}

#[test]
fn external_failures_carry_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let x = ImageTensor::<f64>::zeros(Shape::new(1, 2, 2).unwrap());

    let failing = script(dir.path(), "fail.sh", "echo broken model >&2; exit 3");
    let err = Denoiser::External(ExternalCommand::parse(&failing).unwrap())
        .denoise(&x, 0.1)
        .unwrap_err();
    assert!(
        matches!(&err, Error::ExternalDenoiser(m) if m.contains("broken model")),
        "{err}"
    );

    let garbage = script(dir.path(), "garbage.sh", r#"echo nope > "$2""#);
    let err = Denoiser::External(ExternalCommand::parse(&garbage).unwrap())
        .denoise(&x, 0.1)
        .unwrap_err();
    assert!(
        matches!(err, Error::ExternalDenoiser(_) | Error::Format { .. }),
        "{err}"
    );

    let missing = Denoiser::External(ExternalCommand::parse("/no/such/program").unwrap());
    assert!(matches!(
        missing.denoise(&x, 0.1),
        Err(Error::ExternalDenoiser(_))
    ));
}

#[test]
fn external_shape_change_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("other.pgt");
    pguide::io::write_tensor(
        &other,
        &ImageTensor::<f64>::zeros(Shape::new(1, 3, 3).unwrap()),
    )
    .unwrap();
    let cmd = script(
        dir.path(),
        "resize.sh",
        &format!(r#"cp {} "$2""#, other.display()),
    );
    let x = ImageTensor::<f64>::zeros(Shape::new(1, 2, 2).unwrap());
    let err = Denoiser::External(ExternalCommand::parse(&cmd).unwrap())
        .denoise(&x, 0.1)
        .unwrap_err();
    assert!(
        matches!(
            err,
            Error::ExternalDenoiser(_) | Error::ShapeMismatch { .. }
        ),
        "{err}"
    );
}
