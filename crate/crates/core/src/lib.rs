//! Restoration of images from noisy linear measurements `y = A x* + e` by
//! iterative denoising with preconditioned guidance.
//!
//! The guidance direction interpolates between a back-projection step,
//! `A^T (A A^T + eta I)^{-1} (A x - y)`, and a least-squares gradient step,
//! `c A^T (A x - y)`, with a weight that moves from the former to the latter
//! as the iterations proceed. Two loops use it: a deterministic
//! plug-and-play scheme ([`schemes::idpg_run`]) and a diffusion-style sampler
//! ([`schemes::ddpg_run`]).
//!
//! Everything except [`theory`] is generic over the scalar type; the
//! aliases below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod denoisers;
pub mod error;
mod fft2;
pub mod guidance;
pub mod io;
pub mod linops;
pub mod metrics;
pub mod scalar;
pub mod schemes;
pub mod tensor;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Real;
pub use tensor::{ImageTensor, Shape};

pub type Image = tensor::ImageTensor<f64>;
pub type Operator = linops::LinearOperator<f64>;
pub type Denoiser = denoisers::Denoiser<f64>;
pub type SchemeConfig = schemes::SchemeConfig<f64>;
pub type Schedule = schemes::DiffusionSchedule<f64>;
pub type Trace = schemes::RunTrace<f64>;

pub type ImageF32 = tensor::ImageTensor<f32>;
pub type OperatorF32 = linops::LinearOperator<f32>;
