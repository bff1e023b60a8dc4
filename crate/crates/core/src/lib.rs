//! Change-point estimation from indirect observations.
//!
//! The model is the white-noise convolution model
//! `dY(x) = (Kf)(x) dx + ε dW(x)`, where `f` has a single jump at `θ`.
//! The estimator deconvolves a smoothed second derivative of `f` from the
//! observed path and looks for its zero crossing between the two extrema.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod harness;
pub mod kernels;
pub mod observation;
pub mod probe;
pub mod smoother;
pub mod spectral;
pub mod testbed;

pub use error::{Error, Result};
