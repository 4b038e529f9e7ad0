//! Decide whether a converged local optimum of a likelihood is the global one.
//!
//! A local optimizer hands you a stationary point `theta_hat` of a negative
//! log-likelihood. This crate answers the follow-up question: is that point
//! consistent with being the *global* maximum-likelihood estimate? The core
//! machinery compares the observed log-likelihood against parametric-bootstrap
//! moments of the fitted model (two-sided and one-sided validation tests), and
//! against what a deliberately over-parameterized "relaxed" model can reach
//! from the same point (the gap test). A companion pipeline mines whitened
//! score vectors from deliberately mis-converged fits to learn which relaxation
//! directions matter, and an optics module applies the same detect-and-restart
//! loop to point-spread-function fitting with Zernike wavefront parameters.
//!
//! Modules:
//! - [`model`]: datasets, parameter points, the model trait, Gaussian location
//!   models, and relaxed embeddings.
//! - [`sinusoid`]: the sinusoidal regression benchmark with a rugged
//!   likelihood surface, plus its relaxation constructors.
//! - [`optimize`]: bound-constrained quasi-Newton descent and the
//!   lift-then-descend relaxed minimizer.
//! - [`validate`]: bootstrap moments and the four optimality tests.
//! - [`discovery`]: learning relaxation directions from whitened scores.
//! - [`optics`]: Zernike screens, FFT point-spread functions, Strehl shells,
//!   and perturbation bounds.
//! - [`experiment`]: reproducible experiment drivers behind the CLI.
//!
//! The `examples/` directory is the guided tour; each example exercises one
//! capability end to end. A thin `globality` binary exposes the same drivers
//! as `profile`, `roc`, `discover`, and `wavefront` subcommands.

pub mod discovery;
pub mod error;
pub mod experiment;
pub mod model;
pub mod optics;
pub mod optimize;
pub mod rng;
pub mod sinusoid;
pub mod validate;

pub mod cli;

pub use error::{Error, Result};
