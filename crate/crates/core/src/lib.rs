//! Functional linear regression with points of impact.
//!
//! The model is `Y = int_a^b beta(t) X(t) dt + sum_r beta_r X(tau_r) + eps` for
//! curves `X` observed on an equidistant grid. The crate simulates rough
//! Gaussian covariates, estimates the number and location of the impact points
//! `tau_r`, fits the coefficients together with a principal-component estimate
//! of `beta(t)`, and runs the evaluation protocols (simulation study and
//! leave-one-out cross-validation).

pub mod config;
pub mod data;
pub mod detection;
pub mod error;
pub mod evaluation;
pub mod fpca;
pub mod io;
mod linalg;
pub mod process;
pub mod quadrature;
pub mod regression;
pub mod report;
pub mod response;
pub mod rng;

pub use data::{CurveMatrix, FunctionalDataset, Grid};
pub use error::{Error, ErrorCategory, Result};
