//! Evidential semantic segmentation with a Wasserstein-based composite loss.
//!
//! The crate is organised bottom-up:
//!
//! - [`dirichlet`]: evidence, Dirichlet parameters, beliefs and special functions
//! - [`losses`]: the four loss terms, KL annealing and their analytic gradients
//! - [`tensor`] and [`nn`]: a small reverse-mode engine, a convolutional
//!   segmentation net, ADAM and the trainer
//! - [`data`]: deterministic synthetic shapes dataset with a held-out OOD shape
//! - [`metrics`]: pixel- and segment-level OOD metrics, ECE, baselines, evaluation

pub mod data;
pub mod dirichlet;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod tensor;

pub use error::{Error, Result};
