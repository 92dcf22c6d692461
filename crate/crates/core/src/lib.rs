//! Correlation-aware artificial-noise beamforming for MISO wiretap channels
//! where the eavesdropper's channel is correlated with the legitimate one.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod an_optimizer;
pub mod beamformer;
pub mod channel_model;
pub mod conic_adapter;
pub mod distributions;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod montecarlo;
pub mod power_alloc;
pub mod quad;

pub use error::{Error, Result};
