// `!(x > 0.0)`-style guards are deliberate: they reject NaN along with
// non-positive values, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Fitting, simulation, and calibration evaluation of an exogenous-input
//! Ornstein-Uhlenbeck process for probabilistic time-series prediction.
//!
//! The pipeline: preprocess a raw target series ([`transform`]), fit the
//! transition-density likelihood with minibatched Adam ([`trainer`]), sample
//! predictive path ensembles from inputs alone ([`sampler`]), and evaluate
//! calibration with PIT/KS diagnostics ([`metrics`]). [`synthetic`] generates
//! ground-truth datasets for verification.

pub mod error;
pub mod math;
pub mod metrics;
pub mod model;
pub mod ou;
pub mod sampler;
pub mod series;
pub mod synthetic;
pub mod trainer;
pub mod transform;

pub use error::{Error, Result};
pub use model::{Model, ModelParams};
pub use ou::TransitionStats;
pub use series::{InputSeries, ObservationSeries};
pub use transform::{fit_preprocess, transform_forward, transform_inverse, PreprocessStats};
