//! Target transform and frozen preprocessing statistics.
//!
//! The raw target is first divided by the training-set standard deviation and
//! then pushed through a piecewise log-linear map,
//!
//! ```text
//! y = log(z)     if z < 1
//! y = z - 1      if z >= 1
//! ```
//!
//! which is continuous and strictly increasing, keeps small values in log
//! space, and leaves large spikes on a linear scale. Inputs are z-scored per
//! channel. All statistics are frozen at training time and stored with the
//! model so prediction applies exactly the same maps.

use crate::error::{Error, Result};
use crate::math;

/// Default clip applied to scaled targets before the log branch, so that
/// sensor readings of exactly zero stay representable.
pub const DEFAULT_ZERO_FLOOR: f64 = 1e-9;

/// Piecewise log-linear forward transform of a scaled target value.
///
/// Requires `z > 0`; zero handling happens upstream via the
/// [`PreprocessStats::zero_floor`] clip.
pub fn transform_forward(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::TransformDomain { value: z });
    }
    Ok(if z < 1.0 { z.ln() } else { z - 1.0 })
}

/// Exact inverse of [`transform_forward`].
pub fn transform_inverse(y: f64) -> f64 {
    if y < 0.0 {
        y.exp()
    } else {
        y + 1.0
    }
}

/// Frozen preprocessing statistics: target scale, per-channel input moments,
/// and the zero clip. Computed once on training data, then applied unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessStats {
    /// Population standard deviation of the raw training target.
    pub target_scale: f64,
    /// Scaled-unit floor applied before the log branch.
    pub zero_floor: f64,
    pub input_means: Vec<f64>,
    pub input_stds: Vec<f64>,
    /// Channels whose training values were constant; their std is stored as 1.
    pub constant_channels: Vec<usize>,
}

impl PreprocessStats {
    pub fn dim(&self) -> usize {
        self.input_means.len()
    }

    /// Scale and transform one raw target value. Values below the floor
    /// (including exact zeros) are clipped up to it; negatives are rejected
    /// rather than clipped.
    pub fn transform_target(&self, raw: f64) -> Result<f64> {
        if raw < 0.0 {
            return Err(Error::TransformDomain { value: raw });
        }
        let z = (raw / self.target_scale).max(self.zero_floor);
        transform_forward(z)
    }

    /// Map a transformed value back to raw units.
    pub fn inverse_target(&self, y: f64) -> f64 {
        transform_inverse(y) * self.target_scale
    }

    /// Standardize one input row in place into `out`.
    pub fn standardize_row(&self, row: &[f64], out: &mut [f64]) -> Result<()> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: row.len(),
            });
        }
        for (j, (&u, o)) in row.iter().zip(out.iter_mut()).enumerate() {
            *o = (u - self.input_means[j]) / self.input_stds[j];
        }
        Ok(())
    }
}

/// Compute frozen preprocessing statistics from raw training data.
///
/// `train_inputs` is row-major with `dim` channels per row. A constant target
/// is an error; a constant input channel gets std 1 and is flagged.
pub fn fit_preprocess(
    train_raw_target: &[f64],
    train_inputs: &[f64],
    dim: usize,
) -> Result<PreprocessStats> {
    let n = train_raw_target.len();
    if n < 2 {
        return Err(Error::TooFewSamples {
            what: "training target",
            needed: 2,
            got: n,
        });
    }
    if train_inputs.len() != n * dim {
        return Err(Error::LengthMismatch {
            left: train_inputs.len(),
            right: n * dim,
        });
    }
    for (i, &v) in train_raw_target.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "training target",
                index: i,
            });
        }
        if v < 0.0 {
            return Err(Error::NegativeTarget { value: v, index: i });
        }
    }

    let target_scale = math::population_std(train_raw_target);
    if target_scale <= 0.0 {
        return Err(Error::DegenerateTarget);
    }

    let mut input_means = vec![0.0; dim];
    let mut input_stds = vec![0.0; dim];
    let mut constant_channels = Vec::new();
    for j in 0..dim {
        let column: Vec<f64> = (0..n).map(|i| train_inputs[i * dim + j]).collect();
        if let Some(i) = column.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "training inputs",
                index: i * dim + j,
            });
        }
        input_means[j] = math::mean(&column);
        let std = math::population_std(&column);
        if std > 0.0 {
            input_stds[j] = std;
        } else {
            input_stds[j] = 1.0;
            constant_channels.push(j);
        }
    }

    Ok(PreprocessStats {
        target_scale,
        zero_floor: DEFAULT_ZERO_FLOOR,
        input_means,
        input_stds,
        constant_channels,
    })
}
