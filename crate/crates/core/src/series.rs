//! Time-series containers for exogenous inputs and the scalar target.

use crate::error::{Error, Result};
use crate::transform::PreprocessStats;

/// Uniformly sampled multi-channel input series, row-major `n x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSeries {
    t0: f64,
    dt: f64,
    n: usize,
    channel_names: Vec<String>,
    values: Vec<f64>,
}

impl InputSeries {
    pub fn new(t0: f64, dt: f64, channel_names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::NonPositive {
                what: "dt",
                value: dt,
            });
        }
        let d = channel_names.len();
        if d == 0 {
            return Err(Error::InvalidConfig("at least one input channel".into()));
        }
        if !values.len().is_multiple_of(d) {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: d,
            });
        }
        let n = values.len() / d;
        if n < 2 {
            return Err(Error::TooFewSamples {
                what: "input series",
                needed: 2,
                got: n,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "input series",
                index: i / d,
            });
        }
        Ok(Self {
            t0,
            dt,
            n,
            channel_names,
            values,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.channel_names.len()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Contiguous row window `[start, end)` as a new series with shifted t0.
    pub fn window(&self, start: usize, end: usize) -> Result<InputSeries> {
        if start >= end || end > self.n {
            return Err(Error::InvalidConfig(format!(
                "window [{start}, {end}) out of range for {} rows",
                self.n
            )));
        }
        let d = self.dim();
        InputSeries::new(
            self.time(start),
            self.dt,
            self.channel_names.clone(),
            self.values[start * d..end * d].to_vec(),
        )
    }

    /// Standardize every row with the frozen statistics; row-major output.
    pub fn standardized(&self, stats: &PreprocessStats) -> Result<Vec<f64>> {
        let d = self.dim();
        if stats.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: stats.dim(),
                got: d,
            });
        }
        let mut out = vec![0.0; self.values.len()];
        for i in 0..self.n {
            stats.standardize_row(self.row(i), &mut out[i * d..(i + 1) * d])?;
        }
        Ok(out)
    }
}

/// Scalar target series stored in raw and transformed units.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    t0: f64,
    dt: f64,
    y_raw: Vec<f64>,
    y: Vec<f64>,
}

impl ObservationSeries {
    /// Build from raw values by applying the frozen scaling and transform.
    pub fn from_raw(t0: f64, dt: f64, y_raw: Vec<f64>, stats: &PreprocessStats) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::NonPositive {
                what: "dt",
                value: dt,
            });
        }
        if y_raw.len() < 2 {
            return Err(Error::TooFewSamples {
                what: "observation series",
                needed: 2,
                got: y_raw.len(),
            });
        }
        let mut y = Vec::with_capacity(y_raw.len());
        for (i, &raw) in y_raw.iter().enumerate() {
            if !raw.is_finite() {
                return Err(Error::NonFinite {
                    what: "observation series",
                    index: i,
                });
            }
            if raw < 0.0 {
                return Err(Error::NegativeTarget {
                    value: raw,
                    index: i,
                });
            }
            y.push(stats.transform_target(raw)?);
        }
        Ok(Self { t0, dt, y_raw, y })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Raw-unit values.
    pub fn raw(&self) -> &[f64] {
        &self.y_raw
    }

    /// Transformed-unit values.
    pub fn transformed(&self) -> &[f64] {
        &self.y
    }

    /// Check that this series shares the grid of `inputs`.
    pub fn check_aligned(&self, inputs: &InputSeries) -> Result<()> {
        if self.len() != inputs.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: inputs.len(),
            });
        }
        let tol = 1e-9 * inputs.dt().max(1.0);
        if (self.t0 - inputs.t0()).abs() > tol || (self.dt - inputs.dt()).abs() > tol {
            return Err(Error::GridMismatch {
                detail: format!(
                    "t0 {} vs {}, dt {} vs {}",
                    self.t0,
                    inputs.t0(),
                    self.dt,
                    inputs.dt()
                ),
            });
        }
        Ok(())
    }
}
