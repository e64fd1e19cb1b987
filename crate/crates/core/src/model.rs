//! Trainable parameters and the persisted model artifact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::softplus;
use crate::transform::PreprocessStats;

/// Trainable parameter set: linear mean weights/intercept, linear volatility
/// weights/intercept (pre-softplus), and the unconstrained mean-reversion
/// parameter. Total count is `2d + 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Mean weights, one per input channel.
    pub mean_weights: Vec<f64>,
    /// Mean intercept.
    pub mean_intercept: f64,
    /// Volatility weights, one per input channel.
    pub vol_weights: Vec<f64>,
    /// Volatility intercept (pre-softplus).
    pub vol_intercept: f64,
    /// Unconstrained mean-reversion parameter; the rate is
    /// `softplus(reversion_raw)`, strictly positive.
    pub reversion_raw: f64,
}

impl ModelParams {
    pub fn zeros(dim: usize) -> Self {
        Self {
            mean_weights: vec![0.0; dim],
            mean_intercept: 0.0,
            vol_weights: vec![0.0; dim],
            vol_intercept: 0.0,
            reversion_raw: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean_weights.len()
    }

    /// Number of scalar parameters, `2d + 3`.
    pub fn count(&self) -> usize {
        2 * self.dim() + 3
    }

    /// Mean-reversion rate, always positive.
    pub fn reversion_rate(&self) -> f64 {
        softplus(self.reversion_raw)
    }

    /// Flatten to `[mean_weights, mean_intercept, vol_weights, vol_intercept,
    /// reversion_raw]` for optimizers and finite differences.
    pub fn to_flat(&self) -> Vec<f64> {
        let d = self.dim();
        let mut flat = Vec::with_capacity(2 * d + 3);
        flat.extend_from_slice(&self.mean_weights);
        flat.push(self.mean_intercept);
        flat.extend_from_slice(&self.vol_weights);
        flat.push(self.vol_intercept);
        flat.push(self.reversion_raw);
        flat
    }

    pub fn from_flat(dim: usize, flat: &[f64]) -> Result<Self> {
        let mut params = Self::zeros(dim);
        params.set_from_flat(flat)?;
        Ok(params)
    }

    /// Overwrite every parameter from the flat layout without reallocating.
    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        let d = self.dim();
        if flat.len() != 2 * d + 3 {
            return Err(Error::LengthMismatch {
                left: flat.len(),
                right: 2 * d + 3,
            });
        }
        self.mean_weights.copy_from_slice(&flat[..d]);
        self.mean_intercept = flat[d];
        self.vol_weights.copy_from_slice(&flat[d + 1..2 * d + 1]);
        self.vol_intercept = flat[2 * d + 1];
        self.reversion_raw = flat[2 * d + 2];
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

const MODEL_MAGIC: &str = "oucast model v1";

/// A trained model: channel binding, parameters, and the frozen preprocessing.
///
/// Persisted as a single human-readable text file with a versioned magic
/// header. Floats are written with Rust's shortest round-trip formatting, so
/// save/load reproduces every value bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub channel_names: Vec<String>,
    pub params: ModelParams,
    pub stats: PreprocessStats,
}

impl Model {
    pub fn new(
        channel_names: Vec<String>,
        params: ModelParams,
        stats: PreprocessStats,
    ) -> Result<Self> {
        let d = channel_names.len();
        if params.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: params.dim(),
            });
        }
        if stats.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: stats.dim(),
            });
        }
        if !params.all_finite() {
            return Err(Error::NonFinite {
                what: "model parameters",
                index: 0,
            });
        }
        for name in &channel_names {
            if name.is_empty() || name.contains(',') || name.contains('\n') {
                return Err(Error::InvalidConfig(format!(
                    "invalid channel name {name:?}: must be non-empty without commas"
                )));
            }
        }
        Ok(Self {
            channel_names,
            params,
            stats,
        })
    }

    pub fn dim(&self) -> usize {
        self.channel_names.len()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_MAGIC}");
        let _ = writeln!(s, "d = {}", self.dim());
        let _ = writeln!(s, "channels = {}", self.channel_names.join(","));
        let _ = writeln!(
            s,
            "mean_weights = {}",
            join_floats(&self.params.mean_weights)
        );
        let _ = writeln!(s, "mean_intercept = {}", self.params.mean_intercept);
        let _ = writeln!(s, "vol_weights = {}", join_floats(&self.params.vol_weights));
        let _ = writeln!(s, "vol_intercept = {}", self.params.vol_intercept);
        let _ = writeln!(s, "reversion_raw = {}", self.params.reversion_raw);
        let _ = writeln!(s, "target_scale = {}", self.stats.target_scale);
        let _ = writeln!(s, "zero_floor = {}", self.stats.zero_floor);
        let _ = writeln!(s, "input_means = {}", join_floats(&self.stats.input_means));
        let _ = writeln!(s, "input_stds = {}", join_floats(&self.stats.input_stds));
        let _ = writeln!(
            s,
            "constant_channels = {}",
            self.stats
                .constant_channels
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == MODEL_MAGIC => {}
            Some((_, first)) => {
                return Err(Error::ModelParse {
                    line: 1,
                    detail: format!("unrecognized header {first:?}, expected {MODEL_MAGIC:?}"),
                });
            }
            None => {
                return Err(Error::ModelParse {
                    line: 1,
                    detail: "empty file".into(),
                });
            }
        }

        let mut fields = std::collections::HashMap::new();
        for (idx, raw_line) in lines {
            let line = raw_line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ModelParse {
                line: idx + 1,
                detail: format!("expected `key = value`, got {line:?}"),
            })?;
            fields.insert(key.trim().to_string(), (idx + 1, value.trim().to_string()));
        }

        let take = |key: &str| -> Result<(usize, String)> {
            fields.get(key).cloned().ok_or_else(|| Error::ModelParse {
                line: 0,
                detail: format!("missing field {key:?}"),
            })
        };
        let scalar = |key: &str| -> Result<f64> {
            let (line, v) = take(key)?;
            v.parse().map_err(|_| Error::ModelParse {
                line,
                detail: format!("cannot parse {key} value {v:?} as a number"),
            })
        };
        let vector = |key: &str| -> Result<Vec<f64>> {
            let (line, v) = take(key)?;
            parse_floats(&v).map_err(|detail| Error::ModelParse { line, detail })
        };

        let (d_line, d_str) = take("d")?;
        let d: usize = d_str.parse().map_err(|_| Error::ModelParse {
            line: d_line,
            detail: format!("cannot parse d value {d_str:?}"),
        })?;
        let (ch_line, ch_str) = take("channels")?;
        let channel_names: Vec<String> = if ch_str.is_empty() {
            Vec::new()
        } else {
            ch_str.split(',').map(|s| s.trim().to_string()).collect()
        };
        if channel_names.len() != d {
            return Err(Error::ModelParse {
                line: ch_line,
                detail: format!("expected {d} channel names, got {}", channel_names.len()),
            });
        }

        let params = ModelParams {
            mean_weights: vector("mean_weights")?,
            mean_intercept: scalar("mean_intercept")?,
            vol_weights: vector("vol_weights")?,
            vol_intercept: scalar("vol_intercept")?,
            reversion_raw: scalar("reversion_raw")?,
        };
        let (cc_line, cc_str) = take("constant_channels")?;
        let constant_channels = if cc_str.is_empty() {
            Vec::new()
        } else {
            cc_str
                .split(',')
                .map(|s| {
                    s.trim().parse::<usize>().map_err(|_| Error::ModelParse {
                        line: cc_line,
                        detail: format!("cannot parse channel index {s:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        };
        let stats = PreprocessStats {
            target_scale: scalar("target_scale")?,
            zero_floor: scalar("zero_floor")?,
            input_means: vector("input_means")?,
            input_stds: vector("input_stds")?,
            constant_channels,
        };
        if stats.target_scale <= 0.0 {
            return Err(Error::NonPositive {
                what: "target_scale",
                value: stats.target_scale,
            });
        }
        if stats.input_stds.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidConfig("input_stds must be positive".into()));
        }
        Model::new(channel_names, params, stats)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("cannot parse {part:?} as a number"))
        })
        .collect()
}
