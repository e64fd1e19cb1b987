//! Run configuration: a TOML file validated up front, before any data is
//! touched.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use oucast_core::synthetic::{ControlTruth, SynthSpec, VolatilityTruth};
use oucast_core::trainer::TrainConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory; overridden by `--out`.
    pub out_dir: Option<PathBuf>,
    pub data: Option<DataSection>,
    pub train: Option<TrainSection>,
    pub predict: Option<PredictSection>,
    pub synth: Option<SynthSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Sampling interval in seconds.
    pub dt: f64,
    #[serde(default = "default_time_column")]
    pub time_column: String,
    #[serde(default = "default_target_column")]
    pub target_column: String,
    /// Input channel columns, bound by name.
    pub channels: Vec<String>,
    pub train_csv: Option<PathBuf>,
    /// Explicit validation file; otherwise the training tail is held out.
    pub validation_csv: Option<PathBuf>,
    pub validation_fraction: Option<f64>,
}

fn default_time_column() -> String {
    "time_s".to_string()
}

fn default_target_column() -> String {
    "target".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub seed: Option<u64>,
    pub early_stopping: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSection {
    /// Ensemble size M.
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub quantiles: Option<Vec<f64>>,
    pub parallel: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub dt: f64,
    pub n: usize,
    pub train_points: usize,
    pub reversion: f64,
    pub mean_weights: Vec<f64>,
    pub mean_intercept: f64,
    /// Constant volatility; exclusive with the state-dependent pair below.
    pub sigma: Option<f64>,
    pub vol_weights: Option<Vec<f64>>,
    pub vol_intercept: Option<f64>,
    /// Per channel: `[[t, level], ...]`; exclusive with the random layout.
    pub schedule: Option<Vec<Vec<[f64; 2]>>>,
    pub mean_dwell_steps: Option<f64>,
    pub level_range: Option<[f64; 2]>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if let Some(data) = &self.data {
            if !(data.dt > 0.0) {
                bail!("[data] dt must be positive, got {}", data.dt);
            }
            if data.channels.is_empty() {
                bail!("[data] channels must list at least one column");
            }
            let mut seen = std::collections::HashSet::new();
            for name in &data.channels {
                if !seen.insert(name) {
                    bail!("[data] duplicate channel {name:?}");
                }
            }
            if let Some(f) = data.validation_fraction {
                if !(f > 0.0 && f < 1.0) {
                    bail!("[data] validation_fraction must be in (0, 1), got {f}");
                }
            }
        }
        if let Some(p) = &self.predict {
            if let Some(m) = p.paths {
                if m == 0 {
                    bail!("[predict] paths must be >= 1");
                }
            }
            if let Some(q) = &p.quantiles {
                if q.windows(2).any(|w| w[1] <= w[0]) || q.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                    bail!("[predict] quantiles must be strictly ascending inside (0, 1)");
                }
            }
        }
        if let Some(synth) = &self.synth {
            synth.to_spec(0)?; // full structural validation
        }
        Ok(())
    }

    pub fn data(&self) -> Result<&DataSection> {
        self.data
            .as_ref()
            .context("config is missing the [data] section")
    }

    pub fn train_config(&self, seed_override: Option<u64>) -> Result<TrainConfig> {
        let mut config = TrainConfig::default();
        if let Some(section) = &self.train {
            if let Some(epochs) = section.epochs {
                config.epochs = epochs;
            }
            if let Some(batch) = section.batch_size {
                config.batch_size = batch;
            }
            if let Some(lr) = section.learning_rate {
                config.learning_rate = lr;
            }
            if let Some(seed) = section.seed {
                config.seed = seed;
            }
            if let Some(es) = section.early_stopping {
                config.early_stopping = es;
            }
        }
        if let Some(data) = &self.data {
            if let Some(f) = data.validation_fraction {
                config.validation_fraction = f;
            }
        }
        if let Some(seed) = seed_override {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn sample_config(
        &self,
        seed_override: Option<u64>,
        retain_paths: bool,
    ) -> Result<oucast_core::sampler::SampleConfig> {
        let mut config = oucast_core::sampler::SampleConfig {
            retain_paths,
            ..Default::default()
        };
        if let Some(section) = &self.predict {
            if let Some(m) = section.paths {
                config.n_paths = m;
            }
            if let Some(seed) = section.seed {
                config.seed = seed;
            }
            if let Some(q) = &section.quantiles {
                config.quantile_levels = q.clone();
            }
            if let Some(par) = section.parallel {
                config.parallel = par;
            }
        }
        // the 95% band quantiles are always recorded for evaluation
        for level in [0.025, 0.975] {
            if !config
                .quantile_levels
                .iter()
                .any(|&q| (q - level).abs() <= 1e-9)
            {
                config.quantile_levels.push(level);
            }
        }
        config.quantile_levels.sort_unstable_by(f64::total_cmp);
        if let Some(seed) = seed_override {
            config.seed = seed;
        }
        Ok(config)
    }
}

impl SynthSection {
    pub fn to_spec(&self, seed_override_fallback: u64) -> Result<SynthSpec> {
        let volatility = match (&self.sigma, &self.vol_weights, &self.vol_intercept) {
            (Some(s), None, None) => VolatilityTruth::Constant(*s),
            (None, Some(w), Some(i)) => VolatilityTruth::StateDependent {
                weights: w.clone(),
                intercept: *i,
            },
            _ => bail!("[synth] set either sigma or both vol_weights and vol_intercept"),
        };
        let controls = match (&self.schedule, &self.mean_dwell_steps) {
            (Some(schedule), None) => ControlTruth::Piecewise(
                schedule
                    .iter()
                    .map(|ch| ch.iter().map(|p| (p[0], p[1])).collect())
                    .collect(),
            ),
            (None, Some(dwell)) => {
                let range = self.level_range.unwrap_or([0.0, 1.0]);
                ControlTruth::RandomPiecewise {
                    mean_dwell_steps: *dwell,
                    level_lo: range[0],
                    level_hi: range[1],
                }
            }
            _ => bail!("[synth] set either schedule or mean_dwell_steps"),
        };
        let spec = SynthSpec {
            dt: self.dt,
            n: self.n,
            train_points: self.train_points,
            reversion: self.reversion,
            mean_weights: self.mean_weights.clone(),
            mean_intercept: self.mean_intercept,
            volatility,
            controls,
            seed: self.seed.unwrap_or(seed_override_fallback),
        };
        spec.validate()
            .map_err(|e| anyhow::anyhow!("[synth] {e}"))?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[data]
dt = 0.01
channels = ["u1"]

[synth]
dt = 0.01
n = 101
train_points = 70
reversion = 10.0
mean_weights = [2.0]
mean_intercept = 1.0
sigma = 0.5
schedule = [[[0.0, 0.5], [0.7, 1.5]]]
"#;

    #[test]
    fn parses_minimal_config() {
        let config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.validate().unwrap();
        let spec = config.synth.as_ref().unwrap().to_spec(0).unwrap();
        assert_eq!(spec.n, 101);
        assert_eq!(spec.dim(), 1);
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = format!("{MINIMAL}\n[predict]\nbogus_field = 1\n");
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn rejects_conflicting_volatility() {
        let text = MINIMAL.replace(
            "sigma = 0.5",
            "sigma = 0.5\nvol_weights = [0.1]\nvol_intercept = 0.0",
        );
        let config: RunConfig = toml::from_str(&text).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn train_config_overrides() {
        let text = format!("{MINIMAL}\n[train]\nepochs = 5\nseed = 3\n");
        let config: RunConfig = toml::from_str(&text).unwrap();
        let t = config.train_config(None).unwrap();
        assert_eq!(t.epochs, 5);
        assert_eq!(t.seed, 3);
        let t = config.train_config(Some(42)).unwrap();
        assert_eq!(t.seed, 42);
    }

    #[test]
    fn sample_config_always_carries_95_band() {
        let text = format!("{MINIMAL}\n[predict]\nquantiles = [0.25, 0.75]\npaths = 50\n");
        let config: RunConfig = toml::from_str(&text).unwrap();
        let s = config.sample_config(None, false).unwrap();
        assert!(s.quantile_levels.iter().any(|&q| (q - 0.025).abs() < 1e-12));
        assert!(s.quantile_levels.iter().any(|&q| (q - 0.975).abs() < 1e-12));
        assert_eq!(s.n_paths, 50);
    }
}
