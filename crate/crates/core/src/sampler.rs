//! Predictive path ensembles.
//!
//! Prediction never observes the target: every path starts from the
//! deterministic initial value `X0 = mu(u_0)` and iterates the exact Gaussian
//! transition,
//!
//! ```text
//! X_{i+1} = m_i + sqrt(V_i) * eta_i,   eta_i ~ N(0, 1)
//! ```
//!
//! one unit-normal draw per step. Each path owns an independent
//! counter-based RNG stream keyed by `(seed, path index)`, so parallel and
//! serial execution produce bit-identical ensembles.
//!
//! Paths are advanced time-major and summarized per step, which bounds
//! memory at `O(paths)` regardless of horizon; the full path matrix is kept
//! only on request. Per-step quantiles use linear interpolation between
//! order statistics (type 7). Raw-unit summaries are computed by inverse
//! transforming every path value and then summarizing, never by inverting
//! the transformed summary. Cumulative output accumulates raw-unit values
//! per path starting from the first prediction step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::population_std;
use crate::model::Model;
use crate::ou;
use crate::series::InputSeries;
use crate::transform::PreprocessStats;

/// Paths per rayon task when parallel sampling is enabled. Fixed so the work
/// split does not depend on the thread count.
const PATH_CHUNK: usize = 2048;

#[derive(Debug, Clone)]
pub struct SampleConfig {
    /// Ensemble size M.
    pub n_paths: usize,
    pub seed: u64,
    /// Quantile levels recorded per step, strictly inside (0, 1), ascending.
    pub quantile_levels: Vec<f64>,
    /// Keep the full paths matrix in the result.
    pub retain_paths: bool,
    /// Advance paths with rayon; output is identical either way.
    pub parallel: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            seed: 0,
            quantile_levels: vec![0.025, 0.25, 0.75, 0.975],
            retain_paths: false,
            parallel: true,
        }
    }
}

impl SampleConfig {
    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be >= 1".into()));
        }
        for pair in self.quantile_levels.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidConfig(
                    "quantile levels must be strictly ascending".into(),
                ));
            }
        }
        if self.quantile_levels.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return Err(Error::InvalidConfig(
                "quantile levels must lie strictly inside (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Per-step ensemble statistics in one unit space.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub median: Vec<f64>,
    /// One vector per configured quantile level, each of length `n_steps`.
    pub quantiles: Vec<Vec<f64>>,
}

impl StepSummary {
    fn with_capacity(n_levels: usize, n_steps: usize) -> Self {
        Self {
            mean: Vec::with_capacity(n_steps),
            std: Vec::with_capacity(n_steps),
            median: Vec::with_capacity(n_steps),
            quantiles: vec![Vec::with_capacity(n_steps); n_levels],
        }
    }
}

/// Across-path moments of the raw-unit running sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Cumulative mean with +-1/2/3 standard-deviation bands.
#[derive(Debug, Clone)]
pub struct CumulativeBands {
    pub mean: Vec<f64>,
    /// `lower[k - 1]` / `upper[k - 1]` hold the +-k sigma band.
    pub lower: [Vec<f64>; 3],
    pub upper: [Vec<f64>; 3],
}

/// Monte-Carlo ensemble with transformed and raw-unit per-step summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub n_steps: usize,
    pub t0: f64,
    pub dt: f64,
    pub quantile_levels: Vec<f64>,
    /// Transformed-unit summary (the model's native space).
    pub summary: StepSummary,
    /// Raw-unit summary, each path inverse transformed before summarizing.
    pub raw_summary: StepSummary,
    /// Raw-unit cumulative output statistics.
    pub cumulative: CumulativeSummary,
    /// Full matrix, path-major `n_paths x n_steps`, transformed units.
    pub paths: Option<Vec<f64>>,
}

impl PathEnsemble {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Index of a configured quantile level.
    pub fn level_index(&self, level: f64) -> Result<usize> {
        self.quantile_levels
            .iter()
            .position(|&q| (q - level).abs() <= 1e-9)
            .ok_or(Error::QuantileUnavailable { level })
    }

    /// Cumulative mean and +-1/2/3 sigma bands in raw units.
    pub fn cumulative_bands(&self) -> CumulativeBands {
        let mean = self.cumulative.mean.clone();
        let mut lower = [Vec::new(), Vec::new(), Vec::new()];
        let mut upper = [Vec::new(), Vec::new(), Vec::new()];
        for k in 1..=3 {
            let lo: Vec<f64> = mean
                .iter()
                .zip(&self.cumulative.std)
                .map(|(m, s)| m - k as f64 * s)
                .collect();
            let hi: Vec<f64> = mean
                .iter()
                .zip(&self.cumulative.std)
                .map(|(m, s)| m + k as f64 * s)
                .collect();
            lower[k - 1] = lo;
            upper[k - 1] = hi;
        }
        CumulativeBands { mean, lower, upper }
    }

    /// Rebuild an ensemble from an explicit path matrix (path-major
    /// `n_paths x n_steps`, transformed units), summarizing exactly as the
    /// streaming sampler does.
    pub fn from_paths(
        t0: f64,
        dt: f64,
        n_paths: usize,
        n_steps: usize,
        paths: Vec<f64>,
        stats: &PreprocessStats,
        quantile_levels: &[f64],
    ) -> Result<Self> {
        if paths.len() != n_paths * n_steps || n_paths == 0 || n_steps == 0 {
            return Err(Error::LengthMismatch {
                left: paths.len(),
                right: n_paths * n_steps,
            });
        }
        let mut acc = SummaryAccumulator::new(n_paths, n_steps, quantile_levels.to_vec());
        let mut xs = vec![0.0; n_paths];
        let mut cums = vec![0.0; n_paths];
        for step in 0..n_steps {
            for p in 0..n_paths {
                xs[p] = paths[p * n_steps + step];
            }
            if step == 0 {
                // treat a genuinely constant first column as the deterministic start
                if xs.iter().all(|&x| x == xs[0]) {
                    acc.record_initial(xs[0], stats);
                    continue;
                }
            } else {
                for (c, &x) in cums.iter_mut().zip(&xs) {
                    *c += stats.inverse_target(x);
                }
            }
            acc.record_step(&xs, &cums, stats);
        }
        Ok(Self {
            n_paths,
            n_steps,
            t0,
            dt,
            quantile_levels: quantile_levels.to_vec(),
            summary: acc.transformed,
            raw_summary: acc.raw,
            cumulative: CumulativeSummary {
                mean: acc.cum_mean,
                std: acc.cum_std,
            },
            paths: Some(paths),
        })
    }
}

struct SummaryAccumulator {
    n_paths: usize,
    levels: Vec<f64>,
    transformed: StepSummary,
    raw: StepSummary,
    cum_mean: Vec<f64>,
    cum_std: Vec<f64>,
    sort_buf: Vec<f64>,
}

impl SummaryAccumulator {
    fn new(n_paths: usize, n_steps: usize, levels: Vec<f64>) -> Self {
        Self {
            n_paths,
            transformed: StepSummary::with_capacity(levels.len(), n_steps),
            raw: StepSummary::with_capacity(levels.len(), n_steps),
            cum_mean: Vec::with_capacity(n_steps),
            cum_std: Vec::with_capacity(n_steps),
            sort_buf: vec![0.0; n_paths],
            levels,
        }
    }

    /// Record the deterministic initial step without floating-point noise.
    fn record_initial(&mut self, x0: f64, stats: &PreprocessStats) {
        let raw = stats.inverse_target(x0);
        self.transformed.mean.push(x0);
        self.transformed.std.push(0.0);
        self.transformed.median.push(x0);
        self.raw.mean.push(raw);
        self.raw.std.push(0.0);
        self.raw.median.push(raw);
        for k in 0..self.levels.len() {
            self.transformed.quantiles[k].push(x0);
            self.raw.quantiles[k].push(raw);
        }
        self.cum_mean.push(0.0);
        self.cum_std.push(0.0);
    }

    fn record_step(&mut self, xs: &[f64], cums: &[f64], stats: &PreprocessStats) {
        debug_assert_eq!(xs.len(), self.n_paths);
        let n = self.n_paths as f64;
        let mean = xs.iter().sum::<f64>() / n;
        self.transformed.mean.push(mean);
        self.transformed.std.push(population_std(xs));

        let raw_mean = xs.iter().map(|&x| stats.inverse_target(x)).sum::<f64>() / n;
        self.raw.mean.push(raw_mean);
        let raw_var = xs
            .iter()
            .map(|&x| {
                let r = stats.inverse_target(x) - raw_mean;
                r * r
            })
            .sum::<f64>()
            / n;
        self.raw.std.push(raw_var.sqrt());

        self.sort_buf.copy_from_slice(xs);
        self.sort_buf.sort_unstable_by(f64::total_cmp);
        self.transformed
            .median
            .push(quantile_mapped(&self.sort_buf, 0.5, |x| x));
        self.raw
            .median
            .push(quantile_mapped(&self.sort_buf, 0.5, |x| {
                stats.inverse_target(x)
            }));
        for (k, &level) in self.levels.iter().enumerate() {
            self.transformed.quantiles[k].push(quantile_mapped(&self.sort_buf, level, |x| x));
            self.raw.quantiles[k].push(quantile_mapped(&self.sort_buf, level, |x| {
                stats.inverse_target(x)
            }));
        }

        self.cum_mean.push(cums.iter().sum::<f64>() / n);
        self.cum_std.push(population_std(cums));
    }
}

/// Type-7 quantile of an ascending-sorted sample, interpolating between order
/// statistics *after* mapping them through the monotone `map`. With `map` the
/// identity this is the plain type-7 quantile; with the inverse target
/// transform it summarizes raw-unit values without re-sorting.
fn quantile_mapped(sorted: &[f64], level: f64, map: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return map(sorted[0]);
    }
    let h = level * (n - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return map(sorted[n - 1]);
    }
    let frac = h - lo as f64;
    if frac == 0.0 {
        return map(sorted[lo]);
    }
    let a = map(sorted[lo]);
    let b = map(sorted[lo + 1]);
    a + frac * (b - a)
}

/// Deterministic initial value: the mean level at the first input row.
pub fn initial_condition(model: &Model, inputs: &InputSeries) -> Result<f64> {
    let mut row = vec![0.0; inputs.dim()];
    model.stats.standardize_row(inputs.row(0), &mut row)?;
    ou::mean_level(&model.params, &row)
}

/// Generate the predictive ensemble for an input series.
pub fn sample_paths(
    model: &Model,
    inputs: &InputSeries,
    config: &SampleConfig,
) -> Result<PathEnsemble> {
    config.validate()?;
    if inputs.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: inputs.dim(),
        });
    }
    let u_std = inputs.standardized(&model.stats)?;
    let d = inputs.dim();
    let n_steps = inputs.len();
    let m = config.n_paths;
    let params = &model.params;
    let lambda = params.reversion_rate();
    let dt = inputs.dt();

    let x0 = ou::mean_level(params, &u_std[..d])?;
    let mut xs = vec![x0; m];
    let mut cums = vec![0.0; m];
    let mut rngs: Vec<ChaCha8Rng> = (0..m)
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(p as u64);
            rng
        })
        .collect();

    let mut paths = if config.retain_paths {
        Some(vec![0.0; m * n_steps])
    } else {
        None
    };
    if let Some(buf) = paths.as_mut() {
        for p in 0..m {
            buf[p * n_steps] = x0;
        }
    }

    let mut acc = SummaryAccumulator::new(m, n_steps, config.quantile_levels.clone());
    acc.record_initial(x0, &model.stats);

    let decay = (-lambda * dt).exp();
    let scale = model.stats.target_scale;
    for i in 0..n_steps - 1 {
        let row = &u_std[i * d..(i + 1) * d];
        let mu = ou::mean_level_unchecked(params, row);
        let sigma = ou::volatility_unchecked(params, row);
        // with x_prev = 0 the transition mean is exactly the mu offset
        let step = ou::transition_scalar(lambda, mu, sigma, 0.0, dt);
        let offset = step.mean;
        let noise_scale = step.var.sqrt();

        let advance =
            |(xs_chunk, (rng_chunk, cum_chunk)): (&mut [f64], (&mut [ChaCha8Rng], &mut [f64]))| {
                for ((x, rng), cum) in xs_chunk.iter_mut().zip(rng_chunk).zip(cum_chunk) {
                    let z: f64 = StandardNormal.sample(rng);
                    *x = *x * decay + offset + noise_scale * z;
                    *cum += crate::transform::transform_inverse(*x) * scale;
                }
            };

        if config.parallel {
            xs.par_chunks_mut(PATH_CHUNK)
                .zip(
                    rngs.par_chunks_mut(PATH_CHUNK)
                        .zip(cums.par_chunks_mut(PATH_CHUNK)),
                )
                .for_each(advance);
        } else {
            xs.chunks_mut(PATH_CHUNK)
                .zip(rngs.chunks_mut(PATH_CHUNK).zip(cums.chunks_mut(PATH_CHUNK)))
                .for_each(advance);
        }

        if let Some(buf) = paths.as_mut() {
            for (p, &x) in xs.iter().enumerate() {
                buf[p * n_steps + i + 1] = x;
            }
        }
        acc.record_step(&xs, &cums, &model.stats);
    }

    Ok(PathEnsemble {
        n_paths: m,
        n_steps,
        t0: inputs.t0(),
        dt,
        quantile_levels: config.quantile_levels.clone(),
        summary: acc.transformed,
        raw_summary: acc.raw,
        cumulative: CumulativeSummary {
            mean: acc.cum_mean,
            std: acc.cum_std,
        },
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::softplus_inv;
    use crate::model::ModelParams;
    use crate::transform::{fit_preprocess, PreprocessStats};
    use approx::assert_relative_eq;

    fn test_stats() -> PreprocessStats {
        // target_scale = 1, inert standardization
        PreprocessStats {
            target_scale: 1.0,
            zero_floor: 1e-9,
            input_means: vec![0.0],
            input_stds: vec![1.0],
            constant_channels: vec![],
        }
    }

    fn constant_input(n: usize, value: f64, dt: f64) -> InputSeries {
        InputSeries::new(0.0, dt, vec!["u".into()], vec![value; n]).unwrap()
    }

    fn model_with(params: ModelParams) -> Model {
        Model::new(vec!["u".into()], params, test_stats()).unwrap()
    }

    fn noiseless_params(a: f64, b: f64, lambda: f64) -> ModelParams {
        ModelParams {
            mean_weights: vec![a],
            mean_intercept: b,
            vol_weights: vec![0.0],
            vol_intercept: -800.0,
            reversion_raw: softplus_inv(lambda),
        }
    }

    #[test]
    fn initial_condition_is_the_mean_level() {
        let model = model_with(noiseless_params(0.0, 0.3, 1.0));
        let inputs = constant_input(5, 2.0, 0.1);
        assert_eq!(initial_condition(&model, &inputs).unwrap(), 0.3);

        let model = model_with(noiseless_params(1.5, -0.2, 1.0));
        let x0 = initial_condition(&model, &inputs).unwrap();
        assert_eq!(x0, 1.5 * 2.0 - 0.2);
    }

    #[test]
    fn noiseless_paths_follow_the_mean_recursion() {
        let model = model_with(noiseless_params(0.5, 1.0, 3.0));
        let inputs = InputSeries::new(
            0.0,
            0.1,
            vec!["u".into()],
            vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0],
        )
        .unwrap();
        let config = SampleConfig {
            n_paths: 7,
            retain_paths: true,
            ..SampleConfig::default()
        };
        let ens = sample_paths(&model, &inputs, &config).unwrap();

        let mut expected = vec![initial_condition(&model, &inputs).unwrap()];
        for i in 0..inputs.len() - 1 {
            let t = crate::ou::transition(&model.params, expected[i], &[inputs.row(i)[0]], 0.1)
                .unwrap();
            expected.push(t.mean);
        }
        let paths = ens.paths.as_ref().unwrap();
        for p in 0..7 {
            for (i, &e) in expected.iter().enumerate() {
                assert_eq!(paths[p * ens.n_steps + i], e, "path {p} step {i}");
            }
        }
        for (i, &e) in expected.iter().enumerate() {
            assert!((ens.summary.mean[i] - e).abs() < 1e-12);
            assert!(ens.summary.std[i] < 1e-12);
        }
    }

    #[test]
    fn stationary_spread_matches_the_closed_form() {
        // lambda dt = 10: each step is essentially a fresh stationary draw
        let sigma = 0.8;
        let lambda = 5.0;
        let params = ModelParams {
            mean_weights: vec![0.0],
            mean_intercept: 1.0,
            vol_weights: vec![0.0],
            vol_intercept: softplus_inv(sigma),
            reversion_raw: softplus_inv(lambda),
        };
        let model = model_with(params);
        let inputs = constant_input(40, 0.0, 2.0);
        let m = 4000;
        let config = SampleConfig {
            n_paths: m,
            seed: 13,
            ..SampleConfig::default()
        };
        let ens = sample_paths(&model, &inputs, &config).unwrap();
        let target_sd = (sigma * sigma / (2.0 * lambda)).sqrt();
        let se = target_sd / (2.0 * m as f64).sqrt();
        for i in 5..ens.n_steps {
            assert!(
                (ens.summary.std[i] - target_sd).abs() < 3.0 * se * 3.0_f64.sqrt().max(1.0),
                "step {i}: std {} vs {target_sd}",
                ens.summary.std[i]
            );
        }
    }

    #[test]
    fn ensemble_mean_tracks_the_analytic_recursion() {
        let params = ModelParams {
            mean_weights: vec![0.7],
            mean_intercept: 0.5,
            vol_weights: vec![0.1],
            vol_intercept: softplus_inv(0.4),
            reversion_raw: softplus_inv(2.0),
        };
        let model = model_with(params);
        let inputs = InputSeries::new(
            0.0,
            0.05,
            vec!["u".into()],
            (0..200).map(|i| ((i / 40) % 3) as f64).collect(),
        )
        .unwrap();
        let m = 2000;
        let ens = sample_paths(
            &model,
            &inputs,
            &SampleConfig {
                n_paths: m,
                seed: 4,
                ..SampleConfig::default()
            },
        )
        .unwrap();

        let mut mean = initial_condition(&model, &inputs).unwrap();
        for i in 0..ens.n_steps {
            if i > 0 {
                let t = crate::ou::transition(&model.params, mean, &[inputs.row(i - 1)[0]], 0.05)
                    .unwrap();
                mean = t.mean;
            }
            let tol = 4.0 * ens.summary.std[i] / (m as f64).sqrt() + 1e-12;
            assert!(
                (ens.summary.mean[i] - mean).abs() <= tol,
                "step {i}: {} vs {mean}",
                ens.summary.mean[i]
            );
        }
    }

    #[test]
    fn parallel_and_serial_are_bit_identical() {
        let params = ModelParams {
            mean_weights: vec![0.3],
            mean_intercept: 0.2,
            vol_weights: vec![0.2],
            vol_intercept: -0.5,
            reversion_raw: softplus_inv(1.0),
        };
        let model = model_with(params);
        let inputs = constant_input(50, 1.0, 0.1);
        let base = SampleConfig {
            n_paths: 3001, // not a multiple of the chunk size
            seed: 99,
            retain_paths: true,
            parallel: true,
            ..SampleConfig::default()
        };
        let serial = SampleConfig {
            parallel: false,
            ..base.clone()
        };
        let a = sample_paths(&model, &inputs, &base).unwrap();
        let b = sample_paths(&model, &inputs, &serial).unwrap();
        assert_eq!(a, b);

        let c = sample_paths(&model, &inputs, &base).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn raw_median_commutes_with_the_inverse_transform() {
        let stats = fit_preprocess(&[0.2, 0.5, 2.0, 4.0], &[0.0, 1.0, 2.0, 3.0], 1).unwrap();
        let params = ModelParams {
            mean_weights: vec![0.0],
            mean_intercept: -0.5, // log branch territory
            vol_weights: vec![0.0],
            vol_intercept: softplus_inv(0.6),
            reversion_raw: softplus_inv(1.5),
        };
        let model = Model::new(vec!["u".into()], params, stats).unwrap();
        let inputs = constant_input(30, 1.5, 0.2);
        // odd path count: the median is an exact order statistic
        let ens = sample_paths(
            &model,
            &inputs,
            &SampleConfig {
                n_paths: 501,
                seed: 8,
                ..SampleConfig::default()
            },
        )
        .unwrap();
        for i in 0..ens.n_steps {
            let expected = model.stats.inverse_target(ens.summary.median[i]);
            assert_eq!(ens.raw_summary.median[i], expected, "step {i}");
        }
    }

    #[test]
    fn median_sits_inside_the_outer_quantiles() {
        let params = ModelParams {
            mean_weights: vec![0.4],
            mean_intercept: 0.0,
            vol_weights: vec![0.0],
            vol_intercept: softplus_inv(0.5),
            reversion_raw: softplus_inv(2.0),
        };
        let model = model_with(params);
        let inputs = constant_input(25, 0.5, 0.1);
        let ens = sample_paths(
            &model,
            &inputs,
            &SampleConfig {
                n_paths: 400,
                seed: 3,
                ..SampleConfig::default()
            },
        )
        .unwrap();
        let lo = ens.level_index(0.025).unwrap();
        let hi = ens.level_index(0.975).unwrap();
        for i in 0..ens.n_steps {
            assert!(ens.summary.quantiles[lo][i] <= ens.summary.median[i]);
            assert!(ens.summary.median[i] <= ens.summary.quantiles[hi][i]);
            assert!(ens.raw_summary.quantiles[lo][i] <= ens.raw_summary.median[i]);
            assert!(ens.raw_summary.median[i] <= ens.raw_summary.quantiles[hi][i]);
        }
    }

    #[test]
    fn constant_path_cumulative_is_linear_with_zero_width() {
        // noiseless model pinned at its fixed point: every step equals b
        let model = model_with(noiseless_params(0.0, 0.75, 2.0));
        let inputs = constant_input(12, 0.0, 0.1);
        let ens = sample_paths(
            &model,
            &inputs,
            &SampleConfig {
                n_paths: 1,
                ..SampleConfig::default()
            },
        )
        .unwrap();
        let per_step_raw = model.stats.inverse_target(0.75);
        for k in 0..ens.n_steps {
            assert_relative_eq!(
                ens.cumulative.mean[k],
                k as f64 * per_step_raw,
                max_relative = 1e-12
            );
            assert_eq!(ens.cumulative.std[k], 0.0);
        }
    }

    #[test]
    fn cumulative_mean_equals_cumsum_of_raw_means() {
        let params = ModelParams {
            mean_weights: vec![0.2],
            mean_intercept: 0.3,
            vol_weights: vec![0.1],
            vol_intercept: softplus_inv(0.5),
            reversion_raw: softplus_inv(1.0),
        };
        let model = model_with(params);
        let inputs = constant_input(20, 0.8, 0.1);
        let ens = sample_paths(
            &model,
            &inputs,
            &SampleConfig {
                n_paths: 300,
                seed: 17,
                ..SampleConfig::default()
            },
        )
        .unwrap();
        let mut running = 0.0;
        for k in 0..ens.n_steps {
            if k > 0 {
                running += ens.raw_summary.mean[k];
            }
            assert_relative_eq!(ens.cumulative.mean[k], running, max_relative = 1e-12);
        }
    }

    #[test]
    fn cumulative_bands_are_nested() {
        let params = ModelParams {
            mean_weights: vec![0.0],
            mean_intercept: 0.5,
            vol_weights: vec![0.0],
            vol_intercept: softplus_inv(0.7),
            reversion_raw: softplus_inv(1.0),
        };
        let model = model_with(params);
        let inputs = constant_input(15, 0.0, 0.1);
        let ens = sample_paths(
            &model,
            &inputs,
            &SampleConfig {
                n_paths: 200,
                seed: 5,
                ..SampleConfig::default()
            },
        )
        .unwrap();
        let bands = ens.cumulative_bands();
        for k in 0..ens.n_steps {
            assert!(bands.lower[2][k] <= bands.lower[1][k]);
            assert!(bands.lower[1][k] <= bands.lower[0][k]);
            assert!(bands.lower[0][k] <= bands.mean[k]);
            assert!(bands.mean[k] <= bands.upper[0][k]);
            assert!(bands.upper[0][k] <= bands.upper[1][k]);
            assert!(bands.upper[1][k] <= bands.upper[2][k]);
        }
    }

    #[test]
    fn from_paths_round_trips_a_sampled_ensemble() {
        let params = ModelParams {
            mean_weights: vec![0.1],
            mean_intercept: 0.4,
            vol_weights: vec![0.0],
            vol_intercept: softplus_inv(0.3),
            reversion_raw: softplus_inv(1.2),
        };
        let model = model_with(params);
        let inputs = constant_input(10, 0.2, 0.1);
        let ens = sample_paths(
            &model,
            &inputs,
            &SampleConfig {
                n_paths: 64,
                seed: 2,
                retain_paths: true,
                ..SampleConfig::default()
            },
        )
        .unwrap();
        let rebuilt = PathEnsemble::from_paths(
            ens.t0,
            ens.dt,
            ens.n_paths,
            ens.n_steps,
            ens.paths.clone().unwrap(),
            &model.stats,
            &ens.quantile_levels,
        )
        .unwrap();
        assert_eq!(rebuilt, ens);
    }

    #[test]
    fn config_validation() {
        let model = model_with(noiseless_params(0.0, 0.0, 1.0));
        let inputs = constant_input(5, 0.0, 0.1);
        let bad_m = SampleConfig {
            n_paths: 0,
            ..SampleConfig::default()
        };
        assert!(sample_paths(&model, &inputs, &bad_m).is_err());
        let bad_q = SampleConfig {
            quantile_levels: vec![0.9, 0.1],
            ..SampleConfig::default()
        };
        assert!(sample_paths(&model, &inputs, &bad_q).is_err());
    }
}
