//! Maximum-likelihood fitting of the transition density.
//!
//! The likelihood factorizes over one-step transitions conditioned on the
//! *measured* previous value (teacher forcing), so the loss is a plain sum
//! over [`TransitionExample`]s,
//!
//! ```text
//! loss = sum_i  log V_i + (y_next_i - m_i)^2 / V_i
//! ```
//!
//! with constants dropped. Because the factors are independent given the
//! data, shuffling transitions into minibatches is exact rather than an
//! approximation. Optimization is minibatched Adam with an exact analytic
//! gradient; after each epoch the full validation loss is evaluated and the
//! best-validation parameters are kept.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::math::{mean, population_std, sigmoid, softplus_inv};
use crate::model::ModelParams;
use crate::ou::VARIANCE_FLOOR;
use crate::series::{InputSeries, ObservationSeries};
use crate::transform::PreprocessStats;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One conditional likelihood factor: the standardized input row at the start
/// of the step and the observed transformed values at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionExample {
    pub u_std: Vec<f64>,
    pub y_prev: f64,
    pub y_next: f64,
    pub dt: f64,
}

/// Training configuration. Adam moments are fixed (beta1 0.9, beta2 0.999,
/// eps 1e-8).
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Fraction of transitions held out as the contiguous validation tail
    /// when the caller splits with [`split_validation_tail`].
    pub validation_fraction: f64,
    /// Keep the best-validation parameters (otherwise the final epoch's).
    pub early_stopping: bool,
    /// Optional explicit starting point; defaults to a data-driven init.
    pub initial_params: Option<ModelParams>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 512,
            learning_rate: 1e-2,
            seed: 0,
            validation_fraction: 0.15,
            early_stopping: true,
            initial_params: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::NonPositive {
                what: "learning_rate",
                value: self.learning_rate,
            });
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// Fit outcome: selected parameters plus per-epoch loss curves (mean loss per
/// transition).
#[derive(Debug, Clone)]
pub struct FitReport {
    pub best_params: ModelParams,
    pub train_loss_curve: Vec<f64>,
    pub val_loss_curve: Vec<f64>,
    pub best_epoch: usize,
    pub wall_time_s: f64,
}

/// Pair aligned series into the `N - 1` one-step transitions, standardizing
/// the input rows with the frozen statistics. Transition `i` holds the input
/// row at step `i` (zero-order hold) and the observed values at steps `i` and
/// `i + 1`.
pub fn build_transitions(
    inputs: &InputSeries,
    obs: &ObservationSeries,
    stats: &PreprocessStats,
) -> Result<Vec<TransitionExample>> {
    obs.check_aligned(inputs)?;
    let u_std = inputs.standardized(stats)?;
    let d = inputs.dim();
    let y = obs.transformed();
    let dt = inputs.dt();
    let mut out = Vec::with_capacity(inputs.len() - 1);
    for i in 0..inputs.len() - 1 {
        let example = TransitionExample {
            u_std: u_std[i * d..(i + 1) * d].to_vec(),
            y_prev: y[i],
            y_next: y[i + 1],
            dt,
        };
        if !example.y_prev.is_finite() || !example.y_next.is_finite() {
            return Err(Error::NonFinite {
                what: "transformed target",
                index: i,
            });
        }
        out.push(example);
    }
    Ok(out)
}

/// Split transitions into `(train, validation)` with the validation set taken
/// as the last contiguous fraction.
pub fn split_validation_tail(
    examples: &[TransitionExample],
    fraction: f64,
) -> Result<(&[TransitionExample], &[TransitionExample])> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "validation fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = examples.len();
    if n < 2 {
        return Err(Error::TooFewSamples {
            what: "transitions",
            needed: 2,
            got: n,
        });
    }
    let n_val = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    Ok(examples.split_at(n - n_val))
}

struct ExampleTerms {
    loss: f64,
    dl_dpre_mu: f64,
    dl_dpre_sig: f64,
    dl_dlambda: f64,
}

#[inline]
fn example_terms(params: &ModelParams, lambda: f64, ex: &TransitionExample) -> ExampleTerms {
    let mut pre_mu = params.mean_intercept;
    let mut pre_sig = params.vol_intercept;
    for (j, &u) in ex.u_std.iter().enumerate() {
        pre_mu += params.mean_weights[j] * u;
        pre_sig += params.vol_weights[j] * u;
    }
    let sigma = crate::math::softplus(pre_sig);

    let x = lambda * ex.dt;
    let decay = (-x).exp();
    let one_minus_decay = -(-x).exp_m1();
    let decay2 = (-2.0 * x).exp();
    let one_minus_decay2 = -(-2.0 * x).exp_m1();

    let m = ex.y_prev * decay + pre_mu * one_minus_decay;
    let v_raw = sigma * sigma / (2.0 * lambda) * one_minus_decay2;
    let floored = v_raw < VARIANCE_FLOOR;
    let v = if floored { VARIANCE_FLOOR } else { v_raw };

    let r = ex.y_next - m;
    let loss = v.ln() + r * r / v;

    let dl_dm = -2.0 * r / v;
    let dl_dv = if floored {
        0.0
    } else {
        1.0 / v - r * r / (v * v)
    };

    // d v / d lambda = sigma^2 dt^2 * h(x) with
    // h(x) = (2x e^{-2x} - (1 - e^{-2x})) / (2 x^2); series forms for tiny x.
    let h = if x < 1e-4 {
        -1.0 + x * (4.0 / 3.0) - x * x
    } else {
        (2.0 * x * decay2 - one_minus_decay2) / (2.0 * x * x)
    };
    let dm_dlambda = ex.dt * decay * (pre_mu - ex.y_prev);
    let dv_dlambda = sigma * sigma * ex.dt * ex.dt * h;
    let dv_dsigma = sigma * one_minus_decay2 / lambda;

    ExampleTerms {
        loss,
        dl_dpre_mu: dl_dm * one_minus_decay,
        dl_dpre_sig: dl_dv * dv_dsigma * sigmoid(pre_sig),
        dl_dlambda: dl_dm * dm_dlambda + dl_dv * dv_dlambda,
    }
}

fn check_batch(params: &ModelParams, batch: &[TransitionExample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::TooFewSamples {
            what: "batch",
            needed: 1,
            got: 0,
        });
    }
    for ex in batch {
        if ex.u_std.len() != params.dim() {
            return Err(Error::DimensionMismatch {
                expected: params.dim(),
                got: ex.u_std.len(),
            });
        }
    }
    Ok(())
}

fn loss_over<'a>(
    params: &ModelParams,
    examples: impl Iterator<Item = &'a TransitionExample>,
) -> Result<f64> {
    let lambda = params.reversion_rate();
    let mut total = 0.0;
    for (i, ex) in examples.enumerate() {
        let terms = example_terms(params, lambda, ex);
        if !terms.loss.is_finite() {
            return Err(Error::NonFiniteLoss { example_index: i });
        }
        total += terms.loss;
    }
    Ok(total)
}

fn loss_grad_over<'a>(
    params: &ModelParams,
    examples: impl Iterator<Item = &'a TransitionExample>,
    grad: &mut [f64],
) -> Result<f64> {
    let d = params.dim();
    let lambda = params.reversion_rate();
    let dlambda_draw = sigmoid(params.reversion_raw);
    grad.fill(0.0);
    let mut total = 0.0;
    for (i, ex) in examples.enumerate() {
        let terms = example_terms(params, lambda, ex);
        if !terms.loss.is_finite() {
            return Err(Error::NonFiniteLoss { example_index: i });
        }
        total += terms.loss;
        for (j, &u) in ex.u_std.iter().enumerate() {
            grad[j] += terms.dl_dpre_mu * u;
            grad[d + 1 + j] += terms.dl_dpre_sig * u;
        }
        grad[d] += terms.dl_dpre_mu;
        grad[2 * d + 1] += terms.dl_dpre_sig;
        grad[2 * d + 2] += terms.dl_dlambda * dlambda_draw;
    }
    Ok(total)
}

/// Sum of `log V + (y_next - m)^2 / V` over the batch.
pub fn nll_loss(params: &ModelParams, batch: &[TransitionExample]) -> Result<f64> {
    check_batch(params, batch)?;
    loss_over(params, batch.iter())
}

/// Exact analytic gradient of [`nll_loss`] in the flat parameter layout of
/// [`ModelParams::to_flat`].
pub fn nll_gradient(params: &ModelParams, batch: &[TransitionExample]) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; params.count()];
    nll_loss_grad(params, batch, &mut grad)?;
    Ok(grad)
}

/// Fused loss and gradient evaluation; `grad` is overwritten.
pub fn nll_loss_grad(
    params: &ModelParams,
    batch: &[TransitionExample],
    grad: &mut [f64],
) -> Result<f64> {
    check_batch(params, batch)?;
    if grad.len() != params.count() {
        return Err(Error::LengthMismatch {
            left: grad.len(),
            right: params.count(),
        });
    }
    loss_grad_over(params, batch.iter(), grad)
}

fn default_init(train: &[TransitionExample], rng: &mut ChaCha8Rng) -> ModelParams {
    let d = train[0].u_std.len();
    let y_next: Vec<f64> = train.iter().map(|ex| ex.y_next).collect();
    let target_mean = mean(&y_next);
    let resid_std = population_std(&y_next).max(1e-6);
    let noise = Normal::new(0.0, 0.01).expect("valid normal");
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| noise.sample(rng)).collect() };
    ModelParams {
        mean_weights: draw(rng),
        mean_intercept: target_mean,
        vol_weights: draw(rng),
        vol_intercept: softplus_inv(resid_std),
        reversion_raw: softplus_inv(1.0),
    }
}

/// Run minibatched Adam over the training transitions, evaluating the full
/// validation loss once per epoch. Deterministic for a given config.
pub fn fit(
    train: &[TransitionExample],
    validation: &[TransitionExample],
    config: &TrainConfig,
) -> Result<FitReport> {
    config.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::TooFewSamples {
            what: "train/validation transitions",
            needed: 1,
            got: 0,
        });
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut params = match &config.initial_params {
        Some(p) => {
            if p.dim() != train[0].u_std.len() {
                return Err(Error::DimensionMismatch {
                    expected: train[0].u_std.len(),
                    got: p.dim(),
                });
            }
            p.clone()
        }
        None => default_init(train, &mut rng),
    };
    check_batch(&params, train)?;
    check_batch(&params, validation)?;

    let n_params = params.count();
    let mut adam_m = vec![0.0; n_params];
    let mut adam_v = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut step = 0usize;

    let mut indices: Vec<usize> = (0..train.len()).collect();
    let mut train_curve = Vec::with_capacity(config.epochs);
    let mut val_curve = Vec::with_capacity(config.epochs);
    let mut best_epoch = 0;
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();

    let mut flat = params.to_flat();
    for epoch in 0..config.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, chunk) in indices.chunks(config.batch_size).enumerate() {
            let examples = chunk.iter().map(|&i| &train[i]);
            let loss = match loss_grad_over(&params, examples, &mut grad) {
                Ok(loss) => loss,
                Err(Error::NonFiniteLoss { .. }) => {
                    return Err(Error::Diverged {
                        epoch,
                        batch: batch_idx,
                        snapshot: format!("{:?}", params),
                    });
                }
                Err(e) => return Err(e),
            };
            epoch_loss += loss;

            step += 1;
            let bias1 = 1.0 - ADAM_BETA1.powi(step as i32);
            let bias2 = 1.0 - ADAM_BETA2.powi(step as i32);
            for k in 0..n_params {
                adam_m[k] = ADAM_BETA1 * adam_m[k] + (1.0 - ADAM_BETA1) * grad[k];
                adam_v[k] = ADAM_BETA2 * adam_v[k] + (1.0 - ADAM_BETA2) * grad[k] * grad[k];
                let m_hat = adam_m[k] / bias1;
                let v_hat = adam_v[k] / bias2;
                flat[k] -= config.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
            params.set_from_flat(&flat)?;
        }
        train_curve.push(epoch_loss / train.len() as f64);

        let val_loss = match nll_loss(&params, validation) {
            Ok(loss) => loss / validation.len() as f64,
            Err(Error::NonFiniteLoss { .. }) => {
                return Err(Error::Diverged {
                    epoch,
                    batch: usize::MAX,
                    snapshot: format!("{:?}", params),
                });
            }
            Err(e) => return Err(e),
        };
        val_curve.push(val_loss);
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = params.clone();
        }
    }

    if !config.early_stopping {
        best_epoch = config.epochs - 1;
        best_params = params;
    }

    Ok(FitReport {
        best_params,
        train_loss_curve: train_curve,
        val_loss_curve: val_curve,
        best_epoch,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
