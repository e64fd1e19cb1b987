//! Exogenously driven Ornstein-Uhlenbeck process in closed form.
//!
//! The state follows the mean-reverting SDE
//!
//! ```text
//! dX = lambda * (mu(u) - X) dt + sigma(u) dW
//! ```
//!
//! with a linear mean level `mu(u) = a . u + b` and a softplus volatility
//! `sigma(u) = softplus(c . u + d)`, both functions of the standardized
//! input vector `u`. Under a zero-order hold (coefficients constant over one
//! sampling interval) the transition over a step of length `dt` is exactly
//! Gaussian with
//!
//! ```text
//! m = x * exp(-lambda dt) + mu * (1 - exp(-lambda dt))
//! V = sigma^2 / (2 lambda) * (1 - exp(-2 lambda dt))
//! ```
//!
//! `V` here is the transition *variance*. Everything is written in
//! `expm1`/`log1p` form so small `lambda * dt` does not cancel
//! catastrophically.
//!
//! A fine-step Euler-Maruyama Monte-Carlo oracle is provided purely for
//! verification of the closed forms; the training and sampling paths never
//! use it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math::softplus;
use crate::model::ModelParams;

/// Variance floor applied inside likelihood evaluations. Softplus volatility
/// can underflow to zero for extreme standardized inputs; the floor keeps the
/// log-density finite.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Conditional mean and variance of one Gaussian transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionStats {
    /// Conditional mean, transformed units.
    pub mean: f64,
    /// Conditional variance, transformed units squared.
    pub var: f64,
}

fn check_dim(params: &ModelParams, u_std: &[f64]) -> Result<()> {
    if u_std.len() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: u_std.len(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean level `mu = a . u + b` for one standardized input row.
pub fn mean_level(params: &ModelParams, u_std: &[f64]) -> Result<f64> {
    check_dim(params, u_std)?;
    Ok(mean_level_unchecked(params, u_std))
}

#[inline]
pub(crate) fn mean_level_unchecked(params: &ModelParams, u_std: &[f64]) -> f64 {
    dot(&params.mean_weights, u_std) + params.mean_intercept
}

/// Volatility `sigma = softplus(c . u + d)`, strictly positive and stable for
/// pre-activations far beyond +-500.
pub fn volatility(params: &ModelParams, u_std: &[f64]) -> Result<f64> {
    check_dim(params, u_std)?;
    Ok(volatility_unchecked(params, u_std))
}

#[inline]
pub(crate) fn volatility_unchecked(params: &ModelParams, u_std: &[f64]) -> f64 {
    softplus(dot(&params.vol_weights, u_std) + params.vol_intercept)
}

/// Closed-form Gaussian transition over one step of length `dt`, holding the
/// coefficients at their value for the step's starting input row.
pub fn transition(
    params: &ModelParams,
    x_prev: f64,
    u_std: &[f64],
    dt: f64,
) -> Result<TransitionStats> {
    check_dim(params, u_std)?;
    if !(dt > 0.0) {
        return Err(Error::NonPositive {
            what: "dt",
            value: dt,
        });
    }
    let mu = mean_level_unchecked(params, u_std);
    let sigma = volatility_unchecked(params, u_std);
    Ok(transition_scalar(
        params.reversion_rate(),
        mu,
        sigma,
        x_prev,
        dt,
    ))
}

/// Transition moments from already-evaluated coefficients.
#[inline]
pub(crate) fn transition_scalar(
    lambda: f64,
    mu: f64,
    sigma: f64,
    x_prev: f64,
    dt: f64,
) -> TransitionStats {
    let x = lambda * dt;
    let decay = (-x).exp();
    let one_minus_decay = -(-x).exp_m1();
    let one_minus_decay2 = -(-2.0 * x).exp_m1();
    TransitionStats {
        mean: x_prev * decay + mu * one_minus_decay,
        var: sigma * sigma / (2.0 * lambda) * one_minus_decay2,
    }
}

/// Gaussian log-density of `x_next` under the one-step transition law.
///
/// The variance is floored at [`VARIANCE_FLOOR`] so degenerate volatility
/// cannot blow up the likelihood.
pub fn transition_logpdf(
    params: &ModelParams,
    x_prev: f64,
    x_next: f64,
    u_std: &[f64],
    dt: f64,
) -> Result<f64> {
    let stats = transition(params, x_prev, u_std, dt)?;
    let v = stats.var.max(VARIANCE_FLOOR);
    let r = x_next - stats.mean;
    Ok(-0.5 * ((2.0 * std::f64::consts::PI * v).ln() + r * r / v))
}

/// Empirical mean and variance of the simulated state at each coarse step.
#[derive(Debug, Clone)]
pub struct OracleSummary {
    /// Per coarse step `1..=n_steps`: Monte-Carlo mean.
    pub mean: Vec<f64>,
    /// Per coarse step `1..=n_steps`: Monte-Carlo (population) variance.
    pub var: Vec<f64>,
    pub n_reps: usize,
}

/// Fine-step Euler-Maruyama Monte-Carlo oracle.
///
/// Simulates `n_reps` independent replicates of the SDE from `x0` across the
/// coarse grid defined by `u_std_rows` (one row per coarse step, zero-order
/// hold) and records the empirical moments at the end of every coarse step.
/// `fine_dt` must divide the coarse `dt`. Deterministic for a given seed;
/// used only to verify the closed forms above.
pub fn euler_maruyama_oracle(
    params: &ModelParams,
    x0: f64,
    u_std_rows: &[Vec<f64>],
    dt: f64,
    fine_dt: f64,
    n_reps: usize,
    seed: u64,
) -> Result<OracleSummary> {
    if u_std_rows.is_empty() {
        return Err(Error::TooFewSamples {
            what: "oracle input rows",
            needed: 1,
            got: 0,
        });
    }
    for row in u_std_rows {
        check_dim(params, row)?;
    }
    if !(dt > 0.0) || !(fine_dt > 0.0) {
        return Err(Error::NonPositive {
            what: "dt",
            value: dt.min(fine_dt),
        });
    }
    let substeps_f = dt / fine_dt;
    let substeps = substeps_f.round() as usize;
    if substeps == 0 || (substeps_f - substeps as f64).abs() > 1e-6 * substeps_f {
        return Err(Error::InvalidConfig(format!(
            "fine_dt {fine_dt} must divide dt {dt}"
        )));
    }
    if n_reps < 1000 {
        return Err(Error::TooFewSamples {
            what: "oracle replicates",
            needed: 1000,
            got: n_reps,
        });
    }

    let lambda = params.reversion_rate();
    let n_steps = u_std_rows.len();
    let coeffs: Vec<(f64, f64)> = u_std_rows
        .iter()
        .map(|row| {
            (
                mean_level_unchecked(params, row),
                volatility_unchecked(params, row),
            )
        })
        .collect();

    let mut sum = vec![0.0; n_steps];
    let mut sum_sq = vec![0.0; n_steps];
    let sqrt_fine = fine_dt.sqrt();
    for rep in 0..n_reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64);
        let mut x = x0;
        for (step, &(mu, sigma)) in coeffs.iter().enumerate() {
            for _ in 0..substeps {
                let z: f64 = StandardNormal.sample(&mut rng);
                x += lambda * (mu - x) * fine_dt + sigma * sqrt_fine * z;
            }
            sum[step] += x;
            sum_sq[step] += x * x;
        }
    }

    let n = n_reps as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let var: Vec<f64> = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| (sq / n - m * m).max(0.0))
        .collect();
    Ok(OracleSummary { mean, var, n_reps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn scalar_params(a: f64, b: f64, c: f64, d_off: f64, lambda: f64) -> ModelParams {
        ModelParams {
            mean_weights: vec![a],
            mean_intercept: b,
            vol_weights: vec![c],
            vol_intercept: d_off,
            reversion_raw: crate::math::softplus_inv(lambda),
        }
    }

    #[test]
    fn mean_level_cases() {
        let p = scalar_params(0.0, 1.5, 0.0, 0.0, 1.0);
        assert_eq!(mean_level(&p, &[123.0]).unwrap(), 1.5);
        let p = scalar_params(2.0, 1.0, 0.0, 0.0, 1.0);
        assert_eq!(mean_level(&p, &[3.0]).unwrap(), 7.0);
        assert!(mean_level(&p, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn volatility_cases() {
        let p = scalar_params(0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(
            volatility(&p, &[0.0]).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        let p = scalar_params(0.0, 0.0, 0.0, 1000.0, 1.0);
        assert_relative_eq!(volatility(&p, &[0.0]).unwrap(), 1000.0, epsilon = 1e-12);
        let p = scalar_params(0.0, 0.0, 0.0, -3.0, 1.0);
        // softplus(-3) evaluated independently
        assert_relative_eq!(
            volatility(&p, &[0.0]).unwrap(),
            0.04858735157374196,
            epsilon = 1e-14
        );
    }

    #[test]
    fn transition_fixed_point_at_mean() {
        let p = scalar_params(0.0, 2.0, 0.0, 0.0, 3.0);
        for dt in [1e-4, 0.1, 5.0] {
            let t = transition(&p, 2.0, &[0.0], dt).unwrap();
            assert_relative_eq!(t.mean, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn transition_stationary_variance_limit() {
        // sigma = 1, lambda = 1, dt -> inf: V -> sigma^2 / (2 lambda) = 0.5
        let p = scalar_params(0.0, 0.0, 0.0, crate::math::softplus_inv(1.0), 1.0);
        let t = transition(&p, 0.3, &[0.0], 1e6).unwrap();
        assert_relative_eq!(t.var, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn transition_closed_form_values() {
        // x_prev = 0, mu = 2, lambda = 1, sigma = 1, dt = 0.5
        let p = scalar_params(0.0, 2.0, 0.0, crate::math::softplus_inv(1.0), 1.0);
        let t = transition(&p, 0.0, &[0.0], 0.5).unwrap();
        assert_relative_eq!(t.mean, 0.7869386805747332, epsilon = 1e-12);
        assert_relative_eq!(t.var, 0.31606027941427883, epsilon = 1e-12);
    }

    #[test]
    fn logpdf_reference_values() {
        let p = scalar_params(0.0, 0.0, 0.0, crate::math::softplus_inv(1.0), 0.5);
        // large dt so V = sigma^2/(2 lambda) = 1 exactly; mean = mu = 0
        let lp = transition_logpdf(&p, 0.0, 2.0, &[0.0], 1e9).unwrap();
        assert_relative_eq!(lp, -2.9189385332046727, epsilon = 1e-12);

        // x_next = mean, V = 1/(2 pi): peak log-density is zero
        let sigma = (1.0 / std::f64::consts::TAU).sqrt();
        let p = scalar_params(0.0, 1.0, 0.0, crate::math::softplus_inv(sigma), 0.5);
        let lp = transition_logpdf(&p, 1.0, 1.0, &[0.0], 1e9).unwrap();
        assert_relative_eq!(lp, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn small_rate_limit_is_brownian() {
        // softplus(-40) ~ 4e-18: variance must approach sigma^2 * t without
        // cancellation
        let p = ModelParams {
            mean_weights: vec![0.0],
            mean_intercept: 0.0,
            vol_weights: vec![0.0],
            vol_intercept: crate::math::softplus_inv(0.7),
            reversion_raw: -40.0,
        };
        let dt = 2.5;
        let t = transition(&p, 0.4, &[0.0], dt).unwrap();
        assert_relative_eq!(t.var, 0.7 * 0.7 * dt, max_relative = 1e-9);
        assert_relative_eq!(t.mean, 0.4, max_relative = 1e-9);
    }

    #[test]
    fn short_step_limits() {
        let p = scalar_params(1.0, 0.5, 0.2, -0.3, 4.0);
        let u = [0.7];
        let x_prev = 3.0;
        let mut prev_m_gap = f64::INFINITY;
        let mut prev_v = f64::INFINITY;
        for k in 1..=6 {
            let dt = 10f64.powi(-k);
            let t = transition(&p, x_prev, &u, dt).unwrap();
            let m_gap = (t.mean - x_prev).abs();
            assert!(m_gap < prev_m_gap);
            assert!(t.var < prev_v);
            // O(dt) rates
            assert!(m_gap < 10.0 * dt * (mean_level(&p, &u).unwrap() - x_prev).abs() + 1e-12);
            let sigma = volatility(&p, &u).unwrap();
            assert!(t.var < 1.1 * sigma * sigma * dt);
            prev_m_gap = m_gap;
            prev_v = t.var;
        }
    }

    #[test]
    fn oracle_noiseless_matches_ode() {
        let p = ModelParams {
            mean_weights: vec![0.0],
            mean_intercept: 2.0,
            vol_weights: vec![0.0],
            vol_intercept: -800.0, // softplus underflows to exactly 0
            reversion_raw: crate::math::softplus_inv(1.5),
        };
        let rows = vec![vec![0.0]; 4];
        let dt = 0.2;
        let summary = euler_maruyama_oracle(&p, 0.0, &rows, dt, dt / 1000.0, 1000, 7).unwrap();
        let mut x = 0.0;
        for step in 0..4 {
            let t = transition(&p, x, &[0.0], dt).unwrap();
            x = t.mean;
            assert_relative_eq!(summary.mean[step], x, max_relative = 1e-3);
            assert!(summary.var[step].abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_agrees_with_closed_form_single_step() {
        let p = scalar_params(0.5, 1.0, 0.1, -0.5, 3.0);
        let dt = 0.05;
        let n_reps = 4000;
        let summary =
            euler_maruyama_oracle(&p, 0.2, &[vec![0.4]], dt, dt / 500.0, n_reps, 11).unwrap();
        let t = transition(&p, 0.2, &[0.4], dt).unwrap();
        let se = (summary.var[0] / n_reps as f64).sqrt();
        assert!((summary.mean[0] - t.mean).abs() < 3.0 * se);
        assert_relative_eq!(summary.var[0], t.var, max_relative = 0.08);
    }

    #[test]
    fn oracle_validates_inputs() {
        let p = scalar_params(0.0, 0.0, 0.0, 0.0, 1.0);
        assert!(euler_maruyama_oracle(&p, 0.0, &[vec![0.0]], 0.1, 0.03, 1000, 0).is_err());
        assert!(euler_maruyama_oracle(&p, 0.0, &[vec![0.0]], 0.1, 0.001, 10, 0).is_err());
        assert!(euler_maruyama_oracle(&p, 0.0, &[], 0.1, 0.001, 1000, 0).is_err());
    }

    proptest! {
        // mean is a convex combination of x_prev and mu; variance is positive
        #[test]
        fn transition_bounds(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            c in -1.0f64..1.0,
            d_off in -2.0f64..2.0,
            lambda in 0.05f64..20.0,
            u in -3.0f64..3.0,
            x_prev in -5.0f64..5.0,
            dt in 1e-4f64..10.0,
        ) {
            let p = scalar_params(a, b, c, d_off, lambda);
            let t = transition(&p, x_prev, &[u], dt).unwrap();
            let mu = mean_level(&p, &[u]).unwrap();
            let lo = x_prev.min(mu) - 1e-12;
            let hi = x_prev.max(mu) + 1e-12;
            prop_assert!(t.mean >= lo && t.mean <= hi);
            prop_assert!(t.var > 0.0);
        }

        // composing two half steps equals one full step on constant inputs
        #[test]
        fn chapman_kolmogorov(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            c in -1.0f64..1.0,
            d_off in -2.0f64..2.0,
            lambda in 0.05f64..20.0,
            u in -3.0f64..3.0,
            x_prev in -5.0f64..5.0,
            dt in 1e-4f64..5.0,
        ) {
            let p = scalar_params(a, b, c, d_off, lambda);
            let full = transition(&p, x_prev, &[u], dt).unwrap();
            let half1 = transition(&p, x_prev, &[u], dt / 2.0).unwrap();
            let half2 = transition(&p, half1.mean, &[u], dt / 2.0).unwrap();
            let decay_half = (-p.reversion_rate() * dt / 2.0).exp();
            let composed_var = half1.var * decay_half * decay_half + half2.var;
            prop_assert!((half2.mean - full.mean).abs() <= 1e-10);
            prop_assert!((composed_var - full.var).abs() <= 1e-10);
        }
    }

    #[test]
    fn oracle_is_deterministic_per_seed() {
        let p = scalar_params(0.1, 0.4, 0.0, -1.0, 2.0);
        let mut rng = rand::rng();
        let _: f64 = rng.random(); // unrelated draw must not affect the oracle
        let a = euler_maruyama_oracle(&p, 0.0, &[vec![0.2]], 0.1, 0.001, 1000, 5).unwrap();
        let b = euler_maruyama_oracle(&p, 0.0, &[vec![0.2]], 0.1, 0.001, 1000, 5).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.var, b.var);
    }
}
