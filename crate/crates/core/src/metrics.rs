//! Calibration and accuracy metrics.
//!
//! The probability integral transform standardizes each observation against
//! the ensemble's empirical moments and passes it through the standard normal
//! CDF; if the observations really are draws from the predictive
//! distribution, the PIT values are uniform on [0, 1]. Uniformity is
//! quantified with the Kolmogorov-Smirnov statistic and visualized through
//! Q-Q points against uniform plotting positions.
//!
//! All metrics are computed in transformed units (the space where the model's
//! Gaussian assumption lives) over the prediction steps `1..n`; step 0 is the
//! deterministic initial condition and carries no predictive spread.

use crate::error::{Error, Result};
use crate::math::normal_cdf;
use crate::sampler::PathEnsemble;
use crate::series::ObservationSeries;

/// Calibration and accuracy summary for one evaluation window.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// PIT value per prediction step (length `n - 1`).
    pub pit: Vec<f64>,
    /// Standardized error per prediction step.
    pub standardized_errors: Vec<f64>,
    /// KS distance between the PIT sample and Uniform(0, 1).
    pub ks: f64,
    /// `(theoretical, empirical)` uniform Q-Q pairs, ascending.
    pub qq: Vec<(f64, f64)>,
    /// RMSE of the median forecast over the observed range.
    pub nrmse: f64,
    /// Fraction of prediction steps inside the central 95% band.
    pub coverage_95: f64,
}

fn check_aligned(ensemble: &PathEnsemble, obs: &ObservationSeries) -> Result<()> {
    if obs.len() != ensemble.n_steps {
        return Err(Error::LengthMismatch {
            left: obs.len(),
            right: ensemble.n_steps,
        });
    }
    let tol = 1e-9 * ensemble.dt.max(1.0);
    if (obs.t0() - ensemble.t0).abs() > tol || (obs.dt() - ensemble.dt).abs() > tol {
        return Err(Error::GridMismatch {
            detail: format!(
                "ensemble t0/dt {}/{} vs observations {}/{}",
                ensemble.t0,
                ensemble.dt,
                obs.t0(),
                obs.dt()
            ),
        });
    }
    Ok(())
}

/// Standardized errors `(y_i - mean_i) / std_i` over prediction steps.
pub fn standardized_errors(ensemble: &PathEnsemble, obs: &ObservationSeries) -> Result<Vec<f64>> {
    check_aligned(ensemble, obs)?;
    let mut errors = Vec::with_capacity(ensemble.n_steps - 1);
    let rows = obs
        .transformed()
        .iter()
        .zip(&ensemble.summary.mean)
        .zip(&ensemble.summary.std);
    for (i, ((&y, &mean), &std)) in rows.enumerate().skip(1) {
        if !(std > 0.0) {
            return Err(Error::DegenerateEnsemble { step: i });
        }
        errors.push((y - mean) / std);
    }
    Ok(errors)
}

/// PIT values: the standard normal CDF of each standardized error.
pub fn pit_values(ensemble: &PathEnsemble, obs: &ObservationSeries) -> Result<Vec<f64>> {
    Ok(standardized_errors(ensemble, obs)?
        .into_iter()
        .map(normal_cdf)
        .collect())
}

/// Kolmogorov-Smirnov distance between a sample in [0, 1] and Uniform(0, 1).
pub fn ks_statistic(pit: &[f64]) -> Result<f64> {
    if pit.is_empty() {
        return Err(Error::TooFewSamples {
            what: "pit values",
            needed: 1,
            got: 0,
        });
    }
    for (i, &u) in pit.iter().enumerate() {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::ProbabilityRange { value: u, index: i });
        }
    }
    let mut sorted = pit.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        let upper = (i + 1) as f64 / n - u;
        let lower = u - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    Ok(d.min(1.0))
}

/// Sorted PIT values paired with uniform plotting positions `(i - 0.5) / n`.
pub fn qq_points(pit: &[f64]) -> Result<Vec<(f64, f64)>> {
    if pit.is_empty() {
        return Err(Error::TooFewSamples {
            what: "pit values",
            needed: 1,
            got: 0,
        });
    }
    let mut sorted = pit.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, u)| ((i as f64 + 0.5) / n, u))
        .collect())
}

/// One PIT histogram bin.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub density: f64,
}

/// Equal-width histogram of PIT values over [0, 1]; 1.0 lands in the last bin.
pub fn pit_histogram(pit: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::InvalidConfig("need at least one bin".into()));
    }
    for (i, &u) in pit.iter().enumerate() {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::ProbabilityRange { value: u, index: i });
        }
    }
    let width = 1.0 / bins as f64;
    let mut counts = vec![0usize; bins];
    for &u in pit {
        let idx = ((u / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = pit.len().max(1) as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: i as f64 * width,
            hi: (i + 1) as f64 * width,
            count,
            density: count as f64 / (n * width),
        })
        .collect())
}

/// RMSE of the median forecast against the observations over prediction
/// steps, normalized by the observed range in the same window.
pub fn nrmse(ensemble: &PathEnsemble, obs: &ObservationSeries) -> Result<f64> {
    check_aligned(ensemble, obs)?;
    let y = &obs.transformed()[1..];
    let median = &ensemble.summary.median[1..];
    let range = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - y.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(range > 0.0) {
        return Err(Error::ZeroRange);
    }
    let mse = y
        .iter()
        .zip(median)
        .map(|(obs, med)| (obs - med) * (obs - med))
        .sum::<f64>()
        / y.len() as f64;
    Ok(mse.sqrt() / range)
}

/// Fraction of prediction steps where the observation lies inside the central
/// `level` quantile band (inclusive). The band's quantiles must have been
/// recorded when the ensemble was sampled.
pub fn coverage(ensemble: &PathEnsemble, obs: &ObservationSeries, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "coverage level must be in (0, 1), got {level}"
        )));
    }
    check_aligned(ensemble, obs)?;
    let lo_idx = ensemble.level_index((1.0 - level) / 2.0)?;
    let hi_idx = ensemble.level_index((1.0 + level) / 2.0)?;
    let y = obs.transformed();
    let lo = &ensemble.summary.quantiles[lo_idx];
    let hi = &ensemble.summary.quantiles[hi_idx];
    let inside = (1..ensemble.n_steps)
        .filter(|&i| y[i] >= lo[i] && y[i] <= hi[i])
        .count();
    Ok(inside as f64 / (ensemble.n_steps - 1) as f64)
}

/// Full evaluation: PIT, KS, Q-Q, NRMSE, and 95% coverage.
pub fn evaluate(ensemble: &PathEnsemble, obs: &ObservationSeries) -> Result<EvalReport> {
    let standardized_errors = standardized_errors(ensemble, obs)?;
    let pit: Vec<f64> = standardized_errors.iter().map(|&e| normal_cdf(e)).collect();
    let ks = ks_statistic(&pit)?;
    let qq = qq_points(&pit)?;
    let nrmse = nrmse(ensemble, obs)?;
    let coverage_95 = coverage(ensemble, obs, 0.95)?;
    Ok(EvalReport {
        pit,
        standardized_errors,
        ks,
        qq,
        nrmse,
        coverage_95,
    })
}
