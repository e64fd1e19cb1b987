//! Plot-ready output files: ensemble summaries, cumulative bands, loss
//! curves, PIT/Q-Q data, and text reports. Floats are written with Rust's
//! shortest round-trip formatting so reruns are byte-identical.

use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

use oucast_core::metrics::{EvalReport, HistogramBin};
use oucast_core::sampler::PathEnsemble;
use oucast_core::synthetic::{SynthSpec, VolatilityTruth};
use oucast_core::trainer::FitReport;

fn create(path: &Path) -> Result<BufWriter<std::fs::File>> {
    Ok(BufWriter::new(std::fs::File::create(path).with_context(
        || format!("cannot create {}", path.display()),
    )?))
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn quantile_label(level: f64) -> String {
    format!("q{}", level * 100.0)
}

/// `time, mean, std, median, q.., raw_mean, raw_std, raw_median, raw_q..`
pub fn write_ensemble_summary(path: &Path, ensemble: &PathEnsemble) -> Result<()> {
    let mut w = create(path)?;
    write!(w, "time_s,mean,std,median")?;
    for &level in &ensemble.quantile_levels {
        write!(w, ",{}", quantile_label(level))?;
    }
    write!(w, ",raw_mean,raw_std,raw_median")?;
    for &level in &ensemble.quantile_levels {
        write!(w, ",raw_{}", quantile_label(level))?;
    }
    writeln!(w)?;
    for i in 0..ensemble.n_steps {
        write!(
            w,
            "{},{},{},{}",
            ensemble.time(i),
            ensemble.summary.mean[i],
            ensemble.summary.std[i],
            ensemble.summary.median[i]
        )?;
        for q in &ensemble.summary.quantiles {
            write!(w, ",{}", q[i])?;
        }
        write!(
            w,
            ",{},{},{}",
            ensemble.raw_summary.mean[i],
            ensemble.raw_summary.std[i],
            ensemble.raw_summary.median[i]
        )?;
        for q in &ensemble.raw_summary.quantiles {
            write!(w, ",{}", q[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Cumulative raw-unit output: mean with one/two/three sigma bands.
pub fn write_cumulative(path: &Path, ensemble: &PathEnsemble) -> Result<()> {
    let bands = ensemble.cumulative_bands();
    let mut w = create(path)?;
    writeln!(
        w,
        "time_s,mean,lo_1sigma,hi_1sigma,lo_2sigma,hi_2sigma,lo_3sigma,hi_3sigma"
    )?;
    for i in 0..ensemble.n_steps {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            ensemble.time(i),
            bands.mean[i],
            bands.lower[0][i],
            bands.upper[0][i],
            bands.lower[1][i],
            bands.upper[1][i],
            bands.lower[2][i],
            bands.upper[2][i]
        )?;
    }
    Ok(())
}

/// Full path matrix, one row per timestep (transformed units).
pub fn write_paths(path: &Path, ensemble: &PathEnsemble) -> Result<()> {
    let matrix = ensemble
        .paths
        .as_ref()
        .context("ensemble was sampled without path retention")?;
    let mut w = create(path)?;
    write!(w, "time_s")?;
    for p in 0..ensemble.n_paths {
        write!(w, ",path_{p}")?;
    }
    writeln!(w)?;
    for i in 0..ensemble.n_steps {
        write!(w, "{}", ensemble.time(i))?;
        for p in 0..ensemble.n_paths {
            write!(w, ",{}", matrix[p * ensemble.n_steps + i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_loss_curves(path: &Path, report: &FitReport) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "epoch,train_nll,val_nll")?;
    for (epoch, (train, val)) in report
        .train_loss_curve
        .iter()
        .zip(&report.val_loss_curve)
        .enumerate()
    {
        writeln!(w, "{epoch},{train},{val}")?;
    }
    Ok(())
}

pub fn write_fit_report(
    path: &Path,
    report: &FitReport,
    n_train: usize,
    n_val: usize,
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "oucast fit report v1")?;
    writeln!(w, "epochs = {}", report.train_loss_curve.len())?;
    writeln!(w, "train_transitions = {n_train}")?;
    writeln!(w, "val_transitions = {n_val}")?;
    writeln!(w, "best_epoch = {}", report.best_epoch)?;
    writeln!(
        w,
        "best_val_nll = {}",
        report.val_loss_curve[report.best_epoch]
    )?;
    writeln!(
        w,
        "final_train_nll = {}",
        report.train_loss_curve.last().expect("at least one epoch")
    )?;
    writeln!(w, "wall_time_s = {}", report.wall_time_s)?;
    Ok(())
}

pub fn write_eval_report(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "oucast eval report v1")?;
    writeln!(w, "prediction_steps = {}", report.pit.len())?;
    writeln!(w, "ks = {}", report.ks)?;
    writeln!(w, "nrmse = {}", report.nrmse)?;
    writeln!(w, "coverage_95 = {}", report.coverage_95)?;
    Ok(())
}

/// Per prediction step: standardized error and PIT value.
pub fn write_pit(path: &Path, t0: f64, dt: f64, report: &EvalReport) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "step,time_s,standardized_error,pit")?;
    for (k, (e, pit)) in report
        .standardized_errors
        .iter()
        .zip(&report.pit)
        .enumerate()
    {
        let step = k + 1; // prediction steps start after the initial condition
        writeln!(w, "{step},{},{e},{pit}", t0 + step as f64 * dt)?;
    }
    Ok(())
}

pub fn write_pit_histogram(path: &Path, bins: &[HistogramBin]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "bin_lo,bin_hi,count,density")?;
    for bin in bins {
        writeln!(w, "{},{},{},{}", bin.lo, bin.hi, bin.count, bin.density)?;
    }
    Ok(())
}

pub fn write_qq(path: &Path, qq: &[(f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "theoretical,empirical")?;
    for (t, e) in qq {
        writeln!(w, "{t},{e}")?;
    }
    Ok(())
}

/// Ground-truth parameters behind a synthetic dataset.
pub fn write_truth(path: &Path, spec: &SynthSpec) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "oucast synth truth v1")?;
    writeln!(w, "reversion = {}", spec.reversion)?;
    writeln!(w, "mean_weights = {}", join(&spec.mean_weights))?;
    writeln!(w, "mean_intercept = {}", spec.mean_intercept)?;
    match &spec.volatility {
        VolatilityTruth::Constant(sigma) => writeln!(w, "sigma = {sigma}")?,
        VolatilityTruth::StateDependent { weights, intercept } => {
            writeln!(w, "vol_weights = {}", join(weights))?;
            writeln!(w, "vol_intercept = {intercept}")?;
        }
    }
    writeln!(w, "dt = {}", spec.dt)?;
    writeln!(w, "n = {}", spec.n)?;
    writeln!(w, "train_points = {}", spec.train_points)?;
    writeln!(w, "seed = {}", spec.seed)?;
    Ok(())
}
