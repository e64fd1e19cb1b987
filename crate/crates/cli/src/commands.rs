//! Subcommand implementations. Every command is deterministic for a given
//! config and seed: rerunning overwrites its outputs with identical bytes.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use oucast_core::metrics;
use oucast_core::model::Model;
use oucast_core::sampler::{self, PathEnsemble};
use oucast_core::series::{InputSeries, ObservationSeries};
use oucast_core::synthetic;
use oucast_core::trainer::{self, TransitionExample};
use oucast_core::transform::fit_preprocess;

use crate::config::RunConfig;
use crate::dataset::{read_dataset, write_dataset};
use crate::outputs;

pub struct CommandContext {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub quiet: bool,
}

impl CommandContext {
    pub fn new(
        config_path: &Path,
        out: Option<PathBuf>,
        seed: Option<u64>,
        quiet: bool,
    ) -> Result<Self> {
        let config = RunConfig::load(config_path)?;
        let out_dir = out
            .or_else(|| config.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out_dir)
            .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        Ok(Self {
            config,
            out_dir,
            seed_override: seed,
            quiet,
        })
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Generate a synthetic dataset plus its ground-truth parameter file.
pub fn synth(ctx: &CommandContext) -> Result<()> {
    let section = ctx
        .config
        .synth
        .as_ref()
        .context("config is missing the [synth] section")?;
    let mut spec = section.to_spec(0)?;
    if let Some(seed) = ctx.seed_override {
        spec.seed = seed;
    }
    let data = synthetic::generate(&spec)?;

    let (time_column, target_column) = match &ctx.config.data {
        Some(d) => (d.time_column.clone(), d.target_column.clone()),
        None => ("time_s".to_string(), "target".to_string()),
    };
    if let Some(d) = &ctx.config.data {
        if d.channels.len() != spec.dim() {
            bail!(
                "[data] lists {} channels but [synth] generates {}",
                d.channels.len(),
                spec.dim()
            );
        }
    }

    let dataset_path = ctx.out("dataset.csv");
    let inputs = match &ctx.config.data {
        Some(d) => InputSeries::new(
            data.inputs.t0(),
            data.inputs.dt(),
            d.channels.clone(),
            data.inputs.values().to_vec(),
        )?,
        None => data.inputs.clone(),
    };
    write_dataset(
        &dataset_path,
        &time_column,
        &target_column,
        &inputs,
        &data.target_raw,
    )?;
    let train_path = ctx.out("train.csv");
    write_dataset(
        &train_path,
        &time_column,
        &target_column,
        &inputs.window(0, spec.train_points)?,
        &data.target_raw[..spec.train_points],
    )?;
    outputs::write_truth(&ctx.out("truth.txt"), &spec)?;
    ctx.say(format!(
        "wrote {} rows to {} (training window: first {} rows, in {})",
        spec.n,
        dataset_path.display(),
        spec.train_points,
        train_path.display()
    ));
    Ok(())
}

fn load_training_data(
    ctx: &CommandContext,
) -> Result<(Vec<TransitionExample>, Vec<TransitionExample>, Model)> {
    let data_cfg = ctx.config.data()?;
    let train_csv = data_cfg
        .train_csv
        .as_ref()
        .context("[data] train_csv is required for fitting")?;
    let train = read_dataset(
        train_csv,
        data_cfg.dt,
        &data_cfg.time_column,
        &data_cfg.channels,
        Some(&data_cfg.target_column),
    )?;
    let train_raw = train.target_raw.expect("target requested");

    match &data_cfg.validation_csv {
        Some(val_csv) => {
            // preprocessing statistics come from the training file alone
            let stats = fit_preprocess(&train_raw, train.inputs.values(), data_cfg.channels.len())?;
            let obs = ObservationSeries::from_raw(
                train.inputs.t0(),
                train.inputs.dt(),
                train_raw,
                &stats,
            )?;
            let train_examples = trainer::build_transitions(&train.inputs, &obs, &stats)?;

            let val = read_dataset(
                val_csv,
                data_cfg.dt,
                &data_cfg.time_column,
                &data_cfg.channels,
                Some(&data_cfg.target_column),
            )?;
            let val_raw = val.target_raw.expect("target requested");
            let val_obs =
                ObservationSeries::from_raw(val.inputs.t0(), val.inputs.dt(), val_raw, &stats)?;
            let val_examples = trainer::build_transitions(&val.inputs, &val_obs, &stats)?;
            let model = Model::new(
                data_cfg.channels.clone(),
                oucast_core::model::ModelParams::zeros(data_cfg.channels.len()),
                stats,
            )?;
            Ok((train_examples, val_examples, model))
        }
        None => {
            let fraction = data_cfg.validation_fraction.unwrap_or(0.15);
            let n = train.inputs.len();
            let n_trans = n - 1;
            let n_val = ((n_trans as f64 * fraction).round() as usize).clamp(1, n_trans - 1);
            let split_row = n - n_val; // transitions [split_row-1 ..] are validation
            let stats = fit_preprocess(
                &train_raw[..split_row],
                train.inputs.window(0, split_row)?.values(),
                data_cfg.channels.len(),
            )?;
            let obs = ObservationSeries::from_raw(
                train.inputs.t0(),
                train.inputs.dt(),
                train_raw,
                &stats,
            )?;
            let all = trainer::build_transitions(&train.inputs, &obs, &stats)?;
            let (head, tail) = all.split_at(n_trans - n_val);
            let model = Model::new(
                data_cfg.channels.clone(),
                oucast_core::model::ModelParams::zeros(data_cfg.channels.len()),
                stats,
            )?;
            Ok((head.to_vec(), tail.to_vec(), model))
        }
    }
}

/// Fit the model and persist it together with its loss curves.
pub fn fit(ctx: &CommandContext) -> Result<()> {
    let (train_examples, val_examples, shell) = load_training_data(ctx)?;
    let train_config = ctx.config.train_config(ctx.seed_override)?;
    let report = trainer::fit(&train_examples, &val_examples, &train_config)?;

    let model = Model::new(shell.channel_names, report.best_params.clone(), shell.stats)?;
    let model_path = ctx.out("model.txt");
    model.save(&model_path)?;
    outputs::write_loss_curves(&ctx.out("loss_curves.csv"), &report)?;
    outputs::write_fit_report(
        &ctx.out("fit_report.txt"),
        &report,
        train_examples.len(),
        val_examples.len(),
    )?;
    ctx.say(format!(
        "fit {} epochs in {:.1} s; best epoch {} (val nll {:.6}); model at {}",
        report.train_loss_curve.len(),
        report.wall_time_s,
        report.best_epoch,
        report.val_loss_curve[report.best_epoch],
        model_path.display()
    ));
    Ok(())
}

fn load_model_and_inputs(
    ctx: &CommandContext,
    model_path: &Path,
    inputs_path: &Path,
    with_target: bool,
) -> Result<(Model, InputSeries, Option<Vec<f64>>)> {
    let model =
        Model::load(model_path).map_err(|e| anyhow::anyhow!("{}: {e}", model_path.display()))?;
    let data_cfg = ctx.config.data()?;
    if data_cfg.channels != model.channel_names {
        bail!(
            "config channels {:?} do not match the model's {:?}",
            data_cfg.channels,
            model.channel_names
        );
    }
    let dataset = read_dataset(
        inputs_path,
        data_cfg.dt,
        &data_cfg.time_column,
        &model.channel_names,
        with_target.then_some(data_cfg.target_column.as_str()),
    )?;
    Ok((model, dataset.inputs, dataset.target_raw))
}

fn sample(
    ctx: &CommandContext,
    model: &Model,
    inputs: &InputSeries,
    retain_paths: bool,
) -> Result<PathEnsemble> {
    let sample_config = ctx.config.sample_config(ctx.seed_override, retain_paths)?;
    Ok(sampler::sample_paths(model, inputs, &sample_config)?)
}

/// Sample the predictive ensemble for an input CSV (no target needed).
pub fn predict(
    ctx: &CommandContext,
    model_path: &Path,
    inputs_path: &Path,
    dump_paths: bool,
) -> Result<()> {
    let (model, inputs, _) = load_model_and_inputs(ctx, model_path, inputs_path, false)?;
    let ensemble = sample(ctx, &model, &inputs, dump_paths)?;
    outputs::write_ensemble_summary(&ctx.out("ensemble_summary.csv"), &ensemble)?;
    outputs::write_cumulative(&ctx.out("cumulative.csv"), &ensemble)?;
    if dump_paths {
        outputs::write_paths(&ctx.out("paths.csv"), &ensemble)?;
    }
    ctx.say(format!(
        "sampled {} paths over {} steps; summaries in {}",
        ensemble.n_paths,
        ensemble.n_steps,
        ctx.out_dir.display()
    ));
    Ok(())
}

/// Sample, then score calibration and accuracy against observations.
pub fn evaluate(ctx: &CommandContext, model_path: &Path, data_path: &Path) -> Result<()> {
    let (model, inputs, target_raw) = load_model_and_inputs(ctx, model_path, data_path, true)?;
    let target_raw = target_raw.context("evaluation requires the target column")?;
    let obs = ObservationSeries::from_raw(inputs.t0(), inputs.dt(), target_raw, &model.stats)?;
    let ensemble = sample(ctx, &model, &inputs, false)?;
    let report = metrics::evaluate(&ensemble, &obs)?;

    outputs::write_eval_report(&ctx.out("eval_report.txt"), &report)?;
    outputs::write_pit(&ctx.out("pit.csv"), ensemble.t0, ensemble.dt, &report)?;
    outputs::write_pit_histogram(
        &ctx.out("pit_histogram.csv"),
        &metrics::pit_histogram(&report.pit, 20)?,
    )?;
    outputs::write_qq(&ctx.out("qq.csv"), &report.qq)?;
    outputs::write_ensemble_summary(&ctx.out("ensemble_summary.csv"), &ensemble)?;
    outputs::write_cumulative(&ctx.out("cumulative.csv"), &ensemble)?;
    ctx.say(format!(
        "KS {:.4}  NRMSE {:.4}  coverage95 {:.4} over {} prediction steps",
        report.ks,
        report.nrmse,
        report.coverage_95,
        report.pit.len()
    ));
    Ok(())
}
