//! CSV dataset ingestion and emission.
//!
//! Datasets are plain CSVs with a header row: a time column, the input
//! channel columns (bound by name, not position), and optionally the target
//! column. Timestamps must be uniform and strictly increasing within
//! `1e-6 * dt`.

use std::path::Path;

use anyhow::{bail, Context, Result};

use oucast_core::series::InputSeries;

#[derive(Debug)]
pub struct Dataset {
    pub inputs: InputSeries,
    pub target_raw: Option<Vec<f64>>,
}

pub fn read_dataset(
    path: &Path,
    dt: f64,
    time_column: &str,
    channels: &[String],
    target_column: Option<&str>,
) -> Result<Dataset> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader
        .headers()
        .with_context(|| format!("cannot read header of {}", path.display()))?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{} has no column {name:?}", path.display()))
    };
    let time_idx = column(time_column)?;
    let channel_idx: Vec<usize> = channels.iter().map(|c| column(c)).collect::<Result<_>>()?;
    let target_idx = match target_column {
        Some(name) => Some(column(name)?),
        None => None,
    };

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut target = target_idx.map(|_| Vec::new());
    for (row_number, record) in reader.records().enumerate() {
        let record = record.with_context(|| {
            format!(
                "{}: cannot read data row {}",
                path.display(),
                row_number + 2
            )
        })?;
        let parse = |idx: usize, what: &str| -> Result<f64> {
            let field = record.get(idx).with_context(|| {
                format!(
                    "{}: row {} is missing the {what} column",
                    path.display(),
                    row_number + 2
                )
            })?;
            let value: f64 = field.trim().parse().with_context(|| {
                format!(
                    "{}: row {}: cannot parse {what} value {field:?}",
                    path.display(),
                    row_number + 2
                )
            })?;
            if !value.is_finite() {
                bail!(
                    "{}: row {}: non-finite {what} value",
                    path.display(),
                    row_number + 2
                );
            }
            Ok(value)
        };
        times.push(parse(time_idx, "time")?);
        for (&idx, name) in channel_idx.iter().zip(channels) {
            values.push(parse(idx, name)?);
        }
        if let (Some(idx), Some(buf)) = (target_idx, target.as_mut()) {
            buf.push(parse(idx, "target")?);
        }
    }
    if times.len() < 2 {
        bail!("{} needs at least 2 data rows", path.display());
    }

    let tol = 1e-6 * dt;
    for (i, pair) in times.windows(2).enumerate() {
        let step = pair[1] - pair[0];
        if step <= 0.0 {
            bail!(
                "{}: timestamps must be strictly increasing (row {})",
                path.display(),
                i + 3
            );
        }
        if (step - dt).abs() > tol {
            bail!(
                "{}: non-uniform timestamp at row {}: step {} vs configured dt {}",
                path.display(),
                i + 3,
                step,
                dt
            );
        }
    }

    let inputs = InputSeries::new(times[0], dt, channels.to_vec(), values)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(Dataset {
        inputs,
        target_raw: target,
    })
}

pub fn write_dataset(
    path: &Path,
    time_column: &str,
    target_column: &str,
    inputs: &InputSeries,
    target_raw: &[f64],
) -> Result<()> {
    use std::io::Write;
    let file =
        std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    write!(w, "{time_column}")?;
    for name in inputs.channel_names() {
        write!(w, ",{name}")?;
    }
    writeln!(w, ",{target_column}")?;
    for (i, &target) in target_raw.iter().enumerate().take(inputs.len()) {
        write!(w, "{}", inputs.time(i))?;
        for &v in inputs.row(i) {
            write!(w, ",{v}")?;
        }
        writeln!(w, ",{target}")?;
    }
    Ok(())
}
