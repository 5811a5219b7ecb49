use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const DENSITY_BINS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub beta: f64,
    pub residual_mean: f64,
    pub residual_std: f64,
    pub accuracy: f64,
}

/// Everything a study writes: `curve_<name>.csv`, `density_<name>.csv`, `summary.json`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyOutput {
    pub curves: BTreeMap<String, Vec<CurveRow>>,
    pub densities: BTreeMap<String, Vec<f64>>,
    pub summary: serde_json::Value,
}

/// Counts over `DENSITY_BINS` equal bins on `[0, 1]`; the last bin is closed.
/// Values outside the interval are clamped; NaN is dropped.
pub fn histogram(values: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; DENSITY_BINS];
    for &v in values {
        if v.is_nan() {
            continue;
        }
        let i = ((v.clamp(0.0, 1.0) * DENSITY_BINS as f64) as usize).min(DENSITY_BINS - 1);
        counts[i] += 1;
    }
    counts
}

/// Total-variation distance between two histograms after normalising each.
pub fn tv_distance(a: &[u64], b: &[u64]) -> f64 {
    let (sa, sb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if sa == 0.0 || sb == 0.0 {
        return f64::NAN;
    }
    0.5 * a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 / sa - y as f64 / sb).abs())
        .sum::<f64>()
}

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta", "residual_mean", "residual_std", "accuracy"])?;
    for r in rows {
        w.write_record([
            r.beta.to_string(),
            r.residual_mean.to_string(),
            r.residual_std.to_string(),
            r.accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_density_csv<W: Write>(values: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_left", "bin_right", "count"])?;
    for (i, c) in histogram(values).into_iter().enumerate() {
        let left = i as f64 / DENSITY_BINS as f64;
        let right = (i + 1) as f64 / DENSITY_BINS as f64;
        w.write_record([left.to_string(), right.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Write every file of `output` under `dir` (created if needed). Returns
/// the paths in the order written.
pub fn emit_results(output: &StudyOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, rows) in &output.curves {
        let path = dir.join(format!("curve_{name}.csv"));
        write_curve_csv(rows, BufWriter::new(File::create(&path)?))?;
        written.push(path);
    }
    for (name, values) in &output.densities {
        let path = dir.join(format!("density_{name}.csv"));
        write_density_csv(values, BufWriter::new(File::create(&path)?))?;
        written.push(path);
    }
    let path = dir.join("summary.json");
    let mut f = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut f, &output.summary)?;
    f.write_all(b"\n")?;
    f.flush()?;
    written.push(path);
    Ok(written)
}
