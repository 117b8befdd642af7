//! CSV tables.

use std::path::Path;

use krylov_core::dataset::Dataset;
use krylov_core::krylov::{curve_statistics, ComplexityCurve};
use krylov_core::nn::{History, RmseReport};
use krylov_core::states::RealGrid;

use crate::error::Result;
use crate::fsutil;

fn finish(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    fsutil::atomic_write(path, &bytes)
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

/// One row per (curve, time): `t, t_over_N, C, C_over_N, sample_id, beta`.
/// `labels[i]` is `(sample_id, beta)` of `curves[i]`.
pub fn curves_csv(path: &Path, curves: &[ComplexityCurve], labels: &[(usize, f64)], n: usize) -> Result<()> {
    let mut w = writer();
    w.write_record(["t", "t_over_N", "C", "C_over_N", "sample_id", "beta"])?;
    for (c, (s, beta)) in curves.iter().zip(labels) {
        for (t, v) in c.times.iter().zip(&c.values) {
            w.serialize((t, t / n as f64, v, v / n as f64, s, beta))?;
        }
    }
    finish(path, w)
}

/// Ensemble mean and standard deviation: `t, t_over_N, mean_C_over_N, std_C_over_N`.
pub fn mean_curve_csv(path: &Path, curves: &[ComplexityCurve], n: usize) -> Result<()> {
    let refs: Vec<&ComplexityCurve> = curves.iter().collect();
    let (mean, std) = curve_statistics(&refs)?;
    let mut w = writer();
    w.write_record(["t", "t_over_N", "mean_C_over_N", "std_C_over_N"])?;
    for (i, t) in curves[0].times.iter().enumerate() {
        w.serialize((t, t / n as f64, mean[i] / n as f64, std[i] / n as f64))?;
    }
    finish(path, w)
}

/// `epoch, train_loss, val_loss` (no timings, so reruns are byte-identical).
pub fn history_csv_string(h: &History) -> Result<String> {
    let mut w = writer();
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for e in &h.epochs {
        w.serialize((e.epoch, e.train_loss, e.val_loss))?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn history_csv(path: &Path, h: &History) -> Result<()> {
    fsutil::atomic_write_str(path, &history_csv_string(h)?)
}

/// Per time bin: `t_over_N, rmse, mean_prediction, mean_truth`.
pub fn rmse_csv(path: &Path, r: &RmseReport, n: usize) -> Result<()> {
    let mut w = writer();
    w.write_record(["t_over_N", "rmse", "mean_prediction", "mean_truth"])?;
    for (t, ((e, p), y)) in r.per_time_bin.iter().zip(&r.mean_prediction).zip(&r.mean_target).enumerate() {
        w.serialize((t as f64 / n as f64, e, p, y))?;
    }
    finish(path, w)
}

/// `sample_id, beta, t, target` for every record.
pub fn dataset_csv(path: &Path, d: &Dataset) -> Result<()> {
    let mut w = writer();
    w.write_record(["sample_id", "beta", "t", "target"])?;
    for r in d.records() {
        w.serialize((r.sample_id, d.meta.betas[r.beta_index as usize], r.time_index, r.target))?;
    }
    finish(path, w)
}

/// `n, t, value` for an amplitude grid (rows = basis index, cols = time).
pub fn grid_csv(path: &Path, g: &RealGrid) -> Result<()> {
    let mut w = writer();
    w.write_record(["n", "t", "value"])?;
    for n in 0..g.rows {
        for t in 0..g.cols {
            w.serialize((n, t, g.get(n, t)))?;
        }
    }
    finish(path, w)
}
