//! End-to-end experiment pipelines: basis dependence, temperature mixing and
//! system-time regression.

use std::path::{Path, PathBuf};

use krylov_core::dataset::{simulate, split_by_sample, Dataset, SplitKind, TargetKind};
use krylov_core::ensemble::GueEnsemble;
use krylov_core::krylov::{curve_statistics, ComplexityCurve};
use krylov_core::nn::{
    baseline_rmse, evaluate_rmse, predict, rmse_report, train, ArchKind, History, Network,
    RmseReport,
};
use krylov_core::numerics::Rng;
use krylov_core::states::{time_grid, Basis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::save_model;
use crate::config::{ExperimentKind, ExperimentSpec};
use crate::error::Result;
use crate::svg::{LinePlot, Series};
use crate::{export, fsutil, usage};

/// Stream index (under the experiment seed) of the sample-split shuffle.
pub const SPLIT_STREAM: u64 = 0x5350_4c54;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaMetrics {
    pub beta: f64,
    pub test_rmse: f64,
    /// Test RMSE of a model trained on this β alone (beta sweeps only).
    pub single_beta_rmse: Option<f64>,
    /// Mean prediction over the plateau window `[2N, 3N)`.
    pub predicted_plateau: f64,
    pub true_plateau: f64,
}

/// Per-bin RMSE averaged over the early (`t/N < 0.5`) and late (`t/N > 1.5`)
/// windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeWindows {
    pub early_rmse: f64,
    pub late_rmse: f64,
    /// Mean |prediction| over the `t = 0` test records.
    pub t0_mean_abs_prediction: f64,
}

/// Metrics of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub label: String,
    pub basis: Basis,
    pub arch: ArchKind,
    pub betas: Vec<f64>,
    pub target: TargetKind,
    pub dataset_seed: u64,
    pub split: [Vec<u32>; 3],
    pub train_seed: u64,
    pub model_file: String,
    pub epochs: usize,
    pub first_val_loss: f64,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    /// Variance of the training targets.
    pub train_target_variance: f64,
    pub test_rmse: f64,
    pub test_time_averaged_rmse: f64,
    pub baseline_rmse: f64,
    pub baseline_time_averaged_rmse: f64,
    pub per_time_bin_rmse: Vec<f64>,
    pub mean_prediction: Vec<f64>,
    pub mean_truth: Vec<f64>,
    pub per_beta: Vec<BetaMetrics>,
    pub windows: Option<TimeWindows>,
}

impl ConfigReport {
    pub fn ratio_to_baseline(&self) -> f64 {
        self.test_rmse / self.baseline_rmse
    }
}

/// A named pass/fail check with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub spec: ExperimentSpec,
    pub configs: Vec<ConfigReport>,
    pub checks: Vec<Check>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
}

impl ExperimentReport {
    pub fn config(&self, label: &str) -> Option<&ConfigReport> {
        self.configs.iter().find(|c| c.label == label)
    }
}

/// Dispatches on `spec.kind`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    match spec.kind {
        ExperimentKind::BasisSweep => run_basis_sweep(spec),
        ExperimentKind::BetaSweep => run_beta_sweep(spec),
        ExperimentKind::TimeTarget => run_time_target(spec),
    }
}

struct Job {
    label: String,
    basis: Basis,
    arch: ArchKind,
    betas: Vec<f64>,
    target: TargetKind,
}

struct Trained {
    report: ConfigReport,
    history: History,
    test: RmseReport,
    dataset: Dataset,
    curves: Vec<ComplexityCurve>,
}

fn check_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<ExperimentSpec> {
    if spec.kind != kind {
        return Err(usage!("spec kind is {:?}, expected {kind:?}", spec.kind));
    }
    spec.resolved()
}

fn build_dataset(
    spec: &ExperimentSpec,
    ensemble: &GueEnsemble,
    job: &Job,
) -> Result<(Dataset, Vec<ComplexityCurve>)> {
    let times = time_grid(spec.n);
    let (ds, curves) = simulate(ensemble, &job.betas, job.basis, job.target, &times)?;
    let ds = split_by_sample(&ds, spec.split, &mut Rng::stream(spec.seed, SPLIT_STREAM))?;
    Ok((ds, curves))
}

fn window_mean(v: &[f64], range: std::ops::Range<usize>) -> f64 {
    let s: Vec<f64> = v[range].iter().copied().filter(|x| x.is_finite()).collect();
    s.iter().sum::<f64>() / s.len() as f64
}

fn plateau_window(n: usize) -> std::ops::Range<usize> {
    2 * n..3 * n
}

fn run_job(spec: &ExperimentSpec, ensemble: &GueEnsemble, job: &Job, out: &Path) -> Result<Trained> {
    let (ds, curves) = build_dataset(spec, ensemble, job)?;
    let cfg = spec.train.train_config();
    let net_spec = spec.train.network_spec(job.arch, spec.n);
    let mut net = Network::<f32>::glorot(net_spec, &mut cfg.init_rng())?;
    let history = train(&mut net, &ds, &cfg)?;

    let test_records = ds.split_records(SplitKind::Test)?;
    let preds = predict(&net, &ds, &test_records)?;
    let test = rmse_report(&ds, &test_records, &preds)?;
    let base = baseline_rmse(&ds, SplitKind::Test)?;
    let train_targets: Vec<f64> =
        ds.split_records(SplitKind::Train)?.iter().map(|&r| ds.targets()[r] as f64).collect();
    let mu = train_targets.iter().sum::<f64>() / train_targets.len() as f64;
    let var = train_targets.iter().map(|t| (t - mu).powi(2)).sum::<f64>() / train_targets.len() as f64;

    let mut per_beta = Vec::new();
    for (bi, &beta) in ds.meta.betas.iter().enumerate() {
        let (recs, p): (Vec<usize>, Vec<f64>) = test_records
            .iter()
            .zip(&preds)
            .filter(|(r, _)| ds.record(**r).beta_index == bi as u32)
            .map(|(r, p)| (*r, *p))
            .unzip();
        let rep = rmse_report(&ds, &recs, &p)?;
        let w = plateau_window(spec.n);
        per_beta.push(BetaMetrics {
            beta,
            test_rmse: rep.overall,
            single_beta_rmse: None,
            predicted_plateau: window_mean(&rep.mean_prediction, w.clone()),
            true_plateau: window_mean(&rep.mean_target, w),
        });
    }

    let windows = (job.target == TargetKind::TimeOverN).then(|| {
        let n = spec.n as f64;
        let bins = |keep: &dyn Fn(f64) -> bool| {
            let v: Vec<f64> = test
                .per_time_bin
                .iter()
                .enumerate()
                .filter(|(t, e)| keep(*t as f64 / n) && e.is_finite())
                .map(|(_, e)| *e)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let t0: Vec<f64> = test_records
            .iter()
            .zip(&preds)
            .filter(|(r, _)| ds.record(**r).time_index == 0)
            .map(|(_, p)| p.abs())
            .collect();
        TimeWindows {
            early_rmse: bins(&|x| x < 0.5),
            late_rmse: bins(&|x| x > 1.5),
            t0_mean_abs_prediction: t0.iter().sum::<f64>() / t0.len() as f64,
        }
    });

    let model_file = format!("{}.knn", job.label);
    save_model(&out.join(&model_file), &net)?;
    let split = ds.split.clone().expect("split assigned above");
    let report = ConfigReport {
        label: job.label.clone(),
        basis: job.basis,
        arch: job.arch,
        betas: job.betas.clone(),
        target: job.target,
        dataset_seed: spec.seed,
        split: [split.train, split.val, split.test],
        train_seed: cfg.seed,
        model_file,
        epochs: history.epochs.len(),
        first_val_loss: history.epochs[0].val_loss,
        final_train_loss: history.last().map(|e| e.train_loss).unwrap_or(f64::NAN),
        final_val_loss: history.last().map(|e| e.val_loss).unwrap_or(f64::NAN),
        train_target_variance: var,
        test_rmse: test.overall,
        test_time_averaged_rmse: test.time_averaged,
        baseline_rmse: base.overall,
        baseline_time_averaged_rmse: base.time_averaged,
        per_time_bin_rmse: test.per_time_bin.clone(),
        mean_prediction: test.mean_prediction.clone(),
        mean_truth: test.mean_target.clone(),
        per_beta,
        windows,
    };
    Ok(Trained { report, history, test, dataset: ds, curves })
}

/// Writes the history/RMSE tables and figures of one model; returns the file
/// names.
fn write_config_files(out: &Path, t: &Trained, n: usize) -> Result<Vec<String>> {
    let label = &t.report.label;
    let mut files = vec![t.report.model_file.clone()];
    let hist = format!("{label}_history.csv");
    export::history_csv(&out.join(&hist), &t.history)?;
    let rmse = format!("{label}_rmse.csv");
    export::rmse_csv(&out.join(&rmse), &t.test, n)?;

    let y_label = match t.report.target {
        TargetKind::ComplexityOverN => "C(t)/N",
        TargetKind::TimeOverN => "n/N",
    };
    let xs: Vec<f64> = (0..t.test.per_time_bin.len()).map(|i| i as f64 / n as f64).collect();
    let zip = |v: &[f64]| xs.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
    let fig = LinePlot {
        title: format!("{label}: test prediction vs truth"),
        x_label: "t/N".into(),
        y_label: y_label.into(),
        series: vec![
            Series::new("truth", zip(&t.test.mean_target)),
            Series::new("prediction ± RMSE", zip(&t.test.mean_prediction))
                .with_errors(t.test.per_time_bin.clone())
                .dashed(),
        ],
        log_y: false,
    };
    let pred_svg = format!("{label}_prediction.svg");
    fsutil::atomic_write_str(&out.join(&pred_svg), &fig.render())?;

    let epochs: Vec<f64> = t.history.epochs.iter().map(|e| e.epoch as f64).collect();
    let loss = LinePlot {
        title: format!("{label}: loss"),
        x_label: "epoch".into(),
        y_label: "MSE".into(),
        series: vec![
            Series::new("train", epochs.iter().copied().zip(t.history.epochs.iter().map(|e| e.train_loss)).collect()),
            Series::new("validation", epochs.iter().copied().zip(t.history.epochs.iter().map(|e| e.val_loss)).collect())
                .dashed(),
        ],
        log_y: true,
    };
    let loss_svg = format!("{label}_loss.svg");
    fsutil::atomic_write_str(&out.join(&loss_svg), &loss.render())?;
    files.extend([hist, rmse, pred_svg, loss_svg]);
    Ok(files)
}

/// Mean complexity curve per β (CSV + SVG) for the report.
fn write_complexity_files(out: &Path, t: &Trained, n: usize) -> Result<Vec<String>> {
    let betas = &t.dataset.meta.betas;
    let labels: Vec<(usize, f64)> =
        (0..t.dataset.meta.m).flat_map(|s| betas.iter().map(move |&b| (s, b))).collect();
    export::curves_csv(&out.join("complexity_curves.csv"), &t.curves, &labels, n)?;
    let mut series = Vec::new();
    for (bi, &b) in betas.iter().enumerate() {
        let sel: Vec<&ComplexityCurve> =
            t.curves.iter().skip(bi).step_by(betas.len()).collect();
        let (mean, std) = curve_statistics(&sel)?;
        let pts = sel[0].times.iter().zip(&mean).map(|(x, y)| (x / n as f64, y / n as f64)).collect();
        series.push(Series::new(format!("β = {b}"), pts).with_errors(std.iter().map(|s| s / n as f64).collect()));
        if bi == 0 {
            let owned: Vec<ComplexityCurve> = sel.iter().map(|c| (*c).clone()).collect();
            export::mean_curve_csv(&out.join("complexity_mean.csv"), &owned, n)?;
        }
    }
    let fig = LinePlot {
        title: "Ensemble-mean spread complexity".into(),
        x_label: "t/N".into(),
        y_label: "C(t)/N".into(),
        series,
        log_y: false,
    };
    fsutil::atomic_write_str(&out.join("complexity.svg"), &fig.render())?;
    Ok(vec!["complexity_curves.csv".into(), "complexity_mean.csv".into(), "complexity.svg".into()])
}

fn write_summary(out: &Path, configs: &[ConfigReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "label",
        "basis",
        "arch",
        "test_rmse",
        "time_averaged_rmse",
        "baseline_rmse",
        "ratio_to_baseline",
        "first_val_loss",
        "final_val_loss",
    ])?;
    for c in configs {
        w.serialize((
            &c.label,
            c.basis.name(),
            format!("{:?}", c.arch).to_lowercase(),
            c.test_rmse,
            c.test_time_averaged_rmse,
            c.baseline_rmse,
            c.ratio_to_baseline(),
            c.first_val_loss,
            c.final_val_loss,
        ))?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    fsutil::atomic_write(&out.join("summary.csv"), &bytes)
}

fn finish(spec: ExperimentSpec, trained: Vec<Trained>, checks: Vec<Check>, mut files: Vec<String>) -> Result<ExperimentReport> {
    let out = spec.output_dir.clone();
    for t in &trained {
        files.extend(write_config_files(&out, t, spec.n)?);
    }
    let configs: Vec<ConfigReport> = trained.into_iter().map(|t| t.report).collect();
    write_summary(&out, &configs)?;
    fsutil::atomic_write_str(&out.join("config.json"), &fsutil::to_json(&spec))?;
    files.extend(["summary.csv".to_string(), "config.json".to_string(), "report.json".to_string()]);
    let report = ExperimentReport { kind: spec.kind, spec, configs, checks, files };
    fsutil::atomic_write_str(&out.join("report.json"), &fsutil::to_json(&report))?;
    Ok(report)
}

fn run_jobs(spec: &ExperimentSpec, jobs: &[Job]) -> Result<Vec<Trained>> {
    let out: PathBuf = spec.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| crate::LabError::io(&out, e))?;
    let ensemble = GueEnsemble::generate(spec.n, spec.m, spec.seed)?;
    jobs.par_iter().map(|j| run_job(spec, &ensemble, j, &out)).collect()
}

/// Trains a CNN per basis (plus an FCN for the pseudo-random basis) on
/// `C(t)/N` and compares each with the mean-predictor baseline.
pub fn run_basis_sweep(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let spec = check_kind(spec, ExperimentKind::BasisSweep)?;
    let mut jobs = Vec::new();
    for &basis in spec.bases() {
        let job = |arch: ArchKind| Job {
            label: format!("{}_{}", basis.name(), format!("{arch:?}").to_lowercase()),
            basis,
            arch,
            betas: spec.betas().to_vec(),
            target: TargetKind::ComplexityOverN,
        };
        jobs.push(job(ArchKind::Cnn));
        if basis == Basis::PseudoRandom {
            jobs.push(job(ArchKind::Fcn));
        }
    }
    let trained = run_jobs(&spec, &jobs)?;
    let files = write_complexity_files(&spec.output_dir, &trained[0], spec.n)?;

    let get = |l: &str| trained.iter().find(|t| t.report.label == l).map(|t| &t.report);
    let mut checks = Vec::new();
    let ratio_check = |name: &str, label: &str, ok: fn(f64) -> bool, rule: &str| {
        get(label).map(|c| {
            let r = c.ratio_to_baseline();
            Check::new(name, ok(r), format!("test RMSE / baseline = {r:.4} ({rule})"))
        })
    };
    checks.extend(ratio_check("energy_learns", "energy_cnn", |r| r <= 0.25, "<= 0.25"));
    checks.extend(ratio_check("krylov_learns", "krylov_cnn", |r| r <= 0.35, "<= 0.35"));
    checks.extend(ratio_check("original_fails", "original_cnn", |r| r >= 0.8, ">= 0.8"));
    if let (Some(e), Some(o), Some(p)) = (get("energy_cnn"), get("original_cnn"), get("pseudo_random_fcn")) {
        let ok = e.test_rmse < p.test_rmse && p.test_rmse < o.test_rmse;
        checks.push(Check::new(
            "pseudo_random_between",
            ok,
            format!("energy {:.4} < pseudo-random FCN {:.4} < original {:.4}", e.test_rmse, p.test_rmse, o.test_rmse),
        ));
    }
    if let Some(t) = trained.iter().find(|t| t.report.label == "krylov_cnn") {
        let peak = t.test.mean_target.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a }).0;
        let early = window_mean(&t.test.per_time_bin, 1..peak.max(2));
        let late = window_mean(&t.test.per_time_bin, peak..t.test.per_time_bin.len());
        checks.push(Check::new(
            "krylov_early_better_than_late",
            early < late,
            format!("mean per-bin RMSE before the peak {early:.4}, after {late:.4}"),
        ));
    }
    if let Some(e) = get("energy_cnn") {
        checks.push(Check::new(
            "energy_val_loss_drop",
            e.final_val_loss <= 0.1 * e.first_val_loss,
            format!("final val loss {:.3e} vs 0.1 x epoch-1 val loss {:.3e}", e.final_val_loss, 0.1 * e.first_val_loss),
        ));
    }
    if let Some(o) = get("original_cnn") {
        checks.push(Check::new(
            "original_val_loss_near_variance",
            (o.final_val_loss - o.train_target_variance).abs() <= 0.2 * o.train_target_variance,
            format!("final val loss {:.3e}, train target variance {:.3e}", o.final_val_loss, o.train_target_variance),
        ));
    }
    finish(spec, trained, checks, files)
}

/// One model on the mixed-β energy-basis dataset, plus one per β alone for
/// reference.
pub fn run_beta_sweep(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let spec = check_kind(spec, ExperimentKind::BetaSweep)?;
    let basis = spec.bases()[0];
    let mut jobs = vec![Job {
        label: "mixed_cnn".into(),
        basis,
        arch: ArchKind::Cnn,
        betas: spec.betas().to_vec(),
        target: TargetKind::ComplexityOverN,
    }];
    for &b in spec.betas() {
        jobs.push(Job {
            label: format!("beta_{b}_cnn"),
            basis,
            arch: ArchKind::Cnn,
            betas: vec![b],
            target: TargetKind::ComplexityOverN,
        });
    }
    let mut trained = run_jobs(&spec, &jobs)?;
    let singles: Vec<f64> = trained[1..].iter().map(|t| t.report.test_rmse).collect();
    for (m, s) in trained[0].report.per_beta.iter_mut().zip(&singles) {
        m.single_beta_rmse = Some(*s);
    }
    let files = write_complexity_files(&spec.output_dir, &trained[0], spec.n)?;

    let mixed = &trained[0];
    let per = &mixed.report.per_beta;
    let order = |key: fn(&BetaMetrics) -> f64| {
        let mut idx: Vec<usize> = (0..per.len()).collect();
        idx.sort_by(|&a, &b| key(&per[b]).total_cmp(&key(&per[a])));
        idx
    };
    let (pred_order, true_order) = (order(|m| m.predicted_plateau), order(|m| m.true_plateau));
    let mut checks = vec![Check::new(
        "plateau_ordering",
        pred_order == true_order,
        format!(
            "predicted plateaus {:?}, true plateaus {:?}",
            per.iter().map(|m| (m.beta, round4(m.predicted_plateau))).collect::<Vec<_>>(),
            per.iter().map(|m| (m.beta, round4(m.true_plateau))).collect::<Vec<_>>()
        ),
    )];
    for m in per {
        let single = m.single_beta_rmse.unwrap_or(f64::NAN);
        checks.push(Check::new(
            &format!("beta_{}_vs_single", m.beta),
            m.test_rmse <= 1.5 * single,
            format!("mixed-model RMSE {:.4} vs 1.5 x single-beta {:.4}", m.test_rmse, 1.5 * single),
        ));
    }

    let xs: Vec<f64> = (0..mixed.test.per_time_bin.len()).map(|i| i as f64 / spec.n as f64).collect();
    let mut series = Vec::new();
    for (bi, &b) in mixed.dataset.meta.betas.iter().enumerate() {
        let recs = mixed.dataset.split_records(SplitKind::Test)?;
        let recs: Vec<usize> =
            recs.into_iter().filter(|&r| mixed.dataset.record(r).beta_index == bi as u32).collect();
        let preds = predict_for(&spec, mixed, &recs)?;
        let rep = rmse_report(&mixed.dataset, &recs, &preds)?;
        let zip = |v: &[f64]| xs.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
        series.push(Series::new(format!("truth β = {b}"), zip(&rep.mean_target)));
        series.push(Series::new(format!("predicted β = {b}"), zip(&rep.mean_prediction)).with_errors(rep.per_time_bin).dashed());
    }
    let fig = LinePlot {
        title: "Mixed-temperature model".into(),
        x_label: "t/N".into(),
        y_label: "C(t)/N".into(),
        series,
        log_y: false,
    };
    fsutil::atomic_write_str(&spec.output_dir.join("beta_prediction.svg"), &fig.render())?;
    let mut files = files;
    files.push("beta_prediction.svg".into());
    finish(spec, trained, checks, files)
}

fn predict_for(spec: &ExperimentSpec, t: &Trained, recs: &[usize]) -> Result<Vec<f64>> {
    let net = crate::checkpoint::load_model(&spec.output_dir.join(&t.report.model_file))?;
    Ok(predict(&net, &t.dataset, recs)?)
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Regresses the system time `t/N` instead of the complexity.
pub fn run_time_target(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let spec = check_kind(spec, ExperimentKind::TimeTarget)?;
    let jobs: Vec<Job> = spec
        .bases()
        .iter()
        .map(|&basis| Job {
            label: format!("time_{}_cnn", basis.name()),
            basis,
            arch: ArchKind::Cnn,
            betas: spec.betas().to_vec(),
            target: TargetKind::TimeOverN,
        })
        .collect();
    let trained = run_jobs(&spec, &jobs)?;
    let mut checks = Vec::new();
    for t in &trained {
        let w = t.report.windows.as_ref().expect("time-target runs record windows");
        checks.push(Check::new(
            &format!("{}_late_fluctuates", t.report.label),
            w.late_rmse >= 3.0 * w.early_rmse,
            format!("late-window RMSE {:.4} vs 3 x early-window {:.4}", w.late_rmse, 3.0 * w.early_rmse),
        ));
        checks.push(Check::new(
            &format!("{}_t0_anchor", t.report.label),
            w.t0_mean_abs_prediction <= 2.0 * w.early_rmse,
            format!("mean |prediction| at t=0 {:.4} vs 2 x early-window {:.4}", w.t0_mean_abs_prediction, 2.0 * w.early_rmse),
        ));
    }
    finish(spec, trained, checks, Vec::new())
}

/// Evaluation helper shared with the CLI: test metrics plus the baseline.
pub fn evaluate_with_baseline(net: &Network<f32>, ds: &Dataset, split: SplitKind) -> Result<(RmseReport, RmseReport)> {
    Ok((evaluate_rmse(net, ds, split)?, baseline_rmse(ds, split)?))
}
