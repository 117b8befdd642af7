use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use krylov_core::dataset::{simulate, split_by_sample, SplitKind, TargetKind};
use krylov_core::krylov::ComplexityCurve;
use krylov_core::nn::{train, ArchKind, Network};
use krylov_core::numerics::Rng;
use krylov_core::states::{amplitude_grid, time_grid, Basis, SampleEvolution};
use krylov_lab::checkpoint::{load_model, save_model};
use krylov_lab::config::{ExperimentSpec, Profile, TrainSettings};
use krylov_lab::experiments::{evaluate_with_baseline, run_experiment, SPLIT_STREAM};
use krylov_lab::svg::{heatmap, LinePlot, Series};
use krylov_lab::{export, fsutil, kcx, usage, LabError, Result};

#[derive(Parser)]
#[command(name = "krylov-lab", version, about = "Spread complexity of GUE thermofield-double states and neural regressors for it")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "KRYLOV_LAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a GUE ensemble and write it as a KCX file.
    Gen(GenArgs),
    /// Evolve TFD states, compute complexity curves and build a dataset.
    Complexity(ComplexityArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Evaluate a trained network on one split of a dataset.
    Eval(EvalArgs),
    /// Run a full experiment from a JSON spec.
    Experiment(ExperimentArgs),
    /// Export |Re ψ + Im ψ| over (basis index, time) for one sample.
    Grid(GridArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Matrix dimension N.
    #[arg(long)]
    n: usize,
    /// Number of matrices.
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ComplexityArgs {
    #[arg(long)]
    ensemble: PathBuf,
    /// Inverse temperatures, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    beta: Vec<f64>,
    /// energy, krylov, original or pseudo_random.
    #[arg(long, default_value = "energy")]
    basis: Basis,
    /// complexity_over_n or time_over_n.
    #[arg(long, default_value = "complexity_over_n")]
    target: TargetKind,
    /// Ensemble-mean curve (per β, first β if several).
    #[arg(long)]
    out_csv: PathBuf,
    /// Dataset with a train/val/test split by sample.
    #[arg(long)]
    out_dataset: Option<PathBuf>,
    /// Every individual curve.
    #[arg(long)]
    out_curves: Option<PathBuf>,
    /// One row per dataset record: sample_id, beta, t, target.
    #[arg(long)]
    out_records: Option<PathBuf>,
    #[arg(long)]
    out_svg: Option<PathBuf>,
    /// Train/val/test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
    split: Vec<f64>,
    /// Seed of the split shuffle (default: the ensemble seed).
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    Cnn,
    Fcn,
}

impl From<Arch> for ArchKind {
    fn from(a: Arch) -> Self {
        match a {
            Arch::Cnn => ArchKind::Cnn,
            Arch::Fcn => ArchKind::Fcn,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "cnn")]
    arch: Arch,
    /// JSON training settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    /// Convolution kernel size [default: 5].
    #[arg(long)]
    kernel: Option<usize>,
    /// [default: 100]
    #[arg(long)]
    epochs: Option<usize>,
    /// Minibatch size [default: 32].
    #[arg(long)]
    batch: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    lr: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long)]
    out_history: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// train, val or test.
    #[arg(long, default_value = "test")]
    split: SplitKind,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `train.epochs`.
    #[arg(long)]
    epochs: Option<usize>,
    /// Overrides `train.profile`.
    #[arg(long, value_enum)]
    profile: Option<Profile>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long, default_value_t = 0)]
    sample: usize,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value = "energy")]
    basis: Basis,
    #[arg(long)]
    out_csv: PathBuf,
    #[arg(long)]
    out_svg: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage!("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| usage!("cannot configure thread pool: {e}"))?;
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Complexity(a) => cmd_complexity(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Grid(a) => cmd_grid(a),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            std::fs::create_dir_all(p).map_err(|e| LabError::io(p, e))
        }
        _ => Ok(()),
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let ens = krylov_core::ensemble::GueEnsemble::generate(a.n, a.samples, a.seed)?;
    create_parent(&a.out)?;
    kcx::write_ensemble(&a.out, &ens)?;
    let (lo, hi) = ens.eigenvalues().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), e| (l.min(e), h.max(e)));
    println!(
        "wrote {} GUE matrices (N = {}, seed {}) to {}; eigenvalues in [{lo:.4}, {hi:.4}]",
        ens.len(),
        ens.n,
        ens.seed,
        a.out.display()
    );
    Ok(())
}

fn cmd_complexity(a: ComplexityArgs) -> Result<()> {
    let split: [f64; 3] = a.split.as_slice().try_into().map_err(|_| usage!("--split needs three fractions"))?;
    let ens = kcx::read_ensemble(&a.ensemble)?;
    let times = time_grid(ens.n);
    let (ds, curves) = simulate(&ens, &a.beta, a.basis, a.target, &times)?;
    let ds = split_by_sample(&ds, split, &mut Rng::stream(a.split_seed.unwrap_or(ens.seed), SPLIT_STREAM))?;

    for p in [Some(&a.out_csv), a.out_dataset.as_ref(), a.out_curves.as_ref(), a.out_records.as_ref(), a.out_svg.as_ref()].into_iter().flatten() {
        create_parent(p)?;
    }
    let nb = a.beta.len();
    let per_beta: Vec<Vec<ComplexityCurve>> =
        (0..nb).map(|b| curves.iter().skip(b).step_by(nb).cloned().collect()).collect();
    export::mean_curve_csv(&a.out_csv, &per_beta[0], ens.n)?;
    if let Some(p) = &a.out_curves {
        let labels: Vec<(usize, f64)> = (0..ens.len()).flat_map(|s| a.beta.iter().map(move |&b| (s, b))).collect();
        export::curves_csv(p, &curves, &labels, ens.n)?;
    }
    if let Some(p) = &a.out_dataset {
        kcx::write_dataset(p, &ds)?;
    }
    if let Some(p) = &a.out_records {
        export::dataset_csv(p, &ds)?;
    }
    if let Some(p) = &a.out_svg {
        let mut series = Vec::new();
        for (b, cs) in a.beta.iter().zip(&per_beta) {
            let refs: Vec<&ComplexityCurve> = cs.iter().collect();
            let (mean, std) = krylov_core::krylov::curve_statistics(&refs)?;
            let n = ens.n as f64;
            let pts = times.iter().zip(&mean).map(|(t, c)| (t / n, c / n)).collect();
            series.push(Series::new(format!("β = {b}"), pts).with_errors(std.iter().map(|s| s / n).collect()));
        }
        let fig = LinePlot {
            title: format!("Spread complexity, N = {}, {} samples", ens.n, ens.len()),
            x_label: "t/N".into(),
            y_label: "C(t)/N".into(),
            series,
            log_y: false,
        };
        fsutil::atomic_write_str(p, &fig.render())?;
    }
    println!(
        "{} curves, {} records ({} basis, target {}) -> {}",
        curves.len(),
        ds.len(),
        a.basis,
        a.target,
        a.out_csv.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut s = match &a.config {
        Some(p) => {
            let text = String::from_utf8(fsutil::read(p)?).map_err(|_| usage!("{} is not UTF-8", p.display()))?;
            serde_json::from_str::<TrainSettings>(&text).map_err(|e| usage!("invalid training config: {e}"))?
        }
        None => TrainSettings::default(),
    };
    if let Some(v) = a.profile {
        s.profile = v;
    }
    if let Some(v) = a.kernel {
        s.kernel = v;
    }
    if let Some(v) = a.epochs {
        s.epochs = v;
    }
    if let Some(v) = a.batch {
        s.batch_size = v;
    }
    if let Some(v) = a.lr {
        s.learning_rate = v;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    s.validate()?;
    let ds = kcx::read_dataset(&a.dataset)?;
    s.network_spec(a.arch.into(), ds.meta.n)
        .layers()
        .map_err(|e| usage!("dataset N = {} does not fit the network: {e}", ds.meta.n))?;
    let cfg = s.train_config();
    let mut net = Network::<f32>::glorot(s.network_spec(a.arch.into(), ds.meta.n), &mut cfg.init_rng())?;
    let history = train(&mut net, &ds, &cfg)?;

    create_parent(&a.out_model)?;
    create_parent(&a.out_history)?;
    save_model(&a.out_model, &net)?;
    export::history_csv(&a.out_history, &history)?;
    fsutil::atomic_write_str(&parent_dir(&a.out_model).join("config.json"), &fsutil::to_json(&s))?;
    let last = history.last().expect("at least one epoch");
    println!(
        "trained {} parameters for {} epochs: train loss {:.4e}, val loss {:.4e}",
        net.param_count(),
        history.epochs.len(),
        last.train_loss,
        last.val_loss
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct EvalSummary {
    split: String,
    records: usize,
    rmse: f64,
    time_averaged_rmse: f64,
    baseline_rmse: f64,
    baseline_time_averaged_rmse: f64,
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let net = load_model(&a.model)?;
    let ds = kcx::read_dataset(&a.dataset)?;
    if net.input_width() != ds.record_width() {
        return Err(LabError::format(
            0,
            format!(
                "model expects {} features per record, dataset {} has {} (N = {})",
                net.input_width(),
                a.dataset.display(),
                ds.record_width(),
                ds.meta.n
            ),
        ));
    }
    let records = ds.split_records(a.split)?;
    if records.is_empty() {
        return Err(usage!("split {:?} of {} is empty", a.split, a.dataset.display()));
    }
    let (rep, base) = evaluate_with_baseline(&net, &ds, a.split)?;
    std::fs::create_dir_all(&a.out).map_err(|e| LabError::io(&a.out, e))?;
    let n = ds.meta.n;
    export::rmse_csv(&a.out.join("rmse.csv"), &rep, n)?;
    let summary = EvalSummary {
        split: format!("{:?}", a.split).to_lowercase(),
        records: records.len(),
        rmse: rep.overall,
        time_averaged_rmse: rep.time_averaged,
        baseline_rmse: base.overall,
        baseline_time_averaged_rmse: base.time_averaged,
    };
    fsutil::atomic_write_str(&a.out.join("eval.json"), &fsutil::to_json(&summary))?;
    let xs: Vec<f64> = (0..rep.per_time_bin.len()).map(|i| i as f64 / n as f64).collect();
    let zip = |v: &[f64]| xs.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
    let fig = LinePlot {
        title: format!("Prediction vs truth ({} split)", summary.split),
        x_label: "t/N".into(),
        y_label: match ds.meta.target_kind {
            TargetKind::ComplexityOverN => "C(t)/N".into(),
            TargetKind::TimeOverN => "n/N".into(),
        },
        series: vec![
            Series::new("truth", zip(&rep.mean_target)),
            Series::new("prediction ± RMSE", zip(&rep.mean_prediction)).with_errors(rep.per_time_bin.clone()).dashed(),
        ],
        log_y: false,
    };
    fsutil::atomic_write_str(&a.out.join("prediction.svg"), &fig.render())?;
    println!(
        "Δ = {:.6}  ⟨Δ⟩ = {:.6}  (mean-predictor baseline Δ = {:.6}) over {} records",
        rep.overall, rep.time_averaged, base.overall, summary.records
    );
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut spec = ExperimentSpec::load(&a.spec)?;
    if let Some(o) = a.out {
        spec.output_dir = o;
    }
    if let Some(e) = a.epochs {
        spec.train.epochs = e;
    }
    if let Some(p) = a.profile {
        spec.train.profile = p;
    }
    spec.resolved()?;
    let report = run_experiment(&spec)?;
    for c in &report.configs {
        println!(
            "{:<22} Δ = {:.5}  ⟨Δ⟩ = {:.5}  baseline = {:.5}  ratio = {:.3}",
            c.label,
            c.test_rmse,
            c.test_time_averaged_rmse,
            c.baseline_rmse,
            c.ratio_to_baseline()
        );
    }
    for ch in &report.checks {
        println!("[{}] {}: {}", if ch.passed { "pass" } else { "FAIL" }, ch.name, ch.detail);
    }
    println!("report: {}", spec.output_dir.join("report.json").display());
    Ok(())
}

fn cmd_grid(a: GridArgs) -> Result<()> {
    let ens = kcx::read_ensemble(&a.ensemble)?;
    let h = ens
        .samples
        .get(a.sample)
        .ok_or_else(|| usage!("sample {} out of range (ensemble has {})", a.sample, ens.len()))?;
    let times = time_grid(ens.n);
    let evo = SampleEvolution::compute(h, a.beta, a.sample, &times)?;
    let reference = ens.samples[0].eig().diagonalizer();
    let traj = evo.in_basis(a.basis, h, Some(&reference))?;
    let grid = amplitude_grid(&traj);
    create_parent(&a.out_csv)?;
    export::grid_csv(&a.out_csv, &grid)?;
    if let Some(p) = &a.out_svg {
        create_parent(p)?;
        let title = format!("|Re ψ + Im ψ|, {} basis, β = {}", a.basis, a.beta);
        let x_max = times.last().copied().unwrap_or(0.0) / ens.n as f64;
        let y_max = grid.rows as f64 / ens.n as f64;
        fsutil::atomic_write_str(p, &heatmap(&grid, &title, "t/N", "n/N", x_max, y_max))?;
    }
    println!("{} x {} amplitude grid -> {}", grid.rows, grid.cols, a.out_csv.display());
    Ok(())
}
