use std::path::Path;
use std::process::{Command, Output};

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krylov-lab"))
        .current_dir(dir)
        .env_remove("KRYLOV_LAB_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = lab(dir, args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn gen_validates_and_is_regenerable() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let out = ok(p, &["gen", "--n", "8", "--samples", "5", "--seed", "1", "--out", "a.kcx"]);
    assert!(out.contains("eigenvalues in ["), "{out}");
    ok(p, &["gen", "--n", "8", "--samples", "5", "--seed", "1", "--out", "b.kcx"]);
    assert_eq!(std::fs::read(p.join("a.kcx")).unwrap(), std::fs::read(p.join("b.kcx")).unwrap());
    let e = krylov_lab::kcx::read_ensemble(&p.join("a.kcx")).unwrap();
    assert_eq!(e.len(), 5);

    assert_eq!(code(&lab(p, &["gen", "--samples", "5", "--out", "c.kcx"])), 1);
    assert_eq!(code(&lab(p, &["gen", "--n", "1", "--samples", "5", "--out", "c.kcx"])), 1);
    assert!(!p.join("c.kcx").exists());
}

#[test]
fn help_and_unknown_commands() {
    let d = tempfile::tempdir().unwrap();
    for cmd in [&["--help"][..], &["gen", "--help"], &["complexity", "--help"], &["train", "--help"], &["eval", "--help"], &["experiment", "--help"], &["grid", "--help"]] {
        assert_eq!(code(&lab(d.path(), cmd)), 0, "{cmd:?}");
    }
    assert_eq!(code(&lab(d.path(), &["frobnicate"])), 1);
    assert_eq!(code(&lab(d.path(), &["--threads", "0", "gen", "--n", "4", "--samples", "2", "--out", "x.kcx"])), 1);
}

#[test]
fn complexity_train_eval_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["--threads", "1", "gen", "--n", "16", "--samples", "12", "--seed", "3", "--out", "e.kcx"]);
    ok(
        p,
        &[
            "complexity", "--ensemble", "e.kcx", "--beta", "0", "--basis", "energy", "--out-csv", "c.csv",
            "--out-dataset", "d.kcx", "--out-svg", "c.svg", "--out-curves", "all.csv", "--out-records", "r.csv",
        ],
    );
    let csv = std::fs::read_to_string(p.join("c.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,t_over_N,mean_C_over_N,std_C_over_N"));
    assert!(lines.next().unwrap().starts_with("0.0,0.0,"));
    assert_eq!(csv.lines().count(), 1 + 48);
    let mean: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    let peak = mean.iter().copied().fold(f64::MIN, f64::max);
    let plateau = mean[32..].iter().sum::<f64>() / 16.0;
    assert!(peak > plateau, "peak {peak} plateau {plateau}");
    assert!(std::fs::read_to_string(p.join("c.svg")).unwrap().contains("t/N"));
    assert_eq!(std::fs::read_to_string(p.join("all.csv")).unwrap().lines().count(), 1 + 12 * 48);
    assert!(std::fs::read_to_string(p.join("r.csv")).unwrap().starts_with("sample_id,beta,t,target"));

    assert_eq!(code(&lab(p, &["complexity", "--ensemble", "e.kcx", "--basis", "diagonal", "--out-csv", "x.csv"])), 1);
    assert_eq!(code(&lab(p, &["complexity", "--ensemble", "missing.kcx", "--out-csv", "x.csv"])), 2);

    ok(p, &["train", "--dataset", "d.kcx", "--epochs", "2", "--seed", "5", "--out-model", "m/a.knn", "--out-history", "m/a.csv"]);
    ok(p, &["train", "--dataset", "d.kcx", "--epochs", "2", "--seed", "5", "--out-model", "m/b.knn", "--out-history", "m/b.csv"]);
    let ha = std::fs::read_to_string(p.join("m/a.csv")).unwrap();
    assert_eq!(ha, std::fs::read_to_string(p.join("m/b.csv")).unwrap());
    assert_eq!(ha.lines().next(), Some("epoch,train_loss,val_loss"));
    assert_eq!(ha.lines().count(), 3);
    let echoed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("m/config.json")).unwrap()).unwrap();
    assert_eq!(echoed["kernel"], 5);
    assert_eq!(echoed["batch_size"], 32);
    assert_eq!(echoed["epochs"], 2);

    std::fs::write(p.join("cfg.json"), r#"{"epochs": 1, "kernel": 7}"#).unwrap();
    ok(p, &["train", "--dataset", "d.kcx", "--config", "cfg.json", "--kernel", "3", "--out-model", "n/c.knn", "--out-history", "n/c.csv"]);
    let echoed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("n/config.json")).unwrap()).unwrap();
    assert_eq!((echoed["epochs"].as_u64(), echoed["kernel"].as_u64()), (Some(1), Some(3)));
    assert_eq!(code(&lab(p, &["train", "--dataset", "d.kcx", "--kernel", "9", "--out-model", "x.knn", "--out-history", "x.csv"])), 1);
    assert_eq!(code(&lab(p, &["train", "--dataset", "d.kcx", "--epochs", "0", "--out-model", "x.knn", "--out-history", "x.csv"])), 1);
    assert_eq!(code(&lab(p, &["train", "--dataset", "d.kcx", "--lr", "1e30", "--out-model", "x.knn", "--out-history", "x.csv"])), 3);

    let out = ok(p, &["eval", "--model", "m/a.knn", "--dataset", "d.kcx", "--split", "test", "--out", "ev"]);
    assert!(out.contains('Δ'), "{out}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("ev/eval.json")).unwrap()).unwrap();
    assert!(summary["rmse"].as_f64().unwrap().is_finite());
    assert!(p.join("ev/rmse.csv").exists() && p.join("ev/prediction.svg").exists());

    ok(p, &["gen", "--n", "20", "--samples", "10", "--out", "e6.kcx"]);
    ok(p, &["complexity", "--ensemble", "e6.kcx", "--out-csv", "c6.csv", "--out-dataset", "d6.kcx"]);
    assert_eq!(code(&lab(p, &["eval", "--model", "m/a.knn", "--dataset", "d6.kcx", "--out", "ev6"])), 2);
    let mut all_train = krylov_lab::kcx::read_dataset(&p.join("d.kcx")).unwrap();
    let split = all_train.split.as_mut().unwrap();
    split.train = (0..12).collect();
    split.val.clear();
    split.test.clear();
    krylov_lab::kcx::write_dataset(&p.join("all_train.kcx"), &all_train).unwrap();
    assert_eq!(code(&lab(p, &["eval", "--model", "m/a.knn", "--dataset", "all_train.kcx", "--split", "test", "--out", "ev"])), 1);
    std::fs::write(p.join("junk.knn"), b"KNN0junk").unwrap();
    assert_eq!(code(&lab(p, &["eval", "--model", "junk.knn", "--dataset", "d.kcx", "--out", "ev"])), 2);
}

#[test]
fn grid_exports_heatmap() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["gen", "--n", "6", "--samples", "2", "--out", "e.kcx"]);
    for basis in ["energy", "krylov", "original", "pseudo_random"] {
        ok(p, &["grid", "--ensemble", "e.kcx", "--basis", basis, "--sample", "1", "--out-csv", "g.csv", "--out-svg", "g.svg"]);
        assert_eq!(std::fs::read_to_string(p.join("g.csv")).unwrap().lines().count(), 1 + 6 * 18);
    }
    assert_eq!(code(&lab(p, &["grid", "--ensemble", "e.kcx", "--sample", "5", "--out-csv", "g.csv"])), 1);
}

#[test]
fn experiment_runs_and_reruns_identically() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(
        p.join("spec.json"),
        r#"{"kind":"basis_sweep","n":16,"m":10,"seed":2,"bases":["energy","pseudo_random"],"train":{"epochs":2},"output_dir":"run1"}"#,
    )
    .unwrap();
    ok(p, &["experiment", "--spec", "spec.json"]);
    ok(p, &["experiment", "--spec", "spec.json", "--out", "run2"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("run1/report.json")).unwrap()).unwrap();
    let labels: Vec<&str> = report["configs"].as_array().unwrap().iter().map(|c| c["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["energy_cnn", "pseudo_random_cnn", "pseudo_random_fcn"]);
    for f in report["files"].as_array().unwrap() {
        assert!(p.join("run1").join(f.as_str().unwrap()).exists(), "{f}");
    }
    for f in ["summary.csv", "energy_cnn_history.csv", "pseudo_random_fcn_rmse.csv"] {
        assert_eq!(std::fs::read(p.join("run1").join(f)).unwrap(), std::fs::read(p.join("run2").join(f)).unwrap(), "{f}");
    }
    let cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("run1/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["train"]["kernel"], 5);
    assert_eq!(cfg["betas"], serde_json::json!([0.0]));

    std::fs::write(p.join("bad.json"), r#"{"kind":"nope","n":8,"m":10,"seed":1,"output_dir":"o"}"#).unwrap();
    assert_eq!(code(&lab(p, &["experiment", "--spec", "bad.json"])), 1);
    assert_eq!(code(&lab(p, &["experiment", "--spec", "missing.json"])), 2);
}
