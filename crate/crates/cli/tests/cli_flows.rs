//! End-to-end flows through the compiled binary: exit codes, the
//! attack -> detect -> undo pipeline, CSV outputs, config validation, and
//! experiment resume/parallelism behavior.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_malinit"))
}

fn ok(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&output.stderr),
        String::from_utf8_lossy(&output.stdout)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn write_tensor(path: &Path, rows: usize, cols: usize, seed: u64) {
    use malinit_core::init::{init_layer, BiasPolicy, InitKind, InitializerSpec};
    use malinit_core::rng::Rng;
    let spec = InitializerSpec { kind: InitKind::He, bias_policy: BiasPolicy::Zero };
    let (w, _) = init_layer(&spec, &[rows, cols], &mut Rng::new(seed)).unwrap();
    malinit::container::write_tensor(path, &w).unwrap();
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let output = bin().output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let text = String::from_utf8_lossy(&output.stderr);
    assert!(text.contains("Usage"), "{text}");
}

#[test]
fn unknown_flag_exits_1_runtime_failure_exits_2() {
    let output = bin().args(["analyze", "--nope"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    // Runtime failure: unreadable input file.
    let output = bin()
        .args(["detect", "--in", "/nonexistent/w.bin", "--out", "/tmp/x"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).starts_with("error:"));
}

#[test]
fn attack_then_detect_flags_tensor_and_undo_clears_it() {
    let dir = tempfile::tempdir().unwrap();
    let w_path = dir.path().join("w.bin");
    write_tensor(&w_path, 64, 64, 42);
    let before = fs::read(&w_path).unwrap();

    let atk_path = dir.path().join("w_atk.bin");
    ok(&bin()
        .args(["attack", "--kind", "shift", "--s", "8"])
        .arg("--in")
        .arg(&w_path)
        .arg("--out")
        .arg(&atk_path)
        .output()
        .unwrap());
    // Inputs are never mutated.
    assert_eq!(before, fs::read(&w_path).unwrap());

    let report_dir = dir.path().join("report");
    let stdout = ok(&bin()
        .args(["detect"])
        .arg("--in")
        .arg(&atk_path)
        .arg("--out")
        .arg(&report_dir)
        .output()
        .unwrap());
    assert!(stdout.contains("suspicious"), "{stdout}");
    let report = fs::read_to_string(report_dir.join("report.json")).unwrap();
    assert!(report.contains("\"verdict\": \"suspicious\""));
    let pgm = fs::read(report_dir.join("layer_000.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n64 64\n255\n"));

    // Clean tensor comes back clean.
    let clean_dir = dir.path().join("clean_report");
    let stdout = ok(&bin()
        .args(["detect"])
        .arg("--in")
        .arg(&w_path)
        .arg("--out")
        .arg(&clean_dir)
        .output()
        .unwrap());
    assert!(stdout.contains("clean"), "{stdout}");

    // Shuffle remediation clears the verdict.
    let fixed = dir.path().join("w_fixed.bin");
    ok(&bin()
        .args(["undo", "--seed", "3"])
        .arg("--in")
        .arg(&atk_path)
        .arg("--out")
        .arg(&fixed)
        .output()
        .unwrap());
    let fixed_dir = dir.path().join("fixed_report");
    let stdout = ok(&bin()
        .args(["detect"])
        .arg("--in")
        .arg(&fixed)
        .arg("--out")
        .arg(&fixed_dir)
        .output()
        .unwrap());
    assert!(stdout.contains("clean"), "{stdout}");
}

#[test]
fn analyze_emits_expected_csv_row() {
    let output = ok(&bin()
        .args([
            "analyze",
            "--r",
            "0.5",
            "--n",
            "100",
            "--bias-ratio",
            "0",
            "--sharpness",
            "0.3333333333333333",
        ])
        .output()
        .unwrap());
    let mut lines = output.lines();
    assert_eq!(
        lines.next().unwrap(),
        "r,n,bias_ratio,sharpness,p_zero_small_block,p_zero_large_block"
    );
    let row = lines.next().unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    let p_small: f64 = fields[4].parse().unwrap();
    let p_large: f64 = fields[5].parse().unwrap();
    assert!(p_small > 0.999999, "{row}");
    assert!(p_large < 1e-6, "{row}");
}

#[test]
fn montecarlo_matches_analytic_columns() {
    let output = ok(&bin()
        .args(["montecarlo", "--r", "0.5", "--n", "100", "--trials", "20000", "--rows", "32"])
        .output()
        .unwrap());
    let row = output.lines().nth(1).unwrap();
    let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
    let (mc_small, mc_large, an_small, an_large) = (fields[5], fields[6], fields[7], fields[8]);
    assert!((mc_small - an_small).abs() <= 0.02, "{row}");
    assert!((mc_large - an_large).abs() <= 0.02, "{row}");
}

#[test]
fn knockout_from_widths_reports_reduction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ko");
    let stdout = ok(&bin()
        .args(["knockout", "--widths", "14,7,7,2", "--iterations", "200", "--seed", "5"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    assert!(stdout.contains("norms preserved"), "{stdout}");
    assert!(out.join("objective_trace.csv").is_file());
    assert!(out.join("free_000.mlnt").is_file());
}

fn experiment_config(dir: &Path, seeds: usize, epochs: usize) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "dataset": {"kind": "blobs", "classes": 3, "dim": 8, "per_class": 40, "separation": 6.0, "seed": 7},
        "network": {"layers": [
            {"type": "dense", "width": 16},
            {"type": "dense", "width": 3}
        ], "bias": 0.1},
        "train": {"optimizer": "adam", "lr": 0.01, "epochs": epochs, "batch_size": 16},
        "attack": {"kind": "shift", "s": 2},
        "seeds": {"base": 1, "count": seeds}
    });
    let path = dir.join("cfg.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn experiment_outputs_are_paired_and_job_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment_config(dir.path(), 4, 6);
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    ok(&bin()
        .args(["experiment", "--jobs", "1"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out1)
        .output()
        .unwrap());
    ok(&bin()
        .args(["experiment", "--jobs", "4"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out2)
        .output()
        .unwrap());
    for variant in ["baseline", "attack"] {
        let strip_wall = |dir: &Path| {
            let text = fs::read_to_string(dir.join(variant).join("records.csv")).unwrap();
            text.lines()
                .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
                .collect::<Vec<_>>()
        };
        assert_eq!(strip_wall(&out1), strip_wall(&out2), "{variant} differs across job counts");
        for f in ["records.csv", "kde_accuracy.csv", "hist_epoch.csv"] {
            assert!(out1.join(variant).join(f).is_file(), "missing {variant}/{f}");
        }
    }
    assert!(out1.join("manifest.json").is_file());
    // Paired: same seed column in both variants.
    let seeds = |variant: &str| {
        fs::read_to_string(out1.join(variant).join("records.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(seeds("baseline"), seeds("attack"));
}

#[test]
fn experiment_resumes_from_per_seed_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment_config(dir.path(), 3, 5);
    let out = dir.path().join("resume");
    ok(&bin()
        .args(["experiment"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    let marker = out.join("baseline/seeds/seed_00001.json");
    // Overwrite one stored record's accuracy: a resumed run must keep it
    // (skip the seed), proving completed seeds are not recomputed.
    let mut rec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&marker).unwrap()).unwrap();
    rec["best_accuracy"] = serde_json::json!(0.123456);
    fs::write(&marker, serde_json::to_string_pretty(&rec).unwrap()).unwrap();
    ok(&bin()
        .args(["experiment"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    let records = fs::read_to_string(out.join("baseline/records.csv")).unwrap();
    assert!(records.contains("0.123456"), "resume recomputed a completed seed:\n{records}");
}

#[test]
fn config_with_unknown_key_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"dataset": {"kind": "blobs", "classes": 3, "dim": 8, "per_class": 10, "separation": 4.0},
           "network": {"layers": [{"type": "dense", "width": 3}]},
           "train": {"epochs": 1},
           "unknown_key": true}"#,
    )
    .unwrap();
    let output = bin().args(["train"]).arg("--config").arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("unknown_key") || err.contains("unknown field"), "{err}");
}

#[test]
fn train_writes_checkpoint_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "dataset": {"kind": "blobs", "classes": 3, "dim": 8, "per_class": 40, "separation": 6.0, "seed": 7},
        "network": {"layers": [{"type": "dense", "width": 16}, {"type": "dense", "width": 3}]},
        "train": {"epochs": 5, "lr": 0.01, "seed": 2}
    });
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = dir.path().join("train");
    ok(&bin()
        .args(["train"])
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    assert!(out.join("checkpoint/manifest.json").is_file());
    assert!(out.join("checkpoint/layer_000.weight.mlnt").is_file());
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 7, "{trace}"); // header + epochs 0..=5
}

#[test]
fn malinit_seed_env_overrides_base() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment_config(dir.path(), 2, 2);
    let out = dir.path().join("env");
    let output = bin()
        .args(["experiment"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("MALINIT_SEED", "100")
        .output()
        .unwrap();
    ok(&output);
    let records = fs::read_to_string(out.join("baseline/records.csv")).unwrap();
    assert!(records.lines().nth(1).unwrap().starts_with("100,"), "{records}");
    assert!(records.lines().nth(2).unwrap().starts_with("101,"), "{records}");
}
