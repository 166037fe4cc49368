use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
synth_duration = 600
synth_faults = 2
window = 8
hidden = 4
epochs = 2
batch_size = 32
";

fn orbitwatch(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbitwatch"))
        .args(args)
        .args(["--config", dir.join("run.conf").to_str().unwrap()])
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = orbitwatch(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_of(dir: &Path, args: &[&str]) -> String {
    let out = orbitwatch(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn small_run(dir: &Path, extra: &str) {
    fs::write(dir.join("run.conf"), format!("{SMALL}{extra}")).unwrap();
    for cmd in ["synth", "train", "detect", "eval"] {
        ok(dir, &[cmd]);
    }
}

#[test]
fn missing_config_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let err = stderr_of(dir.path(), &["train"]);
    assert!(err.contains("run.conf"), "{err}");
}

#[test]
fn missing_series_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), "series = nowhere.csv\n").unwrap();
    let err = stderr_of(dir.path(), &["train"]);
    assert!(err.contains("nowhere.csv"), "{err}");
}

#[test]
fn bad_config_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), "epochs = 3\nwindow = many\n").unwrap();
    let err = stderr_of(dir.path(), &["train"]);
    assert!(err.contains("line 2"), "{err}");
    fs::write(dir.path().join("run.conf"), "colour = blue\n").unwrap();
    assert!(stderr_of(dir.path(), &["train"]).contains("colour"));
}

#[test]
fn identical_runs_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    small_run(a.path(), "");
    small_run(b.path(), "");
    for f in [
        "wiresum.csv",
        "faults.csv",
        "current.csv",
        "model.json",
        "out/train_report.json",
        "out/anomalies.csv",
        "out/eval_report.json",
        "out/eval_report.txt",
    ] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path(), "");
    let before = fs::read(dir.path().join("model.json")).unwrap();
    ok(dir.path(), &["train", "--set", "seed=99"]);
    assert_ne!(before, fs::read(dir.path().join("model.json")).unwrap());
}

#[test]
fn channel_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path(), "");
    let err = stderr_of(
        dir.path(),
        &["detect", "--set", "series=wiresum.csv,xpos.csv"],
    );
    assert!(
        err.contains("config error") && err.contains("channels"),
        "{err}"
    );
}

#[test]
fn huge_multiplier_flags_nothing() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path(), "threshold_multiplier = 1e6\n");
    let csv = fs::read_to_string(dir.path().join("out/anomalies.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1, "{csv}");
    let report = fs::read_to_string(dir.path().join("out/eval_report.json")).unwrap();
    assert!(report.contains("\"total_anomalies\": 0"));
}

#[test]
fn detect_without_model_fails() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), SMALL).unwrap();
    ok(dir.path(), &["synth"]);
    let err = stderr_of(dir.path(), &["detect"]);
    assert!(err.contains("model.json"), "{err}");
}

#[test]
fn hand_built_eval_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut series = String::from("timestamp,value\n");
    for t in -100..300 {
        series.push_str(&format!("{t},1.0\n"));
    }
    fs::write(d.join("a.csv"), series).unwrap();
    fs::write(d.join("faults.csv"), "start,end,label\n100,100,recorded\n").unwrap();
    fs::create_dir(d.join("out")).unwrap();
    fs::write(d.join("out/anomalies.csv"), "timestamp,error\n95,0.5\n").unwrap();
    fs::write(
        d.join("run.conf"),
        "series = a.csv\ncurrent = none\nscoring_mode = lead_only\n",
    )
    .unwrap();
    let text = ok(d, &["eval"]);
    assert!(text.contains("precision          1.0000"), "{text}");
    assert!(text.contains("recall             1.0000"), "{text}");
    let json = fs::read_to_string(d.join("out/eval_report.json")).unwrap();
    assert!(json.contains("\"true_positives\": 1"));
}
