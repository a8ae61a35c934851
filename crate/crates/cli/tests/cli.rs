use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsity-probe"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).env_remove("SPARSITY_PROBE_THREADS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["synth", "--kind", "circles", "--m", "1000", "--seed", "1", "--out", "a"], dir.path());
    let b = run(&["synth", "--kind", "circles", "--m", "1000", "--seed", "1", "--out", "b"], dir.path());
    assert!(a.status.success() && b.status.success());
    let da: Value = serde_json::from_str(&stdout(&a)).unwrap();
    let db: Value = serde_json::from_str(&stdout(&b)).unwrap();
    assert_eq!(da["digest"], db["digest"]);
    assert_eq!(da["files"], db["files"]);
    for f in ["data.csv", "manifest.json", "labels.i32", "layer00.f32"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }
}

#[test]
fn synth_rejects_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--kind", "spiral", "--m", "0", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "parameter");
}

#[test]
fn gq_probe_matches_reference_level() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["synth", "--kind", "gq", "--m", "500", "--out", "d"], dir.path()).status.success());
    let o = run(&["probe-dataset", "d", "--out", "r.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("trees=3 depth=15 eps=[0.1,0.4]"));
    let r = report(&dir.path().join("r.json"));
    assert_eq!(r["settings"], "trees=3 depth=15 eps=[0.1,0.4]");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    let tau = r["layers"][0]["tau_star"]["mean"].as_f64().unwrap();
    assert!((tau - 0.99).abs() <= 0.08, "{tau}");
    assert!(r["layers"][0]["tau_star"]["std"].is_number());
    let curves = r["layers"][0]["curve_files"].as_array().unwrap();
    assert_eq!(curves.len(), 3);
    assert!(dir.path().join(curves[0].as_str().unwrap()).exists());
}

#[test]
fn single_seed_omits_std() {
    let dir = tempfile::tempdir().unwrap();
    run(&["synth", "--kind", "spiral", "--m", "200", "--out", "d"], dir.path());
    let o = run(&["probe-dataset", "d", "--seeds", "1", "--out", "r.json"], dir.path());
    assert!(o.status.success());
    let r = report(&dir.path().join("r.json"));
    assert!(r["layers"][0]["tau_star"].get("std").is_none());
    assert!(r["layers"][0]["alpha_star"].get("std").is_none());
    assert_eq!(r["seeds"].as_array().unwrap().len(), 1);
}

#[test]
fn lebesgue_measure_on_wide_data_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = "x0,x1,x2,label\n0,0,0,0\n1,0,1,1\n0,1,1,0\n1,1,0,1\n";
    std::fs::write(dir.path().join("d.csv"), csv).unwrap();
    let o = run(&["probe-dataset", "d.csv", "--measure", "lebesgue-boxed"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["probe-dataset", "d.csv", "--seeds", "1", "--out", "ok.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn non_finite_input_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "x0,label\n0.5,0\nNaN,1\n0.2,1\n").unwrap();
    let o = run(&["probe-dataset", "d.csv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"]["kind"], "validation");
}

#[test]
fn mismatched_layer_names_the_layer() {
    let dir = tempfile::tempdir().unwrap();
    run(&["synth", "--kind", "spiral", "--m", "50", "--out", "d"], dir.path());
    let manifest_path = dir.path().join("d/manifest.json");
    let mut manifest: Value = serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    // A second layer with fewer rows than there are labels.
    let bytes = std::fs::read(dir.path().join("d/layer00.f32")).unwrap();
    std::fs::write(dir.path().join("d/short.f32"), &bytes[..40 * 2 * 4]).unwrap();
    manifest["layers"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({"name": "short", "file": "short.f32", "rows": 40, "cols": 2}));
    std::fs::write(&manifest_path, manifest.to_string()).unwrap();
    let o = run(&["probe-stack", "d/manifest.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["layer"], "short");
}

#[test]
fn missing_manifest_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["probe-stack", "nowhere/manifest.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_json(&o)["error"]["message"].as_str().unwrap().contains("nowhere"));
}

#[test]
fn oracle_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["oracle", "--shape", "disc", "--tau", "1.5", "--levels", "20"], dir.path());
    assert!(stdout(&o).contains("verdict=convergent"), "{}", stdout(&o));
    let o = run(&["oracle", "--shape", "disc", "--tau", "0.8", "--levels", "20", "--out", "o"], dir.path());
    assert!(stdout(&o).contains("verdict=divergent"));
    assert!(dir.path().join("o/level_sums.csv").exists());
    assert!(dir.path().join("o/boundary_counts.csv").exists());
    let o = run(&["oracle", "--cubes", "3", "--tau", "0.1"], dir.path());
    let text = stdout(&o);
    assert!(text.contains("finite, nonzero atoms = "), "{text}");
    let n: usize = text.split("nonzero atoms = ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(n <= 16);
}

#[test]
fn cluster_prints_indices_per_layer() {
    let dir = tempfile::tempdir().unwrap();
    run(&["synth", "--kind", "clusters", "--m", "300", "--out", "d"], dir.path());
    let o = run(&["cluster", "d"], dir.path());
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let idx = &v[0]["indices"];
    for key in ["ari", "ami", "homogeneity", "completeness", "fowlkes_mallows", "silhouette"] {
        assert!(idx.get(key).is_some(), "{key}");
    }
}

#[test]
fn thread_count_does_not_change_the_report() {
    let dir = tempfile::tempdir().unwrap();
    run(&["synth", "--kind", "circles", "--m", "300", "--out", "d"], dir.path());
    let a = run(&["--threads", "1", "probe-dataset", "d", "--out", "a.json"], dir.path());
    let b = bin()
        .args(["probe-dataset", "d", "--out", "b.json"])
        .current_dir(dir.path())
        .env("SPARSITY_PROBE_THREADS", "4")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    let strip = |p: &str| {
        let mut v = report(&dir.path().join(p));
        v["wall_time_secs"] = Value::Null;
        for l in v["layers"].as_array_mut().unwrap() {
            l["curve_files"] = Value::Null;
        }
        v
    };
    assert_eq!(strip("a.json"), strip("b.json"));
}

#[test]
fn unknown_arguments_exit_two_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["probe-dataset"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "argument");
    let o = run(&["synth", "--kind", "moons", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
