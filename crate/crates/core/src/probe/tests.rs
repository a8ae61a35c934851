use super::synthetic::{interpolation_stack, PseudoLayerSpec, DEFAULT_WEIGHTS};
use super::*;
use crate::dataset::synth::{generate_raw, SyntheticKind, SyntheticSpec};

fn small_params() -> ProbeParams {
    ProbeParams { grid: GridSpec { min: 0.05, max: 1.95, points: 40 }, ..Default::default() }
}

#[test]
fn alpha_and_tau_agree_per_seed() {
    let raw = generate_raw(&SyntheticSpec::new(SyntheticKind::circles(), 3).with_samples(300)).unwrap();
    let p = probe_layer("input", &raw.features, &raw.class_ids, raw.n_classes, &small_params(), &[0, 1, 2]).unwrap();
    for s in &p.summary.seeds {
        assert!((s.alpha_star - (1.0 / s.tau_star - 0.5)).abs() < 1e-12);
    }
    assert!(p.summary.tau_star.std.is_some());
    assert_eq!(p.curves.len(), 3);
}

#[test]
fn single_seed_has_no_std() {
    let raw = generate_raw(&SyntheticSpec::new(SyntheticKind::spiral(), 1).with_samples(200)).unwrap();
    let p = probe_layer("input", &raw.features, &raw.class_ids, raw.n_classes, &small_params(), &[7]).unwrap();
    assert_eq!(p.summary.tau_star.std, None);
    let json = serde_json::to_value(&p.summary).unwrap();
    assert!(json["tau_star"].get("std").is_none());
    assert_eq!(p.summary.tau_star.min, p.summary.tau_star.max);
}

#[test]
fn one_hot_features_are_near_maximal() {
    let ids: Vec<usize> = (0..200).map(|i| i % 4).collect();
    let x = crate::dataset::one_hot(&ids, 4).unwrap();
    let noise = interpolation_stack(&PseudoLayerSpec { m: 200, ..Default::default() }, &[0.0]).unwrap();
    let p = probe_layer("labels", &x, &ids, 4, &small_params(), &[0]).unwrap();
    let q = probe_layer("noise", &noise.layers[0].features, &ids, 4, &small_params(), &[0]).unwrap();
    assert!(p.summary.degenerate || p.summary.alpha_star.mean > q.summary.alpha_star.mean);
}

#[test]
fn single_layer_stack_matches_probe_layer() {
    let stack = interpolation_stack(&PseudoLayerSpec { m: 200, ..Default::default() }, &[0.5]).unwrap();
    let params = small_params();
    let from_stack = probe_stack(&stack, &params, &[0, 1]).unwrap();
    let direct =
        probe_layer(&stack.layers[0].name, &stack.layers[0].features, &stack.class_ids, 4, &params, &[0, 1]).unwrap();
    assert_eq!(from_stack.len(), 1);
    assert_eq!(from_stack[0].summary, direct.summary);
}

#[test]
fn errors_carry_the_layer_name() {
    let mut stack = interpolation_stack(&PseudoLayerSpec { m: 50, ..Default::default() }, &[0.0, 1.0]).unwrap();
    stack.layers[1].features.set(3, 2, f64::NAN);
    let err = probe_stack(&stack, &small_params(), &[0]).unwrap_err();
    assert!(matches!(&err, Error::Layer { layer, .. } if layer == &stack.layers[1].name), "{err}");
    assert_eq!(err.kind(), crate::ErrorKind::Validation);
}

#[test]
fn lebesgue_measure_rejected_on_wide_layers() {
    let stack = interpolation_stack(&PseudoLayerSpec { m: 50, ..Default::default() }, &[0.5]).unwrap();
    let params = ProbeParams { measure: MeasureMode::LebesgueBoxed, ..small_params() };
    let err = probe_stack(&stack, &params, &[0]).unwrap_err();
    assert_eq!(err.kind(), crate::ErrorKind::Parameter);
}

#[test]
fn report_is_deterministic_apart_from_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let stack = interpolation_stack(&PseudoLayerSpec { m: 150, ..Default::default() }, &DEFAULT_WEIGHTS[..2]).unwrap();
    let params = ProbeParams { clustering_k: Some(4), ..small_params() };
    let a = run_and_write(&stack, &params, &[0, 1], &dir.path().join("a.json"), None).unwrap();
    let b = run_and_write(&stack, &params, &[0, 1], &dir.path().join("b.json"), None).unwrap();
    assert_eq!(a.layers.len(), 2);
    let strip = |r: &ProbeReport| {
        let mut v = serde_json::to_value(r).unwrap();
        v["wall_time_secs"] = 0.into();
        for l in v["layers"].as_array_mut().unwrap() {
            l["curve_files"] = serde_json::Value::Null;
        }
        v
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(a.settings, "trees=3 depth=15 eps=[0.1,0.4]");
    assert!(a.layers[0].clustering.is_some());
    for f in &a.layers[1].curve_files {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn projection_reduces_width_and_is_reported() {
    let stack = interpolation_stack(&PseudoLayerSpec { m: 60, n: 30, ..Default::default() }, &[0.8]).unwrap();
    let params = ProbeParams { projection_dim: Some(8), ..small_params() };
    let p = probe_stack(&stack, &params, &[4]).unwrap();
    assert_eq!(p[0].summary.projection, Some(ProjectionInfo { from: 30, to: 8, seed: 4 }));
    let x = random_projection(&stack.layers[0].features, 8, 4).unwrap();
    assert_eq!((x.rows(), x.cols()), (60, 8));
}

#[test]
fn spread_statistics() {
    let s = Spread::of(&[1.0, 2.0, 3.0]);
    assert_eq!(s.mean, 2.0);
    assert_eq!(s.std, Some(1.0));
    assert_eq!((s.min, s.max), (1.0, 3.0));
}
