use nlh_core::harness::config::{config_hash, LoadedConfig};
use nlh_core::harness::run::run;
use std::path::PathBuf;

const HEAT: &str = r#"{ "type": "fractional_heat", "params": { "n": 1, "alpha": 0.5, "lambda": 5.02 } }"#;

fn load(src: &str) -> LoadedConfig {
    LoadedConfig::from_bytes(src.as_bytes(), PathBuf::from(".")).unwrap()
}

#[test]
fn check_kernel_manifest() {
    let src = format!(r#"{{ "experiment": "check-kernel", "kernel": {HEAT} }}"#);
    let dir = tempfile::tempdir().unwrap();
    let m = run(&load(&src), dir.path(), None).unwrap();
    assert!(m.pass);
    assert_eq!(m.config_hash, config_hash(src.as_bytes()));
    assert!(m.files.iter().any(|f| f.ends_with("condition_report.json")));
    for f in &m.files {
        assert!(f.exists(), "{}", f.display());
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let src = format!(
        r#"{{ "experiment": "solve-linear", "kernel": {HEAT}, "grid": {{ "radius": 8, "n_points": 256 }},
            "time": {{ "t_end": 0.5 }}, "initial": "exp(-x^2) * cos(3*x)", "beta": 0.2 }}"#
    );
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ma, mb) = (run(&load(&src), a.path(), Some(5)).unwrap(), run(&load(&src), b.path(), Some(5)).unwrap());
    assert!(ma.pass && mb.pass);
    for name in ["norms.csv", "steps.csv", "frames.bin"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn bad_alpha_names_the_field() {
    let src = r#"{ "experiment": "check-kernel", "kernel": { "type": "fractional_heat", "params": { "alpha": 2.5, "lambda": 4 } } }"#;
    let e = LoadedConfig::from_bytes(src.as_bytes(), PathBuf::from(".")).unwrap_err().to_string();
    assert!(e.contains("alpha") && e.contains("(0, 2)"), "{e}");
}

#[test]
fn unknown_fields_are_rejected() {
    let src = r#"{ "experiment": "check-kernel", "kernal": {} }"#;
    let e = LoadedConfig::from_bytes(src.as_bytes(), PathBuf::from(".")).unwrap_err().to_string();
    assert!(e.contains("kernal"), "{e}");
}

#[test]
fn calibrate_then_track() {
    let dir = tempfile::tempdir().unwrap();
    let cal = format!(
        r#"{{ "experiment": "calibrate", "kernel": {HEAT}, "grid": {{ "radius": 8, "n_points": 2048 }},
            "ensemble": {{ "count": 6, "seed": 11, "radii": [0.25, 0.5, 1.0] }} }}"#
    );
    let m = run(&load(&cal), &dir.path().join("cal"), None).unwrap();
    assert!(m.pass, "{:?}", m.summary);
    let constants = dir.path().join("cal/constants.json");
    assert!(constants.exists());
    let track = format!(
        r#"{{ "experiment": "track-evolution", "kernel": {HEAT}, "grid": {{ "radius": 8, "n_points": 2048 }},
            "ensemble": {{ "count": 3, "seed": 12, "radii": [0.25, 0.5, 1.0] }}, "constants_file": {:?} }}"#,
        constants.to_str().unwrap()
    );
    let m = run(&load(&track), &dir.path().join("track"), None).unwrap();
    assert!(m.pass, "{:?}", m.summary);
    assert_eq!(m.files.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")).count(), 3);
}
