mod common;

use common::{config, determinism_config, emit_bytes, noise_free_config};
use std::path::Path;

use jpdf::harness::{emit_experiment, emit_results, load_config, parse_config, run_experiment, run_trials};
use jpdf::metrics::{SerCurve, SER_CSV_HEADER};
use jpdf::Error;

#[test]
fn noise_free_runs_are_error_free() {
    for name in ["BPSK", "16-QAM"] {
        let cfg = noise_free_config(name, true);
        for t in run_trials(&cfg, 0).unwrap() {
            for rr in &t {
                assert!(rr.errors[cfg.training..].iter().all(|e| !e), "{name} {}", rr.label);
            }
        }
    }
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    assert_eq!(emit_bytes(&determinism_config(1)), emit_bytes(&determinism_config(3)));
}

#[test]
fn seed_changes_results() {
    let a = determinism_config(1);
    let mut b = a.clone();
    b.seed += 1;
    assert_ne!(emit_bytes(&a), emit_bytes(&b));
}

#[test]
fn emitted_files_have_expected_layout() {
    let cfg = determinism_config(2);
    let res = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_experiment(&res, dir.path(), &cfg).unwrap();
    let csv = std::fs::read_to_string(&files.ser).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(SER_CSV_HEADER));
    // 3 receivers × 2 sweep points
    assert_eq!(lines.count(), 6);
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files.sidecar).unwrap()).unwrap();
    assert_eq!(side["config"]["seed"], 1111);
    assert_eq!(side["config"]["constellation"], "16-QAM");
    assert!(files.learning.is_none());
}

#[test]
fn learning_curve_written_without_sweep() {
    let cfg = noise_free_config("BPSK", false);
    let res = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_experiment(&res, dir.path(), &cfg).unwrap();
    let learning = std::fs::read_to_string(files.learning.unwrap()).unwrap();
    assert_eq!(learning.lines().count(), 1 + cfg.symbols);
}

#[test]
fn empty_curve_is_refused() {
    let cfg = determinism_config(1);
    let dir = tempfile::tempdir().unwrap();
    let err = emit_results(&[] as &[SerCurve], &dir.path().join("x.csv"), &cfg).unwrap_err();
    assert!(matches!(err, Error::Contract(_)));
}

#[test]
fn syntax_errors_carry_position() {
    match parse_config("seed = 1\nruns = = 3\n") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn unknown_keys_and_bad_values_are_reported() {
    assert!(matches!(parse_config("sede = 1\n"), Err(Error::Parse { .. })));
    let err = parse_config("runs = 0\ntraining = 5000\n").unwrap_err();
    match err {
        Error::Validation(v) => assert!(v.len() >= 2, "{v:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn defaults_follow_constellation() {
    let b = config("constellation = \"BPSK\"\nalgorithm = \"MSER-JPDF\"\n");
    let q = config("constellation = \"16-QAM\"\nalgorithm = \"MSER-JPDF\"\n");
    assert_eq!(b.channel.users, 6);
    assert_eq!(q.channel.users, 3);
    assert_eq!(b.channel.antennas, 40);
    assert_eq!(b.channel.window, 3);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            load_config(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 3);
}
