use std::fs;
use std::path::Path;

use koopdamp::pipeline::{run_all, run_closed_loop, run_evaluate, run_fit, run_open_loop, ExperimentPlan, RunManifest};
use koopdamp::spectral::DictionaryKind;
use koopdamp::thermal::ScenarioConfig;
use koopdamp::Error;

fn plan_in(dir: &Path, scenario: &ScenarioConfig, dicts: Vec<DictionaryKind>) -> ExperimentPlan {
    let path = dir.join("scenario.in.toml");
    fs::write(&path, scenario.to_toml_string().unwrap()).unwrap();
    let mut plan = ExperimentPlan {
        scenario: Some(path),
        dictionaries: dicts,
        out_dir: dir.join("run"),
        ..ExperimentPlan::default()
    };
    plan.calibration.t_end_s = scenario.run.duration_s;
    plan
}

fn short() -> ScenarioConfig {
    let mut s = ScenarioConfig::default();
    s.run.duration_s = 7200.0;
    s
}

#[test]
fn linear_only_marks_comparison_absent() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_all(&plan_in(dir.path(), &short(), vec![DictionaryKind::Linear]), false).unwrap();
    assert!(m.results.comparison.is_none());
    assert!(m.results.comparison_absent.is_some());
    assert!(m.results.control.contains_key("linear"));
    m.verify(&dir.path().join("run")).unwrap();
}

#[test]
fn identical_plans_give_identical_manifests() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let dicts = vec![DictionaryKind::CubicMonomial, DictionaryKind::Linear];
    let ma = run_all(&plan_in(a.path(), &short(), dicts.clone()), false).unwrap();
    let mb = run_all(&plan_in(b.path(), &short(), dicts), false).unwrap();
    assert_eq!(ma.to_toml().unwrap(), mb.to_toml().unwrap());
    let loaded = RunManifest::load(&a.path().join("run")).unwrap();
    assert_eq!(loaded, ma);
}

#[test]
fn existing_run_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let plan = plan_in(dir.path(), &short(), vec![DictionaryKind::Linear]);
    run_open_loop(&plan, false).unwrap();
    assert!(matches!(run_open_loop(&plan, false), Err(Error::Usage(_))));
    assert!(matches!(run_all(&plan, false), Err(Error::Usage(_))));
    run_open_loop(&plan, true).unwrap();
}

#[test]
fn stages_run_separately_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let plan = plan_in(dir.path(), &short(), vec![DictionaryKind::Linear]);
    assert!(matches!(run_fit(&plan, false), Err(Error::Usage(_))));
    run_open_loop(&plan, false).unwrap();
    assert!(matches!(run_evaluate(&plan, false), Err(Error::Usage(_))));
    run_fit(&plan, false).unwrap();
    run_closed_loop(&plan, false).unwrap();
    let m = run_evaluate(&plan, false).unwrap();
    assert!(m.results.evaluate.contains_key("linear"));

    // refitting drops everything downstream
    let m = run_fit(&plan, true).unwrap();
    assert!(m.results.control.is_empty() && m.results.evaluate.is_empty());
    assert!(!m.has_stage("control"));
}

#[test]
fn tampered_artifact_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let plan = plan_in(dir.path(), &short(), vec![DictionaryKind::Linear]);
    run_open_loop(&plan, false).unwrap();
    let csv = dir.path().join("run/open_loop.csv");
    let mut text = fs::read_to_string(&csv).unwrap();
    text.push('\n');
    fs::write(&csv, text).unwrap();
    assert!(run_fit(&plan, false).is_err());
}

#[test]
fn quiet_room_reports_failing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = short();
    s.ptac.enabled = false;
    match run_all(&plan_in(dir.path(), &s, vec![DictionaryKind::Linear]), false) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, "fit");
            assert!(matches!(*source, Error::ModeNotFound { .. } | Error::Numerical(_) | Error::DegenerateData(_)), "{source}");
        }
        other => panic!("expected a fit failure, got {other:?}"),
    }
}

#[test]
fn unknown_plan_keys_are_rejected() {
    assert!(ExperimentPlan::from_toml("bogus = 1").is_err());
}
