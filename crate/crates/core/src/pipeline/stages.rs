use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::DMatrix;

use super::manifest::{
    sha256_hex, Comparison, ControlResults, EvaluateResults, FitResults, OpenLoopResults, RunManifest, MANIFEST_FILE,
};
use super::plan::ExperimentPlan;
use super::{amplitude_metric, dominant_period};
use crate::control::{self, calibrate_d, save_input_log, ControllerConfig};
use crate::error::{Error, Result};
use crate::levelset::{damping_metric, invariance_metric, poincare_project, rasterize_level_sets, SliceSpec};
use crate::spectral::{build_snapshots, fit, select_oscillatory_mode, Dictionary, DictionaryKind, Eigenfunction};
use crate::thermal::{extract_probe_state, simulate, Scenario, ScenarioConfig, Trajectory};

pub const STAGES: [&str; 4] = ["simulate", "fit", "control", "evaluate"];

const PLAN_FILE: &str = "plan.toml";
const SCENARIO_FILE: &str = "scenario.toml";
const EXOGENOUS_FILE: &str = "exogenous.csv";
const OPEN_LOOP_FILE: &str = "open_loop.csv";
const SETUP: &str = "setup";

fn fit_dir(kind: DictionaryKind) -> String {
    format!("fit/{kind}")
}

fn control_dir(kind: DictionaryKind) -> String {
    format!("control/{kind}")
}

fn eval_dir(kind: DictionaryKind) -> String {
    format!("evaluate/{kind}")
}

/// A run directory opened for one stage.
struct Run {
    dir: PathBuf,
    plan: ExperimentPlan,
    manifest: RunManifest,
}

impl Run {
    fn scenario_config(&self) -> Result<ScenarioConfig> {
        ScenarioConfig::load(&self.manifest.input(&self.dir, SCENARIO_FILE)?)
    }

    fn scenario(&self) -> Result<Scenario> {
        self.scenario_config()?.resolve()
    }

    fn trajectory(&self, rel: &str, theta_ref: f64) -> Result<Trajectory> {
        Trajectory::load(&self.manifest.input(&self.dir, rel)?, theta_ref)
    }

    fn eigenfunction(&self, kind: DictionaryKind) -> Result<Eigenfunction> {
        Eigenfunction::load(&self.manifest.input(&self.dir, &format!("{}/eigenfunction.toml", fit_dir(kind)))?)
    }

    fn record(&mut self, rel: &str, stage: &str) -> Result<()> {
        self.manifest.record(&self.dir, rel, stage)
    }

    fn mkdir(&self, rel: &str) -> Result<PathBuf> {
        let p = self.dir.join(rel);
        std::fs::create_dir_all(&p)?;
        Ok(p)
    }

    fn save(&self) -> Result<()> {
        self.manifest.save(&self.dir)
    }
}

/// Self-contained copies of the plan and scenario as stored in the run directory.
fn portable_inputs(plan: &ExperimentPlan) -> Result<(ExperimentPlan, ScenarioConfig, Option<PathBuf>)> {
    let mut scenario = plan.scenario_config()?;
    plan.validate(&scenario)?;
    scenario.resolve()?;
    let exogenous = scenario.exogenous.file.take();
    if exogenous.is_some() {
        scenario.exogenous.file = Some(PathBuf::from(EXOGENOUS_FILE));
    }
    let stored = ExperimentPlan { scenario: Some(PathBuf::from(SCENARIO_FILE)), out_dir: PathBuf::from("."), ..plan.clone() };
    Ok((stored, scenario, exogenous))
}

fn config_hash(plan_text: &str, scenario_text: &str, exogenous: Option<&[u8]>) -> String {
    let mut all = Vec::new();
    all.extend_from_slice(plan_text.as_bytes());
    all.extend_from_slice(scenario_text.as_bytes());
    if let Some(e) = exogenous {
        all.extend_from_slice(e);
    }
    sha256_hex(&all)
}

fn refuse(dir: &Path, what: &str) -> Error {
    Error::Usage(format!("{} already holds {what}; pass --force to overwrite", dir.display()))
}

/// Opens (or creates) the run directory for `stage`, dropping results of this stage and
/// everything downstream.
fn open_stage(plan: &ExperimentPlan, stage: &'static str, force: bool) -> Result<Run> {
    let dir = plan.out_dir.clone();
    let existing = dir.join(MANIFEST_FILE).exists().then(|| RunManifest::load(&dir)).transpose()?;
    let mut run = if stage == STAGES[0] {
        let (stored, scenario, exogenous) = portable_inputs(plan)?;
        let plan_text = stored.to_toml()?;
        let scenario_text = scenario.to_toml_string()?;
        let exo_bytes = exogenous.as_deref().map(std::fs::read).transpose()?;
        let hash = config_hash(&plan_text, &scenario_text, exo_bytes.as_deref());
        let mut manifest = match existing {
            Some(m) if m.config_hash == hash => {
                if m.has_stage(stage) && !force {
                    return Err(refuse(&dir, "an open-loop run"));
                }
                m
            }
            Some(_) if !force => return Err(refuse(&dir, "a run with a different configuration")),
            _ => RunManifest::new(hash, plan.time_offset_s),
        };
        std::fs::create_dir_all(&dir)?;
        manifest.clear_stage(SETUP);
        std::fs::write(dir.join(PLAN_FILE), plan_text)?;
        std::fs::write(dir.join(SCENARIO_FILE), scenario_text)?;
        manifest.record(&dir, PLAN_FILE, SETUP)?;
        manifest.record(&dir, SCENARIO_FILE, SETUP)?;
        if let Some(bytes) = exo_bytes {
            std::fs::write(dir.join(EXOGENOUS_FILE), bytes)?;
            manifest.record(&dir, EXOGENOUS_FILE, SETUP)?;
        }
        Run { dir: dir.clone(), plan: stored, manifest }
    } else {
        let manifest = existing
            .ok_or_else(|| Error::Usage(format!("{} has no manifest; run `simulate` first", dir.display())))?;
        if manifest.has_stage(stage) && !force {
            return Err(refuse(&dir, &format!("`{stage}` outputs")));
        }
        let stored = ExperimentPlan::from_toml(&std::fs::read_to_string(manifest.input(&dir, PLAN_FILE)?)?)?;
        let (given, _, _) = portable_inputs(plan)?;
        if given != stored {
            warn!("using the plan stored in {}; it differs from the plan given", dir.display());
        }
        Run { dir, plan: stored, manifest }
    };
    let at = STAGES.iter().position(|s| *s == stage).expect("known stage");
    for s in &STAGES[at..] {
        run.manifest.clear_stage(s);
    }
    Ok(run)
}

pub fn run_open_loop(plan: &ExperimentPlan, force: bool) -> Result<RunManifest> {
    let mut run = open_stage(plan, "simulate", force)?;
    let scenario = run.scenario()?;
    if !(scenario.duration_s > 0.0) {
        return Err(Error::InsufficientData("scenario duration is zero; the trajectory would be empty".into()));
    }
    let traj = simulate(&scenario, None)?.trajectory;
    traj.save(&run.dir.join(OPEN_LOOP_FILE))?;
    run.record(OPEN_LOOP_FILE, "simulate")?;

    let x = extract_probe_state(&traj, scenario.detrend)?;
    let h = scenario.sample_period_s;
    let period = dominant_period(&x, h);
    let n = traj.probe_temps.len() as f64 * 4.0;
    let mean = traj.probe_temps.iter().flatten().sum::<f64>() / n;
    let [t0, t1] = run.plan.evaluate.amplitude_window_s;
    let amplitude = amplitude_metric(&traj, t0, t1)?;
    info!("open loop: {} samples, mean probe {mean:.3} C, dominant period {:.2} min", traj.len(), period / 60.0);
    run.manifest.results.open_loop =
        Some(OpenLoopResults { samples: traj.len(), dominant_period_s: period, mean_probe_temp: mean, amplitude });
    run.save()?;
    Ok(run.manifest)
}

pub fn run_fit(plan: &ExperimentPlan, force: bool) -> Result<RunManifest> {
    let mut run = open_stage(plan, "fit", force)?;
    let scenario = run.scenario()?;
    let traj = run.plan.fit_window(&run.trajectory(OPEN_LOOP_FILE, scenario.ptac.theta_ref)?);
    let x = extract_probe_state(&traj, scenario.detrend)?;
    let snapshots = build_snapshots(&traj.times, &x, scenario.sample_period_s)?;
    for kind in run.plan.dictionaries.clone() {
        let dict = Dictionary::from_kind(kind, 4).expect("validated plan");
        if snapshots.m() < dict.q() {
            return Err(Error::InsufficientData(format!(
                "{} snapshot pairs are fewer than the {} observables of the {kind} dictionary",
                snapshots.m(),
                dict.q()
            )));
        }
        let spectrum = fit(&snapshots, &dict, run.plan.fit.svd_tolerance)?;
        let ef = select_oscillatory_mode(&spectrum, (&run.plan.band).into())?;
        info!("{kind}: mode nu = {:.3e} + {:.3e}i, period {:.2} min", ef.nu.re, ef.nu.im, ef.period_s() / 60.0);
        let sub = fit_dir(kind);
        let dir = run.mkdir(&sub)?;
        spectrum.save_csv(&dir.join("spectrum.csv"))?;
        ef.save(&dir.join("eigenfunction.toml"))?;
        let grid = rasterize_level_sets(&ef, &SliceSpec::default_for(4, run.plan.fit.raster_resolution))?;
        grid.save(&dir, "levelset", "eigenfunction.toml")?;
        for f in ["spectrum.csv", "eigenfunction.toml", "levelset.csv", "levelset.meta.toml"] {
            run.record(&format!("{sub}/{f}"), "fit")?;
        }
        run.manifest.results.fit.insert(
            kind.to_string(),
            FitResults {
                period_s: ef.period_s(),
                nu_re: ef.nu.re,
                nu_im: ef.nu.im,
                snapshots: snapshots.m(),
                observables: dict.q(),
            },
        );
    }
    run.save()?;
    Ok(run.manifest)
}

/// Reference dictionary run at the scenario's D first, the others calibrated to its
/// energy norm when the plan asks for matched energy.
pub fn run_closed_loop(plan: &ExperimentPlan, force: bool) -> Result<RunManifest> {
    let mut run = open_stage(plan, "control", force)?;
    let scenario = run.scenario()?;
    let theta_ref = scenario.ptac.theta_ref;
    let open = run.trajectory(OPEN_LOOP_FILE, theta_ref)?;
    let [a0, a1] = run.plan.evaluate.amplitude_window_s;
    let open_amp = amplitude_metric(&open, a0, a1)?;
    let cal = run.plan.calibration.clone();
    let c = &scenario.control;
    let rows = c.input_matrix.len();
    let b = DMatrix::from_fn(rows, rows, |i, j| c.input_matrix[i][j]);

    let mut order = run.plan.dictionaries.clone();
    if let Some(k) = order.iter().position(|&d| d == DictionaryKind::CubicMonomial) {
        order.swap(0, k);
    }
    let mut target: Option<f64> = None;
    for kind in order {
        let ef = run.eigenfunction(kind)?;
        let template = ControllerConfig::new(ef, b.clone(), c.d, c.u_max, c.phi_floor)?;
        let (cfg, out, calibrated) = match target {
            Some(norm) if cal.matched_energy => {
                let r = calibrate_d(&scenario, &template, norm, cal.channel, cal.t_end_s, cal.tolerance)?;
                let out = match r.output {
                    Some(o) => o,
                    None => control::run_closed_loop(&scenario, &template.with_d(r.d))?,
                };
                (template.with_d(r.d), out, true)
            }
            _ => {
                let out = control::run_closed_loop(&scenario, &template)?;
                (template, out, false)
            }
        };
        let traj = &out.trajectory;
        for (t, msg) in &out.controller_faults {
            warn!("{kind}: controller fault at t = {t} s: {msg}");
        }
        let norms: Vec<f64> = (0..4).map(|ch| traj.energy_norm(ch, cal.t_end_s)).collect();
        target.get_or_insert(norms[cal.channel]);
        let amplitude = amplitude_metric(traj, a0, a1)?;
        info!("{kind}: D = {:.4e}, u{} norm {:.4}, amplitude {amplitude:.4} (open {open_amp:.4})", cfg.d, cal.channel + 1, norms[cal.channel]);

        let sub = control_dir(kind);
        let dir = run.mkdir(&sub)?;
        traj.save(&dir.join("trajectory.csv"))?;
        save_input_log(traj, cal.t_end_s, &dir.join("inputs.csv"))?;
        cfg.to_record(scenario.sample_period_s, Some(format!("{}/eigenfunction.toml", fit_dir(kind))))
            .save(&dir.join("controller.toml"))?;
        for f in ["trajectory.csv", "inputs.csv", "controller.toml"] {
            run.record(&format!("{sub}/{f}"), "control")?;
        }
        run.manifest.results.control.insert(
            kind.to_string(),
            ControlResults {
                d: cfg.d,
                energy_norm: norms[cal.channel],
                energy_norms: norms,
                calibrated,
                amplitude,
                amplitude_reduction: 1.0 - amplitude / open_amp,
                controller_faults: out.controller_faults.len(),
            },
        );
    }

    let results = &mut run.manifest.results;
    let nl = results.control.get(&DictionaryKind::CubicMonomial.to_string());
    let lin = results.control.get(&DictionaryKind::Linear.to_string());
    match (nl, lin) {
        (Some(n), Some(l)) if cal.matched_energy => {
            let mismatch = if n.energy_norm > 0.0 { (l.energy_norm - n.energy_norm).abs() / n.energy_norm } else { 0.0 };
            results.comparison = Some(Comparison {
                nonlinear_amplitude: n.amplitude,
                linear_amplitude: l.amplitude,
                nonlinear_energy_norm: n.energy_norm,
                linear_energy_norm: l.energy_norm,
                relative_norm_mismatch: mismatch,
                nonlinear_not_worse: n.amplitude <= l.amplitude,
            });
        }
        (Some(_), Some(_)) => results.comparison_absent = Some("energy norms were not matched".into()),
        _ => results.comparison_absent = Some("the plan does not include both dictionaries".into()),
    }
    run.save()?;
    Ok(run.manifest)
}

pub fn run_evaluate(plan: &ExperimentPlan, force: bool) -> Result<RunManifest> {
    let mut run = open_stage(plan, "evaluate", force)?;
    let scenario = run.scenario()?;
    let theta_ref = scenario.ptac.theta_ref;
    let open = run.trajectory(OPEN_LOOP_FILE, theta_ref)?;
    let epochs = run.plan.epochs(scenario.duration_s);
    let ev = run.plan.evaluate.clone();
    let x_open = extract_probe_state(&open, scenario.detrend)?;
    let fit_window = run.plan.fit_window(&open);
    let x_fit = extract_probe_state(&fit_window, scenario.detrend)?;
    for kind in run.plan.dictionaries.clone() {
        let ef = run.eigenfunction(kind)?;
        let closed = run.trajectory(&format!("{}/trajectory.csv", control_dir(kind)), theta_ref)?;
        let x_closed = extract_probe_state(&closed, scenario.detrend)?;
        let p_open = poincare_project(&open.times, &x_open, &ef, ev.epsilon, &epochs)?;
        let p_closed = poincare_project(&closed.times, &x_closed, &ef, ev.epsilon, &epochs)?;
        let [d0, d1] = ev.damping_window_s;
        let dw = closed.window(d0, d1);
        let fit_d = damping_metric(&dw.times, &extract_probe_state(&dw, scenario.detrend)?, &ef)?;
        let inv_open = invariance_metric(&x_fit, &ef)?;
        let inv_closed = invariance_metric(&x_closed, &ef)?;
        info!("{kind}: invariance {inv_open:.4}, D_hat {:.3e} (R^2 {:.3})", fit_d.d_hat, fit_d.r_squared);

        let sub = eval_dir(kind);
        let dir = run.mkdir(&sub)?;
        p_open.save(&dir.join("projection_open_loop.csv"))?;
        p_closed.save(&dir.join("projection_closed_loop.csv"))?;
        for f in ["projection_open_loop.csv", "projection_closed_loop.csv"] {
            run.record(&format!("{sub}/{f}"), "evaluate")?;
        }
        run.manifest.results.evaluate.insert(
            kind.to_string(),
            EvaluateResults {
                invariance_open_loop: inv_open,
                invariance_closed_loop: inv_closed,
                d_hat: fit_d.d_hat,
                d_hat_r_squared: fit_d.r_squared,
                projected_open_loop: p_open.len(),
                projected_closed_loop: p_closed.len(),
                min_epsilon_for_10: p_open.min_epsilon_for_10,
            },
        );
    }
    run.save()?;
    Ok(run.manifest)
}

/// Runs every stage in order; refuses a directory that already holds a manifest unless forced.
pub fn run_all(plan: &ExperimentPlan, force: bool) -> Result<RunManifest> {
    if plan.out_dir.join(MANIFEST_FILE).exists() && !force {
        return Err(refuse(&plan.out_dir, "a run"));
    }
    run_open_loop(plan, true).map_err(|e| Error::stage("simulate", e))?;
    run_fit(plan, true).map_err(|e| Error::stage("fit", e))?;
    run_closed_loop(plan, true).map_err(|e| Error::stage("control", e))?;
    run_evaluate(plan, true).map_err(|e| Error::stage("evaluate", e))
}
