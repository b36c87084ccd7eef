//! Experiment orchestration: open loop, fit, closed loop, evaluation.
//!
//! Each stage reads its inputs from files listed in the run directory's manifest, so any
//! stage can be re-run from disk.

mod manifest;
mod plan;
mod stages;

pub use manifest::{
    sha256_hex, Comparison, ControlResults, EvaluateResults, FileEntry, FitResults, OpenLoopResults, Results,
    RunManifest, MANIFEST_FILE,
};
pub use plan::{
    BandConfig, CalibrationConfig, EpochConfig, EvaluateConfig, ExperimentPlan, FitConfig, DEFAULT_TIME_OFFSET_S,
};
pub use stages::{run_all, run_closed_loop, run_evaluate, run_fit, run_open_loop, STAGES};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::thermal::{Trajectory, Vec4};

/// Root-mean-square deviation of all probe temperatures from the set-point over `[t0, t1]`.
pub fn amplitude_metric(traj: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    let w = traj.window(t0, t1);
    if w.is_empty() {
        return Err(Error::InsufficientData(format!("no samples in the amplitude window [{t0}, {t1}]")));
    }
    let n = (w.len() * 4) as f64;
    let ss: f64 = w.probe_temps.iter().flatten().map(|v| (v - traj.theta_ref).powi(2)).sum();
    Ok((ss / n).sqrt())
}

/// Period of the strongest periodogram line of the probe-averaged state, searched on a
/// grid ten times finer than the DFT bins. Returns `inf` for fewer than 4 samples.
pub fn dominant_period(states: &[Vec4], h: f64) -> f64 {
    let n = states.len();
    if n < 4 {
        return f64::INFINITY;
    }
    let avg: Vec<f64> = states.iter().map(|x| x.iter().sum::<f64>() / 4.0).collect();
    let mean = avg.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = avg.iter().map(|v| v - mean).collect();
    let mut best = (f64::INFINITY, 0.0);
    let steps = 10 * (n / 2);
    for k in 10..=steps {
        let f = k as f64 / (10.0 * n as f64 * h);
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in y.iter().enumerate() {
            let (s, c) = (2.0 * PI * f * j as f64 * h).sin_cos();
            re += v * c;
            im += v * s;
        }
        let p = re * re + im * im;
        if p > best.1 {
            best = (1.0 / f, p);
        }
    }
    best.0
}
