use log::{debug, info};

use super::law::{ControllerConfig, DampingController};
use crate::error::{Error, Result};
use crate::thermal::{simulate, Scenario, SimulationOutput};

pub const D_MIN: f64 = 1e-6;
pub const D_MAX: f64 = 1e2;
const MAX_ITER: usize = 80;

/// Outcome of a matched-energy calibration.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub d: f64,
    pub energy_norm: f64,
    /// Every `(D, norm)` pair evaluated, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
    pub output: Option<SimulationOutput>,
}

pub fn run_closed_loop(scenario: &Scenario, cfg: &ControllerConfig) -> Result<SimulationOutput> {
    let mut ctrl = DampingController::new(cfg.clone())?;
    simulate(scenario, Some(&mut ctrl))
}

/// Bisection on `D` (in log space) until the closed-loop energy norm of `channel` over
/// `[0, t_end]` is within `tolerance` (relative) of `target`.
///
/// Starts from `template.d`, expands geometrically within `[D_MIN, D_MAX]` to bracket the
/// target, and fails if the evaluated norms are not monotone in `D`.
pub fn calibrate_d(
    scenario: &Scenario,
    template: &ControllerConfig,
    target: f64,
    channel: usize,
    t_end: f64,
    tolerance: f64,
) -> Result<Calibration> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::config(format!("calibration target must be finite and >= 0, got {target}")));
    }
    if channel >= 4 {
        return Err(Error::config(format!("input channel {channel} out of range")));
    }
    if target == 0.0 {
        return Ok(Calibration { d: 0.0, energy_norm: 0.0, evaluations: vec![(0.0, 0.0)], output: None });
    }
    let mut evals: Vec<(f64, f64)> = Vec::new();
    let eval = |d: f64, evals: &mut Vec<(f64, f64)>| -> Result<(f64, SimulationOutput)> {
        let out = run_closed_loop(scenario, &template.with_d(d))?;
        let norm = out.trajectory.energy_norm(channel, t_end);
        debug!("calibration: D = {d:.6e} -> norm {norm:.6e}");
        evals.push((d, norm));
        check_monotone(evals)?;
        Ok((norm, out))
    };
    let close = |norm: f64| (norm - target).abs() <= tolerance * target;

    let mut d = template.d.clamp(D_MIN, D_MAX);
    let (mut norm, mut out) = eval(d, &mut evals)?;
    if close(norm) {
        return Ok(Calibration { d, energy_norm: norm, evaluations: evals, output: Some(out) });
    }
    let (mut lo, mut hi);
    if norm < target {
        lo = d;
        loop {
            if d >= D_MAX {
                return Err(calibration_failure("target above the norm reached at D_MAX", evals));
            }
            d = (d * 4.0).min(D_MAX);
            (norm, out) = eval(d, &mut evals)?;
            if close(norm) {
                return Ok(Calibration { d, energy_norm: norm, evaluations: evals, output: Some(out) });
            }
            if norm > target {
                hi = d;
                break;
            }
            lo = d;
        }
    } else {
        hi = d;
        loop {
            if d <= D_MIN {
                return Err(calibration_failure("target below the norm reached at D_MIN", evals));
            }
            d = (d / 4.0).max(D_MIN);
            (norm, out) = eval(d, &mut evals)?;
            if close(norm) {
                return Ok(Calibration { d, energy_norm: norm, evaluations: evals, output: Some(out) });
            }
            if norm < target {
                lo = d;
                break;
            }
            hi = d;
        }
    }
    for _ in 0..MAX_ITER {
        let mid = (lo * hi).sqrt();
        (norm, out) = eval(mid, &mut evals)?;
        if close(norm) {
            info!("calibrated D = {mid:.6e} (norm {norm:.6e}, target {target:.6e})");
            return Ok(Calibration { d: mid, energy_norm: norm, evaluations: evals, output: Some(out) });
        }
        if norm < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    Err(calibration_failure("bisection did not reach the tolerance; the norm may jump across the target", evals))
}

fn calibration_failure(reason: &str, achieved: Vec<(f64, f64)>) -> Error {
    Error::Calibration { reason: reason.into(), achieved }
}

fn check_monotone(evals: &[(f64, f64)]) -> Result<()> {
    let mut sorted = evals.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        if w[1].1 < w[0].1 * (1.0 - 1e-9) {
            return Err(calibration_failure(
                &format!("energy norm decreased from {} at D = {} to {} at D = {}", w[0].1, w[0].0, w[1].1, w[1].0),
                evals.to_vec(),
            ));
        }
    }
    Ok(())
}
