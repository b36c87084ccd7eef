//! Spring-mass energy controller used as an analytic oracle.
//!
//! `m x'' = -k x + u` with `u = -(m D / p) (r - r_bar)` drives the energy
//! `r = k x^2 / 2 + p^2 / 2m` along `r' = -D (r - r_bar)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::fit_log_linear;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassPointParams {
    pub m: f64,
    pub k: f64,
    pub d: f64,
    pub r_bar: f64,
    /// Hold threshold on `|p|`; `None` uses `1e-4 sqrt(2 m r(0))`.
    pub p_floor: Option<f64>,
}

impl MassPointParams {
    pub fn energy(&self, x: f64, p: f64) -> f64 {
        0.5 * self.k * x * x + p * p / (2.0 * self.m)
    }

    /// Closed-form control law.
    pub fn law(&self, x: f64, p: f64) -> f64 {
        -(self.m * self.d / p) * (self.energy(x, p) - self.r_bar)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MassPointTrajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    /// Whether the control was held at zero over the step ending at this sample.
    pub held: Vec<bool>,
}

impl MassPointTrajectory {
    /// Elapsed time excluding held steps.
    pub fn active_time(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.t.len());
        let mut acc = 0.0;
        for k in 0..self.t.len() {
            if k > 0 && !self.held[k] {
                acc += self.t[k] - self.t[k - 1];
            }
            out.push(acc);
        }
        out
    }

    /// Slope and `R^2` of `ln |r - r_bar|` against active time, as `(rate, r2)` with
    /// `rate = -slope`.
    pub fn decay_rate(&self, r_bar: f64) -> Result<(f64, f64)> {
        let ta = self.active_time();
        let (ts, ys): (Vec<f64>, Vec<f64>) = ta
            .iter()
            .zip(&self.r)
            .filter(|(_, &r)| (r - r_bar).abs() > 0.0)
            .map(|(&t, &r)| (t, (r - r_bar).abs().ln()))
            .unzip();
        let fit = fit_log_linear(&ts, &ys)?;
        Ok((-fit.slope, fit.r_squared))
    }
}

fn rotate(x: f64, p: f64, m: f64, omega: f64, tau: f64) -> (f64, f64) {
    let (s, c) = (omega * tau).sin_cos();
    (x * c + p / (m * omega) * s, -m * omega * x * s + p * c)
}

/// Exact solution of the control-only flow `p' = u(x, p)` for fixed `x`, in `w = p^2`:
/// `w(tau) = (w0 + c) e^{-D tau} - c` with `c = 2m (k x^2/2 - r_bar)`.
/// Returns `None` if `p` reaches zero within `tau`.
fn kick(params: &MassPointParams, x: f64, p: f64, tau: f64) -> Option<f64> {
    let c = 2.0 * params.m * (0.5 * params.k * x * x - params.r_bar);
    let w = (p * p + c) * (-params.d * tau).exp() - c;
    (w > 0.0).then(|| p.signum() * w.sqrt())
}

/// Integrates the controlled spring-mass with Strang splitting: half control kick, exact
/// harmonic rotation, half kick.
///
/// Near a turning point the law is singular. The control is held at zero once `|p|` drops
/// below `p_floor` (or a kick would drive `p` through zero). It resumes once `|p|` exceeds
/// `kappa p*`, where `p* = m D |r - r_bar| / (k |x|)` balances spring and control forces.
/// Free motion from a turning point reaches at most `|p| / p* = omega / D`, so `kappa` sits
/// midway between 1 and that ratio.
pub fn mass_point_oracle(params: &MassPointParams, x0: f64, p0: f64, t_end: f64, dt: f64) -> Result<MassPointTrajectory> {
    if !(params.m > 0.0 && params.k > 0.0) {
        return Err(Error::config("mass and stiffness must be positive"));
    }
    if !(params.d >= 0.0) {
        return Err(Error::config("D must be >= 0"));
    }
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::config("need dt > 0 and t_end >= 0"));
    }
    let omega = (params.k / params.m).sqrt();
    let r0 = params.energy(x0, p0);
    let p_floor = params.p_floor.unwrap_or(1e-4 * (2.0 * params.m * r0).sqrt());
    let steps = (t_end / dt).round() as usize;
    let kappa = if params.d > 0.0 { (0.5 * (1.0 + omega / params.d)).min(2.0) } else { 1.0 };

    let mut tr = MassPointTrajectory::default();
    let (mut x, mut p) = (x0, p0);
    let mut held = p.abs() < p_floor;
    let push = |tr: &mut MassPointTrajectory, t: f64, x: f64, p: f64, h: bool| {
        tr.t.push(t);
        tr.x.push(x);
        tr.p.push(p);
        tr.r.push(params.energy(x, p));
        tr.held.push(h);
    };
    push(&mut tr, 0.0, x, p, held);

    for s in 0..steps {
        if held {
            let p_star = if x == 0.0 {
                0.0
            } else {
                params.m * params.d * (params.energy(x, p) - params.r_bar).abs() / (params.k * x.abs())
            };
            if p.abs() > (kappa * p_star).max(p_floor) {
                held = false;
            }
        } else if p.abs() < p_floor {
            held = true;
        }
        let step_held = held || params.d == 0.0;
        if !step_held {
            match kick(params, x, p, 0.5 * dt) {
                Some(v) => p = v,
                None => {
                    p = 0.0;
                    held = true;
                }
            }
        }
        (x, p) = rotate(x, p, params.m, omega, dt);
        if !step_held && !held {
            match kick(params, x, p, 0.5 * dt) {
                Some(v) => p = v,
                None => {
                    p = 0.0;
                    held = true;
                }
            }
        }
        push(&mut tr, (s + 1) as f64 * dt, x, p, step_held);
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: f64, r_bar: f64) -> MassPointParams {
        MassPointParams { m: 1.0, k: 1.0, d, r_bar, p_floor: None }
    }

    #[test]
    fn free_motion_conserves_energy() {
        let p = unit(0.0, 0.0);
        let tr = mass_point_oracle(&p, 0.0, 2f64.sqrt(), 2.0 * std::f64::consts::PI, 1e-3).unwrap();
        let r0 = tr.r[0];
        assert!(tr.r.iter().all(|r| ((r - r0) / r0).abs() < 1e-9));
    }

    #[test]
    fn at_target_stays_put() {
        let p = unit(0.5, 1.0);
        let tr = mass_point_oracle(&p, 0.0, 2f64.sqrt(), 10.0, 1e-3).unwrap();
        assert!(tr.r.iter().all(|r| (r - 1.0).abs() < 1e-9), "{:?}", tr.r.last());
    }

    #[test]
    fn control_law_sign() {
        let p = unit(0.5, 0.0);
        assert!(p.law(0.3, 1.0) < 0.0);
        assert!(p.law(0.3, -1.0) > 0.0);
    }

    #[test]
    fn energy_decays_at_design_rate() {
        let p = unit(0.5, 0.0);
        let tr = mass_point_oracle(&p, 0.0, 2f64.sqrt(), 7.0, 1e-3).unwrap();
        let ta = tr.active_time();
        let k3 = ta.iter().position(|&t| t >= 6.0).unwrap();
        let window = MassPointTrajectory {
            t: tr.t[..=k3].to_vec(),
            x: tr.x[..=k3].to_vec(),
            p: tr.p[..=k3].to_vec(),
            r: tr.r[..=k3].to_vec(),
            held: tr.held[..=k3].to_vec(),
        };
        let (rate, r2) = window.decay_rate(0.0).unwrap();
        assert!((rate - 0.5).abs() < 0.025, "rate {rate}");
        assert!(r2 > 0.99);
    }
}
