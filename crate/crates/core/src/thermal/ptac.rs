//! Packaged air conditioner: delayed first-order lag, VAV switching, bulk convection.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::field::ThermalParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtacParams {
    /// Lag time constant, s.
    pub t_s: f64,
    /// Sensing delay, s.
    pub l_delay: f64,
    /// Steady-state gain of the lag.
    pub g_gain: f64,
    /// VAV set-point, deg.C.
    pub theta_ref: f64,
    /// Supply air temperature, deg.C.
    pub theta_air: f64,
    /// Outlet flow when the delayed temperature exceeds the set-point, m³/s.
    pub v_on: f64,
    /// Outlet flow otherwise, m³/s.
    pub v_off: f64,
    /// Unit volume centred at the outlet, m³.
    pub v0: f64,
}

impl PtacParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_s > 0.0) {
            return Err(Error::config(format!("ptac.t_s must be positive, got {}", self.t_s)));
        }
        if !(self.l_delay >= 0.0) {
            return Err(Error::config(format!("ptac.l_delay must be >= 0, got {}", self.l_delay)));
        }
        if !(self.v_off > 0.0 && self.v_on > self.v_off) {
            return Err(Error::config(format!(
                "need v_on > v_off > 0, got v_on = {}, v_off = {}",
                self.v_on, self.v_off
            )));
        }
        if !(self.v0 > 0.0) {
            return Err(Error::config(format!("ptac.v0 must be positive, got {}", self.v0)));
        }
        for (name, v) in [("g_gain", self.g_gain), ("theta_ref", self.theta_ref), ("theta_air", self.theta_air)] {
            if !v.is_finite() {
                return Err(Error::config(format!("ptac.{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Time-ordered history of the outlet temperature with linear interpolation.
///
/// Queries before the first sample return `initial`, the constant pre-history.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    samples: VecDeque<(f64, f64)>,
    span: f64,
    initial: f64,
}

impl DelayLine {
    pub fn new(span: f64, initial: f64) -> Self {
        Self { samples: VecDeque::new(), span, initial }
    }

    pub fn push(&mut self, t: f64, theta: f64) {
        debug_assert!(self.samples.back().is_none_or(|&(tb, _)| t > tb));
        self.samples.push_back((t, theta));
        // Keep one sample at or before t - span so interpolation stays bracketed.
        while self.samples.len() > 2 && self.samples[1].0 <= t - self.span {
            self.samples.pop_front();
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let Some(&(t0, _)) = self.samples.front() else {
            return self.initial;
        };
        if t < t0 {
            return self.initial;
        }
        let &(tn, vn) = self.samples.back().expect("non-empty");
        if t >= tn {
            return vn;
        }
        // first index with time > t
        let hi = self.samples.partition_point(|&(ts, _)| ts <= t);
        let (ta, va) = self.samples[hi - 1];
        let (tb, vb) = self.samples[hi];
        va + (vb - va) * (t - ta) / (tb - ta)
    }

    pub fn span_covered(&self) -> f64 {
        match (self.samples.front(), self.samples.back()) {
            (Some(a), Some(b)) => b.0 - a.0,
            _ => 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_time_ordered(&self) -> bool {
        self.samples.iter().zip(self.samples.iter().skip(1)).all(|(a, b)| a.0 < b.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtacUnit {
    /// Lagged temperature seen by the unit, deg.C.
    pub theta_p: f64,
    pub delay_buffer: DelayLine,
    pub current_v_air: f64,
}

impl PtacUnit {
    /// A unit whose history is the constant `theta_outlet` and whose lag sits at `G * theta_outlet`.
    pub fn primed(theta_outlet: f64, params: &PtacParams) -> Self {
        let delayed = theta_outlet;
        Self {
            theta_p: params.g_gain * theta_outlet,
            delay_buffer: DelayLine::new(params.l_delay, theta_outlet),
            current_v_air: vav_switch(delayed, params),
        }
    }

    pub fn delayed(&self, t: f64, params: &PtacParams) -> f64 {
        self.delay_buffer.value_at(t - params.l_delay)
    }
}

/// Outlet flow: `v_on` if the delayed temperature is strictly above the set-point, else `v_off`.
pub fn vav_switch(theta_delayed: f64, params: &PtacParams) -> f64 {
    if theta_delayed > params.theta_ref {
        params.v_on
    } else {
        params.v_off
    }
}

/// Bulk-convection heat input at the outlet cell, W/m³.
pub fn bulk_convection_heat(unit: &PtacUnit, params: &PtacParams, thermal: &ThermalParams) -> f64 {
    unit.current_v_air * (params.theta_air - unit.theta_p) * thermal.rho_cp() / params.v0
}

/// Records `θ(r_h, t)`, refreshes the VAV flow from `θ(r_h, t − L)`, and advances `θ_p` by
/// one explicit Euler step of the delayed lag. Returns the delayed temperature used.
///
/// The returned unit's `current_v_air` is the flow for the interval `[t, t + dt)`, while
/// `theta_p` is already the value at `t + dt`; callers that need the heat for the
/// interval must evaluate [`bulk_convection_heat`] before calling this.
pub fn ptac_lag_step(unit: &mut PtacUnit, t: f64, theta_outlet: f64, params: &PtacParams, dt: f64) -> f64 {
    refresh(unit, t, theta_outlet, params);
    let delayed = unit.delayed(t, params);
    advance_lag(unit, delayed, params, dt);
    delayed
}

pub(crate) fn refresh(unit: &mut PtacUnit, t: f64, theta_outlet: f64, params: &PtacParams) -> f64 {
    unit.delay_buffer.push(t, theta_outlet);
    let delayed = unit.delayed(t, params);
    unit.current_v_air = vav_switch(delayed, params);
    delayed
}

pub(crate) fn advance_lag(unit: &mut PtacUnit, delayed: f64, params: &PtacParams, dt: f64) {
    unit.theta_p += -dt / params.t_s * (unit.theta_p - params.g_gain * delayed);
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_params() -> PtacParams {
        PtacParams {
            t_s: 17.0 * 60.0,
            l_delay: 6.0 * 60.0,
            g_gain: 1.0,
            theta_ref: 27.0,
            theta_air: 17.0,
            v_on: 0.25,
            v_off: 0.13,
            v0: 1.0,
        }
    }

    #[test]
    fn vav_branches() {
        let p = reference_params();
        assert_eq!(vav_switch(27.5, &p), 0.25);
        assert_eq!(vav_switch(27.0, &p), 0.13);
        assert_eq!(vav_switch(26.0, &p), 0.13);
    }

    #[test]
    fn bulk_convection_values() {
        let p = reference_params();
        let th = ThermalParams::default();
        let mut unit = PtacUnit::primed(27.0, &p);
        unit.current_v_air = 0.25;
        unit.theta_p = 27.0;
        let heat = bulk_convection_heat(&unit, &p, &th);
        assert!((heat - 0.25 * -10.0 * 1.176 * 1.007).abs() < 1e-12);
        assert!((heat + 2.9606).abs() < 1e-4);

        let doubled = PtacParams { v0: 2.0, ..p };
        assert!((bulk_convection_heat(&unit, &doubled, &th) - heat / 2.0).abs() < 1e-12);

        unit.theta_p = p.theta_air;
        assert_eq!(bulk_convection_heat(&unit, &p, &th), 0.0);
    }

    #[test]
    fn lag_fixed_point() {
        let p = reference_params();
        let mut unit = PtacUnit::primed(28.0, &p);
        for k in 0..100 {
            ptac_lag_step(&mut unit, k as f64, 28.0, &p, 1.0);
        }
        assert_eq!(unit.theta_p, 28.0);
    }

    #[test]
    fn lag_closed_form() {
        // constant history 30, theta_p(0) = 27 -> 30 - 3 exp(-t/T_s)
        let p = reference_params();
        let mut unit = PtacUnit::primed(30.0, &p);
        unit.theta_p = 27.0;
        let steps = p.t_s as usize;
        for k in 0..steps {
            ptac_lag_step(&mut unit, k as f64, 30.0, &p, 1.0);
        }
        let exact = 30.0 - 3.0 * (-1.0f64).exp();
        assert!((exact - 28.896).abs() < 1e-3);
        assert!((unit.theta_p - exact).abs() < 1e-3, "{} vs {}", unit.theta_p, exact);
    }

    #[test]
    fn zero_delay_is_plain_lag() {
        let p = PtacParams { l_delay: 0.0, ..reference_params() };
        let mut unit = PtacUnit::primed(27.0, &p);
        let delayed = ptac_lag_step(&mut unit, 0.0, 29.0, &p, 1.0);
        assert_eq!(delayed, 29.0);
        assert!((unit.theta_p - (27.0 + 2.0 / p.t_s)).abs() < 1e-12);
    }

    #[test]
    fn delay_line_interpolates_and_primes() {
        let mut line = DelayLine::new(10.0, 5.0);
        assert_eq!(line.value_at(3.0), 5.0);
        for k in 0..40 {
            line.push(k as f64, k as f64 * 2.0);
        }
        assert!(line.is_time_ordered());
        assert!(line.span_covered() >= 10.0);
        assert!((line.value_at(35.5) - 71.0).abs() < 1e-12);
        assert!((line.value_at(29.0) - 58.0).abs() < 1e-12);
        assert_eq!(line.value_at(100.0), 78.0);
    }

    #[test]
    fn rejects_bad_flows() {
        let p = PtacParams { v_off: 0.3, ..reference_params() };
        assert!(p.validate().is_err());
    }
}
