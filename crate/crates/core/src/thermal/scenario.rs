//! Scenario configuration (TOML) and its validated, resolved form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::exogenous::ExogenousSignal;
use super::field::ThermalParams;
use super::geometry::{BoundarySegment, Edge, GridCoord, RoomGeometry, SegmentKind, UNITS};
use super::ptac::PtacParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub width: f64,
    pub depth: f64,
    pub dx: f64,
    pub dy: f64,
    /// AC-1 … AC-4 outlet cells.
    pub ptacs: [GridCoord; UNITS],
    /// TH-15, TH-17, TH-19, TH-21 cells.
    pub probes: [GridCoord; UNITS],
    pub segments: Vec<BoundarySegment>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            width: 14.0,
            depth: 7.0,
            dx: 1.8,
            dy: 1.35,
            ptacs: [GridCoord::new(1, 1), GridCoord::new(3, 3), GridCoord::new(4, 1), GridCoord::new(6, 3)],
            probes: [GridCoord::new(2, 1), GridCoord::new(3, 2), GridCoord::new(5, 1), GridCoord::new(6, 2)],
            segments: vec![
                BoundarySegment { edge: Edge::Bottom, from: 0, to: 8, kind: SegmentKind::Window },
                BoundarySegment { edge: Edge::Top, from: 0, to: 2, kind: SegmentKind::Door },
                BoundarySegment { edge: Edge::Top, from: 2, to: 8, kind: SegmentKind::Wall },
                BoundarySegment { edge: Edge::Left, from: 0, to: 5, kind: SegmentKind::Wall },
                BoundarySegment { edge: Edge::Right, from: 0, to: 5, kind: SegmentKind::Wall },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PtacConfig {
    pub t_s: f64,
    pub l_delay: f64,
    pub g_gain: f64,
    pub theta_ref: f64,
    pub theta_air: f64,
    pub v_on: f64,
    pub v_off: f64,
    /// Defaults to the cell footprint times one metre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    /// When false the units neither sense nor inject heat.
    pub enabled: bool,
}

impl Default for PtacConfig {
    fn default() -> Self {
        Self {
            t_s: 17.0 * 60.0,
            l_delay: 6.0 * 60.0,
            g_gain: 1.0,
            theta_ref: 27.0,
            theta_air: 17.0,
            v_on: 0.25,
            v_off: 0.13,
            v0: None,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Recorded duration, s. Records cover `[0, duration_s]`.
    pub duration_s: f64,
    /// Unrecorded, uncontrolled pre-roll before `t = 0`, s.
    pub spinup_s: f64,
    /// Sampling period `h` of probe records and control updates, s.
    pub sample_period_s: f64,
    /// Initial uniform field temperature, deg.C.
    pub theta_init: f64,
    /// Keep every n-th sampled frame of the full field (0 = none).
    pub field_decimation: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            duration_s: 14_400.0,
            spinup_s: 3_600.0,
            sample_period_s: 60.0,
            theta_init: 27.0,
            field_decimation: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExogenousConfig {
    /// CSV `t_seconds,theta_ext_degC`; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Synthetic ramp used when no file is given, from `t = 0` to `t = duration_s`.
    pub ramp_start: f64,
    pub ramp_end: f64,
}

impl Default for ExogenousConfig {
    fn default() -> Self {
        Self { file: None, ramp_start: 33.5, ramp_end: 34.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum DetrendConfig {
    /// `x = θ − θ_ref`
    #[default]
    Setpoint,
    /// `x = θ − centred moving average over `window_s``
    MovingAverage { window_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    #[default]
    OpenLoop,
    Damping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub mode: ControlMode,
    /// Design damping D, 1/s. Used as the starting point of calibration.
    pub d: f64,
    /// Saturation bound, W/m³.
    pub u_max: f64,
    /// Singularity guard on |φ| in the normalised eigenfunction scale.
    pub phi_floor: f64,
    /// Row-major M×m input matrix; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_matrix: Option<Vec<Vec<f64>>>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self { mode: ControlMode::OpenLoop, d: 0.35, u_max: 5.0, phi_floor: 1e-3, input_matrix: None }
    }
}

/// Serialized scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub thermal: ThermalParams,
    #[serde(default)]
    pub ptac: PtacConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub exogenous: ExogenousConfig,
    #[serde(default)]
    pub detrend: DetrendConfig,
    #[serde(default)]
    pub control: ControlConfig,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(file), Some(dir)) = (cfg.exogenous.file.as_mut(), path.parent()) {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
        }
        Ok(cfg)
    }

    /// Validates every section and builds the runtime scenario.
    pub fn resolve(&self) -> Result<Scenario> {
        let g = &self.geometry;
        let geometry = RoomGeometry::new(g.width, g.depth, g.dx, g.dy, g.ptacs, g.probes, g.segments.clone())?;
        self.thermal.validate(&geometry)?;
        let p = &self.ptac;
        let ptac = PtacParams {
            t_s: p.t_s,
            l_delay: p.l_delay,
            g_gain: p.g_gain,
            theta_ref: p.theta_ref,
            theta_air: p.theta_air,
            v_on: p.v_on,
            v_off: p.v_off,
            v0: p.v0.unwrap_or_else(|| geometry.cell_volume()),
        };
        ptac.validate()?;

        let r = &self.run;
        if !(r.duration_s.is_finite() && r.duration_s >= 0.0) {
            return Err(Error::config(format!("run.duration_s must be >= 0, got {}", r.duration_s)));
        }
        if !(r.spinup_s.is_finite() && r.spinup_s >= 0.0) {
            return Err(Error::config(format!("run.spinup_s must be >= 0, got {}", r.spinup_s)));
        }
        let dt = self.thermal.dt;
        let steps_per_sample = (r.sample_period_s / dt).round() as usize;
        if steps_per_sample == 0 || (steps_per_sample as f64 * dt - r.sample_period_s).abs() > 1e-9 * r.sample_period_s {
            return Err(Error::config(format!(
                "run.sample_period_s = {} must be a positive multiple of thermal.dt = {dt}",
                r.sample_period_s
            )));
        }
        if !r.theta_init.is_finite() {
            return Err(Error::config("run.theta_init must be finite"));
        }
        if let DetrendConfig::MovingAverage { window_s } = self.detrend {
            if !(window_s > 0.0) {
                return Err(Error::config("detrend.window_s must be positive"));
            }
        }

        let exogenous = match &self.exogenous.file {
            Some(path) => ExogenousSignal::from_csv(path)?,
            None if r.duration_s > 0.0 => ExogenousSignal::ramp(
                0.0,
                self.exogenous.ramp_start,
                r.duration_s,
                self.exogenous.ramp_end,
            )?,
            None => ExogenousSignal::constant(self.exogenous.ramp_start),
        };

        let c = &self.control;
        let input_matrix = match &c.input_matrix {
            None => identity_rows(UNITS),
            Some(rows) => {
                if rows.len() != UNITS || rows.iter().any(|row| row.len() != UNITS) {
                    return Err(Error::config("control.input_matrix must be 4x4"));
                }
                rows.clone()
            }
        };

        Ok(Scenario {
            geometry,
            thermal: self.thermal,
            ptac,
            ptacs_enabled: p.enabled,
            exogenous,
            duration_s: r.duration_s,
            spinup_s: r.spinup_s,
            sample_period_s: r.sample_period_s,
            steps_per_sample,
            theta_init: r.theta_init,
            field_decimation: r.field_decimation,
            detrend: self.detrend,
            control: ControlSettings {
                mode: c.mode,
                d: c.d,
                u_max: c.u_max,
                phi_floor: c.phi_floor,
                input_matrix,
            },
        })
    }
}

fn identity_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSettings {
    pub mode: ControlMode,
    pub d: f64,
    pub u_max: f64,
    pub phi_floor: f64,
    pub input_matrix: Vec<Vec<f64>>,
}

/// A validated scenario ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: RoomGeometry,
    pub thermal: ThermalParams,
    pub ptac: PtacParams,
    pub ptacs_enabled: bool,
    pub exogenous: ExogenousSignal,
    pub duration_s: f64,
    pub spinup_s: f64,
    pub sample_period_s: f64,
    pub steps_per_sample: usize,
    pub theta_init: f64,
    pub field_decimation: usize,
    pub detrend: DetrendConfig,
    pub control: ControlSettings,
}
