use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral::{Eigenfunction, EigenfunctionRecord};
use crate::thermal::{Controller, Trajectory, Vec4};

/// Damping-assignment controller for one Koopman mode.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub ef: Eigenfunction,
    /// `M x m` input matrix.
    pub b: DMatrix<f64>,
    /// Design damping, 1/s.
    pub d: f64,
    pub u_max: f64,
    pub phi_floor: f64,
    b_pinv: DMatrix<f64>,
}

impl ControllerConfig {
    pub fn new(ef: Eigenfunction, b: DMatrix<f64>, d: f64, u_max: f64, phi_floor: f64) -> Result<Self> {
        if b.nrows() != ef.n() {
            return Err(Error::config(format!(
                "input matrix has {} rows, state dimension is {}",
                b.nrows(),
                ef.n()
            )));
        }
        if b.ncols() == 0 {
            return Err(Error::config("input matrix has no columns"));
        }
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::config(format!("D must be finite and >= 0, got {d}")));
        }
        if !(u_max > 0.0) {
            return Err(Error::config(format!("u_max must be positive, got {u_max}")));
        }
        if !(phi_floor > 0.0) {
            return Err(Error::config(format!("phi_floor must be positive, got {phi_floor}")));
        }
        let (b_pinv, rank) = linalg::pinv(&b, 1e-12)?;
        if rank < b.ncols() {
            warn!("input matrix has rank {rank} < {} columns; using its pseudo-inverse", b.ncols());
        }
        Ok(Self { ef, b, d, u_max, phi_floor, b_pinv })
    }

    /// Square identity input matrix.
    pub fn identity(ef: Eigenfunction, d: f64, u_max: f64, phi_floor: f64) -> Result<Self> {
        let n = ef.n();
        Self::new(ef, DMatrix::identity(n, n), d, u_max, phi_floor)
    }

    pub fn b_pinv(&self) -> &DMatrix<f64> {
        &self.b_pinv
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn with_d(&self, d: f64) -> Self {
        Self { d, ..self.clone() }
    }

    pub fn to_record(&self, hold_period_s: f64, eigenfunction_file: Option<String>) -> ControllerRecord {
        ControllerRecord {
            eigenfunction_file,
            d: self.d,
            u_max: self.u_max,
            phi_floor: self.phi_floor,
            hold_period_s,
            b: self.b.row_iter().map(|r| r.iter().copied().collect()).collect(),
            eigenfunction: self.ef.to_record(),
        }
    }
}

/// Serialized controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenfunction_file: Option<String>,
    pub d: f64,
    pub u_max: f64,
    pub phi_floor: f64,
    pub hold_period_s: f64,
    /// Row-major input matrix.
    pub b: Vec<Vec<f64>>,
    pub eigenfunction: EigenfunctionRecord,
}

impl ControllerRecord {
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn into_config(self) -> Result<ControllerConfig> {
        let rows = self.b.len();
        let cols = self.b.first().map_or(0, Vec::len);
        if self.b.iter().any(|r| r.len() != cols) {
            return Err(Error::Ingestion("controller record has a ragged input matrix".into()));
        }
        let b = DMatrix::from_fn(rows, cols, |i, j| self.b[i][j]);
        ControllerConfig::new(self.eigenfunction.into_eigenfunction()?, b, self.d, self.u_max, self.phi_floor)
    }
}

/// Polar form of the mode variable `z = phi(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub z: Complex<f64>,
    pub r: f64,
    /// Argument in `[-pi, pi)`; zero when `r = 0`.
    pub varphi: f64,
}

impl ModeState {
    pub fn from_z(z: Complex<f64>) -> Self {
        let r = z.norm();
        let varphi = if r == 0.0 {
            0.0
        } else {
            let a = z.im.atan2(z.re);
            if a >= PI { a - 2.0 * PI } else { a }
        };
        Self { z, r, varphi }
    }
}

pub fn mode_state(ef: &Eigenfunction, x: &[f64]) -> ModeState {
    ModeState::from_z(ef.eval(x))
}

/// `grad |phi|` at `x` together with `phi`, or `None` where `phi = 0`.
fn abs_gradient(ef: &Eigenfunction, x: &[f64]) -> Result<(Complex<f64>, Option<DVector<f64>>)> {
    let phi = ef.eval(x);
    let r = phi.norm();
    if r == 0.0 {
        return Ok((phi, None));
    }
    let grad = ef.grad(x);
    // (conj(phi) grad phi + phi conj(grad phi)) / (2 |phi|), real up to rounding.
    let mut g = DVector::zeros(grad.len());
    for (i, dphi) in grad.iter().enumerate() {
        let c = (phi.conj() * dphi + phi * dphi.conj()) / (2.0 * r);
        if !(c.im.abs() <= 1e-10 * c.norm().max(1.0)) {
            return Err(Error::ControllerFault(format!("gradient of |phi| has imaginary part {:e}", c.im)));
        }
        g[i] = c.re;
    }
    Ok((phi, Some(g)))
}

/// Unclamped input `-D B^+ g^+ |phi|`, where `g = grad |phi|` and `g^+ = g^T / |g|^2`.
///
/// Returns `None` inside the guard band `|phi| < phi_floor`.
pub fn control_input_raw(cfg: &ControllerConfig, x: &[f64]) -> Result<Option<DVector<f64>>> {
    let (phi, g) = abs_gradient(&cfg.ef, x)?;
    let r = phi.norm();
    if !r.is_finite() {
        return Err(Error::ControllerFault(format!("non-finite eigenfunction value at {x:?}")));
    }
    if r < cfg.phi_floor || cfg.d == 0.0 {
        return Ok(None);
    }
    let g = g.expect("r > 0");
    let g2 = g.norm_squared();
    if g2 == 0.0 {
        // Pseudo-inverse of a zero row is zero.
        return Ok(Some(DVector::zeros(cfg.inputs())));
    }
    let g_pinv = &g / g2;
    let u = &cfg.b_pinv * g_pinv * (-cfg.d * r);
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::ControllerFault(format!("non-finite input at {x:?}")));
    }
    Ok(Some(u))
}

/// Damping-assignment input, clamped componentwise to `[-u_max, u_max]`.
pub fn control_input(cfg: &ControllerConfig, x: &[f64]) -> Result<DVector<f64>> {
    Ok(match control_input_raw(cfg, x)? {
        Some(u) => u.map(|v| v.clamp(-cfg.u_max, cfg.u_max)),
        None => DVector::zeros(cfg.inputs()),
    })
}

/// Predicted `dr/dt = grad|phi| . (F(x) + B u)` with `u = control_input(cfg, x)`.
///
/// Without a drift estimate the drift term is taken as zero, which is exact for a
/// sustained mode (`Re nu = 0`).
pub fn closed_loop_mode_rate(cfg: &ControllerConfig, x: &[f64], drift: Option<&[f64]>) -> Result<f64> {
    let (_, g) = abs_gradient(&cfg.ef, x)?;
    let Some(g) = g else {
        return Ok(0.0);
    };
    let u = control_input(cfg, x)?;
    let mut v = &cfg.b * u;
    if let Some(f) = drift {
        if f.len() != v.len() {
            return Err(Error::config(format!("drift has dimension {}, expected {}", f.len(), v.len())));
        }
        for (vi, fi) in v.iter_mut().zip(f) {
            *vi += fi;
        }
    }
    Ok(g.dot(&v))
}

/// Sampled-data wrapper driving the four conditioner inputs.
#[derive(Debug, Clone)]
pub struct DampingController {
    pub cfg: ControllerConfig,
}

impl DampingController {
    pub fn new(cfg: ControllerConfig) -> Result<Self> {
        if cfg.inputs() != 4 || cfg.ef.n() != 4 {
            return Err(Error::config(format!(
                "the room controller needs 4 states and 4 inputs, got {} and {}",
                cfg.ef.n(),
                cfg.inputs()
            )));
        }
        Ok(Self { cfg })
    }
}

impl Controller for DampingController {
    fn input(&mut self, _t: f64, x: &Vec4) -> Result<Vec4> {
        let u = control_input(&self.cfg, x)?;
        Ok([u[0], u[1], u[2], u[3]])
    }
}

/// Writes `t,u1,u2,u3,u4` followed by a `#` summary line of energy norms over `[0, t_end]`.
pub fn write_input_log(traj: &Trajectory, t_end: f64, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "u1", "u2", "u3", "u4"])?;
    for (t, u) in traj.times.iter().zip(&traj.inputs) {
        w.write_record([t.to_string(), u[0].to_string(), u[1].to_string(), u[2].to_string(), u[3].to_string()])?;
    }
    w.flush()?;
    let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let norms: Vec<String> = (0..4).map(|c| format!("u{}={}", c + 1, traj.energy_norm(c, t_end))).collect();
    writeln!(inner, "# energy_norm T={t_end} {}", norms.join(" "))?;
    Ok(())
}

pub fn save_input_log(traj: &Trajectory, t_end: f64, path: &Path) -> Result<()> {
    write_input_log(traj, t_end, std::fs::File::create(path)?)
}
