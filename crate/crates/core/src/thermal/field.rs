//! Effective-diffusion temperature field: explicit Euler in time, central differences in
//! space, ghost cells for the Neumann/convective boundary.

use serde::{Deserialize, Serialize};

use super::geometry::{Edge, RoomGeometry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalParams {
    /// Effective diffusivity, m²/s.
    pub d_eff: f64,
    /// Air density, kg/m³.
    pub rho: f64,
    /// Specific heat of air at constant pressure.
    pub c_p: f64,
    /// Thermal transmission rate of windows and doors, W/(m²·K).
    pub w_window: f64,
    /// Time step, s.
    pub dt: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        Self { d_eff: 0.5, rho: 1.176, c_p: 1.007, w_window: 0.091, dt: 1.0 }
    }
}

impl ThermalParams {
    /// Checks positivity and the explicit-Euler stability bound on `geometry`'s grid.
    pub fn validate(&self, geometry: &RoomGeometry) -> Result<()> {
        for (name, v) in [
            ("d_eff", self.d_eff),
            ("rho", self.rho),
            ("c_p", self.c_p),
            ("w_window", self.w_window),
            ("dt", self.dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("thermal.{name} must be positive, got {v}")));
            }
        }
        let cfl = self.cfl_number(geometry);
        if cfl > 0.5 {
            return Err(Error::config(format!(
                "CFL violated: d_eff*dt*(1/dx^2 + 1/dy^2) = {cfl:.4} > 0.5"
            )));
        }
        Ok(())
    }

    pub fn cfl_number(&self, geometry: &RoomGeometry) -> f64 {
        self.d_eff * self.dt * (1.0 / (geometry.dx * geometry.dx) + 1.0 / (geometry.dy * geometry.dy))
    }

    /// Convective coefficient of a window/door face, `W / (rho c_p D_eff)`, in 1/m.
    pub fn k_conv(&self) -> f64 {
        self.w_window / (self.rho * self.c_p * self.d_eff)
    }

    pub fn rho_cp(&self) -> f64 {
        self.rho * self.c_p
    }
}

/// Temperatures on the grid, row-major (`j * nx + i`), in deg.C.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureField {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    pub time: f64,
}

impl TemperatureField {
    pub fn uniform(geometry: &RoomGeometry, theta: f64, time: f64) -> Self {
        Self { nx: geometry.nx, ny: geometry.ny, values: vec![theta; geometry.cells()], time }
    }

    pub fn from_values(geometry: &RoomGeometry, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != geometry.cells() {
            return Err(Error::config(format!(
                "field has {} values, grid needs {}",
                values.len(),
                geometry.cells()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Instability { time, i: k % geometry.nx, j: k / geometry.nx });
        }
        Ok(Self { nx: geometry.nx, ny: geometry.ny, values, time })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Ghost-cell temperatures just outside each edge, indexed by boundary face.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostValues {
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl GhostValues {
    fn zeros(nx: usize, ny: usize) -> Self {
        Self { bottom: vec![0.0; nx], top: vec![0.0; nx], left: vec![0.0; ny], right: vec![0.0; ny] }
    }
}

/// Ghost values realising `∂θ/∂n = K_conv (θ_ext − θ)` on window/door faces and `∂θ/∂n = 0`
/// on walls, with `n` the outward normal.
pub fn apply_boundary(
    field: &TemperatureField,
    geometry: &RoomGeometry,
    params: &ThermalParams,
    theta_ext: f64,
) -> GhostValues {
    let mut ghosts = GhostValues::zeros(geometry.nx, geometry.ny);
    fill_ghosts(&field.values, geometry, params.k_conv(), theta_ext, &mut ghosts);
    ghosts
}

fn fill_ghosts(
    values: &[f64],
    geometry: &RoomGeometry,
    k_conv: f64,
    theta_ext: f64,
    ghosts: &mut GhostValues,
) {
    let (nx, ny) = (geometry.nx, geometry.ny);
    let ghost = |interior: f64, spacing: f64, convective: bool| {
        if convective {
            interior + spacing * k_conv * (theta_ext - interior)
        } else {
            interior
        }
    };
    for i in 0..nx {
        let b = values[i];
        let t = values[(ny - 1) * nx + i];
        ghosts.bottom[i] = ghost(b, geometry.dy, geometry.label(Edge::Bottom, i).is_convective());
        ghosts.top[i] = ghost(t, geometry.dy, geometry.label(Edge::Top, i).is_convective());
    }
    for j in 0..ny {
        let l = values[j * nx];
        let r = values[j * nx + nx - 1];
        ghosts.left[j] = ghost(l, geometry.dx, geometry.label(Edge::Left, j).is_convective());
        ghosts.right[j] = ghost(r, geometry.dx, geometry.label(Edge::Right, j).is_convective());
    }
}

/// One explicit Euler step of `∂θ/∂t = D_eff ∇²θ + heat / (ρ c_p)`, `heat` in W/m³ per cell.
pub fn step_field(
    field: &TemperatureField,
    heat: &[f64],
    params: &ThermalParams,
    geometry: &RoomGeometry,
    theta_ext: f64,
) -> Result<TemperatureField> {
    params.validate(geometry)?;
    if heat.len() != geometry.cells() || field.values.len() != geometry.cells() {
        return Err(Error::config(format!(
            "heat has {} cells, field {}, grid {}",
            heat.len(),
            field.values.len(),
            geometry.cells()
        )));
    }
    let mut stepper = FieldStepper::new(geometry, params);
    let mut out = vec![0.0; geometry.cells()];
    stepper.step(&field.values, heat, theta_ext, &mut out);
    let time = field.time + params.dt;
    check_finite(&out, geometry.nx, time)?;
    Ok(TemperatureField { nx: field.nx, ny: field.ny, values: out, time })
}

pub(crate) fn check_finite(values: &[f64], nx: usize, time: f64) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::Instability { time, i: k % nx, j: k / nx }),
        None => Ok(()),
    }
}

/// Reusable workspace for repeated field steps on one grid.
pub(crate) struct FieldStepper<'g> {
    geometry: &'g RoomGeometry,
    cx: f64,
    cy: f64,
    source_scale: f64,
    k_conv: f64,
    ghosts: GhostValues,
}

impl<'g> FieldStepper<'g> {
    pub(crate) fn new(geometry: &'g RoomGeometry, params: &ThermalParams) -> Self {
        Self {
            geometry,
            cx: params.d_eff * params.dt / (geometry.dx * geometry.dx),
            cy: params.d_eff * params.dt / (geometry.dy * geometry.dy),
            source_scale: params.dt / params.rho_cp(),
            k_conv: params.k_conv(),
            ghosts: GhostValues::zeros(geometry.nx, geometry.ny),
        }
    }

    pub(crate) fn step(&mut self, cur: &[f64], heat: &[f64], theta_ext: f64, out: &mut [f64]) {
        let (nx, ny) = (self.geometry.nx, self.geometry.ny);
        fill_ghosts(cur, self.geometry, self.k_conv, theta_ext, &mut self.ghosts);
        let g = &self.ghosts;
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let c = cur[k];
                let west = if i == 0 { g.left[j] } else { cur[k - 1] };
                let east = if i + 1 == nx { g.right[j] } else { cur[k + 1] };
                let south = if j == 0 { g.bottom[i] } else { cur[k - nx] };
                let north = if j + 1 == ny { g.top[i] } else { cur[k + nx] };
                out[k] = c
                    + self.cx * (west - 2.0 * c + east)
                    + self.cy * (south - 2.0 * c + north)
                    + self.source_scale * heat[k];
            }
        }
    }
}
