//! Coupled field + conditioner simulation with an optional sampled-data controller.

use std::io::{Read, Write};
use std::path::Path;

use super::field::{check_finite, FieldStepper, TemperatureField};
use super::geometry::UNITS;
use super::ptac::{advance_lag, bulk_convection_heat, refresh, PtacUnit};
use super::scenario::{DetrendConfig, Scenario};
use crate::error::{Error, Result};

pub type Vec4 = [f64; UNITS];

/// Sampled-data feedback: called once per sampling period with the detrended probe state,
/// its output is held until the next sample.
pub trait Controller {
    fn input(&mut self, t: f64, x: &Vec4) -> Result<Vec4>;
}

impl<F> Controller for F
where
    F: FnMut(f64, &Vec4) -> Result<Vec4>,
{
    fn input(&mut self, t: f64, x: &Vec4) -> Result<Vec4> {
        self(t, x)
    }
}

/// Probe records at the sampling period.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Set-point-detrended probe temperatures.
    pub states: Vec<Vec4>,
    /// Ancillary heat inputs held over `[t, t + h)`, W/m³.
    pub inputs: Vec<Vec4>,
    /// Raw probe temperatures (TH-15, TH-17, TH-19, TH-21), deg.C.
    pub probe_temps: Vec<Vec4>,
    pub theta_ref: f64,
}

pub const TRAJECTORY_HEADER: [&str; 13] = [
    "t", "x1", "x2", "x3", "x4", "u1", "u2", "u3", "u4", "theta15", "theta17", "theta19", "theta21",
];

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sample_period(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }

    /// Samples with `t0 <= t <= t1`.
    pub fn window(&self, t0: f64, t1: f64) -> Trajectory {
        let keep: Vec<usize> = (0..self.len()).filter(|&k| self.times[k] >= t0 && self.times[k] <= t1).collect();
        Trajectory {
            times: keep.iter().map(|&k| self.times[k]).collect(),
            states: keep.iter().map(|&k| self.states[k]).collect(),
            inputs: keep.iter().map(|&k| self.inputs[k]).collect(),
            probe_temps: keep.iter().map(|&k| self.probe_temps[k]).collect(),
            theta_ref: self.theta_ref,
        }
    }

    /// `(∫₀ᵀ u_channel² dt)^½` under zero-order hold over records with `t < t_end`.
    pub fn energy_norm(&self, channel: usize, t_end: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len() {
            let t0 = self.times[k];
            if t0 >= t_end {
                break;
            }
            let t1 = self.times.get(k + 1).copied().unwrap_or(t_end).min(t_end);
            let u = self.inputs[k][channel];
            acc += u * u * (t1 - t0);
        }
        acc.sqrt()
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRAJECTORY_HEADER)?;
        for k in 0..self.len() {
            let mut row = Vec::with_capacity(13);
            row.push(self.times[k]);
            row.extend_from_slice(&self.states[k]);
            row.extend_from_slice(&self.inputs[k]);
            row.extend_from_slice(&self.probe_temps[k]);
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv(reader: impl Read, theta_ref: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(TRAJECTORY_HEADER.iter().copied()) {
            return Err(Error::Ingestion(format!(
                "trajectory header must be `{}`",
                TRAJECTORY_HEADER.join(",")
            )));
        }
        let mut traj = Trajectory {
            times: vec![],
            states: vec![],
            inputs: vec![],
            probe_temps: vec![],
            theta_ref,
        };
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Ingestion(format!("trajectory row {}: {e}", line + 2)))?;
            if vals.len() != 13 {
                return Err(Error::Ingestion(format!("trajectory row {} has {} columns", line + 2, vals.len())));
            }
            let four = |o: usize| [vals[o], vals[o + 1], vals[o + 2], vals[o + 3]];
            traj.times.push(vals[0]);
            traj.states.push(four(1));
            traj.inputs.push(four(5));
            traj.probe_temps.push(four(9));
        }
        Ok(traj)
    }

    pub fn load(path: &Path, theta_ref: f64) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, theta_ref)
    }
}

/// `x(t)` under the chosen detrending. `Setpoint` subtracts `θ_ref`; `MovingAverage`
/// subtracts a centred moving average of each probe (window truncated at the ends).
pub fn extract_probe_state(trajectory: &Trajectory, detrend: DetrendConfig) -> Result<Vec<Vec4>> {
    if trajectory.is_empty() {
        return Err(Error::InsufficientData("trajectory is empty".into()));
    }
    match detrend {
        DetrendConfig::Setpoint => Ok(trajectory
            .probe_temps
            .iter()
            .map(|p| p.map(|v| v - trajectory.theta_ref))
            .collect()),
        DetrendConfig::MovingAverage { window_s } => {
            let h = trajectory.sample_period().unwrap_or(window_s);
            let half = ((window_s / h) / 2.0).floor() as usize;
            let n = trajectory.len();
            Ok((0..n)
                .map(|k| {
                    let lo = k.saturating_sub(half);
                    let hi = (k + half + 1).min(n);
                    let mut mean = [0.0; UNITS];
                    for p in &trajectory.probe_temps[lo..hi] {
                        for (m, v) in mean.iter_mut().zip(p) {
                            *m += v;
                        }
                    }
                    let count = (hi - lo) as f64;
                    let p = trajectory.probe_temps[k];
                    std::array::from_fn(|i| p[i] - mean[i] / count)
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub trajectory: Trajectory,
    /// Decimated full-field frames (empty unless `field_decimation > 0`).
    pub field_history: Vec<TemperatureField>,
    /// Controller faults as `(t, message)`; the faulted sample used `u = 0`.
    pub controller_faults: Vec<(f64, String)>,
}

/// Runs the coupled system over `[-spinup, duration]` and records `[0, duration]`.
pub fn simulate(scenario: &Scenario, mut controller: Option<&mut dyn Controller>) -> Result<SimulationOutput> {
    let geometry = &scenario.geometry;
    let dt = scenario.thermal.dt;
    let sps = scenario.steps_per_sample as i64;
    let n_spin = (scenario.spinup_s / dt).round() as i64;
    let n_samples = (scenario.duration_s / scenario.sample_period_s).floor() as i64;
    let n_total = n_samples * sps;
    let theta_ref = scenario.ptac.theta_ref;

    let outlets: [usize; UNITS] = scenario.geometry.ptac_locations.map(|c| geometry.index(c));
    let probes: [usize; UNITS] = scenario.geometry.probe_locations.map(|c| geometry.index(c));

    let mut cur = vec![scenario.theta_init; geometry.cells()];
    let mut next = vec![0.0; geometry.cells()];
    let mut heat = vec![0.0; geometry.cells()];
    let mut units: Vec<PtacUnit> = outlets.iter().map(|&k| PtacUnit::primed(cur[k], &scenario.ptac)).collect();
    let mut delayed = [0.0; UNITS];
    let mut stepper = FieldStepper::new(geometry, &scenario.thermal);

    let capacity = (n_samples + 1).max(0) as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        inputs: Vec::with_capacity(capacity),
        probe_temps: Vec::with_capacity(capacity),
        theta_ref,
    };
    let mut history = Vec::new();
    let mut faults = Vec::new();
    let mut u = [0.0; UNITS];

    for s in -n_spin..=n_total {
        let t = s as f64 * dt;
        if s >= 0 && s % sps == 0 {
            let probe_temps: Vec4 = probes.map(|k| cur[k]);
            let x: Vec4 = probe_temps.map(|v| v - theta_ref);
            if let Some(ctrl) = controller.as_deref_mut() {
                u = match ctrl.input(t, &x) {
                    Ok(v) if v.iter().all(|c| c.is_finite()) => v,
                    Ok(v) => {
                        faults.push((t, format!("non-finite input {v:?}")));
                        [0.0; UNITS]
                    }
                    Err(e) => {
                        faults.push((t, e.to_string()));
                        [0.0; UNITS]
                    }
                };
            }
            let sample = (s / sps) as usize;
            if scenario.field_decimation > 0 && sample % scenario.field_decimation == 0 {
                history.push(TemperatureField { nx: geometry.nx, ny: geometry.ny, values: cur.clone(), time: t });
            }
            traj.times.push(t);
            traj.states.push(x);
            traj.inputs.push(u);
            traj.probe_temps.push(probe_temps);
        }
        if s == n_total {
            break;
        }

        heat.fill(0.0);
        if scenario.ptacs_enabled {
            for (k, unit) in units.iter_mut().enumerate() {
                delayed[k] = refresh(unit, t, cur[outlets[k]], &scenario.ptac);
                heat[outlets[k]] += bulk_convection_heat(unit, &scenario.ptac, &scenario.thermal);
            }
        }
        if controller.is_some() && s >= 0 {
            for (k, &cell) in outlets.iter().enumerate() {
                heat[cell] += u[k];
            }
        }
        stepper.step(&cur, &heat, scenario.exogenous.at(t), &mut next);
        check_finite(&next, geometry.nx, t + dt)?;
        if scenario.ptacs_enabled {
            for (unit, &d) in units.iter_mut().zip(&delayed) {
                advance_lag(unit, d, &scenario.ptac, dt);
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }

    Ok(SimulationOutput { trajectory: traj, field_history: history, controller_faults: faults })
}

/// Writes one CSV per frame, `frame_<k>.csv`, one grid row per line (`j` ascending).
pub fn write_field_history(frames: &[TemperatureField], dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(frames.len());
    for (k, frame) in frames.iter().enumerate() {
        let path = dir.join(format!("frame_{k:05}.csv"));
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path)?;
        for j in 0..frame.ny {
            w.write_record((0..frame.nx).map(|i| frame.at(i, j).to_string()))?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::scenario::ScenarioConfig;

    #[test]
    fn probe_state_subtracts_setpoint() {
        let traj = Trajectory {
            times: vec![0.0, 60.0],
            states: vec![[0.0; 4]; 2],
            inputs: vec![[0.0; 4]; 2],
            probe_temps: vec![[27.0; 4], [27.3, 26.8, 27.1, 27.0]],
            theta_ref: 27.0,
        };
        let x = extract_probe_state(&traj, DetrendConfig::Setpoint).unwrap();
        assert_eq!(x[0], [0.0; 4]);
        let expected = [0.3, -0.2, 0.1, 0.0];
        for (a, b) in x[1].iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_trajectory_rejected() {
        let traj = Trajectory { times: vec![], states: vec![], inputs: vec![], probe_temps: vec![], theta_ref: 27.0 };
        assert!(extract_probe_state(&traj, DetrendConfig::Setpoint).is_err());
    }

    #[test]
    fn moving_average_removes_offset() {
        let n = 50;
        let traj = Trajectory {
            times: (0..n).map(|k| k as f64 * 60.0).collect(),
            states: vec![[0.0; 4]; n],
            inputs: vec![[0.0; 4]; n],
            probe_temps: vec![[28.5; 4]; n],
            theta_ref: 27.0,
        };
        let x = extract_probe_state(&traj, DetrendConfig::MovingAverage { window_s: 600.0 }).unwrap();
        assert!(x.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    fn short_config() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.run.duration_s = 1800.0;
        cfg.run.spinup_s = 600.0;
        cfg
    }

    #[test]
    fn zero_controller_is_bit_identical() {
        let s = short_config().resolve().unwrap();
        let open = simulate(&s, None).unwrap();
        let mut zero = |_t: f64, _x: &Vec4| -> Result<Vec4> { Ok([0.0; 4]) };
        let closed = simulate(&s, Some(&mut zero)).unwrap();
        assert_eq!(open.trajectory, closed.trajectory);
    }

    #[test]
    fn records_cover_duration() {
        let s = short_config().resolve().unwrap();
        let out = simulate(&s, None).unwrap();
        assert_eq!(out.trajectory.len(), 31);
        assert_eq!(out.trajectory.times[30], 1800.0);
    }

    #[test]
    fn no_ptacs_tiny_diffusion_is_constant() {
        let mut cfg = short_config();
        cfg.ptac.enabled = false;
        cfg.thermal.d_eff = 1e-12;
        cfg.exogenous.ramp_start = 27.0;
        cfg.exogenous.ramp_end = 27.0;
        let s = cfg.resolve().unwrap();
        let out = simulate(&s, None).unwrap();
        assert!(out.trajectory.probe_temps.iter().flatten().all(|&v| v == 27.0));
    }

    #[test]
    fn controller_faults_fall_back_to_zero() {
        let s = short_config().resolve().unwrap();
        let mut faulty = |t: f64, _x: &Vec4| -> Result<Vec4> {
            if t == 600.0 {
                Err(Error::ControllerFault("boom".into()))
            } else {
                Ok([0.1; 4])
            }
        };
        let out = simulate(&s, Some(&mut faulty)).unwrap();
        assert_eq!(out.controller_faults.len(), 1);
        assert_eq!(out.trajectory.inputs[10], [0.0; 4]);
        assert_eq!(out.trajectory.inputs[11], [0.1; 4]);
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let s = short_config().resolve().unwrap();
        let traj = simulate(&s, None).unwrap().trajectory;
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let header = std::str::from_utf8(&buf).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, "t,x1,x2,x3,x4,u1,u2,u3,u4,theta15,theta17,theta19,theta21");
        assert_eq!(Trajectory::read_csv(buf.as_slice(), 27.0).unwrap(), traj);
    }

    #[test]
    fn energy_norm_zero_order_hold() {
        let traj = Trajectory {
            times: vec![0.0, 10.0, 20.0],
            states: vec![[0.0; 4]; 3],
            inputs: vec![[2.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [5.0, 0.0, 0.0, 0.0]],
            probe_temps: vec![[27.0; 4]; 3],
            theta_ref: 27.0,
        };
        assert!((traj.energy_norm(0, 20.0) - (4.0f64 * 10.0 + 10.0).sqrt()).abs() < 1e-12);
    }
}
