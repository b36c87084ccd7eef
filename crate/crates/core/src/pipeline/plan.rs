use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::{Epoch, DEFAULT_EPSILON};
use crate::spectral::{DictionaryKind, ModeBand, DEFAULT_SVD_TOLERANCE};
use crate::thermal::{ScenarioConfig, Trajectory};

/// Wall-clock time of the first record, seconds after midnight (4:00am).
pub const DEFAULT_TIME_OFFSET_S: f64 = 4.0 * 3600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub period_min_s: f64,
    pub period_max_s: f64,
    /// Upper bound on `|Re nu|`, 1/s.
    pub max_damping: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self { period_min_s: 600.0, period_max_s: 1200.0, max_damping: 1e-2 }
    }
}

impl From<&BandConfig> for ModeBand {
    fn from(b: &BandConfig) -> Self {
        ModeBand { period_min_s: b.period_min_s, period_max_s: b.period_max_s, max_damping: b.max_damping }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Records with `t0 <= t <= t1` form the snapshot pairs; the first half of the records
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_s: Option<[f64; 2]>,
    pub svd_tolerance: f64,
    /// Nodes per axis of the exported level-set slice.
    pub raster_resolution: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { window_s: None, svd_tolerance: DEFAULT_SVD_TOLERANCE, raster_resolution: 81 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Zero-based input channel whose energy norm is matched.
    pub channel: usize,
    pub t_end_s: f64,
    pub matched_energy: bool,
    pub tolerance: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { channel: 0, t_end_s: 14_400.0, matched_energy: true, tolerance: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochConfig {
    pub label: String,
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Slab half-width, detrended deg.C.
    pub epsilon: f64,
    /// Window of the amplitude metric.
    pub amplitude_window_s: [f64; 2],
    /// Window of the controlled-run decay fit.
    pub damping_window_s: [f64; 2],
    /// Explicit epochs in simulation seconds; derived from the wall-clock offset when empty.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub epochs: Vec<EpochConfig>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            amplitude_window_s: [1_800.0, 7_200.0],
            damping_window_s: [0.0, 3_600.0],
            epochs: Vec::new(),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    /// Scenario TOML, relative to the plan file. The built-in scenario when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
    pub dictionaries: Vec<DictionaryKind>,
    pub out_dir: PathBuf,
    /// Reserved; the pipeline is deterministic.
    pub seed: u64,
    /// Wall-clock seconds after midnight at `t = 0`.
    pub time_offset_s: f64,
    pub band: BandConfig,
    pub fit: FitConfig,
    pub calibration: CalibrationConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            scenario: None,
            dictionaries: vec![DictionaryKind::CubicMonomial, DictionaryKind::Linear],
            out_dir: PathBuf::from("run"),
            seed: 0,
            time_offset_s: DEFAULT_TIME_OFFSET_S,
            band: BandConfig::default(),
            fit: FitConfig::default(),
            calibration: CalibrationConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Reads a plan and resolves `scenario` and `out_dir` against the plan's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        let mut plan = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            if let Some(s) = plan.scenario.as_mut() {
                if s.is_relative() {
                    *s = dir.join(&*s);
                }
            }
            if plan.out_dir.is_relative() {
                plan.out_dir = dir.join(&plan.out_dir);
            }
        }
        Ok(plan)
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig> {
        match &self.scenario {
            Some(p) => ScenarioConfig::load(p),
            None => Ok(ScenarioConfig::default()),
        }
    }

    pub fn validate(&self, scenario: &ScenarioConfig) -> Result<()> {
        if self.dictionaries.is_empty() {
            return Err(Error::Config("plan lists no dictionaries".into()));
        }
        if self.dictionaries.contains(&DictionaryKind::Custom) {
            return Err(Error::Config("custom dictionaries are not available from a plan".into()));
        }
        for (i, d) in self.dictionaries.iter().enumerate() {
            if self.dictionaries[..i].contains(d) {
                return Err(Error::Config(format!("dictionary {d} listed twice")));
            }
        }
        let duration = scenario.run.duration_s;
        let c = &self.calibration;
        if !(c.t_end_s > 0.0 && c.t_end_s <= duration) {
            return Err(Error::Config(format!("calibration T = {} s must lie in (0, {duration}]", c.t_end_s)));
        }
        if c.channel >= 4 {
            return Err(Error::Config(format!("calibration channel {} out of range", c.channel)));
        }
        if !(c.tolerance > 0.0) {
            return Err(Error::Config("calibration tolerance must be positive".into()));
        }
        let b = &self.band;
        if !(b.period_min_s > 0.0 && b.period_min_s < b.period_max_s) {
            return Err(Error::Config(format!("invalid period band [{}, {}]", b.period_min_s, b.period_max_s)));
        }
        let windows = [
            ("fit.window_s", self.fit.window_s),
            ("evaluate.amplitude_window_s", Some(self.evaluate.amplitude_window_s)),
            ("evaluate.damping_window_s", Some(self.evaluate.damping_window_s)),
        ];
        for (name, w) in windows.iter().filter_map(|(n, w)| w.map(|w| (n, w))) {
            if !(w[0] >= 0.0 && w[0] < w[1]) {
                return Err(Error::Config(format!("{name} = {w:?} is not an increasing window")));
            }
        }
        if !(self.evaluate.epsilon > 0.0) {
            return Err(Error::Config("evaluate.epsilon must be positive".into()));
        }
        Ok(())
    }

    /// Explicit epochs, else the 4:00-4:30, 4:30-6:30 and 6:30-8:00 windows shifted by the
    /// wall-clock offset, else thirds of the run.
    /// The fitting portion of `traj`.
    pub fn fit_window(&self, traj: &Trajectory) -> Trajectory {
        match self.fit.window_s {
            Some([t0, t1]) => traj.window(t0, t1),
            None => {
                let n = traj.len() / 2;
                Trajectory {
                    times: traj.times[..n].to_vec(),
                    states: traj.states[..n].to_vec(),
                    inputs: traj.inputs[..n].to_vec(),
                    probe_temps: traj.probe_temps[..n].to_vec(),
                    theta_ref: traj.theta_ref,
                }
            }
        }
    }

    pub fn epochs(&self, duration_s: f64) -> Vec<Epoch> {
        if !self.evaluate.epochs.is_empty() {
            return self.evaluate.epochs.iter().map(|e| Epoch::new(e.label.clone(), e.t0, e.t1)).collect();
        }
        let anchors = [4.0, 4.5, 6.5, 8.0].map(|hours| hours * 3600.0 - self.time_offset_s);
        let fits = anchors[0] >= 0.0 && anchors[3] <= duration_s + 1e-9;
        if fits {
            vec![
                Epoch::new("early", anchors[0], anchors[1]),
                Epoch::new("middle", anchors[1], anchors[2]),
                Epoch::new("late", anchors[2], anchors[3]),
            ]
        } else {
            Epoch::thirds(0.0, duration_s)
        }
    }
}
