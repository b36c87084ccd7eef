use std::io::Write;
use std::path::Path;

use log::warn;

use crate::control::ModeState;
use crate::error::{Error, Result};
use crate::spectral::Eigenfunction;

/// Slab half-width in detrended deg.C.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Labelled time window `[t0, t1)`; the last epoch of a partition also admits `t1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub label: String,
    pub t0: f64,
    pub t1: f64,
}

impl Epoch {
    pub fn new(label: impl Into<String>, t0: f64, t1: f64) -> Self {
        Self { label: label.into(), t0, t1 }
    }

    /// `early`, `middle`, `late` thirds of `[t0, t1]`.
    pub fn thirds(t0: f64, t1: f64) -> Vec<Epoch> {
        let d = (t1 - t0) / 3.0;
        vec![Epoch::new("early", t0, t0 + d), Epoch::new("middle", t0 + d, t0 + 2.0 * d), Epoch::new("late", t0 + 2.0 * d, t1)]
    }
}

fn label_for(epochs: &[Epoch], t: f64) -> String {
    let last = epochs.len().saturating_sub(1);
    epochs
        .iter()
        .enumerate()
        .find(|(k, e)| t >= e.t0 && (t < e.t1 || (*k == last && t <= e.t1)))
        .map_or_else(|| "none".to_string(), |(_, e)| e.label.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoint {
    pub t: f64,
    pub x1: f64,
    pub x3: f64,
    pub r: f64,
    pub varphi: f64,
    pub epoch: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoints {
    pub points: Vec<ProjectedPoint>,
    pub epsilon: f64,
    /// Smallest half-width admitting at least 10 samples, when the series has that many.
    pub min_epsilon_for_10: Option<f64>,
}

/// Keeps samples with `|x2| < eps` and `|x4| < eps` and tags them with `(r, varphi)` and
/// their epoch.
pub fn poincare_project<S: AsRef<[f64]>>(
    times: &[f64],
    states: &[S],
    ef: &Eigenfunction,
    epsilon: f64,
    epochs: &[Epoch],
) -> Result<ProjectedPoints> {
    if !(epsilon > 0.0) {
        return Err(Error::config(format!("slab half-width must be positive, got {epsilon}")));
    }
    if times.len() != states.len() {
        return Err(Error::config(format!("{} times but {} states", times.len(), states.len())));
    }
    if ef.n() < 4 {
        return Err(Error::config("slab projection needs at least 4 state coordinates"));
    }
    let mut widths: Vec<f64> = Vec::with_capacity(states.len());
    let mut points = Vec::new();
    for (&t, s) in times.iter().zip(states) {
        let x = s.as_ref();
        let w = x[1].abs().max(x[3].abs());
        widths.push(w);
        if x[1].abs() < epsilon && x[3].abs() < epsilon {
            let m = ModeState::from_z(ef.eval(x));
            points.push(ProjectedPoint { t, x1: x[0], x3: x[2], r: m.r, varphi: m.varphi, epoch: label_for(epochs, t) });
        }
    }
    widths.sort_by(f64::total_cmp);
    // Strict inequality: the next representable width above the 10th smallest admits it.
    let min_epsilon_for_10 = widths.get(9).map(|&w| f64::from_bits(w.to_bits() + 1));
    if points.is_empty() {
        match min_epsilon_for_10 {
            Some(e) => warn!("slab |x2|, |x4| < {epsilon} admits no samples; epsilon >= {e:.4} admits at least 10"),
            None => warn!("slab |x2|, |x4| < {epsilon} admits no samples; the series has fewer than 10 samples"),
        }
    }
    Ok(ProjectedPoints { points, epsilon, min_epsilon_for_10 })
}

impl ProjectedPoints {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "x1", "x3", "r", "varphi", "epoch"])?;
        for p in &self.points {
            w.write_record([
                p.t.to_string(),
                p.x1.to_string(),
                p.x3.to_string(),
                p.r.to_string(),
                p.varphi.to_string(),
                p.epoch.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Dictionary;
    use nalgebra::Complex;

    fn ef() -> Eigenfunction {
        Eigenfunction::from_real(&[0.0, 1.0, 0.0, 0.0, 0.0], Complex::new(0.0, 0.0), Dictionary::linear(4))
    }

    fn series() -> (Vec<f64>, Vec<[f64; 4]>) {
        let t: Vec<f64> = (0..30).map(|k| k as f64 * 60.0).collect();
        let s = t.iter().map(|&t| [1.0, (t / 300.0).sin() * 0.2, -0.5, (t / 500.0).cos() * 0.2]).collect();
        (t, s)
    }

    #[test]
    fn wide_slab_keeps_everything() {
        let (t, s) = series();
        let p = poincare_project(&t, &s, &ef(), 1.0, &Epoch::thirds(0.0, 29.0 * 60.0)).unwrap();
        assert_eq!(p.len(), 30);
        assert_eq!(p.points[0].epoch, "early");
        assert_eq!(p.points[29].epoch, "late");
        assert_eq!(p.points[0].r, 1.0);
    }

    #[test]
    fn narrow_slab_is_empty_with_hint() {
        let (t, s) = series();
        let p = poincare_project(&t, &s, &ef(), f64::MIN_POSITIVE, &[]).unwrap();
        assert!(p.is_empty());
        let e = p.min_epsilon_for_10.unwrap();
        let wider = poincare_project(&t, &s, &ef(), e, &[]).unwrap();
        assert!(wider.len() >= 10);
    }

    #[test]
    fn slab_condition_holds() {
        let (t, s) = series();
        let p = poincare_project(&t, &s, &ef(), 0.1, &[]).unwrap();
        for pt in &p.points {
            let k = t.iter().position(|&v| v == pt.t).unwrap();
            assert!(s[k][1].abs() < 0.1 && s[k][3].abs() < 0.1);
            assert_eq!(pt.epoch, "none");
        }
    }
}
