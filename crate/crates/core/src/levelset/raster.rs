use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::ModeState;
use crate::error::{Error, Result};
use crate::spectral::Eigenfunction;

/// A 2-d slice through state space: two free coordinates, the rest held at `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    /// Zero-based indices of the horizontal and vertical coordinates.
    pub free: [usize; 2],
    /// Full state vector; entries at `free` are overwritten per node.
    pub base: Vec<f64>,
    pub range_a: [f64; 2],
    pub range_b: [f64; 2],
    pub resolution: [usize; 2],
}

impl SliceSpec {
    /// `(x1, x3)` over `[-2, 2]^2` with `x2 = x4 = 0`.
    pub fn default_for(n: usize, resolution: usize) -> Self {
        Self {
            free: [0, 2.min(n.saturating_sub(1))],
            base: vec![0.0; n],
            range_a: [-2.0, 2.0],
            range_b: [-2.0, 2.0],
            resolution: [resolution, resolution],
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.base.len() != n {
            return Err(Error::config(format!("slice base has dimension {}, state has {n}", self.base.len())));
        }
        if self.free.iter().any(|&i| i >= n) || self.free[0] == self.free[1] {
            return Err(Error::config(format!("invalid free coordinates {:?} for dimension {n}", self.free)));
        }
        if self.resolution.iter().any(|&r| r < 2) {
            return Err(Error::config("raster resolution must be at least 2 per axis"));
        }
        for r in [self.range_a, self.range_b] {
            if !(r[0] < r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(Error::config(format!("invalid raster range {r:?}")));
            }
        }
        Ok(())
    }

    fn axis(range: [f64; 2], count: usize) -> Vec<f64> {
        (0..count)
            .map(|k| range[0] + (range[1] - range[0]) * k as f64 / (count - 1) as f64)
            .collect()
    }
}

/// `|phi|` and `arg phi` on a rectangular grid, row-major with the first free coordinate
/// varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetGrid {
    pub spec: SliceSpec,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub abs_phi: Vec<f64>,
    pub arg_phi: Vec<f64>,
}

pub fn rasterize_level_sets(ef: &Eigenfunction, spec: &SliceSpec) -> Result<LevelSetGrid> {
    spec.validate(ef.n())?;
    let a = SliceSpec::axis(spec.range_a, spec.resolution[0]);
    let b = SliceSpec::axis(spec.range_b, spec.resolution[1]);
    let mut abs_phi = Vec::with_capacity(a.len() * b.len());
    let mut arg_phi = Vec::with_capacity(a.len() * b.len());
    let mut x = spec.base.clone();
    for &vb in &b {
        for &va in &a {
            x[spec.free[0]] = va;
            x[spec.free[1]] = vb;
            let m = ModeState::from_z(ef.eval(&x));
            if !m.r.is_finite() {
                return Err(Error::Numerical(format!("non-finite eigenfunction value at {x:?}")));
            }
            abs_phi.push(m.r);
            arg_phi.push(m.varphi);
        }
    }
    Ok(LevelSetGrid { spec: spec.clone(), a, b, abs_phi, arg_phi })
}

/// Sidecar record describing a raster export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetMetadata {
    pub slice: SliceSpec,
    pub eigenfunction: String,
}

impl LevelSetGrid {
    pub fn len(&self) -> usize {
        self.abs_phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abs_phi.is_empty()
    }

    pub fn node(&self, ia: usize, ib: usize) -> (f64, f64) {
        let k = ib * self.a.len() + ia;
        (self.abs_phi[k], self.arg_phi[k])
    }

    /// CSV with one row per node; the header names the free coordinates, `x1,x3,...` by default.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let ha = format!("x{}", self.spec.free[0] + 1);
        let hb = format!("x{}", self.spec.free[1] + 1);
        w.write_record([ha.as_str(), hb.as_str(), "abs_phi", "arg_phi"])?;
        for (ib, &vb) in self.b.iter().enumerate() {
            for (ia, &va) in self.a.iter().enumerate() {
                let (r, ph) = self.node(ia, ib);
                w.write_record([va.to_string(), vb.to_string(), r.to_string(), ph.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv` and the `<stem>.meta.toml` sidecar.
    pub fn save(&self, dir: &Path, stem: &str, eigenfunction_ref: &str) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
        let csv_path = dir.join(format!("{stem}.csv"));
        let meta_path = dir.join(format!("{stem}.meta.toml"));
        self.write_csv(std::fs::File::create(&csv_path)?)?;
        let meta = LevelSetMetadata { slice: self.spec.clone(), eigenfunction: eigenfunction_ref.to_string() };
        std::fs::write(&meta_path, toml::to_string(&meta)?)?;
        Ok((csv_path, meta_path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Dictionary, Normalization};
    use nalgebra::{Complex, DVector};

    #[test]
    fn constant_function_is_flat() {
        let ef = Eigenfunction::from_real(&[1.0, 0.0, 0.0, 0.0, 0.0], Complex::new(0.0, 0.0), Dictionary::linear(4));
        let g = rasterize_level_sets(&ef, &SliceSpec::default_for(4, 11)).unwrap();
        assert_eq!(g.len(), 121);
        assert!(g.abs_phi.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn circles_and_rays() {
        let mut xi = DVector::from_element(5, Complex::new(0.0, 0.0));
        xi[1] = Complex::new(1.0, 0.0);
        xi[3] = Complex::new(0.0, 1.0);
        let ef = Eigenfunction::new(xi, Complex::new(0.0, 0.01), Dictionary::linear(4), Normalization::Unnormalized);
        let g = rasterize_level_sets(&ef, &SliceSpec::default_for(4, 21)).unwrap();
        for (ib, &vb) in g.b.iter().enumerate() {
            for (ia, &va) in g.a.iter().enumerate() {
                let (r, ph) = g.node(ia, ib);
                assert!((r - va.hypot(vb)).abs() < 1e-12);
                if r > 0.0 {
                    let expect = vb.atan2(va);
                    let expect = if expect >= std::f64::consts::PI { -std::f64::consts::PI } else { expect };
                    assert!((ph - expect).abs() < 1e-12);
                }
            }
        }
        assert_eq!((g.a[0], g.a[20]), (-2.0, 2.0));
    }

    #[test]
    fn rejects_tiny_resolution() {
        let ef = Eigenfunction::from_real(&[1.0, 0.0, 0.0, 0.0, 0.0], Complex::new(0.0, 0.0), Dictionary::linear(4));
        assert!(rasterize_level_sets(&ef, &SliceSpec::default_for(4, 1)).is_err());
    }
}
