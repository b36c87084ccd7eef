use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Outside temperature, piecewise-linear between samples and clamped outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousSignal {
    samples: Vec<(f64, f64)>,
}

impl ExogenousSignal {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Ingestion("exogenous signal has no samples".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Ingestion(format!(
                    "exogenous times must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if samples.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::Ingestion("exogenous signal contains non-finite values".into()));
        }
        Ok(Self { samples })
    }

    pub fn constant(theta: f64) -> Self {
        Self { samples: vec![(0.0, theta)] }
    }

    pub fn ramp(t0: f64, theta0: f64, t1: f64, theta1: f64) -> Result<Self> {
        Self::new(vec![(t0, theta0), (t1, theta1)])
    }

    /// Parses a two-column CSV with header `t_seconds,theta_ext_degC`.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "t_seconds" || &headers[1] != "theta_ext_degC" {
            return Err(Error::Ingestion(format!(
                "exogenous CSV header must be `t_seconds,theta_ext_degC`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Ingestion(format!("row {}: missing column {k}", line + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Ingestion(format!("row {}: {e}", line + 2)))
            };
            samples.push((parse(0)?, parse(1)?));
        }
        Self::new(samples)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn at(&self, t: f64) -> f64 {
        let s = &self.samples;
        if t <= s[0].0 {
            return s[0].1;
        }
        let last = s[s.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let hi = s.partition_point(|&(ts, _)| ts <= t);
        let (ta, va) = s[hi - 1];
        let (tb, vb) = s[hi];
        va + (vb - va) * (t - ta) / (tb - ta)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }
}
