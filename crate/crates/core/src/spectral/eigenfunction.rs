use std::path::Path;

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use super::dictionary::{Dictionary, DictionaryKind};
use crate::error::{Error, Result};

/// Scale convention applied to an eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Unit Euclidean norm with the largest component real and positive.
    UnitNorm,
    /// `max_k |phi(x_k)| = 1` over the fitting snapshots.
    MaxAbsOnData,
    /// Arbitrary user scale.
    Unnormalized,
}

/// `phi(x) = xi^T gamma(x)` for a fixed dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenfunction {
    pub xi: DVector<Complex<f64>>,
    pub nu: Complex<f64>,
    pub dictionary: Dictionary,
    pub normalization: Normalization,
}

impl Eigenfunction {
    pub fn new(xi: DVector<Complex<f64>>, nu: Complex<f64>, dictionary: Dictionary, normalization: Normalization) -> Self {
        assert_eq!(xi.len(), dictionary.q(), "coefficient count must equal dictionary size");
        Self { xi, nu, dictionary, normalization }
    }

    /// Eigenfunction with real coefficients.
    pub fn from_real(xi: &[f64], nu: Complex<f64>, dictionary: Dictionary) -> Self {
        let xi = DVector::from_iterator(xi.len(), xi.iter().map(|&v| Complex::new(v, 0.0)));
        Self::new(xi, nu, dictionary, Normalization::Unnormalized)
    }

    pub fn n(&self) -> usize {
        self.dictionary.n()
    }

    pub fn period_s(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.nu.im.abs()
    }

    pub fn eval(&self, x: &[f64]) -> Complex<f64> {
        let g = self.dictionary.eval(x);
        self.xi.iter().zip(&g).map(|(c, &v)| c * v).sum()
    }

    /// `J_gamma(x)^T xi`, one complex entry per state coordinate.
    pub fn grad(&self, x: &[f64]) -> Vec<Complex<f64>> {
        let jac = self.dictionary.jacobian(x);
        (0..self.n())
            .map(|i| jac.column(i).iter().zip(self.xi.iter()).map(|(&d, c)| c * d).sum())
            .collect()
    }

    pub fn conj(&self) -> Self {
        Self { xi: self.xi.map(|c| c.conj()), nu: self.nu.conj(), ..self.clone() }
    }

    /// Same eigenfunction times a positive real factor.
    pub fn scaled(&self, c: f64) -> Self {
        Self { xi: &self.xi * Complex::new(c, 0.0), normalization: Normalization::Unnormalized, ..self.clone() }
    }

    pub fn to_record(&self) -> EigenfunctionRecord {
        EigenfunctionRecord {
            dictionary: self.dictionary.kind(),
            n: self.dictionary.n(),
            q: self.dictionary.q(),
            xi_re: self.xi.iter().map(|c| c.re).collect(),
            xi_im: self.xi.iter().map(|c| c.im).collect(),
            nu_re: self.nu.re,
            nu_im: self.nu.im,
            normalization: self.normalization,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(&self.to_record())?)
    }

    /// Parses a record written by [`Eigenfunction::to_toml`]. Custom dictionaries cannot be
    /// rebuilt from text; use [`EigenfunctionRecord::with_dictionary`] for those.
    pub fn from_toml(text: &str) -> Result<Self> {
        let rec: EigenfunctionRecord = toml::from_str(text)?;
        rec.into_eigenfunction()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Serialized form of an [`Eigenfunction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenfunctionRecord {
    pub dictionary: DictionaryKind,
    pub n: usize,
    pub q: usize,
    pub nu_re: f64,
    pub nu_im: f64,
    pub normalization: Normalization,
    pub xi_re: Vec<f64>,
    pub xi_im: Vec<f64>,
}

impl EigenfunctionRecord {
    fn check(&self, dictionary: &Dictionary) -> Result<()> {
        if dictionary.n() != self.n || dictionary.q() != self.q {
            return Err(Error::Ingestion(format!(
                "record has n = {}, q = {} but dictionary has n = {}, q = {}",
                self.n,
                self.q,
                dictionary.n(),
                dictionary.q()
            )));
        }
        if self.xi_re.len() != self.q || self.xi_im.len() != self.q {
            return Err(Error::Ingestion(format!(
                "record lists {} real and {} imaginary coefficients, expected {}",
                self.xi_re.len(),
                self.xi_im.len(),
                self.q
            )));
        }
        Ok(())
    }

    pub fn into_eigenfunction(self) -> Result<Eigenfunction> {
        let dictionary = Dictionary::from_kind(self.dictionary, self.n).ok_or_else(|| {
            Error::Ingestion("record uses a custom dictionary; supply it explicitly".into())
        })?;
        self.with_dictionary(dictionary)
    }

    pub fn with_dictionary(self, dictionary: Dictionary) -> Result<Eigenfunction> {
        self.check(&dictionary)?;
        let xi = DVector::from_iterator(
            self.q,
            self.xi_re.iter().zip(&self.xi_im).map(|(&re, &im)| Complex::new(re, im)),
        );
        Ok(Eigenfunction::new(xi, Complex::new(self.nu_re, self.nu_im), dictionary, self.normalization))
    }
}
