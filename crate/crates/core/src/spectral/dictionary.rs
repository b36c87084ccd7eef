use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// User-supplied observables behind the same interface as the built-in dictionaries.
pub trait Basis: Send + Sync {
    fn name(&self) -> &str;
    /// State dimension.
    fn n(&self) -> usize;
    /// Number of observables.
    fn q(&self) -> usize;
    /// Writes `gamma(x)` into `out` (length `q`).
    fn eval_into(&self, x: &[f64], out: &mut [f64]);
    /// Writes the `q x n` Jacobian into `out`.
    fn jacobian_into(&self, x: &[f64], out: &mut DMatrix<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryKind {
    Linear,
    CubicMonomial,
    Custom,
}

impl fmt::Display for DictionaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DictionaryKind::Linear => "linear",
            DictionaryKind::CubicMonomial => "cubic_monomial",
            DictionaryKind::Custom => "custom",
        })
    }
}

/// Observable dictionary `gamma: R^n -> R^q`.
///
/// `Linear` is `[1, x]`. `CubicMonomial` is `[1, x, x.^2, x.^3]` with elementwise powers.
#[derive(Clone)]
pub enum Dictionary {
    Linear { n: usize },
    CubicMonomial { n: usize },
    Custom(Arc<dyn Basis>),
}

impl fmt::Debug for Dictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dictionary::Linear { n } => write!(f, "Linear {{ n: {n} }}"),
            Dictionary::CubicMonomial { n } => write!(f, "CubicMonomial {{ n: {n} }}"),
            Dictionary::Custom(b) => write!(f, "Custom({}, n: {}, q: {})", b.name(), b.n(), b.q()),
        }
    }
}

impl PartialEq for Dictionary {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Dictionary::Linear { n: a }, Dictionary::Linear { n: b }) => a == b,
            (Dictionary::CubicMonomial { n: a }, Dictionary::CubicMonomial { n: b }) => a == b,
            (Dictionary::Custom(a), Dictionary::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Dictionary {
    pub fn linear(n: usize) -> Self {
        Dictionary::Linear { n }
    }

    pub fn cubic(n: usize) -> Self {
        Dictionary::CubicMonomial { n }
    }

    pub fn custom(basis: impl Basis + 'static) -> Self {
        Dictionary::Custom(Arc::new(basis))
    }

    /// Built-in dictionary of the given kind; `None` for `Custom`.
    pub fn from_kind(kind: DictionaryKind, n: usize) -> Option<Self> {
        match kind {
            DictionaryKind::Linear => Some(Self::linear(n)),
            DictionaryKind::CubicMonomial => Some(Self::cubic(n)),
            DictionaryKind::Custom => None,
        }
    }

    pub fn kind(&self) -> DictionaryKind {
        match self {
            Dictionary::Linear { .. } => DictionaryKind::Linear,
            Dictionary::CubicMonomial { .. } => DictionaryKind::CubicMonomial,
            Dictionary::Custom(_) => DictionaryKind::Custom,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Dictionary::Linear { n } | Dictionary::CubicMonomial { n } => *n,
            Dictionary::Custom(b) => b.n(),
        }
    }

    pub fn q(&self) -> usize {
        match self {
            Dictionary::Linear { n } => 1 + n,
            Dictionary::CubicMonomial { n } => 1 + 3 * n,
            Dictionary::Custom(b) => b.q(),
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n(), "state dimension mismatch");
        assert_eq!(out.len(), self.q(), "output length mismatch");
        match self {
            Dictionary::Linear { .. } => {
                out[0] = 1.0;
                out[1..].copy_from_slice(x);
            }
            Dictionary::CubicMonomial { n } => {
                out[0] = 1.0;
                for (i, &xi) in x.iter().enumerate() {
                    out[1 + i] = xi;
                    out[1 + n + i] = xi * xi;
                    out[1 + 2 * n + i] = xi * xi * xi;
                }
            }
            Dictionary::Custom(b) => b.eval_into(x, out),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.q()];
        self.eval_into(x, &mut out);
        out
    }

    /// `q x n` matrix of partial derivatives `d gamma_j / d x_i`.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.n(), "state dimension mismatch");
        let mut jac = DMatrix::zeros(self.q(), self.n());
        match self {
            Dictionary::Linear { n } => {
                for i in 0..*n {
                    jac[(1 + i, i)] = 1.0;
                }
            }
            Dictionary::CubicMonomial { n } => {
                for (i, &xi) in x.iter().enumerate() {
                    jac[(1 + i, i)] = 1.0;
                    jac[(1 + n + i, i)] = 2.0 * xi;
                    jac[(1 + 2 * n + i, i)] = 3.0 * xi * xi;
                }
            }
            Dictionary::Custom(b) => b.jacobian_into(x, &mut jac),
        }
        jac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_column() {
        let d = Dictionary::linear(4);
        assert_eq!(d.q(), 5);
        assert_eq!(d.eval(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn cubic_column() {
        let d = Dictionary::cubic(4);
        assert_eq!(d.q(), 13);
        assert_eq!(
            d.eval(&[2.0, 0.0, 0.0, 0.0]),
            vec![1.0, 2.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 8.0, 0.0, 0.0, 0.0]
        );
        let zero = d.eval(&[0.0; 4]);
        assert_eq!(zero[0], 1.0);
        assert!(zero[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cubic_jacobian_entries() {
        let d = Dictionary::cubic(4);
        let j = d.jacobian(&[2.0, -1.0, 0.5, 3.0]);
        assert_eq!(j[(9, 0)], 12.0);
        assert_eq!(j[(6, 1)], -2.0);
        assert_eq!(j.row(0).iter().copied().sum::<f64>(), 0.0);
    }
}
