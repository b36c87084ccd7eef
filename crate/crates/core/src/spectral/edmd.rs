use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::{Complex, DMatrix, DVector};

use super::dictionary::Dictionary;
use super::eigenfunction::{Eigenfunction, Normalization};
use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_SVD_TOLERANCE: f64 = 1e-10;

/// Eigenvalues closer than this (relative) are treated as one cluster when extracting eigenvectors.
const CLUSTER_TOL: f64 = 1e-9;

/// Snapshot matrices `X = [x_0 .. x_{m-1}]` and `X' = [x_1 .. x_m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPair {
    pub x: DMatrix<f64>,
    pub x_next: DMatrix<f64>,
    pub h: f64,
}

impl SnapshotPair {
    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }
}

/// Stacks a uniformly sampled series into snapshot matrices.
///
/// `times[k]` must equal `times[0] + k h` to within `1e-6 h`.
pub fn build_snapshots<S: AsRef<[f64]>>(times: &[f64], states: &[S], h: f64) -> Result<SnapshotPair> {
    if times.len() != states.len() {
        return Err(Error::Ingestion(format!(
            "{} times but {} states",
            times.len(),
            states.len()
        )));
    }
    if states.len() < 2 {
        return Err(Error::Ingestion(format!("need at least 2 samples, got {}", states.len())));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Ingestion(format!("sampling period must be positive, got {h}")));
    }
    for (k, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if !((step - h).abs() <= 1e-6 * h) {
            return Err(Error::Ingestion(format!(
                "non-uniform sampling between samples {k} and {}: spacing {step} s, expected {h} s",
                k + 1
            )));
        }
    }
    let n = states[0].as_ref().len();
    if n == 0 {
        return Err(Error::Ingestion("states have zero dimension".into()));
    }
    if let Some(k) = states.iter().position(|s| s.as_ref().len() != n) {
        return Err(Error::Ingestion(format!("sample {k} has dimension {}, expected {n}", states[k].as_ref().len())));
    }
    if states.iter().any(|s| s.as_ref().iter().any(|v| !v.is_finite())) {
        return Err(Error::Ingestion("series contains non-finite values".into()));
    }
    let m = states.len() - 1;
    let x = DMatrix::from_fn(n, m, |i, k| states[k].as_ref()[i]);
    let x_next = DMatrix::from_fn(n, m, |i, k| states[k + 1].as_ref()[i]);
    Ok(SnapshotPair { x, x_next, h })
}

/// Applies `gamma` to every column.
pub fn lift_matrix(x: &DMatrix<f64>, dictionary: &Dictionary) -> DMatrix<f64> {
    assert_eq!(x.nrows(), dictionary.n(), "dictionary dimension does not match state dimension");
    let q = dictionary.q();
    let mut out = DMatrix::zeros(q, x.ncols());
    let mut buf = vec![0.0; q];
    for (k, col) in x.column_iter().enumerate() {
        let xs: Vec<f64> = col.iter().copied().collect();
        dictionary.eval_into(&xs, &mut buf);
        out.column_mut(k).copy_from_slice(&buf);
    }
    out
}

/// `(Gamma_X, Gamma_X')`.
pub fn lift(snapshots: &SnapshotPair, dictionary: &Dictionary) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if snapshots.n() != dictionary.n() {
        return Err(Error::config(format!(
            "dictionary expects dimension {}, snapshots have {}",
            dictionary.n(),
            snapshots.n()
        )));
    }
    Ok((lift_matrix(&snapshots.x, dictionary), lift_matrix(&snapshots.x_next, dictionary)))
}

/// `U = Gamma_X' pinv(Gamma_X)` with relative singular-value truncation.
pub fn estimate_koopman_matrix(
    gamma_x: &DMatrix<f64>,
    gamma_x_next: &DMatrix<f64>,
    svd_tolerance: f64,
) -> Result<DMatrix<f64>> {
    if gamma_x.shape() != gamma_x_next.shape() {
        return Err(Error::DegenerateData(format!(
            "lifted matrices differ in shape: {:?} vs {:?}",
            gamma_x.shape(),
            gamma_x_next.shape()
        )));
    }
    if gamma_x.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateData("lifted snapshot matrix is identically zero".into()));
    }
    let (q, m) = gamma_x.shape();
    if m < q {
        warn!("EDMD with fewer snapshots ({m}) than observables ({q}); the regression is underdetermined");
    }
    let (pinv, rank) = linalg::pinv(gamma_x, svd_tolerance)?;
    if rank < q.min(m) {
        log::debug!("pseudo-inverse kept {rank} of {} singular values", q.min(m));
    }
    Ok(gamma_x_next * pinv)
}

/// Eigen-structure of an EDMD matrix.
///
/// `left_eigenvectors[j]` satisfies `xi^T U = lambda_j xi^T`.
#[derive(Debug, Clone)]
pub struct KoopmanSpectrum {
    pub u: DMatrix<f64>,
    pub h: f64,
    pub eigenvalues: Vec<Complex<f64>>,
    pub continuous_eigenvalues: Vec<Complex<f64>>,
    pub left_eigenvectors: Vec<DVector<Complex<f64>>>,
    /// `|xi^T U - lambda xi^T| / (|U| |xi|)` for each mode.
    pub residuals: Vec<f64>,
    pub dictionary: Dictionary,
    pub svd_tolerance: f64,
    pub normalization: Normalization,
}

fn principal_log(lambda: Complex<f64>) -> Complex<f64> {
    Complex::new(lambda.norm().ln(), lambda.im.atan2(lambda.re))
}

/// Left eigenvector for `lambda` from the null space of `U^T - lambda I`, unit norm,
/// with its largest component rotated onto the positive real axis.
fn left_eigenvector(u_t: &DMatrix<f64>, lambda: Complex<f64>, cluster_rank: usize) -> Result<DVector<Complex<f64>>> {
    let q = u_t.nrows();
    let mut v = if lambda.im == 0.0 {
        let shifted = u_t - DMatrix::identity(q, q) * lambda.re;
        let vs = linalg::real_null_vectors(&shifted, cluster_rank + 1)?;
        vs[cluster_rank].map(|x| Complex::new(x, 0.0))
    } else {
        let shifted = u_t.map(|x| Complex::new(x, 0.0)) - DMatrix::identity(q, q) * lambda;
        let vs = linalg::complex_null_vectors(&shifted, cluster_rank + 1)?;
        vs[cluster_rank].clone()
    };
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, c)| if c.norm() > best.1 { (i, c.norm()) } else { best });
    let pivot = v[imax];
    if pivot.norm() > 0.0 {
        let rot = pivot.conj() / pivot.norm();
        v *= rot;
        v[imax].im = 0.0;
    }
    Ok(v)
}

/// Full eigendecomposition of `U` with left eigenvectors and `nu = ln(lambda) / h`.
///
/// Conjugate pairs get exactly conjugate eigenvectors. Vectors are unit-norm; see
/// [`KoopmanSpectrum::normalize_on`] for the data-based scale.
pub fn eigendecompose(u: &DMatrix<f64>, h: f64, dictionary: &Dictionary, svd_tolerance: f64) -> Result<KoopmanSpectrum> {
    if !u.is_square() || u.nrows() == 0 {
        return Err(Error::Numerical(format!("Koopman matrix must be square, got {:?}", u.shape())));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Koopman matrix contains non-finite entries".into()));
    }
    if u.nrows() != dictionary.q() {
        return Err(Error::config(format!(
            "Koopman matrix is {}x{} but the dictionary has q = {}",
            u.nrows(),
            u.ncols(),
            dictionary.q()
        )));
    }
    let schur = u
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let mut eigenvalues: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    // Order: descending modulus, then positive imaginary part first.
    eigenvalues.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));

    let u_t = u.transpose();
    let u_norm = u.norm().max(f64::MIN_POSITIVE);
    let mut vectors: Vec<DVector<Complex<f64>>> = Vec::with_capacity(eigenvalues.len());
    let mut residuals = Vec::with_capacity(eigenvalues.len());
    let mut continuous = Vec::with_capacity(eigenvalues.len());
    for (j, &lambda) in eigenvalues.iter().enumerate() {
        // Represent each conjugate pair by its Im > 0 member.
        let rep = if lambda.im < 0.0 { lambda.conj() } else { lambda };
        let cluster_rank = eigenvalues[..j]
            .iter()
            .filter(|&&mu| (mu.im < 0.0) == (lambda.im < 0.0))
            .filter(|&&mu| (mu - lambda).norm() <= CLUSTER_TOL * lambda.norm().max(1.0))
            .count();
        let mut v = left_eigenvector(&u_t, rep, cluster_rank)?;
        if lambda.im < 0.0 {
            v = v.map(|c| c.conj());
        }
        let resid = (&u_t.map(|x| Complex::new(x, 0.0)) * &v - &v * lambda).norm() / (u_norm * v.norm());
        if resid > 1e-8 {
            warn!("left eigenvector {j} (lambda = {lambda}) has relative residual {resid:.3e}");
        }
        let nu = principal_log(lambda) / h;
        if (nu.im * h).abs() > 0.95 * PI {
            warn!(
                "eigenvalue {j} has |arg lambda| = {:.4} rad, within 5% of pi; the sampling period may alias it",
                (nu.im * h).abs()
            );
        }
        vectors.push(v);
        residuals.push(resid);
        continuous.push(nu);
    }
    Ok(KoopmanSpectrum {
        u: u.clone(),
        h,
        eigenvalues,
        continuous_eigenvalues: continuous,
        left_eigenvectors: vectors,
        residuals,
        dictionary: dictionary.clone(),
        svd_tolerance,
        normalization: Normalization::UnitNorm,
    })
}

/// Snapshot construction, lifting, regression and eigendecomposition in one call, with
/// eigenvectors scaled so that `max_k |phi(x_k)| = 1` over the fitting data.
pub fn fit(snapshots: &SnapshotPair, dictionary: &Dictionary, svd_tolerance: f64) -> Result<KoopmanSpectrum> {
    let (gx, gy) = lift(snapshots, dictionary)?;
    let u = estimate_koopman_matrix(&gx, &gy, svd_tolerance)?;
    let mut spectrum = eigendecompose(&u, snapshots.h, dictionary, svd_tolerance)?;
    spectrum.normalize_on(&gx);
    Ok(spectrum)
}

impl KoopmanSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Rescales every eigenvector by a positive real so that `max_k |xi^T gamma_k| = 1`
    /// over the columns of `gamma_x`. Eigenfunctions vanishing on the data are left alone.
    pub fn normalize_on(&mut self, gamma_x: &DMatrix<f64>) {
        let gc = gamma_x.map(|x| Complex::new(x, 0.0));
        for v in &mut self.left_eigenvectors {
            let values = gc.tr_mul(v);
            let peak = values.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if peak > 0.0 && peak.is_finite() {
                *v /= Complex::new(peak, 0.0);
            }
        }
        self.normalization = Normalization::MaxAbsOnData;
    }

    pub fn period_s(&self, j: usize) -> f64 {
        2.0 * PI / self.continuous_eigenvalues[j].im.abs()
    }

    pub fn eigenfunction(&self, j: usize) -> Eigenfunction {
        Eigenfunction::new(
            self.left_eigenvectors[j].clone(),
            self.continuous_eigenvalues[j],
            self.dictionary.clone(),
            self.normalization,
        )
    }

    /// Mode indices sorted by `|Re nu|`, ties kept in eigenvalue order.
    pub fn order_by_damping(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.continuous_eigenvalues[a]
                .re
                .abs()
                .total_cmp(&self.continuous_eigenvalues[b].re.abs())
        });
        idx
    }

    /// CSV `j,re_lambda,im_lambda,re_nu,im_nu,period_minutes,damping_per_s` sorted by `|Re nu|`.
    ///
    /// `damping_per_s` is `-Re nu`, positive for decaying modes.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["j", "re_lambda", "im_lambda", "re_nu", "im_nu", "period_minutes", "damping_per_s"])?;
        for j in self.order_by_damping() {
            let lam = self.eigenvalues[j];
            let nu = self.continuous_eigenvalues[j];
            w.write_record([
                j.to_string(),
                lam.re.to_string(),
                lam.im.to_string(),
                nu.re.to_string(),
                nu.im.to_string(),
                (self.period_s(j) / 60.0).to_string(),
                (-nu.re).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Selection criteria for the oscillatory mode, periods in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeBand {
    pub period_min_s: f64,
    pub period_max_s: f64,
    pub max_damping: f64,
}

impl Default for ModeBand {
    fn default() -> Self {
        Self { period_min_s: 600.0, period_max_s: 1200.0, max_damping: f64::INFINITY }
    }
}

/// Least-damped mode with period inside the band, returned as its `Im nu > 0` member.
pub fn select_oscillatory_mode(spectrum: &KoopmanSpectrum, band: ModeBand) -> Result<Eigenfunction> {
    let upper: Vec<usize> = (0..spectrum.len()).filter(|&j| spectrum.continuous_eigenvalues[j].im > 0.0).collect();
    let qualifying = upper.iter().copied().filter(|&j| {
        let p = spectrum.period_s(j);
        spectrum.continuous_eigenvalues[j].re.abs() <= band.max_damping
            && p >= band.period_min_s
            && p <= band.period_max_s
    });
    let best = qualifying.min_by(|&a, &b| {
        spectrum.continuous_eigenvalues[a]
            .re
            .abs()
            .total_cmp(&spectrum.continuous_eigenvalues[b].re.abs())
    });
    if let Some(j) = best {
        return Ok(spectrum.eigenfunction(j));
    }

    // Rank the rest by how far their period falls outside the band, then by damping.
    let distance = |j: usize| {
        let p = spectrum.period_s(j);
        if p < band.period_min_s {
            band.period_min_s - p
        } else if p > band.period_max_s {
            p - band.period_max_s
        } else {
            0.0
        }
    };
    let mut near = upper;
    near.sort_by(|&a, &b| {
        distance(a).total_cmp(&distance(b)).then(
            spectrum.continuous_eigenvalues[a]
                .re
                .abs()
                .total_cmp(&spectrum.continuous_eigenvalues[b].re.abs()),
        )
    });
    let candidates = near
        .iter()
        .take(5)
        .map(|&j| {
            format!(
                "[j={j} period={:.2} min Re nu={:.3e}/s]",
                spectrum.period_s(j) / 60.0,
                spectrum.continuous_eigenvalues[j].re
            )
        })
        .collect::<Vec<_>>()
        .join(" ");
    Err(Error::ModeNotFound {
        band_min_s: band.period_min_s,
        band_max_s: band.period_max_s,
        max_damping: band.max_damping,
        candidates: if candidates.is_empty() { "none".into() } else { candidates },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_series(a: f64, m: usize) -> (Vec<f64>, Vec<[f64; 1]>) {
        let mut x = 1.0;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for k in 0..=m {
            times.push(k as f64);
            states.push([x]);
            x *= a;
        }
        (times, states)
    }

    #[test]
    fn snapshot_shapes() {
        let t = [0.0, 1.0, 2.0];
        let s = [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let sp = build_snapshots(&t, &s, 1.0).unwrap();
        assert_eq!(sp.x, DMatrix::from_column_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(sp.x_next, DMatrix::from_column_slice(2, 2, &[3.0, 4.0, 5.0, 6.0]));
        assert!(build_snapshots(&t[..1], &s[..1], 1.0).is_err());
    }

    #[test]
    fn rejects_non_uniform_spacing() {
        let t = [0.0, 1.0, 2.5];
        let s = [[1.0], [2.0], [3.0]];
        assert!(matches!(build_snapshots(&t, &s, 1.0), Err(Error::Ingestion(_))));
    }

    #[test]
    fn scalar_decay_eigenvalues() {
        let (t, s) = scalar_series(0.5, 30);
        let sp = build_snapshots(&t, &s, 1.0).unwrap();
        let spec = fit(&sp, &Dictionary::linear(1), DEFAULT_SVD_TOLERANCE).unwrap();
        let mut re: Vec<f64> = spec.eigenvalues.iter().map(|c| c.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] - 0.5).abs() < 1e-10 && (re[1] - 1.0).abs() < 1e-10, "{re:?}");
    }

    #[test]
    fn identity_dynamics() {
        let g = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 0.3, -0.2, 0.7]);
        let u = estimate_koopman_matrix(&g, &g, DEFAULT_SVD_TOLERANCE).unwrap();
        assert!((&u * &g - &g).norm() < 1e-12);
        let spec = eigendecompose(&u, 1.0, &Dictionary::linear(1), DEFAULT_SVD_TOLERANCE).unwrap();
        assert!(spec.eigenvalues.iter().all(|l| (l - Complex::new(1.0, 0.0)).norm() < 1e-10));
        assert!(spec.continuous_eigenvalues.iter().all(|n| n.norm() < 1e-10));
    }

    #[test]
    fn zero_lift_is_degenerate() {
        let z = DMatrix::zeros(3, 5);
        assert!(matches!(estimate_koopman_matrix(&z, &z, 1e-10), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn rank_deficient_regression_on_retained_subspace() {
        // Duplicate observable rows make Gamma_X rank-deficient.
        let gx = DMatrix::from_row_slice(3, 4, &[1.0, 1.0, 1.0, 1.0, 0.1, 0.4, -0.3, 0.2, 0.1, 0.4, -0.3, 0.2]);
        let gy = DMatrix::from_row_slice(3, 4, &[1.0, 1.0, 1.0, 1.0, 0.05, 0.2, -0.15, 0.1, 0.05, 0.2, -0.15, 0.1]);
        let u = estimate_koopman_matrix(&gx, &gy, DEFAULT_SVD_TOLERANCE).unwrap();
        assert!((&u * &gx - &gy).norm() < 1e-8 * gy.norm());
    }

    #[test]
    fn rotation_gives_twenty_minute_period() {
        let th = PI / 10.0;
        let lam = Complex::new(th.cos(), th.sin());
        let nu = principal_log(lam) / 60.0;
        assert!(nu.re.abs() < 1e-15);
        assert!((nu.im - PI / 600.0).abs() < 1e-15);
        assert!((2.0 * PI / nu.im - 1200.0).abs() < 1e-9);
    }

    #[test]
    fn conjugate_pairs_have_conjugate_vectors() {
        let (c, s) = ((0.3f64).cos() * 0.99, (0.3f64).sin() * 0.99);
        let u = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.2, s, c]);
        let spec = eigendecompose(&u, 60.0, &Dictionary::linear(2), DEFAULT_SVD_TOLERANCE).unwrap();
        let pos = spec.eigenvalues.iter().position(|l| l.im > 1e-6).unwrap();
        let neg = spec.eigenvalues.iter().position(|l| l.im < -1e-6).unwrap();
        assert_eq!(spec.eigenvalues[pos], spec.eigenvalues[neg].conj());
        assert_eq!(spec.left_eigenvectors[pos], spec.left_eigenvectors[neg].map(|z| z.conj()));
        assert_eq!(spec.continuous_eigenvalues[pos], spec.continuous_eigenvalues[neg].conj());
        assert!(spec.residuals.iter().all(|&r| r < 1e-12), "{:?}", spec.residuals);
    }

    fn synthetic_spectrum(nus: &[Complex<f64>]) -> KoopmanSpectrum {
        let q = nus.len();
        KoopmanSpectrum {
            u: DMatrix::identity(q, q),
            h: 60.0,
            eigenvalues: nus.iter().map(|nu| (nu * 60.0).exp()).collect(),
            continuous_eigenvalues: nus.to_vec(),
            left_eigenvectors: (0..q).map(|j| DVector::from_fn(q, |i, _| Complex::new((i == j) as u8 as f64, 0.0))).collect(),
            residuals: vec![0.0; q],
            dictionary: Dictionary::linear(q - 1),
            svd_tolerance: DEFAULT_SVD_TOLERANCE,
            normalization: Normalization::UnitNorm,
        }
    }

    #[test]
    fn selects_fourteen_minute_mode() {
        let w = 2.0 * PI / 839.0;
        let spec = synthetic_spectrum(&[
            Complex::new(0.0, 0.0),
            Complex::new(-1e-5, w),
            Complex::new(-1e-5, -w),
            Complex::new(-0.01, 0.0),
        ]);
        let band = ModeBand { period_min_s: 600.0, period_max_s: 1200.0, max_damping: 1.0 };
        let ef = select_oscillatory_mode(&spec, band).unwrap();
        assert_eq!(ef.nu, Complex::new(-1e-5, w));
        assert!((2.0 * PI / ef.nu.im / 60.0 - 13.98).abs() < 0.01);
    }

    #[test]
    fn least_damped_qualifier_wins() {
        let spec = synthetic_spectrum(&[
            Complex::new(-0.001, 2.0 * PI / 700.0),
            Complex::new(-0.0001, 2.0 * PI / 900.0),
            Complex::new(0.0, 0.0),
        ]);
        let ef = select_oscillatory_mode(&spec, ModeBand { max_damping: 1.0, ..ModeBand::default() }).unwrap();
        assert_eq!(ef.nu.re, -0.0001);
    }

    #[test]
    fn empty_band_lists_candidates() {
        let spec = synthetic_spectrum(&[Complex::new(-0.001, 2.0 * PI / 100.0), Complex::new(0.0, 0.0)]);
        match select_oscillatory_mode(&spec, ModeBand::default()) {
            Err(Error::ModeNotFound { candidates, .. }) => assert!(candidates.contains("j=0"), "{candidates}"),
            other => panic!("expected ModeNotFound, got {other:?}"),
        }
    }

    #[test]
    fn spectrum_csv_sorted_by_damping() {
        let spec = synthetic_spectrum(&[Complex::new(-0.01, 0.0), Complex::new(0.0, 0.0), Complex::new(-0.001, 0.01)]);
        let mut buf = Vec::new();
        spec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let js: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(js, ["1", "2", "0"]);
        assert!(text.starts_with("j,re_lambda,im_lambda,re_nu,im_nu,period_minutes,damping_per_s\n"));
    }
}
