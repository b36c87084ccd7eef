use crate::error::{Error, Result};
use crate::spectral::Eigenfunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope t + intercept`.
///
/// `r_squared` is 1 when the data has no spread and is fitted exactly.
pub fn fit_log_linear(t: &[f64], y: &[f64]) -> Result<LinearFit> {
    if t.len() != y.len() {
        return Err(Error::config(format!("{} abscissae but {} ordinates", t.len(), y.len())));
    }
    let n = t.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 samples for a fit, got {n}")));
    }
    let nf = n as f64;
    let tm = t.iter().sum::<f64>() / nf;
    let ym = y.iter().sum::<f64>() / nf;
    let stt: f64 = t.iter().map(|v| (v - tm).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::InsufficientData("all samples share one time".into()));
    }
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let ss_tot: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let ss_res: f64 = t.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// `std(r) / mean(r)` of `r = |phi(x)|` over the supplied states (population std).
pub fn invariance_metric<S: AsRef<[f64]>>(states: &[S], ef: &Eigenfunction) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::InsufficientData("invariance metric over an empty window".into()));
    }
    let r: Vec<f64> = states.iter().map(|x| ef.eval(x.as_ref()).norm()).collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    if !(mean > 1e-300) || !mean.is_finite() {
        return Err(Error::UndefinedMetric(format!("mean |phi| is {mean:e}")));
    }
    let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingFit {
    /// Fitted decay rate `-d ln r / dt`, 1/s.
    pub d_hat: f64,
    pub r_squared: f64,
    /// `ln r` at `t = 0` from the fit.
    pub intercept: f64,
}

/// Least-squares fit of `ln |phi(x(t))|` against `t`.
pub fn damping_metric<S: AsRef<[f64]>>(times: &[f64], states: &[S], ef: &Eigenfunction) -> Result<DampingFit> {
    if times.len() != states.len() {
        return Err(Error::config(format!("{} times but {} states", times.len(), states.len())));
    }
    if times.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 samples, got {}", times.len())));
    }
    let mut y = Vec::with_capacity(states.len());
    for (t, x) in times.iter().zip(states) {
        let r = ef.eval(x.as_ref()).norm();
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::UndefinedMetric(format!("|phi| = {r} at t = {t}")));
        }
        y.push(r.ln());
    }
    let fit = fit_log_linear(times, &y)?;
    Ok(DampingFit { d_hat: -fit.slope, r_squared: fit.r_squared, intercept: fit.intercept })
}
