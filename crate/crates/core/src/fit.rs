//! Least-squares power-law fits for δ-sweeps and refinement studies.

use crate::error::{Error, Result};
use serde::Serialize;

/// Result of fitting log(value) = slope·log(δ) + intercept.
///
/// `bound_constant` is the maximum of the raw values over the sweep — the
/// numeric stand-in for a uniform-in-δ bound constant. The raw pairs ride
/// along so every slope is re-derivable from emitted reports alone.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub quantity: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub bound_constant: f64,
    pub points: Vec<(f64, f64)>,
}

/// Fit a power law through (δ, value) pairs. Requires ≥ 4 strictly positive
/// points (zeros carry no slope information and poison the log).
pub fn fit_loglog(quantity: &str, points: &[(f64, f64)]) -> Result<ScalingFit> {
    let usable: Vec<(f64, f64)> =
        points.iter().copied().filter(|&(d, v)| d > 0.0 && v > 0.0).collect();
    if usable.len() < 4 {
        return Err(Error::FitUnderdetermined { need: 4, got: usable.len() });
    }
    let n = usable.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(d, v) in &usable {
        let x = d.ln();
        let y = v.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let ss_tot = syy - sy * sy / n;
    let mut ss_res = 0.0;
    for &(d, v) in &usable {
        let e = v.ln() - (slope * d.ln() + intercept);
        ss_res += e * e;
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let bound_constant = points.iter().map(|&(_, v)| v).fold(f64::MIN, f64::max);
    Ok(ScalingFit {
        quantity: quantity.to_string(),
        slope,
        intercept,
        r_squared,
        bound_constant,
        points: points.to_vec(),
    })
}

/// Observed convergence order from errors at a geometric ladder of
/// resolutions: slope of log(error) against log(h).
pub fn convergence_order(h_and_err: &[(f64, f64)]) -> Result<f64> {
    if h_and_err.len() < 2 {
        return Err(Error::FitUnderdetermined { need: 2, got: h_and_err.len() });
    }
    if h_and_err.len() < 4 {
        // two or three points: use the end-to-end ratio
        let (h0, e0) = h_and_err[0];
        let (h1, e1) = h_and_err[h_and_err.len() - 1];
        return Ok((e0 / e1).ln() / (h0 / h1).ln());
    }
    fit_loglog("order", h_and_err).map(|f| f.slope)
}
