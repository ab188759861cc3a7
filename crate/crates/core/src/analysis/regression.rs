use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fringe::{FringeFit, FringePoint};
use crate::error::{domain, Error, Result};

/// Refractive-index change from a phase: `lambda phi / (2 pi L)`.
pub fn phase_to_index(phi: f64, wavelength: f64, channel_length: f64) -> Result<f64> {
    if !(wavelength > 0.0 && channel_length > 0.0) {
        return Err(domain(format!("wavelength {wavelength} and channel length {channel_length} must be positive")));
    }
    Ok(wavelength * phi / (2.0 * PI * channel_length))
}

/// Index-versus-concentration line from ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexRegression {
    pub slope: f64,
    pub slope_err: f64,
    pub intercept: f64,
    pub intercept_err: f64,
    pub points: usize,
}

pub fn fit_index_slope(data: &[(f64, f64)]) -> Result<IndexRegression> {
    let n = data.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} points, at least 3 needed")));
    }
    if data.iter().any(|(c, d)| !c.is_finite() || !d.is_finite()) {
        return Err(domain("regression data must be finite"));
    }
    let nf = n as f64;
    let mean_c = data.iter().map(|d| d.0).sum::<f64>() / nf;
    let mean_y = data.iter().map(|d| d.1).sum::<f64>() / nf;
    let sxx: f64 = data.iter().map(|d| (d.0 - mean_c).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("concentrations have no spread".into()));
    }
    let sxy: f64 = data.iter().map(|d| (d.0 - mean_c) * (d.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_c;
    let rss: f64 = data.iter().map(|d| (d.1 - intercept - slope * d.0).powi(2)).sum();
    let s2 = rss / (nf - 2.0);
    Ok(IndexRegression {
        slope,
        slope_err: (s2 / sxx).sqrt(),
        intercept,
        intercept_err: (s2 * (1.0 / nf + mean_c * mean_c / sxx)).sqrt(),
        points: n,
    })
}

/// Per-point optical phases `phi = (psi - theta) / h`, where `psi` inverts
/// the observed `p` and the cosine branch is the one closest to the fitted
/// fringe at that `x`. Observations beyond the fitted range clamp to the extremum.
pub fn point_phases(fit: &FringeFit, points: &[FringePoint]) -> Result<Vec<f64>> {
    if !(fit.visibility > 0.0) {
        return Err(domain("cannot invert a fringe with zero visibility"));
    }
    let h = fit.harmonic.order();
    Ok(points
        .iter()
        .map(|pt| {
            let u = ((2.0 * pt.p - 1.0) / fit.visibility).clamp(-1.0, 1.0).acos();
            let predicted = h * fit.alpha * pt.x + fit.phase_offset;
            let k = (predicted / (2.0 * PI)).round();
            let psi = [-1.0, 0.0, 1.0]
                .iter()
                .flat_map(|dk| {
                    let base = 2.0 * PI * (k + dk);
                    [base + u, base - u]
                })
                .min_by(|a, b| (a - predicted).abs().total_cmp(&(b - predicted).abs()))
                .expect("six candidates");
            (psi - fit.phase_offset) / h
        })
        .collect())
}
