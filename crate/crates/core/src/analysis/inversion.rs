//! Concentration from a single normalized observation on a fitted fringe.
//!
//! The fringe `p = (1 + V cos psi) / 2` with `psi = h alpha C + theta` is
//! inverted branch by branch. Branch `b` is the half-fringe `psi` in
//! `[b pi, (b + 1) pi]`: even branches take `psi = b pi + u`, odd ones
//! `psi = (b + 1) pi - u`, where `u = acos((2p - 1) / V)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fringe::FringeFit;
use crate::error::{domain, Error, Result};

/// Normal quantile used for the default 95% interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// A normalized probability and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub p: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationEstimate {
    pub concentration: f64,
    pub sigma: f64,
    pub interval: (f64, f64),
    pub branch: i64,
}

pub fn estimate_concentration(
    fit: &FringeFit,
    obs: Observation,
    branch_hint: Option<i64>,
) -> Result<ConcentrationEstimate> {
    estimate_concentration_with(fit, obs, branch_hint, Z_95)
}

/// As [`estimate_concentration`] with an explicit interval half-width in standard errors.
pub fn estimate_concentration_with(
    fit: &FringeFit,
    obs: Observation,
    branch_hint: Option<i64>,
    z: f64,
) -> Result<ConcentrationEstimate> {
    if !(fit.visibility > 0.0) || !(fit.alpha > 0.0) {
        return Err(domain("fit must have positive visibility and phase scale"));
    }
    if !(0.0..=1.0).contains(&obs.p) || !(obs.sigma >= 0.0) || !(z >= 0.0) {
        return Err(domain(format!("invalid observation p = {}, sigma = {}", obs.p, obs.sigma)));
    }
    let v = fit.visibility;
    let y = (2.0 * obs.p - 1.0) / v;
    if y.abs() > 1.0 {
        return Err(Error::OutOfRange { observed: obs.p, low: (1.0 - v) / 2.0, high: (1.0 + v) / 2.0 });
    }
    let u = y.acos();
    let scale = fit.harmonic.order() * fit.alpha;
    let at_branch = |b: i64| {
        let psi = if b.rem_euclid(2) == 0 { b as f64 * PI + u } else { (b + 1) as f64 * PI - u };
        (psi - fit.phase_offset) / scale
    };

    let branch = match branch_hint {
        Some(b) => b,
        None => {
            let psi_lo = scale * fit.x_min + fit.phase_offset;
            let psi_hi = scale * fit.x_max + fit.phase_offset;
            let tol = 1e-9 * (fit.x_max - fit.x_min).max(1.0);
            let inside: Vec<i64> = ((psi_lo / PI).floor() as i64 - 1..=(psi_hi / PI).ceil() as i64 + 1)
                .filter(|&b| {
                    let c = at_branch(b);
                    c >= fit.x_min - tol && c <= fit.x_max + tol
                })
                .collect();
            match inside.as_slice() {
                [b] => *b,
                other => return Err(Error::Ambiguous { candidates: other.len() }),
            }
        }
    };
    let concentration = at_branch(branch);

    let sign = if branch.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let sin_u = u.sin();
    let d_p = sign * (-2.0 / (v * sin_u)) / scale;
    let grad = [sign * (y / (v * sin_u)) / scale, -concentration / fit.alpha, -1.0 / scale];
    let mut var = d_p * d_p * obs.sigma * obs.sigma;
    for i in 0..3 {
        for j in 0..3 {
            var += grad[i] * fit.covariance[i][j] * grad[j];
        }
    }
    // On the fringe extremes the slope vanishes and the interval is unbounded.
    let sigma = if sin_u == 0.0 || !var.is_finite() { f64::INFINITY } else { var.max(0.0).sqrt() };
    Ok(ConcentrationEstimate {
        concentration,
        sigma,
        interval: (concentration - z * sigma, concentration + z * sigma),
        branch,
    })
}
