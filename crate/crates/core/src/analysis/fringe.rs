//! Weighted sinusoid fits of normalized fringes,
//! `p(x) = (1 + V cos(h alpha x + theta)) / 2` with harmonic `h` of 1 or 2.
//!
//! For a fixed frequency the model is linear in `(V cos theta, V sin theta)`,
//! so the frequency is profiled on a grid, refined by a parabola through the
//! best grid cell, and the three parameters are then polished jointly.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, linearize, Model};
use crate::error::{domain, Error, Result};

/// One normalized fringe sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub x: f64,
    pub p: f64,
    pub sigma: f64,
}

/// Harmonic of the fringe: 1 for single photons, 2 for the two-photon NOON fringe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Harmonic {
    Single,
    Double,
}

impl Harmonic {
    pub fn order(self) -> f64 {
        match self {
            Harmonic::Single => 1.0,
            Harmonic::Double => 2.0,
        }
    }
}

impl TryFrom<u8> for Harmonic {
    type Error = Error;

    fn try_from(h: u8) -> Result<Self> {
        match h {
            1 => Ok(Harmonic::Single),
            2 => Ok(Harmonic::Double),
            other => Err(domain(format!("harmonic must be 1 or 2, got {other}"))),
        }
    }
}

impl From<Harmonic> for u8 {
    fn from(h: Harmonic) -> u8 {
        h.order() as u8
    }
}

/// Conditions worth a second look in a fit result.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    /// Fitted visibility exceeds 1 by more than three standard errors.
    pub unphysical_visibility: bool,
    /// The fringe amplitude is not significant, so the phase scale is arbitrary.
    pub alpha_unidentified: bool,
}

/// Result of [`fit_fringe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub visibility: f64,
    /// Phase per unit of `x` (radians per percent for concentration sweeps).
    pub alpha: f64,
    /// Constant phase `theta`, wrapped into `(-pi, pi]`.
    pub phase_offset: f64,
    pub harmonic: Harmonic,
    /// Covariance of `(visibility, alpha, phase_offset)`.
    pub covariance: [[f64; 3]; 3],
    /// Unweighted RMS of `p - model`.
    pub residual_rms: f64,
    pub chi2: f64,
    pub dof: usize,
    /// Range of `x` covered by the data.
    pub x_min: f64,
    pub x_max: f64,
    pub flags: FitFlags,
}

impl FringeFit {
    pub fn visibility_err(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn alpha_err(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn phase_offset_err(&self) -> f64 {
        self.covariance[2][2].sqrt()
    }

    /// Fringe period in `x`, `2 pi / (h alpha)`.
    pub fn period(&self) -> f64 {
        2.0 * PI / (self.harmonic.order() * self.alpha)
    }

    pub fn model(&self, x: f64) -> f64 {
        fringe_model(self.visibility, self.alpha, self.phase_offset, self.harmonic.order(), x)
    }
}

pub fn fringe_model(visibility: f64, alpha: f64, phase_offset: f64, harmonic: f64, x: f64) -> f64 {
    0.5 * (1.0 + visibility * (harmonic * alpha * x + phase_offset).cos())
}

/// Search bounds for the phase scale `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    /// Upper bound on `alpha`. Defaults to the Nyquist limit of the sampling
    /// for the requested harmonic, `pi / (h dx_min)`.
    pub alpha_max: Option<f64>,
    /// Lower bound on `alpha`. Defaults to a small fraction of one period over the data span.
    pub alpha_min: Option<f64>,
}

pub fn fit_fringe(points: &[FringePoint], harmonic: Harmonic) -> Result<FringeFit> {
    fit_fringe_with(points, harmonic, FitOptions::default())
}

pub fn fit_fringe_with(points: &[FringePoint], harmonic: Harmonic, options: FitOptions) -> Result<FringeFit> {
    if points.len() < 5 {
        return Err(Error::InsufficientData(format!("{} points, at least 5 needed", points.len())));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ps: Vec<f64> = points.iter().map(|p| p.p).collect();
    if xs.iter().chain(&ps).any(|v| !v.is_finite()) {
        return Err(domain("fringe points must be finite"));
    }
    let weights = inverse_variance_weights(points)?;

    let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = x_max - x_min;
    if span <= 0.0 {
        return Err(Error::InsufficientData("all x values are equal".into()));
    }
    let h = harmonic.order();

    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let min_gap = sorted.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 1e-12 * span).fold(f64::INFINITY, f64::min);
    let alpha_max = options.alpha_max.unwrap_or(PI / (h * min_gap));
    let alpha_min = options.alpha_min.unwrap_or(0.05 * PI / (h * span));
    if !(alpha_min > 0.0 && alpha_max > alpha_min) {
        return Err(domain(format!("invalid alpha search range [{alpha_min}, {alpha_max}]")));
    }

    // Grid fine enough that neighbouring frequencies drift by < 0.05 rad over the span.
    let cells = ((h * (alpha_max - alpha_min) * span / 0.05).ceil() as usize).clamp(200, 200_000);
    let grid: Vec<f64> = (0..=cells).map(|k| alpha_min + (alpha_max - alpha_min) * k as f64 / cells as f64).collect();
    let profile: Vec<(f64, f64, f64)> = grid.iter().map(|&a| profile_at(&xs, &ps, &weights, h * a)).collect();
    let best = (0..profile.len()).min_by(|&a, &b| profile[a].0.total_cmp(&profile[b].0)).expect("non-empty grid");

    let mut alpha0 = grid[best];
    if best > 0 && best + 1 < grid.len() {
        let (y0, y1, y2) = (profile[best - 1].0, profile[best].0, profile[best + 1].0);
        let denom = y0 - 2.0 * y1 + y2;
        if denom > 0.0 {
            let step = grid[1] - grid[0];
            alpha0 += 0.5 * step * (y0 - y2) / denom;
        }
    }
    let alpha0 = alpha0.clamp(alpha_min, alpha_max);
    let (_, c0, s0) = profile_at(&xs, &ps, &weights, h * alpha0);
    let amplitude = c0.hypot(s0);

    let model = move |x: f64, q: &[f64]| {
        let arg = h * q[1] * x + q[2];
        let (sin, cos) = arg.sin_cos();
        (0.5 * (1.0 + q[0] * cos), vec![0.5 * cos, -0.5 * q[0] * sin * h * x, -0.5 * q[0] * sin])
    };

    let dof = points.len().saturating_sub(3);
    if amplitude < 1e-12 {
        let (chi2, rms) = residuals(&model, &xs, &ps, &weights, &[0.0, alpha0, 0.0]);
        let var_v = 8.0 / weights.iter().sum::<f64>();
        return Ok(FringeFit {
            visibility: 0.0,
            alpha: alpha0,
            phase_offset: 0.0,
            harmonic,
            covariance: [[var_v, 0.0, 0.0], [0.0, f64::INFINITY, 0.0], [0.0, 0.0, f64::INFINITY]],
            residual_rms: rms,
            chi2,
            dof,
            x_min,
            x_max,
            flags: FitFlags { unphysical_visibility: false, alpha_unidentified: true },
        });
    }

    let init = [amplitude, alpha0, s0.atan2(c0)];
    let mut q = levenberg_marquardt(&model, &xs, &ps, &weights, &init).params;
    // The search range is a hard constraint; a refinement that leaves it keeps the profiled solution.
    if !(alpha_min..=alpha_max).contains(&q[1].abs()) {
        q = init.to_vec();
    }
    if q[0] < 0.0 {
        q[0] = -q[0];
        q[2] += PI;
    }
    q[2] = wrap_phase(q[2]);
    // Frequencies are only meaningful up to sign; keep alpha positive.
    if q[1] < 0.0 {
        q[1] = -q[1];
        q[2] = wrap_phase(-q[2]);
    }
    let (chi2, rms) = residuals(&model, &xs, &ps, &weights, &q);
    let (_, normal, _) = linearize(&model, &xs, &ps, &weights, &q);
    let covariance = covariance_from::<3>(&normal);
    let sd_v = covariance[0][0].sqrt();
    let alpha_unidentified = !(q[0] > 3.0 * sd_v) || !covariance[1][1].is_finite();
    let unphysical_visibility = q[0] > 1.0 + 3.0 * sd_v;
    Ok(FringeFit {
        visibility: q[0],
        alpha: q[1],
        phase_offset: q[2],
        harmonic,
        covariance,
        residual_rms: rms,
        chi2,
        dof,
        x_min,
        x_max,
        flags: FitFlags { unphysical_visibility, alpha_unidentified },
    })
}

fn inverse_variance_weights(points: &[FringePoint]) -> Result<Vec<f64>> {
    // An infinite sigma (a zero count in the estimator) just carries no weight.
    if points.iter().any(|p| !(p.sigma >= 0.0)) {
        return Err(domain("fringe sigmas must be non-negative"));
    }
    let floor = points.iter().map(|p| p.sigma).filter(|s| *s > 0.0 && s.is_finite()).fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(domain("no fringe point has a finite, non-zero sigma"));
    }
    Ok(points.iter().map(|p| 1.0 / p.sigma.max(floor).powi(2)).collect())
}

pub(crate) fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

// Weighted linear least squares of p - 1/2 = (c cos(wx) - s sin(wx)) / 2 at fixed w.
// Returns (chi2, c, s) with c = V cos(theta), s = V sin(theta).
fn profile_at(xs: &[f64], ps: &[f64], w: &[f64], omega: f64) -> (f64, f64, f64) {
    let mut a = Matrix2::zeros();
    let mut b = Vector2::zeros();
    for ((&x, &p), &wi) in xs.iter().zip(ps).zip(w) {
        let (sin, cos) = (omega * x).sin_cos();
        let basis = Vector2::new(0.5 * cos, -0.5 * sin);
        a += wi * basis * basis.transpose();
        b += wi * basis * (p - 0.5);
    }
    let sol = a.lu().solve(&b).unwrap_or_else(Vector2::zeros);
    let chi2 = xs
        .iter()
        .zip(ps)
        .zip(w)
        .map(|((&x, &p), &wi)| {
            let (sin, cos) = (omega * x).sin_cos();
            let r = p - 0.5 - 0.5 * (sol[0] * cos - sol[1] * sin);
            wi * r * r
        })
        .sum();
    (chi2, sol[0], sol[1])
}

fn residuals(model: &Model, xs: &[f64], ps: &[f64], w: &[f64], q: &[f64]) -> (f64, f64) {
    let mut chi2 = 0.0;
    let mut ss = 0.0;
    for ((&x, &p), &wi) in xs.iter().zip(ps).zip(w) {
        let r = p - model(x, q).0;
        chi2 += wi * r * r;
        ss += r * r;
    }
    (chi2, (ss / xs.len() as f64).sqrt())
}

/// Symmetrized inverse of a normal matrix; infinite entries when singular.
pub(crate) fn covariance_from<const N: usize>(normal: &DMatrix<f64>) -> [[f64; N]; N] {
    match normal.clone().try_inverse() {
        Some(inv) => {
            let mut out = [[0.0; N]; N];
            for (i, row) in out.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                }
            }
            out
        }
        None => [[f64::INFINITY; N]; N],
    }
}
