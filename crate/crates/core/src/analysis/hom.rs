use serde::{Deserialize, Serialize};

use super::fringe::covariance_from;
use super::lm::{levenberg_marquardt, linearize};
use crate::error::{domain, Error, Result};
use crate::sim::HomPoint;

/// Gaussian dip `B (1 - V exp(-(d - d0)^2 / (2 s^2)))` fitted to a delay scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomDipFit {
    pub baseline: f64,
    pub visibility: f64,
    pub center: f64,
    pub width: f64,
    /// Covariance of `(baseline, visibility, center, width)`.
    pub covariance: [[f64; 4]; 4],
    pub chi2: f64,
    pub dof: usize,
}

impl HomDipFit {
    pub fn visibility_err(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn model(&self, delay: f64) -> f64 {
        dip(&[self.baseline, self.visibility, self.center, self.width], delay)
    }
}

fn dip(q: &[f64], d: f64) -> f64 {
    q[0] * (1.0 - q[1] * (-(d - q[2]).powi(2) / (2.0 * q[3] * q[3])).exp())
}

const REWEIGHT_PASSES: usize = 4;

/// Poisson-weighted least squares, with variances taken from the fitted
/// model after the first pass (floored at one count).
pub fn fit_hom_dip(points: &[HomPoint]) -> Result<HomDipFit> {
    if points.len() < 5 {
        return Err(Error::InsufficientData(format!("{} points, at least 5 needed", points.len())));
    }
    if points.iter().any(|p| !p.delay.is_finite() || !(p.coincidences >= 0.0)) {
        return Err(domain("delays must be finite and counts non-negative"));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    let xs: Vec<f64> = sorted.iter().map(|p| p.delay).collect();
    let ys: Vec<f64> = sorted.iter().map(|p| p.coincidences).collect();
    let span = xs[xs.len() - 1] - xs[0];
    if span <= 0.0 {
        return Err(Error::InsufficientData("all delays are equal".into()));
    }
    let weights: Vec<f64> = ys.iter().map(|&y| 1.0 / y.max(1.0)).collect();

    let edge = (xs.len() / 6).max(1);
    let baseline0 = ys[..edge].iter().chain(&ys[ys.len() - edge..]).sum::<f64>() / (2 * edge) as f64;
    if baseline0 <= 0.0 {
        return Err(Error::NoData("no coincidences away from the dip"));
    }
    let (imin, &ymin) = ys.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let v0 = (1.0 - ymin / baseline0).clamp(0.05, 1.0);
    let half = baseline0 * (1.0 - v0 / 2.0);
    let below = ys.iter().filter(|&&y| y < half).count().max(1) as f64;
    let width0 = (below * span / (xs.len() - 1) as f64 / 2.355).max(span / (xs.len() as f64));

    let model = |x: f64, q: &[f64]| {
        let g = (-(x - q[2]).powi(2) / (2.0 * q[3] * q[3])).exp();
        let dg_dc = g * (x - q[2]) / (q[3] * q[3]);
        let dg_ds = g * (x - q[2]).powi(2) / q[3].powi(3);
        (q[0] * (1.0 - q[1] * g), vec![1.0 - q[1] * g, -q[0] * g, -q[0] * q[1] * dg_dc, -q[0] * q[1] * dg_ds])
    };
    let mut q = vec![baseline0, v0, xs[imin], width0];
    let mut weights = weights;
    // Weighting by observed counts biases low-count dips; reweight by the model instead.
    for _ in 0..REWEIGHT_PASSES {
        q = levenberg_marquardt(&model, &xs, &ys, &weights, &q).params;
        q[3] = q[3].abs();
        weights = xs.iter().map(|&x| 1.0 / dip(&q, x).max(1.0)).collect();
    }
    let (chi2, normal, _) = linearize(&model, &xs, &ys, &weights, &q);
    Ok(HomDipFit {
        baseline: q[0],
        visibility: q[1],
        center: q[2],
        width: q[3],
        covariance: covariance_from::<4>(&normal),
        chi2,
        dof: xs.len().saturating_sub(4),
    })
}
