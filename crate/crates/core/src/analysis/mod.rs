//! From normalized counts to fringe parameters, refractive index and concentration.

mod fringe;
mod hom;
mod inversion;
mod lm;
mod regression;

use serde::{Deserialize, Serialize};

pub use fringe::{fit_fringe, fit_fringe_with, fringe_model, FitFlags, FitOptions, FringeFit, FringePoint, Harmonic};
pub use hom::{fit_hom_dip, HomDipFit};
pub use inversion::{estimate_concentration, estimate_concentration_with, ConcentrationEstimate, Observation, Z_95};
pub use regression::{fit_index_slope, phase_to_index, point_phases, IndexRegression};

use crate::counts::{estimate_coincidences, estimate_singles};
use crate::error::Result;
use crate::sim::SweepPoint;

/// Normalized fringe samples from a sweep: coincidence ratios for harmonic 2,
/// singles ratios for harmonic 1.
pub fn fringe_points(sweep: &[SweepPoint], harmonic: Harmonic) -> Result<Vec<FringePoint>> {
    sweep
        .iter()
        .map(|pt| {
            let est = match harmonic {
                Harmonic::Double => estimate_coincidences(&pt.record)?,
                Harmonic::Single => estimate_singles(&pt.record)?,
            };
            Ok(FringePoint { x: pt.concentration, p: est.value, sigma: est.sigma })
        })
        .collect()
}

/// Per-step result of [`analyze_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexPoint {
    pub concentration: f64,
    pub phase: f64,
    pub delta_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAnalysis {
    pub fit: FringeFit,
    pub points: Vec<IndexPoint>,
    pub regression: IndexRegression,
}

/// Fit the fringe, invert every step to a phase on the branch picked by the
/// fit, convert to index change and regress against concentration.
pub fn analyze_sweep(
    sweep: &[SweepPoint],
    harmonic: Harmonic,
    wavelength: f64,
    channel_length: f64,
) -> Result<SweepAnalysis> {
    let samples = fringe_points(sweep, harmonic)?;
    let fit = fit_fringe(&samples, harmonic)?;
    let phases = point_phases(&fit, &samples)?;
    let points = samples
        .iter()
        .zip(phases)
        .map(|(s, phase)| {
            Ok(IndexPoint { concentration: s.x, phase, delta_n: phase_to_index(phase, wavelength, channel_length)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.concentration, p.delta_n)).collect();
    let regression = fit_index_slope(&pairs)?;
    Ok(SweepAnalysis { fit, points, regression })
}
