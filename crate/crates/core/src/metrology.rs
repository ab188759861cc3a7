//! Phase-estimation figures of merit for the `|11>` coincidence measurement.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_unit, domain, Error, Result};
use crate::mzi::{coincidence_curvature, coincidence_derivative, golden_max, two_photon_distribution, MziConfig};

/// Below this slope the fringe is treated as stationary.
pub const STATIONARY_SLOPE: f64 = 1e-12;

/// Points on the coarse phase grid before golden-section refinement.
pub const PHASE_GRID: usize = 720;

/// Binomial variance `p (1 - p)` of a single post-selected trial.
pub fn outcome_variance(p: f64) -> Result<f64> {
    check_unit("probability", p)?;
    Ok(p * (1.0 - p))
}

/// `(dP/dphi)^2 / (P (1 - P))`, or `None` where the fringe is stationary
/// or the outcome is deterministic.
pub fn inverse_phase_variance(config: &MziConfig, phi: f64) -> Option<f64> {
    let slope = coincidence_derivative(config, phi);
    if slope.abs() < STATIONARY_SLOPE {
        return None;
    }
    let (p, q) = outcome_split(config, phi);
    if p * q < MIN_OUTCOME_VARIANCE {
        return None;
    }
    Some(slope * slope / (p * q))
}

/// Points with `P (1 - P)` below this are treated through their limit.
const MIN_OUTCOME_VARIANCE: f64 = 1e-12;

// (P, 1 - P). 1 - P is at least p20 + p02, which is computed without
// cancellation when P is close to 1.
fn outcome_split(config: &MziConfig, phi: f64) -> (f64, f64) {
    let d = two_photon_distribution(config, phi);
    let p = d.p11.clamp(0.0, 1.0);
    (p, (1.0 - p).max(d.p20 + d.p02).min(1.0))
}

fn coincidence_variance(config: &MziConfig, phi: f64) -> f64 {
    let (p, q) = outcome_split(config, phi);
    p * q
}

// Inverse variance continued through zeros of P or 1 - P, where it is 0/0.
// Near such a zero P ~ P'' x^2 / 2, so (P')^2 / P tends to 2 P''.
fn inverse_variance_limit(config: &MziConfig, phi: f64) -> f64 {
    if let Some(v) = inverse_phase_variance(config, phi) {
        return v;
    }
    let (p, q) = outcome_split(config, phi);
    if p * q >= MIN_OUTCOME_VARIANCE {
        return 0.0;
    }
    let curvature = coincidence_curvature(config, phi);
    let limit = if p < 0.5 { 2.0 * curvature / q } else { -2.0 * curvature / p };
    limit.max(0.0)
}

/// Single-trial phase variance `P (1 - P) / (dP/dphi)^2`.
pub fn phase_variance(config: &MziConfig, phi: f64) -> Result<f64> {
    config.validate()?;
    let slope = coincidence_derivative(config, phi);
    if slope.abs() < STATIONARY_SLOPE {
        return Err(Error::UninformativePhase { derivative: slope });
    }
    Ok(coincidence_variance(config, phi) / (slope * slope))
}

/// Maximum of the inverse phase variance over the phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sensitivity {
    /// `S = sqrt(max_phi (dP/dphi)^2 / (P (1 - P)))`.
    pub s: f64,
    /// Phase at which the maximum is attained.
    pub phi_opt: f64,
}

impl Sensitivity {
    /// Best single-trial phase uncertainty `1 / S`.
    pub fn delta_phi(&self) -> f64 {
        1.0 / self.s
    }
}

pub fn sensitivity(config: &MziConfig) -> Result<Sensitivity> {
    config.validate()?;
    let f = |phi: f64| inverse_variance_limit(config, phi);
    let step = 2.0 * PI / PHASE_GRID as f64;
    let (best_k, best) =
        (0..PHASE_GRID).map(|k| (k, f(k as f64 * step))).max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty grid");
    if best <= 0.0 {
        return Ok(Sensitivity { s: 0.0, phi_opt: 0.0 });
    }
    let center = best_k as f64 * step;
    let phi = golden_max(&f, center - step, center + step, 1e-10);
    let refined = f(phi);
    let (value, phi_opt) = if refined >= best { (refined, phi) } else { (best, center) };
    Ok(Sensitivity { s: value.sqrt(), phi_opt: phi_opt.rem_euclid(2.0 * PI) })
}

/// Sensitivity over a grid of coupler reflectivities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityMap {
    /// Reflectivity values shared by both axes, `k / (n - 1)`.
    pub reflectivities: Vec<f64>,
    /// `values[i][j]` is `S` at `R1 = reflectivities[i]`, `R2 = reflectivities[j]`.
    pub values: Vec<Vec<f64>>,
    pub argmax: (usize, usize),
}

impl SensitivityMap {
    pub fn max(&self) -> f64 {
        self.values[self.argmax.0][self.argmax.1]
    }

    pub fn argmax_reflectivities(&self) -> (f64, f64) {
        (self.reflectivities[self.argmax.0], self.reflectivities[self.argmax.1])
    }

    /// Largest `|S(R1, R2) - S(R2, R1)|`.
    pub fn transpose_asymmetry(&self) -> f64 {
        let n = self.values.len();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.values[i][j] - self.values[j][i]).abs());
            }
        }
        worst
    }
}

pub fn sensitivity_map(tau1: f64, tau2: f64, grid_n: usize) -> Result<SensitivityMap> {
    if grid_n < 3 {
        return Err(domain(format!("grid size {grid_n} must be at least 3")));
    }
    MziConfig::new(0.5, 0.5, tau1, tau2, 0.0)?;
    let reflectivities: Vec<f64> = (0..grid_n).map(|k| k as f64 / (grid_n - 1) as f64).collect();
    let values: Vec<Vec<f64>> = reflectivities
        .par_iter()
        .map(|&r1| {
            reflectivities
                .iter()
                .map(|&r2| {
                    let config = MziConfig { r1_sq: r1, r2_sq: r2, tau1, tau2, phi0: 0.0 };
                    sensitivity(&config).map(|s| s.s)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut argmax = (0, 0);
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > values[argmax.0][argmax.1] {
                argmax = (i, j);
            }
        }
    }
    Ok(SensitivityMap { reflectivities, values, argmax })
}

/// Phase uncertainty bounds for `n` probe photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Limits {
    /// Standard quantum limit `1 / sqrt(n)`.
    pub sql: f64,
    /// Heisenberg limit `1 / n`.
    pub heisenberg: f64,
}

pub fn limits(n: u32) -> Result<Limits> {
    if n == 0 {
        return Err(domain("photon number must be at least 1"));
    }
    let n = f64::from(n);
    Ok(Limits { sql: 1.0 / n.sqrt(), heisenberg: 1.0 / n })
}

/// Two-photon fringe visibility above which the fringe beats the standard
/// quantum limit with ideal detection: `1 / sqrt(2)`.
pub fn supersensitivity_threshold() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

pub fn exceeds_supersensitivity_threshold(visibility: f64) -> bool {
    visibility > supersensitivity_threshold()
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn outcome_variance_values() {
        assert_eq!(outcome_variance(0.0).unwrap(), 0.0);
        assert_eq!(outcome_variance(0.5).unwrap(), 0.25);
        let p = (PI / 3.0).cos().powi(2);
        assert_abs_diff_eq!(outcome_variance(p).unwrap(), 0.1875, epsilon = 1e-15);
        assert!(outcome_variance(1.5).is_err());
    }

    #[test]
    fn heisenberg_phase_variance_at_quarter_pi() {
        let c = MziConfig::balanced_lossless();
        let v = phase_variance(&c, PI / 4.0).unwrap();
        assert_abs_diff_eq!(v, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(v.sqrt(), limits(2).unwrap().heisenberg, epsilon = 1e-12);
    }

    #[test]
    fn stationary_phase_is_uninformative() {
        let c = MziConfig::balanced_lossless();
        assert!(matches!(phase_variance(&c, 0.0), Err(Error::UninformativePhase { .. })));
    }

    #[test]
    fn lossless_balanced_sensitivity_is_two() {
        let s = sensitivity(&MziConfig::balanced_lossless()).unwrap();
        assert_abs_diff_eq!(s.s, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn no_splitting_means_no_sensitivity() {
        let c = MziConfig::new(0.0, 0.5, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(sensitivity(&c).unwrap().s, 0.0);
    }

    #[test]
    fn loss_degrades_optimum() {
        let c = MziConfig::balanced_with_ratio(0.61).unwrap();
        let s = sensitivity(&c).unwrap();
        let dphi = phase_variance(&c, s.phi_opt).unwrap().sqrt();
        assert!(dphi > 0.5, "dphi = {dphi}");
        assert_abs_diff_eq!(dphi, s.delta_phi(), epsilon = 1e-9);
    }

    #[test]
    fn small_map_shape() {
        let map = sensitivity_map(1.0, 1.0, 3).unwrap();
        assert_eq!(map.values.len(), 3);
        assert!(map.values.iter().all(|r| r.len() == 3));
        assert_eq!(map.argmax_reflectivities(), (0.5, 0.5));
        assert!(sensitivity_map(1.0, 1.0, 2).is_err());
        assert!(sensitivity_map(0.0, 1.0, 5).is_err());
    }

    #[test]
    fn limit_values() {
        let l = limits(2).unwrap();
        assert_abs_diff_eq!(l.sql, 0.7071, epsilon = 1e-4);
        assert_eq!(l.heisenberg, 0.5);
        assert_eq!(limits(1).unwrap(), Limits { sql: 1.0, heisenberg: 1.0 });
        let l = limits(100).unwrap();
        assert_abs_diff_eq!(l.sql, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(l.heisenberg, 0.01, epsilon = 1e-15);
        assert!(limits(0).is_err());
    }

    #[test]
    fn threshold() {
        assert_abs_diff_eq!(supersensitivity_threshold(), 0.70711, epsilon = 1e-5);
        assert!(exceeds_supersensitivity_threshold(0.82));
        assert!(!exceeds_supersensitivity_threshold(0.5));
        assert!(!exceeds_supersensitivity_threshold(0.70));
    }
}
