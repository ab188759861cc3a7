//! Closed-form model of the lossy two-coupler Mach-Zehnder interferometer.
//!
//! Mode layout of the four-mode network: 0 = sensing arm / output port 0,
//! 1 = reference arm / output port 1, 2 and 3 = loss ancillas of arms 0 and 1.
//! The sequence is coupler 1 on (0,1), loss couplers on (0,2) and (1,3),
//! phase `e^{i(phi + phi0)}` on mode 0, coupler 2 on (0,1).
//!
//! With `a = sqrt(tau1) e^{i phi}`, `b = sqrt(tau2)` the real-mode block is
//!
//! ```text
//! M00 =  a r1 r2 - b t1 t2        M01 = i (a t1 r2 + b r1 t2)
//! M10 = i (a r1 t2 + b t1 r2)     M11 = -a t1 t2 + b r1 r2
//! ```
//!
//! and the `|11> -> |11>` amplitude is the permanent of that block,
//! `-[2 r1 t1 r2 t2 (a^2 + b^2) + a b (2(R1 + R2) - 4 R1 R2 - 1)]`.
//! The constant inside the last bracket is `-1`; a `+1` there fails to be a
//! probability (the lossless balanced value at phi = 0 would be 9).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, domain, Result};
use crate::fock::{build_coupler, embed, ModeTransform};

/// Physical parameters of the lossy interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MziConfig {
    /// Power reflectivity R1 of the input coupler.
    pub r1_sq: f64,
    /// Power reflectivity R2 of the output coupler.
    pub r2_sq: f64,
    /// Power transmission of the sensing arm (the one crossing the channel).
    pub tau1: f64,
    /// Power transmission of the reference arm.
    pub tau2: f64,
    /// Static phase offset added to the sensing-arm phase.
    #[serde(default)]
    pub phi0: f64,
}

impl MziConfig {
    pub fn new(r1_sq: f64, r2_sq: f64, tau1: f64, tau2: f64, phi0: f64) -> Result<Self> {
        let c = Self { r1_sq, r2_sq, tau1, tau2, phi0 };
        c.validate()?;
        Ok(c)
    }

    /// Two 50:50 couplers, no loss, no offset.
    pub fn balanced_lossless() -> Self {
        Self { r1_sq: 0.5, r2_sq: 0.5, tau1: 1.0, tau2: 1.0, phi0: 0.0 }
    }

    /// Two 50:50 couplers with sensing-arm transmission `ratio` relative to a lossless reference arm.
    pub fn balanced_with_ratio(ratio: f64) -> Result<Self> {
        Self::new(0.5, 0.5, ratio, 1.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("r1_sq", self.r1_sq)?;
        check_unit("r2_sq", self.r2_sq)?;
        for (name, tau) in [("tau1", self.tau1), ("tau2", self.tau2)] {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(domain(format!("{name} = {tau} must lie in (0, 1]")));
            }
        }
        if !self.phi0.is_finite() {
            return Err(domain("phi0 must be finite"));
        }
        Ok(())
    }

    /// Transmissivity ratio `T = tau1 / tau2`.
    pub fn arm_ratio(&self) -> f64 {
        self.tau1 / self.tau2
    }

    fn amplitudes(&self) -> (f64, f64, f64, f64) {
        (self.r1_sq.sqrt(), (1.0 - self.r1_sq).sqrt(), self.r2_sq.sqrt(), (1.0 - self.r2_sq).sqrt())
    }
}

/// The four-mode unitary network at sample phase `phi`.
pub fn build_network(config: &MziConfig, phi: f64) -> Result<ModeTransform> {
    config.validate()?;
    let stages = [
        embed(&build_coupler(config.r1_sq)?, &[0, 1], 4)?,
        embed(&build_coupler(config.tau1)?, &[0, 2], 4)?,
        embed(&build_coupler(config.tau2)?, &[1, 3], 4)?,
        embed(&ModeTransform::phase(phi + config.phi0), &[0], 4)?,
        embed(&build_coupler(config.r2_sq)?, &[0, 1], 4)?,
    ];
    stages.iter().try_fold(ModeTransform::identity(4), |acc, stage| acc.then(stage))
}

/// Real-mode 2x2 block `[[M00, M01], [M10, M11]]` of the network, closed form.
pub fn real_mode_block(config: &MziConfig, phi: f64) -> [[Complex64; 2]; 2] {
    let (r1, t1, r2, t2) = config.amplitudes();
    let a = Complex64::from_polar(config.tau1.sqrt(), phi + config.phi0);
    let b = Complex64::new(config.tau2.sqrt(), 0.0);
    let i = Complex64::i();
    [
        [a * r1 * r2 - b * t1 * t2, i * (a * t1 * r2 + b * r1 * t2)],
        [i * (a * r1 * t2 + b * t1 * r2), -a * t1 * t2 + b * r1 * r2],
    ]
}

fn coincidence_terms(config: &MziConfig) -> (f64, f64) {
    let (r1, t1, r2, t2) = config.amplitudes();
    let quad = 2.0 * r1 * t1 * r2 * t2;
    let cross = 2.0 * (config.r1_sq + config.r2_sq) - 4.0 * config.r1_sq * config.r2_sq - 1.0;
    (quad, cross)
}

/// Closed-form `|11> -> |11>` amplitude.
pub fn coincidence_amplitude(config: &MziConfig, phi: f64) -> Complex64 {
    let (quad, cross) = coincidence_terms(config);
    let psi = phi + config.phi0;
    let a2 = Complex64::from_polar(config.tau1, 2.0 * psi);
    let ab = Complex64::from_polar((config.tau1 * config.tau2).sqrt(), psi);
    -(quad * (a2 + config.tau2) + cross * ab)
}

/// Probability `P11(phi)` that one photon leaves each real output for input `|11>`.
pub fn coincidence_probability(config: &MziConfig, phi: f64) -> f64 {
    coincidence_amplitude(config, phi).norm_sqr()
}

// A11 and its first two phase derivatives.
fn amplitude_jet(config: &MziConfig, phi: f64) -> [Complex64; 3] {
    let (quad, cross) = coincidence_terms(config);
    let psi = phi + config.phi0;
    let i = Complex64::i();
    let a2 = Complex64::from_polar(config.tau1, 2.0 * psi);
    let ab = Complex64::from_polar((config.tau1 * config.tau2).sqrt(), psi);
    [-(quad * (a2 + config.tau2) + cross * ab), -(quad * 2.0 * i * a2 + cross * i * ab), quad * 4.0 * a2 + cross * ab]
}

/// Analytic `dP11/dphi`.
pub fn coincidence_derivative(config: &MziConfig, phi: f64) -> f64 {
    let [a, da, _] = amplitude_jet(config, phi);
    2.0 * (a.conj() * da).re
}

/// Analytic `d^2 P11 / dphi^2`.
pub fn coincidence_curvature(config: &MziConfig, phi: f64) -> f64 {
    let [a, da, dda] = amplitude_jet(config, phi);
    2.0 * da.norm_sqr() + 2.0 * (a.conj() * dda).re
}

/// Post-selected two-photon outcome probabilities for input `|11>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p11: f64,
    pub p20: f64,
    pub p02: f64,
    /// At least one photon ended in a loss ancilla.
    pub p_lost: f64,
}

impl OutcomeDistribution {
    pub fn new(p11: f64, p20: f64, p02: f64, p_lost: f64) -> Result<Self> {
        for (name, p) in [("p11", p11), ("p20", p20), ("p02", p02), ("p_lost", p_lost)] {
            check_unit(name, p)?;
        }
        let sum = p11 + p20 + p02 + p_lost;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(domain(format!("outcome probabilities sum to {sum}, not 1")));
        }
        Ok(Self { p11, p20, p02, p_lost })
    }

    /// Probability that both photons reached the real outputs.
    pub fn retained(&self) -> f64 {
        self.p11 + self.p20 + self.p02
    }

    /// `p11 / (p11 + p20 + p02)`.
    pub fn normalized_p11(&self) -> f64 {
        self.p11 / self.retained()
    }
}

pub fn two_photon_distribution(config: &MziConfig, phi: f64) -> OutcomeDistribution {
    let m = real_mode_block(config, phi);
    let p11 = coincidence_probability(config, phi);
    let p20 = 2.0 * (m[0][0] * m[0][1]).norm_sqr();
    let p02 = 2.0 * (m[1][0] * m[1][1]).norm_sqr();
    let p_lost = (1.0 - p11 - p20 - p02).max(0.0);
    OutcomeDistribution { p11, p20, p02, p_lost }
}

/// Output probabilities of one photon entering a real input port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePhotonOutcome {
    pub p_out0: f64,
    pub p_out1: f64,
    pub p_lost: f64,
}

impl SinglePhotonOutcome {
    /// `p_out1 / (p_out0 + p_out1)`.
    pub fn normalized_p01(&self) -> f64 {
        self.p_out1 / (self.p_out0 + self.p_out1)
    }
}

pub fn single_photon_distribution(config: &MziConfig, phi: f64, input_port: usize) -> Result<SinglePhotonOutcome> {
    if input_port > 1 {
        return Err(domain(format!("input port {input_port} is not 0 or 1")));
    }
    let m = real_mode_block(config, phi);
    let p_out0 = m[0][input_port].norm_sqr();
    let p_out1 = m[1][input_port].norm_sqr();
    Ok(SinglePhotonOutcome { p_out0, p_out1, p_lost: (1.0 - p_out0 - p_out1).max(0.0) })
}

/// Coincidence probabilities for indistinguishable and fully distinguishable
/// photons, used for Hong-Ou-Mandel dips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomCoincidences {
    pub indistinguishable: f64,
    pub distinguishable: f64,
}

impl HomCoincidences {
    /// Dip visibility `1 - P_indist / P_dist`.
    pub fn visibility(&self) -> f64 {
        1.0 - self.indistinguishable / self.distinguishable
    }
}

pub fn hom_coincidences(config: &MziConfig, phi: f64) -> HomCoincidences {
    let m = real_mode_block(config, phi);
    HomCoincidences {
        indistinguishable: coincidence_probability(config, phi),
        distinguishable: (m[0][0] * m[1][1]).norm_sqr() + (m[0][1] * m[1][0]).norm_sqr(),
    }
}

/// Upper bound on the HOM visibility for arm transmissivity ratio `T`:
/// `(4T - (T - 1)^2) / (T + 1)^2`.
pub fn hom_visibility_bound(ratio: f64) -> Result<f64> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(domain(format!("transmissivity ratio {ratio} must lie in (0, 1]")));
    }
    Ok((4.0 * ratio - (ratio - 1.0).powi(2)) / (ratio + 1.0).powi(2))
}

/// Normalized super-resolved fringe `(1 + V cos(2 phi + phi_tilde0)) / 2`.
pub fn two_photon_fringe(visibility: f64, phi_tilde0: f64, phi: f64) -> Result<f64> {
    check_unit("visibility", visibility)?;
    Ok(0.5 * (1.0 + visibility * (2.0 * phi + phi_tilde0).cos()))
}

/// Normalized classical fringe `(1 + V cos(phi + phi0)) / 2`.
pub fn single_photon_fringe(visibility: f64, phi0: f64, phi: f64) -> Result<f64> {
    check_unit("visibility", visibility)?;
    Ok(0.5 * (1.0 + visibility * (phi + phi0).cos()))
}

/// Extrema of a periodic fringe over one `2 pi` period of the phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeExtrema {
    pub min: f64,
    pub max: f64,
    /// Phase of the maximum.
    pub phi_max: f64,
}

impl FringeExtrema {
    /// `(max - min) / (max + min)`.
    pub fn visibility(&self) -> f64 {
        (self.max - self.min) / (self.max + self.min)
    }

    /// Prefactor `eta` in `P = eta (1 + V cos(...)) / 2`, i.e. `max + min`.
    pub fn eta(&self) -> f64 {
        self.max + self.min
    }
}

/// Locates the extrema of a smooth `2 pi`-periodic function by a dense grid
/// followed by golden-section refinement.
pub fn fringe_extrema(f: impl Fn(f64) -> f64) -> FringeExtrema {
    const GRID: usize = 1440;
    let step = 2.0 * PI / GRID as f64;
    let values: Vec<f64> = (0..GRID).map(|k| f(k as f64 * step)).collect();
    let argmax = (0..GRID).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    let argmin = (0..GRID).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    let at = |k: usize| k as f64 * step;
    let phi_max = golden_max(&f, at(argmax) - step, at(argmax) + step, 1e-12);
    let phi_min = golden_max(&|x| -f(x), at(argmin) - step, at(argmin) + step, 1e-12);
    FringeExtrema { min: f(phi_min), max: f(phi_max), phi_max }
}

/// Golden-section search for a maximum of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Extrema of the normalized two-photon fringe `p11 / (p11 + p20 + p02)`.
pub fn two_photon_fringe_extrema(config: &MziConfig) -> FringeExtrema {
    fringe_extrema(|phi| two_photon_distribution(config, phi).normalized_p11())
}

/// Extrema of the raw coincidence probability `P11(phi)`.
pub fn coincidence_extrema(config: &MziConfig) -> FringeExtrema {
    fringe_extrema(|phi| coincidence_probability(config, phi))
}

/// Extrema of the normalized single-photon fringe `p01 / (p10 + p01)` for a photon entering port 0.
pub fn single_photon_fringe_extrema(config: &MziConfig) -> FringeExtrema {
    fringe_extrema(|phi| single_photon_distribution(config, phi, 0).expect("port 0 is valid").normalized_p01())
}
