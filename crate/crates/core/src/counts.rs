//! Drift-robust estimators that turn raw singles and coincidence counts into
//! normalized outcome probabilities, and the forward model that generates
//! expected counts from outcome probabilities, efficiencies and rates.
//!
//! Detector A and C watch output 0, B and D watch output 1. A singles count
//! `Xk` is detector `X` with the photon injected into input `k`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mzi::OutcomeDistribution;

/// Counts of one exposure. Sampled records hold integers; expected records
/// from [`forward_model`] hold real-valued means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub exposure: f64,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
    #[serde(rename = "AB")]
    pub ab: f64,
    #[serde(rename = "CD")]
    pub cd: f64,
    #[serde(rename = "AC")]
    pub ac: f64,
    #[serde(rename = "BD")]
    pub bd: f64,
}

impl CountRecord {
    pub const FIELDS: [&'static str; 9] = ["exposure", "A1", "A2", "B1", "B2", "AB", "CD", "AC", "BD"];

    pub fn validate(&self) -> Result<()> {
        if !(self.exposure > 0.0 && self.exposure.is_finite()) {
            return Err(domain(format!("exposure {} must be positive", self.exposure)));
        }
        for (name, v) in Self::FIELDS[1..].iter().zip(self.counts()) {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(domain(format!("count {name} = {v} must be non-negative")));
            }
        }
        Ok(())
    }

    /// The eight counts in `A1, A2, B1, B2, AB, CD, AC, BD` order.
    pub fn counts(&self) -> [f64; 8] {
        [self.a1, self.a2, self.b1, self.b2, self.ab, self.cd, self.ac, self.bd]
    }

    pub fn from_counts(exposure: f64, c: [f64; 8]) -> Self {
        Self { exposure, a1: c[0], a2: c[1], b1: c[2], b2: c[3], ab: c[4], cd: c[5], ac: c[6], bd: c[7] }
    }

    pub fn total_coincidences(&self) -> f64 {
        self.ab + self.cd + self.ac + self.bd
    }
}

/// Detector efficiencies and injection rates of the counting model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyModel {
    pub eta_a: f64,
    pub eta_b: f64,
    pub eta_c: f64,
    pub eta_d: f64,
    /// Single photons per second injected into input 1.
    pub n1: f64,
    /// Single photons per second injected into input 2.
    pub n2: f64,
    /// Photon pairs per second injected into both inputs.
    pub n_pairs: f64,
}

impl EfficiencyModel {
    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [("eta_a", self.eta_a), ("eta_b", self.eta_b), ("eta_c", self.eta_c), ("eta_d", self.eta_d)]
        {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(domain(format!("{name} = {eta} must lie in (0, 1]")));
            }
        }
        for (name, rate) in [("n1", self.n1), ("n2", self.n2), ("n_pairs", self.n_pairs)] {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(domain(format!("{name} = {rate} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Output probabilities of a single photon for each input port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglesResponse {
    /// `[P(out 0), P(out 1)]` for a photon entering input 1.
    pub input1: [f64; 2],
    /// `[P(out 0), P(out 1)]` for a photon entering input 2.
    pub input2: [f64; 2],
}

impl SinglesResponse {
    /// Port-symmetric response: input 1 yields `|10>` with `p10` and `|01>` with
    /// `p01`, input 2 the mirror image.
    pub fn symmetric(p10: f64, p01: f64) -> Self {
        Self { input1: [p10, p01], input2: [p01, p10] }
    }
}

/// Expected counts for one exposure:
///
/// ```text
/// A1 = p(1->0) eta_A N1     AB = N11 eta_A eta_B
/// A2 = p(2->0) eta_A N2     CD = N11 eta_C eta_D
/// B1 = p(1->1) eta_B N1     AC = 2 N20 eta_A eta_C
/// B2 = p(2->1) eta_B N2     BD = 2 N02 eta_B eta_D
/// ```
///
/// with `Nij = n_pairs * p_ij`, all multiplied by the exposure.
pub fn forward_model(
    eff: &EfficiencyModel,
    dist: &OutcomeDistribution,
    singles: &SinglesResponse,
    exposure: f64,
) -> CountRecord {
    let n11 = eff.n_pairs * dist.p11 * exposure;
    let n20 = eff.n_pairs * dist.p20 * exposure;
    let n02 = eff.n_pairs * dist.p02 * exposure;
    CountRecord {
        exposure,
        a1: singles.input1[0] * eff.eta_a * eff.n1 * exposure,
        a2: singles.input2[0] * eff.eta_a * eff.n2 * exposure,
        b1: singles.input1[1] * eff.eta_b * eff.n1 * exposure,
        b2: singles.input2[1] * eff.eta_b * eff.n2 * exposure,
        ab: n11 * eff.eta_a * eff.eta_b,
        cd: n11 * eff.eta_c * eff.eta_d,
        ac: 2.0 * n20 * eff.eta_a * eff.eta_c,
        bd: 2.0 * n02 * eff.eta_b * eff.eta_d,
    }
}

/// A normalized probability with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedEstimate {
    pub value: f64,
    pub sigma: f64,
}

// sqrt(x) / (sqrt(x) + sqrt(y)) with x = c0 c1, y = c2 c3, plus the Poisson
// delta-method error: var = p^2 (1-p)^2 / 4 * sum(1 / c_i).
fn geometric_ratio(x_pair: (f64, f64), y_pair: (f64, f64), what: &'static str) -> Result<NormalizedEstimate> {
    let u = (x_pair.0 * x_pair.1).sqrt();
    let w = (y_pair.0 * y_pair.1).sqrt();
    if u + w == 0.0 {
        return Err(Error::NoData(what));
    }
    let p = u / (u + w);
    let spread = p * (1.0 - p);
    let sigma = if spread == 0.0 {
        0.0
    } else {
        let inv: f64 = [x_pair.0, x_pair.1, y_pair.0, y_pair.1].iter().map(|c| 1.0 / c).sum();
        spread * 0.5 * inv.sqrt()
    };
    Ok(NormalizedEstimate { value: p, sigma })
}

/// `p01 = sqrt(A2 B1) / (sqrt(A2 B1) + sqrt(A1 B2))`, independent of efficiencies and rates.
pub fn normalize_singles(rec: &CountRecord) -> Result<f64> {
    estimate_singles(rec).map(|e| e.value)
}

pub fn estimate_singles(rec: &CountRecord) -> Result<NormalizedEstimate> {
    geometric_ratio((rec.a2, rec.b1), (rec.a1, rec.b2), "all singles products are zero")
}

/// `p11 = sqrt(AB CD) / (sqrt(AB CD) + sqrt(AC BD))`, independent of efficiencies and pair rate.
pub fn normalize_coincidences(rec: &CountRecord) -> Result<f64> {
    estimate_coincidences(rec).map(|e| e.value)
}

pub fn estimate_coincidences(rec: &CountRecord) -> Result<NormalizedEstimate> {
    geometric_ratio((rec.ab, rec.cd), (rec.ac, rec.bd), "all coincidence products are zero")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ideal() -> EfficiencyModel {
        EfficiencyModel { eta_a: 1.0, eta_b: 1.0, eta_c: 1.0, eta_d: 1.0, n1: 1.0, n2: 1.0, n_pairs: 1.0 }
    }

    fn rec(s: [f64; 4], c: [f64; 4]) -> CountRecord {
        CountRecord::from_counts(1.0, [s[0], s[1], s[2], s[3], c[0], c[1], c[2], c[3]])
    }

    #[test]
    fn singles_fixtures() {
        assert_eq!(normalize_singles(&rec([0.0, 100.0, 100.0, 0.0], [0.0; 4])).unwrap(), 1.0);
        for k in [1.0, 7.0, 1e6] {
            assert_eq!(normalize_singles(&rec([k; 4], [0.0; 4])).unwrap(), 0.5);
        }
        assert!(matches!(normalize_singles(&rec([0.0; 4], [1.0; 4])), Err(Error::NoData(_))));
    }

    #[test]
    fn singles_cancel_efficiencies_and_rates() {
        let eff = EfficiencyModel { eta_a: 0.6, eta_b: 0.2, eta_c: 0.5, eta_d: 0.5, n1: 1e5, n2: 3e4, n_pairs: 1.0 };
        let dist = OutcomeDistribution::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let r = forward_model(&eff, &dist, &SinglesResponse::symmetric(0.7, 0.3), 1.0);
        assert_abs_diff_eq!(normalize_singles(&r).unwrap(), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn coincidence_fixtures() {
        assert_eq!(normalize_coincidences(&rec([0.0; 4], [5.0, 5.0, 0.0, 0.0])).unwrap(), 1.0);
        assert!(matches!(normalize_coincidences(&rec([1.0; 4], [0.0; 4])), Err(Error::NoData(_))));
    }

    #[test]
    fn pair_path_factor_cancels() {
        // N11 = N20 + N02 with N20 = N02.
        let eff =
            EfficiencyModel { eta_a: 0.31, eta_b: 0.77, eta_c: 0.12, eta_d: 0.93, n1: 1.0, n2: 1.0, n_pairs: 4e3 };
        let dist = OutcomeDistribution::new(0.3, 0.15, 0.15, 0.4).unwrap();
        let r = forward_model(&eff, &dist, &SinglesResponse::symmetric(0.5, 0.5), 2.5);
        assert_abs_diff_eq!(normalize_coincidences(&r).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn forward_model_fixtures() {
        let dist = OutcomeDistribution::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let r = forward_model(&ideal(), &dist, &SinglesResponse::symmetric(0.5, 0.5), 1.0);
        assert_eq!((r.ab, r.cd, r.ac, r.bd), (1.0, 1.0, 0.0, 0.0));

        let dist = OutcomeDistribution::new(0.0, 0.5, 0.5, 0.0).unwrap();
        let eff = EfficiencyModel { n_pairs: 100.0, ..ideal() };
        let r = forward_model(&eff, &dist, &SinglesResponse::symmetric(0.5, 0.5), 1.0);
        assert_eq!((r.ac, r.bd), (100.0, 100.0));
    }

    #[test]
    fn doubling_eta_a_touches_only_a_channels() {
        let eff = EfficiencyModel { eta_a: 0.3, eta_b: 0.4, eta_c: 0.5, eta_d: 0.6, n1: 10.0, n2: 20.0, n_pairs: 30.0 };
        let dist = OutcomeDistribution::new(0.2, 0.1, 0.3, 0.4).unwrap();
        let singles = SinglesResponse::symmetric(0.35, 0.65);
        let base = forward_model(&eff, &dist, &singles, 1.0);
        let doubled = forward_model(&EfficiencyModel { eta_a: 0.6, ..eff }, &dist, &singles, 1.0);
        let touched = [true, true, false, false, true, false, true, false];
        for ((b, d), t) in base.counts().iter().zip(doubled.counts()).zip(touched) {
            let factor = if t { 2.0 } else { 1.0 };
            assert_abs_diff_eq!(d, factor * b, epsilon = 1e-12);
        }
    }

    #[test]
    fn delta_method_sigma() {
        // p = 1/2, all counts 400 -> sigma = 1/4 * 1/2 * sqrt(4/400) = 0.0125
        let e = estimate_coincidences(&rec([0.0; 4], [400.0; 4])).unwrap();
        assert_abs_diff_eq!(e.sigma, 0.0125, epsilon = 1e-15);
        let e = estimate_coincidences(&rec([0.0; 4], [5.0, 5.0, 0.0, 3.0])).unwrap();
        assert_eq!((e.value, e.sigma), (1.0, 0.0));
    }

    #[test]
    fn validation() {
        assert!(rec([1.0; 4], [1.0; 4]).validate().is_ok());
        assert!(rec([-1.0, 0.0, 0.0, 0.0], [1.0; 4]).validate().is_err());
        assert!(CountRecord { exposure: 0.0, ..rec([1.0; 4], [1.0; 4]) }.validate().is_err());
        assert!(EfficiencyModel { eta_c: 0.0, ..ideal() }.validate().is_err());
        assert!(EfficiencyModel { eta_c: 1.5, ..ideal() }.validate().is_err());
    }
}
