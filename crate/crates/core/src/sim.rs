//! Synthetic counting experiments: concentration sweeps, HOM delay scans and
//! efficiency drift, with independent Poisson counts per channel.
//!
//! Every sweep step and every scan point draws from its own ChaCha stream
//! under the plan seed (`index + 1` for sweep steps, `2^32 + index` for scan
//! points), so results do not depend on execution order. The drift walk uses stream 0.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counts::{forward_model, CountRecord, EfficiencyModel, SinglesResponse};
use crate::error::{domain, Result};
use crate::fock::{mixed_coincidence, OverlapParameter};
use crate::mzi::{hom_coincidences, single_photon_distribution, two_photon_distribution, MziConfig};

/// Sample in the microchannel and the light probing it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleModel {
    /// Vacuum wavelength in micrometres.
    pub wavelength: f64,
    /// Optical path length through the channel in micrometres.
    pub channel_length: f64,
    /// Refractive-index change per percent concentration.
    pub dn_dc: f64,
    /// Phase at zero concentration, radians.
    #[serde(default)]
    pub phi_offset: f64,
}

impl SampleModel {
    /// 785 nm light through a 55 um channel of BSA solution, dn/dC = 1.79e-3 per %.
    pub fn bsa_785nm() -> Self {
        Self { wavelength: 0.785, channel_length: 55.0, dn_dc: 1.79e-3, phi_offset: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(domain(format!("wavelength {} must be positive", self.wavelength)));
        }
        if !(self.channel_length > 0.0 && self.channel_length.is_finite()) {
            return Err(domain(format!("channel_length {} must be positive", self.channel_length)));
        }
        if !self.dn_dc.is_finite() || !self.phi_offset.is_finite() {
            return Err(domain("dn_dc and phi_offset must be finite"));
        }
        Ok(())
    }

    /// Phase per percent concentration, `2 pi L (dn/dC) / lambda`.
    pub fn alpha(&self) -> f64 {
        2.0 * PI * self.channel_length * self.dn_dc / self.wavelength
    }
}

/// `phi = alpha C + phi_offset`.
pub fn concentration_to_phase(sample: &SampleModel, concentration: f64) -> f64 {
    sample.alpha() * concentration + sample.phi_offset
}

/// Detection efficiencies of the four detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorEfficiencies {
    pub eta_a: f64,
    pub eta_b: f64,
    pub eta_c: f64,
    pub eta_d: f64,
}

impl DetectorEfficiencies {
    pub fn uniform(eta: f64) -> Self {
        Self { eta_a: eta, eta_b: eta, eta_c: eta, eta_d: eta }
    }
}

/// Geometric random walk of the detector efficiencies and source rate:
/// each step multiplies a factor by `exp(sigma * N(0, 1))`, starting at 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftWalk {
    #[serde(default)]
    pub sigma_a: f64,
    #[serde(default)]
    pub sigma_b: f64,
    #[serde(default)]
    pub sigma_c: f64,
    #[serde(default)]
    pub sigma_d: f64,
    #[serde(default)]
    pub sigma_source: f64,
}

impl DriftWalk {
    fn sigmas(&self) -> [f64; 5] {
        [self.sigma_a, self.sigma_b, self.sigma_c, self.sigma_d, self.sigma_source]
    }

    /// Per-step factors for `steps` steps drawn from `rng`.
    pub fn factors<R: Rng + ?Sized>(&self, steps: usize, rng: &mut R) -> Vec<DriftFactors> {
        let mut current = [1.0; 5];
        (0..steps)
            .map(|k| {
                if k > 0 {
                    for (f, s) in current.iter_mut().zip(self.sigmas()) {
                        let z: f64 = rng.sample(StandardNormal);
                        *f *= (s * z).exp();
                    }
                }
                DriftFactors { a: current[0], b: current[1], c: current[2], d: current[3], source: current[4] }
            })
            .collect()
    }
}

/// Multiplicative perturbation of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftFactors {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub source: f64,
}

impl DriftFactors {
    pub const NONE: DriftFactors = DriftFactors { a: 1.0, b: 1.0, c: 1.0, d: 1.0, source: 1.0 };

    fn validate(&self) -> Result<()> {
        for v in [self.a, self.b, self.c, self.d, self.source] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("drift factor {v} must be positive")));
            }
        }
        Ok(())
    }

    /// Scales each channel of `means` by the efficiencies it depends on.
    pub fn apply(&self, means: &CountRecord) -> CountRecord {
        let s = self.source;
        CountRecord {
            exposure: means.exposure,
            a1: means.a1 * self.a * s,
            a2: means.a2 * self.a * s,
            b1: means.b1 * self.b * s,
            b2: means.b2 * self.b * s,
            ab: means.ab * self.a * self.b * s,
            cd: means.cd * self.c * self.d * s,
            ac: means.ac * self.a * self.c * s,
            bd: means.bd * self.b * self.d * s,
        }
    }
}

/// Applies per-step drift factors to a stream of expected records.
pub fn inject_drift(means: &[CountRecord], factors: &[DriftFactors]) -> Result<Vec<CountRecord>> {
    if means.len() != factors.len() {
        return Err(domain(format!("{} records but {} drift factors", means.len(), factors.len())));
    }
    factors.iter().try_for_each(DriftFactors::validate)?;
    Ok(means.iter().zip(factors).map(|(m, f)| f.apply(m)).collect())
}

/// Sweep schedule and source/detector settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    /// Concentrations in percent.
    pub concentrations: Vec<f64>,
    /// Seconds per step.
    pub exposure: f64,
    /// Photon pairs per second injected into both inputs.
    pub pair_rate: f64,
    /// Heralded single photons per input per second, as a fraction of the pair rate.
    #[serde(default = "one")]
    pub single_fraction: f64,
    pub efficiency: DetectorEfficiencies,
    pub seed: u64,
    #[serde(default)]
    pub drift: Option<DriftWalk>,
}

fn one() -> f64 {
    1.0
}

impl RunPlan {
    /// 15 concentrations from 0 % to 7 % in 0.5 % steps, about 1e4
    /// coincidences per step for the T = 0.61 interferometer.
    pub fn bsa_sweep(seed: u64) -> Self {
        Self {
            concentrations: (0..15).map(|k| 0.5 * k as f64).collect(),
            exposure: 1.0,
            pair_rate: 3.0e4,
            single_fraction: 1.0,
            efficiency: DetectorEfficiencies::uniform(0.5),
            seed,
            drift: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.concentrations.is_empty() {
            return Err(domain("plan has no concentrations"));
        }
        if let Some(c) = self.concentrations.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(domain(format!("concentration {c} must be finite and non-negative")));
        }
        if !(self.exposure > 0.0 && self.exposure.is_finite()) {
            return Err(domain(format!("exposure {} must be positive", self.exposure)));
        }
        if !(self.pair_rate >= 0.0 && self.pair_rate.is_finite()) {
            return Err(domain(format!("pair_rate {} must be non-negative", self.pair_rate)));
        }
        if !(self.single_fraction >= 0.0 && self.single_fraction.is_finite()) {
            return Err(domain(format!("single_fraction {} must be non-negative", self.single_fraction)));
        }
        if let Some(walk) = &self.drift {
            if walk.sigmas().iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(domain("drift sigmas must be finite and non-negative"));
            }
        }
        self.efficiency_model().validate()
    }

    pub fn efficiency_model(&self) -> EfficiencyModel {
        let singles = self.pair_rate * self.single_fraction;
        EfficiencyModel {
            eta_a: self.efficiency.eta_a,
            eta_b: self.efficiency.eta_b,
            eta_c: self.efficiency.eta_c,
            eta_d: self.efficiency.eta_d,
            n1: singles,
            n2: singles,
            n_pairs: self.pair_rate,
        }
    }

    fn step_rng(&self, index: usize) -> ChaCha8Rng {
        self.stream_rng(index as u64 + 1)
    }

    // HOM scan points use streams above 2^32 so they never share a sweep step's stream.
    fn scan_rng(&self, index: usize) -> ChaCha8Rng {
        self.stream_rng((1 << 32) + index as u64)
    }

    fn stream_rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Drift factors for each step; all ones without a drift walk.
    pub fn drift_factors(&self) -> Vec<DriftFactors> {
        match &self.drift {
            Some(walk) => {
                let mut rng = self.stream_rng(0);
                walk.factors(self.concentrations.len(), &mut rng)
            }
            None => vec![DriftFactors::NONE; self.concentrations.len()],
        }
    }
}

/// One step of a concentration sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub concentration: f64,
    pub record: CountRecord,
}

/// Expected (noise-free, drift-free) counts at concentration `c`.
pub fn expected_counts(
    plan: &RunPlan,
    config: &MziConfig,
    sample: &SampleModel,
    concentration: f64,
) -> Result<CountRecord> {
    let phi = concentration_to_phase(sample, concentration);
    let dist = two_photon_distribution(config, phi);
    let from0 = single_photon_distribution(config, phi, 0)?;
    let from1 = single_photon_distribution(config, phi, 1)?;
    let singles = SinglesResponse { input1: [from0.p_out0, from0.p_out1], input2: [from1.p_out0, from1.p_out1] };
    Ok(forward_model(&plan.efficiency_model(), &dist, &singles, plan.exposure))
}

/// Expected counts for every step of the plan, drift included.
pub fn expected_sweep(plan: &RunPlan, config: &MziConfig, sample: &SampleModel) -> Result<Vec<SweepPoint>> {
    validate_all(plan, config, sample)?;
    let means =
        plan.concentrations.iter().map(|&c| expected_counts(plan, config, sample, c)).collect::<Result<Vec<_>>>()?;
    let drifted = inject_drift(&means, &plan.drift_factors())?;
    Ok(plan
        .concentrations
        .iter()
        .zip(drifted)
        .map(|(&concentration, record)| SweepPoint { concentration, record })
        .collect())
}

fn validate_all(plan: &RunPlan, config: &MziConfig, sample: &SampleModel) -> Result<()> {
    plan.validate()?;
    config.validate()?;
    sample.validate()
}

pub fn poisson_sample<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng)
}

/// Draws independent Poisson counts around `means`.
pub fn sample_record<R: Rng + ?Sized>(means: &CountRecord, rng: &mut R) -> CountRecord {
    let counts = means.counts().map(|m| poisson_sample(m, rng));
    CountRecord::from_counts(means.exposure, counts)
}

/// Poisson-sampled concentration sweep.
pub fn simulate_sweep(plan: &RunPlan, config: &MziConfig, sample: &SampleModel) -> Result<Vec<SweepPoint>> {
    let expected = expected_sweep(plan, config, sample)?;
    Ok(expected
        .par_iter()
        .enumerate()
        .map(|(k, point)| {
            let mut rng = plan.step_rng(k);
            SweepPoint { concentration: point.concentration, record: sample_record(&point.record, &mut rng) }
        })
        .collect())
}

/// Delay axis of a Hong-Ou-Mandel scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomScanPlan {
    pub delays: Vec<f64>,
    /// Width of the Gaussian overlap `exp(-d^2 / (2 s^2))`, same units as the delays.
    pub coherence_scale: f64,
}

impl HomScanPlan {
    /// `points` delays spread evenly over `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, points: usize, coherence_scale: f64) -> Self {
        let delays =
            (0..points).map(|k| -half_width + 2.0 * half_width * k as f64 / (points.max(2) - 1) as f64).collect();
        Self { delays, coherence_scale }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomPoint {
    pub delay: f64,
    pub coincidences: f64,
}

/// Photon overlap at a given delay.
pub fn overlap_at(delay: f64, coherence_scale: f64) -> f64 {
    (-delay * delay / (2.0 * coherence_scale * coherence_scale)).exp()
}

/// Expected AB coincidences along a delay scan. The interferometer is probed
/// at its static phase `config.phi0`.
pub fn expected_hom_scan(
    delays: &[f64],
    coherence_scale: f64,
    config: &MziConfig,
    plan: &RunPlan,
) -> Result<Vec<HomPoint>> {
    if !(coherence_scale > 0.0 && coherence_scale.is_finite()) {
        return Err(domain(format!("coherence scale {coherence_scale} must be positive")));
    }
    if delays.iter().any(|d| !d.is_finite()) {
        return Err(domain("delays must be finite"));
    }
    plan.validate()?;
    config.validate()?;
    let hom = hom_coincidences(config, 0.0);
    let eff = plan.efficiency_model();
    let scale = eff.n_pairs * plan.exposure * eff.eta_a * eff.eta_b;
    delays
        .iter()
        .map(|&delay| {
            let gamma = OverlapParameter::new(overlap_at(delay, coherence_scale))?;
            let p = mixed_coincidence(hom.indistinguishable, hom.distinguishable, gamma)?;
            Ok(HomPoint { delay, coincidences: scale * p })
        })
        .collect()
}

/// Poisson-sampled HOM scan.
pub fn simulate_hom_scan(
    delays: &[f64],
    coherence_scale: f64,
    config: &MziConfig,
    plan: &RunPlan,
) -> Result<Vec<HomPoint>> {
    let expected = expected_hom_scan(delays, coherence_scale, config, plan)?;
    Ok(expected
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let mut rng = plan.scan_rng(k);
            HomPoint { delay: p.delay, coincidences: poisson_sample(p.coincidences, &mut rng) }
        })
        .collect())
}

/// Everything needed to reproduce a simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: MziConfig,
    pub sample: SampleModel,
    pub plan: RunPlan,
    #[serde(default)]
    pub hom: Option<HomScanPlan>,
}

impl RunManifest {
    /// The T = 0.61 interferometer probing BSA over the default sweep, with a
    /// HOM scan at the water-filled phase pi/2.
    pub fn bsa_default(seed: u64) -> Self {
        Self {
            config: MziConfig::balanced_with_ratio(0.61).expect("valid ratio"),
            sample: SampleModel::bsa_785nm(),
            plan: RunPlan::bsa_sweep(seed),
            hom: Some(HomScanPlan::symmetric(300.0, 61, 60.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_all(&self.plan, &self.config, &self.sample)?;
        if let Some(h) = &self.hom {
            if !(h.coherence_scale > 0.0 && h.coherence_scale.is_finite()) {
                return Err(domain(format!("hom.coherence_scale {} must be positive", h.coherence_scale)));
            }
        }
        Ok(())
    }

    /// HOM scan config: the sweep interferometer held at phase pi/2.
    pub fn hom_config(&self) -> MziConfig {
        MziConfig { phi0: PI / 2.0, ..self.config }
    }
}
