//! Seeded Monte Carlo checks of the estimation pipeline.

use noonmzi::analysis::{
    analyze_sweep, estimate_concentration, fit_fringe, fit_fringe_with, fringe_points, FitOptions, FringeFit, Harmonic,
    Observation,
};
use noonmzi::counts::estimate_coincidences;
use noonmzi::sim::{simulate_sweep, DriftWalk, RunManifest, RunPlan};
use rayon::prelude::*;

const TRUE_V2: f64 = 2.0 * 0.61 / (1.0 + 0.61 * 0.61);

fn manifest(seed: u64, pair_rate: f64) -> RunManifest {
    let mut m = RunManifest::bsa_default(seed);
    m.plan.pair_rate = pair_rate;
    m
}

fn fit_run(m: &RunManifest, harmonic: Harmonic) -> FringeFit {
    let sweep = simulate_sweep(&m.plan, &m.config, &m.sample).unwrap();
    fit_fringe(&fringe_points(&sweep, harmonic).unwrap(), harmonic).unwrap()
}

#[test]
fn two_photon_visibility_errors_are_calibrated() {
    let fits: Vec<FringeFit> = (0..200u64)
        .into_par_iter()
        .map(|seed| fit_run(&RunManifest::bsa_default(1000 + seed), Harmonic::Double))
        .collect();
    let z: Vec<f64> = fits.iter().map(|f| (f.visibility - TRUE_V2) / f.visibility_err()).collect();
    let within1 = z.iter().filter(|z| z.abs() <= 1.0).count();
    let within2 = z.iter().filter(|z| z.abs() <= 2.0).count();
    assert!(within1 >= 116, "{within1}/200 within 1 sigma");
    assert!(within2 >= 180, "{within2}/200 within 2 sigma");
}

#[test]
fn visibility_error_at_low_counts_matches_reference_scale() {
    // About 20 coincidences per step.
    let mut sigmas: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|seed| fit_run(&manifest(1500 + seed, 60.0), Harmonic::Double).visibility_err())
        .collect();
    sigmas.sort_by(f64::total_cmp);
    let median = sigmas[50];
    assert!((0.024..=0.096).contains(&median), "median sigma {median}");
}

#[test]
fn regression_recovers_slope_within_three_errors() {
    let hits = (0..200u64)
        .into_par_iter()
        .filter(|&seed| {
            let m = RunManifest::bsa_default(2000 + seed);
            let sweep = simulate_sweep(&m.plan, &m.config, &m.sample).unwrap();
            let r = analyze_sweep(&sweep, Harmonic::Double, m.sample.wavelength, m.sample.channel_length)
                .unwrap()
                .regression;
            (r.slope - m.sample.dn_dc).abs() <= 3.0 * r.slope_err
        })
        .count();
    assert!(hits >= 190, "{hits}/200 within 3 slope_err");
}

#[test]
fn wrong_harmonic_leaves_large_residuals() {
    for seed in 0..10 {
        let m = RunManifest::bsa_default(3000 + seed);
        let alpha = m.sample.alpha();
        let options = FitOptions { alpha_min: Some(0.5 * alpha), alpha_max: Some(1.5 * alpha) };
        let sweep = simulate_sweep(&m.plan, &m.config, &m.sample).unwrap();
        let points = fringe_points(&sweep, Harmonic::Double).unwrap();
        let right = fit_fringe_with(&points, Harmonic::Double, options).unwrap();
        let wrong = fit_fringe_with(&points, Harmonic::Single, options).unwrap();
        assert!(
            wrong.residual_rms >= 5.0 * right.residual_rms,
            "seed {seed}: {} vs {}",
            wrong.residual_rms,
            right.residual_rms
        );
    }
}

#[test]
fn singles_fringe_has_classical_period() {
    let m = RunManifest::bsa_default(17);
    let single = fit_run(&m, Harmonic::Single);
    let double = fit_run(&m, Harmonic::Double);
    assert!((single.alpha - m.sample.alpha()).abs() < 0.01, "alpha {}", single.alpha);
    assert!((double.period() / single.period() - 0.5).abs() < 0.01);
    assert!((single.visibility - 2.0 * 0.61f64.sqrt() / 1.61).abs() < 0.01);
}

fn observe(m: &RunManifest, concentration: f64, seed: u64) -> Observation {
    let plan = RunPlan { concentrations: vec![concentration], seed, ..m.plan.clone() };
    let point = simulate_sweep(&plan, &m.config, &m.sample).unwrap()[0];
    let est = estimate_coincidences(&point.record).unwrap();
    Observation { p: est.value, sigma: est.sigma }
}

fn true_branch(fit: &FringeFit, concentration: f64) -> i64 {
    let psi = 2.0 * fit.alpha * concentration + fit.phase_offset;
    (psi / std::f64::consts::PI).floor() as i64
}

#[test]
fn concentration_intervals_cover_the_truth() {
    let truth = 3.25;
    let covered = (0..100u64)
        .into_par_iter()
        .filter(|&seed| {
            let m = RunManifest::bsa_default(4000 + seed);
            let fit = fit_run(&m, Harmonic::Double);
            let obs = observe(&m, truth, 9000 + seed);
            match estimate_concentration(&fit, obs, Some(true_branch(&fit, truth))) {
                Ok(est) => est.interval.0 <= truth && truth <= est.interval.1,
                Err(_) => false,
            }
        })
        .count();
    assert!(covered >= 90, "{covered}/100 intervals cover the truth");
}

#[test]
fn concentration_interval_shrinks_with_counts() {
    let truth = 3.25;
    let widths: Vec<f64> = [3e3, 3e4, 3e5]
        .iter()
        .map(|&rate| {
            let m = manifest(5000, rate);
            let fit = fit_run(&m, Harmonic::Double);
            let mut w: Vec<f64> = (0..21)
                .map(|k| {
                    let est =
                        estimate_concentration(&fit, observe(&m, truth, 6000 + k), Some(true_branch(&fit, truth)))
                            .unwrap();
                    est.interval.1 - est.interval.0
                })
                .collect();
            w.sort_by(f64::total_cmp);
            w[10]
        })
        .collect();
    assert!(widths[0] > widths[1] && widths[1] > widths[2], "{widths:?}");
}

#[test]
fn drift_does_not_bias_the_fringe() {
    let drift = DriftWalk { sigma_a: 0.05, sigma_b: 0.05, sigma_c: 0.05, sigma_d: 0.05, sigma_source: 0.1 };
    let pulls: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut m = RunManifest::bsa_default(7000 + seed);
            m.plan.drift = Some(drift);
            let fit = fit_run(&m, Harmonic::Double);
            (fit.visibility - TRUE_V2) / fit.visibility_err()
        })
        .collect();
    let mean = pulls.iter().sum::<f64>() / pulls.len() as f64;
    assert!(mean.abs() < 0.4, "mean pull {mean}");
}
