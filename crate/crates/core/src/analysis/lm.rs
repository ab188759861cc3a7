//! Weighted Levenberg-Marquardt for small dense problems.

use nalgebra::{DMatrix, DVector};

/// Model evaluated at abscissa `x`: value and gradient with respect to the parameters.
pub(crate) type Model<'a> = dyn Fn(f64, &[f64]) -> (f64, Vec<f64>) + 'a;

pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
}

pub(crate) fn linearize(
    model: &Model,
    xs: &[f64],
    ys: &[f64],
    w: &[f64],
    p: &[f64],
) -> (f64, DMatrix<f64>, DVector<f64>) {
    let n = p.len();
    let mut a = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    let mut chi2 = 0.0;
    for ((&x, &y), &wi) in xs.iter().zip(ys).zip(w) {
        let (f, grad) = model(x, p);
        let r = y - f;
        chi2 += wi * r * r;
        for i in 0..n {
            g[i] += wi * grad[i] * r;
            for j in 0..n {
                a[(i, j)] += wi * grad[i] * grad[j];
            }
        }
    }
    (chi2, a, g)
}

fn chi2_at(model: &Model, xs: &[f64], ys: &[f64], w: &[f64], p: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(w)
        .map(|((&x, &y), &wi)| {
            let r = y - model(x, p).0;
            wi * r * r
        })
        .sum()
}

pub(crate) fn levenberg_marquardt(model: &Model, xs: &[f64], ys: &[f64], weights: &[f64], init: &[f64]) -> LmOutcome {
    const MAX_ITER: usize = 500;
    let mut p = init.to_vec();
    let mut lambda = 1e-3;
    let (mut chi2, mut a, mut g) = linearize(model, xs, ys, weights, &p);
    for _ in 0..MAX_ITER {
        if chi2 == 0.0 {
            break;
        }
        let mut damped = a.clone();
        for i in 0..p.len() {
            damped[(i, i)] += lambda * a[(i, i)].max(1e-300);
        }
        let Some(step) = damped.lu().solve(&g) else {
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
            continue;
        };
        let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(pi, si)| pi + si).collect();
        let trial_chi2 = chi2_at(model, xs, ys, weights, &trial);
        if trial_chi2.is_finite() && trial_chi2 <= chi2 {
            let small = step.iter().zip(&p).all(|(s, pi)| s.abs() <= 1e-15 * (1.0 + pi.abs()));
            let stalled = chi2 - trial_chi2 <= 1e-16 * chi2;
            p = trial;
            (chi2, a, g) = linearize(model, xs, ys, weights, &p);
            lambda = (lambda * 0.1).max(1e-12);
            if small || (stalled && lambda <= 1e-9) {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
        }
    }
    LmOutcome { params: p }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential_decay() {
        let model = |x: f64, p: &[f64]| {
            let e = (-p[1] * x).exp();
            (p[0] * e, vec![e, -p[0] * x * e])
        };
        let xs: Vec<f64> = (0..20).map(|k| k as f64 * 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 3.0 * (-0.7 * x).exp()).collect();
        let w = vec![1.0; xs.len()];
        let out = levenberg_marquardt(&model, &xs, &ys, &w, &[1.0, 0.2]);
        assert!((out.params[0] - 3.0).abs() < 1e-10);
        assert!((out.params[1] - 0.7).abs() < 1e-10);
    }
}
