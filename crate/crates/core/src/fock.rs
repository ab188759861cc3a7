//! Multimode bosonic Fock-state simulator for few-photon linear optics.
//!
//! A [`ModeTransform`] is the unitary acting on creation operators,
//! `a†_in[k] -> sum_j U[j][k] a†_out[j]`, so column `k` is the image of input
//! mode `k`. Loss is never represented by a sub-unitary matrix; a lossy element
//! couples the lossy mode to an extra vacuum (ancilla) mode instead.
//!
//! Coupler convention used throughout the crate:
//!
//! ```text
//! [ r   i t ]      r = sqrt(R), t = sqrt(1 - R)
//! [ i t   r ]
//! ```

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{check_unit, domain, Error, Result};

/// Maximum entry of `U†U - I` tolerated for a transform to count as unitary.
pub const UNITARY_TOLERANCE: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Unitary linear map on `dim` bosonic modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransform {
    matrix: DMatrix<Complex64>,
}

impl ModeTransform {
    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim) }
    }

    /// Wraps a square matrix, rejecting it unless it is unitary to [`UNITARY_TOLERANCE`].
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(domain(format!(
                "mode transform must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let residual = unitarity_residual(&matrix);
        if residual > UNITARY_TOLERANCE {
            return Err(Error::NotUnitary { residual });
        }
        Ok(Self { matrix })
    }

    /// Single-mode phase shifter `e^{i phi}`.
    pub fn phase(phi: f64) -> Self {
        Self { matrix: DMatrix::from_element(1, 1, Complex64::from_polar(1.0, phi)) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Amplitude for a photon entering `input` to leave in `output`.
    pub fn get(&self, output: usize, input: usize) -> Complex64 {
        self.matrix[(output, input)]
    }

    /// `max |U†U - I|` over all entries.
    pub fn unitarity_residual(&self) -> f64 {
        unitarity_residual(&self.matrix)
    }

    /// Applies `self` first and `next` afterwards.
    pub fn then(&self, next: &ModeTransform) -> Result<ModeTransform> {
        if self.dim() != next.dim() {
            return Err(domain(format!("cannot compose transforms of dim {} and {}", self.dim(), next.dim())));
        }
        Ok(ModeTransform { matrix: &next.matrix * &self.matrix })
    }

    pub fn transpose(&self) -> ModeTransform {
        ModeTransform { matrix: self.matrix.transpose() }
    }

    /// Random interferometer on `dim` modes: `layers` rounds of random phases
    /// followed by random couplers on random mode pairs.
    pub fn random_interferometer<R: Rng + ?Sized>(dim: usize, layers: usize, rng: &mut R) -> Self {
        let mut u = ModeTransform::identity(dim);
        if dim < 2 {
            let phi = rng.random_range(0.0..2.0 * PI);
            return ModeTransform::phase(phi);
        }
        for _ in 0..layers {
            for mode in 0..dim {
                let p = embed(&ModeTransform::phase(rng.random_range(0.0..2.0 * PI)), &[mode], dim)
                    .expect("valid phase embedding");
                u = u.then(&p).expect("equal dims");
            }
            let a = rng.random_range(0..dim);
            let mut b = rng.random_range(0..dim - 1);
            if b >= a {
                b += 1;
            }
            let c = build_coupler(rng.random_range(0.0..=1.0)).expect("reflectivity in range");
            u = u.then(&embed(&c, &[a, b], dim).expect("distinct modes")).expect("equal dims");
        }
        u
    }
}

fn unitarity_residual(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let product = m.adjoint() * m;
    let mut worst = 0.0_f64;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((product[(r, c)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Two-mode directional coupler with power reflectivity `reflectivity`.
pub fn build_coupler(reflectivity: f64) -> Result<ModeTransform> {
    check_unit("reflectivity", reflectivity)?;
    let r = Complex64::new(reflectivity.sqrt(), 0.0);
    let it = I * (1.0 - reflectivity).sqrt();
    Ok(ModeTransform { matrix: DMatrix::from_row_slice(2, 2, &[r, it, it, r]) })
}

/// Places `transform` on `target_modes` of a `total_dim`-mode network,
/// acting as the identity elsewhere.
pub fn embed(transform: &ModeTransform, target_modes: &[usize], total_dim: usize) -> Result<ModeTransform> {
    if target_modes.len() != transform.dim() {
        return Err(domain(format!(
            "{} target modes given for a {}-mode transform",
            target_modes.len(),
            transform.dim()
        )));
    }
    for (k, &m) in target_modes.iter().enumerate() {
        if m >= total_dim {
            return Err(domain(format!("mode {m} out of range for dim {total_dim}")));
        }
        if target_modes[..k].contains(&m) {
            return Err(domain(format!("mode {m} listed twice")));
        }
    }
    let mut matrix = DMatrix::identity(total_dim, total_dim);
    for (a, &row) in target_modes.iter().enumerate() {
        for (b, &col) in target_modes.iter().enumerate() {
            matrix[(row, col)] = transform.matrix[(a, b)];
        }
    }
    Ok(ModeTransform { matrix })
}

/// Photon number per mode, e.g. `|1,1,0,0>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationPattern(Vec<usize>);

impl OccupationPattern {
    pub fn new(counts: Vec<usize>) -> Self {
        Self(counts)
    }

    /// Pattern with one photon in each listed mode (modes may repeat).
    pub fn from_modes(dim: usize, modes: &[usize]) -> Result<Self> {
        let mut counts = vec![0; dim];
        for &m in modes {
            if m >= dim {
                return Err(domain(format!("mode {m} out of range for dim {dim}")));
            }
            counts[m] += 1;
        }
        Ok(Self(counts))
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// Mode index repeated by occupation: `(0,2,1)` -> `[1,1,2]`.
    pub fn mode_list(&self) -> Vec<usize> {
        self.0.iter().enumerate().flat_map(|(m, &n)| std::iter::repeat_n(m, n)).collect()
    }

    fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&n| factorial(n)).product()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All occupation patterns of `photons` photons over `dim` modes, in
/// lexicographically descending order of the count vector.
pub fn patterns(dim: usize, photons: usize) -> Vec<OccupationPattern> {
    fn rec(dim: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<OccupationPattern>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(OccupationPattern(prefix.clone()));
            prefix.pop();
            return;
        }
        for n in (0..=left).rev() {
            prefix.push(n);
            rec(dim, left - n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim > 0 {
        rec(dim, photons, &mut Vec::with_capacity(dim), &mut out);
    }
    out
}

/// Matrix permanent by Ryser's inclusion-exclusion formula.
pub fn permanent(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut total = Complex64::new(0.0, 0.0);
    for subset in 1u64..(1u64 << n) {
        let mut prod = Complex64::new(1.0, 0.0);
        for r in 0..n {
            let mut row_sum = Complex64::new(0.0, 0.0);
            for c in 0..n {
                if subset & (1 << c) != 0 {
                    row_sum += m[(r, c)];
                }
            }
            prod *= row_sum;
        }
        let sign = if (n - subset.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

fn submatrix(u: &DMatrix<Complex64>, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| u[(rows[r], cols[c])])
}

/// `<output| U |input>` for indistinguishable photons.
pub fn transition_amplitude(
    u: &ModeTransform,
    input: &OccupationPattern,
    output: &OccupationPattern,
) -> Result<Complex64> {
    check_pattern(u, input)?;
    check_pattern(u, output)?;
    if input.total() != output.total() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let sub = submatrix(&u.matrix, &output.mode_list(), &input.mode_list());
    Ok(permanent(&sub) / (input.factorial_product() * output.factorial_product()).sqrt())
}

fn check_pattern(u: &ModeTransform, pattern: &OccupationPattern) -> Result<()> {
    if pattern.dim() != u.dim() {
        return Err(domain(format!("pattern has {} modes, transform has {}", pattern.dim(), u.dim())));
    }
    Ok(())
}

/// Output amplitudes for every pattern with the same photon number as `input`.
pub fn output_amplitudes(u: &ModeTransform, input: &OccupationPattern) -> Result<Vec<(OccupationPattern, Complex64)>> {
    check_pattern(u, input)?;
    patterns(u.dim(), input.total())
        .into_iter()
        .map(|out| transition_amplitude(u, input, &out).map(|a| (out, a)))
        .collect()
}

/// Output amplitudes of a two-photon input.
pub fn two_photon_amplitudes(
    u: &ModeTransform,
    input: &OccupationPattern,
) -> Result<Vec<(OccupationPattern, Complex64)>> {
    if input.total() != 2 {
        return Err(domain(format!("two-photon input required, pattern holds {} photons", input.total())));
    }
    output_amplitudes(u, input)
}

/// Output amplitudes of one photon entering `input_mode`, i.e. that column of `U`.
pub fn single_photon_amplitudes(u: &ModeTransform, input_mode: usize) -> Result<Vec<Complex64>> {
    if input_mode >= u.dim() {
        return Err(domain(format!("input mode {input_mode} out of range for dim {}", u.dim())));
    }
    Ok(u.matrix.column(input_mode).iter().copied().collect())
}

/// Output probabilities when the input photons are mutually distinguishable:
/// `per(|U_{S,T}|^2) / prod S_i!`.
pub fn distinguishable_probabilities(
    u: &ModeTransform,
    input: &OccupationPattern,
) -> Result<Vec<(OccupationPattern, f64)>> {
    check_pattern(u, input)?;
    let cols = input.mode_list();
    Ok(patterns(u.dim(), input.total())
        .into_iter()
        .map(|out| {
            let sub = submatrix(&u.matrix, &out.mode_list(), &cols).map(|z| Complex64::new(z.norm_sqr(), 0.0));
            let p = permanent(&sub).re / out.factorial_product();
            (out, p)
        })
        .collect())
}

/// Pairwise indistinguishability of two photons, 1 = identical, 0 = fully distinguishable.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct OverlapParameter(f64);

impl OverlapParameter {
    pub fn new(gamma: f64) -> Result<Self> {
        check_unit("overlap", gamma)?;
        Ok(Self(gamma))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Coincidence probability for partially distinguishable photons.
pub fn mixed_coincidence(p_indist: f64, p_dist: f64, overlap: OverlapParameter) -> Result<f64> {
    check_unit("p_indist", p_indist)?;
    check_unit("p_dist", p_dist)?;
    let g = overlap.value();
    Ok(g * p_indist + (1.0 - g) * p_dist)
}
