//! Client-side randomizers and server-side estimators.
//!
//! Every randomizer is a pure function of (input, parameters, stream state),
//! so identical seeds give bit-identical outputs. Each mechanism has a
//! matching exhaustive privacy-ratio check in [`checks`].

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Substreams, STREAM_PUBLIC_STRINGS};

/// Privacy budget epsilon plus the accuracy targets used by bounds and
/// auto-parameter formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    /// Failure probability in (0, 1).
    pub beta: f64,
    /// Optional target error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, beta: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::domain(format!("epsilon={epsilon} must be positive")));
        }
        if !(0.0 < beta && beta < 1.0) {
            return Err(Error::domain(format!("beta={beta} outside (0, 1)")));
        }
        Ok(PrivacyParams { epsilon, beta, alpha: None })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::domain(format!("alpha={alpha} must be positive")));
        }
        self.alpha = Some(alpha);
        Ok(self)
    }
}

static NOISE_DRAWS: AtomicU64 = AtomicU64::new(0);

/// Process-wide count of randomizer invocations. Oracle mode reports the
/// delta across its run and requires it to be zero.
pub fn noise_draws() -> u64 {
    NOISE_DRAWS.load(Ordering::Relaxed)
}

fn count_draw() {
    NOISE_DRAWS.fetch_add(1, Ordering::Relaxed);
}

/// Laplace(0, scale) by inverse CDF: one uniform draw per sample, so the
/// output is a deterministic function of the stream state.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::domain(format!("scale={scale} must be positive")));
    }
    count_draw();
    let u: f64 = rng.random::<f64>() - 0.5;
    // guard the measure-zero u = -0.5 draw that would produce ln(0)
    let w = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    Ok(-scale * u.signum() * w.ln())
}

/// One-round average of values in [0, b]: each player reports
/// v_i + Laplace(b/eps) and the server averages. Unbiased for the true mean.
pub fn ldp_avg_1d<R: Rng + ?Sized>(
    values: &[f64],
    b: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Degenerate("no players".into()));
    }
    if !(b > 0.0) || !(epsilon > 0.0) {
        return Err(Error::domain(format!("b={b}, epsilon={epsilon} must be positive")));
    }
    let mut sum = 0.0;
    for &v in values {
        if !(0.0..=b).contains(&v) {
            return Err(Error::domain(format!("value {v} outside [0, {b}]")));
        }
        sum += v + laplace_sample(b / epsilon, rng)?;
    }
    Ok(sum / values.len() as f64)
}

/// One player's report for the p-dimensional average: she samples a single
/// coordinate uniformly and perturbs only that one, so her work is O(1) in
/// the dimension. `value_at(j)` must return her j-th coordinate;
/// `ranges[j] = (lo, hi)` is the public per-coordinate range.
pub fn pd_avg_report<R: Rng + ?Sized>(
    dim: usize,
    value_at: impl Fn(usize) -> f64,
    ranges: &[(f64, f64)],
    epsilon: f64,
    rng: &mut R,
) -> Result<(usize, f64)> {
    let j = rng.random_range(0..dim);
    let (lo, hi) = ranges[j];
    let v = value_at(j);
    if v < lo - 1e-12 || v > hi + 1e-12 {
        return Err(Error::domain(format!(
            "coordinate {j} value {v} outside [{lo}, {hi}]"
        )));
    }
    let width = hi - lo;
    let shifted = dim as f64 * (v - lo);
    let noisy = if width > 0.0 {
        shifted + laplace_sample(dim as f64 * width / epsilon, rng)?
    } else {
        shifted
    };
    Ok((j, noisy))
}

/// Folds coordinate-sampled reports into the unbiased mean estimate
/// a_j = lo_j + (1/n) sum over reports for j.
pub fn pd_avg_aggregate(
    reports: &[(usize, f64)],
    n: usize,
    dim: usize,
    ranges: &[(f64, f64)],
) -> Vec<f64> {
    let mut sums = vec![0.0; dim];
    for &(j, x) in reports {
        sums[j] += x;
    }
    (0..dim)
        .map(|j| ranges[j].0 + sums[j] / n as f64)
        .collect()
}

/// p-dimensional LDP average of vectors with coordinates in [0, b]; each
/// player reports one randomly chosen coordinate. The per-coordinate error
/// concentrates as O(b p sqrt(log(p/beta)) / (sqrt(n) eps)).
pub fn ldp_avg_pd<R: Rng + ?Sized>(
    vectors: &[Vec<f64>],
    b: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if vectors.is_empty() {
        return Err(Error::Degenerate("no players".into()));
    }
    if !(b > 0.0) || !(epsilon > 0.0) {
        return Err(Error::domain(format!("b={b}, epsilon={epsilon} must be positive")));
    }
    let dim = vectors[0].len();
    if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::domain("vectors must share a positive dimension"));
    }
    let ranges = vec![(0.0, b); dim];
    let mut reports = Vec::with_capacity(vectors.len());
    for v in vectors {
        reports.push(pd_avg_report(dim, |j| v[j], &ranges, epsilon, rng)?);
    }
    Ok(pd_avg_aggregate(&reports, vectors.len(), dim, &ranges))
}

/// Pre-generated public Laplace strings, regenerable bit-exactly from
/// (seed, n, epsilon). Serializes as exactly those three fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PublicStringsSpec", into = "PublicStringsSpec")]
pub struct PublicStrings {
    seed: u64,
    epsilon: f64,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PublicStringsSpec {
    seed: u64,
    n: usize,
    epsilon: f64,
}

impl From<PublicStrings> for PublicStringsSpec {
    fn from(p: PublicStrings) -> Self {
        PublicStringsSpec { seed: p.seed, n: p.values.len(), epsilon: p.epsilon }
    }
}

impl TryFrom<PublicStringsSpec> for PublicStrings {
    type Error = Error;
    fn try_from(s: PublicStringsSpec) -> Result<Self> {
        PublicStrings::generate(s.seed, s.n, s.epsilon)
    }
}

impl PublicStrings {
    /// n i.i.d. Laplace(1/epsilon) draws from the dedicated public stream of
    /// `seed`.
    pub fn generate(seed: u64, n: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::domain(format!("epsilon={epsilon} must be positive")));
        }
        let mut rng = Substreams::new(seed).labeled(STREAM_PUBLIC_STRINGS);
        let values = (0..n)
            .map(|_| laplace_sample(1.0 / epsilon, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(PublicStrings { seed, epsilon, values })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// Largest epsilon the one-bit randomizer accepts.
pub const ONE_BIT_MAX_EPSILON: f64 = std::f64::consts::LN_2;

/// Bernoulli parameter of the one-bit randomizer:
/// p = (1/2) Pr[v + Lap(1/eps) = y] / Pr[Lap(1/eps) = y]
///   = (1/2) exp(eps (|y| - |y - v|)),
/// clamped into [0, 1] against rounding at the eps = ln 2 boundary.
pub fn one_bit_probability(v: f64, y: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(format!("v={v} outside [0, 1]")));
    }
    if !(epsilon > 0.0 && epsilon <= ONE_BIT_MAX_EPSILON + 1e-15) {
        return Err(Error::domain(format!(
            "one-bit randomizer requires 0 < epsilon <= ln 2, got {epsilon}"
        )));
    }
    let p = 0.5 * (epsilon * (y.abs() - (y - v).abs())).exp();
    Ok(p.min(1.0))
}

/// One player's bit against her public string.
pub fn one_bit_randomize<R: Rng + ?Sized>(
    v: f64,
    y: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<bool> {
    let p = one_bit_probability(v, y, epsilon)?;
    count_draw();
    Ok(rng.random::<f64>() < p)
}

/// A single one-bit report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneBitReport {
    pub bit: bool,
    pub player_index: usize,
    pub public_string_index: usize,
}

/// Server-side mean estimate for a subset's one-bit reports:
/// (2/|I|) sum b_i y_i, unbiased for the subset mean of the v_i.
///
/// E[b y] integrates to v/2, so the factor is 2/|I|.
pub fn one_bit_estimate(reports: &[OneBitReport], publics: &PublicStrings) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::Degenerate("one-bit estimate over an empty subset".into()));
    }
    let sum: f64 = reports
        .iter()
        .map(|r| if r.bit { publics.value(r.public_string_index) } else { 0.0 })
        .sum();
    Ok(2.0 * sum / reports.len() as f64)
}

/// Fixed grid over [-clamp_radius, 1 + clamp_radius] used by the discretized
/// randomizer; anchored at 0 so that 0 is always a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteGrid {
    pub step: f64,
    pub clamp_radius: f64,
    cells_below_zero: usize,
    cardinality: usize,
}

impl DiscreteGrid {
    pub fn new(step: f64, clamp_radius: f64) -> Result<Self> {
        if !(step > 0.0 && step < 1.0) {
            return Err(Error::domain(format!("step={step} outside (0, 1)")));
        }
        if !(clamp_radius >= 0.0) {
            return Err(Error::domain("clamp radius must be nonnegative"));
        }
        let below = (clamp_radius / step).ceil() as usize;
        let above = ((1.0 + clamp_radius) / step).ceil() as usize;
        Ok(DiscreteGrid {
            step,
            clamp_radius: below as f64 * step,
            cells_below_zero: below,
            cardinality: below + above + 1,
        })
    }

    /// Tail clamp R = (10/eps) ln(2n): leaves Laplace mass below (2n)^-10
    /// outside the grid.
    pub fn default_clamp_radius(epsilon: f64, n: usize) -> f64 {
        10.0 / epsilon * (2.0 * n as f64).ln()
    }

    /// Default step (1/(n eps)) sqrt(d/n log(d/beta)), constants set to 1.
    pub fn default_step(n: usize, d: usize, epsilon: f64, beta: f64) -> f64 {
        let n = n as f64;
        let d = d as f64;
        (1.0 / (n * epsilon)) * (d / n * (d / beta).ln()).sqrt()
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    /// Bits needed to name one grid cell.
    pub fn message_bits(&self) -> usize {
        (self.cardinality as f64).log2().ceil() as usize
    }

    pub fn value_of(&self, index: usize) -> f64 {
        (index as f64 - self.cells_below_zero as f64) * self.step
    }

    pub fn index_of(&self, z: f64) -> usize {
        let lo = -(self.cells_below_zero as f64) * self.step;
        let hi = self.value_of(self.cardinality - 1);
        let clamped = z.clamp(lo, hi);
        let idx = ((clamped - lo) / self.step).round() as usize;
        idx.min(self.cardinality - 1)
    }
}

/// Laplace-perturb v, clamp to the grid's extended range, and report the
/// nearest grid index — an O(log n)-bit message.
pub fn discretized_randomize<R: Rng + ?Sized>(
    v: f64,
    epsilon: f64,
    grid: &DiscreteGrid,
    rng: &mut R,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(format!("v={v} outside [0, 1]")));
    }
    let z = v + laplace_sample(1.0 / epsilon, rng)?;
    Ok(grid.index_of(z))
}

/// Exhaustive privacy-ratio checks, one per randomizer.
pub mod checks {
    use super::*;

    fn ratio_max(masses: &[Vec<f64>]) -> f64 {
        // masses[input][output]; max over ordered input pairs and outputs
        let mut worst = 0.0f64;
        for a in masses {
            for b in masses {
                for (pa, pb) in a.iter().zip(b) {
                    if *pa == 0.0 && *pb == 0.0 {
                        continue;
                    }
                    worst = worst.max(pa / pb);
                }
            }
        }
        worst
    }

    fn laplace_density(z: f64, center: f64, scale: f64) -> f64 {
        (-(z - center).abs() / scale).exp() / (2.0 * scale)
    }

    /// Laplace mass of the cell (lo, hi], computed in survival form so far
    /// tails never cancel to zero.
    fn laplace_cell_mass(lo: f64, hi: f64, center: f64, scale: f64) -> f64 {
        if hi <= center {
            // both edges in the lower tail
            let upper = if hi.is_finite() { ((hi - center) / scale).exp() } else { 1.0 };
            let lower = if lo.is_finite() { ((lo - center) / scale).exp() } else { 0.0 };
            0.5 * (upper - lower)
        } else if lo >= center {
            // both edges in the upper tail
            let upper = if lo.is_finite() { (-(lo - center) / scale).exp() } else { 1.0 };
            let lower = if hi.is_finite() { (-(hi - center) / scale).exp() } else { 0.0 };
            0.5 * (upper - lower)
        } else {
            let left = if lo.is_finite() {
                0.5 * ((lo - center) / scale).exp()
            } else {
                0.0
            };
            let right = if hi.is_finite() {
                0.5 * (-(hi - center) / scale).exp()
            } else {
                0.0
            };
            1.0 - left - right
        }
    }

    /// Max density ratio of the Laplace mechanism v -> v + Lap(b/eps) over a
    /// v-grid of [0, b] and a z-grid of [-z_span, b + z_span].
    pub fn laplace_ratio(b: f64, epsilon: f64, v_points: usize, z_points: usize) -> f64 {
        let scale = b / epsilon;
        let z_span = 8.0 * scale;
        let mut masses = Vec::with_capacity(v_points);
        for vi in 0..v_points {
            let v = b * vi as f64 / (v_points - 1) as f64;
            let row: Vec<f64> = (0..z_points)
                .map(|zi| {
                    let z = -z_span + (b + 2.0 * z_span) * zi as f64 / (z_points - 1) as f64;
                    laplace_density(z, v, scale)
                })
                .collect();
            masses.push(row);
        }
        ratio_max(&masses)
    }

    /// Max output-mass ratio of the one-bit randomizer over inputs v, v' and
    /// both bit values. The public string is data-independent randomness, so
    /// the bit's distribution is its marginal over y; the integral is
    /// discretized on a y-grid of [-y_span, y_span]. (Marginally the bit is
    /// Bernoulli(1/2) for every input, which is what this check certifies.)
    pub fn one_bit_marginal_ratio(
        epsilon: f64,
        v_points: usize,
        y_span: f64,
        y_points: usize,
    ) -> f64 {
        let scale = 1.0 / epsilon;
        let ys: Vec<f64> = (0..y_points)
            .map(|i| -y_span + 2.0 * y_span * i as f64 / (y_points - 1) as f64)
            .collect();
        let mut weights: Vec<f64> = ys.iter().map(|&y| laplace_density(y, 0.0, scale)).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let mut masses = Vec::with_capacity(v_points);
        for vi in 0..v_points {
            let v = vi as f64 / (v_points - 1) as f64;
            let p1: f64 = ys
                .iter()
                .zip(&weights)
                .map(|(&y, &w)| w * one_bit_probability(v, y, epsilon).unwrap())
                .sum();
            masses.push(vec![p1, 1.0 - p1]);
        }
        ratio_max(&masses)
    }

    /// Conditional-on-y check for the bit = 1 outcome, whose ratio is
    /// genuinely bounded by e^eps (and attains it at v = 0, v' = 1, y >= 1).
    pub fn one_bit_conditional_b1_ratio(epsilon: f64, v_points: usize, y_points: usize) -> f64 {
        let mut worst = 0.0f64;
        for yi in 0..y_points {
            let y = -10.0 + 20.0 * yi as f64 / (y_points - 1) as f64;
            let ps: Vec<f64> = (0..v_points)
                .map(|vi| {
                    let v = vi as f64 / (v_points - 1) as f64;
                    one_bit_probability(v, y, epsilon).unwrap()
                })
                .collect();
            for a in &ps {
                for b in &ps {
                    worst = worst.max(a / b);
                }
            }
        }
        worst
    }

    /// Max cell-mass ratio of the discretized randomizer: exact Laplace CDF
    /// masses per grid cell, with the clamp absorbing both tails into the
    /// boundary cells.
    pub fn discretized_mass_ratio(epsilon: f64, grid: &DiscreteGrid, v_points: usize) -> f64 {
        let scale = 1.0 / epsilon;
        let mut masses = Vec::with_capacity(v_points);
        for vi in 0..v_points {
            let v = vi as f64 / (v_points - 1) as f64;
            let mut row = Vec::with_capacity(grid.cardinality());
            for idx in 0..grid.cardinality() {
                let cell = grid.value_of(idx);
                let lo_edge = if idx == 0 {
                    f64::NEG_INFINITY
                } else {
                    cell - grid.step / 2.0
                };
                let hi_edge = if idx == grid.cardinality() - 1 {
                    f64::INFINITY
                } else {
                    cell + grid.step / 2.0
                };
                row.push(laplace_cell_mass(lo_edge, hi_edge, v, scale));
            }
            masses.push(row);
        }
        ratio_max(&masses)
    }
}
