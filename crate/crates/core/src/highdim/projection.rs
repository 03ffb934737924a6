//! Seeded subgaussian random projections, Johnson-Lindenstrauss distortion
//! checks, and Monte Carlo Gaussian-width estimation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSet;
use crate::error::{Error, Result};
use crate::rng::Substreams;

const STREAM_PROJECTION: u64 = 16;
const STREAM_WIDTH: u64 = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionKind {
    Gaussian,
    Rademacher,
}

/// An m x p matrix with i.i.d. N(0,1) or +-1 entries scaled by 1/sqrt(m),
/// regenerable bit-exactly from (seed, m, p, tag) — players and server share
/// it by seed alone. Serializes as exactly those four fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ProjectionSpec", into = "ProjectionSpec")]
pub struct ProjectionMatrix {
    seed: u64,
    m: usize,
    p: usize,
    kind: ProjectionKind,
    /// Row-major, already scaled by 1/sqrt(m).
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProjectionSpec {
    seed: u64,
    m: usize,
    p: usize,
    tag: ProjectionKind,
}

impl From<ProjectionMatrix> for ProjectionSpec {
    fn from(x: ProjectionMatrix) -> Self {
        ProjectionSpec { seed: x.seed, m: x.m, p: x.p, tag: x.kind }
    }
}

impl TryFrom<ProjectionSpec> for ProjectionMatrix {
    type Error = Error;
    fn try_from(s: ProjectionSpec) -> Result<Self> {
        gen_projection(s.m, s.p, s.tag, s.seed)
    }
}

/// Draws the shared projection matrix.
pub fn gen_projection(
    m: usize,
    p: usize,
    kind: ProjectionKind,
    seed: u64,
) -> Result<ProjectionMatrix> {
    if m < 1 || m > p {
        return Err(Error::domain(format!("need 1 <= m <= p, got m={m}, p={p}")));
    }
    let mut rng = Substreams::new(seed).labeled(STREAM_PROJECTION);
    let scale = 1.0 / (m as f64).sqrt();
    let data: Vec<f64> = (0..m * p)
        .map(|_| match kind {
            ProjectionKind::Gaussian => {
                let x: f64 = StandardNormal.sample(&mut rng);
                x * scale
            }
            ProjectionKind::Rademacher => {
                if rng.random::<bool>() {
                    scale
                } else {
                    -scale
                }
            }
        })
        .collect();
    Ok(ProjectionMatrix { seed, m, p, kind, data })
}

impl ProjectionMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    /// Phi v for v of length p.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Phi^T u for u of length m.
    pub fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (i, &ui) in u.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += ui * a;
            }
        }
        out
    }

    /// Largest singular value by power iteration on Phi^T Phi.
    pub fn operator_norm(&self, iters: usize) -> f64 {
        let mut v = vec![1.0 / (self.p as f64).sqrt(); self.p];
        let mut norm = 0.0;
        for _ in 0..iters {
            let w = self.apply_transpose(&self.apply(&v));
            norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        norm.sqrt()
    }
}

/// Outcome of the distortion check sup_{a in S} |  ||Phi a||^2 - ||a||^2 | / ||a||^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JlOutcome {
    pub pass: bool,
    pub max_distortion: f64,
}

/// Exact distortion check over a finite point set; the zero vector counts
/// as distortion 0.
pub fn jl_check(phi: &ProjectionMatrix, points: &[Vec<f64>], gamma: f64) -> Result<JlOutcome> {
    if points.is_empty() {
        return Err(Error::Degenerate("empty point set".into()));
    }
    let mut worst = 0.0f64;
    for a in points {
        if a.len() != phi.p() {
            return Err(Error::domain("point dimension mismatch"));
        }
        let norm2: f64 = a.iter().map(|x| x * x).sum();
        if norm2 == 0.0 {
            continue;
        }
        let img = phi.apply(a);
        let img2: f64 = img.iter().map(|x| x * x).sum();
        worst = worst.max((img2 - norm2).abs() / norm2);
    }
    Ok(JlOutcome { pass: worst <= gamma, max_distortion: worst })
}

/// Monte Carlo Gaussian width of a constraint set: the mean over `trials`
/// standard gaussians of the closed-form support function. Per-trial
/// substreams keep the estimate independent of thread count. Returns
/// (estimate, standard error).
pub fn gaussian_width_mc(set: &ConstraintSet, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if trials < 2 {
        return Err(Error::domain("need at least 2 trials"));
    }
    use crate::constraint::Region;
    let p = set.dim();
    let subs = Substreams::new(seed);
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = subs.labeled(STREAM_WIDTH + 1 + t as u64);
            let g: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            set.support(&g)
        })
        .collect();
    let mean = values.iter().sum::<f64>() / trials as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / trials as f64;
    Ok((mean, (var / trials as f64).sqrt()))
}

/// Monte Carlo Gaussian width of a finite point set (sup of <a_i, g>).
pub fn gaussian_width_points(points: &[Vec<f64>], trials: usize, seed: u64) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Degenerate("empty point set".into()));
    }
    let p = points[0].len();
    let subs = Substreams::new(seed);
    let total: f64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = subs.labeled(STREAM_WIDTH + 1 + t as u64);
            let g: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            points
                .iter()
                .map(|a| a.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    Ok(total / trials as f64)
}

/// Projection dimension from the norm-preservation lemma with every
/// constant (including the subgaussian norm) set to 1:
/// m = (1/gamma^2) max{width, ln(1/beta)}^2.
pub fn lemma_projection_dim(gamma: f64, beta: f64, width: f64) -> usize {
    let base = width.max((1.0 / beta).ln());
    ((base * base) / (gamma * gamma)).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_regenerates_bit_identical() {
        let a = gen_projection(5, 40, ProjectionKind::Gaussian, 3).unwrap();
        let b = gen_projection(5, 40, ProjectionKind::Gaussian, 3).unwrap();
        assert_eq!(a.data, b.data);
        let js = serde_json::to_string(&a).unwrap();
        assert!(js.contains("\"tag\":\"gaussian\""));
        let c: ProjectionMatrix = serde_json::from_str(&js).unwrap();
        assert_eq!(a.data, c.data);
    }

    #[test]
    fn rejects_m_above_p() {
        assert!(gen_projection(10, 5, ProjectionKind::Gaussian, 0).is_err());
    }

    #[test]
    fn column_norms_are_calibrated() {
        // E || Phi e_j ||^2 = 1 for both entry distributions
        for kind in [ProjectionKind::Gaussian, ProjectionKind::Rademacher] {
            let phi = gen_projection(50, 1000, kind, 4).unwrap();
            let mut total = 0.0;
            for j in 0..1000 {
                let mut e = vec![0.0; 1000];
                e[j] = 1.0;
                let img = phi.apply(&e);
                total += img.iter().map(|x| x * x).sum::<f64>();
            }
            let mean = total / 1000.0;
            assert!((mean - 1.0).abs() < 0.05, "{kind:?}: {mean}");
        }
    }

    #[test]
    fn square_projection_roughly_preserves_norms() {
        let phi = gen_projection(200, 200, ProjectionKind::Gaussian, 5).unwrap();
        let subs = Substreams::new(6);
        let mut rng = subs.labeled(1);
        for _ in 0..100 {
            let a: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let img = phi.apply(&a);
            let inorm: f64 = img.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((inorm / norm - 1.0).abs() < 0.2, "{inorm} vs {norm}");
        }
    }

    #[test]
    fn jl_zero_vector_passes_trivially() {
        let phi = gen_projection(2, 4, ProjectionKind::Gaussian, 7).unwrap();
        let out = jl_check(&phi, &[vec![0.0; 4]], 0.01).unwrap();
        assert!(out.pass);
        assert_eq!(out.max_distortion, 0.0);
    }

    #[test]
    fn jl_tiny_m_fails_as_negative_control() {
        let subs = Substreams::new(8);
        let mut rng = subs.labeled(2);
        let points: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..50).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let mut fails = 0;
        for seed in 0..20 {
            let phi = gen_projection(1, 50, ProjectionKind::Gaussian, seed).unwrap();
            if !jl_check(&phi, &points, 0.01).unwrap().pass {
                fails += 1;
            }
        }
        assert!(fails >= 19, "{fails}/20");
    }

    #[test]
    fn width_of_singleton_is_zero() {
        let set = ConstraintSet::L2Ball { center: vec![0.3, 0.7], radius: 0.0 };
        let (w, se) = gaussian_width_mc(&set, 4000, 9).unwrap();
        assert!(w.abs() <= 3.0 * se + 1e-12, "{w} vs {se}");
    }

    #[test]
    fn width_of_l2_ball_matches_chi_mean() {
        // E ||g||_2 for p = 100 is sqrt(2) Gamma(50.5)/Gamma(50) ~ sqrt(p)
        let p = 100;
        let set = ConstraintSet::L2Ball { center: vec![0.0; p], radius: 1.0 };
        let (w, _) = gaussian_width_mc(&set, 10_000, 10).unwrap();
        let want = (p as f64).sqrt();
        assert!((w - want).abs() <= 0.05 * want, "{w} vs {want}");
    }

    #[test]
    fn width_of_l1_ball_matches_max_abs_gaussian() {
        let p = 1000;
        let set = ConstraintSet::L1Ball { center: vec![0.0; p], radius: 1.0 };
        let (w, _) = gaussian_width_mc(&set, 10_000, 11).unwrap();
        let asymptotic = (2.0 * (p as f64).ln()).sqrt();
        assert!((w - asymptotic).abs() <= 0.10 * asymptotic, "{w} vs {asymptotic}");
    }

    #[test]
    fn width_is_deterministic_given_seed() {
        let set = ConstraintSet::probability_simplex(20);
        let a = gaussian_width_mc(&set, 500, 12).unwrap();
        let b = gaussian_width_mc(&set, 500, 12).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
    }
}
