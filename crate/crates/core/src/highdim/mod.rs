//! High-dimensional generalized-linear ERM: subgaussian random projection,
//! low-dimensional private optimization over the projected constraint set,
//! and Minkowski-gauge recovery.
//!
//! The low-dimensional stage is this crate's Bernstein mechanism run over
//! the image set Phi C, which is handled through a Frank-Wolfe projection
//! oracle rather than materialized.

mod projection;
mod recovery;

pub use projection::{
    gaussian_width_mc, gaussian_width_points, gen_projection, jl_check, lemma_projection_dim,
    JlOutcome, ProjectionKind, ProjectionMatrix,
};
pub use recovery::{gauge_value, recover_minkowski};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraint::{ConstraintSet, Region};
use crate::erm::{auto_k, minimize_surrogate};
use crate::error::{Error, Result};
use crate::ldp::PrivacyParams;
use crate::loss::{DataRecord, LossSpec};
use crate::poly::{iterated_bernstein_fit, SurrogateConfig};
use crate::protocol::{run_protocol, Mechanism, ProtocolConfig};

/// Link functions f(margin, z), convex and 1-Lipschitz in the margin on the
/// unit-margin range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlmLink {
    /// ln(1 + exp(-z margin))
    Logistic,
    /// (margin - z)^2 / 4
    Squared,
}

/// A generalized linear loss f(<w, y>, z) over records with ||y|| <= 1 and
/// |z| <= 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmLoss {
    pub link: GlmLink,
}

impl GlmLoss {
    pub fn logistic() -> Self {
        GlmLoss { link: GlmLink::Logistic }
    }

    pub fn squared() -> Self {
        GlmLoss { link: GlmLink::Squared }
    }

    /// Raw link value.
    pub fn raw(&self, margin: f64, z: f64) -> f64 {
        match self.link {
            GlmLink::Logistic => {
                let u = -z * margin;
                if u > 30.0 {
                    u
                } else {
                    u.exp().ln_1p()
                }
            }
            GlmLink::Squared => (margin - z) * (margin - z) / 4.0,
        }
    }

    /// d/d margin of the link.
    pub fn raw_margin_grad(&self, margin: f64, z: f64) -> f64 {
        match self.link {
            GlmLink::Logistic => {
                let u = -z * margin;
                let sig = 1.0 / (1.0 + (-u).exp());
                -z * sig
            }
            GlmLink::Squared => (margin - z) / 2.0,
        }
    }

    /// Largest observed |f(m1,z) - f(m2,z)| / |m1 - m2| over a sampled
    /// margin grid; the contract asks for <= 1 on unit margins.
    pub fn lipschitz_check(&self, margin_bound: f64, samples: usize) -> f64 {
        let mut worst = 0.0f64;
        for zi in 0..5 {
            let z = -1.0 + 0.5 * zi as f64;
            for i in 0..samples {
                let m1 = -margin_bound + 2.0 * margin_bound * i as f64 / samples as f64;
                let m2 = m1 + 1e-4;
                let ratio = (self.raw(m1, z) - self.raw(m2, z)).abs() / 1e-4;
                worst = worst.max(ratio);
            }
        }
        worst
    }
}

/// Checks the GLM norm contracts at ingestion.
pub fn validate_glm_records(dataset: &[DataRecord]) -> Result<()> {
    for (i, r) in dataset.iter().enumerate() {
        let norm: f64 = r.features.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1.0 + 1e-9 {
            return Err(Error::domain(format!(
                "record {i} has feature norm {norm} > 1"
            )));
        }
        if r.label.abs() > 1.0 + 1e-9 {
            return Err(Error::domain(format!("record {i} has |z| > 1")));
        }
    }
    Ok(())
}

/// Linear minimization over the recovery sets (closed form): the Frank-Wolfe
/// oracle.
fn fw_linear_min(set: &ConstraintSet, grad: &[f64]) -> Result<Vec<f64>> {
    match set {
        ConstraintSet::L1Ball { center, radius } => {
            if center.iter().any(|&c| c != 0.0) {
                return Err(Error::domain("Frank-Wolfe needs an origin-centered l1 ball"));
            }
            let (mut best_j, mut best_a) = (0usize, 0.0f64);
            for (j, &g) in grad.iter().enumerate() {
                if g.abs() > best_a {
                    best_a = g.abs();
                    best_j = j;
                }
            }
            let mut s = vec![0.0; grad.len()];
            s[best_j] = -radius * grad[best_j].signum();
            Ok(s)
        }
        ConstraintSet::Simplex { p, scale } => {
            let mut best_j = 0usize;
            for (j, &g) in grad.iter().enumerate() {
                if g < grad[best_j] {
                    best_j = j;
                }
            }
            let mut s = vec![0.0; *p];
            s[best_j] = *scale;
            Ok(s)
        }
        other => Err(Error::domain(format!(
            "Frank-Wolfe oracle implemented for l1-ball and simplex, not {}",
            other.describe()
        ))),
    }
}

/// min_{w in C} ||Phi w - target||^2 by Frank-Wolfe with exact line search;
/// returns w. Linear minimization over the l1 ball / simplex is closed-form,
/// so the image set Phi C never needs materializing.
fn fw_project_onto_image(
    phi: &ProjectionMatrix,
    set: &ConstraintSet,
    target: &[f64],
    iters: usize,
) -> Result<Vec<f64>> {
    let p = phi.p();
    let mut w = fw_linear_min(set, &vec![1.0; p])?; // any vertex
    let mut img = phi.apply(&w);
    for _ in 0..iters {
        let resid: Vec<f64> = img.iter().zip(target).map(|(a, b)| a - b).collect();
        let grad = phi.apply_transpose(&resid);
        let s = fw_linear_min(set, &grad)?;
        let s_img = phi.apply(&s);
        let d_img: Vec<f64> = s_img.iter().zip(&img).map(|(a, b)| a - b).collect();
        let denom: f64 = d_img.iter().map(|x| x * x).sum();
        if denom <= 1e-30 {
            break;
        }
        let numer: f64 = resid.iter().zip(&d_img).map(|(r, d)| -r * d).sum();
        let gamma = (numer / denom).clamp(0.0, 1.0);
        if gamma == 0.0 {
            break;
        }
        for (wi, si) in w.iter_mut().zip(&s) {
            *wi += gamma * (si - *wi);
        }
        for (ii, di) in img.iter_mut().zip(&d_img) {
            *ii += gamma * di;
        }
    }
    Ok(w)
}

/// The image set Phi C seen through grid coordinates: theta in [0,1]^m maps
/// affinely onto the bounding box of Phi C, and projection onto the feasible
/// part goes through the Frank-Wolfe oracle in w-space.
pub struct ProjectedPolytope<'a> {
    phi: &'a ProjectionMatrix,
    set: &'a ConstraintSet,
    lo: Vec<f64>,
    hi: Vec<f64>,
    fw_iters: usize,
}

impl<'a> ProjectedPolytope<'a> {
    pub fn new(phi: &'a ProjectionMatrix, set: &'a ConstraintSet) -> Result<Self> {
        let (lo, hi) = image_box(phi, set)?;
        Ok(ProjectedPolytope { phi, set, lo, hi, fw_iters: 150 })
    }

    pub fn to_image(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (l, h))| l + t * (h - l))
            .collect()
    }

    pub fn to_grid(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (l, h))| ((x - l) / (h - l)).clamp(0.0, 1.0))
            .collect()
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }
}

impl Region for ProjectedPolytope<'_> {
    fn dim(&self) -> usize {
        self.phi.m()
    }

    fn project(&self, theta: &[f64]) -> Vec<f64> {
        let target = self.to_image(theta);
        let w = fw_project_onto_image(self.phi, self.set, &target, self.fw_iters)
            .expect("recovery sets support the FW oracle");
        self.to_grid(&self.phi.apply(&w))
    }

    fn contains(&self, theta: &[f64], tol: f64) -> bool {
        let target = self.to_image(theta);
        let w = fw_project_onto_image(self.phi, self.set, &target, self.fw_iters)
            .expect("recovery sets support the FW oracle");
        let img = self.phi.apply(&w);
        let dist: f64 = img
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        // the FW projection itself converges to ~1e-3; fold that in
        dist <= tol + 2e-3
    }

    fn describe(&self) -> String {
        format!("Phi({}) in R^{}", self.set.describe(), self.phi.m())
    }
}

/// Per-coordinate bounding box of Phi C (closed form from the vertices of
/// the l1 ball / simplex).
fn image_box(phi: &ProjectionMatrix, set: &ConstraintSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = phi.m();
    let p = phi.p();
    let mut lo = vec![0.0; m];
    let mut hi = vec![0.0; m];
    match set {
        ConstraintSet::L1Ball { center, radius } => {
            if center.iter().any(|&c| c != 0.0) {
                return Err(Error::domain("image box needs an origin-centered l1 ball"));
            }
            for i in 0..m {
                let max_abs = (0..p).map(|j| phi.entry(i, j).abs()).fold(0.0f64, f64::max);
                hi[i] = radius * max_abs;
                lo[i] = -hi[i];
            }
        }
        ConstraintSet::Simplex { scale, .. } => {
            for i in 0..m {
                let row_max = (0..p).map(|j| phi.entry(i, j)).fold(f64::NEG_INFINITY, f64::max);
                let row_min = (0..p).map(|j| phi.entry(i, j)).fold(f64::INFINITY, f64::min);
                hi[i] = scale * row_max;
                lo[i] = scale * row_min;
            }
        }
        other => {
            return Err(Error::domain(format!(
                "projected ERM supports l1-ball and simplex, not {}",
                other.describe()
            )));
        }
    }
    for i in 0..m {
        if hi[i] - lo[i] < 1e-12 {
            hi[i] = lo[i] + 1e-12;
        }
    }
    Ok((lo, hi))
}

/// Theorem-style projection dimension with every constant and the
/// subgaussian norm set to 1, clamped to [1, min(p, 20)] so the
/// low-dimensional grid stays materializable.
pub fn auto_m(n: usize, p: usize, epsilon: f64, beta: f64, width: f64) -> usize {
    let n_f = n as f64;
    let complexity = width + n_f.ln().sqrt();
    let gamma = complexity.sqrt() * (1.0 / beta).ln() * (n_f / beta).ln().powf(0.25)
        / (n_f.sqrt() * epsilon);
    let gamma = gamma.min(0.99);
    let m = complexity * complexity * (n_f / beta).ln() / (gamma * gamma);
    (m.ceil() as usize).clamp(1, p.min(20))
}

/// Outcome of the high-dimensional pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HighDimResult {
    pub w_priv: Vec<f64>,
    pub w_bar: Vec<f64>,
    /// Monte Carlo Gaussian width of C: (estimate, standard error).
    pub gaussian_width: (f64, f64),
    /// Distortion check over (a sample of) the records at gamma = 0.5.
    pub distortion: JlOutcome,
    pub excess_risk: f64,
    pub m_used: usize,
    pub k_used: usize,
    /// ||Phi w_priv - w_bar||.
    pub feasibility: f64,
    /// Fraction of records with ||Phi y_i|| <= 2 (margin 2-Lipschitz check).
    pub lipschitz_ok_fraction: f64,
    /// "gauge" or "least-squares-fallback".
    pub recovery: String,
    pub minimizer: String,
}

/// Grid/operator parameters of the low-dimensional stage.
#[derive(Debug, Clone, Copy)]
pub struct LowDimBudget {
    /// None picks k by the theorem formula in dimension m.
    pub k: Option<usize>,
    pub h: usize,
}

impl Default for LowDimBudget {
    fn default() -> Self {
        LowDimBudget { k: None, h: 2 }
    }
}

/// Minimum-norm solution of Phi w = target through the SVD pseudo-inverse;
/// the fallback when gauge recovery reports an infeasible system.
fn least_squares_fallback(phi: &ProjectionMatrix, target: &[f64]) -> Vec<f64> {
    let m = phi.m();
    let p = phi.p();
    let mut a = DMatrix::zeros(m, p);
    for i in 0..m {
        for j in 0..p {
            a[(i, j)] = phi.entry(i, j);
        }
    }
    let svd = a.svd(true, true);
    let b = nalgebra::DVector::from_column_slice(target);
    match svd.solve(&b, 1e-12) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => vec![0.0; p],
    }
}

/// Non-private constrained minimum of the raw empirical GLM risk over C —
/// the oracle behind excess-risk reporting.
///
/// Squared link: sufficient-statistics projected gradient (the projection
/// onto the l1 ball / simplex is closed form), step 1/L from power
/// iteration. Logistic link: Frank-Wolfe with exact line search on the
/// quadratic upper model, for desk-scale sizes.
pub fn glm_oracle_min(
    dataset: &[DataRecord],
    loss: &GlmLoss,
    set: &ConstraintSet,
    iters: usize,
) -> Result<(Vec<f64>, f64)> {
    let n = dataset.len() as f64;
    let p = dataset[0].features.len();
    let risk = |w: &[f64]| -> f64 {
        dataset
            .iter()
            .map(|r| {
                let margin: f64 = w.iter().zip(&r.features).map(|(a, b)| a * b).sum();
                loss.raw(margin, r.label)
            })
            .sum::<f64>()
            / n
    };

    if loss.link == GlmLink::Squared {
        // f(w) = (w' G w - 2 b' w + c)/4 with G = (1/n) sum y y', b = (1/n) sum z y
        let mut gram = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        for r in dataset {
            for i in 0..p {
                let yi = r.features[i];
                b[i] += r.label * yi / n;
                for j in 0..p {
                    gram[i * p + j] += yi * r.features[j] / n;
                }
            }
        }
        let matvec = |v: &[f64]| -> Vec<f64> {
            (0..p)
                .map(|i| (0..p).map(|j| gram[i * p + j] * v[j]).sum())
                .collect()
        };
        // spectral norm of G by power iteration
        let mut v = vec![1.0 / (p as f64).sqrt(); p];
        let mut lmax = 1.0;
        for _ in 0..60 {
            let gv = matvec(&v);
            lmax = gv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if lmax == 0.0 {
                break;
            }
            for (vi, gvi) in v.iter_mut().zip(&gv) {
                *vi = gvi / lmax;
            }
        }
        let step = if lmax > 0.0 { 2.0 / lmax } else { 1.0 };
        let mut w = set.project(&vec![0.0; p]);
        for _ in 0..iters {
            let gw = matvec(&w);
            let grad: Vec<f64> = (0..p).map(|i| (gw[i] - b[i]) / 2.0).collect();
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
            let next = set.project(&trial);
            let moved: f64 = next
                .iter()
                .zip(&w)
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
                .sqrt();
            w = next;
            if moved < 1e-13 {
                break;
            }
        }
        let value = risk(&w);
        return Ok((w, value));
    }

    let mut w = fw_linear_min(set, &vec![1.0; p])?;
    for _ in 0..iters {
        let mut grad = vec![0.0; p];
        for r in dataset {
            let margin: f64 = w.iter().zip(&r.features).map(|(a, b)| a * b).sum();
            let g = loss.raw_margin_grad(margin, r.label) / n;
            for (gi, yi) in grad.iter_mut().zip(&r.features) {
                *gi += g * yi;
            }
        }
        let s = fw_linear_min(set, &grad)?;
        // backtracking line search along the FW direction
        let base = risk(&w);
        let slope: f64 = grad.iter().zip(s.iter().zip(&w)).map(|(g, (si, wi))| g * (si - wi)).sum();
        if slope >= -1e-14 {
            break;
        }
        let mut gamma = 1.0;
        let mut accepted = false;
        while gamma > 1e-10 {
            let trial: Vec<f64> = w
                .iter()
                .zip(&s)
                .map(|(wi, si)| wi + gamma * (si - wi))
                .collect();
            if risk(&trial) <= base + 0.3 * gamma * slope {
                w = trial;
                accepted = true;
                break;
            }
            gamma *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let value = risk(&w);
    Ok((w, value))
}

/// The full pipeline: shared-seed projection, low-dimensional Bernstein
/// mechanism over Phi C, and gauge recovery back to R^p.
pub fn dr_erm(
    dataset: &[DataRecord],
    loss: &GlmLoss,
    set: &ConstraintSet,
    epsilon: f64,
    m: Option<usize>,
    budget: LowDimBudget,
    seed: u64,
) -> Result<HighDimResult> {
    if dataset.is_empty() {
        return Err(Error::Degenerate("empty dataset".into()));
    }
    if !matches!(set, ConstraintSet::L1Ball { .. } | ConstraintSet::Simplex { .. }) {
        return Err(Error::domain(
            "dr_erm supports the origin-centered l1 ball and the simplex",
        ));
    }
    validate_glm_records(dataset)?;
    let p = dataset[0].features.len();
    let n = dataset.len();
    let beta = 0.05;
    let privacy = PrivacyParams::new(epsilon, beta)?;

    let width = gaussian_width_mc(set, 10_000, seed)?;
    let m_used = match m {
        Some(m) => {
            if m < 1 || m > p {
                return Err(Error::domain(format!("need 1 <= m <= p, got m={m}")));
            }
            m
        }
        None => auto_m(n, p, epsilon, beta, width.0),
    };
    let phi = gen_projection(m_used, p, ProjectionKind::Gaussian, seed)?;

    // each player's only data-dependent work: one matrix-vector product
    let projected: Vec<DataRecord> = dataset
        .par_iter()
        .map(|r| DataRecord::new(phi.apply(&r.features), r.label))
        .collect();

    // diagnostics on the original records
    let sample: Vec<Vec<f64>> = dataset
        .iter()
        .take(100)
        .map(|r| r.features.clone())
        .collect();
    let distortion = jl_check(&phi, &sample, 0.5)?;
    let lipschitz_ok = projected
        .iter()
        .filter(|r| r.features.iter().map(|x| x * x).sum::<f64>().sqrt() <= 2.0)
        .count() as f64
        / n as f64;

    // rescaled low-dimensional loss over the bounding box of Phi C
    let polytope = ProjectedPolytope::new(&phi, set)?;
    let (lo, hi) = polytope.bounds();
    let corner_norm: f64 = lo
        .iter()
        .zip(hi)
        .map(|(l, h)| l.abs().max(h.abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    let margin_bound = phi.operator_norm(50) * corner_norm;
    let (lo_c, hi_c) = (lo.to_vec(), hi.to_vec());
    let glm = *loss;
    let scale = match glm.link {
        GlmLink::Logistic => margin_bound + 1.0,
        GlmLink::Squared => (margin_bound + 1.0) * (margin_bound + 1.0) / 4.0,
    };
    let low_loss = LossSpec::custom(
        format!("glm-{:?}-projected", glm.link).to_lowercase(),
        m_used,
        1.0,
        None,
        true,
        move |theta: &[f64], rec: &DataRecord| {
            let margin: f64 = theta
                .iter()
                .zip(lo_c.iter().zip(&hi_c))
                .zip(&rec.features)
                .map(|((t, (l, h)), y)| (l + t * (h - l)) * y)
                .sum();
            match glm.link {
                GlmLink::Logistic => {
                    let u = -rec.label * margin;
                    let soft = if u > 30.0 { u } else { u.exp().ln_1p() };
                    soft / scale
                }
                GlmLink::Squared => {
                    (margin - rec.label) * (margin - rec.label) / (4.0 * scale)
                }
            }
        },
    );

    let k_used = budget
        .k
        .unwrap_or_else(|| auto_k(n, epsilon, beta, budget.h, m_used));
    let config = ProtocolConfig::new(
        Mechanism::FullGrid,
        privacy,
        SurrogateConfig::new(k_used, budget.h, m_used, 1.0)?,
        seed,
    );
    let (_, estimates) = run_protocol(&projected, &low_loss, &config)?;
    let surrogate = iterated_bernstein_fit(estimates.values, config.surrogate)?;
    let min = minimize_surrogate(&surrogate, &polytope, seed);
    let w_bar = polytope.to_image(&min.theta);

    let (w_priv, recovery) = match recover_minkowski(&w_bar, &phi, set) {
        Ok(w) => (w, "gauge".to_string()),
        Err(Error::Infeasible(_)) => (
            least_squares_fallback(&phi, &w_bar),
            "least-squares-fallback".to_string(),
        ),
        Err(e) => return Err(e),
    };
    let feasibility = phi
        .apply(&w_priv)
        .iter()
        .zip(&w_bar)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();

    let (_, oracle_value) = glm_oracle_min(dataset, loss, set, 800)?;
    let n_f = n as f64;
    let achieved: f64 = dataset
        .iter()
        .map(|r| {
            let margin: f64 = w_priv.iter().zip(&r.features).map(|(a, b)| a * b).sum();
            loss.raw(margin, r.label)
        })
        .sum::<f64>()
        / n_f;

    Ok(HighDimResult {
        w_priv,
        w_bar,
        gaussian_width: width,
        distortion,
        excess_risk: achieved - oracle_value,
        m_used,
        k_used,
        feasibility,
        lipschitz_ok_fraction: lipschitz_ok,
        recovery,
        minimizer: min.converged.to_string(),
    })
}
