//! Multi-start projected gradient descent with a dense-grid fallback for
//! p <= 2. Starts run concurrently; results merge by (value, lexicographic
//! point), so the outcome is independent of scheduling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::constraint::Region;

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub starts: usize,
    pub max_iters: usize,
    /// Step-displacement convergence threshold.
    pub step_tol: f64,
    /// Per-axis resolution of the dense scan used when dim <= 2.
    pub dense_resolution: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            starts: 32,
            max_iters: 600,
            step_tol: 1e-12,
            dense_resolution: 4097,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Ties in value resolve to the lexicographically smallest point.
fn better(candidate: &MinimizeResult, incumbent: &MinimizeResult) -> bool {
    if candidate.value < incumbent.value {
        return true;
    }
    if candidate.value == incumbent.value && lex_less(&candidate.theta, &incumbent.theta) {
        return true;
    }
    false
}

fn pgd_from(
    start: Vec<f64>,
    region: &dyn Region,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    grad: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    opts: &MinimizeOptions,
) -> MinimizeResult {
    let mut theta = region.project(&start);
    let mut value = f(&theta);
    let mut converged = false;
    for _ in 0..opts.max_iters {
        let g = grad(&theta);
        let mut step = 1.0f64;
        let mut moved = false;
        while step > 1e-16 {
            let trial: Vec<f64> = theta
                .iter()
                .zip(&g)
                .map(|(t, gi)| t - step * gi)
                .collect();
            let candidate = region.project(&trial);
            let disp2: f64 = candidate
                .iter()
                .zip(&theta)
                .map(|(c, t)| (c - t) * (c - t))
                .sum();
            if disp2.sqrt() <= opts.step_tol {
                converged = true;
                break;
            }
            let cand_val = f(&candidate);
            if cand_val <= value - 1e-4 / step * disp2 {
                theta = candidate;
                value = cand_val;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if converged || !moved {
            converged = converged || !moved;
            break;
        }
    }
    MinimizeResult { theta, value, converged }
}

fn corner_starts(p: usize, cap: usize) -> Vec<Vec<f64>> {
    let total = 1usize << p.min(20);
    (0..total.min(cap))
        .map(|mask| {
            (0..p)
                .map(|axis| if mask >> axis & 1 == 1 { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Best point of a dense scan of the unit cube projected onto the region.
pub fn dense_scan(
    region: &dyn Region,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    resolution: usize,
) -> MinimizeResult {
    let p = region.dim();
    let total = resolution.pow(p as u32);
    let mut best: Option<MinimizeResult> = None;
    let mut point = vec![0.0; p];
    for flat in 0..total {
        let mut rem = flat;
        for axis in (0..p).rev() {
            point[axis] = (rem % resolution) as f64 / (resolution - 1) as f64;
            rem /= resolution;
        }
        let proj = region.project(&point);
        let value = f(&proj);
        let cand = MinimizeResult { theta: proj, value, converged: true };
        match &best {
            Some(b) if !better(&cand, b) => {}
            _ => best = Some(cand),
        }
    }
    best.expect("resolution must be positive")
}

/// Minimizes `f` over `region` by multi-start PGD (corners of the unit cube
/// plus seeded random interior points), with a dense scan added for
/// dim <= 2. Deterministic given `seed`.
pub fn minimize_over(
    region: &dyn Region,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    grad: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    opts: &MinimizeOptions,
    seed: u64,
) -> MinimizeResult {
    let p = region.dim();
    let mut starts = corner_starts(p, opts.starts / 2);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    while starts.len() < opts.starts {
        starts.push((0..p).map(|_| rng.random::<f64>()).collect());
    }
    if p <= 2 {
        let res = if p == 1 {
            opts.dense_resolution
        } else {
            (opts.dense_resolution as f64).sqrt().ceil() as usize + 1
        };
        starts.push(dense_scan(region, f, res).theta);
    }

    let runs: Vec<MinimizeResult> = starts
        .into_par_iter()
        .map(|s| pgd_from(s, region, f, grad, opts))
        .collect();
    let mut best = runs[0].clone();
    for cand in &runs[1..] {
        if better(cand, &best) {
            best = cand.clone();
        }
    }
    best
}
