//! Smooth-query release via trigonometric basis averaging.
//!
//! Each player holds a point of [-1,1]^p and the basis values are
//! p_{i;r} = prod_j cos(r_j arccos(x_{i,j})), each in [-1, 1]. The server
//! averages the basis vector under LDP; answering a query f computes the
//! cosine-series coefficients of g_f(theta) = f(cos theta_1, ...) and dots
//! them with the released averages.

use rayon::prelude::*;

use super::{CoefficientSummary, Family, SummaryMeta, BASIS_CAP};
use crate::error::{Error, Result};
use crate::ldp::{pd_avg_aggregate, pd_avg_report, PrivacyParams};
use crate::poly::trig_fit;
use crate::rng::Substreams;
use crate::util::for_each_multi_index;

/// A smooth query with its (h, T) metadata.
pub struct SmoothQuery<'a> {
    pub f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub h: usize,
    pub smoothness_t: f64,
}

/// Exact answer (1/n) sum f(x_i) — the brute-force oracle.
pub fn true_smooth_answer(dataset: &[Vec<f64>], f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let sum: f64 = dataset.iter().map(|x| f(x)).sum();
    sum / dataset.len() as f64
}

fn check_dataset(dataset: &[Vec<f64>], p: usize) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Degenerate("empty dataset".into()));
    }
    for (i, x) in dataset.iter().enumerate() {
        if x.len() != p {
            return Err(Error::domain(format!("record {i} has wrong dimension")));
        }
        if x.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::domain(format!(
                "record {i} has coordinates outside [-1, 1]"
            )));
        }
    }
    Ok(())
}

fn basis_multi_indices(t: usize, p: usize) -> Result<Vec<Vec<usize>>> {
    let dim = t.pow(p as u32) as usize;
    if dim > BASIS_CAP {
        return Err(Error::Resource(format!(
            "trig basis dimension t^p = {dim} exceeds cap {BASIS_CAP}"
        )));
    }
    let mut out = Vec::with_capacity(dim);
    for_each_multi_index(t - 1, p, |r| out.push(r.to_vec()));
    Ok(out)
}

/// One basis value prod_j cos(r_j arccos(x_j)).
fn basis_value(x: &[f64], r: &[usize]) -> f64 {
    x.iter()
        .zip(r)
        .map(|(&xj, &rj)| (rj as f64 * xj.acos()).cos())
        .product()
}

fn smooth_meta(t: usize, p: usize, n: usize) -> SummaryMeta {
    SummaryMeta {
        p,
        k: None,
        degree: t,
        gamma: None,
        coeff_bound: 1.0,
        basis_order: "lexicographic over r in {0,..,t-1}^p".into(),
        n,
    }
}

/// Per-coordinate ranges: the all-zero index is constantly 1, every other
/// basis value fills [-1, 1].
fn smooth_ranges(indices: &[Vec<usize>]) -> Vec<(f64, f64)> {
    indices
        .iter()
        .map(|r| {
            if r.iter().all(|&ri| ri == 0) {
                (1.0, 1.0)
            } else {
                (-1.0, 1.0)
            }
        })
        .collect()
}

/// Private release: coordinate-sampled LDP average of the t^p basis values,
/// one sampled coordinate per player.
pub fn release_smooth(
    dataset: &[Vec<f64>],
    p: usize,
    t: usize,
    epsilon: f64,
    seed: u64,
) -> Result<CoefficientSummary> {
    if t < 1 {
        return Err(Error::domain("t must be >= 1"));
    }
    check_dataset(dataset, p)?;
    let privacy = PrivacyParams::new(epsilon, 0.05)?;
    let indices = basis_multi_indices(t, p)?;
    let ranges = smooth_ranges(&indices);
    let dim = indices.len();
    let subs = Substreams::new(seed);

    let reports: Vec<(usize, f64)> = dataset
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = subs.player(i);
            pd_avg_report(dim, |j| basis_value(x, &indices[j]), &ranges, epsilon, &mut rng)
        })
        .collect::<Result<_>>()?;
    let coeffs = pd_avg_aggregate(&reports, dataset.len(), dim, &ranges);

    Ok(CoefficientSummary {
        family: Family::TrigSmooth,
        coeffs,
        privacy: Some(privacy),
        meta: smooth_meta(t, p, dataset.len()),
    })
}

/// Noiseless reference: exact averages of every basis value.
pub fn release_smooth_noiseless(
    dataset: &[Vec<f64>],
    p: usize,
    t: usize,
) -> Result<CoefficientSummary> {
    if t < 1 {
        return Err(Error::domain("t must be >= 1"));
    }
    check_dataset(dataset, p)?;
    let indices = basis_multi_indices(t, p)?;
    let mut coeffs = vec![0.0; indices.len()];
    for x in dataset {
        for (acc, r) in coeffs.iter_mut().zip(&indices) {
            *acc += basis_value(x, r);
        }
    }
    for c in &mut coeffs {
        *c /= dataset.len() as f64;
    }
    Ok(CoefficientSummary {
        family: Family::TrigSmooth,
        coeffs,
        privacy: None,
        meta: smooth_meta(t, p, dataset.len()),
    })
}

/// Answers a smooth query from the summary: fits the cosine series of
/// g_f(theta) = f(cos theta) at the summary's degree and dots it with the
/// released basis averages.
pub fn answer_smooth(summary: &CoefficientSummary, query: &SmoothQuery<'_>) -> Result<f64> {
    if summary.family != Family::TrigSmooth {
        return Err(Error::domain("summary family is not trig-smooth"));
    }
    let p = summary.meta.p;
    let t = summary.meta.degree;
    let g = |theta: &[f64]| {
        let x: Vec<f64> = theta.iter().map(|th| th.cos()).collect();
        (query.f)(&x)
    };
    let fitted = trig_fit(g, p, t)?;
    if fitted.coeffs.len() != summary.coeffs.len() {
        return Err(Error::domain(format!(
            "degree mismatch: query fit has {} coefficients, summary {}",
            fitted.coeffs.len(),
            summary.coeffs.len()
        )));
    }
    Ok(fitted
        .coeffs
        .iter()
        .zip(&summary.coeffs)
        .map(|(c, s)| c * s)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn point_dataset(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = Substreams::new(seed).labeled(crate::rng::STREAM_DATA);
        (0..n)
            .map(|_| (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect()
    }

    #[test]
    fn zero_index_entry_is_one() {
        let data = point_dataset(500, 2, 1);
        let s = release_smooth_noiseless(&data, 2, 3).unwrap();
        assert!((s.coeffs[0] - 1.0).abs() < 1e-12);
        // records pinned at 1 give every basis value 1
        let ones = vec![vec![1.0, 1.0]; 10];
        let s1 = release_smooth_noiseless(&ones, 2, 3).unwrap();
        for &c in &s1.coeffs {
            assert!((c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_entries_are_chebyshev_averages() {
        // cos(r arccos x) = T_r(x); check against the explicit T_2 = 2x^2 - 1
        let data = point_dataset(400, 1, 2);
        let s = release_smooth_noiseless(&data, 1, 4).unwrap();
        let t2: f64 =
            data.iter().map(|x| 2.0 * x[0] * x[0] - 1.0).sum::<f64>() / data.len() as f64;
        assert!((s.coeffs[2] - t2).abs() < 1e-12);
    }

    #[test]
    fn linear_query_is_exact_noiselessly() {
        // f(x) = x lifts to cos(theta): degree-1 cosine, fit is exact
        let data = point_dataset(300, 1, 3);
        let s = release_smooth_noiseless(&data, 1, 4).unwrap();
        let f = |x: &[f64]| x[0];
        let q = SmoothQuery { f: &f, h: 1, smoothness_t: 1.0 };
        let ans = answer_smooth(&s, &q).unwrap();
        let truth = true_smooth_answer(&data, &f);
        assert!((ans - truth).abs() < 1e-8, "{ans} vs {truth}");
    }

    #[test]
    fn gaussian_kernel_queries_noiseless() {
        // Gaussian kernel at bandwidth 0.5: trig approximation error at
        // t = 8 is itself below 1e-3, and the answer inherits it
        let data = point_dataset(2_000, 1, 4);
        let s = release_smooth_noiseless(&data, 1, 8).unwrap();
        let f = |x: &[f64]| (-(x[0]) * (x[0]) / (2.0 * 0.25)).exp();
        let q = SmoothQuery { f: &f, h: 4, smoothness_t: 4.0 };
        let ans = answer_smooth(&s, &q).unwrap();
        let truth = true_smooth_answer(&data, &f);
        assert!((ans - truth).abs() <= 1e-3, "{ans} vs {truth}");
    }

    #[test]
    fn private_release_concentrates() {
        let data = point_dataset(100_000, 1, 5);
        let s = release_smooth(&data, 1, 8, 2.0, 6).unwrap();
        let f = |x: &[f64]| x[0];
        let q = SmoothQuery { f: &f, h: 1, smoothness_t: 1.0 };
        let ans = answer_smooth(&s, &q).unwrap();
        let truth = true_smooth_answer(&data, &f);
        assert!((ans - truth).abs() <= 0.05, "{ans} vs {truth}");
    }

    #[test]
    fn basis_values_stay_in_unit_interval() {
        let data = point_dataset(200, 2, 7);
        let indices = basis_multi_indices(4, 2).unwrap();
        for x in &data {
            for r in &indices {
                let v = basis_value(x, r);
                assert!((-1.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn answer_rejects_family_mismatch() {
        let bits = vec![vec![true, false]; 10];
        let marg =
            crate::query::release_marginals_noiseless(&bits, 2, 1, 0.2).unwrap();
        let f = |_: &[f64]| 1.0;
        let q = SmoothQuery { f: &f, h: 1, smoothness_t: 1.0 };
        assert!(answer_smooth(&marg, &q).is_err());
    }

    #[test]
    fn release_rejects_out_of_range_coordinates() {
        let bad = vec![vec![1.5]];
        assert!(release_smooth_noiseless(&bad, 1, 3).is_err());
        assert!(release_smooth(&bad, 1, 3, 1.0, 0).is_err());
    }
}
