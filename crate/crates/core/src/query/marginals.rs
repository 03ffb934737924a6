//! k-way marginal (monotone disjunction) release via the Chebyshev
//! disjunction polynomial.
//!
//! Each player expands p_k(sum_j y_j [x_i]_j) into monomial coefficients
//! over the graded-lexicographic basis of p-variate monomials of total
//! degree <= t_k. Only monomials supported on her record's 1-coordinates
//! appear, with coefficient c_{|a|} * multinomial(|a|; a), so one
//! coordinate of the expansion costs O(p) — the private path samples a
//! single coordinate per player.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CoefficientSummary, Family, SummaryMeta, BASIS_CAP};
use crate::error::{Error, Result};
use crate::ldp::{pd_avg_aggregate, pd_avg_report, PrivacyParams};
use crate::poly::{chebyshev_disjunction, ChebyshevDisjunctionPoly};
use crate::rng::Substreams;
use crate::util::ln_factorial;

/// A monotone disjunction query OR-ing the attributes selected by `bits`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalQuery {
    pub bits: Vec<bool>,
}

impl MarginalQuery {
    pub fn new(bits: Vec<bool>) -> Self {
        MarginalQuery { bits }
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Disjunction value on one record.
    pub fn evaluate(&self, record: &[bool]) -> f64 {
        let hit = self
            .bits
            .iter()
            .zip(record)
            .any(|(y, x)| *y && *x);
        if hit {
            1.0
        } else {
            0.0
        }
    }
}

/// Exact query answer (1/n) sum_i q_y(x_i) — the brute-force oracle.
pub fn true_marginal_answer(dataset: &[Vec<bool>], query: &MarginalQuery) -> f64 {
    let sum: f64 = dataset.iter().map(|x| query.evaluate(x)).sum();
    sum / dataset.len() as f64
}

/// The p-variate monomial basis of total degree <= max_degree in graded
/// lexicographic order (by total degree, then lexicographic on exponents).
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    pub p: usize,
    pub max_degree: usize,
    exponents: Vec<Vec<usize>>,
}

fn push_exponents(
    prefix: &mut Vec<usize>,
    remaining_axes: usize,
    budget: usize,
    out: &mut Vec<Vec<usize>>,
) {
    if remaining_axes == 0 {
        if budget == 0 {
            out.push(prefix.clone());
        }
        return;
    }
    for e in 0..=budget {
        prefix.push(e);
        push_exponents(prefix, remaining_axes - 1, budget - e, out);
        prefix.pop();
    }
}

impl MonomialBasis {
    pub fn new(p: usize, max_degree: usize) -> Result<Self> {
        let dim = basis_dimension(p, max_degree);
        if dim > BASIS_CAP {
            return Err(Error::Resource(format!(
                "monomial basis dimension {dim} exceeds cap {BASIS_CAP}"
            )));
        }
        let mut exponents = Vec::with_capacity(dim);
        for degree in 0..=max_degree {
            let mut prefix = Vec::new();
            push_exponents(&mut prefix, p, degree, &mut exponents);
        }
        debug_assert_eq!(exponents.len(), dim);
        Ok(MonomialBasis { p, max_degree, exponents })
    }

    pub fn dimension(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponent(&self, index: usize) -> &[usize] {
        &self.exponents[index]
    }

    /// Monomial value prod_j y_j^{a_j} with 0^0 = 1.
    pub fn monomial_value(&self, index: usize, y: &[f64]) -> f64 {
        self.exponents[index]
            .iter()
            .zip(y)
            .map(|(&e, &yj)| yj.powi(e as i32))
            .product()
    }
}

/// C(p + t, t) as usize.
pub fn basis_dimension(p: usize, t: usize) -> usize {
    let mut out: f64 = 1.0;
    for i in 0..p.min(t) {
        out *= (p + t - i) as f64 / (i + 1) as f64;
    }
    out.round() as usize
}

fn multinomial(total: usize, parts: &[usize]) -> f64 {
    let mut ln = ln_factorial(total);
    for &a in parts {
        ln -= ln_factorial(a);
    }
    ln.exp().round()
}

/// Coefficient of monomial `alpha` in the expansion of
/// p_k(sum_{j in supp(x)} y_j): nonzero only when supp(alpha) is inside
/// supp(x), where it equals c_{|alpha|} * multinomial(|alpha|; alpha).
fn expansion_coefficient(record: &[bool], alpha: &[usize], poly: &ChebyshevDisjunctionPoly) -> f64 {
    let mut total = 0usize;
    for (e, &x) in alpha.iter().zip(record) {
        if *e > 0 {
            if !x {
                return 0.0;
            }
            total += e;
        }
    }
    if total == 0 {
        return 0.0; // constant term: c_0 = 0
    }
    poly.coeffs[total] * multinomial(total, alpha)
}

/// Largest-magnitude value coordinate `alpha` can take over any record, and
/// its sign: the per-coordinate range for LDP averaging. Data-independent.
fn coordinate_extreme(alpha: &[usize], poly: &ChebyshevDisjunctionPoly) -> f64 {
    let total: usize = alpha.iter().sum();
    if total == 0 {
        return 0.0;
    }
    poly.coeffs[total] * multinomial(total, alpha)
}

/// Expands one record's composed polynomial into the full coefficient
/// vector over the graded-lex basis.
pub fn encode_disjunction(
    record: &[bool],
    poly: &ChebyshevDisjunctionPoly,
    basis: &MonomialBasis,
) -> Result<Vec<f64>> {
    if record.len() != basis.p {
        return Err(Error::domain(format!(
            "record length {} != basis dimension p = {}",
            record.len(),
            basis.p
        )));
    }
    Ok((0..basis.dimension())
        .map(|j| expansion_coefficient(record, basis.exponent(j), poly))
        .collect())
}

fn marginal_ranges(poly: &ChebyshevDisjunctionPoly, basis: &MonomialBasis) -> (Vec<(f64, f64)>, f64) {
    let mut ranges = Vec::with_capacity(basis.dimension());
    let mut bound = 0.0f64;
    for j in 0..basis.dimension() {
        let w = coordinate_extreme(basis.exponent(j), poly);
        bound = bound.max(w.abs());
        ranges.push((w.min(0.0), w.max(0.0)));
    }
    (ranges, bound)
}

fn marginal_meta(
    poly: &ChebyshevDisjunctionPoly,
    p: usize,
    k: usize,
    bound: f64,
    n: usize,
) -> SummaryMeta {
    SummaryMeta {
        p,
        k: Some(k),
        degree: poly.degree,
        gamma: Some(poly.gamma_target),
        coeff_bound: bound,
        basis_order: "graded-lex over exponent multi-indices".into(),
        n,
    }
}

/// Private release: builds p_k with gamma = alpha/2, then runs the
/// coordinate-sampled LDP average over the per-player coefficient vectors,
/// one sampled coordinate per player.
pub fn release_marginals(
    dataset: &[Vec<bool>],
    p: usize,
    k: usize,
    epsilon: f64,
    alpha: f64,
    seed: u64,
) -> Result<CoefficientSummary> {
    if dataset.is_empty() {
        return Err(Error::Degenerate("empty dataset".into()));
    }
    if k > p {
        return Err(Error::domain(format!("k={k} exceeds p={p}")));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::domain(format!("alpha={alpha} outside (0, 2)")));
    }
    let privacy = PrivacyParams::new(epsilon, 0.05)?.with_alpha(alpha)?;
    let poly = chebyshev_disjunction(k, alpha / 2.0)?;
    let basis = MonomialBasis::new(p, poly.degree)?;
    let (ranges, bound) = marginal_ranges(&poly, &basis);
    let dim = basis.dimension();
    let subs = Substreams::new(seed);

    let reports: Vec<(usize, f64)> = dataset
        .par_iter()
        .enumerate()
        .map(|(i, record)| {
            if record.len() != p {
                return Err(Error::domain(format!("record {i} has wrong length")));
            }
            let mut rng = subs.player(i);
            pd_avg_report(
                dim,
                |j| expansion_coefficient(record, basis.exponent(j), &poly),
                &ranges,
                epsilon,
                &mut rng,
            )
        })
        .collect::<Result<_>>()?;
    let coeffs = pd_avg_aggregate(&reports, dataset.len(), dim, &ranges);

    Ok(CoefficientSummary {
        family: Family::ChebyshevMarginal,
        coeffs,
        privacy: Some(privacy),
        meta: marginal_meta(&poly, p, k, bound, dataset.len()),
    })
}

/// Noiseless reference: the exact average of the per-player coefficient
/// vectors. Used by oracles and the epsilon -> infinity contract.
pub fn release_marginals_noiseless(
    dataset: &[Vec<bool>],
    p: usize,
    k: usize,
    alpha: f64,
) -> Result<CoefficientSummary> {
    if dataset.is_empty() {
        return Err(Error::Degenerate("empty dataset".into()));
    }
    if k > p {
        return Err(Error::domain(format!("k={k} exceeds p={p}")));
    }
    let poly = chebyshev_disjunction(k, alpha / 2.0)?;
    let basis = MonomialBasis::new(p, poly.degree)?;
    let (_, bound) = marginal_ranges(&poly, &basis);
    let mut coeffs = vec![0.0; basis.dimension()];
    for record in dataset {
        for (j, acc) in coeffs.iter_mut().enumerate() {
            *acc += expansion_coefficient(record, basis.exponent(j), &poly);
        }
    }
    for c in &mut coeffs {
        *c /= dataset.len() as f64;
    }
    Ok(CoefficientSummary {
        family: Family::ChebyshevMarginal,
        coeffs,
        privacy: None,
        meta: marginal_meta(&poly, p, k, bound, dataset.len()),
    })
}

/// Evaluates the summary polynomial at the query's bit vector.
pub fn answer_marginal(summary: &CoefficientSummary, query: &MarginalQuery) -> Result<f64> {
    if summary.family != Family::ChebyshevMarginal {
        return Err(Error::domain(
            "summary family is not chebyshev-marginal",
        ));
    }
    if query.bits.len() != summary.meta.p {
        return Err(Error::domain(format!(
            "query length {} != p = {}",
            query.bits.len(),
            summary.meta.p
        )));
    }
    if let Some(k) = summary.meta.k {
        if query.weight() > k {
            return Err(Error::domain(format!(
                "query weight {} exceeds the released k = {k}",
                query.weight()
            )));
        }
    }
    let basis = MonomialBasis::new(summary.meta.p, summary.meta.degree)?;
    let y: Vec<f64> = query.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    Ok((0..basis.dimension())
        .map(|j| summary.coeffs[j] * basis.monomial_value(j, &y))
        .sum())
}

/// Every query of weight <= k when that enumeration is small (p <= 12);
/// otherwise `sample_cap` seeded random queries.
pub fn enumerate_queries(p: usize, k: usize, sample_cap: usize, seed: u64) -> Vec<MarginalQuery> {
    if p <= 12 {
        let mut out = Vec::new();
        for mask in 0..(1usize << p) {
            if mask.count_ones() as usize <= k {
                out.push(MarginalQuery::new(
                    (0..p).map(|j| mask >> j & 1 == 1).collect(),
                ));
            }
        }
        out
    } else {
        use rand::Rng;
        let mut rng = Substreams::new(seed).labeled(crate::rng::STREAM_SERVER);
        (0..sample_cap)
            .map(|_| {
                let mut bits = vec![false; p];
                let weight = rng.random_range(0..=k);
                for _ in 0..weight {
                    bits[rng.random_range(0..p)] = true;
                }
                MarginalQuery::new(bits)
            })
            .collect()
    }
}
