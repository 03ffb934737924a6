//! Non-interactive LDP release of query families: monotone k-way
//! disjunctions (equivalently k-way marginals) through Chebyshev coefficient
//! averaging, and (h,T)-smooth queries through trigonometric basis averaging.
//!
//! Each mechanism has a private path (coordinate-sampled LDP averaging, O(1)
//! work per player) and a noiseless path used by oracles and linearity
//! tests. A finished summary is immutable; answering queries from it is pure
//! and concurrent-safe.

pub mod marginals;
pub mod smooth;

pub use marginals::{
    answer_marginal, encode_disjunction, enumerate_queries, release_marginals,
    release_marginals_noiseless, true_marginal_answer, MarginalQuery, MonomialBasis,
};
pub use smooth::{
    answer_smooth, release_smooth, release_smooth_noiseless, true_smooth_answer, SmoothQuery,
};

use serde::{Deserialize, Serialize};

use crate::ldp::PrivacyParams;

/// Largest coefficient-vector dimension either mechanism will materialize.
pub const BASIS_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    ChebyshevMarginal,
    TrigSmooth,
}

/// A privately released coefficient vector for one query family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub family: Family,
    pub coeffs: Vec<f64>,
    /// None for the noiseless reference path.
    pub privacy: Option<PrivacyParams>,
    pub meta: SummaryMeta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryMeta {
    pub p: usize,
    /// Disjunction arity for marginals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Polynomial degree (t_k for marginals, per-axis t for smooth).
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Largest coefficient magnitude any record can produce (the LDP-AVG
    /// range bound for marginals; 1 for the cosine basis).
    pub coeff_bound: f64,
    /// How the coefficient vector is ordered.
    pub basis_order: String,
    pub n: usize,
}
