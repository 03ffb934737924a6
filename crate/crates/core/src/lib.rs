//! Non-interactive local differential privacy via polynomial approximation.
//!
//! The crate simulates one-round protocols in which every player perturbs her
//! own data before anything leaves her machine, and the server reconstructs
//! aggregate objects from the noisy messages:
//!
//! * [`ldp`] — client-side randomizers (Laplace, one-bit Bernoulli, discretized)
//!   and the matching unbiased server-side estimators, each with a
//!   machine-checkable privacy-ratio property.
//! * [`poly`] — Bernstein / Chebyshev / trigonometric approximation kernels
//!   used to turn a handful of noisy grid averages into a full function.
//! * [`protocol`] — player partitioning, transcripts, and exact communication
//!   accounting for the simulated protocols.
//! * [`erm`] — end-to-end private empirical risk minimization over a noisy
//!   Bernstein surrogate, with excess-risk measurement against exact oracles.
//! * [`query`] — private release of k-way marginal (disjunction) queries and
//!   smooth queries through coefficient averaging.
//! * [`highdim`] — random-projection pipeline for high-dimensional generalized
//!   linear losses with Minkowski-norm recovery.
//! * [`experiment`] — reproducible sweep driver and brute-force oracle mode
//!   backing the CLI.

pub mod constraint;
pub mod erm;
mod error;
pub mod experiment;
pub mod highdim;
pub mod ldp;
pub mod loss;
pub mod minimize;
pub mod poly;
pub mod protocol;
pub mod query;
pub mod rng;
mod util;

pub use constraint::ConstraintSet;
pub use erm::ErmResult;
pub use error::{Error, Result};
pub use highdim::{GlmLoss, HighDimResult, ProjectionMatrix};
pub use ldp::PrivacyParams;
pub use loss::{DataRecord, LossSpec};
pub use poly::{BernsteinSurrogate, ChebyshevDisjunctionPoly, SurrogateConfig, TrigPolynomial};
pub use protocol::{Mechanism, ProtocolConfig, Transcript};
pub use query::CoefficientSummary;

/// Crate version, recorded in sweep manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
