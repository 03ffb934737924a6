//! Polynomial approximation kernels: Bernstein bases and iterated operators,
//! Chebyshev disjunction polynomials, and trigonometric approximants.
//!
//! Everything here is immutable after construction and safe to evaluate from
//! any number of threads.

mod bernstein;
mod chebyshev;
mod trig;

pub use bernstein::{bernstein_basis, iterated_bernstein_fit, BernsteinSurrogate};
pub use chebyshev::{chebyshev_disjunction, ChebyshevDisjunctionPoly};
pub use trig::{trig_fit, TrigPolynomial};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Schema tag for all JSON forms emitted by this module.
pub const SCHEMA_VERSION: u32 = 1;

/// Shape of a Bernstein surrogate: grid granularity `k` per axis, operator
/// iteration order `h`, dimension `p`, and the assumed bound `smoothness_t`
/// on partial derivatives of the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub k: usize,
    pub h: usize,
    pub p: usize,
    pub smoothness_t: f64,
}

impl SurrogateConfig {
    pub fn new(k: usize, h: usize, p: usize, smoothness_t: f64) -> Result<Self> {
        if k < 1 || h < 1 || p < 1 {
            return Err(Error::domain(format!(
                "surrogate config requires k, h, p >= 1 (got k={k}, h={h}, p={p})"
            )));
        }
        if !(smoothness_t > 0.0) {
            return Err(Error::domain(format!(
                "smoothness bound must be positive (got {smoothness_t})"
            )));
        }
        Ok(SurrogateConfig { k, h, p, smoothness_t })
    }

    /// Number of grid points, (k+1)^p, or a resource error past `cap`.
    pub fn grid_len_capped(&self, cap: usize) -> Result<usize> {
        let mut len: usize = 1;
        for _ in 0..self.p {
            len = len
                .checked_mul(self.k + 1)
                .filter(|&l| l <= cap)
                .ok_or_else(|| {
                    Error::Resource(format!(
                        "grid size (k+1)^p with k={}, p={} exceeds cap {cap}",
                        self.k, self.p
                    ))
                })?;
        }
        Ok(len)
    }

    pub fn grid_len(&self) -> usize {
        (self.k + 1).pow(self.p as u32)
    }
}
