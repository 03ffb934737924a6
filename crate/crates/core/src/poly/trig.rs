//! Even trigonometric (cosine-basis) polynomials on [-pi, pi]^p and a
//! discrete-cosine quadrature fit. Callers approximating f on [-1,1]^p pass
//! g(theta) = f(cos theta_1, ..., cos theta_p); each basis element is
//! prod_i cos(r_i theta_i), so the fit is exact on in-span inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::for_each_multi_index;

/// Cosine-basis polynomial with per-axis degree below `t`; `coeffs` has
/// length t^p, indexed by the multi-index r in {0,..,t-1}^p in lexicographic
/// order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrigPolynomial {
    pub t: usize,
    pub p: usize,
    pub coeffs: Vec<f64>,
}

impl TrigPolynomial {
    pub fn new(t: usize, p: usize, coeffs: Vec<f64>) -> Result<Self> {
        if t < 1 || p < 1 {
            return Err(Error::domain(format!("t={t}, p={p} must be >= 1")));
        }
        let expected = t.pow(p as u32);
        if coeffs.len() != expected {
            return Err(Error::domain(format!(
                "coefficient vector has length {}, expected t^p = {expected}",
                coeffs.len()
            )));
        }
        Ok(TrigPolynomial { t, p, coeffs })
    }

    /// Evaluates sum_r c_r prod_i cos(r_i theta_i); even in every coordinate
    /// since only cosines appear.
    pub fn eval(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.p {
            return Err(Error::domain(format!(
                "point has dimension {}, polynomial has p={}",
                theta.len(),
                self.p
            )));
        }
        // cos(r * theta_i) tables per axis
        let tables: Vec<Vec<f64>> = theta
            .iter()
            .map(|&th| (0..self.t).map(|r| (r as f64 * th).cos()).collect())
            .collect();
        let mut acc = 0.0;
        let mut flat = 0usize;
        for_each_multi_index(self.t - 1, self.p, |r| {
            let mut basis = 1.0;
            for (axis, &ri) in r.iter().enumerate() {
                basis *= tables[axis][ri];
            }
            acc += self.coeffs[flat] * basis;
            flat += 1;
        });
        Ok(acc)
    }
}

/// Fits cosine-series coefficients of `g` (even in each coordinate) by
/// per-axis discrete cosine quadrature at 4t Chebyshev nodes
/// theta_j = pi (j + 1/2) / (4t). Exact to rounding when g is itself a
/// cosine polynomial of per-axis degree < t, spectrally accurate otherwise.
pub fn trig_fit(g: impl Fn(&[f64]) -> f64, p: usize, t: usize) -> Result<TrigPolynomial> {
    if t < 1 || p < 1 {
        return Err(Error::domain(format!("t={t}, p={p} must be >= 1")));
    }
    let n = 4 * t;
    let nodes: Vec<f64> = (0..n)
        .map(|j| std::f64::consts::PI * (j as f64 + 0.5) / n as f64)
        .collect();
    // quadrature matrix Q[r][j] = w_r cos(r theta_j), w_r = (2 - delta_{r0})/n
    let mut quad = vec![vec![0.0; n]; t];
    for (r, row) in quad.iter_mut().enumerate() {
        let w = if r == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 };
        for (j, &th) in nodes.iter().enumerate() {
            row[j] = w * (r as f64 * th).cos();
        }
    }

    // sample g on the node tensor, then contract axes one at a time
    let total = n.pow(p as u32);
    let mut tensor = Vec::with_capacity(total);
    let mut point = vec![0.0; p];
    for_each_multi_index(n - 1, p, |j| {
        for (axis, &ji) in j.iter().enumerate() {
            point[axis] = nodes[ji];
        }
        tensor.push(g(&point));
    });

    // Repeatedly contract the fastest axis (length n) and write the produced
    // coefficient axis as the slowest one; after p passes the layout is the
    // lexicographic multi-index order over r.
    let mut width = total;
    for _ in 0..p {
        let blocks = width / n;
        let mut next = vec![0.0; blocks * t];
        for bl in 0..blocks {
            let chunk = &tensor[bl * n..(bl + 1) * n];
            for (r, row) in quad.iter().enumerate() {
                next[r * blocks + bl] = chunk.iter().zip(row).map(|(x, q)| x * q).sum();
            }
        }
        tensor = next;
        width = blocks * t;
    }
    TrigPolynomial::new(t, p, tensor)
}
