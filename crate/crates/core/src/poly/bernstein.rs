//! Bernstein basis polynomials and the iterated Bernstein operator.
//!
//! The order-h iterated operator is `I - (I - B_k)^h`; it lifts the plain
//! Bernstein rate k^{-1} to k^{-h} on (2h,T)-smooth functions. A surrogate
//! stores the grid values it was fit from together with the grid tensor
//! pre-transformed by the operator along every axis, so a point evaluation is
//! a plain tensor contraction against per-axis basis rows.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::{SurrogateConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::util::{choose, dot, kahan_sum, ln_choose};

/// Bernstein basis polynomial b_{v,k}(x) = C(k,v) x^v (1-x)^{k-v}.
///
/// Computed through log-gamma so k up to 10^4 stays finite.
pub fn bernstein_basis(v: usize, k: usize, x: f64) -> Result<f64> {
    if k < 1 || v > k {
        return Err(Error::domain(format!(
            "basis index v={v} outside 0..={k}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x={x} outside [0, 1]")));
    }
    Ok(basis_value(v, k, x))
}

fn basis_value(v: usize, k: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if v == 0 { 1.0 } else { 0.0 };
    }
    if x == 1.0 {
        return if v == k { 1.0 } else { 0.0 };
    }
    let ln = ln_choose(k, v) + (v as f64) * x.ln() + ((k - v) as f64) * (1.0 - x).ln();
    ln.exp()
}

/// All k+1 basis values at x.
fn basis_row(k: usize, x: f64) -> Vec<f64> {
    (0..=k).map(|v| basis_value(v, k, x)).collect()
}

/// Derivatives b'_{v,k}(x) via the degree-lowering identity
/// b'_{v,k} = k (b_{v-1,k-1} - b_{v,k-1}).
fn basis_derivative_row(k: usize, x: f64) -> Vec<f64> {
    let lower = basis_row(k - 1, x);
    (0..=k)
        .map(|v| {
            let left = if v == 0 { 0.0 } else { lower[v - 1] };
            let right = if v == k { 0.0 } else { lower[v] };
            k as f64 * (left - right)
        })
        .collect()
}

/// (k+1)x(k+1) matrix M with M[u][v] = b_{v,k}(u/k); M f samples B_k(f) on
/// the grid. Row-major.
fn operator_matrix(k: usize) -> Vec<f64> {
    let m = k + 1;
    let mut out = vec![0.0; m * m];
    for u in 0..m {
        let row = basis_row(k, u as f64 / k as f64);
        out[u * m..(u + 1) * m].copy_from_slice(&row);
    }
    out
}

fn mat_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for l in 0..m {
            let ail = a[i * m + l];
            if ail == 0.0 {
                continue;
            }
            let brow = &b[l * m..(l + 1) * m];
            let orow = &mut out[i * m..(i + 1) * m];
            for j in 0..m {
                orow[j] += ail * brow[j];
            }
        }
    }
    out
}

/// Per-axis operator A = sum_{i=1}^{h} C(h,i) (-1)^{i-1} M^{i-1}, memoized
/// per (k, h). Applying A to grid values and then contracting with plain
/// basis rows reproduces the iterated-basis weights b^{(h)}_{v,k} exactly,
/// by linearity of the operator.
fn iterated_operator(k: usize, h: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&(k, h)) {
        return Arc::clone(hit);
    }

    let m = k + 1;
    let mut acc = vec![0.0; m * m];
    // power = M^{i-1}, starting from the identity
    let mut power = vec![0.0; m * m];
    for i in 0..m {
        power[i * m + i] = 1.0;
    }
    let matrix = if h > 1 { operator_matrix(k) } else { Vec::new() };
    for i in 1..=h {
        let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
        let coeff = sign * choose(h, i);
        for (a, p) in acc.iter_mut().zip(&power) {
            *a += coeff * p;
        }
        if i < h {
            power = mat_mul(&matrix, &power, m);
        }
    }

    let arc = Arc::new(acc);
    cache
        .lock()
        .unwrap()
        .insert((k, h), Arc::clone(&arc));
    arc
}

/// Applies the square matrix `a` along `axis` of a (k+1)^p tensor stored in
/// lexicographic order (last axis fastest).
fn apply_along_axis(tensor: &[f64], k: usize, p: usize, axis: usize, a: &[f64]) -> Vec<f64> {
    let m = k + 1;
    let inner: usize = m.pow((p - 1 - axis) as u32);
    let outer: usize = tensor.len() / (m * inner);
    let mut out = vec![0.0; tensor.len()];
    for o in 0..outer {
        let base = o * m * inner;
        for u in 0..m {
            let arow = &a[u * m..(u + 1) * m];
            for inn in 0..inner {
                let mut s = 0.0;
                for (v, &w) in arow.iter().enumerate() {
                    s += w * tensor[base + v * inner + inn];
                }
                out[base + u * inner + inn] = s;
            }
        }
    }
    out
}

/// A multivariate iterated Bernstein polynomial fit to values on the grid
/// {0, 1/k, ..., 1}^p.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SurrogateJson", into = "SurrogateJson")]
pub struct BernsteinSurrogate {
    config: SurrogateConfig,
    grid_values: Vec<f64>,
    transformed: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SurrogateJson {
    schema_version: u32,
    config: SurrogateConfig,
    values: Vec<f64>,
}

impl From<BernsteinSurrogate> for SurrogateJson {
    fn from(s: BernsteinSurrogate) -> Self {
        SurrogateJson {
            schema_version: SCHEMA_VERSION,
            config: s.config,
            values: s.grid_values,
        }
    }
}

impl TryFrom<SurrogateJson> for BernsteinSurrogate {
    type Error = Error;
    fn try_from(j: SurrogateJson) -> Result<Self> {
        if j.schema_version != SCHEMA_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported surrogate schema version {}",
                j.schema_version
            )));
        }
        iterated_bernstein_fit(j.values, j.config)
    }
}

/// Fits the order-h iterated Bernstein surrogate to `grid_values`, which must
/// hold one value per grid multi-index in lexicographic order.
pub fn iterated_bernstein_fit(
    grid_values: Vec<f64>,
    config: SurrogateConfig,
) -> Result<BernsteinSurrogate> {
    let expected = config.grid_len();
    if grid_values.len() != expected {
        return Err(Error::domain(format!(
            "grid has {} values, config (k={}, p={}) requires {expected}",
            grid_values.len(),
            config.k,
            config.p
        )));
    }
    let mut transformed = grid_values.clone();
    if config.h > 1 {
        let a = iterated_operator(config.k, config.h);
        for axis in 0..config.p {
            transformed = apply_along_axis(&transformed, config.k, config.p, axis, &a);
        }
    }
    Ok(BernsteinSurrogate {
        config,
        grid_values,
        transformed,
    })
}

impl BernsteinSurrogate {
    pub fn config(&self) -> &SurrogateConfig {
        &self.config
    }

    pub fn grid_values(&self) -> &[f64] {
        &self.grid_values
    }

    fn check_point(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.config.p {
            return Err(Error::domain(format!(
                "point has dimension {}, surrogate has p={}",
                theta.len(),
                self.config.p
            )));
        }
        for &t in theta {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::domain(format!(
                    "coordinate {t} outside the unit cube"
                )));
            }
        }
        Ok(())
    }

    /// Contracts the pre-transformed tensor against one weight row per axis.
    fn contract(&self, rows: &[Vec<f64>]) -> f64 {
        let m = self.config.k + 1;
        let mut current = self.transformed.clone();
        // contract the last (fastest-varying) axis first
        for row in rows.iter().rev() {
            let blocks = current.len() / m;
            let compensated = current.len() > 100_000;
            let mut next = Vec::with_capacity(blocks);
            for b in 0..blocks {
                let chunk = &current[b * m..(b + 1) * m];
                let s = if compensated {
                    kahan_sum(chunk.iter().zip(row).map(|(c, w)| c * w))
                } else {
                    dot(chunk, row)
                };
                next.push(s);
            }
            current = next;
        }
        current[0]
    }

    /// Evaluates the surrogate at a point of the unit cube.
    pub fn eval(&self, theta: &[f64]) -> Result<f64> {
        self.check_point(theta)?;
        let rows: Vec<Vec<f64>> = theta.iter().map(|&t| basis_row(self.config.k, t)).collect();
        Ok(self.contract(&rows))
    }

    /// Exact analytic gradient, matching central finite differences.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_point(theta)?;
        let k = self.config.k;
        let rows: Vec<Vec<f64>> = theta.iter().map(|&t| basis_row(k, t)).collect();
        let deriv: Vec<Vec<f64>> = theta
            .iter()
            .map(|&t| basis_derivative_row(k, t))
            .collect();
        let mut grad = Vec::with_capacity(self.config.p);
        for axis in 0..self.config.p {
            let axis_rows: Vec<Vec<f64>> = (0..self.config.p)
                .map(|j| {
                    if j == axis {
                        deriv[j].clone()
                    } else {
                        rows[j].clone()
                    }
                })
                .collect();
            grad.push(self.contract(&axis_rows));
        }
        Ok(grad)
    }

    /// Largest absolute difference against `f` on the dense per-axis grid
    /// with `resolution` points per axis (diagnostic; p <= 2 intended).
    pub fn sup_error_on_grid(&self, f: impl Fn(&[f64]) -> f64, resolution: usize) -> f64 {
        let p = self.config.p;
        let mut worst = 0.0f64;
        let mut point = vec![0.0; p];
        let total = resolution.pow(p as u32);
        for flat in 0..total {
            let mut rem = flat;
            for axis in (0..p).rev() {
                let i = rem % resolution;
                rem /= resolution;
                point[axis] = i as f64 / (resolution - 1) as f64;
            }
            let err = (self.eval(&point).unwrap() - f(&point)).abs();
            worst = worst.max(err);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn cfg(k: usize, h: usize, p: usize) -> SurrogateConfig {
        SurrogateConfig::new(k, h, p, 1.0).unwrap()
    }

    /// Brute-force B_k(f)(x) straight from the definition; the independent
    /// path used to check the matrix route.
    fn plain_bernstein(values: &[f64], k: usize, x: f64) -> f64 {
        (0..=k).map(|v| values[v] * basis_value(v, k, x)).sum()
    }

    #[test]
    fn basis_linear_case() {
        assert_eq!(bernstein_basis(0, 1, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn basis_frozen_value() {
        // C(3,2) * 0.5^2 * 0.5 = 0.375
        let b = bernstein_basis(2, 3, 0.5).unwrap();
        assert!((b - 0.375).abs() < 1e-15);
    }

    #[test]
    fn basis_rejects_bad_inputs() {
        assert!(bernstein_basis(4, 3, 0.5).is_err());
        assert!(bernstein_basis(0, 3, -0.1).is_err());
        assert!(bernstein_basis(0, 3, 1.1).is_err());
    }

    #[test]
    fn basis_large_degree_stays_finite() {
        let row = basis_row(10_000, 0.3);
        assert!(row.iter().all(|b| b.is_finite() && *b >= 0.0));
        let total = kahan_sum(row.iter().copied());
        assert!((total - 1.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn partition_of_unity(k in 1usize..64, x in 0.0f64..=1.0) {
            let total: f64 = basis_row(k, x).iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn linear_reproduction(k in 1usize..12, h in 1usize..4, x in 0.0f64..=1.0) {
            let values: Vec<f64> = (0..=k).map(|v| 0.25 + 0.5 * v as f64 / k as f64).collect();
            let s = iterated_bernstein_fit(values, cfg(k, h, 1)).unwrap();
            prop_assert!((s.eval(&[x]).unwrap() - (0.25 + 0.5 * x)).abs() < 1e-10);
        }
    }

    #[test]
    fn fit_rejects_length_mismatch() {
        assert!(iterated_bernstein_fit(vec![0.0; 5], cfg(2, 1, 2)).is_err());
    }

    #[test]
    fn reproduces_identity_function() {
        for k in [1, 3, 7] {
            let values: Vec<f64> = (0..=k).map(|v| v as f64 / k as f64).collect();
            let s = iterated_bernstein_fit(values, cfg(k, 1, 1)).unwrap();
            for x in [0.0, 0.25, 0.7, 1.0] {
                assert!((s.eval(&[x]).unwrap() - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_frozen_value() {
        // B_2(x^2) at 0.5 equals x^2 + x(1-x)/k = 0.25 + 0.125 = 0.375
        let values: Vec<f64> = (0..=2).map(|v| (v as f64 / 2.0).powi(2)).collect();
        let s = iterated_bernstein_fit(values, cfg(2, 1, 1)).unwrap();
        assert!((s.eval(&[0.5]).unwrap() - 0.375).abs() < 1e-14);
    }

    #[test]
    fn order_two_matches_composition_oracle() {
        // B^{(2)} = 2 B - B.B, checked pointwise against brute-force
        // composition on random grid data.
        let k = 6;
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..=k).map(|_| rng.random::<f64>()).collect();
        let s = iterated_bernstein_fit(values.clone(), cfg(k, 2, 1)).unwrap();

        let b_on_grid: Vec<f64> = (0..=k)
            .map(|u| plain_bernstein(&values, k, u as f64 / k as f64))
            .collect();
        for _ in 0..10 {
            let x: f64 = rng.random();
            let expected =
                2.0 * plain_bernstein(&values, k, x) - plain_bernstein(&b_on_grid, k, x);
            assert!((s.eval(&[x]).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_identity_binomial_expansion() {
        // I - (I-B)^h expanded binomially, iterated by brute force, against
        // the implemented weights (h = 3).
        let k = 5;
        let h = 3;
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..=k).map(|_| rng.random::<f64>()).collect();
        let s = iterated_bernstein_fit(values.clone(), cfg(k, h, 1)).unwrap();

        // grids[i] holds B^i f sampled on the grid
        let mut grids = vec![values.clone()];
        for i in 1..h {
            let prev = &grids[i - 1];
            let next: Vec<f64> = (0..=k)
                .map(|u| plain_bernstein(prev, k, u as f64 / k as f64))
                .collect();
            grids.push(next);
        }
        for trial in 0..10 {
            let x = trial as f64 / 9.0;
            let mut expected = 0.0;
            for i in 1..=h {
                let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                expected += sign * choose(h, i) * plain_bernstein(&grids[i - 1], k, x);
            }
            assert!((s.eval(&[x]).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_grid_evaluates_to_constant() {
        let s = iterated_bernstein_fit(vec![0.7; 16], cfg(3, 2, 2)).unwrap();
        for point in [[0.0, 0.0], [0.3, 0.9], [1.0, 0.5]] {
            assert!((s.eval(&point).unwrap() - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn bivariate_linear_reproduction() {
        let k = 4;
        let mut values = Vec::new();
        for v1 in 0..=k {
            for v2 in 0..=k {
                values.push(v1 as f64 / k as f64 + v2 as f64 / k as f64);
            }
        }
        let s = iterated_bernstein_fit(values, cfg(k, 1, 2)).unwrap();
        assert!((s.eval(&[0.3, 0.4]).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn eval_rejects_outside_cube() {
        let s = iterated_bernstein_fit(vec![0.0, 1.0], cfg(1, 1, 1)).unwrap();
        assert!(s.eval(&[1.2]).is_err());
        assert!(s.eval(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn gradient_of_linear_is_one() {
        let k = 5;
        let values: Vec<f64> = (0..=k).map(|v| v as f64 / k as f64).collect();
        let s = iterated_bernstein_fit(values, cfg(k, 1, 1)).unwrap();
        for x in [0.1, 0.5, 0.9] {
            assert!((s.gradient(&[x]).unwrap()[0] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let s = iterated_bernstein_fit(vec![0.4; 36], cfg(5, 2, 2)).unwrap();
        let g = s.gradient(&[0.3, 0.6]).unwrap();
        assert!(g.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let k = 5;
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let values: Vec<f64> = (0..36).map(|_| rng.random::<f64>()).collect();
        let s = iterated_bernstein_fit(values, cfg(k, 2, 2)).unwrap();
        let step = 1e-5;
        for point in [[0.31, 0.62], [0.5, 0.5], [0.12, 0.87]] {
            let g = s.gradient(&point).unwrap();
            for axis in 0..2 {
                let mut hi = point;
                let mut lo = point;
                hi[axis] += step;
                lo[axis] -= step;
                let fd = (s.eval(&hi).unwrap() - s.eval(&lo).unwrap()) / (2.0 * step);
                let rel = (g[axis] - fd).abs() / fd.abs().max(1.0);
                assert!(rel < 1e-6, "axis {axis}: analytic {} vs fd {fd}", g[axis]);
            }
        }
    }

    #[test]
    fn approximation_rate_slope() {
        // log-log slope of sup error vs k for a smooth target; h = 1 decays
        // like k^-1 and h = 2 like k^-2.
        let f = |x: &[f64]| (std::f64::consts::PI * x[0]).sin();
        for (h, want) in [(1usize, -0.7f64), (2usize, -1.7f64)] {
            let mut lk = Vec::new();
            let mut le = Vec::new();
            for k in [4usize, 8, 16, 32] {
                let values: Vec<f64> = (0..=k).map(|v| f(&[v as f64 / k as f64])).collect();
                let s = iterated_bernstein_fit(values, cfg(k, h, 1)).unwrap();
                lk.push((k as f64).ln());
                le.push(s.sup_error_on_grid(f, 501).ln());
            }
            let slope = crate::util::ls_slope(&lk, &le);
            assert!(slope <= want, "h={h}: slope {slope} > {want}");
        }
    }

    #[test]
    fn json_round_trip() {
        let values: Vec<f64> = (0..=4).map(|v| (v as f64 * 0.7).sin()).collect();
        let s = iterated_bernstein_fit(values, cfg(4, 2, 1)).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        assert!(js.contains("\"schema_version\":1"));
        let back: BernsteinSurrogate = serde_json::from_str(&js).unwrap();
        for x in [0.0, 0.33, 1.0] {
            assert_eq!(
                s.eval(&[x]).unwrap().to_bits(),
                back.eval(&[x]).unwrap().to_bits()
            );
        }
    }
}
