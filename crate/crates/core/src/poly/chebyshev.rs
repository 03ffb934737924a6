//! Univariate polynomials that vanish at 0 and stay γ-close to 1 on the
//! integers 1..k. Built from the Chebyshev extremal polynomial on an affine
//! image of [1, k]: p(x) = 1 - T_t(phi(x)) / T_t(phi(0)) with
//! phi(x) = (2x - k - 1)/(k - 1), taking the smallest degree t that passes
//! numerical verification at every integer in [1, k].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Degrees past this are refused; the target degree grows like
/// sqrt(k) log(1/gamma), so desk-scale inputs stay far below it.
pub const DEFAULT_MAX_DEGREE: usize = 256;

/// Monomial-coefficient form of the disjunction polynomial, lowest degree
/// first. `coeffs[0]` is exactly zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChebyshevDisjunctionPoly {
    pub k: usize,
    pub degree: usize,
    pub coeffs: Vec<f64>,
    /// Target bound requested at construction.
    pub gamma_target: f64,
    /// max |p(x) - 1| actually measured over integers 1..k.
    pub gamma_achieved: f64,
    /// Largest |c_i|; the paper bounds it only as 2^{O(sqrt(k) log(1/gamma))},
    /// so the achieved value is recorded instead.
    pub max_abs_coeff: f64,
}

impl ChebyshevDisjunctionPoly {
    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }
}

/// Multiplies a monomial-coefficient vector by (a x + b).
fn mul_affine(coeffs: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len() + 1];
    for (i, &c) in coeffs.iter().enumerate() {
        out[i] += b * c;
        out[i + 1] += a * c;
    }
    out
}

/// Monomial coefficients of T_t(phi(x)) for affine phi(x) = a x + b, plus the
/// scalar T_t(phi(0)) computed by the same recurrence.
fn chebyshev_of_affine(t: usize, a: f64, b: f64) -> (Vec<f64>, f64) {
    let mut prev = vec![1.0]; // T_0
    let mut prev_at0 = 1.0;
    if t == 0 {
        return (prev, prev_at0);
    }
    let mut cur = vec![b, a]; // T_1(phi(x)) = phi(x)
    let mut cur_at0 = b;
    for _ in 1..t {
        // T_{n+1} = 2 phi T_n - T_{n-1}
        let mut next = mul_affine(&cur, 2.0 * a, 2.0 * b);
        for (i, &c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        let next_at0 = 2.0 * b * cur_at0 - prev_at0;
        prev = cur;
        prev_at0 = cur_at0;
        cur = next;
        cur_at0 = next_at0;
    }
    (cur, cur_at0)
}

/// Builds the degree-minimal verified disjunction polynomial for parameters
/// (k, gamma), refusing degrees above `max_degree`.
pub fn chebyshev_disjunction_capped(
    k: usize,
    gamma: f64,
    max_degree: usize,
) -> Result<ChebyshevDisjunctionPoly> {
    if k < 1 {
        return Err(Error::domain("k must be at least 1"));
    }
    if !(0.0..1.0).contains(&gamma) || gamma <= 0.0 {
        return Err(Error::domain(format!("gamma={gamma} outside (0, 1)")));
    }
    if k == 1 {
        // p(x) = x hits 0 at 0 and 1 at 1 exactly.
        return Ok(ChebyshevDisjunctionPoly {
            k,
            degree: 1,
            coeffs: vec![0.0, 1.0],
            gamma_target: gamma,
            gamma_achieved: 0.0,
            max_abs_coeff: 1.0,
        });
    }

    let a = 2.0 / (k as f64 - 1.0);
    let b = -(k as f64 + 1.0) / (k as f64 - 1.0);
    let mut best_err = f64::INFINITY;
    for t in 1..=max_degree {
        let (t_coeffs, t_at0) = chebyshev_of_affine(t, a, b);
        // p = 1 - T_t(phi(x)) / T_t(phi(0)); the constant term cancels to
        // zero up to rounding, and is pinned there.
        let mut coeffs: Vec<f64> = t_coeffs.iter().map(|c| -c / t_at0).collect();
        coeffs[0] = 0.0;

        let mut poly = ChebyshevDisjunctionPoly {
            k,
            degree: t,
            coeffs,
            gamma_target: gamma,
            gamma_achieved: 0.0,
            max_abs_coeff: 0.0,
        };
        let worst = (1..=k)
            .map(|x| (poly.eval(x as f64) - 1.0).abs())
            .fold(0.0f64, f64::max);
        best_err = best_err.min(worst);
        if worst <= gamma {
            poly.gamma_achieved = worst;
            poly.max_abs_coeff = poly.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            return Ok(poly);
        }
    }
    Err(Error::Construction {
        msg: format!("no degree <= {max_degree} meets gamma={gamma} for k={k}"),
        achieved: best_err,
    })
}

/// `chebyshev_disjunction_capped` with the default degree cap.
pub fn chebyshev_disjunction(k: usize, gamma: f64) -> Result<ChebyshevDisjunctionPoly> {
    chebyshev_disjunction_capped(k, gamma, DEFAULT_MAX_DEGREE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishes_at_zero_exactly() {
        for (k, gamma) in [(2, 0.2), (4, 0.1), (9, 0.05), (16, 0.01)] {
            let p = chebyshev_disjunction(k, gamma).unwrap();
            assert_eq!(p.eval(0.0), 0.0);
            assert_eq!(p.coeffs[0], 0.0);
        }
    }

    #[test]
    fn k4_meets_bound_on_integers() {
        let p = chebyshev_disjunction(4, 0.1).unwrap();
        for x in 1..=4 {
            assert!((p.eval(x as f64) - 1.0).abs() <= 0.1, "x={x}");
        }
        assert!(p.gamma_achieved <= 0.1);
    }

    #[test]
    fn k1_is_the_identity() {
        let p = chebyshev_disjunction(1, 0.5).unwrap();
        assert_eq!(p.degree, 1);
        assert_eq!(p.coeffs, vec![0.0, 1.0]);
        assert_eq!(p.gamma_achieved, 0.0);
        assert_eq!(p.eval(1.0), 1.0);
    }

    #[test]
    fn degree_grows_mildly_with_k() {
        // sanity envelope for the O(sqrt(k) log(1/gamma)) degree; generous
        // constants on purpose, the achieved values are what is recorded
        let gamma = 0.1;
        for k in [4usize, 16, 64] {
            let p = chebyshev_disjunction(k, gamma).unwrap();
            let envelope = 2.0 + 2.0 * (k as f64).sqrt() * (1.0 + (1.0 / gamma).ln());
            assert!(
                (p.degree as f64) <= envelope,
                "k={k}: degree {} above envelope {envelope}",
                p.degree
            );
        }
    }

    #[test]
    fn tighter_gamma_needs_no_smaller_degree() {
        let loose = chebyshev_disjunction(16, 0.2).unwrap();
        let tight = chebyshev_disjunction(16, 0.01).unwrap();
        assert!(tight.degree >= loose.degree);
    }

    #[test]
    fn unreachable_gamma_reports_achieved_error() {
        let err = chebyshev_disjunction_capped(16, 1e-6, 2).unwrap_err();
        match err {
            Error::Construction { achieved, .. } => assert!(achieved > 1e-6),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(chebyshev_disjunction(0, 0.1).is_err());
        assert!(chebyshev_disjunction(4, 0.0).is_err());
        assert!(chebyshev_disjunction(4, 1.0).is_err());
    }
}
