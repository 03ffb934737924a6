//! Minkowski-gauge recovery: given the projected solution w_bar, find
//! w minimizing ||w||_C subject to Phi w = w_bar.
//!
//! For the origin-centered l1 ball this is basis pursuit
//! (min ||w||_1 s.t. Phi w = w_bar); for the simplex it is
//! min 1'w s.t. Phi w = w_bar, w >= 0. Both run the same ADMM splitting
//! with duality-gap stopping, and the returned point is re-projected onto
//! the affine constraint so Phi w = w_bar holds to machine precision.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::projection::ProjectionMatrix;
use crate::constraint::ConstraintSet;
use crate::error::{Error, Result};

const DUALITY_GAP_TOL: f64 = 1e-8;
const MAX_ADMM_ITERS: usize = 20_000;

struct AffineProjector<'a> {
    phi: &'a ProjectionMatrix,
    chol: Cholesky<f64, nalgebra::Dyn>,
    target: Vec<f64>,
}

impl<'a> AffineProjector<'a> {
    fn new(phi: &'a ProjectionMatrix, target: &[f64]) -> Result<Self> {
        let m = phi.m();
        let mut gram = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                gram[(i, j)] = phi
                    .row(i)
                    .iter()
                    .zip(phi.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
        let chol = Cholesky::new(gram).ok_or_else(|| {
            Error::Infeasible("Phi Phi^T is singular; the affine system is degenerate".into())
        })?;
        Ok(AffineProjector { phi, chol, target: target.to_vec() })
    }

    /// Solve (Phi Phi^T) x = r.
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        let x = self.chol.solve(&DVector::from_column_slice(r));
        x.iter().copied().collect()
    }

    /// Euclidean projection of v onto {w : Phi w = target}.
    fn project(&self, v: &[f64]) -> Vec<f64> {
        let img = self.phi.apply(v);
        let residual: Vec<f64> = self.target.iter().zip(&img).map(|(t, i)| t - i).collect();
        let corr = self.solve(&residual);
        let lift = self.phi.apply_transpose(&corr);
        v.iter().zip(&lift).map(|(a, b)| a + b).collect()
    }
}

fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

// The gauge scale (ball radius / simplex mass) only multiplies the
// objective, so the minimizer is scale-free and the solver works with the
// unit gauges.
enum Gauge {
    L1,
    SimplexCone,
}

/// min ||w||_C s.t. Phi w = w_bar for the l1 ball and the simplex. The first
///-order solver stops when the constructed dual certificate closes the gap
/// to 1e-8.
pub fn recover_minkowski(
    w_bar: &[f64],
    phi: &ProjectionMatrix,
    set: &ConstraintSet,
) -> Result<Vec<f64>> {
    if w_bar.len() != phi.m() {
        return Err(Error::domain(format!(
            "w_bar has length {}, Phi has m = {}",
            w_bar.len(),
            phi.m()
        )));
    }
    let gauge = match set {
        ConstraintSet::L1Ball { center, .. } => {
            if center.iter().any(|&c| c != 0.0) {
                return Err(Error::domain(
                    "gauge recovery requires an origin-centered l1 ball",
                ));
            }
            Gauge::L1
        }
        ConstraintSet::Simplex { .. } => Gauge::SimplexCone,
        other => {
            use crate::constraint::Region;
            return Err(Error::domain(format!(
                "recovery implemented for l1-ball and simplex, not {}",
                other.describe()
            )));
        }
    };

    // zero target has the zero solution for both gauges
    if w_bar.iter().all(|&x| x == 0.0) {
        return Ok(vec![0.0; phi.p()]);
    }

    let projector = AffineProjector::new(phi, w_bar)?;
    let p = phi.p();
    let rho = 1.0;
    let mut z = vec![0.0; p];
    let mut u = vec![0.0; p];

    for _ in 0..MAX_ADMM_ITERS {
        // w-update: affine projection of z - u
        let zu: Vec<f64> = z.iter().zip(&u).map(|(zi, ui)| zi - ui).collect();
        let w = projector.project(&zu);
        // z-update: prox of the gauge
        let wu: Vec<f64> = w.iter().zip(&u).map(|(wi, ui)| wi + ui).collect();
        z = match gauge {
            Gauge::L1 => wu.iter().map(|&x| soft_threshold(x, 1.0 / rho)).collect(),
            Gauge::SimplexCone => wu.iter().map(|&x| (x - 1.0 / rho).max(0.0)).collect(),
        };
        for ((ui, wi), zi) in u.iter_mut().zip(&w).zip(&z) {
            *ui += wi - zi;
        }

        // dual certificate from the scaled dual variable: nu = rho * lambda
        // where lambda comes from the affine projection multiplier
        let img = phi.apply(&zu);
        let resid: Vec<f64> = w_bar.iter().zip(&img).map(|(t, i)| t - i).collect();
        let nu: Vec<f64> = projector.solve(&resid).iter().map(|x| x * rho).collect();
        let phit_nu = phi.apply_transpose(&nu);
        let primal: f64 = match gauge {
            Gauge::L1 => w.iter().map(|x| x.abs()).sum(),
            Gauge::SimplexCone => w.iter().sum(),
        };
        let dual = match gauge {
            Gauge::L1 => {
                let inf: f64 = phit_nu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let scale = if inf > 1.0 { 1.0 / inf } else { 1.0 };
                w_bar.iter().zip(&nu).map(|(b, n)| b * n).sum::<f64>() * scale
            }
            Gauge::SimplexCone => {
                let maxc: f64 = phit_nu.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
                let scale = if maxc > 1.0 { 1.0 / maxc } else { 1.0 };
                w_bar.iter().zip(&nu).map(|(b, n)| b * n).sum::<f64>() * scale
            }
        };
        let consensus: f64 = w
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if (primal - dual).abs() <= DUALITY_GAP_TOL && consensus <= 1e-10 {
            break;
        }
    }

    // exact affine feasibility for the returned point
    let mut out = projector.project(&z);
    // nonnegativity can be violated by a rounding hair after re-projection
    if matches!(gauge, Gauge::SimplexCone) {
        for x in &mut out {
            if *x < 0.0 && *x > -1e-9 {
                *x = 0.0;
            }
        }
        out = projector.project(&out);
    }
    Ok(out)
}

/// Gauge value ||w||_C for the recovery sets.
pub fn gauge_value(w: &[f64], set: &ConstraintSet) -> Result<f64> {
    match set {
        ConstraintSet::L1Ball { center, radius } => {
            if center.iter().any(|&c| c != 0.0) {
                return Err(Error::domain("gauge requires origin-centered ball"));
            }
            Ok(w.iter().map(|x| x.abs()).sum::<f64>() / radius)
        }
        ConstraintSet::Simplex { scale, .. } => {
            if w.iter().any(|&x| x < -1e-9) {
                return Ok(f64::INFINITY);
            }
            Ok(w.iter().sum::<f64>() / scale)
        }
        _ => Err(Error::domain("gauge implemented for l1-ball and simplex")),
    }
}
