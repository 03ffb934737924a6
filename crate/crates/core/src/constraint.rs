//! Constraint sets with projection operators, membership predicates, and
//! support functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything the minimizer can project onto. Implemented by [`ConstraintSet`]
/// and by the high-dimensional module's projected-polytope oracle.
pub trait Region: Send + Sync {
    fn dim(&self) -> usize;
    fn project(&self, point: &[f64]) -> Vec<f64>;
    fn contains(&self, point: &[f64], tol: f64) -> bool;
    fn describe(&self) -> String;
}

/// The constraint families the paper's setting uses, all kept inside
/// [0, 1]^p so the Bernstein grid covers them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ConstraintSet {
    /// The full unit box [0, 1]^p.
    Box { p: usize },
    /// {theta : ||theta - center||_2 <= radius}
    L2Ball { center: Vec<f64>, radius: f64 },
    /// {theta : ||theta - center||_1 <= radius}
    L1Ball { center: Vec<f64>, radius: f64 },
    /// {theta >= 0, sum theta = scale}
    Simplex { p: usize, scale: f64 },
}

/// Projection of `v` onto the simplex {w >= 0, sum w = s} by the sort-based
/// algorithm.
pub fn project_simplex(v: &[f64], s: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut rho = 0usize;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let candidate = (cum - s) / (i + 1) as f64;
        if ui - candidate > 0.0 {
            rho = i;
            theta = candidate;
        }
    }
    let _ = rho;
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projection of `v` onto the l1 ball of `radius` around the origin.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= radius {
        return v.to_vec();
    }
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let w = project_simplex(&abs, radius);
    v.iter()
        .zip(&w)
        .map(|(x, wi)| wi * x.signum())
        .collect()
}

impl ConstraintSet {
    /// Unit-box constraint in dimension p.
    pub fn unit_box(p: usize) -> Self {
        ConstraintSet::Box { p }
    }

    /// Ball centered at (1/2, ..., 1/2); radius <= 1/2 keeps it inside the
    /// unit box.
    pub fn centered_l2_ball(p: usize, radius: f64) -> Self {
        ConstraintSet::L2Ball { center: vec![0.5; p], radius }
    }

    pub fn centered_l1_ball(p: usize, radius: f64) -> Self {
        ConstraintSet::L1Ball { center: vec![0.5; p], radius }
    }

    pub fn probability_simplex(p: usize) -> Self {
        ConstraintSet::Simplex { p, scale: 1.0 }
    }

    pub fn parse(kind: &str, p: usize) -> Result<Self> {
        match kind {
            "box" => Ok(Self::unit_box(p)),
            "l2-ball" => Ok(Self::centered_l2_ball(p, 0.5)),
            "l1-ball" => Ok(Self::centered_l1_ball(p, 0.5)),
            "simplex" => Ok(Self::probability_simplex(p)),
            other => Err(Error::domain(format!("unknown constraint kind '{other}'"))),
        }
    }

    /// Euclidean diameter; the paper regime asks for <= 1.
    pub fn diameter(&self) -> f64 {
        match self {
            ConstraintSet::Box { p } => (*p as f64).sqrt(),
            ConstraintSet::L2Ball { radius, .. } => 2.0 * radius,
            ConstraintSet::L1Ball { radius, .. } => 2.0 * radius,
            ConstraintSet::Simplex { scale, .. } => std::f64::consts::SQRT_2 * scale,
        }
    }

    /// Exact containment of the whole set in [0, 1]^p, which grid-based ERM
    /// requires.
    pub fn contained_in_unit_cube(&self) -> bool {
        match self {
            ConstraintSet::Box { .. } => true,
            ConstraintSet::L2Ball { center, radius }
            | ConstraintSet::L1Ball { center, radius } => center
                .iter()
                .all(|&c| c - radius >= -1e-12 && c + radius <= 1.0 + 1e-12),
            ConstraintSet::Simplex { scale, .. } => *scale <= 1.0 + 1e-12,
        }
    }

    /// Support function sup_{a in C} <a, g>, closed-form per family; used by
    /// the Gaussian-width estimator.
    pub fn support(&self, g: &[f64]) -> f64 {
        match self {
            ConstraintSet::Box { .. } => g.iter().map(|&x| x.max(0.0)).sum(),
            ConstraintSet::L2Ball { center, radius } => {
                let dot: f64 = center.iter().zip(g).map(|(c, x)| c * x).sum();
                let norm: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                dot + radius * norm
            }
            ConstraintSet::L1Ball { center, radius } => {
                let dot: f64 = center.iter().zip(g).map(|(c, x)| c * x).sum();
                let max: f64 = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                dot + radius * max
            }
            ConstraintSet::Simplex { scale, .. } => {
                scale * g.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
            }
        }
    }
}

impl Region for ConstraintSet {
    fn dim(&self) -> usize {
        match self {
            ConstraintSet::Box { p } | ConstraintSet::Simplex { p, .. } => *p,
            ConstraintSet::L2Ball { center, .. } | ConstraintSet::L1Ball { center, .. } => {
                center.len()
            }
        }
    }

    fn project(&self, point: &[f64]) -> Vec<f64> {
        match self {
            ConstraintSet::Box { .. } => point.iter().map(|&x| x.clamp(0.0, 1.0)).collect(),
            ConstraintSet::L2Ball { center, radius } => {
                let diff: Vec<f64> = point.iter().zip(center).map(|(x, c)| x - c).collect();
                let norm: f64 = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
                if norm <= *radius {
                    point.to_vec()
                } else {
                    let s = radius / norm;
                    center.iter().zip(&diff).map(|(c, d)| c + s * d).collect()
                }
            }
            ConstraintSet::L1Ball { center, radius } => {
                let diff: Vec<f64> = point.iter().zip(center).map(|(x, c)| x - c).collect();
                let proj = project_l1_ball(&diff, *radius);
                center.iter().zip(&proj).map(|(c, d)| c + d).collect()
            }
            ConstraintSet::Simplex { scale, .. } => project_simplex(point, *scale),
        }
    }

    fn contains(&self, point: &[f64], tol: f64) -> bool {
        match self {
            ConstraintSet::Box { .. } => point.iter().all(|&x| (-tol..=1.0 + tol).contains(&x)),
            ConstraintSet::L2Ball { center, radius } => {
                let d2: f64 = point
                    .iter()
                    .zip(center)
                    .map(|(x, c)| (x - c) * (x - c))
                    .sum();
                d2.sqrt() <= radius + tol
            }
            ConstraintSet::L1Ball { center, radius } => {
                let d1: f64 = point.iter().zip(center).map(|(x, c)| (x - c).abs()).sum();
                d1 <= radius + tol
            }
            ConstraintSet::Simplex { scale, .. } => {
                point.iter().all(|&x| x >= -tol)
                    && (point.iter().sum::<f64>() - scale).abs() <= tol
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            ConstraintSet::Box { p } => format!("box[0,1]^{p}"),
            ConstraintSet::L2Ball { radius, .. } => format!("l2-ball(r={radius})"),
            ConstraintSet::L1Ball { radius, .. } => format!("l1-ball(r={radius})"),
            ConstraintSet::Simplex { scale, .. } => format!("simplex(s={scale})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_sets(p: usize) -> Vec<ConstraintSet> {
        vec![
            ConstraintSet::unit_box(p),
            ConstraintSet::centered_l2_ball(p, 0.4),
            ConstraintSet::centered_l1_ball(p, 0.4),
            ConstraintSet::probability_simplex(p),
        ]
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_feasible(
            point in proptest::collection::vec(-2.0f64..3.0, 3)
        ) {
            for set in all_sets(3) {
                let proj = set.project(&point);
                prop_assert!(set.contains(&proj, 1e-9), "{}", set.describe());
                let twice = set.project(&proj);
                for (a, b) in proj.iter().zip(&twice) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn projection_is_closest_on_box(point in proptest::collection::vec(-2.0f64..3.0, 2)) {
            let set = ConstraintSet::unit_box(2);
            let proj = set.project(&point);
            for (x, p) in point.iter().zip(&proj) {
                prop_assert_eq!(*p, x.clamp(0.0, 1.0));
            }
        }
    }

    #[test]
    fn simplex_projection_known_case() {
        let w = project_simplex(&[0.8, 0.8], 1.0);
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
        let w = project_simplex(&[2.0, 0.0], 1.0);
        assert!((w[0] - 1.0).abs() < 1e-12 && w[1].abs() < 1e-12);
    }

    #[test]
    fn l1_projection_soft_thresholds() {
        let w = project_l1_ball(&[0.9, -0.3], 1.0);
        let norm: f64 = w.iter().map(|x| x.abs()).sum();
        assert!(norm <= 1.0 + 1e-12);
        // interior point untouched
        let v = project_l1_ball(&[0.2, -0.1], 1.0);
        assert_eq!(v, vec![0.2, -0.1]);
    }

    #[test]
    fn centered_sets_stay_in_unit_cube() {
        for set in all_sets(4) {
            assert!(set.contained_in_unit_cube(), "{}", set.describe());
        }
        assert!(!ConstraintSet::centered_l2_ball(2, 0.7).contained_in_unit_cube());
    }

    #[test]
    fn support_function_cross_checks() {
        let g = vec![1.0, -2.0];
        assert_eq!(ConstraintSet::unit_box(2).support(&g), 1.0);
        let simplex = ConstraintSet::probability_simplex(2);
        assert_eq!(simplex.support(&g), 1.0);
        let l1 = ConstraintSet::L1Ball { center: vec![0.0, 0.0], radius: 1.0 };
        assert_eq!(l1.support(&g), 2.0);
        let l2 = ConstraintSet::L2Ball { center: vec![0.0, 0.0], radius: 1.0 };
        assert!((l2.support(&g) - 5.0f64.sqrt()).abs() < 1e-12);
    }
}
