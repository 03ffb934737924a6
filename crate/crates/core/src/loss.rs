//! Loss specifications mapping ([0,1]^p x record) into [0, 1].
//!
//! Built-in losses take records with features in [-1, 1]^p and labels in
//! [-1, 1] (labels in {-1, 1} for the logistic loss) and are affinely
//! rescaled so that their values stay inside [0, 1] over the whole domain:
//!
//! * squared:   ((<theta, x> - y) / (p + 1))^2 — convex, (inf, T)-smooth
//!   with T <= 2/(p+1) up to order 2 and decreasing beyond.
//! * logistic:  ln(1 + exp(-y <theta, x>)) / (p + 1) — convex, derivatives
//!   of every order bounded by 1 after rescaling.
//! * sigmoid:   1 / (1 + exp(-4 (<theta, x> - y))) — smooth but non-convex;
//!   order-h derivatives grow like 4^h, so T = 2 is documented for h <= 2.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One player's record: a feature vector and a scalar label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    pub features: Vec<f64>,
    pub label: f64,
}

impl DataRecord {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        DataRecord { features, label }
    }
}

/// Built-in loss families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinLoss {
    Squared,
    Logistic,
    SigmoidNonconvex,
}

impl BuiltinLoss {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "squared" => Ok(BuiltinLoss::Squared),
            "logistic" => Ok(BuiltinLoss::Logistic),
            "sigmoid-nonconvex" | "sigmoid" => Ok(BuiltinLoss::SigmoidNonconvex),
            other => Err(Error::domain(format!("unknown loss '{other}'"))),
        }
    }
}

type LossFn = Arc<dyn Fn(&[f64], &DataRecord) -> f64 + Send + Sync>;

enum LossKind {
    Builtin(BuiltinLoss),
    Custom(LossFn),
}

impl Clone for LossKind {
    fn clone(&self) -> Self {
        match self {
            LossKind::Builtin(b) => LossKind::Builtin(*b),
            LossKind::Custom(f) => LossKind::Custom(Arc::clone(f)),
        }
    }
}

/// A loss with its smoothness metadata. `h_max = None` means smooth to every
/// order with the documented bound holding up to the orders the surrogate
/// machinery uses.
#[derive(Clone)]
pub struct LossSpec {
    kind: LossKind,
    pub p: usize,
    pub smoothness_t: f64,
    pub h_max: Option<usize>,
    pub convex: bool,
    pub lipschitz: Option<f64>,
    name: String,
}

impl fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossSpec")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("convex", &self.convex)
            .finish()
    }
}

fn margin(theta: &[f64], record: &DataRecord) -> f64 {
    theta
        .iter()
        .zip(&record.features)
        .map(|(t, x)| t * x)
        .sum()
}

impl LossSpec {
    pub fn builtin(which: BuiltinLoss, p: usize) -> Self {
        match which {
            BuiltinLoss::Squared => LossSpec {
                kind: LossKind::Builtin(which),
                p,
                smoothness_t: 1.0,
                h_max: None,
                convex: true,
                lipschitz: Some(2.0 / (p as f64 + 1.0)),
                name: "squared".into(),
            },
            BuiltinLoss::Logistic => LossSpec {
                kind: LossKind::Builtin(which),
                p,
                smoothness_t: 1.0,
                h_max: None,
                convex: true,
                lipschitz: Some(1.0 / (p as f64 + 1.0)),
                name: "logistic".into(),
            },
            BuiltinLoss::SigmoidNonconvex => LossSpec {
                kind: LossKind::Builtin(which),
                p,
                smoothness_t: 2.0,
                h_max: None,
                convex: false,
                lipschitz: Some(1.0),
                name: "sigmoid-nonconvex".into(),
            },
        }
    }

    pub fn squared(p: usize) -> Self {
        Self::builtin(BuiltinLoss::Squared, p)
    }

    pub fn logistic(p: usize) -> Self {
        Self::builtin(BuiltinLoss::Logistic, p)
    }

    pub fn sigmoid_nonconvex(p: usize) -> Self {
        Self::builtin(BuiltinLoss::SigmoidNonconvex, p)
    }

    pub fn custom(
        name: impl Into<String>,
        p: usize,
        smoothness_t: f64,
        h_max: Option<usize>,
        convex: bool,
        f: impl Fn(&[f64], &DataRecord) -> f64 + Send + Sync + 'static,
    ) -> Self {
        LossSpec {
            kind: LossKind::Custom(Arc::new(f)),
            p,
            smoothness_t,
            h_max,
            convex,
            lipschitz: None,
            name: name.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn builtin_kind(&self) -> Option<BuiltinLoss> {
        match &self.kind {
            LossKind::Builtin(b) => Some(*b),
            LossKind::Custom(_) => None,
        }
    }

    pub fn evaluate(&self, theta: &[f64], record: &DataRecord) -> f64 {
        match &self.kind {
            LossKind::Builtin(BuiltinLoss::Squared) => {
                let r = (margin(theta, record) - record.label) / (self.p as f64 + 1.0);
                r * r
            }
            LossKind::Builtin(BuiltinLoss::Logistic) => {
                let u = -record.label * margin(theta, record);
                // ln(1 + e^u) without overflow for large |u|
                let soft = if u > 30.0 { u } else { u.exp().ln_1p() };
                soft / (self.p as f64 + 1.0)
            }
            LossKind::Builtin(BuiltinLoss::SigmoidNonconvex) => {
                let t = 4.0 * (margin(theta, record) - record.label);
                1.0 / (1.0 + (-t).exp())
            }
            LossKind::Custom(f) => f(theta, record),
        }
    }

    /// Per-record gradient in theta: analytic for the builtins, central
    /// finite differences for custom losses.
    pub fn gradient(&self, theta: &[f64], record: &DataRecord) -> Vec<f64> {
        match &self.kind {
            LossKind::Builtin(BuiltinLoss::Squared) => {
                let scale = (self.p as f64 + 1.0).powi(2);
                let r = margin(theta, record) - record.label;
                record.features.iter().map(|x| 2.0 * r * x / scale).collect()
            }
            LossKind::Builtin(BuiltinLoss::Logistic) => {
                let u = -record.label * margin(theta, record);
                let sig = 1.0 / (1.0 + (-u).exp());
                record
                    .features
                    .iter()
                    .map(|x| -record.label * x * sig / (self.p as f64 + 1.0))
                    .collect()
            }
            LossKind::Builtin(BuiltinLoss::SigmoidNonconvex) => {
                let t = 4.0 * (margin(theta, record) - record.label);
                let s = 1.0 / (1.0 + (-t).exp());
                record
                    .features
                    .iter()
                    .map(|x| 4.0 * s * (1.0 - s) * x)
                    .collect()
            }
            LossKind::Custom(_) => {
                let step = 1e-6;
                (0..self.p)
                    .map(|axis| {
                        let mut hi = theta.to_vec();
                        let mut lo = theta.to_vec();
                        hi[axis] += step;
                        lo[axis] -= step;
                        (self.evaluate(&hi, record) - self.evaluate(&lo, record))
                            / (2.0 * step)
                    })
                    .collect()
            }
        }
    }

    /// Checks the [0, 1] range contract on sampled (theta, record) pairs.
    pub fn validate_range(&self, thetas: &[Vec<f64>], records: &[DataRecord]) -> Result<()> {
        for theta in thetas {
            for (i, record) in records.iter().enumerate() {
                let v = self.evaluate(theta, record);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::LossContract { player: i, value: v });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_inputs(p: usize, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<DataRecord>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let thetas = (0..n)
            .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
            .collect();
        let records = (0..n)
            .map(|_| {
                let feats = (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
                DataRecord::new(feats, label)
            })
            .collect();
        (thetas, records)
    }

    #[test]
    fn builtins_respect_unit_range() {
        for p in [1usize, 2, 3] {
            let (thetas, records) = random_inputs(p, 200, p as u64);
            for loss in [
                LossSpec::squared(p),
                LossSpec::logistic(p),
                LossSpec::sigmoid_nonconvex(p),
            ] {
                loss.validate_range(&thetas, &records).unwrap();
            }
        }
    }

    #[test]
    fn squared_loss_value() {
        let loss = LossSpec::squared(1);
        let rec = DataRecord::new(vec![1.0], 0.0);
        // ((0.5 - 0)/2)^2 = 0.0625
        assert!((loss.evaluate(&[0.5], &rec) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn logistic_handles_extremes() {
        let loss = LossSpec::logistic(1);
        let rec = DataRecord::new(vec![1.0], 1.0);
        let v = loss.evaluate(&[1.0], &rec);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn sigmoid_is_nonconvex_along_a_segment() {
        // convexity would force f(mid) <= (f(a) + f(b))/2; exhibit a violation
        let loss = LossSpec::sigmoid_nonconvex(1);
        let record = DataRecord::new(vec![1.0], 0.0);
        let f = |t: f64| loss.evaluate(&[t], &record);
        // sigma is concave for positive arguments, so the chord lies below
        let (a, b) = (0.2, 1.0);
        let mid = 0.5 * (a + b);
        assert!(f(mid) > 0.5 * (f(a) + f(b)), "sigmoid segment looks convex");
    }

    #[test]
    fn custom_loss_contract_violation_names_player() {
        let loss = LossSpec::custom("bad", 1, 1.0, None, false, |_, _| 2.0);
        let err = loss
            .validate_range(&[vec![0.5]], &[DataRecord::new(vec![0.0], 0.0)])
            .unwrap_err();
        match err {
            Error::LossContract { player, value } => {
                assert_eq!(player, 0);
                assert_eq!(value, 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
