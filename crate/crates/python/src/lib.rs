//! Python bindings: the main types and operations of the ldpoly crate.
//!
//! Build the cdylib and import it as `ldpoly`; see python/smoke_test.py at
//! the workspace root for a worked example.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use ldpoly_core::constraint::ConstraintSet;
use ldpoly_core::erm;
use ldpoly_core::highdim;
use ldpoly_core::ldp;
use ldpoly_core::loss::{DataRecord, LossSpec};
use ldpoly_core::poly;
use ldpoly_core::protocol::{Mechanism, ProtocolConfig};
use ldpoly_core::query;
use ldpoly_core::{Error, PrivacyParams, SurrogateConfig};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InputDomain(_) | Error::Degenerate(_) | Error::LossContract { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Bernstein basis polynomial b_{v,k}(x).
#[pyfunction]
fn bernstein_basis(v: usize, k: usize, x: f64) -> PyResult<f64> {
    poly::bernstein_basis(v, k, x).map_err(to_py_err)
}

/// A fitted multivariate iterated Bernstein surrogate.
#[pyclass]
struct BernsteinSurrogate {
    inner: poly::BernsteinSurrogate,
}

#[pymethods]
impl BernsteinSurrogate {
    /// Fit grid values laid out in lexicographic multi-index order.
    #[staticmethod]
    #[pyo3(signature = (grid_values, k, h, p, smoothness_t = 1.0))]
    fn fit(
        grid_values: Vec<f64>,
        k: usize,
        h: usize,
        p: usize,
        smoothness_t: f64,
    ) -> PyResult<Self> {
        let config = SurrogateConfig::new(k, h, p, smoothness_t).map_err(to_py_err)?;
        let inner = poly::iterated_bernstein_fit(grid_values, config).map_err(to_py_err)?;
        Ok(BernsteinSurrogate { inner })
    }

    fn eval(&self, theta: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&theta).map_err(to_py_err)
    }

    fn gradient(&self, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.gradient(&theta).map_err(to_py_err)
    }

    #[getter]
    fn grid_values(&self) -> Vec<f64> {
        self.inner.grid_values().to_vec()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: poly::BernsteinSurrogate =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(BernsteinSurrogate { inner })
    }
}

/// A univariate polynomial with p(0) = 0 that stays gamma-close to 1 on the
/// integers 1..k.
#[pyclass]
struct ChebyshevDisjunctionPoly {
    inner: poly::ChebyshevDisjunctionPoly,
}

#[pymethods]
impl ChebyshevDisjunctionPoly {
    fn eval(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs.clone()
    }

    #[getter]
    fn gamma_achieved(&self) -> f64 {
        self.inner.gamma_achieved
    }
}

#[pyfunction]
fn chebyshev_disjunction(k: usize, gamma: f64) -> PyResult<ChebyshevDisjunctionPoly> {
    poly::chebyshev_disjunction(k, gamma)
        .map(|inner| ChebyshevDisjunctionPoly { inner })
        .map_err(to_py_err)
}

/// One seeded Laplace(0, scale) draw.
#[pyfunction]
fn laplace_sample(scale: f64, seed: u64) -> PyResult<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    ldp::laplace_sample(scale, &mut rng).map_err(to_py_err)
}

/// One-round private average of values in [0, b].
#[pyfunction]
fn ldp_avg_1d(values: Vec<f64>, b: f64, epsilon: f64, seed: u64) -> PyResult<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    ldp::ldp_avg_1d(&values, b, epsilon, &mut rng).map_err(to_py_err)
}

/// Coordinate-sampled private average of vectors with coordinates in [0, b].
#[pyfunction]
fn ldp_avg_pd(vectors: Vec<Vec<f64>>, b: f64, epsilon: f64, seed: u64) -> PyResult<Vec<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    ldp::ldp_avg_pd(&vectors, b, epsilon, &mut rng).map_err(to_py_err)
}

/// Bernoulli parameter of the one-bit randomizer.
#[pyfunction]
fn one_bit_probability(v: f64, y: f64, epsilon: f64) -> PyResult<f64> {
    ldp::one_bit_probability(v, y, epsilon).map_err(to_py_err)
}

/// Outcome of one private ERM run.
#[pyclass]
struct ErmOutcome {
    #[pyo3(get)]
    theta_priv: Vec<f64>,
    #[pyo3(get)]
    err_empirical: f64,
    #[pyo3(get)]
    sup_grid_error: f64,
    #[pyo3(get)]
    total_bits: u64,
    #[pyo3(get)]
    k_used: usize,
    #[pyo3(get)]
    converged: bool,
}

fn build_records(features: Vec<Vec<f64>>, labels: Vec<f64>) -> PyResult<Vec<DataRecord>> {
    if features.len() != labels.len() {
        return Err(PyValueError::new_err("features and labels lengths differ"));
    }
    Ok(features
        .into_iter()
        .zip(labels)
        .map(|(f, l)| DataRecord::new(f, l))
        .collect())
}

/// Private ERM over a dataset: runs the chosen protocol, fits the Bernstein
/// surrogate, and minimizes it over the constraint set.
#[pyfunction]
#[pyo3(signature = (features, labels, epsilon, seed, loss = "squared", constraint = "box",
                    mechanism = "full-grid", k = None, h = 2))]
#[allow(clippy::too_many_arguments)]
fn private_erm(
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    epsilon: f64,
    seed: u64,
    loss: &str,
    constraint: &str,
    mechanism: &str,
    k: Option<usize>,
    h: usize,
) -> PyResult<ErmOutcome> {
    let dataset = build_records(features, labels)?;
    let p = dataset
        .first()
        .map(|r| r.features.len())
        .ok_or_else(|| PyValueError::new_err("empty dataset"))?;
    let loss = LossSpec::from_name(loss, p).map_err(to_py_err)?;
    let region = ConstraintSet::parse(constraint, p).map_err(to_py_err)?;
    let mech = match mechanism {
        "full-grid" => Mechanism::FullGrid,
        "partitioned-one-bit" => Mechanism::PartitionedOneBit,
        "discretized" => Mechanism::Discretized { grid_step: None },
        other => return Err(PyValueError::new_err(format!("unknown mechanism '{other}'"))),
    };
    let beta = 0.05;
    let k = k.unwrap_or_else(|| erm::auto_k(dataset.len(), epsilon, beta, h, p));
    let config = ProtocolConfig::new(
        mech,
        PrivacyParams::new(epsilon, beta).map_err(to_py_err)?,
        SurrogateConfig::new(k, h, p, loss.smoothness_t).map_err(to_py_err)?,
        seed,
    );
    let result = erm::private_erm(&dataset, &loss, &region, &config).map_err(to_py_err)?;
    Ok(ErmOutcome {
        theta_priv: result.theta_priv,
        err_empirical: result.err_empirical,
        sup_grid_error: result.sup_grid_error,
        total_bits: result.comm.total_bits,
        k_used: k,
        converged: result.minimizer_converged,
    })
}

/// A released coefficient summary for a query family.
#[pyclass]
struct CoefficientSummary {
    inner: query::CoefficientSummary,
}

#[pymethods]
impl CoefficientSummary {
    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs.clone()
    }

    #[getter]
    fn family(&self) -> String {
        match self.inner.family {
            query::Family::ChebyshevMarginal => "chebyshev-marginal".into(),
            query::Family::TrigSmooth => "trig-smooth".into(),
        }
    }

    /// Answer a monotone disjunction query given as a bit list.
    fn answer_marginal(&self, bits: Vec<bool>) -> PyResult<f64> {
        query::answer_marginal(&self.inner, &query::MarginalQuery::new(bits))
            .map_err(to_py_err)
    }

    /// Answer a Gaussian-kernel smooth query exp(-(x-center)^2 / 2 sigma^2).
    fn answer_gauss(&self, center: f64, sigma: f64) -> PyResult<f64> {
        let f = move |x: &[f64]| {
            let d2: f64 = x.iter().map(|xi| (xi - center) * (xi - center)).sum();
            (-d2 / (2.0 * sigma * sigma)).exp()
        };
        query::answer_smooth(
            &self.inner,
            &query::SmoothQuery { f: &f, h: 4, smoothness_t: 4.0 },
        )
        .map_err(to_py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: query::CoefficientSummary =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(CoefficientSummary { inner })
    }
}

/// Release k-way marginals from bit records.
#[pyfunction]
#[pyo3(signature = (records, k, epsilon, alpha, seed, noiseless = false))]
fn release_marginals(
    records: Vec<Vec<bool>>,
    k: usize,
    epsilon: f64,
    alpha: f64,
    seed: u64,
    noiseless: bool,
) -> PyResult<CoefficientSummary> {
    let p = records
        .first()
        .map(Vec::len)
        .ok_or_else(|| PyValueError::new_err("empty dataset"))?;
    let inner = if noiseless {
        query::release_marginals_noiseless(&records, p, k, alpha)
    } else {
        query::release_marginals(&records, p, k, epsilon, alpha, seed)
    }
    .map_err(to_py_err)?;
    Ok(CoefficientSummary { inner })
}

/// Release smooth-query basis averages from points in [-1, 1]^p.
#[pyfunction]
#[pyo3(signature = (points, t, epsilon, seed, noiseless = false))]
fn release_smooth(
    points: Vec<Vec<f64>>,
    t: usize,
    epsilon: f64,
    seed: u64,
    noiseless: bool,
) -> PyResult<CoefficientSummary> {
    let p = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| PyValueError::new_err("empty dataset"))?;
    let inner = if noiseless {
        query::release_smooth_noiseless(&points, p, t)
    } else {
        query::release_smooth(&points, p, t, epsilon, seed)
    }
    .map_err(to_py_err)?;
    Ok(CoefficientSummary { inner })
}

/// A seeded subgaussian projection matrix.
#[pyclass]
struct ProjectionMatrix {
    inner: highdim::ProjectionMatrix,
}

#[pymethods]
impl ProjectionMatrix {
    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    fn apply(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        if v.len() != self.inner.p() {
            return Err(PyValueError::new_err("vector has wrong dimension"));
        }
        Ok(self.inner.apply(&v))
    }
}

#[pyfunction]
#[pyo3(signature = (m, p, seed, kind = "gaussian"))]
fn gen_projection(m: usize, p: usize, seed: u64, kind: &str) -> PyResult<ProjectionMatrix> {
    let kind = match kind {
        "gaussian" => highdim::ProjectionKind::Gaussian,
        "rademacher" => highdim::ProjectionKind::Rademacher,
        other => return Err(PyValueError::new_err(format!("unknown kind '{other}'"))),
    };
    highdim::gen_projection(m, p, kind, seed)
        .map(|inner| ProjectionMatrix { inner })
        .map_err(to_py_err)
}

/// Distortion check: returns (pass, max_distortion).
#[pyfunction]
fn jl_check(phi: &ProjectionMatrix, points: Vec<Vec<f64>>, gamma: f64) -> PyResult<(bool, f64)> {
    highdim::jl_check(&phi.inner, &points, gamma)
        .map(|o| (o.pass, o.max_distortion))
        .map_err(to_py_err)
}

/// Monte Carlo Gaussian width of a unit constraint set; returns
/// (estimate, standard_error).
#[pyfunction]
fn gaussian_width(kind: &str, p: usize, trials: usize, seed: u64) -> PyResult<(f64, f64)> {
    let set = match kind {
        "l2-ball" => ConstraintSet::L2Ball { center: vec![0.0; p], radius: 1.0 },
        "l1-ball" => ConstraintSet::L1Ball { center: vec![0.0; p], radius: 1.0 },
        "simplex" => ConstraintSet::Simplex { p, scale: 1.0 },
        "box" => ConstraintSet::unit_box(p),
        other => return Err(PyValueError::new_err(format!("unknown set '{other}'"))),
    };
    highdim::gaussian_width_mc(&set, trials, seed).map_err(to_py_err)
}

/// min ||w||_1 subject to Phi w = w_bar (basis pursuit recovery).
#[pyfunction]
fn recover_l1(w_bar: Vec<f64>, phi: &ProjectionMatrix) -> PyResult<Vec<f64>> {
    let set = ConstraintSet::L1Ball { center: vec![0.0; phi.inner.p()], radius: 1.0 };
    highdim::recover_minkowski(&w_bar, &phi.inner, &set).map_err(to_py_err)
}

/// Outcome of the high-dimensional pipeline.
#[pyclass]
struct HighDimOutcome {
    #[pyo3(get)]
    w_priv: Vec<f64>,
    #[pyo3(get)]
    excess_risk: f64,
    #[pyo3(get)]
    feasibility: f64,
    #[pyo3(get)]
    m_used: usize,
    #[pyo3(get)]
    gaussian_width: (f64, f64),
}

/// Random-projection ERM for generalized linear losses over the
/// origin-centered l1 ball.
#[pyfunction]
#[pyo3(signature = (features, labels, epsilon, seed, link = "squared", m = None, k = None, h = 1))]
#[allow(clippy::too_many_arguments)]
fn dr_erm(
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    epsilon: f64,
    seed: u64,
    link: &str,
    m: Option<usize>,
    k: Option<usize>,
    h: usize,
) -> PyResult<HighDimOutcome> {
    let dataset = build_records(features, labels)?;
    let p = dataset
        .first()
        .map(|r| r.features.len())
        .ok_or_else(|| PyValueError::new_err("empty dataset"))?;
    let loss = match link {
        "squared" => highdim::GlmLoss::squared(),
        "logistic" => highdim::GlmLoss::logistic(),
        other => return Err(PyValueError::new_err(format!("unknown link '{other}'"))),
    };
    let set = ConstraintSet::L1Ball { center: vec![0.0; p], radius: 1.0 };
    let result = highdim::dr_erm(
        &dataset,
        &loss,
        &set,
        epsilon,
        m,
        highdim::LowDimBudget { k, h },
        seed,
    )
    .map_err(to_py_err)?;
    Ok(HighDimOutcome {
        w_priv: result.w_priv,
        excess_risk: result.excess_risk,
        feasibility: result.feasibility,
        m_used: result.m_used,
        gaussian_width: result.gaussian_width,
    })
}

#[pymodule]
fn ldpoly(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", ldpoly_core::VERSION)?;
    m.add_function(wrap_pyfunction!(bernstein_basis, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev_disjunction, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_sample, m)?)?;
    m.add_function(wrap_pyfunction!(ldp_avg_1d, m)?)?;
    m.add_function(wrap_pyfunction!(ldp_avg_pd, m)?)?;
    m.add_function(wrap_pyfunction!(one_bit_probability, m)?)?;
    m.add_function(wrap_pyfunction!(private_erm, m)?)?;
    m.add_function(wrap_pyfunction!(release_marginals, m)?)?;
    m.add_function(wrap_pyfunction!(release_smooth, m)?)?;
    m.add_function(wrap_pyfunction!(gen_projection, m)?)?;
    m.add_function(wrap_pyfunction!(jl_check, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_width, m)?)?;
    m.add_function(wrap_pyfunction!(recover_l1, m)?)?;
    m.add_function(wrap_pyfunction!(dr_erm, m)?)?;
    m.add_class::<BernsteinSurrogate>()?;
    m.add_class::<ChebyshevDisjunctionPoly>()?;
    m.add_class::<CoefficientSummary>()?;
    m.add_class::<ProjectionMatrix>()?;
    m.add_class::<ErmOutcome>()?;
    m.add_class::<HighDimOutcome>()?;
    Ok(())
}
