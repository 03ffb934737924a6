//! Reproducible experiment driver: configuration loading, seeded sweeps with
//! deterministic CSV emission, synthetic data generation, and the
//! brute-force oracle mode backing every mechanism.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSet;
use crate::erm::{
    auto_k, excess_population_risk, private_erm, private_erm_regularized, EmpiricalRisk,
    ErmResult, RidgeMu,
};
use crate::error::{Error, Result};
use crate::ldp::{noise_draws, PrivacyParams};
use crate::loss::{DataRecord, LossSpec};
use crate::poly::SurrogateConfig;
use crate::protocol::{Mechanism, ProtocolConfig};
use crate::query::{
    enumerate_queries, release_marginals_noiseless, true_marginal_answer, true_smooth_answer,
};
use crate::rng::{Substreams, STREAM_DATA};

/// CSV schema tag written as the first (comment) line of every sweep file.
pub const CSV_SCHEMA: &str = "# ldpoly-sweep-v1";

/// Hard caps for oracle mode: brute force only at desk scale.
pub const ORACLE_MAX_N: usize = 2_000_000;
pub const ORACLE_MAX_P: usize = 3;

/// One sweep configuration: the cross product of (n, epsilon, seed) runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mechanism: String,
    pub loss: String,
    pub constraint: String,
    pub p: usize,
    pub h: usize,
    /// Grid granularity; omitted means the theorem-formula choice per n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub n: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Ridge weight; omitted runs the plain mechanism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge_mu: Option<f64>,
    /// Fresh-sample size for population-risk estimates; omitted skips them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_eval_n: Option<usize>,
    pub output: PathBuf,
}

fn default_beta() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.epsilon.is_empty() || self.seeds.is_empty() {
            return Err(Error::domain("n, epsilon, and seeds must be nonempty"));
        }
        if self.p < 1 || self.h < 1 {
            return Err(Error::domain("p and h must be >= 1"));
        }
        mechanism_from_tag(&self.mechanism)?;
        LossSpec::from_name(&self.loss, self.p)?;
        ConstraintSet::parse(&self.constraint, self.p)?;
        Ok(())
    }

    /// 64-bit FNV-1a of the canonical JSON form, for attribution.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        h
    }
}

fn mechanism_from_tag(tag: &str) -> Result<Mechanism> {
    match tag {
        "full-grid" => Ok(Mechanism::FullGrid),
        "partitioned-one-bit" => Ok(Mechanism::PartitionedOneBit),
        "discretized" => Ok(Mechanism::Discretized { grid_step: None }),
        other => Err(Error::domain(format!("unknown mechanism '{other}'"))),
    }
}

impl LossSpec {
    /// Built-in loss by CLI name.
    pub fn from_name(name: &str, p: usize) -> Result<Self> {
        Ok(LossSpec::builtin(crate::loss::BuiltinLoss::parse(name)?, p))
    }
}

/// Planted parameter used by the synthetic generators, documented so sweeps
/// are reproducible from the config alone.
pub fn planted_theta(p: usize) -> Vec<f64> {
    (0..p)
        .map(|j| 0.3 + 0.4 * (j + 1) as f64 / p as f64)
        .collect()
}

/// One synthetic record: features uniform on [-1,1]^p; labels follow the
/// planted linear model (sign model for the logistic loss).
pub fn sample_record(
    loss_name: &str,
    theta_star: &[f64],
    rng: &mut rand_chacha::ChaCha12Rng,
) -> DataRecord {
    use rand::Rng;
    let p = theta_star.len();
    let x: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let margin: f64 = theta_star.iter().zip(&x).map(|(a, b)| a * b).sum();
    let label = match loss_name {
        "logistic" => {
            let prob = 1.0 / (1.0 + (-4.0 * margin).exp());
            if rng.random::<f64>() < prob {
                1.0
            } else {
                -1.0
            }
        }
        _ => (margin + 0.1 * (rng.random::<f64>() - 0.5)).clamp(-1.0, 1.0),
    };
    DataRecord::new(x, label)
}

/// Seeded synthetic dataset for (loss, p, n).
pub fn generate_dataset(loss_name: &str, p: usize, n: usize, seed: u64) -> Vec<DataRecord> {
    let theta_star = planted_theta(p);
    let mut rng = Substreams::new(seed).labeled(STREAM_DATA);
    (0..n)
        .map(|_| sample_record(loss_name, &theta_star, &mut rng))
        .collect()
}

/// Seeded synthetic bit dataset for marginal queries.
pub fn generate_bit_dataset(p: usize, n: usize, seed: u64) -> Vec<Vec<bool>> {
    use rand::Rng;
    let mut rng = Substreams::new(seed).labeled(STREAM_DATA);
    (0..n)
        .map(|_| (0..p).map(|j| rng.random::<f64>() < 0.25 + 0.05 * j as f64).collect())
        .collect()
}

/// Seeded GLM dataset with a planted 3-sparse model on the unit sphere;
/// `slope` amplifies the ~1/sqrt(p) margins into labels.
pub fn generate_glm_dataset(n: usize, p: usize, slope: f64, seed: u64) -> Vec<DataRecord> {
    use rand::Rng;
    let mut rng = Substreams::new(seed).labeled(STREAM_DATA);
    let mut w0 = vec![0.0; p];
    w0[1 % p] = 0.6;
    w0[7 % p] = -0.25;
    w0[13 % p] = 0.15;
    (0..n)
        .map(|_| {
            let mut y: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
            for v in &mut y {
                *v /= norm;
            }
            let margin: f64 = w0.iter().zip(&y).map(|(a, b)| a * b).sum();
            let z = (margin * slope + 0.02 * (rng.random::<f64>() - 0.5)).clamp(-1.0, 1.0);
            DataRecord::new(y, z)
        })
        .collect()
}

/// Seeded synthetic points in [-1,1]^p for smooth queries.
pub fn generate_point_dataset(p: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = Substreams::new(seed).labeled(STREAM_DATA);
    (0..n)
        .map(|_| (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect()
}

/// One row of sweep output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub n: usize,
    pub epsilon: f64,
    pub k: usize,
    pub h: usize,
    pub p: usize,
    pub mechanism: String,
    pub sup_grid_error: Option<f64>,
    pub err_empirical: Option<f64>,
    pub err_population: Option<f64>,
    pub total_bits: Option<u64>,
    pub error: Option<String>,
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl RunRecord {
    pub fn csv_header() -> &'static str {
        "seed,n,epsilon,k,h,p,mechanism,sup_grid_error,err_empirical,err_population,total_bits,error"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.n,
            self.epsilon,
            self.k,
            self.h,
            self.p,
            self.mechanism,
            fmt_opt_f64(self.sup_grid_error),
            fmt_opt_f64(self.err_empirical),
            fmt_opt_f64(self.err_population),
            self.total_bits.map(|b| b.to_string()).unwrap_or_default(),
            self.error.clone().unwrap_or_default()
        )
    }
}

/// Runs one sweep point through the library.
pub fn run_single(
    config: &ExperimentConfig,
    n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<(ErmResult, usize)> {
    let mechanism = mechanism_from_tag(&config.mechanism)?;
    let loss = LossSpec::from_name(&config.loss, config.p)?;
    let region = ConstraintSet::parse(&config.constraint, config.p)?;
    let k = config
        .k
        .unwrap_or_else(|| auto_k(n, epsilon, config.beta, config.h, config.p));
    let privacy = PrivacyParams::new(epsilon, config.beta)?;
    let surrogate = SurrogateConfig::new(k, config.h, config.p, loss.smoothness_t)?;
    let protocol = ProtocolConfig::new(mechanism, privacy, surrogate, seed);
    let dataset = generate_dataset(&config.loss, config.p, n, seed);

    let mut result = match config.ridge_mu {
        Some(mu) => {
            private_erm_regularized(&dataset, &loss, &region, &protocol, RidgeMu::Fixed(mu))?
        }
        None => private_erm(&dataset, &loss, &region, &protocol)?,
    };
    if let Some(eval_n) = config.population_eval_n {
        let loss_name = config.loss.clone();
        let theta_star = planted_theta(config.p);
        let sampler = move |rng: &mut rand_chacha::ChaCha12Rng| {
            sample_record(&loss_name, &theta_star, rng)
        };
        let pop = excess_population_risk(
            &result.theta_priv,
            &sampler,
            &loss,
            &region,
            eval_n,
            seed ^ 0x5eed_0f0f,
        )?;
        result.err_population = Some(pop);
    }
    Ok((result, k))
}

/// Sweep output: the CSV text, the manifest JSON, and the failure count.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub csv: String,
    pub manifest: String,
    pub rows: usize,
    pub failures: usize,
}

/// Executes the cross product of (n, epsilon, seed), one CSV row per run.
/// Failures become rows with the error column set and the sweep continues.
/// Rows are emitted in configuration order regardless of which worker
/// finishes first.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let mut points = Vec::new();
    for &n in &config.n {
        for &eps in &config.epsilon {
            for &seed in &config.seeds {
                points.push((n, eps, seed));
            }
        }
    }

    let records: Vec<RunRecord> = points
        .par_iter()
        .map(|&(n, eps, seed)| {
            let k_display = config
                .k
                .unwrap_or_else(|| auto_k(n, eps, config.beta, config.h, config.p));
            match run_single(config, n, eps, seed) {
                Ok((result, k)) => RunRecord {
                    seed,
                    n,
                    epsilon: eps,
                    k,
                    h: config.h,
                    p: config.p,
                    mechanism: config.mechanism.clone(),
                    sup_grid_error: Some(result.sup_grid_error),
                    err_empirical: Some(result.err_empirical),
                    err_population: result.err_population.map(|(e, _)| e),
                    total_bits: Some(result.comm.total_bits),
                    error: None,
                },
                Err(e) => RunRecord {
                    seed,
                    n,
                    epsilon: eps,
                    k: k_display,
                    h: config.h,
                    p: config.p,
                    mechanism: config.mechanism.clone(),
                    sup_grid_error: None,
                    err_empirical: None,
                    err_population: None,
                    total_bits: None,
                    error: Some(e.to_string().replace([',', '\n'], ";")),
                },
            }
        })
        .collect();

    let mut csv = String::new();
    csv.push_str(CSV_SCHEMA);
    csv.push('\n');
    csv.push_str(RunRecord::csv_header());
    csv.push('\n');
    for r in &records {
        csv.push_str(&r.to_csv_row());
        csv.push('\n');
    }
    let failures = records.iter().filter(|r| r.error.is_some()).count();

    let manifest = serde_json::to_string_pretty(&serde_json::json!({
        "library_version": crate::VERSION,
        "csv_schema": CSV_SCHEMA,
        "config": config,
        "config_hash": format!("{:016x}", config.hash()),
        "rows": records.len(),
        "failures": failures,
    }))?;

    Ok(SweepOutput { csv, manifest, rows: records.len(), failures })
}

/// Runs the sweep and writes the CSV plus `<output>.manifest.json`.
pub fn run_sweep_to_files(config: &ExperimentConfig) -> Result<SweepOutput> {
    let out = run_sweep(config)?;
    std::fs::write(&config.output, &out.csv)?;
    let manifest_path = manifest_path(&config.output);
    std::fs::write(manifest_path, &out.manifest)?;
    Ok(out)
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut os = output.as_os_str().to_owned();
    os.push(".manifest.json");
    PathBuf::from(os)
}

/// Exact (non-private) answers, with the randomizer-invocation count
/// reported so callers can verify none were touched.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub task: String,
    pub results: serde_json::Value,
    pub noise_draws_delta: u64,
}

fn check_oracle_caps(n: usize, p: usize) -> Result<()> {
    if n > ORACLE_MAX_N {
        return Err(Error::Resource(format!("oracle cap: n={n} > {ORACLE_MAX_N}")));
    }
    if p > ORACLE_MAX_P {
        return Err(Error::Resource(format!("oracle cap: p={p} > {ORACLE_MAX_P}")));
    }
    Ok(())
}

/// Dense-grid / multi-start exact ERM minimization on synthetic data.
pub fn oracle_erm(
    loss_name: &str,
    constraint: &str,
    p: usize,
    n: usize,
    seed: u64,
) -> Result<OracleReport> {
    check_oracle_caps(n, p)?;
    let before = noise_draws();
    let loss = LossSpec::from_name(loss_name, p)?;
    let region = ConstraintSet::parse(constraint, p)?;
    let dataset = generate_dataset(loss_name, p, n, seed);
    let risk = EmpiricalRisk::new(&dataset, &loss);
    let min = risk.oracle_min(&region);
    Ok(OracleReport {
        task: "erm".into(),
        results: serde_json::json!({
            "theta": min.theta,
            "value": min.value,
            "loss": loss_name,
            "constraint": constraint,
        }),
        noise_draws_delta: noise_draws() - before,
    })
}

/// Exhaustive exact marginal answers on synthetic bits, next to the
/// noiseless summary's answers for comparison.
pub fn oracle_marginals(
    p: usize,
    k: usize,
    n: usize,
    alpha: f64,
    seed: u64,
) -> Result<OracleReport> {
    if p > 12 {
        return Err(Error::Resource(format!("oracle cap: p={p} > 12 for enumeration")));
    }
    check_oracle_caps(n, 3.min(p))?;
    let before = noise_draws();
    let dataset = generate_bit_dataset(p, n, seed);
    let summary = release_marginals_noiseless(&dataset, p, k, alpha)?;
    let queries = enumerate_queries(p, k, 10_000, seed);
    let answers: Vec<serde_json::Value> = queries
        .iter()
        .map(|q| {
            let exact = true_marginal_answer(&dataset, q);
            let via_summary = crate::query::answer_marginal(&summary, q).unwrap();
            serde_json::json!({
                "query": q.bits,
                "exact": exact,
                "noiseless_summary": via_summary,
            })
        })
        .collect();
    Ok(OracleReport {
        task: "marginals".into(),
        results: serde_json::json!({ "answers": answers }),
        noise_draws_delta: noise_draws() - before,
    })
}

/// Exact smooth-query averages (Gaussian kernels at the given bandwidths)
/// on synthetic points.
pub fn oracle_smooth(
    p: usize,
    n: usize,
    bandwidths: &[f64],
    center: f64,
    seed: u64,
) -> Result<OracleReport> {
    check_oracle_caps(n, p)?;
    let before = noise_draws();
    let dataset = generate_point_dataset(p, n, seed);
    let answers: Vec<serde_json::Value> = bandwidths
        .iter()
        .map(|&sigma| {
            let f = move |x: &[f64]| {
                let d2: f64 = x.iter().map(|xi| (xi - center) * (xi - center)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            };
            serde_json::json!({
                "sigma": sigma,
                "exact": true_smooth_answer(&dataset, &f),
            })
        })
        .collect();
    Ok(OracleReport {
        task: "smooth".into(),
        results: serde_json::json!({ "answers": answers }),
        noise_draws_delta: noise_draws() - before,
    })
}
