//! Command-line experiment driver.
//!
//! Every stochastic subcommand requires an explicit `--seed`; identical
//! arguments always reproduce identical outputs, byte for byte. The process
//! exits 0 only if every requested run succeeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ldpoly::constraint::ConstraintSet;
use ldpoly::experiment::{
    self, generate_bit_dataset, generate_glm_dataset, generate_point_dataset, ExperimentConfig,
};
use ldpoly::highdim::{self, GlmLoss, LowDimBudget};
use ldpoly::query::{self, MarginalQuery, SmoothQuery};
use ldpoly::Error;

#[derive(Parser)]
#[command(name = "ldpoly", version, about = "Non-interactive LDP protocols via polynomial approximation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Private ERM over the full-grid protocol on synthetic data.
    Erm(ErmArgs),
    /// Private ERM over the 1-bit-per-player protocol (epsilon <= ln 2).
    ErmOnebit(ErmArgs),
    /// Release a k-way marginal summary.
    ReleaseMarginals(MarginalsArgs),
    /// Release a smooth-query summary.
    ReleaseSmooth(SmoothArgs),
    /// Answer queries from a released summary file.
    Answer(AnswerArgs),
    /// High-dimensional GLM pipeline with random projection.
    Highdim(HighdimArgs),
    /// Exact non-private answers; fails if any randomizer was touched.
    Oracle(OracleArgs),
    /// Cross-product sweep from a TOML/JSON config, emitting CSV + manifest.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ErmArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long)]
    epsilon: f64,
    /// Grid granularity; defaults to the theorem-formula choice.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    h: usize,
    #[arg(long, default_value = "squared")]
    loss: String,
    #[arg(long, default_value = "box")]
    constraint: String,
    #[arg(long)]
    seed: u64,
    /// Ridge weight for the regularized variant ("auto" = n^(-1/12)).
    #[arg(long)]
    mu: Option<String>,
    /// Fresh-sample size for a population-risk estimate.
    #[arg(long)]
    population_eval_n: Option<usize>,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MarginalsArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    alpha: f64,
    /// Synthetic record count (used when --input is omitted).
    #[arg(long)]
    n: Option<usize>,
    /// File with one bit-string record per line (e.g. 10110).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SmoothArgs {
    #[arg(long)]
    p: usize,
    /// Per-axis trigonometric degree.
    #[arg(long)]
    t: usize,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    n: Option<usize>,
    /// File with one comma-separated point in [-1,1]^p per line.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnswerArgs {
    /// A summary JSON produced by release-marginals or release-smooth.
    #[arg(long)]
    summary: PathBuf,
    /// Query file: one bit-vector (marginals) or one named spec per line
    /// ("gauss <center> <sigma>" for smooth summaries).
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HighdimArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    /// Projection dimension; defaults to the theorem-formula choice.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value = "l1-ball")]
    constraint: String,
    #[arg(long, default_value = "squared")]
    link: String,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    h: usize,
    /// Label slope of the planted sparse model.
    #[arg(long, default_value_t = 8.0)]
    slope: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// One of: erm, marginals, smooth.
    #[arg(long)]
    task: String,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value = "squared")]
    loss: String,
    #[arg(long, default_value = "box")]
    constraint: String,
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1.0")]
    bandwidths: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    center: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML (or .json) sweep configuration.
    #[arg(long)]
    config: PathBuf,
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_bit_line(line: &str, p: usize) -> Result<Vec<bool>, Error> {
    let bits: Vec<bool> = line
        .trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::InputDomain(format!("bad bit '{other}'"))),
        })
        .collect::<Result<_, _>>()?;
    if bits.len() != p {
        return Err(Error::InputDomain(format!(
            "record '{}' has {} bits, expected {p}",
            line.trim(),
            bits.len()
        )));
    }
    Ok(bits)
}

fn run_erm(args: &ErmArgs, mechanism: &str) -> Result<(), Error> {
    let config = ExperimentConfig {
        mechanism: mechanism.into(),
        loss: args.loss.clone(),
        constraint: args.constraint.clone(),
        p: args.p,
        h: args.h,
        k: args.k,
        n: vec![args.n],
        epsilon: vec![args.epsilon],
        seeds: vec![args.seed],
        beta: 0.05,
        ridge_mu: match args.mu.as_deref() {
            None => None,
            Some("auto") => Some(ldpoly::erm::ridge_mu_auto(args.n)),
            Some(v) => Some(v.parse().map_err(|_| {
                Error::InputDomain(format!("--mu must be a number or 'auto', got '{v}'"))
            })?),
        },
        population_eval_n: args.population_eval_n,
        output: PathBuf::from("unused.csv"),
    };
    let (result, k) = experiment::run_single(&config, args.n, args.epsilon, args.seed)?;
    let mut json = serde_json::to_value(&result)?;
    json["k_used"] = serde_json::json!(k);
    emit(&args.out, &serde_json::to_string_pretty(&json)?)
}

fn run_marginals(args: &MarginalsArgs) -> Result<(), Error> {
    let dataset: Vec<Vec<bool>> = match (&args.input, args.n) {
        (Some(path), _) => std::fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| parse_bit_line(l, args.p))
            .collect::<Result<_, _>>()?,
        (None, Some(n)) => generate_bit_dataset(args.p, n, args.seed),
        (None, None) => {
            return Err(Error::InputDomain("provide --input or --n".into()));
        }
    };
    let summary =
        query::release_marginals(&dataset, args.p, args.k, args.epsilon, args.alpha, args.seed)?;
    emit(&args.out, &serde_json::to_string_pretty(&summary)?)
}

fn run_smooth(args: &SmoothArgs) -> Result<(), Error> {
    let dataset: Vec<Vec<f64>> = match (&args.input, args.n) {
        (Some(path), _) => std::fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InputDomain(format!("bad number '{v}'")))
                    })
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<_, _>>()?,
        (None, Some(n)) => generate_point_dataset(args.p, n, args.seed),
        (None, None) => {
            return Err(Error::InputDomain("provide --input or --n".into()));
        }
    };
    let summary = query::release_smooth(&dataset, args.p, args.t, args.epsilon, args.seed)?;
    emit(&args.out, &serde_json::to_string_pretty(&summary)?)
}

fn run_answer(args: &AnswerArgs) -> Result<(), Error> {
    let summary: query::CoefficientSummary =
        serde_json::from_str(&std::fs::read_to_string(&args.summary)?)?;
    let lines: Vec<String> = std::fs::read_to_string(&args.queries)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(String::from)
        .collect();
    let mut answers = Vec::new();
    for line in &lines {
        let value = match summary.family {
            query::Family::ChebyshevMarginal => {
                let bits = parse_bit_line(line, summary.meta.p)?;
                query::answer_marginal(&summary, &MarginalQuery::new(bits))?
            }
            query::Family::TrigSmooth => {
                let parts: Vec<&str> = line.split_whitespace().collect();
                match parts.as_slice() {
                    ["gauss", center, sigma] => {
                        let center: f64 = center
                            .parse()
                            .map_err(|_| Error::InputDomain("bad center".into()))?;
                        let sigma: f64 = sigma
                            .parse()
                            .map_err(|_| Error::InputDomain("bad sigma".into()))?;
                        let f = move |x: &[f64]| {
                            let d2: f64 =
                                x.iter().map(|xi| (xi - center) * (xi - center)).sum();
                            (-d2 / (2.0 * sigma * sigma)).exp()
                        };
                        query::answer_smooth(
                            &summary,
                            &SmoothQuery { f: &f, h: 4, smoothness_t: 4.0 },
                        )?
                    }
                    _ => {
                        return Err(Error::InputDomain(format!(
                            "unknown smooth query spec '{line}' (expected: gauss <center> <sigma>)"
                        )));
                    }
                }
            }
        };
        answers.push(serde_json::json!({ "query": line, "answer": value }));
    }
    emit(&args.out, &serde_json::to_string_pretty(&serde_json::json!(answers))?)
}

fn run_highdim(args: &HighdimArgs) -> Result<(), Error> {
    let set = match args.constraint.as_str() {
        "l1-ball" => ConstraintSet::L1Ball { center: vec![0.0; args.p], radius: 1.0 },
        "simplex" => ConstraintSet::Simplex { p: args.p, scale: 1.0 },
        other => {
            return Err(Error::InputDomain(format!(
                "highdim supports l1-ball and simplex, got '{other}'"
            )));
        }
    };
    let loss = match args.link.as_str() {
        "squared" => GlmLoss::squared(),
        "logistic" => GlmLoss::logistic(),
        other => return Err(Error::InputDomain(format!("unknown link '{other}'"))),
    };
    let dataset = generate_glm_dataset(args.n, args.p, args.slope, args.seed);
    let result = highdim::dr_erm(
        &dataset,
        &loss,
        &set,
        args.epsilon,
        args.m,
        LowDimBudget { k: args.k, h: args.h },
        args.seed,
    )?;
    emit(&args.out, &serde_json::to_string_pretty(&result)?)
}

fn run_oracle(args: &OracleArgs) -> Result<u64, Error> {
    let report = match args.task.as_str() {
        "erm" => experiment::oracle_erm(&args.loss, &args.constraint, args.p, args.n, args.seed)?,
        "marginals" => {
            experiment::oracle_marginals(args.p, args.k, args.n, args.alpha, args.seed)?
        }
        "smooth" => experiment::oracle_smooth(
            args.p,
            args.n,
            &args.bandwidths,
            args.center,
            args.seed,
        )?,
        other => return Err(Error::InputDomain(format!("unknown oracle task '{other}'"))),
    };
    let delta = report.noise_draws_delta;
    emit(&args.out, &serde_json::to_string_pretty(&report)?)?;
    Ok(delta)
}

fn run() -> Result<ExitCode, Error> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Erm(args) => run_erm(args, "full-grid")?,
        Cmd::ErmOnebit(args) => run_erm(args, "partitioned-one-bit")?,
        Cmd::ReleaseMarginals(args) => run_marginals(args)?,
        Cmd::ReleaseSmooth(args) => run_smooth(args)?,
        Cmd::Answer(args) => run_answer(args)?,
        Cmd::Highdim(args) => run_highdim(args)?,
        Cmd::Oracle(args) => {
            let delta = run_oracle(args)?;
            if delta != 0 {
                eprintln!("oracle mode drew {delta} noise samples; refusing to report success");
                return Ok(ExitCode::from(3));
            }
        }
        Cmd::Sweep(args) => {
            let config = ExperimentConfig::load(&args.config)?;
            let out = experiment::run_sweep_to_files(&config)?;
            eprintln!(
                "wrote {} rows ({} failed) to {}",
                out.rows,
                out.failures,
                config.output.display()
            );
            if out.failures > 0 {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
