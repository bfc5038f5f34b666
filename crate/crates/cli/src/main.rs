//! Command-line front end for the mixident library.
//!
//! Every subcommand reads and writes versioned JSON artifacts. Output is
//! deterministic: the same argument list (including `--seed`) produces
//! byte-identical bytes on every run. States are 0-based in all artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixident::json::{self as artifact, ModelFile, NumericModel, NumericTensor, TensorFile};
use mixident::{
    build_pair, identifiability_probe, multi_start_recover, project_distribution, project_params,
    random_interior_model, random_separated_model, seeded_rng, verify_pair, CounterexampleSpec,
    DistributionTensor, Error, MixtureParams, MultilinearPolynomial, Rational, RecoveryConfig,
    Result, SizeCap, StateSelector,
};

/// Numerator bound for randomly drawn rational entries.
const GEN_MAX_NUMER: u64 = 1000;
/// Resampling budget for `gen --min-strong-sep`.
const GEN_MAX_ATTEMPTS: usize = 10_000;

#[derive(Parser)]
#[command(
    name = "mixident",
    version,
    about = "Mixtures of product measures: exact distributions, separability analysis,\n\
             characteristic polynomials, non-identifiable pairs, and parameter recovery",
    after_help = "Exit codes:\n  \
                  0  success\n  \
                  1  a verification or comparison evaluated to false\n  \
                  2  invalid input or arguments\n  \
                  3  resource cap exceeded (tensor size or sampling budget)\n\n\
                  All artifacts are JSON with a `schema` version field and 0-based states.\n\
                  Randomized commands use a ChaCha8 generator keyed by --seed, so the same\n\
                  arguments always reproduce byte-identical output."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random interior model with exact rational entries
    Gen(GenArgs),
    /// Compute the mixture distribution tensor of a model
    Dist(DistArgs),
    /// Report per-variable separability and the identifiability verdict
    Sep(SepArgs),
    /// Compute or compare characteristic polynomials of binary inputs
    Charpoly(CharpolyArgs),
    /// Restrict a model or tensor to one kept state per variable
    Project(ProjectArgs),
    /// Build a pair of distinct models with equal distributions
    CxBuild(CxBuildArgs),
    /// Re-derive and verify a built pair end to end
    CxVerify(CxVerifyArgs),
    /// Multi-start parameter recovery from a distribution
    Recover(RecoverArgs),
    /// Recover a model's own distribution and test orbit uniqueness
    Probe(ProbeArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of mixture components
    #[arg(long = "K")]
    components: usize,
    /// Number of observed variables
    #[arg(long = "L")]
    vars: usize,
    /// Number of states per variable (at least 2)
    #[arg(long = "M")]
    states: usize,
    /// 64-bit seed for the ChaCha8 generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resample until at least this many variables are strongly separable
    #[arg(long)]
    min_strong_sep: Option<usize>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistArgs {
    /// Model artifact to evaluate
    input: PathBuf,
    /// Keep exact rational arithmetic (requires a rational-valued model)
    #[arg(long)]
    exact: bool,
    /// Fail with a resource error if the tensor would exceed this many cells
    #[arg(long, default_value_t = 1 << 20)]
    max_cells: u64,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SepArgs {
    /// Model artifact to analyze
    input: PathBuf,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CharpolyArgs {
    /// Binary model or tensor artifact with rational values
    #[arg(required_unless_present = "compare", conflicts_with = "compare")]
    input: Option<PathBuf>,
    /// Compare the polynomials of two artifacts instead of printing one
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    compare: Option<Vec<PathBuf>>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    /// Model or tensor artifact to project
    input: PathBuf,
    /// JSON file with one kept state per variable, e.g. [0, 2, 1]
    #[arg(long)]
    selector: PathBuf,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CxBuildArgs {
    /// Pair-spec artifact; alternative to the dimension flags
    #[arg(
        long,
        conflicts_with_all = ["components", "vars", "states", "separable_vars", "alpha", "beta"]
    )]
    spec: Option<PathBuf>,
    /// Number of mixture components
    #[arg(long = "K", required_unless_present = "spec")]
    components: Option<usize>,
    /// Number of observed variables
    #[arg(long = "L", required_unless_present = "spec")]
    vars: Option<usize>,
    /// Number of states per variable
    #[arg(long = "M", required_unless_present = "spec")]
    states: Option<usize>,
    /// Number of variables carrying the separable progressions
    #[arg(long = "Lbar", required_unless_present = "spec")]
    separable_vars: Option<usize>,
    /// Progression step as a rational like 1/48 (default: a feasible scale)
    #[arg(long, requires = "beta")]
    alpha: Option<String>,
    /// State offset scale as a rational like 1/48 (default: a feasible scale)
    #[arg(long, requires = "alpha")]
    beta: Option<String>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CxVerifyArgs {
    /// Pair artifact produced by cx-build
    input: PathBuf,
    /// Fail with a resource error if a tensor would exceed this many cells
    #[arg(long, default_value_t = 1 << 20)]
    max_cells: u64,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverArgs {
    /// Model or tensor artifact holding the target distribution
    input: PathBuf,
    /// Number of components to fit (defaults to the model's own count)
    #[arg(long = "K")]
    components: Option<usize>,
    /// Number of independent random initializations
    #[arg(long, default_value_t = 64)]
    starts: usize,
    /// 64-bit seed for the ChaCha8 generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fail with a resource error if the tensor would exceed this many cells
    #[arg(long, default_value_t = 1 << 20)]
    max_cells: u64,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Interior model artifact serving as the ground truth
    input: PathBuf,
    /// Number of independent random initializations
    #[arg(long, default_value_t = 64)]
    starts: usize,
    /// 64-bit seed for the ChaCha8 generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(failure_code(&err))
        }
    }
}

fn failure_code(err: &Error) -> u8 {
    match err {
        Error::SizeCapExceeded { .. } | Error::SamplingExhausted { .. } => 3,
        _ => 2,
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Gen(a) => run_gen(a),
        Command::Dist(a) => run_dist(a),
        Command::Sep(a) => run_sep(a),
        Command::Charpoly(a) => run_charpoly(a),
        Command::Project(a) => run_project(a),
        Command::CxBuild(a) => run_cx_build(a),
        Command::CxVerify(a) => run_cx_verify(a),
        Command::Recover(a) => run_recover(a),
        Command::Probe(a) => run_probe(a),
    }
}

fn run_gen(a: GenArgs) -> Result<u8> {
    let mut rng = seeded_rng(a.seed);
    let model = match a.min_strong_sep {
        Some(n) => random_separated_model(
            a.components,
            a.vars,
            a.states,
            n,
            GEN_MAX_NUMER,
            GEN_MAX_ATTEMPTS,
            &mut rng,
        )?,
        None => random_interior_model(a.components, a.vars, a.states, GEN_MAX_NUMER, &mut rng)?,
    };
    emit(&a.out, &artifact::model_to_file(&model))?;
    Ok(0)
}

fn run_dist(a: DistArgs) -> Result<u8> {
    let cap = SizeCap::new(a.max_cells);
    let file = match load_model(&a.input)? {
        NumericModel::Exact(p) => {
            if a.exact {
                artifact::tensor_to_file(&p.mixture_distribution_capped(&cap)?)
            } else {
                artifact::tensor_to_file_f64(&p.to_float()?.mixture_distribution_capped(&cap)?)
            }
        }
        NumericModel::Float(p) => {
            if a.exact {
                return Err(Error::Parse(
                    "--exact requires a rational-valued model".into(),
                ));
            }
            artifact::tensor_to_file_f64(&p.mixture_distribution_capped(&cap)?)
        }
    };
    emit(&a.out, &file)?;
    Ok(0)
}

fn run_sep(a: SepArgs) -> Result<u8> {
    let file = match load_model(&a.input)? {
        NumericModel::Exact(p) => artifact::sep_to_file(&p),
        NumericModel::Float(p) => artifact::sep_to_file(&p),
    };
    emit(&a.out, &file)?;
    Ok(0)
}

fn run_charpoly(a: CharpolyArgs) -> Result<u8> {
    if let Some(pair) = &a.compare {
        let lhs = polynomial_of(&pair[0])?;
        let rhs = polynomial_of(&pair[1])?;
        let equal = lhs.identical(&rhs)?;
        emit(&a.out, &artifact::compare_to_file(equal))?;
        return Ok(u8::from(!equal));
    }
    let input = a.input.as_ref().expect("clap enforces input xor --compare");
    emit(&a.out, &artifact::poly_to_file(&polynomial_of(input)?))?;
    Ok(0)
}

fn run_project(a: ProjectArgs) -> Result<u8> {
    let choice: Vec<usize> = from_value(read_value(&a.selector)?, &a.selector, "state selector")?;
    let sel = StateSelector::new(choice)?;
    match load_input(&a.input)? {
        InputArtifact::Model(NumericModel::Exact(p)) => {
            emit(&a.out, &artifact::model_to_file(&project_params(&p, &sel)?))
        }
        InputArtifact::Model(NumericModel::Float(p)) => emit(
            &a.out,
            &artifact::model_to_file_f64(&project_params(&p, &sel)?),
        ),
        InputArtifact::Tensor(NumericTensor::Exact(t)) => emit(
            &a.out,
            &artifact::tensor_to_file(&project_distribution(&t, &sel)?),
        ),
        InputArtifact::Tensor(NumericTensor::Float(t)) => emit(
            &a.out,
            &artifact::tensor_to_file_f64(&project_distribution(&t, &sel)?),
        ),
    }?;
    Ok(0)
}

fn run_cx_build(a: CxBuildArgs) -> Result<u8> {
    let spec = match &a.spec {
        Some(path) => artifact::spec_from_file(&from_value(read_value(path)?, path, "pair spec")?)?,
        None => {
            let k = a.components.expect("required by clap unless --spec");
            let l = a.vars.expect("required by clap unless --spec");
            let m = a.states.expect("required by clap unless --spec");
            let lbar = a.separable_vars.expect("required by clap unless --spec");
            match (&a.alpha, &a.beta) {
                (Some(alpha), Some(beta)) => CounterexampleSpec::new(
                    k,
                    l,
                    m,
                    lbar,
                    artifact::parse_rational(alpha)?,
                    artifact::parse_rational(beta)?,
                )?,
                _ => CounterexampleSpec::with_default_scale(k, l, m, lbar)?,
            }
        }
    };
    let pair = build_pair(&spec)?;
    emit(&a.out, &artifact::pair_to_file(&pair))?;
    Ok(0)
}

fn run_cx_verify(a: CxVerifyArgs) -> Result<u8> {
    let pair = artifact::pair_from_file(&from_value(read_value(&a.input)?, &a.input, "pair")?)?;
    let verification = verify_pair(&pair, &SizeCap::new(a.max_cells))?;
    let passed = verification.all_passed();
    emit(
        &a.out,
        &artifact::verification_to_file(&verification, pair.spec().separable_vars()),
    )?;
    Ok(u8::from(!passed))
}

fn run_recover(a: RecoverArgs) -> Result<u8> {
    let cap = SizeCap::new(a.max_cells);
    let (dist, truth): (DistributionTensor<f64>, Option<MixtureParams<f64>>) =
        match load_input(&a.input)? {
            InputArtifact::Model(NumericModel::Exact(p)) => {
                let pf = p.to_float()?;
                (pf.mixture_distribution_capped(&cap)?, Some(pf))
            }
            InputArtifact::Model(NumericModel::Float(p)) => {
                (p.mixture_distribution_capped(&cap)?, Some(p))
            }
            InputArtifact::Tensor(NumericTensor::Exact(t)) => (t.to_float()?, None),
            InputArtifact::Tensor(NumericTensor::Float(t)) => (t, None),
        };
    let components = match (a.components, &truth) {
        (Some(k), _) => k,
        (None, Some(p)) => p.components(),
        (None, None) => {
            return Err(Error::Parse(
                "--K is required when the input is a tensor".into(),
            ))
        }
    };
    let mut cfg = RecoveryConfig::new(components, a.seed);
    cfg.starts = a.starts;
    let mut report = multi_start_recover(&dist, &cfg)?;
    if let Some(p) = &truth {
        report.verdict_hint = p.guarantee().ok();
    }
    emit(&a.out, &artifact::recovery_to_file(&report, &cfg))?;
    Ok(0)
}

fn run_probe(a: ProbeArgs) -> Result<u8> {
    let truth = match load_model(&a.input)? {
        NumericModel::Exact(p) => p.to_float()?,
        NumericModel::Float(p) => p,
    };
    let mut cfg = RecoveryConfig::new(truth.components(), a.seed);
    cfg.starts = a.starts;
    let report = identifiability_probe(&truth, &cfg)?;
    emit(&a.out, &artifact::probe_to_file(&report, &cfg))?;
    Ok(0)
}

enum InputArtifact {
    Model(NumericModel),
    Tensor(NumericTensor),
}

fn read_value(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: invalid JSON: {e}", path.display())))
}

fn from_value<T: serde::de::DeserializeOwned>(
    value: serde_json::Value,
    path: &Path,
    kind: &str,
) -> Result<T> {
    serde_json::from_value(value)
        .map_err(|e| Error::Parse(format!("{} is not a {kind} artifact: {e}", path.display())))
}

/// Splits model from tensor artifacts by schema string when present, falling
/// back to shape so hand-written files without a schema field still load.
fn load_input(path: &Path) -> Result<InputArtifact> {
    let value = read_value(path)?;
    let schema = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    let looks_like_model =
        schema == artifact::MODEL_SCHEMA || (schema.is_empty() && value.get("F").is_some());
    let looks_like_tensor =
        schema == artifact::TENSOR_SCHEMA || (schema.is_empty() && value.get("values").is_some());
    if looks_like_model {
        let file: ModelFile = from_value(value, path, "model")?;
        Ok(InputArtifact::Model(artifact::model_from_file(&file)?))
    } else if looks_like_tensor {
        let file: TensorFile = from_value(value, path, "tensor")?;
        Ok(InputArtifact::Tensor(artifact::tensor_from_file(&file)?))
    } else {
        Err(Error::Parse(format!(
            "{}: expected a model or tensor artifact",
            path.display()
        )))
    }
}

fn load_model(path: &Path) -> Result<NumericModel> {
    match load_input(path)? {
        InputArtifact::Model(m) => Ok(m),
        InputArtifact::Tensor(_) => Err(Error::Parse(format!(
            "{}: expected a model artifact, found a tensor",
            path.display()
        ))),
    }
}

fn polynomial_of(path: &Path) -> Result<MultilinearPolynomial<Rational>> {
    match load_input(path)? {
        InputArtifact::Model(NumericModel::Exact(p)) => MultilinearPolynomial::from_params(&p),
        InputArtifact::Tensor(NumericTensor::Exact(t)) => {
            MultilinearPolynomial::from_distribution(&t)
        }
        _ => Err(Error::Parse(format!(
            "{}: characteristic polynomials are exact; provide a rational-valued artifact",
            path.display()
        ))),
    }
}

fn emit<T: serde::Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::Parse(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
