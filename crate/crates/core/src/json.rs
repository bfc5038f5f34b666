//! JSON schemas for every artifact the toolkit reads or writes.
//!
//! Exact numbers travel as canonical rational strings `"p/q"` (reduced,
//! positive denominator), float numbers as JSON numbers; a single artifact
//! never mixes the two. States and variable indices are 0-based on the
//! wire. Serialization is deterministic: struct fields keep declaration
//! order, maps are sorted, rationals are canonical.

use std::collections::BTreeMap;

use num::{BigInt, Zero};
use serde::{Deserialize, Serialize};

use crate::charpoly::MultilinearPolynomial;
use crate::counterexample::{build_pair, CounterexamplePair, CounterexampleSpec, PairVerification};
use crate::error::{Error, Result};
use crate::model::{DistributionTensor, MixtureParams, ValidityMode};
use crate::recovery::{ProbeReport, RecoveryConfig, RecoveryReport};
use crate::scalar::{Rational, Scalar};

pub const MODEL_SCHEMA: &str = "mixident.model/1";
pub const TENSOR_SCHEMA: &str = "mixident.tensor/1";
pub const POLY_SCHEMA: &str = "mixident.charpoly/1";
pub const SPEC_SCHEMA: &str = "mixident.cx-spec/1";
pub const PAIR_SCHEMA: &str = "mixident.cx-pair/1";
pub const VERIFY_SCHEMA: &str = "mixident.cx-verification/1";
pub const SEP_SCHEMA: &str = "mixident.separability/1";
pub const RECOVERY_SCHEMA: &str = "mixident.recovery/1";
pub const PROBE_SCHEMA: &str = "mixident.probe/1";
pub const COMPARE_SCHEMA: &str = "mixident.compare/1";

/// Canonical rational string `p/q` with `gcd(p, q) = 1` and `q > 0`
/// (the representation `Rational` maintains internally).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `p/q` or a bare integer `p`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let parse_int = |t: &str| -> Result<BigInt> {
        t.trim()
            .parse::<BigInt>()
            .map_err(|e| Error::Parse(format!("bad integer {t:?}: {e}")))
    };
    match s.split_once('/') {
        Some((num, den)) => {
            let n = parse_int(num)?;
            let d = parse_int(den)?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(parse_int(s)?)),
    }
}

/// A number on the wire: rational string or float.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonScalar {
    Text(String),
    Number(f64),
}

/// Either numeric backend, as read from a file.
pub enum NumericModel {
    Exact(MixtureParams<Rational>),
    Float(MixtureParams<f64>),
}

pub enum NumericTensor {
    Exact(DistributionTensor<Rational>),
    Float(DistributionTensor<f64>),
}

fn default_schema() -> String {
    String::new()
}

/// Model artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(rename = "K")]
    pub components: usize,
    #[serde(rename = "L")]
    pub vars: usize,
    #[serde(rename = "M")]
    pub states: usize,
    pub mode: String,
    pub w: Vec<JsonScalar>,
    #[serde(rename = "F")]
    pub freqs: Vec<Vec<Vec<JsonScalar>>>,
}

pub fn model_to_file(p: &MixtureParams<Rational>) -> ModelFile {
    ModelFile {
        schema: MODEL_SCHEMA.to_string(),
        components: p.components(),
        vars: p.vars(),
        states: p.states(),
        mode: p.mode().to_string(),
        w: p.weights()
            .iter()
            .map(|w| JsonScalar::Text(format_rational(w)))
            .collect(),
        freqs: (0..p.components())
            .map(|k| {
                (0..p.vars())
                    .map(|l| {
                        p.freq(k, l)
                            .entries()
                            .iter()
                            .map(|e| JsonScalar::Text(format_rational(e)))
                            .collect()
                    })
                    .collect()
            })
            .collect(),
    }
}

pub fn model_to_file_f64(p: &MixtureParams<f64>) -> ModelFile {
    ModelFile {
        schema: MODEL_SCHEMA.to_string(),
        components: p.components(),
        vars: p.vars(),
        states: p.states(),
        mode: p.mode().to_string(),
        w: p.weights().iter().map(|&w| JsonScalar::Number(w)).collect(),
        freqs: (0..p.components())
            .map(|k| {
                (0..p.vars())
                    .map(|l| {
                        p.freq(k, l)
                            .entries()
                            .iter()
                            .map(|&e| JsonScalar::Number(e))
                            .collect()
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Scans a scalar collection: `Ok(true)` if all text, `Ok(false)` if all
/// numbers, error on a mix.
fn all_text<'a>(scalars: impl Iterator<Item = &'a JsonScalar>) -> Result<bool> {
    let mut text = 0usize;
    let mut number = 0usize;
    for s in scalars {
        match s {
            JsonScalar::Text(_) => text += 1,
            JsonScalar::Number(_) => number += 1,
        }
    }
    match (text, number) {
        (_, 0) => Ok(true),
        (0, _) => Ok(false),
        _ => Err(Error::Parse(
            "artifact mixes rational strings and float numbers".into(),
        )),
    }
}

fn scalar_to_rational(s: &JsonScalar) -> Result<Rational> {
    match s {
        JsonScalar::Text(t) => parse_rational(t),
        JsonScalar::Number(_) => Err(Error::Parse("expected rational string".into())),
    }
}

fn scalar_to_f64(s: &JsonScalar) -> Result<f64> {
    match s {
        JsonScalar::Number(n) => Ok(*n),
        JsonScalar::Text(_) => Err(Error::Parse("expected float number".into())),
    }
}

pub fn model_from_file(file: &ModelFile) -> Result<NumericModel> {
    if file.w.len() != file.components || file.freqs.len() != file.components {
        return Err(Error::DimensionMismatch(format!(
            "declared K = {} does not match arrays",
            file.components
        )));
    }
    for row in &file.freqs {
        if row.len() != file.vars {
            return Err(Error::DimensionMismatch(format!(
                "declared L = {} does not match arrays",
                file.vars
            )));
        }
        for fv in row {
            if fv.len() != file.states {
                return Err(Error::DimensionMismatch(format!(
                    "declared M = {} does not match arrays",
                    file.states
                )));
            }
        }
    }
    let mode: ValidityMode = file.mode.parse()?;
    let scalars = file.w.iter().chain(file.freqs.iter().flatten().flatten());
    if all_text(scalars)? {
        let rows = file
            .freqs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|fv| fv.iter().map(scalar_to_rational).collect())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = file
            .w
            .iter()
            .map(scalar_to_rational)
            .collect::<Result<_>>()?;
        Ok(NumericModel::Exact(MixtureParams::from_entries(
            rows, weights, mode,
        )?))
    } else {
        let rows = file
            .freqs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|fv| fv.iter().map(scalar_to_f64).collect())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = file.w.iter().map(scalar_to_f64).collect::<Result<_>>()?;
        Ok(NumericModel::Float(MixtureParams::from_entries(
            rows, weights, mode,
        )?))
    }
}

/// Distribution tensor artifact; `values` in row-major order, first
/// variable slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(rename = "M")]
    pub states: usize,
    #[serde(rename = "L")]
    pub vars: usize,
    pub values: Vec<JsonScalar>,
}

pub fn tensor_to_file(d: &DistributionTensor<Rational>) -> TensorFile {
    TensorFile {
        schema: TENSOR_SCHEMA.to_string(),
        states: d.states(),
        vars: d.vars(),
        values: d
            .values()
            .iter()
            .map(|v| JsonScalar::Text(format_rational(v)))
            .collect(),
    }
}

pub fn tensor_to_file_f64(d: &DistributionTensor<f64>) -> TensorFile {
    TensorFile {
        schema: TENSOR_SCHEMA.to_string(),
        states: d.states(),
        vars: d.vars(),
        values: d.values().iter().map(|&v| JsonScalar::Number(v)).collect(),
    }
}

pub fn tensor_from_file(file: &TensorFile) -> Result<NumericTensor> {
    if all_text(file.values.iter())? {
        let values = file
            .values
            .iter()
            .map(scalar_to_rational)
            .collect::<Result<_>>()?;
        Ok(NumericTensor::Exact(DistributionTensor::new(
            file.states,
            file.vars,
            values,
        )?))
    } else {
        let values = file
            .values
            .iter()
            .map(scalar_to_f64)
            .collect::<Result<_>>()?;
        Ok(NumericTensor::Float(DistributionTensor::new(
            file.states,
            file.vars,
            values,
        )?))
    }
}

/// Characteristic-polynomial dump: subset mask (stringified integer) to
/// rational coefficient. Exact backend only, since the representation is
/// meant to round-trip bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(rename = "L")]
    pub vars: usize,
    pub coeffs: BTreeMap<String, String>,
}

pub fn poly_to_file(p: &MultilinearPolynomial<Rational>) -> PolyFile {
    PolyFile {
        schema: POLY_SCHEMA.to_string(),
        vars: p.vars(),
        coeffs: p
            .coeff_map()
            .into_iter()
            .map(|(mask, v)| (mask.to_string(), format_rational(&v)))
            .collect(),
    }
}

pub fn poly_from_file(file: &PolyFile) -> Result<MultilinearPolynomial<Rational>> {
    let size = 1usize
        .checked_shl(file.vars as u32)
        .filter(|_| file.vars <= crate::charpoly::MAX_POLY_VARS)
        .ok_or_else(|| Error::Parse(format!("variable count {} too large", file.vars)))?;
    if file.coeffs.len() != size {
        return Err(Error::Parse(format!(
            "{} coefficient(s), expected 2^L = {size}",
            file.coeffs.len()
        )));
    }
    let mut coeffs = vec![Rational::zero(); size];
    for (key, value) in &file.coeffs {
        let mask: usize = key
            .parse()
            .map_err(|e| Error::Parse(format!("bad subset mask {key:?}: {e}")))?;
        if mask >= size {
            return Err(Error::Parse(format!("subset mask {mask} out of range")));
        }
        coeffs[mask] = parse_rational(value)?;
    }
    MultilinearPolynomial::from_coeffs(file.vars, coeffs)
}

/// Counterexample-spec artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(rename = "K")]
    pub components: usize,
    #[serde(rename = "L")]
    pub vars: usize,
    #[serde(rename = "M")]
    pub states: usize,
    #[serde(rename = "Lbar")]
    pub separable_vars: usize,
    pub alpha: String,
    pub beta: String,
}

pub fn spec_to_file(spec: &CounterexampleSpec) -> SpecFile {
    SpecFile {
        schema: SPEC_SCHEMA.to_string(),
        components: spec.components(),
        vars: spec.vars(),
        states: spec.states(),
        separable_vars: spec.separable_vars(),
        alpha: format_rational(spec.alpha()),
        beta: format_rational(spec.beta()),
    }
}

pub fn spec_from_file(file: &SpecFile) -> Result<CounterexampleSpec> {
    CounterexampleSpec::new(
        file.components,
        file.vars,
        file.states,
        file.separable_vars,
        parse_rational(&file.alpha)?,
        parse_rational(&file.beta)?,
    )
}

/// Constructed pair artifact. The embedded models are display copies; on
/// load the pair is rebuilt from the spec and must match them exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub spec: SpecFile,
    pub base: ModelFile,
    pub shifted: ModelFile,
}

pub fn pair_to_file(pair: &CounterexamplePair) -> PairFile {
    PairFile {
        schema: PAIR_SCHEMA.to_string(),
        spec: spec_to_file(pair.spec()),
        base: model_to_file(pair.base()),
        shifted: model_to_file(pair.shifted()),
    }
}

pub fn pair_from_file(file: &PairFile) -> Result<CounterexamplePair> {
    let spec = spec_from_file(&file.spec)?;
    let pair = build_pair(&spec)?;
    let base = match model_from_file(&file.base)? {
        NumericModel::Exact(p) => p,
        NumericModel::Float(_) => {
            return Err(Error::Parse("pair models must be exact rationals".into()))
        }
    };
    let shifted = match model_from_file(&file.shifted)? {
        NumericModel::Exact(p) => p,
        NumericModel::Float(_) => {
            return Err(Error::Parse("pair models must be exact rationals".into()))
        }
    };
    if base != *pair.base() || shifted != *pair.shifted() {
        return Err(Error::Parse(
            "pair file models do not match the construction for its spec".into(),
        ));
    }
    Ok(pair)
}

/// Verification report artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceFile {
    pub outcome: Vec<usize>,
    pub base: String,
    pub shifted: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityCheckFile {
    pub expected: usize,
    pub base_strong: usize,
    pub base_weak: usize,
    pub shifted_strong: usize,
    pub shifted_weak: usize,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltRowFile {
    pub states: Vec<usize>,
    pub value: String,
    pub expect_zero: bool,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyFile {
    pub schema: String,
    pub all_passed: bool,
    pub distributions_equal: bool,
    pub first_difference: Option<DifferenceFile>,
    pub orbit_inequivalent: bool,
    pub separability: SeparabilityCheckFile,
    pub moment_premise_equal: bool,
    pub alternating_ok: bool,
    pub alternating_sums: Vec<AltRowFile>,
}

pub fn verification_to_file(v: &PairVerification, expected: usize) -> VerifyFile {
    VerifyFile {
        schema: VERIFY_SCHEMA.to_string(),
        all_passed: v.all_passed(),
        distributions_equal: v.distributions_equal,
        first_difference: v
            .first_difference
            .as_ref()
            .map(|(outcome, a, b)| DifferenceFile {
                outcome: outcome.clone(),
                base: format_rational(a),
                shifted: format_rational(b),
            }),
        orbit_inequivalent: v.orbit_inequivalent,
        separability: SeparabilityCheckFile {
            expected,
            base_strong: v.base_strong,
            base_weak: v.base_weak,
            shifted_strong: v.shifted_strong,
            shifted_weak: v.shifted_weak,
            matches: v.separability_matches,
        },
        moment_premise_equal: v.moment_premise_equal,
        alternating_ok: v.alternating_ok,
        alternating_sums: v
            .alternating_rows
            .iter()
            .map(|row| AltRowFile {
                states: row.states.clone(),
                value: format_rational(&row.value),
                expect_zero: row.expect_zero,
                ok: row.as_expected(),
            })
            .collect(),
    }
}

/// Separability report artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableFile {
    pub index: usize,
    pub strong: bool,
    pub weak_witness: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SepFile {
    pub schema: String,
    #[serde(rename = "K")]
    pub components: usize,
    #[serde(rename = "L")]
    pub vars: usize,
    #[serde(rename = "M")]
    pub states: usize,
    pub strong_count: usize,
    pub weak_count: usize,
    pub per_variable: Vec<VariableFile>,
    /// Present for interior models only.
    pub verdict: Option<String>,
}

pub fn sep_to_file<S: Scalar>(p: &MixtureParams<S>) -> SepFile {
    let strong = p.strongly_separable();
    let weak = p.weakly_separable();
    SepFile {
        schema: SEP_SCHEMA.to_string(),
        components: p.components(),
        vars: p.vars(),
        states: p.states(),
        strong_count: strong.len(),
        weak_count: weak.len(),
        per_variable: (0..p.vars())
            .map(|l| VariableFile {
                index: l,
                strong: strong.contains(&l),
                weak_witness: weak.get(&l).copied(),
            })
            .collect(),
        verdict: p.guarantee().ok().map(|g| g.to_string()),
    }
}

/// Recovery artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfigFile {
    #[serde(rename = "K")]
    pub components: usize,
    pub starts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub em_tol: f64,
    pub polish_max_iters: usize,
    pub polish_tol: f64,
    pub orbit_tol: f64,
    pub residual_filter: f64,
}

pub fn config_to_file(cfg: &RecoveryConfig) -> RecoveryConfigFile {
    RecoveryConfigFile {
        components: cfg.components,
        starts: cfg.starts,
        seed: cfg.seed,
        max_iters: cfg.max_iters,
        em_tol: cfg.em_tol,
        polish_max_iters: cfg.polish_max_iters,
        polish_tol: cfg.polish_tol,
        orbit_tol: cfg.orbit_tol,
        residual_filter: cfg.residual_filter,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub residual: f64,
    pub chain_seed: u64,
    pub em_iters: usize,
    pub polish_converged: bool,
    pub params: ModelFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryFile {
    pub schema: String,
    pub config: RecoveryConfigFile,
    pub best: usize,
    pub orbits: Vec<Vec<usize>>,
    /// Index of each orbit's representative solution.
    pub orbit_representatives: Vec<usize>,
    pub verdict_hint: Option<String>,
    pub solutions: Vec<SolutionFile>,
}

pub fn recovery_to_file(report: &RecoveryReport, cfg: &RecoveryConfig) -> RecoveryFile {
    RecoveryFile {
        schema: RECOVERY_SCHEMA.to_string(),
        config: config_to_file(cfg),
        best: report.best,
        orbits: report.orbits.clone(),
        orbit_representatives: report.orbits.iter().map(|o| o[0]).collect(),
        verdict_hint: report.verdict_hint.map(|g| g.to_string()),
        solutions: report
            .solutions
            .iter()
            .map(|s| SolutionFile {
                residual: s.residual,
                chain_seed: s.chain_seed,
                em_iters: s.em_iters,
                polish_converged: s.polish_converged,
                params: model_to_file_f64(&s.params),
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeFile {
    pub schema: String,
    pub unique_orbit: bool,
    pub orbits_found: usize,
    pub verdict: String,
    pub recovery: RecoveryFile,
}

pub fn probe_to_file(report: &ProbeReport, cfg: &RecoveryConfig) -> ProbeFile {
    ProbeFile {
        schema: PROBE_SCHEMA.to_string(),
        unique_orbit: report.unique_orbit,
        orbits_found: report.orbits_found,
        verdict: report.verdict.to_string(),
        recovery: recovery_to_file(&report.recovery, cfg),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareFile {
    pub schema: String,
    pub equal: bool,
}

pub fn compare_to_file(equal: bool) -> CompareFile {
    CompareFile {
        schema: COMPARE_SCHEMA.to_string(),
        equal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rational_text_is_canonical() {
        assert_eq!(format_rational(&rat(2, 4)), "1/2");
        assert_eq!(format_rational(&rat(3, -6)), "-1/2");
        assert_eq!(format_rational(&rat(5, 1)), "5/1");
        assert_eq!(parse_rational("6/8").unwrap(), rat(3, 4));
        assert_eq!(parse_rational("-2/-4").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("7").unwrap(), rat(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("a/b").is_err());
    }

    #[test]
    fn model_roundtrip_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let p = crate::sample::random_interior_model(3, 2, 3, 1000, &mut rng).unwrap();
        let file = model_to_file(&p);
        let text = serde_json::to_string(&file).unwrap();
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        match model_from_file(&back).unwrap() {
            NumericModel::Exact(q) => assert_eq!(p, q),
            NumericModel::Float(_) => panic!("expected exact model"),
        }
    }

    #[test]
    fn model_roundtrip_float() {
        let p = MixtureParams::from_entries(
            vec![vec![vec![0.25, 0.75]], vec![vec![0.5, 0.5]]],
            vec![0.4, 0.6],
            ValidityMode::Interior,
        )
        .unwrap();
        let file = model_to_file_f64(&p);
        let text = serde_json::to_string(&file).unwrap();
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        match model_from_file(&back).unwrap() {
            NumericModel::Float(q) => assert_eq!(p, q),
            NumericModel::Exact(_) => panic!("expected float model"),
        }
    }

    #[test]
    fn mixed_scalars_rejected() {
        let text = r#"{
            "K": 1, "L": 1, "M": 2, "mode": "interior",
            "w": ["1/1"],
            "F": [[[0.5, "1/2"]]]
        }"#;
        let file: ModelFile = serde_json::from_str(text).unwrap();
        assert!(model_from_file(&file).is_err());
    }

    #[test]
    fn dimension_lies_rejected() {
        let text = r#"{
            "K": 2, "L": 1, "M": 2, "mode": "interior",
            "w": ["1/1"],
            "F": [[["1/2", "1/2"]]]
        }"#;
        let file: ModelFile = serde_json::from_str(text).unwrap();
        assert!(matches!(
            model_from_file(&file),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn tensor_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let d = crate::sample::random_interior_model(2, 2, 3, 1000, &mut rng)
            .unwrap()
            .mixture_distribution()
            .unwrap();
        let text = serde_json::to_string(&tensor_to_file(&d)).unwrap();
        let back: TensorFile = serde_json::from_str(&text).unwrap();
        match tensor_from_file(&back).unwrap() {
            NumericTensor::Exact(e) => assert_eq!(d, e),
            NumericTensor::Float(_) => panic!("expected exact tensor"),
        }
    }

    #[test]
    fn poly_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let p = crate::sample::random_interior_model(2, 4, 2, 1000, &mut rng).unwrap();
        let c = MultilinearPolynomial::from_params(&p).unwrap();
        let text = serde_json::to_string(&poly_to_file(&c)).unwrap();
        let back: PolyFile = serde_json::from_str(&text).unwrap();
        assert_eq!(poly_from_file(&back).unwrap(), c);
    }

    #[test]
    fn poly_file_validation() {
        let mut coeffs = BTreeMap::new();
        coeffs.insert("0".to_string(), "1/1".to_string());
        let short = PolyFile {
            schema: POLY_SCHEMA.into(),
            vars: 1,
            coeffs,
        };
        assert!(poly_from_file(&short).is_err());
    }

    #[test]
    fn pair_roundtrip_and_tamper_detection() {
        let spec = CounterexampleSpec::with_default_scale(2, 3, 2, 2).unwrap();
        let pair = build_pair(&spec).unwrap();
        let file = pair_to_file(&pair);
        let text = serde_json::to_string(&file).unwrap();
        let back: PairFile = serde_json::from_str(&text).unwrap();
        assert_eq!(pair_from_file(&back).unwrap(), pair);

        let mut tampered = file.clone();
        tampered.base.w[0] = JsonScalar::Text("1/3".to_string());
        assert!(pair_from_file(&tampered).is_err());
    }

    #[test]
    fn sep_report_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let p = crate::sample::random_separated_model(2, 3, 2, 3, 1000, 100, &mut rng).unwrap();
        let report = sep_to_file(&p);
        assert_eq!(report.strong_count, 3);
        assert_eq!(report.verdict.as_deref(), Some("identifiable-strong"));
        assert_eq!(report.per_variable.len(), 3);
        assert!(report.per_variable.iter().all(|v| v.strong));
    }

    #[test]
    fn serialization_is_deterministic() {
        let spec = CounterexampleSpec::with_default_scale(2, 2, 2, 2).unwrap();
        let pair = build_pair(&spec).unwrap();
        let report =
            crate::counterexample::verify_pair(&pair, &crate::model::SizeCap::default()).unwrap();
        let a = serde_json::to_string(&verification_to_file(&report, 2)).unwrap();
        let b = serde_json::to_string(&verification_to_file(&report, 2)).unwrap();
        assert_eq!(a, b);
    }
}
