//! Exact and numeric identifiability analysis for finite mixtures of
//! finite product measures.
//!
//! A model has `K` components, `L` observed variables, and `M` states per
//! variable: each component draws every variable independently from its
//! own per-variable frequency vector, and the mixture combines components
//! with weights `w`. The crate provides:
//!
//! * parameter containers over exact rationals or `f64` ([`MixtureParams`],
//!   [`DistributionTensor`]), validity checking, component relabeling, and
//!   mixture distributions;
//! * separability analysis (which variables distinguish all components in
//!   every state, or in at least one state) and the resulting
//!   identifiability [`Guarantee`];
//! * the binary-case characteristic polynomial
//!   ([`MultilinearPolynomial`]): a multilinear invariant whose
//!   coefficients are subset moments and which matches if and only if the
//!   mixture distributions match;
//! * projections of many-state models onto binary ones ([`StateSelector`],
//!   [`project_params`], [`project_distribution`]) that commute with
//!   taking distributions;
//! * an explicit family of pairs of distinct interior models sharing one
//!   mixture distribution ([`CounterexampleSpec`], [`build_pair`],
//!   [`verify_pair`]), showing the separability thresholds are sharp;
//! * numeric parameter recovery from a known mixture distribution
//!   (population EM plus a projected-gradient polish, multi-start, orbit
//!   clustering) and an [`identifiability_probe`] summarizing whether all
//!   good fits agree up to relabeling;
//! * JSON (de)serialization for every artifact ([`json`]).
//!
//! States and variables are 0-based everywhere, including on the wire.
//! All randomized entry points take explicit seeds and are deterministic.

// Validation deliberately writes `!(x > 0)` instead of `x <= 0`: for
// floating-point scalars the negated form also rejects NaN, so malformed
// input fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charpoly;
pub mod counterexample;
pub mod error;
pub mod json;
pub mod model;
pub mod projection;
pub mod recovery;
pub mod sample;
pub mod scalar;

pub use charpoly::{
    marginal_moment, moment_from_params, MultilinearPolynomial, PartialAssignment, MAX_POLY_VARS,
};
pub use counterexample::{
    alternating_sum, build_pair, default_scale, moment_reduction_check, verify_equal_distribution,
    verify_pair, weight_split_pair, AltSumRow, CounterexamplePair, CounterexampleSpec,
    PairVerification,
};
pub use error::{Error, Result};
pub use model::{
    orbit_equal, ComponentPermutation, DistributionTensor, FrequencyVector, Guarantee,
    MixtureParams, SizeCap, ValidityMode,
};
pub use projection::{
    project_distribution, project_params, projected_charpoly_match, StateSelector,
};
pub use recovery::{
    cross_entropy, em_step, identifiability_probe, multi_start_recover, polish, refine, residual,
    run_em, PolishOutcome, ProbeReport, RecoveryConfig, RecoveryReport, Solution, FREQUENCY_FLOOR,
};
pub use sample::{random_interior_model, random_separated_model, seeded_rng};
pub use scalar::{rat, Rational, Scalar};
