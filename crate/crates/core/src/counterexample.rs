//! An explicit family of non-identifiable mixture pairs.
//!
//! For `K` components the family pairs two interior models that share one
//! mixture distribution while sitting in different label-swap orbits:
//!
//! * weights `w_k = C(2K-1, 2k) / 2^{2K-2}` (even binomials) versus
//!   `z_k = C(2K-1, 2k+1) / 2^{2K-2}` (odd binomials), `k = 0..K-1`;
//! * on the first `Lbar` variables, frequencies follow the arithmetic
//!   progression `alpha * shift + beta * state`, with even shifts `2k` in
//!   the base model and odd shifts `2k+1` in the shifted model;
//! * remaining variables are uniform and identical across components.
//!
//! Whenever `Lbar <= 2K-2`, every mixture moment of the two models agrees
//! because the relevant differences telescope into alternating binomial
//! sums of polynomials of degree `< 2K-1`, which vanish (a finite-difference
//! identity). With `Lbar = 2K-1` the leading alternating sum is
//! `(-1)^{2K-1} (2K-1)! alpha^{2K-1} != 0`, so the construction cannot be
//! pushed further: the threshold is sharp.
//!
//! Everything here is exact rational arithmetic.

use num::{BigInt, One, Signed, Zero};

use crate::charpoly::{moment_from_params, PartialAssignment};
use crate::error::{Error, Result};
use crate::model::{orbit_equal, MixtureParams, SizeCap, ValidityMode};
use crate::scalar::Rational;

fn binom(n: usize, k: usize) -> BigInt {
    num::integer::binomial(BigInt::from(n), BigInt::from(k))
}

fn rational_int(n: usize) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Dimensions and scale of one family member.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterexampleSpec {
    components: usize,
    vars: usize,
    states: usize,
    separable_vars: usize,
    alpha: Rational,
    beta: Rational,
}

/// All progression entries must stay strictly inside (0, 1) after the
/// residual last state is added; the binding constraint is the largest
/// shift, `2K - 1`.
fn feasible(components: usize, states: usize, alpha: &Rational, beta: &Rational) -> bool {
    if !alpha.is_positive() || !beta.is_positive() {
        return false;
    }
    let one = Rational::one();
    for shift in 0..=(2 * components - 1) {
        let mut sum = Rational::zero();
        for state in 1..states {
            sum += alpha * rational_int(shift) + beta * rational_int(state);
        }
        if sum >= one {
            return false;
        }
    }
    true
}

impl CounterexampleSpec {
    pub fn new(
        components: usize,
        vars: usize,
        states: usize,
        separable_vars: usize,
        alpha: Rational,
        beta: Rational,
    ) -> Result<Self> {
        if components < 2 {
            return Err(Error::InfeasibleSpec(format!(
                "need at least 2 components, got {components}"
            )));
        }
        if states < 2 {
            return Err(Error::TooFewStates(states));
        }
        if vars == 0 {
            return Err(Error::InfeasibleSpec("need at least one variable".into()));
        }
        let max_sep = (2 * components - 2).min(vars);
        if separable_vars == 0 || separable_vars > max_sep {
            return Err(Error::InfeasibleSpec(format!(
                "separable variable count must lie in [1, {max_sep}], got {separable_vars}"
            )));
        }
        if !feasible(components, states, &alpha, &beta) {
            return Err(Error::InfeasibleSpec(format!(
                "scale (alpha, beta) = ({alpha}, {beta}) pushes some frequency outside (0, 1)"
            )));
        }
        Ok(CounterexampleSpec {
            components,
            vars,
            states,
            separable_vars,
            alpha,
            beta,
        })
    }

    /// Spec with the automatically chosen feasible scale.
    pub fn with_default_scale(
        components: usize,
        vars: usize,
        states: usize,
        separable_vars: usize,
    ) -> Result<Self> {
        let (alpha, beta) = default_scale(components, separable_vars, states)?;
        Self::new(components, vars, states, separable_vars, alpha, beta)
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn separable_vars(&self) -> usize {
        self.separable_vars
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn beta(&self) -> &Rational {
        &self.beta
    }
}

/// A scale that always satisfies the feasibility constraints: start at
/// `alpha = beta = 1 / (4 M (2K + M))` and halve until the open constraints
/// hold (they always do for small enough positive values).
pub fn default_scale(
    components: usize,
    separable_vars: usize,
    states: usize,
) -> Result<(Rational, Rational)> {
    if components < 2 {
        return Err(Error::InfeasibleSpec(format!(
            "need at least 2 components, got {components}"
        )));
    }
    if states < 2 {
        return Err(Error::TooFewStates(states));
    }
    if separable_vars == 0 || separable_vars > 2 * components - 2 {
        return Err(Error::InfeasibleSpec(format!(
            "separable variable count must lie in [1, {}], got {separable_vars}",
            2 * components - 2
        )));
    }
    let denom = 4 * states * (2 * components + states);
    let mut scale = Rational::new(BigInt::one(), BigInt::from(denom));
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    while !feasible(components, states, &scale, &scale) {
        scale *= half.clone();
    }
    Ok((scale.clone(), scale))
}

/// The two parameter sets built from a spec. `base` carries even shifts,
/// `shifted` odd shifts; both are interior-mode and share one mixture
/// distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterexamplePair {
    spec: CounterexampleSpec,
    base: MixtureParams<Rational>,
    shifted: MixtureParams<Rational>,
}

impl CounterexamplePair {
    pub fn spec(&self) -> &CounterexampleSpec {
        &self.spec
    }

    pub fn base(&self) -> &MixtureParams<Rational> {
        &self.base
    }

    pub fn shifted(&self) -> &MixtureParams<Rational> {
        &self.shifted
    }
}

fn progression_row(
    shift: usize,
    states: usize,
    alpha: &Rational,
    beta: &Rational,
) -> Vec<Rational> {
    let mut row = Vec::with_capacity(states);
    let mut sum = Rational::zero();
    for state in 1..states {
        let v = alpha * rational_int(shift) + beta * rational_int(state);
        sum += v.clone();
        row.push(v);
    }
    row.push(Rational::one() - sum);
    row
}

fn uniform_row(states: usize) -> Vec<Rational> {
    vec![Rational::new(BigInt::one(), BigInt::from(states)); states]
}

pub fn build_pair(spec: &CounterexampleSpec) -> Result<CounterexamplePair> {
    let k = spec.components;
    let n = 2 * k - 1;
    let denom: BigInt = BigInt::one() << (2 * k - 2);

    let build_side = |parity: usize| -> Result<MixtureParams<Rational>> {
        let weights = (0..k)
            .map(|i| Rational::new(binom(n, 2 * i + parity), denom.clone()))
            .collect();
        let rows = (0..k)
            .map(|i| {
                (0..spec.vars)
                    .map(|l| {
                        if l < spec.separable_vars {
                            progression_row(2 * i + parity, spec.states, &spec.alpha, &spec.beta)
                        } else {
                            uniform_row(spec.states)
                        }
                    })
                    .collect()
            })
            .collect();
        MixtureParams::from_entries(rows, weights, ValidityMode::Interior)
    };

    Ok(CounterexamplePair {
        spec: spec.clone(),
        base: build_side(0)?,
        shifted: build_side(1)?,
    })
}

/// Exact entrywise comparison of the two mixture distributions.
pub fn verify_equal_distribution(pair: &CounterexamplePair, cap: &SizeCap) -> Result<bool> {
    let da = pair.base.mixture_distribution_capped(cap)?;
    let db = pair.shifted.mixture_distribution_capped(cap)?;
    Ok(da == db)
}

/// `sum_{i=0}^{2K-1} C(2K-1, i) (-1)^i prod_{m in states} (alpha i + beta m)`,
/// computed exactly.
///
/// The product over an empty `states` slice is 1. State labels here are the
/// 1-based progression multipliers, matching the frequency formula.
/// The sum vanishes whenever `states.len() <= 2K-2` (the product is a
/// polynomial in `i` of degree below `2K-1`, annihilated by the alternating
/// binomial sum) and is generically nonzero at length `2K-1`.
pub fn alternating_sum(
    components: usize,
    alpha: &Rational,
    beta: &Rational,
    states: &[usize],
) -> Rational {
    let n = 2 * components - 1;
    let mut total = Rational::zero();
    for i in 0..=n {
        let mut term = Rational::from_integer(binom(n, i));
        for &m in states {
            term *= alpha * rational_int(i) + beta * rational_int(m);
        }
        if i % 2 == 1 {
            total -= term;
        } else {
            total += term;
        }
    }
    total
}

/// Verifies the moment-matching reduction behind the family: if the two
/// models agree on every moment supported on the progression block with
/// states drawn from the non-residual range, their full distributions
/// agree. Both the premise (exhaustive moment sweep over all subsets of the
/// first `Lbar` variables) and the conclusion (tensor equality) are checked
/// exactly; returns their conjunction.
pub fn moment_reduction_check(pair: &CounterexamplePair, cap: &SizeCap) -> Result<bool> {
    let spec = &pair.spec;
    let lbar = spec.separable_vars;
    let m = spec.states;
    // Each progression variable is either unconstrained or pinned to one of
    // the M-1 non-residual states: M options per variable.
    let combos = cap.cells(m, lbar)?;
    let mut premise = true;
    'outer: for code in 0..combos {
        let mut rest = code;
        let mut assignment = PartialAssignment::new();
        for l in 0..lbar {
            let digit = rest % m;
            rest /= m;
            if digit > 0 {
                assignment.set(l, digit - 1);
            }
        }
        let a = moment_from_params(&pair.base, &assignment)?;
        let b = moment_from_params(&pair.shifted, &assignment)?;
        if a != b {
            premise = false;
            break 'outer;
        }
    }
    let conclusion = verify_equal_distribution(pair, cap)?;
    Ok(premise && conclusion)
}

/// Degenerate zero-separability variant: identical frequency rows with two
/// different weight splits. The mixture collapses to a single product
/// measure, so the distributions agree for trivial reasons while the
/// parameters sit in different orbits.
pub fn weight_split_pair(
    components: usize,
    vars: usize,
    states: usize,
) -> Result<(MixtureParams<Rational>, MixtureParams<Rational>)> {
    if components < 2 {
        return Err(Error::InfeasibleSpec(format!(
            "need at least 2 components, got {components}"
        )));
    }
    let rows: Vec<Vec<Vec<Rational>>> = vec![vec![uniform_row(states); vars]; components];
    let total = components * (components + 1) / 2;
    let skewed = (0..components)
        .map(|i| Rational::new(BigInt::from(i + 1), BigInt::from(total)))
        .collect();
    let even = vec![Rational::new(BigInt::one(), BigInt::from(components)); components];
    Ok((
        MixtureParams::from_entries(rows.clone(), skewed, ValidityMode::Interior)?,
        MixtureParams::from_entries(rows, even, ValidityMode::Interior)?,
    ))
}

/// One row of the alternating-sum table in a verification report.
#[derive(Clone, Debug, PartialEq)]
pub struct AltSumRow {
    /// Progression state labels (1-based multipliers), nondecreasing.
    pub states: Vec<usize>,
    pub value: Rational,
    /// Whether the finite-difference identity predicts zero here.
    pub expect_zero: bool,
}

impl AltSumRow {
    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn as_expected(&self) -> bool {
        self.expect_zero == self.is_zero()
    }
}

/// Full verification record for a constructed pair.
#[derive(Clone, Debug)]
pub struct PairVerification {
    pub distributions_equal: bool,
    /// First differing tensor cell (outcome, base value, shifted value),
    /// present only on failure.
    pub first_difference: Option<(Vec<usize>, Rational, Rational)>,
    /// No component relabeling maps one parameter set onto the other.
    pub orbit_inequivalent: bool,
    pub base_strong: usize,
    pub base_weak: usize,
    pub shifted_strong: usize,
    pub shifted_weak: usize,
    /// All four separability counts equal the spec's progression width.
    pub separability_matches: bool,
    /// Exhaustive moment sweep over the progression block agreed.
    pub moment_premise_equal: bool,
    /// Alternating sums for every state multiset up to length 2K-2, plus
    /// the sharpness row of length 2K-1.
    pub alternating_rows: Vec<AltSumRow>,
    /// Every row that should vanish does, and the sharpness row does not.
    pub alternating_ok: bool,
}

impl PairVerification {
    pub fn all_passed(&self) -> bool {
        self.distributions_equal
            && self.orbit_inequivalent
            && self.separability_matches
            && self.moment_premise_equal
            && self.alternating_ok
    }
}

/// Nondecreasing multisets of the given length over `1..=max_label`.
fn multisets(max_label: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![1usize; len];
    if len == 0 {
        return vec![vec![]];
    }
    loop {
        out.push(cur.clone());
        // Advance like an odometer that keeps entries nondecreasing.
        let mut pos = len;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if cur[pos] < max_label {
                cur[pos] += 1;
                let v = cur[pos];
                for slot in cur.iter_mut().skip(pos + 1) {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Runs every check on a pair and returns the full record.
pub fn verify_pair(pair: &CounterexamplePair, cap: &SizeCap) -> Result<PairVerification> {
    let spec = pair.spec();
    let da = pair.base.mixture_distribution_capped(cap)?;
    let db = pair.shifted.mixture_distribution_capped(cap)?;
    let first_difference = da.first_difference(&db)?;
    let distributions_equal = first_difference.is_none();

    let orbit_inequivalent = orbit_equal(&pair.base, &pair.shifted, &Rational::zero())?.is_none();

    let expected: std::collections::BTreeSet<usize> = (0..spec.separable_vars).collect();
    let base_strong_set = pair.base.strongly_separable();
    let shifted_strong_set = pair.shifted.strongly_separable();
    let base_weak_map = pair.base.weakly_separable();
    let shifted_weak_map = pair.shifted.weakly_separable();
    let separability_matches = base_strong_set == expected
        && shifted_strong_set == expected
        && base_weak_map
            .keys()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            == expected
        && shifted_weak_map
            .keys()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            == expected;

    let moment_premise_equal = moment_reduction_check(pair, cap)?;

    let max_label = (spec.states - 1).max(1);
    let mut alternating_rows = Vec::new();
    for len in 0..=(2 * spec.components - 2) {
        for states in multisets(max_label, len) {
            let value = alternating_sum(spec.components, &spec.alpha, &spec.beta, &states);
            alternating_rows.push(AltSumRow {
                states,
                value,
                expect_zero: true,
            });
        }
    }
    let sharp_states = vec![1usize; 2 * spec.components - 1];
    let sharp_value = alternating_sum(spec.components, &spec.alpha, &spec.beta, &sharp_states);
    alternating_rows.push(AltSumRow {
        states: sharp_states,
        value: sharp_value,
        expect_zero: false,
    });
    let alternating_ok = alternating_rows.iter().all(AltSumRow::as_expected);

    Ok(PairVerification {
        distributions_equal,
        first_difference,
        orbit_inequivalent,
        base_strong: base_strong_set.len(),
        base_weak: base_weak_map.len(),
        shifted_strong: shifted_strong_set.len(),
        shifted_weak: shifted_weak_map.len(),
        separability_matches,
        moment_premise_equal,
        alternating_rows,
        alternating_ok,
    })
}
