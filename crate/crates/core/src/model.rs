//! Mixture parameters, distribution tensors, separability, and label-swap
//! (orbit) equivalence.
//!
//! A model has `K` components, `L` observed variables, and `M` states per
//! variable. Component `k` draws every variable independently, variable `l`
//! from the frequency vector `f[k][l]`, and components are mixed with weights
//! `w`. All indices are 0-based throughout the crate, including states.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::scalar::{within, Rational, Scalar};

/// Which parameter space a model is validated against.
///
/// * `Interior`: weights and frequencies strictly positive, both normalized.
/// * `Closure`: entries may be zero, still normalized.
/// * `Relaxed`: frequencies as in closure, weights merely nonzero with no
///   normalization constraint. Useful for algebraic manipulations; no
///   distribution is defined here.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValidityMode {
    Interior,
    Closure,
    Relaxed,
}

impl ValidityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidityMode::Interior => "interior",
            ValidityMode::Closure => "closure",
            ValidityMode::Relaxed => "relaxed",
        }
    }
}

impl fmt::Display for ValidityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValidityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(ValidityMode::Interior),
            "closure" => Ok(ValidityMode::Closure),
            "relaxed" => Ok(ValidityMode::Relaxed),
            other => Err(Error::Parse(format!(
                "unknown validity mode {other:?}; expected interior, closure, or relaxed"
            ))),
        }
    }
}

/// A probability vector over `M >= 2` states.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyVector<S> {
    entries: Vec<S>,
}

impl<S: Scalar> FrequencyVector<S> {
    pub fn new(entries: Vec<S>, mode: ValidityMode) -> Result<Self> {
        let fv = FrequencyVector { entries };
        fv.check_mode(mode)?;
        Ok(fv)
    }

    pub(crate) fn check_mode(&self, mode: ValidityMode) -> Result<()> {
        if self.entries.len() < 2 {
            return Err(Error::TooFewStates(self.entries.len()));
        }
        let mut sum = S::zero();
        for e in &self.entries {
            // Negated comparisons so NaN entries fail validation.
            if !(*e >= S::zero() && *e <= S::one()) {
                return Err(Error::InvalidFrequency(format!("entry {e} outside [0, 1]")));
            }
            if mode == ValidityMode::Interior && !(*e > S::zero()) {
                return Err(Error::InvalidFrequency(
                    "interior mode requires strictly positive entries".into(),
                ));
            }
            sum = sum + e.clone();
        }
        if !within(&sum, &S::one(), &S::normalization_slack()) {
            return Err(Error::InvalidFrequency(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[S] {
        &self.entries
    }

    pub fn entry(&self, state: usize) -> &S {
        &self.entries[state]
    }
}

/// A permutation of component labels, stored as the mapping `k -> π(k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentPermutation(Vec<usize>);

impl ComponentPermutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let k = mapping.len();
        let mut seen = vec![false; k];
        for &image in &mapping {
            if image >= k || seen[image] {
                return Err(Error::InvalidPermutation(format!(
                    "{mapping:?} is not a bijection on 0..{k}"
                )));
            }
            seen[image] = true;
        }
        Ok(ComponentPermutation(mapping))
    }

    pub fn identity(components: usize) -> Self {
        ComponentPermutation((0..components).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Image of component `k`.
    pub fn map(&self, k: usize) -> usize {
        self.0[k]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Identifiability verdict derived from separability counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Guarantee {
    /// At least `2K - 1` strongly separable variables: parameters are
    /// determined by the distribution up to component relabeling.
    IdentifiableStrong,
    /// At least `2K` weakly separable variables: same conclusion via a
    /// binary-projection argument.
    IdentifiableWeak,
    /// Neither threshold met; no conclusion (non-identifiable instances
    /// exist at these counts).
    NoGuarantee,
}

impl Guarantee {
    pub fn as_str(self) -> &'static str {
        match self {
            Guarantee::IdentifiableStrong => "identifiable-strong",
            Guarantee::IdentifiableWeak => "identifiable-weak",
            Guarantee::NoGuarantee => "no-guarantee",
        }
    }
}

impl fmt::Display for Guarantee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cap on tensor sizes, guarding against accidental exponential blow-ups.
#[derive(Clone, Copy, Debug)]
pub struct SizeCap {
    max_cells: u64,
}

impl Default for SizeCap {
    fn default() -> Self {
        SizeCap { max_cells: 1 << 20 }
    }
}

impl SizeCap {
    pub fn new(max_cells: u64) -> Self {
        SizeCap { max_cells }
    }

    pub fn max_cells(&self) -> u64 {
        self.max_cells
    }

    /// `states^vars` if it fits under the cap.
    pub fn cells(&self, states: usize, vars: usize) -> Result<usize> {
        let mut needed: u128 = 1;
        for _ in 0..vars {
            needed = needed.saturating_mul(states as u128);
            if needed > self.max_cells as u128 {
                return Err(Error::SizeCapExceeded {
                    needed,
                    cap: self.max_cells,
                });
            }
        }
        Ok(needed as usize)
    }

    /// `states^vars`, additionally requiring `components * states^vars`
    /// under the cap (the work bound for evaluating a mixture).
    pub fn work(&self, components: usize, states: usize, vars: usize) -> Result<usize> {
        let cells = self.cells(states, vars)?;
        let total = (components as u128).saturating_mul(cells as u128);
        if total > self.max_cells as u128 {
            return Err(Error::SizeCapExceeded {
                needed: total,
                cap: self.max_cells,
            });
        }
        Ok(cells)
    }
}

/// Full parameter set of a mixture of product measures.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParams<S> {
    /// `freqs[k][l]` is the frequency vector of variable `l` under
    /// component `k`. All vectors share the same number of states.
    freqs: Vec<Vec<FrequencyVector<S>>>,
    weights: Vec<S>,
    mode: ValidityMode,
}

impl<S: Scalar> MixtureParams<S> {
    pub fn new(
        freqs: Vec<Vec<FrequencyVector<S>>>,
        weights: Vec<S>,
        mode: ValidityMode,
    ) -> Result<Self> {
        let components = weights.len();
        if components == 0 {
            return Err(Error::DimensionMismatch(
                "need at least one component".into(),
            ));
        }
        if freqs.len() != components {
            return Err(Error::DimensionMismatch(format!(
                "{} weight(s) but {} frequency row(s)",
                components,
                freqs.len()
            )));
        }
        let vars = freqs[0].len();
        if vars == 0 {
            return Err(Error::DimensionMismatch(
                "need at least one variable".into(),
            ));
        }
        let states = freqs[0][0].states();
        for (k, row) in freqs.iter().enumerate() {
            if row.len() != vars {
                return Err(Error::DimensionMismatch(format!(
                    "component {k} has {} variable(s), expected {vars}",
                    row.len()
                )));
            }
            for (l, fv) in row.iter().enumerate() {
                if fv.states() != states {
                    return Err(Error::DimensionMismatch(format!(
                        "frequency vector ({k}, {l}) has {} states, expected {states}",
                        fv.states()
                    )));
                }
                fv.check_mode(mode)?;
            }
        }
        Self::check_weights(&weights, mode)?;
        Ok(MixtureParams {
            freqs,
            weights,
            mode,
        })
    }

    /// Builds frequency vectors from raw entries and validates everything.
    pub fn from_entries(
        rows: Vec<Vec<Vec<S>>>,
        weights: Vec<S>,
        mode: ValidityMode,
    ) -> Result<Self> {
        let freqs = rows
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|entries| FrequencyVector::new(entries, mode))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(freqs, weights, mode)
    }

    fn check_weights(weights: &[S], mode: ValidityMode) -> Result<()> {
        match mode {
            ValidityMode::Relaxed => {
                for w in weights {
                    if !(w.abs() > S::zero()) {
                        return Err(Error::InvalidWeights(
                            "relaxed mode requires nonzero weights".into(),
                        ));
                    }
                }
                Ok(())
            }
            ValidityMode::Interior | ValidityMode::Closure => {
                let mut sum = S::zero();
                for w in weights {
                    if !(*w >= S::zero()) {
                        return Err(Error::InvalidWeights(format!("weight {w} is negative")));
                    }
                    if mode == ValidityMode::Interior && !(*w > S::zero()) {
                        return Err(Error::InvalidWeights(
                            "interior mode requires strictly positive weights".into(),
                        ));
                    }
                    sum = sum + w.clone();
                }
                if !within(&sum, &S::one(), &S::normalization_slack()) {
                    return Err(Error::InvalidWeights(format!(
                        "weights sum to {sum}, expected 1"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn vars(&self) -> usize {
        self.freqs[0].len()
    }

    pub fn states(&self) -> usize {
        self.freqs[0][0].states()
    }

    pub fn mode(&self) -> ValidityMode {
        self.mode
    }

    pub fn freq(&self, component: usize, var: usize) -> &FrequencyVector<S> {
        &self.freqs[component][var]
    }

    pub fn weight(&self, component: usize) -> &S {
        &self.weights[component]
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.components() == other.components()
            && self.vars() == other.vars()
            && self.states() == other.states()
    }

    /// The mixture distribution as a dense tensor over all `M^L` outcomes.
    ///
    /// Cell for outcome `(m_0, .., m_{L-1})` holds
    /// `sum_k w_k * prod_l f[k][l][m_l]`. Undefined (an error) in relaxed
    /// mode. Uses the default [`SizeCap`].
    pub fn mixture_distribution(&self) -> Result<DistributionTensor<S>> {
        self.mixture_distribution_capped(&SizeCap::default())
    }

    pub fn mixture_distribution_capped(&self, cap: &SizeCap) -> Result<DistributionTensor<S>> {
        if self.mode == ValidityMode::Relaxed {
            return Err(Error::RelaxedModeUnsupported);
        }
        let cells = cap.work(self.components(), self.states(), self.vars())?;
        let states = self.states();
        let mut values = vec![S::zero(); cells];
        for k in 0..self.components() {
            // Expand the product one variable at a time; `acc` holds the
            // partial products over the first `l` variables in row-major
            // order (variable 0 slowest).
            let mut acc = vec![self.weights[k].clone()];
            for l in 0..self.vars() {
                let fv = &self.freqs[k][l];
                let mut next = Vec::with_capacity(acc.len() * states);
                for a in &acc {
                    for m in 0..states {
                        next.push(a.clone() * fv.entry(m).clone());
                    }
                }
                acc = next;
            }
            for (v, a) in values.iter_mut().zip(acc) {
                *v = v.clone() + a;
            }
        }
        DistributionTensor::new(states, self.vars(), values)
    }

    /// Relabels components: row `k` of the result is row `π(k)` of `self`,
    /// and likewise for weights.
    pub fn apply_permutation(&self, perm: &ComponentPermutation) -> Result<Self> {
        if perm.len() != self.components() {
            return Err(Error::DimensionMismatch(format!(
                "permutation on {} element(s), model has {} component(s)",
                perm.len(),
                self.components()
            )));
        }
        let freqs = perm
            .as_slice()
            .iter()
            .map(|&src| self.freqs[src].clone())
            .collect();
        let weights = perm
            .as_slice()
            .iter()
            .map(|&src| self.weights[src].clone())
            .collect();
        Ok(MixtureParams {
            freqs,
            weights,
            mode: self.mode,
        })
    }

    fn column_pairwise_distinct(&self, var: usize, state: usize) -> bool {
        let k = self.components();
        for k1 in 0..k {
            for k2 in (k1 + 1)..k {
                if self.freqs[k1][var].entry(state) == self.freqs[k2][var].entry(state) {
                    return false;
                }
            }
        }
        true
    }

    /// Variables whose frequencies are pairwise distinct across components
    /// in every state.
    pub fn strongly_separable(&self) -> BTreeSet<usize> {
        (0..self.vars())
            .filter(|&l| (0..self.states()).all(|m| self.column_pairwise_distinct(l, m)))
            .collect()
    }

    /// Variables with at least one state whose frequencies are pairwise
    /// distinct across components, mapped to the smallest such witness state.
    pub fn weakly_separable(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for l in 0..self.vars() {
            if let Some(m) = (0..self.states()).find(|&m| self.column_pairwise_distinct(l, m)) {
                out.insert(l, m);
            }
        }
        out
    }

    /// Identifiability verdict for an interior model: strongly separable
    /// count `>= 2K - 1` wins, else weakly separable count `>= 2K`, else no
    /// guarantee.
    pub fn guarantee(&self) -> Result<Guarantee> {
        if self.mode != ValidityMode::Interior {
            return Err(Error::InteriorRequired(self.mode.to_string()));
        }
        let k = self.components();
        if self.strongly_separable().len() >= 2 * k - 1 {
            Ok(Guarantee::IdentifiableStrong)
        } else if self.weakly_separable().len() >= 2 * k {
            Ok(Guarantee::IdentifiableWeak)
        } else {
            Ok(Guarantee::NoGuarantee)
        }
    }

    /// Embeds the model into a larger state space by appending zero-mass
    /// states. Returns the model unchanged when `target_states` equals the
    /// current count. Interior models become closure models (the new entries
    /// are zero); relaxed models stay relaxed.
    pub fn pad_states(&self, target_states: usize) -> Result<Self> {
        let states = self.states();
        if target_states < states {
            return Err(Error::DimensionMismatch(format!(
                "cannot pad from {states} down to {target_states} states"
            )));
        }
        if target_states == states {
            return Ok(self.clone());
        }
        let mode = match self.mode {
            ValidityMode::Relaxed => ValidityMode::Relaxed,
            _ => ValidityMode::Closure,
        };
        let freqs = self
            .freqs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|fv| {
                        let mut entries = fv.entries().to_vec();
                        entries.resize(target_states, S::zero());
                        FrequencyVector::new(entries, mode)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        MixtureParams::new(freqs, self.weights.clone(), mode)
    }
}

impl MixtureParams<Rational> {
    /// Explicit lossy conversion to the floating-point backend.
    pub fn to_float(&self) -> Result<MixtureParams<f64>> {
        let rows = self
            .freqs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|fv| fv.entries().iter().map(Scalar::to_f64_lossy).collect())
                    .collect()
            })
            .collect();
        let weights = self.weights.iter().map(Scalar::to_f64_lossy).collect();
        MixtureParams::from_entries(rows, weights, self.mode)
    }
}

/// Tests whether two models are equal up to a relabeling of components,
/// comparing entries with the given absolute tolerance. Returns a witness
/// permutation `π` with `a_k ≈ b_{π(k)}` (weights included) when one exists.
///
/// Exhaustive over all `K!` permutations; meant for small `K`.
pub fn orbit_equal<S: Scalar>(
    a: &MixtureParams<S>,
    b: &MixtureParams<S>,
    tolerance: &S,
) -> Result<Option<ComponentPermutation>> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(
            "orbit comparison needs matching K, L, M".into(),
        ));
    }
    let k = a.components();
    'perms: for perm in (0..k).permutations(k) {
        for (dst, &src) in perm.iter().enumerate() {
            if !within(a.weight(dst), b.weight(src), tolerance) {
                continue 'perms;
            }
            for l in 0..a.vars() {
                for m in 0..a.states() {
                    if !within(a.freq(dst, l).entry(m), b.freq(src, l).entry(m), tolerance) {
                        continue 'perms;
                    }
                }
            }
        }
        return Ok(Some(ComponentPermutation(perm)));
    }
    Ok(None)
}

/// Dense probability tensor over `M^L` outcomes, row-major with the first
/// variable slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionTensor<S> {
    states: usize,
    vars: usize,
    values: Vec<S>,
}

impl<S: Scalar> DistributionTensor<S> {
    pub fn new(states: usize, vars: usize, values: Vec<S>) -> Result<Self> {
        if states < 2 {
            return Err(Error::TooFewStates(states));
        }
        if vars == 0 {
            return Err(Error::DimensionMismatch(
                "need at least one variable".into(),
            ));
        }
        let expected = states
            .checked_pow(vars as u32)
            .ok_or(Error::SizeCapExceeded {
                needed: u128::MAX,
                cap: u64::MAX,
            })?;
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} value(s) but M^L = {expected}",
                values.len()
            )));
        }
        let mut sum = S::zero();
        for v in &values {
            if !(*v >= S::zero()) {
                return Err(Error::InvalidFrequency(format!(
                    "tensor entry {v} is negative"
                )));
            }
            sum = sum + v.clone();
        }
        if !within(&sum, &S::one(), &S::normalization_slack()) {
            return Err(Error::InvalidFrequency(format!(
                "tensor entries sum to {sum}, expected 1"
            )));
        }
        Ok(DistributionTensor {
            states,
            vars,
            values,
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flat_index(&self, outcome: &[usize]) -> Result<usize> {
        if outcome.len() != self.vars {
            return Err(Error::DimensionMismatch(format!(
                "outcome has {} coordinate(s), expected {}",
                outcome.len(),
                self.vars
            )));
        }
        let mut idx = 0usize;
        for &m in outcome {
            if m >= self.states {
                return Err(Error::StateOutOfRange {
                    state: m,
                    states: self.states,
                });
            }
            idx = idx * self.states + m;
        }
        Ok(idx)
    }

    /// Decodes a flat index back into per-variable states.
    pub fn outcome_of(&self, mut flat: usize) -> Vec<usize> {
        let mut outcome = vec![0usize; self.vars];
        for l in (0..self.vars).rev() {
            outcome[l] = flat % self.states;
            flat /= self.states;
        }
        outcome
    }

    pub fn value_at(&self, outcome: &[usize]) -> Result<&S> {
        Ok(&self.values[self.flat_index(outcome)?])
    }

    pub fn max_abs_deviation(&self, other: &Self) -> Result<S> {
        if self.states != other.states || self.vars != other.vars {
            return Err(Error::DimensionMismatch(
                "tensor comparison needs matching M and L".into(),
            ));
        }
        let mut max = S::zero();
        for (a, b) in self.values.iter().zip(&other.values) {
            let dev = (a.clone() - b.clone()).abs();
            if dev > max {
                max = dev;
            }
        }
        Ok(max)
    }

    /// First outcome (in row-major order) where the tensors differ exactly,
    /// with both values.
    pub fn first_difference(&self, other: &Self) -> Result<Option<(Vec<usize>, S, S)>> {
        if self.states != other.states || self.vars != other.vars {
            return Err(Error::DimensionMismatch(
                "tensor comparison needs matching M and L".into(),
            ));
        }
        for (flat, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            if a != b {
                return Ok(Some((self.outcome_of(flat), a.clone(), b.clone())));
            }
        }
        Ok(None)
    }
}

impl DistributionTensor<Rational> {
    /// Explicit lossy conversion to the floating-point backend.
    pub fn to_float(&self) -> Result<DistributionTensor<f64>> {
        DistributionTensor::new(
            self.states,
            self.vars,
            self.values.iter().map(Scalar::to_f64_lossy).collect(),
        )
    }
}
