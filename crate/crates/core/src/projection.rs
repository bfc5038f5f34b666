//! Binary projections: collapse each M-ary variable onto "selected state"
//! versus "everything else".
//!
//! Projection commutes with taking the mixture distribution, so facts proved
//! for binary models (via characteristic polynomials) transfer to general M.
//! Selecting a weak-separability witness state per variable turns weakly
//! separable variables into strongly separable binary ones.

use crate::charpoly::MultilinearPolynomial;
use crate::error::{Error, Result};
use crate::model::{DistributionTensor, FrequencyVector, MixtureParams, SizeCap};
use crate::scalar::Scalar;

/// Chooses one state per variable; variable `l` maps onto "state equals
/// `choice[l]`" versus its complement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSelector {
    choice: Vec<usize>,
}

impl StateSelector {
    pub fn new(choice: Vec<usize>) -> Result<Self> {
        if choice.is_empty() {
            return Err(Error::DimensionMismatch(
                "selector needs at least one variable".into(),
            ));
        }
        Ok(StateSelector { choice })
    }

    /// The selector picking the same state for every variable.
    pub fn constant(vars: usize, state: usize) -> Result<Self> {
        Self::new(vec![state; vars])
    }

    pub fn vars(&self) -> usize {
        self.choice.len()
    }

    pub fn choice(&self, var: usize) -> usize {
        self.choice[var]
    }

    pub fn choices(&self) -> &[usize] {
        &self.choice
    }

    fn check(&self, vars: usize, states: usize) -> Result<()> {
        if self.choice.len() != vars {
            return Err(Error::DimensionMismatch(format!(
                "selector over {} variable(s), input has {vars}",
                self.choice.len()
            )));
        }
        for &m in &self.choice {
            if m >= states {
                return Err(Error::StateOutOfRange { state: m, states });
            }
        }
        Ok(())
    }
}

/// Binary model with `f'[k][l][0] = f[k][l][sel(l)]` and the complement in
/// state 1. Weights and validity mode carry over unchanged.
pub fn project_params<S: Scalar>(
    params: &MixtureParams<S>,
    sel: &StateSelector,
) -> Result<MixtureParams<S>> {
    sel.check(params.vars(), params.states())?;
    let mode = params.mode();
    let mut rows = Vec::with_capacity(params.components());
    for k in 0..params.components() {
        let mut row = Vec::with_capacity(params.vars());
        for l in 0..params.vars() {
            let kept = params.freq(k, l).entry(sel.choice(l)).clone();
            let rest = S::one() - kept.clone();
            row.push(FrequencyVector::new(vec![kept, rest], mode)?);
        }
        rows.push(row);
    }
    MixtureParams::new(rows, params.weights().to_vec(), mode)
}

/// Binary tensor where outcome bit 0 at variable `l` collects the mass of
/// all M-ary outcomes with `m_l = sel(l)`, bit 1 the rest. Total mass is
/// preserved.
pub fn project_distribution<S: Scalar>(
    dist: &DistributionTensor<S>,
    sel: &StateSelector,
) -> Result<DistributionTensor<S>> {
    sel.check(dist.vars(), dist.states())?;
    let vars = dist.vars();
    let mut values = vec![S::zero(); 1 << vars];
    for (flat, v) in dist.values().iter().enumerate() {
        let outcome = dist.outcome_of(flat);
        let mut target = 0usize;
        for (l, &m) in outcome.iter().enumerate() {
            target <<= 1;
            if m != sel.choice(l) {
                target |= 1;
            }
        }
        values[target] = values[target].clone() + v.clone();
    }
    DistributionTensor::new(2, vars, values)
}

/// Checks that two models with equal mixture distributions also have equal
/// projected characteristic polynomials under `sel`.
///
/// The hypothesis is verified here in exact arithmetic rather than trusted:
/// unequal input distributions are an error, not a `false`.
pub fn projected_charpoly_match<S: Scalar>(
    params_a: &MixtureParams<S>,
    params_b: &MixtureParams<S>,
    sel: &StateSelector,
    cap: &SizeCap,
) -> Result<bool> {
    if !params_a.same_shape(params_b) {
        return Err(Error::DimensionMismatch(
            "projected comparison needs matching K, L, M".into(),
        ));
    }
    let da = params_a.mixture_distribution_capped(cap)?;
    let db = params_b.mixture_distribution_capped(cap)?;
    if da != db {
        return Err(Error::DistributionsDiffer);
    }
    let ca = MultilinearPolynomial::from_params(&project_params(params_a, sel)?)?;
    let cb = MultilinearPolynomial::from_params(&project_params(params_b, sel)?)?;
    ca.identical(&cb)
}
