//! Characteristic polynomials of binary mixtures and subset/marginal moments.
//!
//! For a binary model (`M = 2`) the polynomial
//! `C(x_0..x_{L-1}) = sum_k w_k * prod_l (x_l - f[k][l][0])`
//! determines, and is determined by, the mixture distribution. We store it
//! through its subset-moment coefficients
//! `s_I = sum_k w_k * prod_{l in I} f[k][l][0]`,
//! indexed by `L`-bit masks (bit `l` set means variable `l` is in `I`).
//! Two binary models share a distribution exactly when their coefficient
//! maps agree, which turns distribution equality into an exact, finite
//! polynomial-identity test.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{DistributionTensor, MixtureParams};
use crate::scalar::Scalar;

/// Dense storage keeps all `2^L` coefficients; identity testing needs every
/// one of them, so there is no point in sparsity. The cap keeps accidental
/// huge `L` from allocating gigabytes.
pub const MAX_POLY_VARS: usize = 24;

/// A multilinear polynomial in `L` variables, represented by its
/// subset-moment coefficients `s_I`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultilinearPolynomial<S> {
    vars: usize,
    /// `coeffs[mask]` is `s_I` for the subset with bit `l` set iff `l ∈ I`.
    coeffs: Vec<S>,
}

fn check_vars(vars: usize) -> Result<()> {
    if vars == 0 {
        return Err(Error::DimensionMismatch(
            "need at least one variable".into(),
        ));
    }
    if vars > MAX_POLY_VARS {
        return Err(Error::SizeCapExceeded {
            needed: 1u128 << vars.min(127),
            cap: 1 << MAX_POLY_VARS,
        });
    }
    Ok(())
}

/// Tensor cell for a binary outcome tuple -> mask of variables at state 0.
///
/// The tensor is row-major with variable 0 slowest, so variable `l`
/// contributes bit `vars - 1 - l` of the flat index; the mask uses bit `l`
/// directly and flags state 0.
fn mask_of_flat(flat: usize, vars: usize) -> usize {
    let mut mask = 0usize;
    for l in 0..vars {
        if (flat >> (vars - 1 - l)) & 1 == 0 {
            mask |= 1 << l;
        }
    }
    mask
}

fn flat_of_mask(mask: usize, vars: usize) -> usize {
    let mut flat = 0usize;
    for l in 0..vars {
        if (mask >> l) & 1 == 0 {
            flat |= 1 << (vars - 1 - l);
        }
    }
    flat
}

impl<S: Scalar> MultilinearPolynomial<S> {
    /// Builds a polynomial directly from coefficients, `coeffs[mask] = s_I`.
    pub fn from_coeffs(vars: usize, coeffs: Vec<S>) -> Result<Self> {
        check_vars(vars)?;
        if coeffs.len() != 1 << vars {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficient(s) but 2^L = {}",
                coeffs.len(),
                1usize << vars
            )));
        }
        Ok(MultilinearPolynomial { vars, coeffs })
    }

    /// Subset moments of a binary model: `s_I = sum_k w_k prod_{l in I}
    /// f[k][l][0]`. Accepts any validity mode; relaxed models simply give
    /// `s_∅ != 1`.
    pub fn from_params(params: &MixtureParams<S>) -> Result<Self> {
        if params.states() != 2 {
            return Err(Error::NotBinary(params.states()));
        }
        let vars = params.vars();
        check_vars(vars)?;
        let size = 1usize << vars;
        let mut coeffs = vec![S::zero(); size];
        let mut prod = vec![S::zero(); size];
        for k in 0..params.components() {
            // prod[mask] = w_k * prod_{l in mask} f[k][l][0], filled in
            // increasing mask order so the lowest set bit can be peeled off.
            prod[0] = params.weight(k).clone();
            for mask in 1..size {
                let low = mask.trailing_zeros() as usize;
                prod[mask] = prod[mask & (mask - 1)].clone() * params.freq(k, low).entry(0).clone();
            }
            for (c, p) in coeffs.iter_mut().zip(&prod) {
                *c = c.clone() + p.clone();
            }
        }
        Ok(MultilinearPolynomial { vars, coeffs })
    }

    /// Subset moments read off a binary distribution tensor:
    /// `s_I` is the total mass of outcomes whose state-0 set contains `I`.
    pub fn from_distribution(dist: &DistributionTensor<S>) -> Result<Self> {
        if dist.states() != 2 {
            return Err(Error::NotBinary(dist.states()));
        }
        let vars = dist.vars();
        check_vars(vars)?;
        let size = 1usize << vars;
        let mut coeffs = vec![S::zero(); size];
        for (flat, v) in dist.values().iter().enumerate() {
            coeffs[mask_of_flat(flat, vars)] = v.clone();
        }
        // In-place superset-sum (zeta) transform.
        for l in 0..vars {
            let bit = 1usize << l;
            for mask in 0..size {
                if mask & bit == 0 {
                    coeffs[mask] = coeffs[mask].clone() + coeffs[mask | bit].clone();
                }
            }
        }
        Ok(MultilinearPolynomial { vars, coeffs })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn coeff(&self, mask: usize) -> &S {
        &self.coeffs[mask]
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    /// Coefficient map keyed by subset mask, for serialization.
    pub fn coeff_map(&self) -> BTreeMap<usize, S> {
        self.coeffs.iter().cloned().enumerate().collect()
    }

    /// Exact polynomial identity: every coefficient equal.
    pub fn identical(&self, other: &Self) -> Result<bool> {
        if self.vars != other.vars {
            return Err(Error::DimensionMismatch(format!(
                "polynomials over {} vs {} variable(s)",
                self.vars, other.vars
            )));
        }
        Ok(self.coeffs == other.coeffs)
    }

    /// Evaluates `sum_I (-1)^{|I|} s_I prod_{l not in I} x_l`.
    pub fn evaluate(&self, x: &[S]) -> Result<S> {
        if x.len() != self.vars {
            return Err(Error::DimensionMismatch(format!(
                "{} point coordinate(s) for {} variable(s)",
                x.len(),
                self.vars
            )));
        }
        let mut total = S::zero();
        for (mask, s) in self.coeffs.iter().enumerate() {
            let mut term = s.clone();
            for (l, xl) in x.iter().enumerate() {
                if mask & (1 << l) == 0 {
                    term = term * xl.clone();
                }
            }
            if (mask.count_ones() & 1) == 1 {
                total = total - term;
            } else {
                total = total + term;
            }
        }
        Ok(total)
    }

    /// Inverts the subset-moment map back into a binary tensor via
    /// inclusion-exclusion: the cell with state-0 set `J` receives
    /// `sum_{I ⊇ J} (-1)^{|I| - |J|} s_I`.
    ///
    /// Enumerates supersets directly, which keeps this an independent
    /// inverse of the zeta transform used in `from_distribution`.
    pub fn reconstruct_distribution(&self) -> Result<DistributionTensor<S>> {
        let size = 1usize << self.vars;
        let full = size - 1;
        let mut values = vec![S::zero(); size];
        for base in 0..size {
            let free = full & !base;
            let mut acc = S::zero();
            let mut sub = free;
            loop {
                let term = self.coeffs[base | sub].clone();
                if (sub.count_ones() & 1) == 1 {
                    acc = acc - term;
                } else {
                    acc = acc + term;
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & free;
            }
            values[flat_of_mask(base, self.vars)] = acc;
        }
        DistributionTensor::new(2, self.vars, values)
    }
}

/// A partial outcome: chosen states for a subset of the variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialAssignment {
    entries: BTreeMap<usize, usize>,
}

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        PartialAssignment {
            entries: pairs.into_iter().collect(),
        }
    }

    pub fn set(&mut self, var: usize, state: usize) {
        self.entries.insert(var, state);
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().map(|(&l, &m)| (l, m))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn check(&self, vars: usize, states: usize) -> Result<()> {
        for (l, m) in self.entries() {
            if l >= vars {
                return Err(Error::VarOutOfRange { var: l, vars });
            }
            if m >= states {
                return Err(Error::StateOutOfRange { state: m, states });
            }
        }
        Ok(())
    }
}

/// Total mass of all outcomes extending the assignment. Works for any `M`.
pub fn marginal_moment<S: Scalar>(
    dist: &DistributionTensor<S>,
    assignment: &PartialAssignment,
) -> Result<S> {
    assignment.check(dist.vars(), dist.states())?;
    let states = dist.states();
    // stride of variable l in the flat index
    let mut strides = vec![1usize; dist.vars()];
    for l in (0..dist.vars() - 1).rev() {
        strides[l] = strides[l + 1] * states;
    }
    let mut total = S::zero();
    'cells: for (flat, v) in dist.values().iter().enumerate() {
        for (l, m) in assignment.entries() {
            if (flat / strides[l]) % states != m {
                continue 'cells;
            }
        }
        total = total + v.clone();
    }
    Ok(total)
}

/// The same moment straight from parameters:
/// `sum_k w_k prod_{(l, m) in assignment} f[k][l][m]`; the empty product
/// is 1, so the empty assignment returns the weight total.
pub fn moment_from_params<S: Scalar>(
    params: &MixtureParams<S>,
    assignment: &PartialAssignment,
) -> Result<S> {
    assignment.check(params.vars(), params.states())?;
    let mut total = S::zero();
    for k in 0..params.components() {
        let mut prod = params.weight(k).clone();
        for (l, m) in assignment.entries() {
            prod = prod * params.freq(k, l).entry(m).clone();
        }
        total = total + prod;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ValidityMode;
    use crate::scalar::{rat, Rational};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: s_I by direct summation over components and
    /// explicit subset iteration, no shared code with `from_params`.
    fn subset_moment_oracle(p: &MixtureParams<Rational>, mask: usize) -> Rational {
        let mut total = rat(0, 1);
        for k in 0..p.components() {
            let mut prod = p.weight(k).clone();
            for l in 0..p.vars() {
                if mask & (1 << l) != 0 {
                    prod *= p.freq(k, l).entry(0).clone();
                }
            }
            total += prod;
        }
        total
    }

    fn random_binary(k: usize, l: usize, rng: &mut ChaCha8Rng) -> MixtureParams<Rational> {
        crate::sample::random_interior_model(k, l, 2, 1000, rng).unwrap()
    }

    #[test]
    fn empty_subset_moment_is_weight_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_binary(3, 4, &mut rng);
        let c = MultilinearPolynomial::from_params(&p).unwrap();
        assert_eq!(*c.coeff(0), rat(1, 1));
    }

    #[test]
    fn singleton_moment_symmetric_average() {
        // w = (1/2, 1/2), f[0][0][0] = 1/4, f[1][0][0] = 3/4 -> s_{0} = 1/2.
        let p = MixtureParams::from_entries(
            vec![
                vec![vec![rat(1, 4), rat(3, 4)]],
                vec![vec![rat(3, 4), rat(1, 4)]],
            ],
            vec![rat(1, 2), rat(1, 2)],
            ValidityMode::Interior,
        )
        .unwrap();
        let c = MultilinearPolynomial::from_params(&p).unwrap();
        assert_eq!(*c.coeff(0b1), rat(1, 2));
    }

    #[test]
    fn params_coefficients_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = random_binary(3, 4, &mut rng);
        let c = MultilinearPolynomial::from_params(&p).unwrap();
        for mask in 0..(1usize << 4) {
            assert_eq!(
                *c.coeff(mask),
                subset_moment_oracle(&p, mask),
                "mask {mask:#b}"
            );
        }
    }

    #[test]
    fn rejects_nonbinary_and_bad_sizes() {
        let p = MixtureParams::from_entries(
            vec![vec![vec![rat(1, 3), rat(1, 3), rat(1, 3)]]],
            vec![rat(1, 1)],
            ValidityMode::Interior,
        )
        .unwrap();
        assert!(matches!(
            MultilinearPolynomial::from_params(&p),
            Err(Error::NotBinary(3))
        ));
        assert!(MultilinearPolynomial::from_coeffs(2, vec![rat(1, 1); 3]).is_err());
        assert!(MultilinearPolynomial::<Rational>::from_coeffs(MAX_POLY_VARS + 1, vec![]).is_err());
    }

    #[test]
    fn uniform_tensor_moments() {
        // Independent fair coins: s_I = 2^{-|I|}.
        let l = 4;
        let values = vec![rat(1, 1 << l); 1 << l];
        let d = DistributionTensor::new(2, l, values).unwrap();
        let c = MultilinearPolynomial::from_distribution(&d).unwrap();
        for mask in 0..(1usize << l) {
            assert_eq!(*c.coeff(mask), rat(1, 1 << mask.count_ones()));
        }
    }

    #[test]
    fn point_mass_moments() {
        // All mass on the all-state-0 outcome: every s_I = 1.
        let l = 3;
        let mut values = vec![rat(0, 1); 1 << l];
        values[0] = rat(1, 1); // outcome (0,0,0) is flat index 0
        let d = DistributionTensor::new(2, l, values).unwrap();
        let c = MultilinearPolynomial::from_distribution(&d).unwrap();
        for mask in 0..(1usize << l) {
            assert_eq!(*c.coeff(mask), rat(1, 1));
        }
    }

    #[test]
    fn distribution_route_matches_params_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let k = rng.random_range(1..=3);
            let l = rng.random_range(1..=6);
            let p = random_binary(k, l, &mut rng);
            let via_params = MultilinearPolynomial::from_params(&p).unwrap();
            let via_dist =
                MultilinearPolynomial::from_distribution(&p.mixture_distribution().unwrap())
                    .unwrap();
            assert!(via_params.identical(&via_dist).unwrap());
        }
    }

    #[test]
    fn identity_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let p = random_binary(2, 3, &mut rng);
        let c = MultilinearPolynomial::from_params(&p).unwrap();
        assert!(c.identical(&c).unwrap());
        let q = random_binary(2, 4, &mut rng);
        let cq = MultilinearPolynomial::from_params(&q).unwrap();
        assert!(c.identical(&cq).is_err());
    }

    #[test]
    fn permutation_preserves_polynomial() {
        use crate::model::ComponentPermutation;
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let p = random_binary(3, 4, &mut rng);
        let q = p
            .apply_permutation(&ComponentPermutation::new(vec![2, 0, 1]).unwrap())
            .unwrap();
        let cp = MultilinearPolynomial::from_params(&p).unwrap();
        let cq = MultilinearPolynomial::from_params(&q).unwrap();
        assert!(cp.identical(&cq).unwrap());
    }

    #[test]
    fn evaluate_matches_factored_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..10 {
            let k = rng.random_range(1..=3);
            let l = rng.random_range(1..=5);
            let p = random_binary(k, l, &mut rng);
            let c = MultilinearPolynomial::from_params(&p).unwrap();
            let x: Vec<Rational> = (0..l)
                .map(|_| rat(rng.random_range(-20..=20), rng.random_range(1..=20)))
                .collect();
            // Factored form: sum_k w_k prod_l (x_l - f[k][l][0]).
            let mut oracle = rat(0, 1);
            for kk in 0..k {
                let mut prod = p.weight(kk).clone();
                for (ll, xl) in x.iter().enumerate() {
                    prod *= xl.clone() - p.freq(kk, ll).entry(0).clone();
                }
                oracle += prod;
            }
            assert_eq!(c.evaluate(&x).unwrap(), oracle);
        }
    }

    #[test]
    fn evaluate_root_and_monomial_cases() {
        // K=1: any point with one coordinate at the root gives 0.
        let p = MixtureParams::from_entries(
            vec![vec![vec![rat(1, 3), rat(2, 3)], vec![rat(1, 5), rat(4, 5)]]],
            vec![rat(1, 1)],
            ValidityMode::Interior,
        )
        .unwrap();
        let c = MultilinearPolynomial::from_params(&p).unwrap();
        assert_eq!(c.evaluate(&[rat(1, 3), rat(7, 9)]).unwrap(), rat(0, 1));
        assert_eq!(c.evaluate(&[rat(9, 2), rat(1, 5)]).unwrap(), rat(0, 1));

        // Only s_∅ = 1: the polynomial is the full monomial prod x_l.
        let mono =
            MultilinearPolynomial::from_coeffs(2, vec![rat(1, 1), rat(0, 1), rat(0, 1), rat(0, 1)])
                .unwrap();
        assert_eq!(mono.evaluate(&[rat(2, 1), rat(5, 1)]).unwrap(), rat(10, 1));

        assert!(c.evaluate(&[rat(1, 2)]).is_err());
    }

    #[test]
    fn evaluate_at_ones_is_last_cell_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = random_binary(2, 4, &mut rng);
        let c = MultilinearPolynomial::from_params(&p).unwrap();
        let ones = vec![rat(1, 1); 4];
        let d = p.mixture_distribution().unwrap();
        // Evaluating at all-ones collapses to the mass of the all-state-1 cell.
        assert_eq!(
            c.evaluate(&ones).unwrap(),
            *d.value_at(&[1, 1, 1, 1]).unwrap()
        );
    }

    #[test]
    fn reconstruction_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..10 {
            let k = rng.random_range(1..=3);
            let l = rng.random_range(1..=6);
            let p = random_binary(k, l, &mut rng);
            let d = p.mixture_distribution().unwrap();
            let c = MultilinearPolynomial::from_distribution(&d).unwrap();
            assert_eq!(c.reconstruct_distribution().unwrap(), d);
        }
    }

    #[test]
    fn marginal_moment_cases() {
        let p = MixtureParams::from_entries(
            vec![
                vec![
                    vec![rat(1, 6), rat(2, 6), rat(3, 6)],
                    vec![rat(1, 2), rat(1, 3), rat(1, 6)],
                ],
                vec![
                    vec![rat(3, 7), rat(3, 7), rat(1, 7)],
                    vec![rat(1, 4), rat(1, 4), rat(1, 2)],
                ],
            ],
            vec![rat(2, 5), rat(3, 5)],
            ValidityMode::Interior,
        )
        .unwrap();
        let d = p.mixture_distribution().unwrap();

        // Empty assignment: total mass.
        assert_eq!(
            marginal_moment(&d, &PartialAssignment::new()).unwrap(),
            rat(1, 1)
        );
        // Full assignment: the single cell.
        let full = PartialAssignment::from_pairs([(0, 2), (1, 1)]);
        assert_eq!(
            marginal_moment(&d, &full).unwrap(),
            *d.value_at(&[2, 1]).unwrap()
        );
        // Out-of-range state and variable.
        assert!(matches!(
            marginal_moment(&d, &PartialAssignment::from_pairs([(0, 3)])),
            Err(Error::StateOutOfRange { .. })
        ));
        assert!(matches!(
            marginal_moment(&d, &PartialAssignment::from_pairs([(2, 0)])),
            Err(Error::VarOutOfRange { .. })
        ));
    }

    #[test]
    fn params_moments_match_tensor_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..10 {
            let k = rng.random_range(1..=3);
            let l = rng.random_range(1..=4);
            let m = rng.random_range(2..=4);
            let p = crate::sample::random_interior_model(k, l, m, 1000, &mut rng).unwrap();
            let d = p.mixture_distribution().unwrap();
            let mut a = PartialAssignment::new();
            for var in 0..l {
                if rng.random::<bool>() {
                    a.set(var, rng.random_range(0..m));
                }
            }
            assert_eq!(
                moment_from_params(&p, &a).unwrap(),
                marginal_moment(&d, &a).unwrap()
            );
        }
    }

    #[test]
    fn single_component_moment_is_plain_product() {
        let p = MixtureParams::from_entries(
            vec![vec![vec![rat(1, 3), rat(2, 3)], vec![rat(1, 5), rat(4, 5)]]],
            vec![rat(1, 1)],
            ValidityMode::Interior,
        )
        .unwrap();
        let a = PartialAssignment::from_pairs([(0, 1), (1, 0)]);
        assert_eq!(moment_from_params(&p, &a).unwrap(), rat(2, 15));
        assert_eq!(
            moment_from_params(&p, &PartialAssignment::new()).unwrap(),
            rat(1, 1)
        );
    }

    #[test]
    fn relaxed_mode_polynomials_are_first_class() {
        // Unnormalized, signed weights: s_∅ tracks the weight total.
        let p = MixtureParams::from_entries(
            vec![
                vec![vec![rat(1, 4), rat(3, 4)]],
                vec![vec![rat(1, 2), rat(1, 2)]],
            ],
            vec![rat(3, 1), rat(-1, 1)],
            ValidityMode::Relaxed,
        )
        .unwrap();
        let c = MultilinearPolynomial::from_params(&p).unwrap();
        assert_eq!(*c.coeff(0), rat(2, 1));
        assert_eq!(*c.coeff(1), rat(3, 4) - rat(1, 2));
    }

    #[test]
    fn mask_flat_mapping_is_inverse() {
        for vars in 1..=6 {
            for flat in 0..(1usize << vars) {
                let mask = mask_of_flat(flat, vars);
                assert_eq!(flat_of_mask(mask, vars), flat);
            }
        }
        // Spot value: L=3, outcome (0,1,0) has flat index 0b010 and
        // state-0 set {0, 2} = mask 0b101.
        assert_eq!(mask_of_flat(0b010, 3), 0b101);
    }
}
