//! Exhaustive baselines for desk-scale instances.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::distributions::{expected_max_or_zero, DiscreteRV};
use crate::error::{Error, Result};
use crate::probemax::ProbeMaxInstance;
use crate::prophets::{stopping_value, Permutation, ProphetInstance};

pub use crate::adaptive::brute_force_adaptive;
pub use crate::pandora::brute_force_pandora;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBudget {
    pub max_permutations: u128,
    pub max_subsets: u128,
    pub max_outcome_leaves: u128,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_permutations: 40_320,
            max_subsets: 1_000_000,
            max_outcome_leaves: 1_000_000,
        }
    }
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).try_fold(1u128, |acc, x| acc.checked_mul(x)).unwrap_or(u128::MAX)
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u128;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub fn brute_prophets(instance: &ProphetInstance, budget: &OracleBudget) -> Result<(Permutation, f64)> {
    let n = instance.n();
    let size = factorial(n);
    if size > budget.max_permutations {
        return Err(Error::TooLarge {
            what: "permutations",
            size,
            limit: budget.max_permutations,
        });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for order in (0..n).permutations(n) {
        let sigma = Permutation::new(order.clone())?;
        let (_, value) = stopping_value(instance, &sigma);
        if best.as_ref().map_or(true, |(_, b)| value > b + 1e-12) {
            best = Some((order, value));
        }
    }
    let (order, value) = best.expect("at least one permutation");
    Ok((Permutation::new(order)?, value))
}

fn subset_guard(n: usize, k: usize, budget: &OracleBudget) -> Result<usize> {
    let size = k.min(n);
    let count = binomial(n, size);
    if count > budget.max_subsets {
        return Err(Error::TooLarge {
            what: "subsets",
            size: count,
            limit: budget.max_subsets,
        });
    }
    Ok(size)
}

pub fn brute_probemax(instance: &ProbeMaxInstance, budget: &OracleBudget) -> Result<(Vec<usize>, f64)> {
    let size = subset_guard(instance.n(), instance.k, budget)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for subset in (0..instance.n()).combinations(size) {
        let value = instance.value_of(&subset);
        if best.as_ref().map_or(true, |(_, b)| value > b + 1e-12) {
            best = Some((subset, value));
        }
    }
    Ok(best.expect("at least one subset"))
}

/// `E[sum of the r largest]` by walking every joint outcome.
pub fn top_r_by_enumeration(rvs: &[&DiscreteRV], r: usize, budget: &OracleBudget) -> Result<f64> {
    let leaves = rvs
        .iter()
        .try_fold(1u128, |acc, rv| acc.checked_mul(rv.atoms().len() as u128))
        .unwrap_or(u128::MAX);
    if leaves > budget.max_outcome_leaves {
        return Err(Error::TooLarge {
            what: "joint outcomes",
            size: leaves,
            limit: budget.max_outcome_leaves,
        });
    }
    let mut total = 0.0;
    for outcome in rvs.iter().map(|rv| rv.atoms().iter()).multi_cartesian_product() {
        let prob: f64 = outcome.iter().map(|a| a.prob).product();
        let mut values: Vec<f64> = outcome.iter().map(|a| a.value).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        total += prob * values.iter().take(r).sum::<f64>();
    }
    if rvs.is_empty() {
        return Ok(0.0);
    }
    Ok(total)
}

pub fn brute_topr(instance: &ProbeMaxInstance, budget: &OracleBudget) -> Result<(Vec<usize>, f64)> {
    let size = subset_guard(instance.n(), instance.k, budget)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for subset in (0..instance.n()).combinations(size) {
        let value = top_r_by_enumeration(&instance.subset_rvs(&subset), instance.r, budget)?;
        if best.as_ref().map_or(true, |(_, b)| value > b + 1e-12) {
            best = Some((subset, value));
        }
    }
    Ok(best.expect("at least one subset"))
}

/// `E[max]` by walking every joint outcome, for cross-checking closed forms.
pub fn expected_max_by_enumeration(rvs: &[&DiscreteRV], budget: &OracleBudget) -> Result<f64> {
    if rvs.is_empty() {
        return Ok(expected_max_or_zero(rvs));
    }
    top_r_by_enumeration(rvs, 1, budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(pairs: &[(f64, f64)]) -> DiscreteRV {
        DiscreteRV::new(pairs.to_vec()).unwrap()
    }

    #[test]
    fn prophets_examples() {
        let b = OracleBudget::default();
        let one = ProphetInstance::new(vec![rv(&[(1.0, 0.5), (3.0, 0.5)])]).unwrap();
        assert_eq!(brute_prophets(&one, &b).unwrap().1, 2.0);
        let risky_safe = ProphetInstance::new(vec![DiscreteRV::deterministic(1.0), rv(&[(0.0, 0.5), (2.0, 0.5)])]).unwrap();
        let (sigma, v) = brute_prophets(&risky_safe, &b).unwrap();
        assert_eq!(sigma.order, vec![1, 0]);
        assert!((v - 1.5).abs() < 1e-12);
        let big = ProphetInstance::new(vec![DiscreteRV::deterministic(1.0); 9]).unwrap();
        assert!(matches!(brute_prophets(&big, &b), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn probemax_examples() {
        let b = OracleBudget::default();
        let rvs = vec![rv(&[(0.0, 0.5), (4.0, 0.5)]), DiscreteRV::deterministic(1.0), DiscreteRV::deterministic(3.0)];
        let all = ProbeMaxInstance::new(rvs.clone(), 3, 1).unwrap();
        assert_eq!(brute_probemax(&all, &b).unwrap().0, vec![0, 1, 2]);
        let one = ProbeMaxInstance::new(rvs, 1, 1).unwrap();
        assert_eq!(brute_probemax(&one, &b).unwrap(), (vec![2], 3.0));
    }

    #[test]
    fn topr_examples() {
        let b = OracleBudget::default();
        let rvs = vec![rv(&[(0.0, 0.5), (2.0, 0.5)]), rv(&[(1.0, 0.5), (3.0, 0.5)]), rv(&[(0.0, 0.75), (8.0, 0.25)])];
        let all = ProbeMaxInstance::new(rvs.clone(), 3, 3).unwrap();
        assert!((brute_topr(&all, &b).unwrap().1 - (1.0 + 2.0 + 2.0)).abs() < 1e-12);
        // k = r = 2, hand enumeration over the three pairs:
        // {0,1}: E = 1 + 2 = 3
        // {0,2}: E = 1 + 2 = 3
        // {1,2}: E = 2 + 2 = 4
        let two = ProbeMaxInstance::new(rvs.clone(), 2, 2).unwrap();
        assert_eq!(brute_topr(&two, &b).unwrap().0, vec![1, 2]);
        let r1 = ProbeMaxInstance::new(rvs, 2, 1).unwrap();
        let (s, v) = brute_topr(&r1, &b).unwrap();
        let (s1, v1) = brute_probemax(&r1, &b).unwrap();
        assert_eq!(s, s1);
        assert!((v - v1).abs() < 1e-12);
    }

    #[test]
    fn counting_helpers() {
        assert_eq!(factorial(8), 40_320);
        assert_eq!(binomial(10, 4), 210);
        assert_eq!(binomial(3, 5), 0);
    }
}
