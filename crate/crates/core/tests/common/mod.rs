#![allow(dead_code)]

use itertools::Itertools;
use proptest::prelude::*;

use eptas_core::DiscreteRV;

/// Up to `max_atoms` distinct integer values in `0..=10` with integer weights.
pub fn rv_strategy(max_atoms: usize) -> impl Strategy<Value = DiscreteRV> {
    prop::collection::btree_map(0u32..=10, 1u64..=8, 1..=max_atoms).prop_map(|atoms| {
        let total: u64 = atoms.values().sum();
        let atoms_raw: Vec<(f64, u64, u64)> = atoms.into_iter().map(|(v, w)| (v as f64, w, total)).collect();
        DiscreteRV::from_rationals(&atoms_raw).unwrap()
    })
}

pub fn rvs_strategy(n: std::ops::RangeInclusive<usize>, max_atoms: usize) -> impl Strategy<Value = Vec<DiscreteRV>> {
    prop::collection::vec(rv_strategy(max_atoms), n)
}

/// `E[f(outcome)]` over the joint outcome space.
pub fn expectation(rvs: &[&DiscreteRV], f: impl Fn(&[f64]) -> f64) -> f64 {
    if rvs.is_empty() {
        return f(&[]);
    }
    rvs.iter()
        .map(|rv| rv.atoms().iter())
        .multi_cartesian_product()
        .map(|outcome| {
            let prob: f64 = outcome.iter().map(|a| a.prob).product();
            let values: Vec<f64> = outcome.iter().map(|a| a.value).collect();
            prob * f(&values)
        })
        .sum()
}

pub fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}
