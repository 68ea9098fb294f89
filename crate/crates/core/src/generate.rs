//! Seeded random instances with exact rational probabilities.

use rand::seq::index::sample;
use rand::Rng;

use crate::distributions::DiscreteRV;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RvShape {
    pub max_atoms: usize,
    /// Atom values are drawn from `{0, 1, ..., max_value}`.
    pub max_value: u32,
    /// Probabilities are multiples of `1 / denominator` before normalization.
    pub denominator: u64,
}

impl Default for RvShape {
    fn default() -> Self {
        RvShape {
            max_atoms: 3,
            max_value: 10,
            denominator: 8,
        }
    }
}

impl RvShape {
    pub fn validate(&self) -> Result<()> {
        if self.max_atoms == 0 || self.denominator == 0 || self.max_atoms as u64 > self.max_value as u64 + 1 {
            return Err(Error::InvalidInput(format!("unusable variable shape {self:?}")));
        }
        Ok(())
    }
}

/// Raw `(value, numerator, denominator)` atoms of one random variable.
pub fn random_atoms<R: Rng + ?Sized>(shape: &RvShape, rng: &mut R) -> Vec<(f64, u64, u64)> {
    let count = rng.gen_range(1..=shape.max_atoms);
    let mut values: Vec<usize> = sample(rng, shape.max_value as usize + 1, count).into_vec();
    values.sort_unstable();
    let weights: Vec<u64> = (0..count).map(|_| rng.gen_range(1..=shape.denominator)).collect();
    let total: u64 = weights.iter().sum();
    values.into_iter().zip(weights).map(|(v, w)| (v as f64, w, total)).collect()
}

pub fn random_rv<R: Rng + ?Sized>(shape: &RvShape, rng: &mut R) -> DiscreteRV {
    DiscreteRV::from_rationals(&random_atoms(shape, rng)).expect("generated atoms form a distribution")
}

pub fn random_rvs<R: Rng + ?Sized>(n: usize, shape: &RvShape, rng: &mut R) -> Vec<DiscreteRV> {
    (0..n).map(|_| random_rv(shape, rng)).collect()
}

/// Costs drawn uniformly from `{0, 1/4, ..., max_cost}` on a quarter grid.
pub fn random_costs<R: Rng + ?Sized>(n: usize, max_cost: f64, rng: &mut R) -> Vec<f64> {
    let steps = (max_cost * 4.0).floor().max(0.0) as u32;
    (0..n).map(|_| rng.gen_range(0..=steps) as f64 / 4.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn single_atom_shape_is_deterministic() {
        let shape = RvShape {
            max_atoms: 1,
            ..RvShape::default()
        };
        let rvs = random_rvs(5, &shape, &mut stream(1, &[]));
        assert!(rvs.iter().all(|rv| rv.atoms().len() == 1));
    }

    #[test]
    fn same_seed_same_instance() {
        let a = random_rvs(4, &RvShape::default(), &mut stream(7, &[]));
        let b = random_rvs(4, &RvShape::default(), &mut stream(7, &[]));
        assert_eq!(a, b);
        assert!(RvShape {
            max_atoms: 5,
            max_value: 2,
            denominator: 4
        }
        .validate()
        .is_err());
    }
}
