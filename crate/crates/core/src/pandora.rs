//! Pandora's box with commitment, through reservation-value capping and Free-Order Prophets.

use itertools::Itertools;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::DiscreteRV;
use crate::error::{Error, Result};
use crate::oracle::{factorial, OracleBudget};
use crate::prophets::{self, schedule_of, Permutation, ProphetInstance, ProphetParams};
use crate::Mode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PandoraInstance {
    pub rvs: Vec<DiscreteRV>,
    pub costs: Vec<f64>,
}

impl PandoraInstance {
    pub fn new(rvs: Vec<DiscreteRV>, costs: Vec<f64>) -> Result<Self> {
        let inst = PandoraInstance { rvs, costs };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rvs.len() != self.costs.len() {
            return Err(Error::InvalidInput(format!(
                "{} variables but {} costs",
                self.rvs.len(),
                self.costs.len()
            )));
        }
        if let Some(c) = self.costs.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidInput(format!("cost {c} is not a finite non-negative number")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.rvs.len()
    }
}

/// Probe `order` in sequence and claim the first value at or above its threshold.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommitPolicy {
    pub order: Vec<usize>,
    pub thresholds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Capped {
    /// Reservation value per variable; `None` when the cost exceeds the mean.
    pub kappas: Vec<Option<f64>>,
    /// Original indices that survive capping.
    pub retained: Vec<usize>,
    /// `min{X_i, kappa_i}` for each retained variable, in `retained` order.
    pub rvs: Vec<DiscreteRV>,
}

pub fn cap_variables(instance: &PandoraInstance) -> Result<Capped> {
    instance.validate()?;
    let mut kappas = Vec::with_capacity(instance.n());
    let mut retained = Vec::new();
    let mut rvs = Vec::new();
    for (i, (rv, &c)) in instance.rvs.iter().zip(&instance.costs).enumerate() {
        match rv.weitzman_index(c) {
            Ok(kappa) => {
                kappas.push(Some(kappa));
                retained.push(i);
                rvs.push(rv.capped(kappa));
            }
            Err(Error::NoIndex { .. }) => kappas.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Capped { kappas, retained, rvs })
}

pub fn evaluate_commit(instance: &PandoraInstance, policy: &CommitPolicy) -> Result<f64> {
    if policy.order.len() != policy.thresholds.len() {
        return Err(Error::InvalidInput("order and thresholds differ in length".into()));
    }
    if let Some(&i) = policy.order.iter().find(|&&i| i >= instance.n()) {
        return Err(Error::InvalidInput(format!("variable {i} out of range")));
    }
    let mut cont = 0.0;
    for (&i, &t) in policy.order.iter().zip(&policy.thresholds).rev() {
        let mut claimed: f64 = instance.rvs[i]
            .atoms()
            .iter()
            .map(|a| a.prob * if a.value >= t { a.value } else { cont })
            .sum();
        if t == cont {
            claimed = claimed.max(cont);
        }
        cont = claimed - instance.costs[i];
    }
    Ok(cont)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PandoraOutcome {
    pub policy: CommitPolicy,
    pub utility: f64,
    /// Prophets value of the returned order on the capped variables.
    pub prophet_value: f64,
    pub capped: Capped,
    pub prophet_fallback: bool,
}

/// Solves Free-Order Prophets on the capped variables and converts the order back.
///
/// An oracle-guided reference is a permutation of the retained variables.
pub fn solve<R: Rng + ?Sized>(
    instance: &PandoraInstance,
    params: &ProphetParams,
    mode: &Mode<Permutation>,
    rng: &mut R,
) -> Result<PandoraOutcome> {
    let capped = cap_variables(instance)?;
    if capped.retained.is_empty() {
        return Ok(PandoraOutcome {
            policy: CommitPolicy::default(),
            utility: 0.0,
            prophet_value: 0.0,
            capped,
            prophet_fallback: false,
        });
    }
    let y = ProphetInstance::new(capped.rvs.clone())?;
    let out = prophets::solve(&y, params, mode, rng)?;
    let seq: Vec<&DiscreteRV> = out.permutation.order.iter().map(|&j| &capped.rvs[j]).collect();
    let schedule = schedule_of(&seq);
    let mut policy = CommitPolicy::default();
    for (pos, &j) in out.permutation.order.iter().enumerate() {
        let i = capped.retained[j];
        let t = schedule.values[pos + 1];
        if t <= capped.kappas[i].expect("retained variables have an index") {
            policy.order.push(i);
            policy.thresholds.push(t);
        }
    }
    let utility = evaluate_commit(instance, &policy)?;
    Ok(PandoraOutcome {
        policy,
        utility,
        prophet_value: out.value,
        capped,
        prophet_fallback: out.fallback,
    })
}

/// Best order over all permutations, each with optimal skip decisions and thresholds.
pub fn brute_force_pandora(instance: &PandoraInstance, budget: &OracleBudget) -> Result<(CommitPolicy, f64)> {
    instance.validate()?;
    let n = instance.n();
    let size = factorial(n);
    if size > budget.max_permutations.min(5040) {
        return Err(Error::TooLarge {
            what: "pandora permutations",
            size,
            limit: budget.max_permutations.min(5040),
        });
    }
    let mut best: Option<(CommitPolicy, f64)> = None;
    for order in (0..n).permutations(n) {
        let mut cont = 0.0;
        let mut kept: Vec<(usize, f64)> = Vec::new();
        for &i in order.iter().rev() {
            let probe = instance.rvs[i].expected_max_with(cont) - instance.costs[i];
            if probe > cont {
                kept.push((i, cont));
                cont = probe;
            }
        }
        kept.reverse();
        if best.as_ref().map_or(true, |(_, b)| cont > b + 1e-12) {
            let policy = CommitPolicy {
                order: kept.iter().map(|k| k.0).collect(),
                thresholds: kept.iter().map(|k| k.1).collect(),
            };
            best = Some((policy, cont));
        }
    }
    Ok(best.unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn rv(pairs: &[(f64, f64)]) -> DiscreteRV {
        DiscreteRV::new(pairs.to_vec()).unwrap()
    }

    #[test]
    fn capping_examples() {
        let inst = PandoraInstance::new(
            vec![rv(&[(0.0, 0.5), (1.0, 0.5)]), rv(&[(0.0, 0.5), (1.0, 0.5)]), DiscreteRV::deterministic(2.0)],
            vec![0.0, 0.25, 1.0],
        )
        .unwrap();
        let c = cap_variables(&inst).unwrap();
        assert_eq!(c.kappas[0], Some(f64::INFINITY));
        assert_eq!(c.rvs[0], inst.rvs[0]);
        assert!((c.kappas[1].unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(c.rvs[1], rv(&[(0.0, 0.5), (0.5, 0.5)]));
        assert!((c.kappas[2].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(c.rvs[2], DiscreteRV::deterministic(1.0));
    }

    #[test]
    fn commit_examples() {
        let det = PandoraInstance::new(vec![DiscreteRV::deterministic(2.0)], vec![1.0]).unwrap();
        assert_eq!(evaluate_commit(&det, &CommitPolicy::default()).unwrap(), 0.0);
        let p = CommitPolicy { order: vec![0], thresholds: vec![0.0] };
        assert_eq!(evaluate_commit(&det, &p).unwrap(), 1.0);
        let coin = PandoraInstance::new(vec![rv(&[(0.0, 0.5), (4.0, 0.5)])], vec![1.0]).unwrap();
        let p = CommitPolicy { order: vec![0], thresholds: vec![1.0] };
        assert_eq!(evaluate_commit(&coin, &p).unwrap(), 1.0);
    }

    #[test]
    fn brute_examples() {
        let b = OracleBudget::default();
        let gain = PandoraInstance::new(vec![rv(&[(0.0, 0.5), (4.0, 0.5)])], vec![1.0]).unwrap();
        assert_eq!(brute_force_pandora(&gain, &b).unwrap().1, 1.0);
        let loss = PandoraInstance::new(vec![rv(&[(0.0, 0.5), (4.0, 0.5)])], vec![3.0]).unwrap();
        assert_eq!(brute_force_pandora(&loss, &b).unwrap(), (CommitPolicy::default(), 0.0));
        // Two orders by hand: safe det 1 at cost 0, risky {0, 4} at cost 1.
        // risky first: -1 + 0.5*4 + 0.5*1 = 1.5; safe first: 1 (then the risky box is never worth it).
        let two = PandoraInstance::new(vec![DiscreteRV::deterministic(1.0), rv(&[(0.0, 0.5), (4.0, 0.5)])], vec![0.0, 1.0]).unwrap();
        let (policy, v) = brute_force_pandora(&two, &b).unwrap();
        assert_eq!(policy.order, vec![1, 0]);
        assert!((v - 1.5).abs() < 1e-12);
    }

    #[test]
    fn prohibitive_costs_give_empty_policy() {
        let inst = PandoraInstance::new(vec![rv(&[(1.0, 0.5), (2.0, 0.5)]); 3], vec![5.0; 3]).unwrap();
        let out = solve(&inst, &ProphetParams::new(0.1), &Mode::Enumerate { budget: 4 }, &mut stream(1, &[])).unwrap();
        assert!(out.policy.order.is_empty());
        assert_eq!(out.utility, 0.0);
    }

    #[test]
    fn zero_costs_reduce_to_prophets() {
        let rvs = vec![rv(&[(0.0, 0.5), (3.0, 0.5)]), DiscreteRV::deterministic(1.0), rv(&[(0.5, 0.25), (2.0, 0.75)])];
        let inst = PandoraInstance::new(rvs.clone(), vec![0.0; 3]).unwrap();
        let params = ProphetParams::new(0.1);
        let mode = Mode::Enumerate { budget: 8 };
        let out = solve(&inst, &params, &mode, &mut stream(5, &[])).unwrap();
        let direct = prophets::solve(&ProphetInstance::new(rvs).unwrap(), &params, &mode, &mut stream(5, &[])).unwrap();
        assert_eq!(out.policy.order, direct.permutation.order);
        assert_eq!(out.utility.to_bits(), direct.value.to_bits());
    }
}
