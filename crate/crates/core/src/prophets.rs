//! Free-order prophets: choose an inspection order for independent variables
//! and stop optimally along it.
//!
//! The solver buckets a (reference or guessed) optimal order at the points
//! where its continuation value crosses multiples of `eps * OPT`, turns the
//! buckets into a single-dimensional Santa Claus instance, and reads a new
//! order back off the machine assignment.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{expected_max_of_set, DiscreteRV, TOL};
use crate::error::{Error, Result};
use crate::santa_claus::{self, Assignment, SantaInstance, SantaParams};
use crate::Mode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProphetInstance {
    pub rvs: Vec<DiscreteRV>,
}

impl ProphetInstance {
    pub fn new(rvs: Vec<DiscreteRV>) -> Result<Self> {
        if rvs.is_empty() {
            return Err(Error::InvalidInput("a prophet instance needs at least one variable".into()));
        }
        Ok(ProphetInstance { rvs })
    }

    pub fn n(&self) -> usize {
        self.rvs.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation {
    pub order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidInput(format!("{order:?} is not a permutation")));
            }
        }
        Ok(Permutation { order })
    }

    pub fn identity(n: usize) -> Self {
        Permutation { order: (0..n).collect() }
    }
}

/// Continuation values `R[0..=n]` of a fixed order, with `R[n] = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSchedule {
    pub values: Vec<f64>,
}

/// Backward recursion `R[t] = E[max{X_sigma(t), R[t+1]}]` over a sequence of variables.
pub fn schedule_of(rvs: &[&DiscreteRV]) -> ThresholdSchedule {
    let mut values = vec![0.0; rvs.len() + 1];
    for t in (0..rvs.len()).rev() {
        values[t] = rvs[t].expected_max_with(values[t + 1]);
    }
    ThresholdSchedule { values }
}

/// Optimal stopping value of `sigma`: stop at the first `t` with `X_sigma(t) >= R[t+1]`.
pub fn stopping_value(instance: &ProphetInstance, sigma: &Permutation) -> (ThresholdSchedule, f64) {
    let seq: Vec<&DiscreteRV> = sigma.order.iter().map(|&i| &instance.rvs[i]).collect();
    let schedule = schedule_of(&seq);
    let value = schedule.values[0];
    (schedule, value)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselinePolicy {
    pub order: Permutation,
    pub threshold: f64,
    pub value: f64,
}

/// Single-threshold rule at `E[max] / 2` along the identity order.
pub fn prophet_baseline(instance: &ProphetInstance) -> BaselinePolicy {
    let all: Vec<&DiscreteRV> = instance.rvs.iter().collect();
    let threshold = expected_max_of_set(&all).unwrap_or(0.0) / 2.0;
    let mut reach = 1.0;
    let mut value = 0.0;
    for rv in &instance.rvs {
        let (mass_value, stop_prob) = rv.upper_tail(threshold);
        value += reach * mass_value;
        reach *= 1.0 - stop_prob;
    }
    BaselinePolicy {
        order: Permutation::identity(instance.n()),
        threshold,
        value,
    }
}

/// Candidate estimates `V (1+eps)^a <= 2V` for the optimum, where `V` is the
/// identity order's value.
pub fn estimate_opt(instance: &ProphetInstance, epsilon: f64) -> Vec<f64> {
    let (_, v) = stopping_value(instance, &Permutation::identity(instance.n()));
    if v <= 0.0 {
        return vec![0.0];
    }
    let top = (2f64.ln() / epsilon.ln_1p() + TOL).floor() as i32;
    (0..=top).map(|a| v * (1.0 + epsilon).powi(a)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BucketKind {
    Stable,
    Jump,
}

/// Guessed bucket structure; index 0 is the bucket probed last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketGuess {
    pub epsilon: f64,
    pub opt_estimate: f64,
    pub jumps: usize,
    pub kinds: Vec<BucketKind>,
    pub base_guess: Vec<f64>,
    pub delta_guess: Vec<f64>,
}

impl BucketGuess {
    pub fn step(&self) -> f64 {
        self.epsilon * self.epsilon * self.opt_estimate
    }

    pub fn machines(&self) -> usize {
        self.kinds.len()
    }
}

fn kinds_for(jumps: usize) -> Vec<BucketKind> {
    (0..2 * jumps + 1)
        .map(|j| if j % 2 == 1 { BucketKind::Jump } else { BucketKind::Stable })
        .collect()
}

/// Largest grid index whose value does not exceed `x`.
fn grid_floor(x: f64, step: f64) -> f64 {
    ((x / step) * (1.0 + 1e-12) + 1e-12).floor().max(0.0)
}

/// Lazy enumeration of grid-aligned bucket guesses, fewest jumps first.
pub struct BucketGuessIter {
    epsilon: f64,
    opt_estimate: f64,
    top: usize,
    jumps: usize,
    max_jumps: usize,
    digits: Option<Vec<usize>>,
}

impl BucketGuessIter {
    fn first_digits(jumps: usize) -> Vec<usize> {
        // increments for buckets 1..2J, delta choice bits for 0..2J-1, last delta
        vec![0; 2 * jumps + 2 * jumps + 1]
    }

    fn maxima(&self) -> Vec<usize> {
        let j2 = 2 * self.jumps;
        let mut m = vec![self.top; j2];
        m.extend(std::iter::repeat(1).take(j2));
        m.push(self.top);
        m
    }

    fn build(&self, jumps: usize, digits: &[usize]) -> Option<BucketGuess> {
        let j2 = 2 * jumps;
        let step = self.epsilon * self.epsilon * self.opt_estimate;
        let mut base = vec![0usize; j2 + 1];
        for b in 1..=j2 {
            base[b] = base[b - 1] + digits[b - 1];
        }
        if base[j2] > self.top || digits[2 * j2] + base[j2] > self.top {
            return None;
        }
        let mut delta: Vec<f64> = (0..j2)
            .map(|b| (digits[b] as f64 - digits[j2 + b] as f64).max(0.0) * step)
            .collect();
        // A zero increment has only one admissible delta; skip the duplicate.
        if (0..j2).any(|b| digits[b] == 0 && digits[j2 + b] == 1) {
            return None;
        }
        delta.push(digits[2 * j2] as f64 * step);
        Some(BucketGuess {
            epsilon: self.epsilon,
            opt_estimate: self.opt_estimate,
            jumps,
            kinds: kinds_for(jumps),
            base_guess: base.iter().map(|&b| b as f64 * step).collect(),
            delta_guess: delta,
        })
    }
}

impl Iterator for BucketGuessIter {
    type Item = BucketGuess;

    fn next(&mut self) -> Option<BucketGuess> {
        loop {
            let cur = self.digits.clone()?;
            let maxima = self.maxima();
            let mut next = cur.clone();
            let mut pos = next.len();
            self.digits = loop {
                if pos == 0 {
                    self.jumps += 1;
                    break (self.jumps <= self.max_jumps).then(|| Self::first_digits(self.jumps));
                }
                pos -= 1;
                if next[pos] < maxima[pos] {
                    next[pos] += 1;
                    break Some(next);
                }
                next[pos] = 0;
            };
            if let Some(g) = self.build((cur.len() - 1) / 4, &cur) {
                return Some(g);
            }
        }
    }
}

/// All grid-aligned guesses for `J = 0..=1/eps` jumps.
///
/// Base guesses are non-decreasing from 0 on the `eps^2 E` grid up to
/// `E / (eps^2 (1 - eps))` grid steps, covering base values up to `E / (1 - eps)`
/// (no widening at `eps = 1`).
pub fn enumerate_bucket_guesses(opt_estimate: f64, epsilon: f64) -> BucketGuessIter {
    let slack = if epsilon < 1.0 { 1.0 - epsilon } else { 1.0 };
    let top = ((1.0 / (epsilon * epsilon)) / slack - TOL).ceil() as usize;
    let max_jumps = (1.0 / epsilon + TOL).floor() as usize;
    BucketGuessIter {
        epsilon,
        opt_estimate,
        top,
        jumps: 0,
        max_jumps,
        digits: (opt_estimate > 0.0).then(|| BucketGuessIter::first_digits(0)),
    }
}

/// Jump times (0-based positions in `sigma_star`) and the bucket of every position.
///
/// Position `t` is a jump when `V*_t` and `V*_{t+1}` lie in different cells of the
/// grid of multiples of `eps V*_1`.
pub fn bucket_structure(values: &[f64], epsilon: f64) -> (Vec<usize>, Vec<usize>) {
    let n = values.len() - 1;
    let unit = epsilon * values[0];
    let cell = |v: f64| -> i64 {
        if unit <= 0.0 {
            0
        } else {
            (v / unit - 1e-9).ceil() as i64
        }
    };
    let jumps: Vec<usize> = (0..n).filter(|&t| cell(values[t]) > cell(values[t + 1])).collect();
    let j = jumps.len();
    // Bucket 2a+1 is the a-th jump counted from the end; stable buckets sit between.
    let mut bucket_of = vec![0; n];
    for t in 0..n {
        let later = jumps.iter().filter(|&&tj| tj > t).count();
        bucket_of[t] = if jumps.contains(&t) { 2 * later + 1 } else { 2 * later };
    }
    debug_assert!(bucket_of.iter().all(|&b| b <= 2 * j));
    (jumps, bucket_of)
}

/// Exact base values of every bucket for the order `sigma_star`, plus the bucket of each variable.
fn base_values(instance: &ProphetInstance, sigma_star: &Permutation, epsilon: f64) -> (usize, Vec<f64>, Vec<usize>) {
    let (schedule, _) = stopping_value(instance, sigma_star);
    let v = &schedule.values;
    let n = instance.n();
    let (jumps, bucket_of_pos) = bucket_structure(v, epsilon);
    let j = jumps.len();
    let mut base = vec![0.0; 2 * j + 2];
    // Jump bucket at time T: V*_{T+1}; stable bucket: V* at the next jump (or the end).
    for (a, &t) in jumps.iter().rev().enumerate() {
        base[2 * a + 1] = v[t + 1];
        base[2 * a + 2] = v[t];
    }
    base[2 * j + 1] = v[0];
    let mut bucket_of_var = vec![0; n];
    for (t, &i) in sigma_star.order.iter().enumerate() {
        bucket_of_var[i] = bucket_of_pos[t];
    }
    (j, base, bucket_of_var)
}

/// The grid guess consistent with the order `sigma_star` for the estimate `opt_estimate`.
pub fn guess_from_reference(
    instance: &ProphetInstance,
    sigma_star: &Permutation,
    epsilon: f64,
    opt_estimate: f64,
) -> BucketGuess {
    let (j, base, _) = base_values(instance, sigma_star, epsilon);
    let step = epsilon * epsilon * opt_estimate;
    let snap = |x: f64| if step > 0.0 { grid_floor(x, step) * step } else { 0.0 };
    let base_guess: Vec<f64> = base[..=2 * j].iter().map(|&b| snap(b)).collect();
    let delta_guess: Vec<f64> = (0..=2 * j).map(|b| snap((base[b + 1] - base[b]).max(0.0))).collect();
    BucketGuess {
        epsilon,
        opt_estimate,
        jumps: j,
        kinds: kinds_for(j),
        base_guess,
        delta_guess,
    }
}

/// The assignment of variables to buckets induced by `sigma_star`.
pub fn reference_assignment(instance: &ProphetInstance, sigma_star: &Permutation, epsilon: f64) -> Assignment {
    let (_, _, bucket_of_var) = base_values(instance, sigma_star, epsilon);
    Assignment {
        machine_of: bucket_of_var.into_iter().map(Some).collect(),
    }
}

/// Single-dimensional covering instance: one machine per bucket.
pub fn build_santa(instance: &ProphetInstance, guess: &BucketGuess) -> SantaInstance {
    let n = instance.n();
    let capacities = guess
        .kinds
        .iter()
        .map(|k| if *k == BucketKind::Jump { 1 } else { n })
        .collect();
    let lower_bounds = guess.delta_guess.iter().map(|&d| vec![d]).collect();
    let loads = guess
        .base_guess
        .iter()
        .map(|&b| instance.rvs.iter().map(|rv| vec![rv.expected_excess(b)]).collect())
        .collect();
    SantaInstance {
        m: guess.machines(),
        d: 1,
        capacities,
        lower_bounds,
        loads,
    }
}

/// Unassigned variables first, then machine `m-1` down to machine 0, each by index.
pub fn assemble_permutation(assignment: &Assignment, machines: usize) -> Permutation {
    let mut order: Vec<usize> = (0..assignment.machine_of.len())
        .filter(|&i| assignment.machine_of[i].is_none())
        .collect();
    for machine in (0..machines).rev() {
        order.extend(assignment.jobs_on(machine));
    }
    Permutation { order }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProphetOutcome {
    pub permutation: Permutation,
    pub value: f64,
    pub baseline_value: f64,
    /// No santa solve succeeded and the baseline order was returned.
    pub fallback: bool,
    pub guesses_evaluated: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProphetParams {
    pub epsilon: f64,
    /// Roundings per santa guess.
    pub retries: usize,
}

impl ProphetParams {
    pub fn new(epsilon: f64) -> Self {
        ProphetParams { epsilon, retries: 20 }
    }
}

fn better(candidate: (f64, &Permutation), best: Option<&(f64, Permutation)>) -> bool {
    match best {
        None => true,
        Some((v, p)) => candidate.0 > *v + 1e-12 || (candidate.0 >= *v - 1e-12 && candidate.1 < p),
    }
}

pub fn solve<R: Rng + ?Sized>(
    instance: &ProphetInstance,
    params: &ProphetParams,
    mode: &Mode<Permutation>,
    rng: &mut R,
) -> Result<ProphetOutcome> {
    let eps = params.epsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon {eps} outside (0, 1)")));
    }
    if let Mode::OracleGuided(sigma) = mode {
        Permutation::new(sigma.order.clone())?;
        if sigma.order.len() != instance.n() {
            return Err(Error::InvalidInput("reference permutation has the wrong length".into()));
        }
    }
    let baseline = prophet_baseline(instance);
    let mut best: Option<(f64, Permutation)> = None;
    let mut evaluated = 0;

    let consider = |guess: &BucketGuess, reference: Option<&Assignment>, rng: &mut R, best: &mut Option<(f64, Permutation)>| {
        let santa = build_santa(instance, guess);
        let rho_ref = reference.map_or(0.0, |a| max_normalized_load(&santa, a));
        let mut sp = SantaParams::new(eps, (1.0 / (eps * eps)).max(rho_ref));
        sp.retries = params.retries;
        let santa_mode = match reference {
            Some(a) => Mode::OracleGuided(a.clone()),
            None => Mode::Enumerate { budget: 64 },
        };
        if let Ok(out) = santa_claus::solve(&santa, &sp, &santa_mode, rng) {
            let sigma = assemble_permutation(&out.assignment, guess.machines());
            let (_, v) = stopping_value(instance, &sigma);
            if better((v, &sigma), best.as_ref()) {
                *best = Some((v, sigma));
            }
        }
    };

    for e in estimate_opt(instance, eps) {
        match mode {
            Mode::OracleGuided(sigma_star) => {
                let guess = guess_from_reference(instance, sigma_star, eps, e);
                let reference = reference_assignment(instance, sigma_star, eps);
                consider(&guess, Some(&reference), rng, &mut best);
                evaluated += 1;
            }
            Mode::Enumerate { budget } => {
                for guess in enumerate_bucket_guesses(e, eps).take(*budget) {
                    consider(&guess, None, rng, &mut best);
                    evaluated += 1;
                }
            }
        }
    }

    Ok(match best {
        Some((value, permutation)) => ProphetOutcome {
            permutation,
            value,
            baseline_value: baseline.value,
            fallback: false,
            guesses_evaluated: evaluated,
        },
        None => {
            let (_, value) = stopping_value(instance, &baseline.order);
            ProphetOutcome {
                permutation: baseline.order,
                value,
                baseline_value: baseline.value,
                fallback: true,
                guesses_evaluated: evaluated,
            }
        }
    })
}

/// Largest load-to-bound ratio of `assignment` over active machines.
fn max_normalized_load(santa: &SantaInstance, assignment: &Assignment) -> f64 {
    (0..santa.m)
        .filter(|&i| santa.lower_bounds[i][0] > 0.0)
        .map(|i| santa.load(assignment, i, 0) / santa.lower_bounds[i][0])
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(pairs: &[(f64, f64)]) -> DiscreteRV {
        DiscreteRV::new(pairs.to_vec()).unwrap()
    }

    fn risky_safe() -> ProphetInstance {
        ProphetInstance::new(vec![DiscreteRV::deterministic(1.0), rv(&[(0.0, 0.5), (2.0, 0.5)])]).unwrap()
    }

    #[test]
    fn stopping_value_examples() {
        let inst = risky_safe();
        let (s, v) = stopping_value(&inst, &Permutation::new(vec![1, 0]).unwrap());
        assert_eq!(s.values, vec![1.5, 1.0, 0.0]);
        assert_eq!(v, 1.5);
        let (_, v) = stopping_value(&inst, &Permutation::identity(2));
        assert_eq!(v, 1.0);
        let single = ProphetInstance::new(vec![rv(&[(0.0, 0.25), (4.0, 0.75)])]).unwrap();
        assert_eq!(stopping_value(&single, &Permutation::identity(1)).1, 3.0);
    }

    #[test]
    fn baseline_examples() {
        let single = ProphetInstance::new(vec![rv(&[(1.0, 0.5), (3.0, 0.5)])]).unwrap();
        assert!((prophet_baseline(&single).value - 2.0).abs() < 1e-12);
        let iid = ProphetInstance::new(vec![rv(&[(0.0, 0.5), (1.0, 0.5)]); 2]).unwrap();
        assert!(prophet_baseline(&iid).value >= 0.375);
    }

    #[test]
    fn opt_candidates() {
        let det = ProphetInstance::new(vec![DiscreteRV::deterministic(1.0)]).unwrap();
        assert_eq!(estimate_opt(&det, 1.0), vec![1.0, 2.0]);
        let five = ProphetInstance::new(vec![DiscreteRV::deterministic(5.0)]).unwrap();
        let c = estimate_opt(&five, 0.1);
        assert_eq!(c[0], 5.0);
        assert!(*c.last().unwrap() <= 10.0 && *c.last().unwrap() > 10.0 / 1.1);
        assert!(c.len() <= (2f64.ln() / 1.1f64.ln()).ceil() as usize + 1);
        let zero = ProphetInstance::new(vec![DiscreteRV::deterministic(0.0)]).unwrap();
        assert_eq!(estimate_opt(&zero, 0.1), vec![0.0]);
    }

    #[test]
    fn bucket_guess_stream() {
        assert_eq!(enumerate_bucket_guesses(0.0, 0.5).count(), 0);
        let all: Vec<_> = enumerate_bucket_guesses(1.0, 1.0).collect();
        assert!(!all.is_empty());
        assert!(all.iter().all(|g| g.jumps <= 1 && g.base_guess[0] == 0.0));
        assert!(all.iter().any(|g| g.jumps == 1));
        for g in enumerate_bucket_guesses(2.0, 0.5).take(500) {
            let step = g.step();
            assert!((step - 0.5).abs() < 1e-12);
            for b in &g.base_guess {
                assert!(((b / step).round() * step - b).abs() < 1e-12);
            }
            assert!(g.base_guess.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn reference_guess_brackets() {
        let inst = ProphetInstance::new(vec![
            rv(&[(0.0, 0.5), (3.0, 0.5)]),
            rv(&[(1.0, 0.5), (2.0, 0.5)]),
            DiscreteRV::deterministic(0.5),
        ])
        .unwrap();
        let sigma = Permutation::new(vec![0, 1, 2]).unwrap();
        let eps = 0.2;
        let (sched, opt) = stopping_value(&inst, &sigma);
        let g = guess_from_reference(&inst, &sigma, eps, opt);
        assert_eq!(g.base_guess[0], 0.0);
        let (_, base, _) = base_values(&inst, &sigma, eps);
        assert_eq!(base[0], 0.0);
        for b in 0..g.machines() {
            assert!(g.base_guess[b] <= base[b] + 1e-12);
            assert!(base[b] < g.base_guess[b] + g.step() + 1e-12);
        }
        assert!(g.jumps as f64 <= 1.0 / eps);
        assert_eq!(sched.values[3], 0.0);
    }

    #[test]
    fn constant_values_jump_once() {
        let inst = ProphetInstance::new(vec![DiscreteRV::deterministic(1.0); 3]).unwrap();
        let g = guess_from_reference(&inst, &Permutation::identity(3), 0.25, 1.0);
        assert_eq!(g.jumps, 1);
        assert_eq!(g.kinds, vec![BucketKind::Stable, BucketKind::Jump, BucketKind::Stable]);
    }

    #[test]
    fn santa_shape() {
        let inst = risky_safe();
        let guess = BucketGuess {
            epsilon: 0.5,
            opt_estimate: 1.0,
            jumps: 1,
            kinds: kinds_for(1),
            base_guess: vec![0.0, 0.5, 1.0],
            delta_guess: vec![0.25, 0.25, 0.25],
        };
        let s = build_santa(&inst, &guess);
        assert_eq!(s.capacities, vec![2, 1, 2]);
        assert_eq!(s.loads[0][1][0], 1.0);
        let j0 = BucketGuess {
            epsilon: 0.5,
            opt_estimate: 1.0,
            jumps: 0,
            kinds: kinds_for(0),
            base_guess: vec![0.0],
            delta_guess: vec![0.75],
        };
        let s = build_santa(&inst, &j0);
        assert_eq!(s.m, 1);
        assert_eq!(s.lower_bounds, vec![vec![0.75]]);
    }

    #[test]
    fn permutation_assembly() {
        let a = Assignment {
            machine_of: vec![Some(0), Some(1)],
        };
        assert_eq!(assemble_permutation(&a, 2).order, vec![1, 0]);
        let all_first = Assignment {
            machine_of: vec![Some(0); 3],
        };
        assert_eq!(assemble_permutation(&all_first, 1).order, vec![0, 1, 2]);
        assert_eq!(assemble_permutation(&Assignment::empty(3), 3).order, vec![0, 1, 2]);
    }

    #[test]
    fn solve_prefers_risky_first() {
        let inst = risky_safe();
        let sigma_star = Permutation::new(vec![1, 0]).unwrap();
        let out = solve(
            &inst,
            &ProphetParams::new(0.1),
            &Mode::OracleGuided(sigma_star),
            &mut crate::rng::stream(3, &[]),
        )
        .unwrap();
        assert_eq!(out.permutation.order, vec![1, 0]);
        assert_eq!(out.value, 1.5);
        assert!(!out.fallback);
    }

    #[test]
    fn solve_single_variable() {
        let inst = ProphetInstance::new(vec![rv(&[(0.0, 0.5), (2.0, 0.5)])]).unwrap();
        let out = solve(
            &inst,
            &ProphetParams::new(0.1),
            &Mode::OracleGuided(Permutation::identity(1)),
            &mut crate::rng::stream(3, &[]),
        )
        .unwrap();
        assert_eq!(out.permutation.order, vec![0]);
        assert_eq!(out.value, 1.0);
    }
}
