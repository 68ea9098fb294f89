//! Non-adaptive ProbeMax and its top-r generalization.
//!
//! The single-value solver guesses the CDF of the optimal maximum on a
//! discretized support and asks a one-machine Santa Claus instance for a
//! subset whose maximum has a dominated CDF. Top-r uses an LP relaxation with
//! two-stage randomized rounding when `r` is large, and a random partition
//! into single-value subproblems when `k` is large.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{cdf_of_max, expected_max_or_zero, union_support, DiscreteRV, SupportGrid, TOL};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpSolution, Relation, Sense};
use crate::santa_claus::{self, Assignment, SantaInstance, SantaParams};
use crate::Mode;

fn default_r() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeMaxInstance {
    pub rvs: Vec<DiscreteRV>,
    pub k: usize,
    #[serde(default = "default_r")]
    pub r: usize,
}

impl ProbeMaxInstance {
    pub fn new(rvs: Vec<DiscreteRV>, k: usize, r: usize) -> Result<Self> {
        let inst = ProbeMaxInstance { rvs, k, r };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.r && self.r <= self.k && self.k <= self.rvs.len()) {
            return Err(Error::InvalidInput(format!(
                "need 1 <= r <= k <= n, got r = {}, k = {}, n = {}",
                self.r,
                self.k,
                self.rvs.len()
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.rvs.len()
    }

    pub fn subset_rvs(&self, subset: &[usize]) -> Vec<&DiscreteRV> {
        subset.iter().map(|&i| &self.rvs[i]).collect()
    }

    /// Exact `E[max]` of a subset (zero for the empty set).
    pub fn value_of(&self, subset: &[usize]) -> f64 {
        expected_max_or_zero(&self.subset_rvs(subset))
    }
}

/// Greedy on the marginal gain in `E[max]`, lowest index on ties.
pub fn greedy_baseline(instance: &ProbeMaxInstance) -> (Vec<usize>, f64) {
    let mut chosen: Vec<usize> = Vec::new();
    let mut value = 0.0;
    for _ in 0..instance.k.min(instance.n()) {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..instance.n()).filter(|i| !chosen.contains(i)) {
            let mut trial = chosen.clone();
            trial.push(i);
            let v = instance.value_of(&trial);
            if best.map_or(true, |(_, bv)| v > bv + 1e-15) {
                best = Some((i, v));
            }
        }
        let Some((i, v)) = best else { break };
        chosen.push(i);
        value = v;
    }
    chosen.sort_unstable();
    (chosen, value)
}

/// Largest value of the guessed CDF support that is still "critical".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeavyValue {
    /// `P[M <= 0]` is already at least `1 - eps^2`; nothing is critical.
    Empty,
    /// Grid index of the largest critical value.
    Index(usize),
    /// Every grid value is critical.
    Infinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfGuess {
    pub epsilon: f64,
    pub grid: SupportGrid,
    pub v_heavy: HeavyValue,
    /// Guessed `P[M <= v]` for each critical grid value, in grid order.
    pub p_tilde: Vec<f64>,
}

impl CdfGuess {
    pub fn critical_len(&self) -> usize {
        critical_len(&self.grid, self.v_heavy)
    }

    pub fn critical_values(&self) -> Vec<f64> {
        (0..self.critical_len()).map(|j| self.grid.value(j)).collect()
    }
}

fn critical_len(grid: &SupportGrid, heavy: HeavyValue) -> usize {
    match heavy {
        HeavyValue::Empty => 0,
        HeavyValue::Index(j) => j + 1,
        HeavyValue::Infinite => grid.len(),
    }
}

/// The probability grid `{2 g, 3 g, ..., <= 1 - g}` for `g = accuracy^2`.
pub fn probability_grid(accuracy: f64) -> Vec<f64> {
    let g = accuracy * accuracy;
    let count = ((1.0 - 3.0 * g) / g + TOL).floor().max(0.0) as usize + 1;
    (0..count).map(|a| (a + 2) as f64 * g).collect()
}

/// Smallest grid value at or above `p`, clamped into the grid.
pub fn snap_up(p: f64, grid: &[f64]) -> f64 {
    grid.iter()
        .copied()
        .find(|&g| g >= p - 1e-12)
        .unwrap_or(*grid.last().expect("probability grid is nonempty"))
}

/// All `(v_heavy, non-decreasing p_tilde)` combinations, lazily.
pub struct CdfGuessIter {
    epsilon: f64,
    grid: SupportGrid,
    probs: Vec<f64>,
    heavy: Vec<HeavyValue>,
    heavy_pos: usize,
    seq: Option<Vec<usize>>,
}

impl Iterator for CdfGuessIter {
    type Item = CdfGuess;

    fn next(&mut self) -> Option<CdfGuess> {
        let heavy = *self.heavy.get(self.heavy_pos)?;
        let seq = self.seq.clone().expect("sequence present while heavy values remain");
        let guess = CdfGuess {
            epsilon: self.epsilon,
            grid: self.grid,
            v_heavy: heavy,
            p_tilde: seq.iter().map(|&a| self.probs[a]).collect(),
        };
        // Advance to the next non-decreasing sequence, or the next heavy value.
        let top = self.probs.len() - 1;
        let mut next = seq;
        match (0..next.len()).rev().find(|&i| next[i] < top) {
            Some(i) => {
                let v = next[i] + 1;
                next[i..].iter_mut().for_each(|a| *a = v);
                self.seq = Some(next);
            }
            None => {
                self.heavy_pos += 1;
                self.seq = self
                    .heavy
                    .get(self.heavy_pos)
                    .map(|&h| vec![0; critical_len(&self.grid, h)]);
            }
        }
        Some(guess)
    }
}

pub fn enumerate_cdf_guesses(grid: &SupportGrid, epsilon: f64) -> CdfGuessIter {
    let mut heavy = vec![HeavyValue::Empty];
    heavy.extend((0..grid.len()).map(HeavyValue::Index));
    heavy.push(HeavyValue::Infinite);
    CdfGuessIter {
        epsilon,
        grid: *grid,
        probs: probability_grid(epsilon),
        heavy,
        heavy_pos: 0,
        seq: Some(Vec::new()),
    }
}

/// The guess consistent with the reference subset `s_star` over `rvs`.
pub fn guess_from_reference(rvs: &[DiscreteRV], s_star: &[usize], epsilon: f64, grid: &SupportGrid) -> CdfGuess {
    let members: Vec<&DiscreteRV> = s_star.iter().map(|&i| &rvs[i]).collect();
    let eps2 = epsilon * epsilon;
    let values = grid.values();
    let cdf: Vec<f64> = values.iter().map(|&v| cdf_of_max(&members, v)).collect();
    let v_heavy = match (0..values.len()).rev().find(|&j| cdf[j] < 1.0 - eps2 - 1e-12) {
        Some(j) => HeavyValue::Index(j),
        None => HeavyValue::Empty,
    };
    let probs = probability_grid(epsilon);
    let p_tilde = (0..critical_len(grid, v_heavy)).map(|j| snap_up(cdf[j], &probs)).collect();
    CdfGuess {
        epsilon,
        grid: *grid,
        v_heavy,
        p_tilde,
    }
}

/// `ln(1 / P[X <= v])`, with the zero-probability case capped at `cap`.
pub fn log_load(p_le: f64, cap: f64) -> f64 {
    if p_le <= 0.0 {
        cap
    } else {
        (-p_le.ln()).max(0.0).min(cap)
    }
}

/// Single-machine covering instance with one dimension per critical value.
///
/// A variable that can never be at most `v` gets load `2 ln(1/p) / eps^4`, so on
/// its own it covers dimension `v` even after a relative violation below 1/2.
pub fn build_ip_cdf(rvs: &[DiscreteRV], k: usize, guess: &CdfGuess) -> SantaInstance {
    let values = guess.critical_values();
    let eps4 = guess.epsilon.powi(4);
    let bounds: Vec<f64> = guess.p_tilde.iter().map(|p| -p.ln()).collect();
    let loads = rvs
        .iter()
        .map(|rv| {
            values
                .iter()
                .zip(&bounds)
                .map(|(&v, &b)| log_load(rv.cdf(v), 2.0 * b / eps4))
                .collect()
        })
        .collect();
    SantaInstance {
        m: 1,
        d: values.len(),
        capacities: vec![k],
        lower_bounds: vec![bounds],
        loads: vec![loads],
    }
}

/// `P[M(S) <= v] <= (1 + eps^2) p_tilde + eps^2` on every critical value.
pub fn verify_cdf_equivalent(rvs: &[DiscreteRV], subset: &[usize], guess: &CdfGuess) -> bool {
    let members: Vec<&DiscreteRV> = subset.iter().map(|&i| &rvs[i]).collect();
    let eps2 = guess.epsilon * guess.epsilon;
    guess
        .critical_values()
        .iter()
        .zip(&guess.p_tilde)
        .all(|(&v, &p)| cdf_of_max(&members, v) <= (1.0 + eps2) * p + eps2 + 1e-12)
}

/// The support grid `{0, eps E, ..., E / eps}`.
pub fn support_grid(estimate: f64, epsilon: f64) -> Result<SupportGrid> {
    SupportGrid::new(epsilon * estimate, estimate / epsilon)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeMaxOutcome {
    pub subset: Vec<usize>,
    pub value: f64,
    pub baseline_value: f64,
    /// No verified guess beat greedy, so the greedy subset was returned.
    pub fallback: bool,
    /// The guess behind the returned subset, with the discretized variables it refers to.
    pub guess: Option<(CdfGuess, Vec<DiscreteRV>)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeMaxParams {
    pub epsilon: f64,
    pub retries: usize,
}

impl ProbeMaxParams {
    pub fn new(epsilon: f64) -> Self {
        ProbeMaxParams { epsilon, retries: 20 }
    }
}

fn max_normalized_load(santa: &SantaInstance, assignment: &Assignment) -> f64 {
    (0..santa.d)
        .map(|d| santa.load(assignment, 0, d) / santa.lower_bounds[0][d])
        .fold(0.0, f64::max)
}

pub fn solve_nonadaptive<R: Rng + ?Sized>(
    instance: &ProbeMaxInstance,
    params: &ProbeMaxParams,
    mode: &Mode<Vec<usize>>,
    rng: &mut R,
) -> Result<ProbeMaxOutcome> {
    instance.validate()?;
    let eps = params.epsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon {eps} outside (0, 1)")));
    }
    let (greedy, greedy_value) = greedy_baseline(instance);
    if instance.k >= instance.n() || greedy_value <= 0.0 {
        return Ok(ProbeMaxOutcome {
            subset: greedy,
            value: greedy_value,
            baseline_value: greedy_value,
            fallback: false,
            guess: None,
        });
    }
    let grid = support_grid(greedy_value, eps)?;
    let disc: Vec<DiscreteRV> = instance.rvs.iter().map(|rv| rv.discretize_down(&grid)).collect();
    let mut best: Option<(f64, Vec<usize>, CdfGuess)> = None;

    let mut attempt = |guess: CdfGuess, reference: Option<&[usize]>, rng: &mut R| {
        let santa = build_ip_cdf(&disc, instance.k, &guess);
        let ref_assignment = reference.map(|s| Assignment {
            machine_of: (0..instance.n()).map(|i| s.contains(&i).then_some(0)).collect(),
        });
        let rho = ref_assignment
            .as_ref()
            .map_or(0.0, |a| max_normalized_load(&santa, a))
            .max(eps.powi(-4));
        let mut sp = SantaParams::new(eps.powi(3) / 6.0, rho);
        sp.retries = params.retries;
        let santa_mode = match ref_assignment {
            Some(a) => Mode::OracleGuided(a),
            None => Mode::Enumerate { budget: 16 },
        };
        let Ok(out) = santa_claus::solve(&santa, &sp, &santa_mode, rng) else {
            return;
        };
        let subset = out.assignment.jobs_on(0);
        if !verify_cdf_equivalent(&disc, &subset, &guess) {
            return;
        }
        let value = instance.value_of(&subset);
        if best.as_ref().map_or(true, |(bv, bs, _)| value > *bv + 1e-12 || (value >= *bv - 1e-12 && subset < *bs)) {
            best = Some((value, subset, guess));
        }
    };

    match mode {
        Mode::OracleGuided(s_star) => {
            if s_star.len() > instance.k || s_star.iter().any(|&i| i >= instance.n()) {
                return Err(Error::InvalidInput("reference subset is not feasible".into()));
            }
            let guess = guess_from_reference(&disc, s_star, eps, &grid);
            attempt(guess, Some(s_star), rng);
        }
        Mode::Enumerate { budget } => {
            for guess in enumerate_cdf_guesses(&grid, eps).take(*budget) {
                attempt(guess, None, rng);
            }
        }
    }

    Ok(match best {
        Some((value, subset, guess)) if value >= greedy_value - 1e-12 => ProbeMaxOutcome {
            subset,
            value,
            baseline_value: greedy_value,
            fallback: false,
            guess: Some((guess, disc)),
        },
        _ => ProbeMaxOutcome {
            subset: greedy,
            value: greedy_value,
            baseline_value: greedy_value,
            fallback: true,
            guess: None,
        },
    })
}

/// Exact `E[sum of the r largest values]` of independent variables.
///
/// Uses `M_r = sum_l (u_l - u_{l-1}) min(r, #{i : X_i >= u_l})` over the sorted
/// union support, with the count distributed as a Poisson binomial.
pub fn expected_top_r(rvs: &[&DiscreteRV], r: usize) -> f64 {
    let support = union_support(rvs);
    let mut prev = 0.0;
    let mut total = 0.0;
    for &u in &support {
        if u <= 0.0 {
            continue;
        }
        // dist[c] = P[exactly c variables are >= u]
        let mut dist = vec![0.0; rvs.len() + 1];
        dist[0] = 1.0;
        for (seen, rv) in rvs.iter().enumerate() {
            let q = 1.0 - rv.cdf(u) + rv.pmf(u);
            for c in (0..=seen + 1).rev() {
                let stay = dist[c] * (1.0 - q);
                let up = if c > 0 { dist[c - 1] * q } else { 0.0 };
                dist[c] = stay + up;
            }
        }
        let expected_min: f64 = dist.iter().enumerate().map(|(c, p)| p * c.min(r) as f64).sum();
        total += (u - prev) * expected_min;
        prev = u;
    }
    total
}

/// The LP relaxation for top-r with its variable layout.
#[derive(Clone, Debug)]
pub struct ToprLp {
    pub lp: LinearProgram,
    /// `y` variables as `(variable index i, value v, probability p)`; `x_i` is variable `i`.
    pub y: Vec<(usize, f64, f64)>,
    pub n: usize,
}

impl ToprLp {
    pub fn y_index(&self, pos: usize) -> usize {
        self.n + pos
    }
}

pub fn build_topr_lp(instance: &ProbeMaxInstance) -> ToprLp {
    let n = instance.n();
    let y: Vec<(usize, f64, f64)> = instance
        .rvs
        .iter()
        .enumerate()
        .flat_map(|(i, rv)| rv.atoms().iter().map(move |a| (i, a.value, a.prob)))
        .collect();
    let mut lp = LinearProgram::new(n + y.len(), Sense::Maximize);
    for v in 0..n + y.len() {
        lp.set_bounds(v, 0.0, 1.0).expect("unit bounds are valid");
    }
    for (pos, &(_, v, _)) in y.iter().enumerate() {
        lp.set_objective_coeff(n + pos, v);
    }
    let xs: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
    lp.add_sparse_row(&xs, Relation::Le, instance.k as f64);
    for (pos, &(i, _, p)) in y.iter().enumerate() {
        lp.add_sparse_row(&[(n + pos, 1.0), (i, -p)], Relation::Le, 0.0);
    }
    let ys: Vec<(usize, f64)> = (0..y.len()).map(|pos| (n + pos, 1.0)).collect();
    lp.add_sparse_row(&ys, Relation::Le, instance.r as f64);
    ToprLp { lp, y, n }
}

/// `(1 - eps)^2 sum y`: the expected number of claim-stage picks.
pub fn expected_pick_count(topr: &ToprLp, solution: &LpSolution, epsilon: f64) -> f64 {
    let total: f64 = (0..topr.y.len()).map(|pos| solution.values[topr.y_index(pos)]).sum();
    (1.0 - epsilon).powi(2) * total
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToprOutcome {
    pub subset: Vec<usize>,
    pub exact_value: f64,
    /// Monte Carlo estimate of the value and its 95% half-width.
    pub mc_value: (f64, f64),
    pub lp_value: f64,
    pub attempts: usize,
}

pub const TOPR_RESAMPLES: usize = 100;

/// Monte Carlo estimate of `E[M_r(S)]` with a normal-approximation 95% half-width.
pub fn mc_top_r<R: Rng + ?Sized>(rvs: &[&DiscreteRV], r: usize, samples: usize, rng: &mut R) -> (f64, f64) {
    if samples == 0 {
        return (0.0, f64::INFINITY);
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut draw = Vec::with_capacity(rvs.len());
    for _ in 0..samples {
        draw.clear();
        for rv in rvs {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut x = rv.max_value();
            for a in rv.atoms() {
                acc += a.prob;
                if u < acc {
                    x = a.value;
                    break;
                }
            }
            draw.push(x);
        }
        draw.sort_by(|a, b| b.total_cmp(a));
        let s: f64 = draw.iter().take(r).sum();
        sum += s;
        sum_sq += s * s;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0);
    (mean, 1.96 * (var / nf).sqrt())
}

/// Independent inclusion with probability `(1 - eps) x_i`, resampled until at most `k` are kept.
pub fn solve_topr_large<R: Rng + ?Sized>(instance: &ProbeMaxInstance, epsilon: f64, rng: &mut R) -> Result<ToprOutcome> {
    instance.validate()?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon {epsilon} outside (0, 1)")));
    }
    if instance.r as f64 <= epsilon.powi(-3) + TOL {
        return Err(Error::WrongRegime(format!(
            "r = {} must exceed 1/eps^3 = {:.3}",
            instance.r,
            epsilon.powi(-3)
        )));
    }
    let topr = build_topr_lp(instance);
    let sol = topr.lp.solve();
    if !sol.is_feasible() {
        return Err(Error::Infeasible);
    }
    for attempt in 1..=TOPR_RESAMPLES {
        let subset: Vec<usize> = (0..instance.n())
            .filter(|&i| rng.gen::<f64>() < (1.0 - epsilon) * sol.values[i])
            .collect();
        if subset.len() <= instance.k {
            let members = instance.subset_rvs(&subset);
            let exact_value = expected_top_r(&members, instance.r);
            let mc_value = mc_top_r(&members, instance.r, 2000, rng);
            return Ok(ToprOutcome {
                subset,
                exact_value,
                mc_value,
                lp_value: sol.objective_value,
                attempts: attempt,
            });
        }
    }
    Err(Error::RetriesExhausted {
        attempts: TOPR_RESAMPLES,
    })
}

/// Uniform random partition into `floor(r / eps)` parts, each solved for its
/// maximum with budget `floor(eps k / r)`.
pub fn solve_topr_partition<R, F>(instance: &ProbeMaxInstance, epsilon: f64, mut inner: F, rng: &mut R) -> Result<Vec<usize>>
where
    R: Rng + ?Sized,
    F: FnMut(&ProbeMaxInstance, &mut R) -> Result<Vec<usize>>,
{
    instance.validate()?;
    let r = instance.r as f64;
    if r > epsilon.powi(-3) + TOL || instance.k as f64 <= epsilon.powi(-4) + TOL {
        return Err(Error::WrongRegime(format!(
            "partitioning needs r <= 1/eps^3 and k > 1/eps^4 (r = {}, k = {})",
            instance.r, instance.k
        )));
    }
    let parts = ((r / epsilon) + TOL).floor().max(1.0) as usize;
    let budget = ((epsilon * instance.k as f64 / r) + TOL).floor() as usize;
    let labels: Vec<usize> = (0..instance.n()).map(|_| rng.gen_range(0..parts)).collect();
    let mut union = Vec::new();
    for part in 0..parts {
        let members: Vec<usize> = (0..instance.n()).filter(|&i| labels[i] == part).collect();
        if members.is_empty() || budget == 0 {
            continue;
        }
        let sub = ProbeMaxInstance {
            rvs: members.iter().map(|&i| instance.rvs[i].clone()).collect(),
            k: budget.min(members.len()),
            r: 1,
        };
        let chosen = inner(&sub, rng)?;
        union.extend(chosen.into_iter().take(budget).map(|local| members[local]));
    }
    union.sort_unstable();
    Ok(union)
}

/// Random partition labels used by [`solve_topr_partition`], exposed for inspection.
pub fn partition_parts(r: usize, epsilon: f64) -> usize {
    ((r as f64 / epsilon) + TOL).floor().max(1.0) as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToprSlotGuess {
    pub grid: SupportGrid,
    pub accuracy: f64,
    /// Per slot of the reference set: guessed `P[X <= v]` for each grid value below its heavy cutoff.
    pub p_tilde: Vec<Vec<f64>>,
}

/// Small-`r`, small-`k` top-r: guess each reference variable's CDF on the
/// `eps E / r` grid and cover every slot with one variable of dominated CDF.
pub fn solve_topr_oracle<R: Rng + ?Sized>(
    instance: &ProbeMaxInstance,
    epsilon: f64,
    accuracy: f64,
    reference: &[usize],
    retries: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, f64)> {
    instance.validate()?;
    if reference.len() > instance.k || reference.iter().any(|&i| i >= instance.n()) {
        return Err(Error::InvalidInput("reference subset is not feasible".into()));
    }
    let r = instance.r as f64;
    let ref_value = expected_top_r(&instance.subset_rvs(reference), instance.r);
    if ref_value <= 0.0 || reference.is_empty() {
        return Ok((reference.to_vec(), ref_value));
    }
    let grid = SupportGrid::new(epsilon * ref_value / r, ref_value / (r * epsilon))?;
    let disc: Vec<DiscreteRV> = instance.rvs.iter().map(|rv| rv.discretize_down(&grid)).collect();
    let probs = probability_grid(accuracy);
    let acc2 = accuracy * accuracy;
    let values = grid.values();
    let mut dims: Vec<(usize, f64, f64)> = Vec::new();
    for (slot, &i) in reference.iter().enumerate() {
        for &v in &values {
            let p = disc[i].cdf(v);
            if p < 1.0 - acc2 - 1e-12 {
                dims.push((slot, v, snap_up(p, &probs)));
            }
        }
    }
    let slots = reference.len();
    let mut lower_bounds = vec![vec![0.0; dims.len()]; slots];
    for (d, &(slot, _, p)) in dims.iter().enumerate() {
        lower_bounds[slot][d] = -p.ln();
    }
    let loads: Vec<Vec<Vec<f64>>> = (0..slots)
        .map(|_| {
            disc.iter()
                .map(|rv| {
                    dims.iter()
                        .map(|&(_, v, p)| log_load(rv.cdf(v), 2.0 * -p.ln() / acc2.powi(2)))
                        .collect()
                })
                .collect()
        })
        .collect();
    let santa = SantaInstance {
        m: slots,
        d: dims.len(),
        capacities: vec![1; slots],
        lower_bounds,
        loads,
    };
    let reference_assignment = Assignment {
        machine_of: (0..instance.n()).map(|i| reference.iter().position(|&s| s == i)).collect(),
    };
    let rho = (0..slots)
        .flat_map(|s| santa.active_dims(s).into_iter().map(move |d| (s, d)))
        .map(|(s, d)| santa.load(&reference_assignment, s, d) / santa.lower_bounds[s][d])
        .fold(acc2.powi(-2), f64::max);
    let mut sp = SantaParams::new(accuracy.powi(3) / 6.0, rho);
    sp.retries = retries;
    let out = santa_claus::solve(&santa, &sp, &Mode::OracleGuided(reference_assignment), rng)?;
    let mut subset: Vec<usize> = (0..instance.n()).filter(|&i| out.assignment.machine_of[i].is_some()).collect();
    subset.sort_unstable();
    let value = expected_top_r(&instance.subset_rvs(&subset), instance.r);
    Ok((subset, value))
}
