//! Multi-dimensional Santa Claus: cover per-machine load lower bounds in every
//! active dimension while respecting per-machine cardinality limits.
//!
//! The solver guesses per-type job counts and small-load totals, solves the
//! strengthened LP relaxation, and rounds it with dependent rounding. Every
//! returned assignment has passed [`verify`].

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpSolution, Relation, Sense};
use crate::rng::stream;
use crate::rounding::{dependent_round, BipartiteFractional};
use crate::Mode;

const EPS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SantaInstance {
    pub m: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub capacities: Vec<usize>,
    pub lower_bounds: Vec<Vec<f64>>,
    /// `loads[i][j][d]`: load on machine `i`, dimension `d` when job `j` is assigned to it.
    pub loads: Vec<Vec<Vec<f64>>>,
}

impl SantaInstance {
    pub fn new(
        capacities: Vec<usize>,
        lower_bounds: Vec<Vec<f64>>,
        loads: Vec<Vec<Vec<f64>>>,
        d: usize,
    ) -> Result<Self> {
        let inst = SantaInstance {
            m: capacities.len(),
            d,
            capacities,
            lower_bounds,
            loads,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.capacities.len() != self.m || self.lower_bounds.len() != self.m || self.loads.len() != self.m {
            return bad(format!("expected {} machines in every field", self.m));
        }
        let n = self.n();
        for i in 0..self.m {
            if self.lower_bounds[i].len() != self.d {
                return bad(format!("machine {i}: lower bound has wrong dimension"));
            }
            if self.lower_bounds[i].iter().any(|l| !l.is_finite() || *l < 0.0) {
                return bad(format!("machine {i}: lower bounds must be finite and non-negative"));
            }
            if self.loads[i].len() != n {
                return bad(format!("machine {i}: expected {n} jobs"));
            }
            for (j, l) in self.loads[i].iter().enumerate() {
                if l.len() != self.d || l.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return bad(format!("load ({i}, {j}) must be {} finite non-negative reals", self.d));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.loads.first().map_or(0, Vec::len)
    }

    /// Dimensions with a positive lower bound on machine `i`.
    pub fn active_dims(&self, i: usize) -> Vec<usize> {
        (0..self.d).filter(|&d| self.lower_bounds[i][d] > 0.0).collect()
    }

    /// Rescales every active dimension so its lower bound becomes 1.
    pub fn normalize(&self) -> SantaInstance {
        let mut out = self.clone();
        for i in 0..self.m {
            for d in 0..self.d {
                let l = self.lower_bounds[i][d];
                if l > 0.0 {
                    out.lower_bounds[i][d] = 1.0;
                    for j in 0..self.n() {
                        out.loads[i][j][d] = self.loads[i][j][d] / l;
                    }
                }
            }
        }
        out
    }

    /// Total load of `assignment` on machine `i`, dimension `d`.
    pub fn load(&self, assignment: &Assignment, i: usize, d: usize) -> f64 {
        assignment
            .machine_of
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == Some(i))
            .map(|(j, _)| self.loads[i][j][d])
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub machine_of: Vec<Option<usize>>,
}

impl Assignment {
    pub fn empty(n: usize) -> Self {
        Assignment {
            machine_of: vec![None; n],
        }
    }

    pub fn jobs_on(&self, machine: usize) -> Vec<usize> {
        (0..self.machine_of.len())
            .filter(|&j| self.machine_of[j] == Some(machine))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadCheck {
    pub machine: usize,
    pub dim: usize,
    pub load: f64,
    pub bound: f64,
    /// `load - bound`; negative values are tolerated down to `-epsilon_out * bound`.
    pub slack: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    /// Every job index refers to an existing machine.
    pub assignment_ok: bool,
    /// `(used, capacity)` per machine.
    pub capacity: Vec<(usize, usize)>,
    pub loads: Vec<LoadCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.assignment_ok && self.capacity.iter().all(|(u, k)| u <= k) && self.loads.iter().all(|c| c.ok)
    }

    pub fn min_normalized_load(&self) -> f64 {
        self.loads.iter().map(|c| c.load / c.bound).fold(f64::INFINITY, f64::min)
    }
}

pub fn verify(instance: &SantaInstance, assignment: &Assignment, epsilon_out: f64) -> VerifyReport {
    let assignment_ok = assignment.machine_of.len() == instance.n()
        && assignment.machine_of.iter().all(|m| m.map_or(true, |i| i < instance.m));
    let mut capacity = Vec::with_capacity(instance.m);
    let mut loads = Vec::new();
    for i in 0..instance.m {
        let used = assignment.machine_of.iter().filter(|m| **m == Some(i)).count();
        capacity.push((used, instance.capacities[i]));
        if !assignment_ok {
            continue;
        }
        for d in instance.active_dims(i) {
            let bound = instance.lower_bounds[i][d];
            let load = instance.load(assignment, i, d);
            loads.push(LoadCheck {
                machine: i,
                dim: d,
                load,
                bound,
                slack: load - bound,
                ok: load >= (1.0 - epsilon_out) * bound - EPS_TOL * bound.max(1.0),
            });
        }
    }
    VerifyReport {
        assignment_ok,
        capacity,
        loads,
    }
}

/// Feasible for the exact problem, with every active normalized load at most `rho`.
pub fn check_rho_feasible(instance: &SantaInstance, assignment: &Assignment, rho: f64) -> bool {
    let report = verify(instance, assignment, 0.0);
    report.passed() && report.loads.iter().all(|c| c.load <= rho * c.bound + EPS_TOL * c.bound.max(1.0))
}

/// The geometric partition `I_0 = [0, delta]`, `I_q = ((1+eps)^(q-1) delta, (1+eps)^q delta]`
/// of `[0, rho]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segments {
    pub epsilon: f64,
    pub delta: f64,
    pub rho: f64,
    /// Smallest `Q` with `(1+eps)^Q delta >= rho`.
    pub q_max: usize,
}

impl Segments {
    pub fn new(epsilon: f64, rho: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !(delta > 0.0) || !(rho > 0.0) {
            return Err(Error::InvalidInput("epsilon, rho and delta must be positive".into()));
        }
        let mut q = if rho <= delta {
            0
        } else {
            ((rho / delta).ln() / epsilon.ln_1p()).ceil().max(0.0) as usize
        };
        while q > 0 && Self::upper(epsilon, delta, q - 1) >= rho {
            q -= 1;
        }
        while Self::upper(epsilon, delta, q) < rho {
            q += 1;
        }
        Ok(Segments {
            epsilon,
            delta,
            rho,
            q_max: q,
        })
    }

    fn upper(epsilon: f64, delta: f64, q: usize) -> f64 {
        delta * (1.0 + epsilon).powf(q as f64)
    }

    /// `(lo, hi)` of segment `q`; segment 0 is closed at 0.
    pub fn bounds(&self, q: usize) -> (f64, f64) {
        if q == 0 {
            (0.0, self.delta)
        } else {
            (
                Self::upper(self.epsilon, self.delta, q - 1),
                Self::upper(self.epsilon, self.delta, q),
            )
        }
    }

    /// Segment containing `x`, or `None` when `x > rho`.
    pub fn index(&self, x: f64) -> Option<usize> {
        if x > self.rho {
            return None;
        }
        if x <= self.delta {
            return Some(0);
        }
        let mut q = ((x / self.delta).ln() / self.epsilon.ln_1p()).ceil().max(1.0) as usize;
        while q > 1 && Self::upper(self.epsilon, self.delta, q - 1) >= x {
            q -= 1;
        }
        while Self::upper(self.epsilon, self.delta, q) < x {
            q += 1;
        }
        Some(q.min(self.q_max))
    }
}

/// Default small-load threshold `(eps / (ln(mD) ln(rho)))^(D^2)`.
///
/// Both logarithms are floored at 1 and the result at `1e-12`.
pub fn default_delta(epsilon: f64, rho: f64, m: usize, d: usize) -> f64 {
    let lmd = ((m.max(1) * d.max(1)) as f64).ln().max(1.0);
    let lrho = rho.ln().max(1.0);
    let exp = (d.max(1) * d.max(1)) as i32;
    (epsilon / (lmd * lrho)).powi(exp).clamp(1e-12, 1.0)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum JobType {
    /// Segment index per active dimension of the machine, in `active_dims` order.
    Type(Vec<usize>),
    OutOfRange,
}

impl JobType {
    pub fn is_zero(&self) -> bool {
        matches!(self, JobType::Type(nu) if nu.iter().all(|&q| q == 0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypeMap {
    pub segments: Segments,
    pub active: Vec<Vec<usize>>,
    /// `type_of[i][j]`.
    pub type_of: Vec<Vec<JobType>>,
}

impl TypeMap {
    /// Distinct nonzero in-range types present on machine `i`, each with its jobs.
    pub fn nonzero_types(&self, i: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut by_type: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (j, t) in self.type_of[i].iter().enumerate() {
            if let JobType::Type(nu) = t {
                if !t.is_zero() {
                    by_type.entry(nu.clone()).or_default().push(j);
                }
            }
        }
        by_type.into_iter().collect()
    }

    /// Whether job `j` is small (segment 0) along the `pos`-th active dimension of machine `i`.
    fn small_along(&self, i: usize, j: usize, pos: usize) -> bool {
        matches!(&self.type_of[i][j], JobType::Type(nu) if nu[pos] == 0)
    }
}

pub fn classify_types(instance: &SantaInstance, epsilon: f64, rho: f64, delta: f64) -> Result<TypeMap> {
    let segments = Segments::new(epsilon, rho, delta)?;
    let active: Vec<Vec<usize>> = (0..instance.m).map(|i| instance.active_dims(i)).collect();
    let type_of = (0..instance.m)
        .map(|i| {
            (0..instance.n())
                .map(|j| {
                    let nu: Option<Vec<usize>> = active[i]
                        .iter()
                        .map(|&d| segments.index(instance.loads[i][j][d]))
                        .collect();
                    nu.map_or(JobType::OutOfRange, JobType::Type)
                })
                .collect()
        })
        .collect();
    Ok(TypeMap {
        segments,
        active,
        type_of,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypeGuess {
    pub types: TypeMap,
    /// Guessed job count per `(machine, nonzero type)`; absent types are zero.
    pub khat: BTreeMap<(usize, Vec<usize>), usize>,
    /// Guessed small-load total per machine and dimension (zero on inactive dimensions).
    pub lhat: Vec<Vec<f64>>,
}

impl TypeGuess {
    pub fn delta(&self) -> f64 {
        self.types.segments.delta
    }
}

/// Upper bound on the guessed number of large jobs per machine, `|A_i| rho / delta`.
fn large_count_bound(types: &TypeMap, i: usize) -> usize {
    let s = &types.segments;
    (types.active[i].len() as f64 * s.rho / s.delta + EPS_TOL).floor().min(usize::MAX as f64 / 2.0) as usize
}

fn small_load_total(instance: &SantaInstance, types: &TypeMap, i: usize, pos: usize, jobs: impl Iterator<Item = usize>) -> f64 {
    let d = types.active[i][pos];
    jobs.filter(|&j| types.small_along(i, j, pos))
        .map(|j| instance.loads[i][j][d])
        .sum()
}

#[derive(Clone, Debug)]
enum Digit {
    Khat { machine: usize, ty: Vec<usize> },
    Lhat { machine: usize, dim: usize },
}

/// Lazy enumeration of type guesses, largest values first.
pub struct GuessIter {
    types: TypeMap,
    epsilon: f64,
    digits: Vec<Digit>,
    maxima: Vec<usize>,
    current: Option<Vec<usize>>,
    sum_limit: Vec<usize>,
    d: usize,
}

impl Iterator for GuessIter {
    type Item = TypeGuess;

    fn next(&mut self) -> Option<TypeGuess> {
        loop {
            let cur = self.current.clone()?;
            // Advance the odometer (last digit fastest, counting down).
            let mut next = cur.clone();
            let mut pos = next.len();
            self.current = loop {
                if pos == 0 {
                    break None;
                }
                pos -= 1;
                if next[pos] > 0 {
                    next[pos] -= 1;
                    break Some(next);
                }
                next[pos] = self.maxima[pos];
            };
            if let Some(g) = self.materialize(&cur) {
                return Some(g);
            }
        }
    }
}

impl GuessIter {
    fn materialize(&self, values: &[usize]) -> Option<TypeGuess> {
        let m = self.types.type_of.len();
        let mut sums = vec![0usize; m];
        let mut khat = BTreeMap::new();
        let mut lhat = vec![vec![0.0; self.d]; m];
        for (digit, &v) in self.digits.iter().zip(values) {
            match digit {
                Digit::Khat { machine, ty } => {
                    sums[*machine] += v;
                    khat.insert((*machine, ty.clone()), v);
                }
                Digit::Lhat { machine, dim } => lhat[*machine][*dim] = v as f64 * self.epsilon,
            }
        }
        if sums.iter().zip(&self.sum_limit).any(|(s, l)| s > l) {
            return None;
        }
        Some(TypeGuess {
            types: self.types.clone(),
            khat,
            lhat,
        })
    }
}

pub fn enumerate_guesses(instance: &SantaInstance, epsilon: f64, rho: f64, delta: f64) -> Result<GuessIter> {
    let types = classify_types(instance, epsilon, rho, delta)?;
    let mut digits = Vec::new();
    let mut maxima = Vec::new();
    let mut sum_limit = Vec::new();
    for i in 0..instance.m {
        let bound = large_count_bound(&types, i).min(instance.capacities[i]);
        sum_limit.push(bound);
        for (ty, jobs) in types.nonzero_types(i) {
            maxima.push(jobs.len().min(bound));
            digits.push(Digit::Khat { machine: i, ty });
        }
        for (pos, &d) in types.active[i].iter().enumerate() {
            let avail = small_load_total(instance, &types, i, pos, 0..instance.n());
            maxima.push((avail.min(rho) / epsilon + EPS_TOL).floor() as usize);
            digits.push(Digit::Lhat { machine: i, dim: d });
        }
    }
    Ok(GuessIter {
        types,
        epsilon,
        current: Some(maxima.clone()),
        digits,
        maxima,
        sum_limit,
        d: instance.d,
    })
}

/// The guess consistent with a rho-feasible reference assignment.
pub fn guess_from_reference(
    instance: &SantaInstance,
    reference: &Assignment,
    epsilon: f64,
    rho: f64,
    delta: f64,
) -> Result<TypeGuess> {
    if !check_rho_feasible(instance, reference, rho) {
        return Err(Error::RhoInfeasibleReference(format!(
            "reference violates feasibility or the rho = {rho} load cap"
        )));
    }
    let types = classify_types(instance, epsilon, rho, delta)?;
    let mut khat = BTreeMap::new();
    let mut lhat = vec![vec![0.0; instance.d]; instance.m];
    for i in 0..instance.m {
        let assigned = reference.jobs_on(i);
        for (ty, jobs) in types.nonzero_types(i) {
            let count = jobs.iter().filter(|j| assigned.contains(j)).count();
            khat.insert((i, ty), count);
        }
        for (pos, &d) in types.active[i].iter().enumerate() {
            let small = small_load_total(instance, &types, i, pos, assigned.iter().copied());
            lhat[i][d] = (small / epsilon + EPS_TOL).floor() * epsilon;
        }
    }
    Ok(TypeGuess { types, khat, lhat })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StrongVar {
    pub machine: usize,
    pub job: usize,
    /// Index into [`StrongLp::vertices`].
    pub vertex: usize,
}

/// The LP relaxation of the strengthened program together with its variable layout.
#[derive(Clone, Debug)]
pub struct StrongLp {
    pub lp: LinearProgram,
    pub vars: Vec<StrongVar>,
    /// Type vertices `(machine, type)`; the zero type is listed as all zeros.
    pub vertices: Vec<(usize, Vec<usize>)>,
    /// Integral degree limit of each vertex (`khat` or the residual capacity).
    pub vertex_limit: Vec<usize>,
    pub n: usize,
}

pub fn build_strong_lp(instance: &SantaInstance, guess: &TypeGuess, epsilon: f64) -> Result<StrongLp> {
    let types = &guess.types;
    let n = instance.n();
    let mut vertex_ix: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
    let mut vertices = Vec::new();
    let mut vertex_limit = Vec::new();
    let mut vars = Vec::new();

    for i in 0..instance.m {
        let large: usize = guess.khat.iter().filter(|((mi, _), _)| *mi == i).map(|(_, k)| *k).sum();
        if large > instance.capacities[i] {
            return Err(Error::InfeasibleGuess(format!(
                "machine {i}: guessed {large} large jobs exceed capacity {}",
                instance.capacities[i]
            )));
        }
        let zero = vec![0; types.active[i].len()];
        for j in 0..n {
            let JobType::Type(nu) = &types.type_of[i][j] else {
                continue;
            };
            let key = (i, nu.clone());
            let vertex = *vertex_ix.entry(key.clone()).or_insert_with(|| {
                vertices.push(key.clone());
                let limit = if *nu == zero {
                    instance.capacities[i] - large
                } else {
                    guess.khat.get(&key).copied().unwrap_or(0)
                };
                vertex_limit.push(limit);
                vertices.len() - 1
            });
            vars.push(StrongVar { machine: i, job: j, vertex });
        }
    }

    let mut lp = LinearProgram::new(vars.len(), Sense::Feasibility);
    for v in 0..vars.len() {
        lp.set_bounds(v, 0.0, 1.0)?;
    }
    // Each job at most once.
    let mut by_job: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, sv) in vars.iter().enumerate() {
        by_job[sv.job].push(v);
    }
    for vs in by_job.iter().filter(|vs| vs.len() > 1) {
        let terms: Vec<(usize, f64)> = vs.iter().map(|&v| (v, 1.0)).collect();
        lp.add_sparse_row(&terms, Relation::Le, 1.0);
    }
    // Exact counts for large types, residual capacity for the zero type.
    let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for (v, sv) in vars.iter().enumerate() {
        by_vertex[sv.vertex].push(v);
    }
    for (ix, (_, nu)) in vertices.iter().enumerate() {
        let terms: Vec<(usize, f64)> = by_vertex[ix].iter().map(|&v| (v, 1.0)).collect();
        let rel = if nu.iter().all(|&q| q == 0) { Relation::Le } else { Relation::Eq };
        lp.add_sparse_row(&terms, rel, vertex_limit[ix] as f64);
    }
    // Guessed nonzero counts for types with no jobs make the guess infeasible.
    for ((i, nu), &k) in &guess.khat {
        if k > 0 && !vertex_ix.contains_key(&(*i, nu.clone())) {
            return Err(Error::InfeasibleGuess(format!("machine {i}: type {nu:?} has no jobs")));
        }
    }
    // Small-load coverage, only where the guess is at least epsilon.
    for i in 0..instance.m {
        for (pos, &d) in types.active[i].iter().enumerate() {
            let lh = guess.lhat[i][d];
            if lh < epsilon - EPS_TOL {
                continue;
            }
            let terms: Vec<(usize, f64)> = vars
                .iter()
                .enumerate()
                .filter(|(_, sv)| sv.machine == i && types.small_along(i, sv.job, pos))
                .map(|(v, sv)| (v, instance.loads[i][sv.job][d]))
                .collect();
            lp.add_sparse_row(&terms, Relation::Ge, lh);
        }
    }
    Ok(StrongLp {
        lp,
        vars,
        vertices,
        vertex_limit,
        n,
    })
}

/// Rounds a feasible LP solution into an assignment via dependent rounding.
pub fn round_lp<R: Rng + ?Sized>(strong: &StrongLp, solution: &LpSolution, rng: &mut R) -> Assignment {
    let snap = |x: f64| {
        if x < 1e-9 {
            0.0
        } else if x > 1.0 - 1e-9 {
            1.0
        } else {
            x
        }
    };
    let mut x: Vec<f64> = solution.values.iter().map(|&v| snap(v)).collect();
    // Clear tiny solver overshoots so degree windows respect the integral limits.
    let mut job_sum = vec![0.0; strong.n];
    for (v, sv) in strong.vars.iter().enumerate() {
        job_sum[sv.job] += x[v];
    }
    for (v, sv) in strong.vars.iter().enumerate() {
        if job_sum[sv.job] > 1.0 {
            x[v] /= job_sum[sv.job];
        }
    }
    let mut vertex_sum = vec![0.0; strong.vertices.len()];
    for (v, sv) in strong.vars.iter().enumerate() {
        vertex_sum[sv.vertex] += x[v];
    }
    for (v, sv) in strong.vars.iter().enumerate() {
        let limit = strong.vertex_limit[sv.vertex] as f64;
        if vertex_sum[sv.vertex] > limit {
            x[v] *= limit / vertex_sum[sv.vertex];
        }
    }
    let edges = strong
        .vars
        .iter()
        .zip(&x)
        .map(|(sv, &xv)| (sv.job, sv.vertex, xv.clamp(0.0, 1.0)))
        .collect();
    let graph = BipartiteFractional::new(strong.n, strong.vertices.len(), edges)
        .expect("strong LP variables form a simple bipartite graph");
    let rounded = dependent_round(&graph, rng);
    let mut assignment = Assignment::empty(strong.n);
    for e in rounded.chosen {
        let sv = strong.vars[e];
        assignment.machine_of[sv.job] = Some(sv.machine);
    }
    assignment
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SantaParams {
    /// Allowed relative violation of the load lower bounds in the output.
    pub epsilon_out: f64,
    pub rho: f64,
    /// Small-load threshold; [`default_delta`] when `None`.
    pub delta: Option<f64>,
    /// Roundings attempted per feasible guess.
    pub retries: usize,
}

impl SantaParams {
    pub fn new(epsilon_out: f64, rho: f64) -> Self {
        SantaParams {
            epsilon_out,
            rho,
            delta: None,
            retries: 20,
        }
    }

    /// The internal accuracy, a quarter of the output violation budget.
    pub fn inner_epsilon(&self) -> f64 {
        self.epsilon_out / 4.0
    }

    pub fn delta_for(&self, instance: &SantaInstance) -> f64 {
        self.delta
            .unwrap_or_else(|| default_delta(self.inner_epsilon(), self.rho, instance.m, instance.d))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SantaOutcome {
    pub assignment: Assignment,
    pub guesses_tried: usize,
    pub roundings: usize,
}

pub fn solve<R: Rng + ?Sized>(
    instance: &SantaInstance,
    params: &SantaParams,
    mode: &Mode<Assignment>,
    rng: &mut R,
) -> Result<SantaOutcome> {
    instance.validate()?;
    if !(params.epsilon_out > 0.0 && params.epsilon_out < 1.0) || !(params.rho >= 1.0) {
        return Err(Error::InvalidInput("need 0 < epsilon_out < 1 and rho >= 1".into()));
    }
    let norm = instance.normalize();
    let eps = params.inner_epsilon();
    let delta = params.delta_for(&norm);
    let master: u64 = rng.gen();
    let mut roundings = 0;

    let mut try_guess = |index: usize, guess: &TypeGuess| -> Option<Assignment> {
        let strong = build_strong_lp(&norm, guess, eps).ok()?;
        let sol = strong.lp.solve();
        if !sol.is_feasible() {
            return None;
        }
        for retry in 0..params.retries {
            let mut r = stream(master, &[index as u64, retry as u64]);
            let assignment = round_lp(&strong, &sol, &mut r);
            roundings += 1;
            if verify(&norm, &assignment, params.epsilon_out).passed() {
                return Some(assignment);
            }
        }
        None
    };

    match mode {
        Mode::OracleGuided(reference) => {
            let guess = guess_from_reference(&norm, reference, eps, params.rho, delta)?;
            match try_guess(0, &guess) {
                Some(assignment) => Ok(SantaOutcome {
                    assignment,
                    guesses_tried: 1,
                    roundings,
                }),
                None => Err(Error::Infeasible),
            }
        }
        Mode::Enumerate { budget } => {
            let mut guesses = enumerate_guesses(&norm, eps, params.rho, delta)?;
            let mut tried = 0;
            while tried < *budget {
                let Some(guess) = guesses.next() else {
                    return Err(Error::Infeasible);
                };
                if let Some(assignment) = try_guess(tried, &guess) {
                    return Ok(SantaOutcome {
                        assignment,
                        guesses_tried: tried + 1,
                        roundings,
                    });
                }
                tried += 1;
            }
            if guesses.next().is_none() {
                Err(Error::Infeasible)
            } else {
                Err(Error::Exhausted { tried })
            }
        }
    }
}

/// A random instance with a hidden rho-feasible assignment.
///
/// Loads are log-uniform in `[1e-3, 1]`, so both small and large job types occur.
/// Each active bound is set so that the hidden assignment's normalized load is
/// uniform in `[1, rho]`.
pub fn planted_instance<R: Rng + ?Sized>(
    m: usize,
    d: usize,
    n: usize,
    rho: f64,
    rng: &mut R,
) -> (SantaInstance, Assignment) {
    let mut hidden = Assignment::empty(n);
    for j in 0..n {
        if rng.gen::<f64>() < 0.8 {
            hidden.machine_of[j] = Some(rng.gen_range(0..m));
        }
    }
    let loads: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| (0..d).map(|_| (rng.gen_range(-3.0..0.0f64) * std::f64::consts::LN_10).exp()).collect())
                .collect()
        })
        .collect();
    let mut lower_bounds = vec![vec![0.0; d]; m];
    let mut capacities = vec![0; m];
    for i in 0..m {
        let jobs = hidden.jobs_on(i);
        capacities[i] = jobs.len() + rng.gen_range(0..=2);
        for dd in 0..d {
            let total: f64 = jobs.iter().map(|&j| loads[i][j][dd]).sum();
            if total > 0.0 && rng.gen::<f64>() < 0.85 {
                lower_bounds[i][dd] = total / rng.gen_range(1.0..=rho);
            }
        }
    }
    let inst = SantaInstance {
        m,
        d,
        capacities,
        lower_bounds,
        loads,
    };
    (inst, hidden)
}
