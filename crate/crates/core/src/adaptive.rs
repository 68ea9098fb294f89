//! Adaptive ProbeMax through block-adaptive policy trees.
//!
//! A block policy probes all variables of the current block at once, then
//! branches on the running maximum. Variables are assigned to configurations
//! (sets of blocks with at most one per root-leaf path) by a multi-machine
//! covering instance whose dimensions pin down the CDF of every block's
//! running maximum.

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{union_support, DiscreteRV};
use crate::error::{Error, Result};
use crate::oracle::OracleBudget;
use crate::probemax::{log_load, probability_grid, snap_up, HeavyValue};
use crate::santa_claus::{self, Assignment, SantaInstance, SantaParams};
use crate::Mode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveInstance {
    pub rvs: Vec<DiscreteRV>,
    pub k: usize,
}

impl AdaptiveInstance {
    pub fn new(rvs: Vec<DiscreteRV>, k: usize) -> Result<Self> {
        if k > rvs.len() {
            return Err(Error::InvalidInput(format!("budget {k} exceeds {} variables", rvs.len())));
        }
        Ok(AdaptiveInstance { rvs, k })
    }

    pub fn n(&self) -> usize {
        self.rvs.len()
    }

    /// Union of all supports together with 0.
    pub fn value_grid(&self) -> Vec<f64> {
        let refs: Vec<&DiscreteRV> = self.rvs.iter().collect();
        let mut v = union_support(&refs);
        if v.first().map_or(true, |&x| x > 0.0) {
            v.insert(0, 0.0);
        }
        v
    }
}

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNode {
    pub block: Vec<usize>,
    /// Child per observed running maximum; a value without a child stops.
    pub children: Vec<(f64, NodeId)>,
}

/// Arena-backed tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PolicyJson", try_from = "PolicyJson")]
pub struct BlockPolicy {
    pub nodes: Vec<PolicyNode>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct NodeJson {
    block: Vec<usize>,
    #[serde(default)]
    children: BTreeMap<String, NodeJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PolicyJson {
    root: NodeJson,
}

impl From<BlockPolicy> for PolicyJson {
    fn from(p: BlockPolicy) -> Self {
        fn build(p: &BlockPolicy, id: NodeId) -> NodeJson {
            NodeJson {
                block: p.nodes[id].block.clone(),
                children: p.nodes[id].children.iter().map(|&(v, c)| (v.to_string(), build(p, c))).collect(),
            }
        }
        PolicyJson { root: build(&p, 0) }
    }
}

impl TryFrom<PolicyJson> for BlockPolicy {
    type Error = String;

    fn try_from(j: PolicyJson) -> std::result::Result<Self, String> {
        fn push(nodes: &mut Vec<PolicyNode>, n: NodeJson) -> std::result::Result<NodeId, String> {
            let id = nodes.len();
            nodes.push(PolicyNode {
                block: n.block,
                children: Vec::new(),
            });
            let mut children = Vec::new();
            for (key, child) in n.children {
                let v: f64 = key.parse().map_err(|_| format!("child key {key:?} is not a number"))?;
                children.push((v, push(nodes, child)?));
            }
            children.sort_by(|a, b| a.0.total_cmp(&b.0));
            nodes[id].children = children;
            Ok(id)
        }
        let mut nodes = Vec::new();
        push(&mut nodes, j.root)?;
        Ok(BlockPolicy { nodes })
    }
}

impl BlockPolicy {
    pub fn single_block(block: Vec<usize>) -> Self {
        BlockPolicy {
            nodes: vec![PolicyNode {
                block,
                children: Vec::new(),
            }],
        }
    }

    pub fn child(&self, node: NodeId, value: f64) -> Option<NodeId> {
        self.nodes[node].children.iter().find(|c| c.0 == value).map(|c| c.1)
    }

    /// Running maximum on entry to each node (the key of its parent edge; 0 at the root).
    pub fn entry_values(&self) -> Vec<f64> {
        let mut entry = vec![0.0; self.nodes.len()];
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            for &(v, c) in &self.nodes[id].children {
                entry[c] = v;
                stack.push(c);
            }
        }
        entry
    }

    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parent = vec![None; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            for &(_, c) in &node.children {
                parent[c] = Some(id);
            }
        }
        parent
    }

    /// Root-to-leaf node sequences.
    pub fn paths(&self) -> Vec<Vec<NodeId>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![0]];
        while let Some(path) = stack.pop() {
            let last = *path.last().expect("paths are nonempty");
            if self.nodes[last].children.is_empty() {
                out.push(path);
            } else {
                for &(_, c) in self.nodes[last].children.iter().rev() {
                    let mut p = path.clone();
                    p.push(c);
                    stack.push(p);
                }
            }
        }
        out
    }

    /// Same tree with every block emptied.
    pub fn skeleton(&self) -> BlockPolicy {
        BlockPolicy {
            nodes: self
                .nodes
                .iter()
                .map(|n| PolicyNode {
                    block: Vec::new(),
                    children: n.children.clone(),
                })
                .collect(),
        }
    }

    fn check_tree(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InfeasiblePolicy("policy has no root".into()));
        }
        let mut seen_as_child = vec![false; self.nodes.len()];
        for node in &self.nodes {
            for &(_, c) in &node.children {
                if c == 0 || c >= self.nodes.len() || std::mem::replace(&mut seen_as_child[c], true) {
                    return Err(Error::InfeasiblePolicy(format!("node {c} is not a proper child")));
                }
            }
            if node.children.iter().map(|c| c.0.to_bits()).duplicates().next().is_some() {
                return Err(Error::InfeasiblePolicy("duplicate child keys".into()));
            }
        }
        if seen_as_child.iter().skip(1).any(|s| !s) {
            return Err(Error::InfeasiblePolicy("unreachable nodes".into()));
        }
        Ok(())
    }
}

/// Every root-leaf path probes each variable at most once and at most `k` variables in total.
pub fn feasibility_check(policy: &BlockPolicy, k: usize) -> bool {
    if policy.check_tree().is_err() {
        return false;
    }
    policy.paths().iter().all(|path| {
        let vars: Vec<usize> = path.iter().flat_map(|&b| policy.nodes[b].block.iter().copied()).collect();
        vars.len() <= k && vars.iter().all_unique()
    })
}

fn check_structure(instance: &AdaptiveInstance, policy: &BlockPolicy) -> Result<()> {
    policy.check_tree()?;
    for path in policy.paths() {
        let vars: Vec<usize> = path.iter().flat_map(|&b| policy.nodes[b].block.iter().copied()).collect();
        if let Some(&i) = vars.iter().find(|&&i| i >= instance.n()) {
            return Err(Error::InfeasiblePolicy(format!("variable {i} out of range")));
        }
        if !vars.iter().all_unique() {
            return Err(Error::InfeasiblePolicy("a variable repeats on a root-leaf path".into()));
        }
    }
    Ok(())
}

/// Exact expected final maximum, by recursing on the distribution of each block's running maximum.
pub fn evaluate_policy(instance: &AdaptiveInstance, policy: &BlockPolicy) -> Result<f64> {
    check_structure(instance, policy)?;
    fn eval(instance: &AdaptiveInstance, policy: &BlockPolicy, node: NodeId, entry: f64) -> f64 {
        let block: Vec<&DiscreteRV> = policy.nodes[node].block.iter().map(|&i| &instance.rvs[i]).collect();
        let mut values: Vec<f64> = union_support(&block).into_iter().filter(|&v| v > entry).collect();
        values.insert(0, entry);
        let mut prev_cdf = 0.0;
        let mut total = 0.0;
        for &v in &values {
            let cdf: f64 = block.iter().map(|rv| rv.cdf(v)).product();
            let p = cdf - prev_cdf;
            prev_cdf = cdf;
            if p <= 0.0 {
                continue;
            }
            total += p * match policy.child(node, v) {
                Some(c) => eval(instance, policy, c, v),
                None => v,
            };
        }
        total
    }
    Ok(eval(instance, policy, 0, 0.0))
}

/// Expected final maximum by simulating the policy on every joint outcome.
pub fn evaluate_by_enumeration(instance: &AdaptiveInstance, policy: &BlockPolicy, budget: &OracleBudget) -> Result<f64> {
    check_structure(instance, policy)?;
    let leaves = instance
        .rvs
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
    if instance.n() == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for outcome in instance.rvs.iter().map(|rv| rv.atoms().iter()).multi_cartesian_product() {
        let prob: f64 = outcome.iter().map(|a| a.prob).product();
        let mut node = 0;
        let mut running = 0.0f64;
        loop {
            for &i in &policy.nodes[node].block {
                running = running.max(outcome[i].value);
            }
            match policy.child(node, running) {
                Some(c) => node = c,
                None => break,
            }
        }
        total += prob * running;
    }
    Ok(total)
}

/// A set of blocks with at most one on any root-leaf path, sorted.
pub type Configuration = Vec<NodeId>;

pub const MAX_CONFIGURATIONS: usize = 200_000;

/// All antichains of the tree (including the empty one), in sorted order.
pub fn enumerate_configurations(skeleton: &BlockPolicy) -> Result<Vec<Configuration>> {
    skeleton.check_tree()?;
    fn configs(p: &BlockPolicy, node: NodeId) -> Result<Vec<Configuration>> {
        let mut combos: Vec<Configuration> = vec![Vec::new()];
        for &(_, c) in &p.nodes[node].children {
            let sub = configs(p, c)?;
            if combos.len().saturating_mul(sub.len()) > MAX_CONFIGURATIONS {
                return Err(Error::TooLarge {
                    what: "configurations",
                    size: (combos.len() as u128) * (sub.len() as u128),
                    limit: MAX_CONFIGURATIONS as u128,
                });
            }
            combos = combos
                .iter()
                .cartesian_product(sub.iter())
                .map(|(a, b)| a.iter().chain(b).copied().collect())
                .collect();
        }
        combos.push(vec![node]);
        Ok(combos)
    }
    let mut all = configs(skeleton, 0)?;
    all.iter_mut().for_each(|c| c.sort_unstable());
    all.sort();
    Ok(all)
}

pub fn is_configuration(policy: &BlockPolicy, set: &[NodeId]) -> bool {
    policy
        .paths()
        .iter()
        .all(|path| path.iter().filter(|b| set.contains(b)).count() <= 1)
}

/// One covering dimension: block `node` of configuration `config` at value `value`.
#[derive(Clone, Debug, PartialEq)]
pub struct CdfEntry {
    pub config: usize,
    pub node: NodeId,
    pub v_heavy: HeavyValue,
    /// Guessed `P[max{I_B, M_C} <= v]` for each critical grid value.
    pub p_tilde: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveGuess {
    pub skeleton: BlockPolicy,
    pub entry_values: Vec<f64>,
    pub grid: Vec<f64>,
    pub delta: f64,
    pub gamma: f64,
    /// Configurations that receive variables, with their guessed sizes.
    pub configs: Vec<Configuration>,
    pub k_tilde: Vec<f64>,
    pub cdf: Vec<CdfEntry>,
}

impl AdaptiveGuess {
    pub fn capacity(&self, config: usize) -> usize {
        (self.k_tilde[config] + 1e-9).floor() as usize
    }
}

/// Blocks containing each variable; empty for variables the policy never probes.
pub fn configuration_of(policy: &BlockPolicy, n: usize) -> Vec<Configuration> {
    let mut out = vec![Vec::new(); n];
    for (id, node) in policy.nodes.iter().enumerate() {
        for &i in &node.block {
            out[i].push(id);
        }
    }
    out
}

/// `P[max{entry, max of members} <= v]`.
fn block_cdf(members: &[&DiscreteRV], entry: f64, v: f64) -> f64 {
    if v < entry {
        0.0
    } else {
        members.iter().map(|rv| rv.cdf(v)).product()
    }
}

pub fn guess_from_reference(
    instance: &AdaptiveInstance,
    reference: &BlockPolicy,
    delta: f64,
    gamma: f64,
) -> Result<AdaptiveGuess> {
    check_structure(instance, reference)?;
    if !feasibility_check(reference, instance.k) {
        return Err(Error::InfeasiblePolicy("reference exceeds the budget".into()));
    }
    let grid = instance.value_grid();
    let entry = reference.entry_values();
    let of = configuration_of(reference, instance.n());
    let configs: Vec<Configuration> = of.iter().filter(|c| !c.is_empty()).cloned().sorted().dedup().collect();
    let step = gamma * instance.k as f64;
    let k_tilde: Vec<f64> = configs
        .iter()
        .map(|c| {
            let k_star = of.iter().filter(|o| *o == c).count() as f64;
            if step <= 0.0 {
                k_star
            } else {
                step * ((k_star / step) - 1e-9).ceil()
            }
        })
        .collect();
    let probs = probability_grid(delta);
    let d2 = delta * delta;
    let mut cdf = Vec::new();
    for (ci, c) in configs.iter().enumerate() {
        let members: Vec<&DiscreteRV> = (0..instance.n()).filter(|&i| of[i] == *c).map(|i| &instance.rvs[i]).collect();
        for &b in c {
            let exact: Vec<f64> = grid.iter().map(|&v| block_cdf(&members, entry[b], v)).collect();
            let v_heavy = match (0..grid.len()).rev().find(|&j| exact[j] < 1.0 - d2 - 1e-12) {
                Some(j) => HeavyValue::Index(j),
                None => HeavyValue::Empty,
            };
            let len = match v_heavy {
                HeavyValue::Index(j) => j + 1,
                _ => 0,
            };
            cdf.push(CdfEntry {
                config: ci,
                node: b,
                v_heavy,
                p_tilde: exact[..len].iter().map(|&p| snap_up(p, &probs)).collect(),
            });
        }
    }
    Ok(AdaptiveGuess {
        skeleton: reference.skeleton(),
        entry_values: entry,
        grid,
        delta,
        gamma,
        configs,
        k_tilde,
        cdf,
    })
}

/// One machine per guessed configuration, one dimension per `(block, critical value)` entry.
pub fn build_ip_cdf_adaptive(instance: &AdaptiveInstance, guess: &AdaptiveGuess) -> SantaInstance {
    let dims: Vec<(usize, usize)> = guess
        .cdf
        .iter()
        .enumerate()
        .flat_map(|(e, entry)| (0..entry.p_tilde.len()).map(move |j| (e, j)))
        .collect();
    let m = guess.configs.len();
    let d4 = guess.delta.powi(4);
    let mut lower_bounds = vec![vec![0.0; dims.len()]; m];
    let mut loads = vec![vec![vec![0.0; dims.len()]; instance.n()]; m];
    for (d, &(e, j)) in dims.iter().enumerate() {
        let entry = &guess.cdf[e];
        let bound = -entry.p_tilde[j].ln();
        let v = guess.grid[j];
        let i_b = guess.entry_values[entry.node];
        lower_bounds[entry.config][d] = bound;
        for (i, rv) in instance.rvs.iter().enumerate() {
            loads[entry.config][i][d] = log_load(block_cdf(&[rv], i_b, v), 2.0 * bound / d4);
        }
    }
    SantaInstance {
        m,
        d: dims.len(),
        capacities: (0..m).map(|c| guess.capacity(c)).collect(),
        lower_bounds,
        loads,
    }
}

/// Places each kept variable into every block of its configuration.
pub fn policy_from_assignment(assignment: &Assignment, guess: &AdaptiveGuess, kept: &[bool]) -> BlockPolicy {
    let mut policy = guess.skeleton.clone();
    for (i, m) in assignment.machine_of.iter().enumerate() {
        if let (Some(m), true) = (m, kept[i]) {
            for &b in &guess.configs[*m] {
                policy.nodes[b].block.push(i);
            }
        }
    }
    policy
}

pub const SPARSIFY_RETRIES: usize = 100;

/// Keeps each assigned variable with probability `1 - phi` until the policy fits the budget.
pub fn sparsify<R: Rng + ?Sized>(
    assignment: &Assignment,
    guess: &AdaptiveGuess,
    k: usize,
    phi: f64,
    rng: &mut R,
) -> Result<BlockPolicy> {
    for _ in 0..SPARSIFY_RETRIES {
        let kept: Vec<bool> = assignment.machine_of.iter().map(|_| rng.gen::<f64>() >= phi).collect();
        let policy = policy_from_assignment(assignment, guess, &kept);
        if feasibility_check(&policy, k) {
            return Ok(policy);
        }
    }
    Err(Error::RetriesExhausted {
        attempts: SPARSIFY_RETRIES,
    })
}

/// `P[max{I_B, M_C} <= v] <= (1 + delta^2) p_tilde + delta^2` for every guessed entry.
pub fn verify_cdf_equivalent(instance: &AdaptiveInstance, policy: &BlockPolicy, guess: &AdaptiveGuess) -> bool {
    let d2 = guess.delta * guess.delta;
    guess.cdf.iter().all(|entry| {
        let members: Vec<&DiscreteRV> = configuration_of(policy, instance.n())
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == guess.configs[entry.config])
            .map(|(i, _)| &instance.rvs[i])
            .collect();
        let i_b = guess.entry_values[entry.node];
        entry
            .p_tilde
            .iter()
            .enumerate()
            .all(|(j, &p)| block_cdf(&members, i_b, guess.grid[j]) <= (1.0 + d2) * p + d2 + 1e-12)
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveParams {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    pub phi: f64,
    pub retries: usize,
}

impl AdaptiveParams {
    pub fn new(epsilon: f64) -> Self {
        AdaptiveParams {
            epsilon,
            delta: epsilon,
            gamma: epsilon,
            phi: epsilon * epsilon,
            retries: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveOutcome {
    pub policy: BlockPolicy,
    pub value: f64,
    pub reference_value: f64,
    pub cdf_equivalent: bool,
}

pub fn solve_adaptive<R: Rng + ?Sized>(
    instance: &AdaptiveInstance,
    params: &AdaptiveParams,
    mode: &Mode<BlockPolicy>,
    rng: &mut R,
) -> Result<AdaptiveOutcome> {
    let Mode::OracleGuided(reference) = mode else {
        return Err(Error::InvalidInput("adaptive solving requires a reference policy".into()));
    };
    let delta = params.delta;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta {delta} outside (0, 1)")));
    }
    let reference_value = evaluate_policy(instance, reference)?;
    let guess = guess_from_reference(instance, reference, delta, params.gamma)?;
    let santa = build_ip_cdf_adaptive(instance, &guess);
    let of = configuration_of(reference, instance.n());
    let ref_assignment = Assignment {
        machine_of: of.iter().map(|c| guess.configs.iter().position(|g| g == c)).collect(),
    };
    let rho = (0..santa.m)
        .flat_map(|c| santa.active_dims(c).into_iter().map(move |d| (c, d)))
        .map(|(c, d)| santa.load(&ref_assignment, c, d) / santa.lower_bounds[c][d])
        .fold(delta.powi(-4), f64::max);
    let mut sp = SantaParams::new(delta.powi(3) / 6.0, rho);
    sp.retries = params.retries;
    let out = santa_claus::solve(&santa, &sp, &Mode::OracleGuided(ref_assignment), rng)?;
    let policy = sparsify(&out.assignment, &guess, instance.k, params.phi, rng)?;
    let cdf_equivalent = verify_cdf_equivalent(instance, &policy, &guess);
    let value = evaluate_policy(instance, &policy)?;
    Ok(AdaptiveOutcome {
        policy,
        value,
        reference_value,
        cdf_equivalent,
    })
}

/// Optimal adaptive policy by dynamic programming over (probed set, running maximum).
pub fn brute_force_adaptive(instance: &AdaptiveInstance, budget: &OracleBudget) -> Result<(f64, BlockPolicy)> {
    let n = instance.n();
    if n > 10 {
        return Err(Error::TooLarge {
            what: "adaptive variables",
            size: n as u128,
            limit: 10,
        });
    }
    let grid = instance.value_grid();
    let states = (1u128 << n) * grid.len() as u128;
    if states > budget.max_outcome_leaves {
        return Err(Error::TooLarge {
            what: "adaptive states",
            size: states,
            limit: budget.max_outcome_leaves,
        });
    }
    let index_of = |v: f64| grid.iter().position(|&g| g == v).expect("values lie on the grid");

    struct Dp<'a> {
        instance: &'a AdaptiveInstance,
        grid: &'a [f64],
        memo: HashMap<(u32, usize), (f64, Option<usize>)>,
    }
    impl Dp<'_> {
        fn value(&mut self, mask: u32, running: usize) -> (f64, Option<usize>) {
            if let Some(&hit) = self.memo.get(&(mask, running)) {
                return hit;
            }
            let stop = self.grid[running];
            let mut best = (stop, None);
            if (mask.count_ones() as usize) < self.instance.k {
                for i in (0..self.instance.n()).filter(|i| mask & (1 << i) == 0) {
                    let mut total = 0.0;
                    for a in self.instance.rvs[i].atoms() {
                        let next = if a.value > stop {
                            self.grid.iter().position(|&g| g == a.value).expect("values lie on the grid")
                        } else {
                            running
                        };
                        total += a.prob * self.value(mask | (1 << i), next).0;
                    }
                    if total > best.0 + 1e-12 {
                        best = (total, Some(i));
                    }
                }
            }
            self.memo.insert((mask, running), best);
            best
        }
    }

    let mut dp = Dp {
        instance,
        grid: &grid,
        memo: HashMap::new(),
    };
    let (value, first) = dp.value(0, index_of(0.0));
    let mut policy = BlockPolicy::single_block(first.into_iter().collect());
    // Expand the tree along the DP's decisions.
    let mut stack: Vec<(NodeId, u32, usize)> = first.map(|i| (0, 1u32 << i, index_of(0.0))).into_iter().collect();
    while let Some((node, mask, running)) = stack.pop() {
        let i = policy.nodes[node].block[0];
        let entry = grid[running];
        let outcomes: Vec<usize> = instance.rvs[i]
            .atoms()
            .iter()
            .map(|a| if a.value > entry { index_of(a.value) } else { running })
            .sorted()
            .dedup()
            .collect();
        for next in outcomes {
            if let (_, Some(j)) = dp.value(mask, next) {
                let id = policy.nodes.len();
                policy.nodes.push(PolicyNode {
                    block: vec![j],
                    children: Vec::new(),
                });
                policy.nodes[node].children.push((grid[next], id));
                stack.push((id, mask | (1 << j), next));
            }
        }
    }
    Ok((value, policy))
}
