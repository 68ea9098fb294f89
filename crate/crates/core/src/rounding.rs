//! Dependent randomized rounding of fractional bipartite assignments.
//!
//! Each round picks a cycle (or, when the fractional edges form a forest, a
//! maximal path), splits it into alternating halves and shifts mass between
//! them until some edge hits 0 or 1. The shift direction is randomized so
//! that every edge keeps its expectation, and interior vertices keep their
//! fractional degree exactly.

use rand::Rng;

use crate::error::{Error, Result};

const SNAP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteFractional {
    pub left_count: usize,
    pub right_count: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl BipartiteFractional {
    pub fn new(left_count: usize, right_count: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &(l, r, x) in &edges {
            if l >= left_count || r >= right_count {
                return Err(Error::InvalidInput(format!("edge ({l}, {r}) out of range")));
            }
            if !(-SNAP..=1.0 + SNAP).contains(&x) {
                return Err(Error::InvalidInput(format!("edge value {x} outside [0, 1]")));
            }
            if !seen.insert((l, r)) {
                return Err(Error::InvalidInput(format!("duplicate edge ({l}, {r})")));
            }
        }
        Ok(BipartiteFractional {
            left_count,
            right_count,
            edges,
        })
    }

    fn vertex_count(&self) -> usize {
        self.left_count + self.right_count
    }

    fn endpoints(&self, e: usize) -> (usize, usize) {
        let (l, r, _) = self.edges[e];
        (l, self.left_count + r)
    }
}

/// Indices of the edges rounded to one, in increasing order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundedEdges {
    pub chosen: Vec<usize>,
    /// Perturbation rounds performed.
    pub rounds: usize,
}

impl RoundedEdges {
    pub fn contains(&self, edge: usize) -> bool {
        self.chosen.binary_search(&edge).is_ok()
    }
}

fn snap(x: f64) -> f64 {
    if x <= SNAP {
        0.0
    } else if x >= 1.0 - SNAP {
        1.0
    } else {
        x
    }
}

fn is_fractional(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

pub fn dependent_round<R: Rng + ?Sized>(graph: &BipartiteFractional, rng: &mut R) -> RoundedEdges {
    let mut x: Vec<f64> = graph.edges.iter().map(|e| snap(e.2)).collect();
    let nv = graph.vertex_count();
    let mut rounds = 0;

    loop {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
        let mut any = false;
        for (e, &xe) in x.iter().enumerate() {
            if is_fractional(xe) {
                let (a, b) = graph.endpoints(e);
                adj[a].push(e);
                adj[b].push(e);
                any = true;
            }
        }
        if !any {
            break;
        }
        let walk = find_cycle(graph, &adj).unwrap_or_else(|| find_path(graph, &adj));

        // alpha: largest shift raising the even half; beta: lowering it.
        let (mut alpha, mut alpha_at) = (f64::INFINITY, (0, 0.0));
        let (mut beta, mut beta_at) = (f64::INFINITY, (0, 0.0));
        for (pos, &e) in walk.iter().enumerate() {
            let (room_up, room_down) = if pos % 2 == 0 { (1.0 - x[e], x[e]) } else { (x[e], 1.0 - x[e]) };
            if room_up < alpha {
                alpha = room_up;
                alpha_at = (e, if pos % 2 == 0 { 1.0 } else { 0.0 });
            }
            if room_down < beta {
                beta = room_down;
                beta_at = (e, if pos % 2 == 0 { 0.0 } else { 1.0 });
            }
        }
        // Raise the even half by alpha with probability beta/(alpha+beta),
        // otherwise lower it by beta; both keep every edge's expectation.
        let up = rng.gen::<f64>() * (alpha + beta) < beta;
        let (amount, (tight, target)) = if up { (alpha, alpha_at) } else { (beta, beta_at) };
        for (pos, &e) in walk.iter().enumerate() {
            let sign = if (pos % 2 == 0) == up { 1.0 } else { -1.0 };
            x[e] = snap(x[e] + sign * amount);
        }
        x[tight] = target;
        rounds += 1;
    }

    RoundedEdges {
        chosen: (0..x.len()).filter(|&e| x[e] == 1.0).collect(),
        rounds,
    }
}

/// Returns the edge sequence of some cycle among the fractional edges.
fn find_cycle(graph: &BipartiteFractional, adj: &[Vec<usize>]) -> Option<Vec<usize>> {
    let nv = adj.len();
    let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut removed = vec![false; nv];
    let mut stack: Vec<usize> = (0..nv).filter(|&v| deg[v] <= 1).collect();
    while let Some(v) = stack.pop() {
        if removed[v] {
            continue;
        }
        removed[v] = true;
        for &e in &adj[v] {
            let (a, b) = graph.endpoints(e);
            let u = if a == v { b } else { a };
            if !removed[u] {
                deg[u] -= 1;
                if deg[u] <= 1 {
                    stack.push(u);
                }
            }
        }
    }
    let start = (0..nv).find(|&v| !removed[v])?;
    // Every surviving vertex has at least two surviving edges, so the walk
    // never gets stuck and must revisit a vertex.
    let mut first_visit = vec![usize::MAX; nv];
    let mut edges_taken: Vec<usize> = Vec::new();
    let mut v = start;
    let mut came_by = usize::MAX;
    loop {
        if first_visit[v] != usize::MAX {
            return Some(edges_taken[first_visit[v]..].to_vec());
        }
        first_visit[v] = edges_taken.len();
        let e = adj[v]
            .iter()
            .copied()
            .filter(|&e| e != came_by)
            .filter(|&e| {
                let (a, b) = graph.endpoints(e);
                !removed[if a == v { b } else { a }]
            })
            .min()
            .expect("surviving vertex has another surviving edge");
        let (a, b) = graph.endpoints(e);
        edges_taken.push(e);
        came_by = e;
        v = if a == v { b } else { a };
    }
}

/// A maximal path in a fractional forest, starting at its lowest-index leaf.
fn find_path(graph: &BipartiteFractional, adj: &[Vec<usize>]) -> Vec<usize> {
    let start = (0..adj.len())
        .find(|&v| adj[v].len() == 1)
        .expect("a nonempty forest has a leaf");
    let mut path = Vec::new();
    let mut v = start;
    let mut came_by = usize::MAX;
    loop {
        let next = adj[v].iter().copied().filter(|&e| e != came_by).min();
        let Some(e) = next else {
            return path;
        };
        let (a, b) = graph.endpoints(e);
        path.push(e);
        came_by = e;
        v = if a == v { b } else { a };
    }
}

/// Checks that every vertex's rounded degree lies between the floor and
/// ceiling of its fractional degree.
pub fn verify_degree_preservation(graph: &BipartiteFractional, rounded: &RoundedEdges) -> bool {
    let nv = graph.vertex_count();
    let mut frac = vec![0.0; nv];
    let mut count = vec![0usize; nv];
    for (e, &(_, _, x)) in graph.edges.iter().enumerate() {
        let (a, b) = graph.endpoints(e);
        frac[a] += x;
        frac[b] += x;
    }
    for &e in &rounded.chosen {
        if e >= graph.edges.len() {
            return false;
        }
        let (a, b) = graph.endpoints(e);
        count[a] += 1;
        count[b] += 1;
    }
    (0..nv).all(|v| {
        let lo = (frac[v] + 1e-9).floor();
        let hi = (frac[v] - 1e-9).ceil();
        let c = count[v] as f64;
        lo <= c && c <= hi
    })
}
