//! Independent reference implementations used to cross-check the library:
//! explicit threshold dynamics, exhaustive live-edge enumeration, and
//! finite-difference gradients. Everything here is exponential or
//! quadratic and meant for small oracle instances only.
#![allow(dead_code)]

use contagion::graph::{DirectedGraph, NodeId};
use contagion::inference::{objective_value, RateConstraint};
use contagion::ldag::{DagIndex, LocalDag};
use contagion::rng::SeededRng;
use rand::Rng;

/// One cascade under the explicit threshold dynamics: every node draws a
/// threshold in (0, 1], then inactive nodes activate in rounds once the
/// total weight of their active in-neighbors reaches the threshold.
pub fn threshold_cascade<R: Rng>(
    graph: &DirectedGraph,
    seeds: &[NodeId],
    rng: &mut R,
) -> Vec<bool> {
    let n = graph.node_count();
    let thresholds: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
    let mut active = vec![false; n];
    for &s in seeds {
        active[s] = true;
    }
    loop {
        let mut changed = false;
        for v in 0..n {
            if active[v] {
                continue;
            }
            let mass: f64 = graph
                .in_neighbors(v)
                .filter(|&(u, _)| active[u])
                .map(|(_, w)| w)
                .sum();
            if mass >= thresholds[v] {
                active[v] = true;
                changed = true;
            }
        }
        if !changed {
            return active;
        }
    }
}

/// Empirical distribution over active-set bitmasks for `trials` runs of a
/// simulator. Graphs must have at most 16 nodes.
pub fn mask_histogram(
    node_count: usize,
    trials: usize,
    mut simulate: impl FnMut() -> Vec<bool>,
) -> Vec<f64> {
    assert!(node_count <= 16, "bitmask histogram capped at 16 nodes");
    let mut counts = vec![0.0; 1 << node_count];
    for _ in 0..trials {
        let active = simulate();
        let mut key = 0usize;
        for (i, &a) in active.iter().enumerate() {
            if a {
                key |= 1 << i;
            }
        }
        counts[key] += 1.0;
    }
    for c in &mut counts {
        *c /= trials as f64;
    }
    counts
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Activation probability of the DAG's target by exhausting live-edge
/// patterns: each member keeps one incoming DAG edge with probability
/// equal to its weight, or none with the leftover mass. Under a fixed
/// pattern the kept edges form reverse chains, so the target activates
/// exactly when some member on its chain is spontaneously active.
pub fn enumerate_selection_activation(dag: &LocalDag, alpha: &[f64]) -> f64 {
    fn recurse(dag: &LocalDag, alpha: &[f64], node: usize, prob: f64, kept: &mut Vec<u32>) -> f64 {
        if prob == 0.0 {
            return 0.0;
        }
        if node == dag.len() {
            let mut miss = 1.0;
            let mut cur = 0usize;
            loop {
                miss *= 1.0 - alpha[dag.members()[cur]];
                if kept[cur] == u32::MAX {
                    break;
                }
                cur = kept[cur] as usize;
            }
            return prob * (1.0 - miss);
        }
        let edges = dag.in_edges(node);
        let mass: f64 = edges.iter().map(|&(_, w)| w).sum();
        let mut total = 0.0;
        kept.push(u32::MAX);
        total += recurse(dag, alpha, node + 1, prob * (1.0 - mass).max(0.0), kept);
        for &(j, w) in edges {
            *kept.last_mut().unwrap() = j;
            total += recurse(dag, alpha, node + 1, prob * w, kept);
        }
        kept.pop();
        total
    }
    recurse(dag, alpha, 0, 1.0, &mut Vec::with_capacity(dag.len()))
}

/// Activation probability of the DAG's target when every DAG edge is kept
/// independently with probability equal to its weight. The target
/// activates when some spontaneously active member reaches it through
/// kept edges. Exponential in the edge count; capped at 20 edges.
pub fn enumerate_bond_activation(dag: &LocalDag, alpha: &[f64]) -> f64 {
    let mut edges = Vec::new();
    for i in 0..dag.len() {
        for &(j, w) in dag.in_edges(i) {
            edges.push((i, j as usize, w));
        }
    }
    assert!(edges.len() <= 20, "bond enumeration capped at 20 edges");
    let mut total = 0.0;
    for subset in 0..(1u32 << edges.len()) {
        let mut prob = 1.0;
        let mut kept_in: Vec<Vec<usize>> = vec![Vec::new(); dag.len()];
        for (idx, &(i, j, w)) in edges.iter().enumerate() {
            if subset >> idx & 1 == 1 {
                prob *= w;
                kept_in[i].push(j);
            } else {
                prob *= 1.0 - w;
            }
        }
        if prob == 0.0 {
            continue;
        }
        let mut reach = vec![false; dag.len()];
        reach[0] = true;
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            for &j in &kept_in[v] {
                if !reach[j] {
                    reach[j] = true;
                    stack.push(j);
                }
            }
        }
        let miss: f64 = (0..dag.len())
            .filter(|&i| reach[i])
            .map(|i| 1.0 - alpha[dag.members()[i]])
            .product();
        total += prob * (1.0 - miss);
    }
    total
}

/// A rootward tree fixture: the graph, a member order valid for
/// [`LocalDag::from_members`], and per-node seed probabilities.
pub struct TreeCase {
    pub graph: DirectedGraph,
    pub members: Vec<NodeId>,
    pub alpha: Vec<f64>,
}

/// Build the tree described by `parents` (entry i is the parent of node
/// i + 1 and always a lower id, node 0 the root), with random in-weights
/// scaled to a random total at or below 1 and alphas mixing interior
/// values with exact 0 and 1.
pub fn tree_case(parents: &[usize], rng: &mut SeededRng) -> TreeCase {
    let n = parents.len() + 1;
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &p) in parents.iter().enumerate() {
        assert!(p <= i, "parent ids must precede their children");
        children[p].push(i + 1);
    }
    let mut edges = Vec::new();
    for v in 0..n {
        if children[v].is_empty() {
            continue;
        }
        let raw: Vec<f64> = children[v].iter().map(|_| 1.0 - rng.random::<f64>()).collect();
        let sum: f64 = raw.iter().sum();
        let scale = 0.2 + 0.8 * rng.random::<f64>();
        for (&c, r) in children[v].iter().zip(&raw) {
            edges.push((c, v, (r / sum * scale).min(1.0)));
        }
    }
    let graph = DirectedGraph::from_edges(n, edges).unwrap();
    let alpha = (0..n)
        .map(|_| {
            let u = rng.random::<f64>();
            if u < 0.12 {
                0.0
            } else if u > 0.88 {
                1.0
            } else {
                (u - 0.12) / 0.76
            }
        })
        .collect();
    TreeCase {
        graph,
        members: (0..n).collect(),
        alpha,
    }
}

/// All parent arrays for trees on `n` nodes where each node's parent has
/// a lower id: every rooted tree shape appears at least once.
pub fn parent_arrays(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for i in 1..n {
        let mut next = Vec::with_capacity(out.len() * i);
        for base in &out {
            for p in 0..i {
                let mut a = base.clone();
                a.push(p);
                next.push(a);
            }
        }
        out = next;
    }
    out
}

/// Uniform random parent array for a tree on `n` nodes.
pub fn random_parents(n: usize, rng: &mut SeededRng) -> Vec<usize> {
    (1..n).map(|i| rng.random_range(0..i)).collect()
}

/// Central finite difference of the penalized objective, coordinate by
/// coordinate.
pub fn fd_gradient(
    index: &DagIndex,
    coefficients: &[f64],
    alpha: &[f64],
    constraint: Option<&RateConstraint>,
    penalty: f64,
    h: f64,
) -> Vec<f64> {
    (0..alpha.len())
        .map(|v| {
            let mut hi = alpha.to_vec();
            hi[v] += h;
            let mut lo = alpha.to_vec();
            lo[v] -= h;
            let (fh, _) = objective_value(index, coefficients, &hi, constraint, penalty);
            let (fl, _) = objective_value(index, coefficients, &lo, constraint, penalty);
            (fh - fl) / (2.0 * h)
        })
        .collect()
}

/// Random directed graph with roughly `mean_degree` out-edges per node
/// and normalized random in-weights.
pub fn random_digraph(n: usize, mean_degree: f64, rng: &mut SeededRng) -> DirectedGraph {
    let p = (mean_degree / (n as f64 - 1.0)).min(1.0);
    loop {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random::<f64>() < p {
                    edges.push((u, v, 1.0));
                }
            }
        }
        if edges.is_empty() {
            continue;
        }
        return DirectedGraph::from_edges(n, edges)
            .unwrap()
            .assign_random_weights(rng);
    }
}
