//! Directed weighted graphs: edge-list ingestion, influence-weight
//! assignment and normalization, degree pruning, and node centrality
//! metrics (weighted degrees and PageRank).
//!
//! Graphs are immutable after construction; every transformation returns a
//! new graph. Node ids are dense (`0..node_count`) and are remapped whenever
//! pruning removes nodes.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Dense non-negative node identifier, always `< node_count` of its graph.
pub type NodeId = usize;

/// Tolerance used when checking whether per-node in-weight sums are
/// already normalized.
const NORMALIZATION_SLACK: f64 = 1e-12;

/// Default PageRank damping factor.
pub const DEFAULT_DAMPING: f64 = 0.85;
/// Default PageRank iteration cap.
pub const DEFAULT_PAGERANK_ITERATIONS: usize = 100;
/// PageRank stops early once the L1 change per sweep falls below this.
const PAGERANK_TOLERANCE: f64 = 1e-10;

/// A directed edge with an influence weight in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: f64,
}

/// Weighted directed graph with adjacency views in both directions.
#[derive(Debug, Clone)]
pub struct DirectedGraph {
    node_count: usize,
    edges: Vec<Edge>,
    /// Edge indices grouped by source node.
    out_edges: Vec<Vec<usize>>,
    /// Edge indices grouped by target node.
    in_edges: Vec<Vec<usize>>,
}

/// Per-node centrality metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeMetrics {
    pub weighted_in_degree: f64,
    pub weighted_out_degree: f64,
    pub pagerank: f64,
}

impl DirectedGraph {
    /// Build a graph from an explicit edge list.
    ///
    /// Rejects out-of-range endpoints, weights outside `(0, 1]`, and
    /// duplicate `(src, dst)` pairs. Self-loops are accepted here and
    /// removed by [`DirectedGraph::prepare`].
    pub fn from_edges(node_count: usize, list: Vec<(NodeId, NodeId, f64)>) -> Result<Self> {
        let mut edges = Vec::with_capacity(list.len());
        let mut seen = HashSet::with_capacity(list.len());
        for (src, dst, weight) in list {
            if src >= node_count || dst >= node_count {
                return Err(Error::InvalidParameter(format!(
                    "edge ({src}, {dst}) out of range for {node_count} nodes"
                )));
            }
            if !weight.is_finite() || weight <= 0.0 || weight > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "edge ({src}, {dst}) has weight {weight}, expected (0, 1]"
                )));
            }
            if !seen.insert((src, dst)) {
                return Err(Error::DuplicateEdge(src, dst));
            }
            edges.push(Edge { src, dst, weight });
        }
        Ok(Self::from_parts(node_count, edges))
    }

    /// Assemble adjacency indexes; assumes edges were already validated.
    fn from_parts(node_count: usize, edges: Vec<Edge>) -> Self {
        let mut out_edges = vec![Vec::new(); node_count];
        let mut in_edges = vec![Vec::new(); node_count];
        for (idx, e) in edges.iter().enumerate() {
            out_edges[e.src].push(idx);
            in_edges[e.dst].push(idx);
        }
        Self {
            node_count,
            edges,
            out_edges,
            in_edges,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Nodes with an edge into `v`, with the edge weight.
    pub fn in_neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.in_edges[v].iter().map(|&i| {
            let e = &self.edges[i];
            (e.src, e.weight)
        })
    }

    /// Nodes `v` points to, with the edge weight.
    pub fn out_neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.out_edges[v].iter().map(|&i| {
            let e = &self.edges[i];
            (e.dst, e.weight)
        })
    }

    /// Indices into [`DirectedGraph::edges`] of the edges entering `v`.
    pub(crate) fn in_edge_indices(&self, v: NodeId) -> &[usize] {
        &self.in_edges[v]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_edges[v].len()
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_edges[v].len()
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId) -> bool {
        self.out_edges[src]
            .iter()
            .any(|&i| self.edges[i].dst == dst)
    }

    /// Replace edge weights wholesale, keeping the structure.
    fn with_weights(&self, weights: Vec<f64>) -> Self {
        debug_assert_eq!(weights.len(), self.edges.len());
        let edges = self
            .edges
            .iter()
            .zip(weights)
            .map(|(e, weight)| Edge { weight, ..*e })
            .collect();
        Self {
            node_count: self.node_count,
            edges,
            out_edges: self.out_edges.clone(),
            in_edges: self.in_edges.clone(),
        }
    }

    /// Divide each node's incoming weights by their sum so they total 1.
    ///
    /// Nodes whose in-weights already sum to 1 (within 1e-12) are left
    /// untouched, which makes the operation idempotent bit-for-bit.
    pub fn normalize_in_weights(&self) -> Self {
        let mut weights: Vec<f64> = self.edges.iter().map(|e| e.weight).collect();
        for v in 0..self.node_count {
            if self.in_edges[v].is_empty() {
                continue;
            }
            let sum: f64 = self.in_edges[v].iter().map(|&i| weights[i]).sum();
            if (sum - 1.0).abs() <= NORMALIZATION_SLACK {
                continue;
            }
            for &i in &self.in_edges[v] {
                weights[i] /= sum;
            }
        }
        self.with_weights(weights)
    }

    /// Draw a fresh uniform weight in `(0, 1]` for every edge, then
    /// normalize each node's incoming weights to sum to 1.
    pub fn assign_random_weights<R: Rng>(&self, rng: &mut R) -> Self {
        // 1 - U with U uniform on [0,1) keeps weights strictly positive.
        let raw: Vec<f64> = self.edges.iter().map(|_| 1.0 - rng.random::<f64>()).collect();
        self.with_weights(raw).normalize_in_weights()
    }

    /// Remove self-loops, prune chronically low-degree nodes, remap ids
    /// densely, and re-normalize in-weights.
    ///
    /// Unless `skip_prune` is set, nodes whose in-degree and out-degree are
    /// both below `min_degree` are removed; removal is iterated to a
    /// fixpoint because deleting one node can push its neighbors under the
    /// threshold.
    pub fn prepare(&self, min_degree: usize, skip_prune: bool) -> Result<Self> {
        let live_edge = |e: &Edge, alive: &[bool]| e.src != e.dst && alive[e.src] && alive[e.dst];
        let mut alive = vec![true; self.node_count];

        if !skip_prune {
            loop {
                let mut in_deg = vec![0usize; self.node_count];
                let mut out_deg = vec![0usize; self.node_count];
                for e in &self.edges {
                    if live_edge(e, &alive) {
                        out_deg[e.src] += 1;
                        in_deg[e.dst] += 1;
                    }
                }
                let mut changed = false;
                for v in 0..self.node_count {
                    if alive[v] && in_deg[v] < min_degree && out_deg[v] < min_degree {
                        alive[v] = false;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }

        let mut remap = vec![usize::MAX; self.node_count];
        let mut next = 0;
        for v in 0..self.node_count {
            if alive[v] {
                remap[v] = next;
                next += 1;
            }
        }
        if next == 0 {
            return Err(Error::EmptyGraph("no nodes survive preparation".into()));
        }

        let edges: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| live_edge(e, &alive))
            .map(|e| Edge {
                src: remap[e.src],
                dst: remap[e.dst],
                weight: e.weight,
            })
            .collect();
        if edges.is_empty() {
            return Err(Error::EmptyGraph("no edges survive preparation".into()));
        }

        Ok(Self::from_parts(next, edges).normalize_in_weights())
    }

    /// Sum of incoming edge weights per node.
    pub fn weighted_in_degrees(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.node_count];
        for e in &self.edges {
            acc[e.dst] += e.weight;
        }
        acc
    }

    /// Sum of outgoing edge weights per node.
    pub fn weighted_out_degrees(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.node_count];
        for e in &self.edges {
            acc[e.src] += e.weight;
        }
        acc
    }

    /// PageRank by power iteration with uniform teleport.
    ///
    /// Transition probabilities follow outgoing weights scaled by the
    /// weighted out-degree; the rank mass of dangling nodes is spread
    /// uniformly. Stops after `max_iterations` sweeps or when the L1 change
    /// drops below 1e-10.
    pub fn pagerank(&self, damping: f64, max_iterations: usize) -> Vec<f64> {
        let n = self.node_count;
        let out_w = self.weighted_out_degrees();
        let uniform = 1.0 / n as f64;
        let mut rank = vec![uniform; n];
        let mut next = vec![0.0; n];
        for _ in 0..max_iterations {
            let dangling: f64 = (0..n).filter(|&v| out_w[v] == 0.0).map(|v| rank[v]).sum();
            let base = (1.0 - damping) * uniform + damping * dangling * uniform;
            next.iter_mut().for_each(|x| *x = base);
            for e in &self.edges {
                next[e.dst] += damping * rank[e.src] * e.weight / out_w[e.src];
            }
            let l1: f64 = rank
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .sum();
            std::mem::swap(&mut rank, &mut next);
            if l1 < PAGERANK_TOLERANCE {
                break;
            }
        }
        rank
    }

    /// Weighted degrees and PageRank for every node.
    pub fn node_metrics(&self, damping: f64, iterations: usize) -> Vec<NodeMetrics> {
        let win = self.weighted_in_degrees();
        let wout = self.weighted_out_degrees();
        let pr = self.pagerank(damping, iterations);
        (0..self.node_count)
            .map(|v| NodeMetrics {
                weighted_in_degree: win[v],
                weighted_out_degree: wout[v],
                pagerank: pr[v],
            })
            .collect()
    }

    /// Render the graph in the edge-list text format.
    pub fn to_edge_list_string(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            // 9 significant digits.
            let _ = writeln!(out, "{} {} {:.8e}", e.src, e.dst, e.weight);
        }
        out
    }

    /// Write the edge-list text format to a file.
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list_string()).map_err(|e| Error::io(path, e))
    }
}

/// How [`load_edge_list`] interprets its input.
#[derive(Debug, Clone, Copy)]
pub struct EdgeListOptions {
    /// When false, each input line also inserts the reversed edge.
    pub directed: bool,
    /// Accept arbitrary string tokens as node ids, mapped densely in order
    /// of first appearance. Off by default: ids must be non-negative
    /// integers, mapped densely in ascending numeric order.
    pub string_ids: bool,
}

impl Default for EdgeListOptions {
    fn default() -> Self {
        Self {
            directed: true,
            string_ids: false,
        }
    }
}

/// An ingested edge list plus ingestion diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedEdgeList {
    pub graph: DirectedGraph,
    /// Number of input edges dropped because the (src, dst) pair repeated.
    pub duplicates_dropped: usize,
}

/// Read a whitespace-separated edge list: `src dst [weight]` per line,
/// `#` comments and blank lines ignored. Node ids are remapped to a dense
/// range; missing weights default to 1.0 (to be replaced downstream by
/// [`DirectedGraph::assign_random_weights`]). The first occurrence of a
/// duplicate (src, dst) pair wins.
pub fn load_edge_list(path: &Path, options: EdgeListOptions) -> Result<LoadedEdgeList> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut raw: Vec<(String, String, f64, usize)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 && tokens.len() != 3 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 'src dst [weight]', found {} fields", tokens.len()),
            ));
        }
        let weight = if tokens.len() == 3 {
            let w: f64 = tokens[2].parse().map_err(|_| {
                Error::parse(path, lineno, format!("invalid weight '{}'", tokens[2]))
            })?;
            if !w.is_finite() || w <= 0.0 || w > 1.0 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("weight {w} outside (0, 1]"),
                ));
            }
            w
        } else {
            1.0
        };
        raw.push((tokens[0].to_string(), tokens[1].to_string(), weight, lineno));
    }

    // Map raw ids to dense indices.
    let mut id_of: HashMap<String, usize> = HashMap::new();
    if options.string_ids {
        for (a, b, _, _) in &raw {
            for tok in [a, b] {
                let next = id_of.len();
                id_of.entry(tok.clone()).or_insert(next);
            }
        }
    } else {
        let mut numeric: BTreeSet<u64> = BTreeSet::new();
        for (a, b, _, lineno) in &raw {
            for tok in [a, b] {
                let id: u64 = tok.parse().map_err(|_| {
                    Error::parse(path, *lineno, format!("invalid node id '{tok}'"))
                })?;
                numeric.insert(id);
            }
        }
        for (dense, id) in numeric.iter().enumerate() {
            id_of.insert(id.to_string(), dense);
        }
    }

    let node_count = id_of.len();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut duplicates = 0usize;
    let mut push = |src: usize, dst: usize, weight: f64, edges: &mut Vec<Edge>| {
        if seen.insert((src, dst)) {
            edges.push(Edge { src, dst, weight });
        } else {
            duplicates += 1;
        }
    };
    for (a, b, weight, _) in &raw {
        // Normalized key: numeric ids may differ textually ("07" vs "7").
        let (src, dst) = if options.string_ids {
            (id_of[a], id_of[b])
        } else {
            (
                id_of[&a.parse::<u64>().unwrap().to_string()],
                id_of[&b.parse::<u64>().unwrap().to_string()],
            )
        };
        push(src, dst, *weight, &mut edges);
        if !options.directed && src != dst {
            push(dst, src, *weight, &mut edges);
        }
    }

    if edges.is_empty() {
        return Err(Error::EmptyGraph(format!("{} holds no edges", path.display())));
    }
    Ok(LoadedEdgeList {
        graph: DirectedGraph::from_parts(node_count, edges),
        duplicates_dropped: duplicates,
    })
}
