//! Local DAG extraction around each node.
//!
//! For a target t, the local DAG collects the nodes with the highest
//! influence on t, where the influence In(v, t) of v is the probability
//! that t activates when v alone is initially active and influence only
//! travels through nodes already admitted. Admission is greedy by
//! descending influence, so edges always run from later-admitted nodes to
//! earlier-admitted ones and the member list in admission order is a
//! reverse topological order. A uniform-random admission variant with the
//! same edge rule serves as a baseline.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, NodeId};
use crate::rng::{child_seed, rng_from_seed, SeededRng};
use rand::Rng;

/// Influence threshold and size cap for DAG growth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdagParams {
    /// Admission stops once no candidate influences the target by at
    /// least this much.
    pub eta: f64,
    /// Hard cap on members per DAG, target included.
    pub n_max: usize,
}

impl Default for LdagParams {
    fn default() -> Self {
        Self {
            eta: 0.01,
            n_max: 100,
        }
    }
}

impl LdagParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "influence threshold eta {} outside (0, 1]",
                self.eta
            )));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidParameter("DAG size cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// The influence neighborhood of one target node.
///
/// `members` lists nodes in admission order with the target first; edges
/// run from later members to earlier members, so iterating members in
/// reverse is a topological order of the DAG.
#[derive(Debug, Clone)]
pub struct LocalDag {
    target: NodeId,
    members: Vec<NodeId>,
    /// Per member (by local index), the DAG edges entering it as
    /// `(local source index, weight)`; sources always have larger local
    /// indices.
    in_edges: Vec<Vec<(u32, f64)>>,
    /// In(v, t) snapshot at admission time, parallel to `members`.
    influence: Vec<f64>,
}

impl LocalDag {
    pub fn target(&self) -> NodeId {
        self.target
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// DAG in-edges of the member at `local`, as (local source, weight).
    pub fn in_edges(&self, local: usize) -> &[(u32, f64)] {
        &self.in_edges[local]
    }

    pub fn edge_count(&self) -> usize {
        self.in_edges.iter().map(Vec::len).sum()
    }

    /// Admission-time influence of each member on the target.
    pub fn influence(&self) -> &[f64] {
        &self.influence
    }

    /// Rebuild a DAG from its ordered member list: edges are all graph
    /// edges from later members to earlier members, and influence is the
    /// path-product sum toward the target accumulated in admission order.
    pub fn from_members(graph: &DirectedGraph, members: Vec<NodeId>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParameter("a DAG needs its target".into()));
        }
        let mut local_of = vec![u32::MAX; graph.node_count()];
        for (i, &v) in members.iter().enumerate() {
            if v >= graph.node_count() {
                return Err(Error::InvalidParameter(format!(
                    "member {v} outside the graph"
                )));
            }
            if local_of[v] != u32::MAX {
                return Err(Error::InvalidParameter(format!(
                    "member {v} listed twice"
                )));
            }
            local_of[v] = i as u32;
        }

        let mut in_edges: Vec<Vec<(u32, f64)>> = vec![Vec::new(); members.len()];
        for (j, &u) in members.iter().enumerate() {
            for (v, w) in graph.out_neighbors(u) {
                let i = local_of[v];
                if i != u32::MAX && (i as usize) < j {
                    in_edges[i as usize].push((j as u32, w));
                }
            }
        }

        let mut influence = vec![0.0; members.len()];
        influence[0] = 1.0;
        for i in 0..members.len() {
            for &(j, w) in &in_edges[i] {
                influence[j as usize] += w * influence[i];
            }
        }

        Ok(Self {
            target: members[0],
            members,
            in_edges,
            influence,
        })
    }
}

/// Max-heap entry ordered by influence, ties broken toward the lowest
/// node id.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    influence: f64,
    node: NodeId,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.influence
            .total_cmp(&other.influence)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Grow the greedy local DAG of `target`: repeatedly admit the
/// non-member with the highest current influence, stopping when the best
/// candidate falls below `eta` or the DAG holds `n_max` members.
pub fn build_greedy_dag(graph: &DirectedGraph, target: NodeId, params: &LdagParams) -> LocalDag {
    let n = graph.node_count();
    let mut influence = vec![0.0; n];
    let mut member = vec![false; n];
    let mut members = Vec::new();
    // Influence can keep growing after admission (when further
    // out-neighbors join); the DAG records the admission-time value.
    let mut snapshots = Vec::new();
    let mut heap = BinaryHeap::new();

    influence[target] = 1.0;
    heap.push(Candidate {
        influence: 1.0,
        node: target,
    });

    while members.len() < params.n_max {
        // Lazy deletion: stale entries carry an influence smaller than
        // the node's current value (influence only grows).
        let admitted = loop {
            match heap.pop() {
                Some(c) if member[c.node] || c.influence != influence[c.node] => continue,
                Some(c) if c.node != target && c.influence < params.eta => break None,
                Some(c) => break Some(c.node),
                None => break None,
            }
        };
        let Some(u) = admitted else { break };

        member[u] = true;
        members.push(u);
        let inf_u = influence[u];
        snapshots.push(inf_u);
        for (v, w) in graph.in_neighbors(u) {
            influence[v] += w * inf_u;
            if !member[v] {
                heap.push(Candidate {
                    influence: influence[v],
                    node: v,
                });
            }
        }
    }

    assemble(graph, members, snapshots)
}

/// Grow a baseline DAG of up to `capacity` members by admitting uniform
/// random in-neighbors of current members; the edge rule stays the same,
/// so the result is still a DAG with the same ordering conventions.
pub fn build_random_dag(
    graph: &DirectedGraph,
    target: NodeId,
    capacity: usize,
    rng: &mut SeededRng,
) -> LocalDag {
    let n = graph.node_count();
    let mut member = vec![false; n];
    let mut queued = vec![false; n];
    let mut candidates: Vec<NodeId> = Vec::new();
    let mut members = Vec::new();

    let admit = |u: NodeId,
                 member: &mut Vec<bool>,
                 queued: &mut Vec<bool>,
                 candidates: &mut Vec<NodeId>,
                 members: &mut Vec<NodeId>| {
        member[u] = true;
        members.push(u);
        for (v, _) in graph.in_neighbors(u) {
            if !member[v] && !queued[v] {
                queued[v] = true;
                candidates.push(v);
            }
        }
    };

    admit(
        target,
        &mut member,
        &mut queued,
        &mut candidates,
        &mut members,
    );
    while members.len() < capacity.max(1) && !candidates.is_empty() {
        let pick = rng.random_range(0..candidates.len());
        let u = candidates.swap_remove(pick);
        admit(u, &mut member, &mut queued, &mut candidates, &mut members);
    }

    // Influence bookkeeping is recomputed from the final member order.
    let dag = LocalDag::from_members(graph, members).expect("members are valid by construction");
    dag
}

fn assemble(graph: &DirectedGraph, members: Vec<NodeId>, influence: Vec<f64>) -> LocalDag {
    let mut local_of = vec![u32::MAX; graph.node_count()];
    for (i, &v) in members.iter().enumerate() {
        local_of[v] = i as u32;
    }
    let mut in_edges: Vec<Vec<(u32, f64)>> = vec![Vec::new(); members.len()];
    for (j, &u) in members.iter().enumerate() {
        for (v, w) in graph.out_neighbors(u) {
            let i = local_of[v];
            if i != u32::MAX && (i as usize) < j {
                in_edges[i as usize].push((j as u32, w));
            }
        }
    }
    LocalDag {
        target: members[0],
        members,
        in_edges,
        influence,
    }
}

/// How the members of an index were selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DagMode {
    Greedy,
    Random,
}

/// One LocalDag per node of a graph.
#[derive(Debug, Clone)]
pub struct DagIndex {
    dags: Vec<LocalDag>,
    mode: DagMode,
}

impl DagIndex {
    /// Build greedy DAGs for every node, in parallel across targets.
    pub fn build_greedy(graph: &DirectedGraph, params: &LdagParams) -> Result<Self> {
        params.validate()?;
        let dags = (0..graph.node_count())
            .into_par_iter()
            .map(|t| build_greedy_dag(graph, t, params))
            .collect();
        Ok(Self {
            dags,
            mode: DagMode::Greedy,
        })
    }

    /// Build random DAGs of `capacity` members for every node; each
    /// target draws from its own stream of `seed` so the result is
    /// independent of build order.
    pub fn build_random(graph: &DirectedGraph, capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("DAG capacity must be >= 1".into()));
        }
        let dags = (0..graph.node_count())
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from_seed(child_seed(seed, &[t as u64]));
                build_random_dag(graph, t, capacity, &mut rng)
            })
            .collect();
        Ok(Self {
            dags,
            mode: DagMode::Random,
        })
    }

    /// Random index sized to match this (greedy) index: capacity is the
    /// rounded mean member count.
    pub fn matched_random(&self, graph: &DirectedGraph, seed: u64) -> Result<Self> {
        let capacity = (self.mean_size().round() as usize).max(1);
        Self::build_random(graph, capacity, seed)
    }

    pub fn dags(&self) -> &[LocalDag] {
        &self.dags
    }

    pub fn dag(&self, target: NodeId) -> &LocalDag {
        &self.dags[target]
    }

    pub fn mode(&self) -> DagMode {
        self.mode
    }

    pub fn mean_size(&self) -> f64 {
        self.dags.iter().map(|d| d.len() as f64).sum::<f64>() / self.dags.len() as f64
    }

    /// For each node, the targets whose DAG contains it.
    pub fn memberships(&self) -> Vec<Vec<NodeId>> {
        let n = self.dags.len();
        let mut out = vec![Vec::new(); n];
        for dag in &self.dags {
            for &v in dag.members() {
                out[v].push(dag.target());
            }
        }
        out
    }

    /// Cache the index as text: a mode line, then one line per target with
    /// its members in admission order. Edges and influence are rebuilt on
    /// load, so only the member lists are stored.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut out = String::from(match self.mode {
            DagMode::Greedy => "mode greedy\n",
            DagMode::Random => "mode random\n",
        });
        for dag in &self.dags {
            let line: Vec<String> = dag.members().iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Load an index written by [`DagIndex::write_cache`] against the same
    /// graph. Line order is target order, so target i is line i + 1.
    pub fn read_cache(path: &Path, graph: &DirectedGraph) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let mode = match lines.next().map(|(_, l)| l.trim()) {
            Some("mode greedy") => DagMode::Greedy,
            Some("mode random") => DagMode::Random,
            _ => return Err(Error::parse(path, 1, "expected a mode line")),
        };
        let mut dags = Vec::new();
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            let members: Vec<NodeId> = line
                .split_whitespace()
                .map(|f| f.parse::<NodeId>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, lineno, "bad member id"))?;
            if members.first() != Some(&dags.len()) {
                return Err(Error::parse(path, lineno, "lines must follow target order"));
            }
            dags.push(LocalDag::from_members(graph, members)?);
        }
        if dags.len() != graph.node_count() {
            return Err(Error::parse(path, 1, "one member line per node required"));
        }
        Ok(Self { dags, mode })
    }
}
