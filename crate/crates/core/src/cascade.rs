//! Contagion of a binary attribute under the linear threshold model.
//!
//! Spreading is simulated through the live-edge (triggering set) view:
//! every node selects at most one of its incoming edges, picking (u, v)
//! with probability w(u, v) and nothing with the leftover mass; the
//! active set is whatever the seeds reach through selected edges. Over
//! the randomness of the selections this is distributed identically to
//! the threshold process in which every node draws lambda_v uniform on
//! (0, 1] and activates once its active in-weight reaches lambda_v, so a
//! single edge (u, v) still appears in the live set with marginal
//! probability w(u, v).

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, NodeId};
use crate::rng::SeededRng;

/// How seeds are drawn for a cascade.
#[derive(Debug, Clone, Copy)]
pub enum SeedCount {
    /// Exactly this many seeds.
    Fixed(usize),
    /// `ceil(fraction * n)` seeds.
    Fraction(f64),
}

/// Seed selection and acceptance policy for ground-truth generation.
#[derive(Debug, Clone, Copy)]
pub struct SeedPolicy {
    pub count: SeedCount,
    /// Accept a cascade whose final active fraction lies in this window.
    pub size_window: (f64, f64),
    /// Resampling budget before falling back to the closest attempt.
    pub max_retries: usize,
}

impl Default for SeedPolicy {
    fn default() -> Self {
        Self {
            count: SeedCount::Fixed(5),
            size_window: (0.25, 0.75),
            max_retries: 100,
        }
    }
}

impl SeedPolicy {
    pub fn resolve_count(&self, n: usize) -> usize {
        match self.count {
            SeedCount::Fixed(k) => k,
            SeedCount::Fraction(f) => (f * n as f64).ceil() as usize,
        }
    }
}

/// A simulated cascade: the hidden attribute vector and how it was drawn.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// x[v] is true when v holds the sensitive attribute (was activated).
    pub x: Vec<bool>,
    pub seeds: Vec<NodeId>,
    /// Fraction of nodes active at fixpoint.
    pub cascade_fraction: f64,
    /// Seed draws consumed, including the accepted one.
    pub attempts: usize,
    /// Whether the accepted cascade landed inside the size window.
    pub within_window: bool,
}

/// Draw one live-edge pattern: each node selects at most one incoming
/// edge, edge `i` into it with probability `weight_i` and none with the
/// leftover `1 - sum(weights)`. Expects in-weight sums at most 1, as
/// [`DirectedGraph::prepare`] guarantees.
pub fn sample_live_edge_graph<R: Rng>(graph: &DirectedGraph, rng: &mut R) -> Vec<bool> {
    let mut mask = vec![false; graph.edge_count()];
    for v in 0..graph.node_count() {
        if graph.in_degree(v) == 0 {
            continue;
        }
        let mut slot = rng.random::<f64>();
        for &idx in graph.in_edge_indices(v) {
            let w = graph.edges()[idx].weight;
            if slot < w {
                mask[idx] = true;
                break;
            }
            slot -= w;
        }
    }
    mask
}

/// Nodes reachable from `seeds` through kept edges (seeds included).
pub fn activate(graph: &DirectedGraph, mask: &[bool], seeds: &[NodeId]) -> Vec<bool> {
    debug_assert_eq!(mask.len(), graph.edge_count());
    let mut kept_out: Vec<Vec<NodeId>> = vec![Vec::new(); graph.node_count()];
    for (i, e) in graph.edges().iter().enumerate() {
        if mask[i] {
            kept_out[e.src].push(e.dst);
        }
    }
    let mut active = vec![false; graph.node_count()];
    let mut queue: Vec<NodeId> = Vec::with_capacity(seeds.len());
    for &s in seeds {
        if !active[s] {
            active[s] = true;
            queue.push(s);
        }
    }
    while let Some(u) = queue.pop() {
        for &v in &kept_out[u] {
            if !active[v] {
                active[v] = true;
                queue.push(v);
            }
        }
    }
    active
}

/// One threshold-model cascade from `seeds`, via a fresh live-edge draw.
pub fn simulate_cascade<R: Rng>(
    graph: &DirectedGraph,
    seeds: &[NodeId],
    rng: &mut R,
) -> Vec<bool> {
    let mask = sample_live_edge_graph(graph, rng);
    activate(graph, &mask, seeds)
}

/// Generate a ground-truth attribute assignment by seeding and spreading.
///
/// Seeds are drawn uniformly without replacement; the draw is retried up
/// to `policy.max_retries` times until the active fraction lands inside
/// `policy.size_window`. If no attempt lands, the attempt closest to the
/// window is kept and flagged.
pub fn generate_ground_truth(
    graph: &DirectedGraph,
    policy: &SeedPolicy,
    rng: &mut SeededRng,
) -> Result<GroundTruth> {
    let n = graph.node_count();
    let k = policy.resolve_count(n);
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "seed count {k} outside [1, {n}]"
        )));
    }
    let (lo, hi) = policy.size_window;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::InvalidParameter(format!(
            "size window [{lo}, {hi}] is not a subinterval of [0, 1]"
        )));
    }

    let distance = |f: f64| {
        if f < lo {
            lo - f
        } else if f > hi {
            f - hi
        } else {
            0.0
        }
    };

    let mut best: Option<(f64, GroundTruth)> = None;
    for attempt in 1..=policy.max_retries.max(1) {
        let seeds: Vec<NodeId> = rand::seq::index::sample(rng, n, k).into_vec();
        let x = simulate_cascade(graph, &seeds, rng);
        let fraction = x.iter().filter(|&&b| b).count() as f64 / n as f64;
        let d = distance(fraction);
        let truth = GroundTruth {
            x,
            seeds,
            cascade_fraction: fraction,
            attempts: attempt,
            within_window: d == 0.0,
        };
        if d == 0.0 {
            return Ok(truth);
        }
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, truth));
        }
    }
    let (_, mut truth) = best.expect("at least one attempt ran");
    truth.attempts = policy.max_retries.max(1);
    Ok(truth)
}

/// Write `node_id,x,is_seed` rows (with header) for a ground truth.
pub fn write_ground_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut out = String::from("node_id,x,is_seed\n");
    let seed_set: std::collections::HashSet<NodeId> = truth.seeds.iter().copied().collect();
    for (v, &xv) in truth.x.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            v,
            xv as u8,
            seed_set.contains(&v) as u8
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a ground truth written by [`write_ground_truth`].
pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut x = Vec::new();
    let mut seeds = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if lineno == 1 {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad node id '{}'", fields[0])))?;
        if id != x.len() {
            return Err(Error::parse(
                path,
                lineno,
                format!("node ids must be dense and ordered, found {id}"),
            ));
        }
        let flag = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(Error::parse(path, lineno, format!("bad flag '{s}'"))),
        };
        let xv = flag(fields[1])?;
        if flag(fields[2])? {
            seeds.push(id);
        }
        x.push(xv);
    }
    if x.is_empty() {
        return Err(Error::parse(path, 1, "no data rows".to_string()));
    }
    let fraction = x.iter().filter(|&&b| b).count() as f64 / x.len() as f64;
    Ok(GroundTruth {
        x,
        seeds,
        cascade_fraction: fraction,
        attempts: 1,
        within_window: true,
    })
}
