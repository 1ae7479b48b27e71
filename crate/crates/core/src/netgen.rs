//! Synthetic network generators: stochastic Kronecker graphs (core-
//! periphery and hierarchical seeds), sparse Erdos-Renyi digraphs, and
//! power-law degree sequences wired by a configuration model.
//!
//! Generators emit unweighted structure (all weights 1.0); callers follow
//! with [`DirectedGraph::prepare`] and
//! [`DirectedGraph::assign_random_weights`].

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::rng::SeededRng;

/// 2x2 Kronecker seed for core-periphery structure: a dense core, a
/// sparse periphery, and moderate core-periphery linkage.
pub const CORE_PERIPHERY_SEED: [[f64; 2]; 2] = [[0.9, 0.5], [0.5, 0.3]];
/// 2x2 Kronecker seed for hierarchical community structure: two dense
/// blocks with weak cross-links.
pub const HIERARCHICAL_SEED: [[f64; 2]; 2] = [[0.9, 0.1], [0.1, 0.9]];

/// Network families the harness can generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetworkKind {
    CorePeriphery,
    ErdosRenyi,
    PowerLaw,
    Hierarchical,
}

impl NetworkKind {
    pub fn label(self) -> &'static str {
        match self {
            NetworkKind::CorePeriphery => "core_periphery",
            NetworkKind::ErdosRenyi => "erdos_renyi",
            NetworkKind::PowerLaw => "power_law",
            NetworkKind::Hierarchical => "hierarchical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "core_periphery" => Some(NetworkKind::CorePeriphery),
            "erdos_renyi" => Some(NetworkKind::ErdosRenyi),
            "power_law" => Some(NetworkKind::PowerLaw),
            "hierarchical" => Some(NetworkKind::Hierarchical),
            _ => None,
        }
    }

    /// Hierarchical Kronecker graphs keep their low-degree periphery; the
    /// other families drop nodes that are low-degree in both directions.
    pub fn skip_degree_prune(self) -> bool {
        matches!(self, NetworkKind::Hierarchical)
    }
}

/// Parameters for a single synthetic network draw.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub kind: NetworkKind,
    /// Target node count before preparation. Kronecker families round up
    /// to the next power of two.
    pub nodes: usize,
    /// Expected out-degree for Erdos-Renyi.
    pub er_out_degree: f64,
    /// Degree exponent for the power-law family.
    pub powerlaw_gamma: f64,
    /// Smallest degree in the power-law support.
    pub powerlaw_d_min: usize,
    /// Largest degree in the power-law support; 0 means the default
    /// `floor(sqrt(n) * 5)`.
    pub powerlaw_d_max: usize,
    /// Kronecker seed matrix override; `None` selects the family default.
    pub kronecker_seed: Option<[[f64; 2]; 2]>,
}

impl GeneratorSpec {
    pub fn new(kind: NetworkKind, nodes: usize) -> Self {
        Self {
            kind,
            nodes,
            er_out_degree: 5.0,
            powerlaw_gamma: 1.0,
            powerlaw_d_min: 1,
            powerlaw_d_max: 0,
            kronecker_seed: None,
        }
    }

    fn powerlaw_d_max(&self) -> usize {
        if self.powerlaw_d_max > 0 {
            self.powerlaw_d_max
        } else {
            ((self.nodes as f64).sqrt() * 5.0).floor() as usize
        }
    }

    /// Draw the raw (unprepared, unweighted) network.
    pub fn generate(&self, rng: &mut SeededRng) -> Result<DirectedGraph> {
        if self.nodes < 2 {
            return Err(Error::InvalidParameter(format!(
                "network needs at least 2 nodes, requested {}",
                self.nodes
            )));
        }
        match self.kind {
            NetworkKind::CorePeriphery => {
                let seed = self.kronecker_seed.unwrap_or(CORE_PERIPHERY_SEED);
                kronecker_sample(seed, kronecker_iterations(self.nodes), rng)
            }
            NetworkKind::Hierarchical => {
                let seed = self.kronecker_seed.unwrap_or(HIERARCHICAL_SEED);
                kronecker_sample(seed, kronecker_iterations(self.nodes), rng)
            }
            NetworkKind::ErdosRenyi => erdos_renyi(self.nodes, self.er_out_degree, rng),
            NetworkKind::PowerLaw => {
                let d_max = self.powerlaw_d_max();
                let degrees = powerlaw_degree_sequence(
                    self.nodes,
                    self.powerlaw_gamma,
                    self.powerlaw_d_min,
                    d_max,
                    rng,
                )?;
                let mut in_degrees = degrees.clone();
                in_degrees.shuffle(rng);
                configuration_model(&in_degrees, &degrees, rng)
            }
        }
    }
}

/// Number of Kronecker iterations needed to reach at least `target` nodes
/// with a 2x2 seed.
pub fn kronecker_iterations(target: usize) -> u32 {
    let mut k = 0;
    while (1usize << k) < target {
        k += 1;
    }
    k
}

/// Sample a stochastic Kronecker graph: with a 2x2 seed and k iterations
/// the result has 2^k nodes, and the ordered pair (u, v) is an edge with
/// probability `prod_i seed[bit_i(u)][bit_i(v)]` over the k bit positions.
pub fn kronecker_sample(
    seed: [[f64; 2]; 2],
    iterations: u32,
    rng: &mut SeededRng,
) -> Result<DirectedGraph> {
    for row in &seed {
        for &p in row {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "Kronecker seed entry {p} outside [0, 1]"
                )));
            }
        }
    }
    let n = 1usize << iterations;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            let mut p = 1.0;
            for bit in 0..iterations {
                let ub = (u >> bit) & 1;
                let vb = (v >> bit) & 1;
                p *= seed[ub][vb];
            }
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    if edges.is_empty() {
        return Err(Error::EmptyGraph("Kronecker draw produced no edges".into()));
    }
    DirectedGraph::from_edges(n, edges)
}

/// Sparse directed Erdos-Renyi: each ordered pair (u, v), u != v, is an
/// edge independently with probability `out_degree / (n - 1)`.
pub fn erdos_renyi(n: usize, out_degree: f64, rng: &mut SeededRng) -> Result<DirectedGraph> {
    if out_degree <= 0.0 || out_degree > (n - 1) as f64 {
        return Err(Error::InvalidParameter(format!(
            "expected out-degree {out_degree} outside (0, {}]",
            n - 1
        )));
    }
    let p = out_degree / (n - 1) as f64;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    if edges.is_empty() {
        return Err(Error::EmptyGraph("Erdos-Renyi draw produced no edges".into()));
    }
    DirectedGraph::from_edges(n, edges)
}

/// Sample `n` degrees from the distribution `P(d) proportional to d^-gamma`
/// on `{d_min, ..., d_max}`, then nudge one entry so the total is even
/// (stub counts must pair up).
pub fn powerlaw_degree_sequence(
    n: usize,
    gamma: f64,
    d_min: usize,
    d_max: usize,
    rng: &mut SeededRng,
) -> Result<Vec<usize>> {
    if d_min == 0 || d_min > d_max {
        return Err(Error::InvalidParameter(format!(
            "degree support [{d_min}, {d_max}] is empty or includes 0"
        )));
    }
    let weights: Vec<f64> = (d_min..=d_max).map(|d| (d as f64).powf(-gamma)).collect();
    let total: f64 = weights.iter().sum();
    let mut degrees = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u = rng.random::<f64>() * total;
        let mut chosen = d_max;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                chosen = d_min + i;
                break;
            }
            u -= w;
        }
        degrees.push(chosen);
    }
    if degrees.iter().sum::<usize>() % 2 == 1 {
        if let Some(d) = degrees.iter_mut().find(|d| **d < d_max) {
            *d += 1;
        } else if let Some(d) = degrees.iter_mut().find(|d| **d > d_min) {
            *d -= 1;
        } else {
            return Err(Error::InvalidParameter(
                "cannot fix degree parity on a single-point support".into(),
            ));
        }
    }
    Ok(degrees)
}

/// Directed configuration model: pair shuffled out-stubs with in-stubs,
/// dropping self-loops and repeated pairs.
pub fn configuration_model(
    in_degrees: &[usize],
    out_degrees: &[usize],
    rng: &mut SeededRng,
) -> Result<DirectedGraph> {
    if in_degrees.len() != out_degrees.len() {
        return Err(Error::InvalidParameter(
            "in/out degree sequences differ in length".into(),
        ));
    }
    let n = in_degrees.len();
    let in_total: usize = in_degrees.iter().sum();
    let out_total: usize = out_degrees.iter().sum();
    if in_total != out_total {
        return Err(Error::InvalidParameter(format!(
            "stub counts differ: {in_total} in vs {out_total} out"
        )));
    }
    let mut out_stubs: Vec<usize> = Vec::with_capacity(out_total);
    let mut in_stubs: Vec<usize> = Vec::with_capacity(in_total);
    for v in 0..n {
        out_stubs.extend(std::iter::repeat(v).take(out_degrees[v]));
        in_stubs.extend(std::iter::repeat(v).take(in_degrees[v]));
    }
    out_stubs.shuffle(rng);
    in_stubs.shuffle(rng);

    let mut seen = std::collections::HashSet::with_capacity(out_total);
    let mut edges = Vec::with_capacity(out_total);
    for (&u, &v) in out_stubs.iter().zip(&in_stubs) {
        if u != v && seen.insert((u, v)) {
            edges.push((u, v, 1.0));
        }
    }
    if edges.is_empty() {
        return Err(Error::EmptyGraph(
            "configuration model produced no usable edges".into(),
        ));
    }
    DirectedGraph::from_edges(n, edges)
}
