//! The attribute-inference attack: given perturbed reports and the
//! network, recover per-node activation probabilities.
//!
//! Each node v is assigned a seed probability alpha_v; pushing alpha
//! through every local DAG yields activation probabilities lp_t(t), and
//! the attack minimizes the expected disagreement between those
//! activations and the observed reports. Two refinements are toggled per
//! variant: greedy versus random DAGs, and a population-rate constraint
//! derived from the reports themselves, enforced with an increasing
//! quadratic penalty. Optimization is projected gradient descent over the
//! box [0, 1]^n with backtracking line search.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, NodeId};
use crate::ldag::{DagIndex, LdagParams, LocalDag};
use crate::privacy::{estimate_population, PerturbedReports, PopulationEstimate};

/// Attack variants: constrained/unconstrained optimization over
/// greedy/random DAGs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackVariant {
    /// Constrained optimization on greedy DAGs.
    CoDag,
    /// Unconstrained optimization on greedy DAGs.
    ODag,
    /// Constrained optimization on random DAGs.
    CoRnd,
    /// Unconstrained optimization on random DAGs.
    ORnd,
}

impl AttackVariant {
    pub fn label(self) -> &'static str {
        match self {
            AttackVariant::CoDag => "co_dag",
            AttackVariant::ODag => "o_dag",
            AttackVariant::CoRnd => "co_rnd",
            AttackVariant::ORnd => "o_rnd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "co_dag" => Some(AttackVariant::CoDag),
            "o_dag" => Some(AttackVariant::ODag),
            "co_rnd" => Some(AttackVariant::CoRnd),
            "o_rnd" => Some(AttackVariant::ORnd),
            _ => None,
        }
    }

    /// Whether the population-rate constraint is enforced.
    pub fn constrained(self) -> bool {
        matches!(self, AttackVariant::CoDag | AttackVariant::CoRnd)
    }

    /// Whether DAGs are grown randomly instead of greedily.
    pub fn random_dags(self) -> bool {
        matches!(self, AttackVariant::CoRnd | AttackVariant::ORnd)
    }
}

/// Per-node objective coefficients: the expected-disagreement weight of
/// raising node v's activation probability. Reporting 1 makes activation
/// lower the objective, reporting 0 makes it raise it.
pub fn compute_coefficients(reports: &PerturbedReports) -> Vec<f64> {
    let beta = reports.mechanism.beta();
    reports
        .z
        .iter()
        .map(|&z| if z { -beta } else { beta })
        .collect()
}

/// Local activation probabilities for every member of a DAG, target
/// included: lp(v) = alpha_v + (1 - alpha_v) * sum over DAG in-edges
/// (u, v) of w(u, v) * lp(u). Returned parallel to `dag.members()`.
///
/// This is the exact activation probability when each member keeps at
/// most one incoming edge (the live-edge view of the threshold process),
/// and in particular is exact on in-trees. Reading the DAG with every
/// edge kept independently instead, converging paths get double-counted:
/// on the all-0.5 diamond with its source pinned active the recursion
/// gives 0.5 where independent edges give 0.4375.
pub fn dag_activation(dag: &LocalDag, alpha: &[f64]) -> Vec<f64> {
    let m = dag.len();
    let mut lp = vec![0.0; m];
    // Members in reverse admission order form a topological order: every
    // in-edge source has a larger local index.
    for i in (0..m).rev() {
        let mut mass = 0.0;
        for &(j, w) in dag.in_edges(i) {
            mass += w * lp[j as usize];
        }
        let a = alpha[dag.members()[i]];
        let value = a + (1.0 - a) * mass;
        debug_assert!(
            (-1e-9..=1.0 + 1e-9).contains(&value),
            "activation {value} left [0, 1]"
        );
        lp[i] = value;
    }
    lp
}

/// Derivatives of the target's activation with respect to every member's
/// activation and seed probability.
#[derive(Debug, Clone)]
pub struct DagGradient {
    /// d lp(target) / d lp(v), parallel to members.
    pub dlp_dlp: Vec<f64>,
    /// d lp(target) / d alpha_v, parallel to members.
    pub dlp_dalpha: Vec<f64>,
}

/// Backward sweep: d lp(t)/d lp(v) = sum over DAG out-edges (v, u) of
/// w(v, u) * (1 - alpha_u) * d lp(t)/d lp(u), seeded with 1 at the
/// target; then d lp(t)/d alpha_v = dlp_dlp[v] * (1 - sum of w * lp over
/// v's DAG in-edges).
pub fn dag_gradient(dag: &LocalDag, alpha: &[f64], lp: &[f64]) -> DagGradient {
    let m = dag.len();
    let mut dlp_dlp = vec![0.0; m];
    dlp_dlp[0] = 1.0;
    // Admission order is reverse topological, so each member's value is
    // final before its in-edges scatter to later members.
    for i in 0..m {
        let a = alpha[dag.members()[i]];
        let scale = (1.0 - a) * dlp_dlp[i];
        if scale != 0.0 {
            for &(j, w) in dag.in_edges(i) {
                dlp_dlp[j as usize] += w * scale;
            }
        }
    }
    let dlp_dalpha = (0..m)
        .map(|i| {
            let mass: f64 = dag
                .in_edges(i)
                .iter()
                .map(|&(j, w)| w * lp[j as usize])
                .sum();
            dlp_dlp[i] * (1.0 - mass)
        })
        .collect();
    DagGradient {
        dlp_dlp,
        dlp_dalpha,
    }
}

/// Population-rate constraint: the mean activation must stay within
/// `radius` of `rate`.
#[derive(Debug, Clone, Copy)]
pub struct RateConstraint {
    pub rate: f64,
    pub radius: f64,
}

impl RateConstraint {
    pub fn from_estimate(estimate: &PopulationEstimate) -> Self {
        Self {
            rate: estimate.p_tilde_x,
            radius: estimate.radius,
        }
    }

    /// How far the mean activation sits outside the allowed band.
    pub fn violation(&self, mean_activation: f64) -> f64 {
        ((mean_activation - self.rate).abs() - self.radius).max(0.0)
    }
}

/// Objective value, its gradient, and the constraint violation at alpha.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Hinge distance of the mean activation from the allowed band, in
    /// fraction units; 0 when unconstrained or inside the band.
    pub violation: f64,
}

fn target_activations(index: &DagIndex, alpha: &[f64]) -> Vec<f64> {
    index
        .dags()
        .par_iter()
        .map(|dag| dag_activation(dag, alpha)[0])
        .collect()
}

/// Objective value only (used by the line search): the disagreement term
/// plus the quadratic penalty on the rate constraint.
pub fn objective_value(
    index: &DagIndex,
    coefficients: &[f64],
    alpha: &[f64],
    constraint: Option<&RateConstraint>,
    penalty_weight: f64,
) -> (f64, f64) {
    let lp_targets = target_activations(index, alpha);
    // Deterministic sequential reduction in target order.
    let mut value = 0.0;
    let mut total = 0.0;
    for (t, lp) in lp_targets.iter().enumerate() {
        value += coefficients[t] * lp;
        total += lp;
    }
    let mut violation = 0.0;
    if let Some(c) = constraint {
        violation = c.violation(total / lp_targets.len() as f64);
        value += penalty_weight * violation * violation;
    }
    (value, violation)
}

/// Full evaluation: value, violation, and the gradient aggregated across
/// every DAG.
pub fn objective_and_gradient(
    index: &DagIndex,
    coefficients: &[f64],
    alpha: &[f64],
    constraint: Option<&RateConstraint>,
    penalty_weight: f64,
) -> ObjectiveEval {
    struct Piece {
        lp_target: f64,
        /// (node, d lp(t)/d alpha_node) pairs.
        contributions: Vec<(NodeId, f64)>,
    }

    let pieces: Vec<Piece> = index
        .dags()
        .par_iter()
        .map(|dag| {
            let lp = dag_activation(dag, alpha);
            let grad = dag_gradient(dag, alpha, &lp);
            Piece {
                lp_target: lp[0],
                contributions: dag
                    .members()
                    .iter()
                    .zip(&grad.dlp_dalpha)
                    .map(|(&v, &g)| (v, g))
                    .collect(),
            }
        })
        .collect();

    let n = pieces.len();
    let mut value = 0.0;
    let mut total = 0.0;
    let mut grad_f = vec![0.0; alpha.len()];
    let mut grad_total = vec![0.0; alpha.len()];
    // Sequential accumulation in target order keeps results independent
    // of thread scheduling.
    for (t, piece) in pieces.iter().enumerate() {
        value += coefficients[t] * piece.lp_target;
        total += piece.lp_target;
        for &(v, g) in &piece.contributions {
            grad_f[v] += coefficients[t] * g;
            grad_total[v] += g;
        }
    }

    let mut violation = 0.0;
    if let Some(c) = constraint {
        let mean = total / n as f64;
        violation = c.violation(mean);
        if violation > 0.0 {
            value += penalty_weight * violation * violation;
            let sign = if mean - c.rate >= 0.0 { 1.0 } else { -1.0 };
            let factor = 2.0 * penalty_weight * violation * sign / n as f64;
            for (gf, gt) in grad_f.iter_mut().zip(&grad_total) {
                *gf += factor * gt;
            }
        }
    }

    ObjectiveEval {
        value,
        gradient: grad_f,
        violation,
    }
}

/// Solver settings for the penalized projected gradient descent.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative objective change below which the iteration has stalled.
    pub tolerance: f64,
    /// Armijo sufficient-decrease constant for the line search.
    pub armijo: f64,
    pub penalty_start: f64,
    pub penalty_growth: f64,
    /// Largest acceptable final violation, in fraction units.
    pub violation_tolerance: f64,
    /// Fixed initial alpha; `None` starts from the population estimate.
    pub initial_alpha: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-7,
            armijo: 1e-4,
            penalty_start: 1.0,
            penalty_growth: 10.0,
            violation_tolerance: 1e-3,
            initial_alpha: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        for (name, v) in [
            ("tolerance", self.tolerance),
            ("armijo", self.armijo),
            ("penalty_start", self.penalty_start),
            ("violation_tolerance", self.violation_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "solver {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.penalty_growth > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "penalty_growth must exceed 1, got {}",
                self.penalty_growth
            )));
        }
        if let Some(a) = self.initial_alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidParameter(format!(
                    "initial alpha {a} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// One line of the optimization trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceStep {
    pub iteration: usize,
    pub objective: f64,
    pub violation: f64,
    pub penalty_weight: f64,
    pub step: f64,
}

/// Outcome of the optimization.
#[derive(Debug, Clone)]
pub struct InferenceResult {
    /// Fitted seed probabilities.
    pub alpha: Vec<f64>,
    /// Per-node activation probabilities lp_v(v), the ranking scores.
    pub x_hat: Vec<f64>,
    pub objective: f64,
    /// Final hinge violation of the rate constraint (0 when off).
    pub violation: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceStep>,
}

impl InferenceResult {
    /// Write `node_id,alpha,x_hat` rows (with header), full precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("node_id,alpha,x_hat\n");
        for (v, (a, x)) in self.alpha.iter().zip(&self.x_hat).enumerate() {
            out.push_str(&format!("{},{},{}\n", v, a, x));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Write `iteration,objective,violation,step` rows (with header).
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("iteration,objective,violation,step\n");
        for t in &self.trace {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t.iteration, t.objective, t.violation, t.step
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

const PENALTY_CAP: f64 = 1e9;
const MIN_STEP: f64 = 1e-18;

/// Minimize the penalized objective over the box with projected gradient
/// descent; on stall, the penalty weight is raised until the constraint
/// is met (or the cap is reached).
pub fn solve(
    index: &DagIndex,
    coefficients: &[f64],
    constraint: Option<&RateConstraint>,
    config: &SolverConfig,
    initial_alpha: f64,
) -> Result<InferenceResult> {
    config.validate()?;
    let n = index.dags().len();
    if coefficients.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for {} nodes",
            coefficients.len(),
            n
        )));
    }

    let mut alpha = vec![initial_alpha.clamp(0.0, 1.0); n];
    let mut penalty = config.penalty_start;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let mut eval = objective_and_gradient(index, coefficients, &alpha, constraint, penalty);
    if !eval.value.is_finite() {
        return Err(Error::NonFinite("objective at the initial point".into()));
    }

    for iter in 0..config.max_iterations {
        iterations = iter + 1;

        // Backtracking projected line search.
        let mut step = 1.0;
        let mut accepted = None;
        while step >= MIN_STEP {
            let candidate: Vec<f64> = alpha
                .iter()
                .zip(&eval.gradient)
                .map(|(&a, &g)| (a - step * g).clamp(0.0, 1.0))
                .collect();
            let (cand_value, cand_violation) =
                objective_value(index, coefficients, &candidate, constraint, penalty);
            if !cand_value.is_finite() {
                return Err(Error::NonFinite(format!("objective at step {step}")));
            }
            let decrease: f64 = eval
                .gradient
                .iter()
                .zip(&candidate)
                .zip(&alpha)
                .map(|((&g, &c), &a)| g * (c - a))
                .sum();
            if cand_value <= eval.value + config.armijo * decrease {
                accepted = Some((candidate, cand_value, cand_violation, step));
                break;
            }
            step /= 2.0;
        }

        let Some((next_alpha, next_value, next_violation, used_step)) = accepted else {
            // No descent direction left at this penalty weight.
            if constraint.is_some() && eval.violation > config.violation_tolerance {
                if penalty >= PENALTY_CAP {
                    break;
                }
                penalty = (penalty * config.penalty_growth).min(PENALTY_CAP);
                eval = objective_and_gradient(index, coefficients, &alpha, constraint, penalty);
                continue;
            }
            converged = true;
            break;
        };

        let prev_value = eval.value;
        alpha = next_alpha;
        eval = objective_and_gradient(index, coefficients, &alpha, constraint, penalty);
        trace.push(TraceStep {
            iteration: iterations,
            objective: next_value,
            violation: next_violation,
            penalty_weight: penalty,
            step: used_step,
        });

        let rel_change = (prev_value - next_value).abs() / prev_value.abs().max(1.0);
        if rel_change < config.tolerance {
            if constraint.is_some() && eval.violation > config.violation_tolerance {
                if penalty >= PENALTY_CAP {
                    break;
                }
                penalty = (penalty * config.penalty_growth).min(PENALTY_CAP);
                eval = objective_and_gradient(index, coefficients, &alpha, constraint, penalty);
                continue;
            }
            converged = true;
            break;
        }
    }

    let x_hat = target_activations(index, &alpha);
    Ok(InferenceResult {
        objective: eval.value,
        violation: eval.violation,
        alpha,
        x_hat,
        iterations,
        converged,
        trace,
    })
}

/// End-to-end attack on one set of reports: build the DAG index per the
/// variant, derive the population estimate, optimize, and return the
/// activation scores.
pub fn infer(
    graph: &DirectedGraph,
    reports: &PerturbedReports,
    variant: AttackVariant,
    ldag_params: &LdagParams,
    solver: &SolverConfig,
    dag_seed: u64,
) -> Result<InferenceOutcome> {
    if reports.len() != graph.node_count() {
        return Err(Error::InvalidParameter(format!(
            "{} reports for {} nodes",
            reports.len(),
            graph.node_count()
        )));
    }
    let greedy = DagIndex::build_greedy(graph, ldag_params)?;
    let index = if variant.random_dags() {
        greedy.matched_random(graph, dag_seed)?
    } else {
        greedy
    };
    infer_with_index(&index, reports, variant, solver)
}

/// The attack with a pre-built DAG index (shared across cascades).
pub fn infer_with_index(
    index: &DagIndex,
    reports: &PerturbedReports,
    variant: AttackVariant,
    solver: &SolverConfig,
) -> Result<InferenceOutcome> {
    let estimate = estimate_population(reports)?;
    let coefficients = compute_coefficients(reports);
    let constraint = variant
        .constrained()
        .then(|| RateConstraint::from_estimate(&estimate));
    let initial = solver
        .initial_alpha
        .unwrap_or_else(|| estimate.p_tilde_x.clamp(0.01, 0.99));
    let result = solve(index, &coefficients, constraint.as_ref(), solver, initial)?;
    Ok(InferenceOutcome {
        result,
        estimate,
        dag_mean_size: index.mean_size(),
    })
}

/// An inference result plus the run-level diagnostics the harness
/// reports.
#[derive(Debug, Clone)]
pub struct InferenceOutcome {
    pub result: InferenceResult,
    pub estimate: PopulationEstimate,
    pub dag_mean_size: f64,
}
