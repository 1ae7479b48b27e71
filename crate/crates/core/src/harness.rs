//! Experiment driver: config parsing, the generate -> cascade -> perturb ->
//! attack -> evaluate pipeline, and the CSV artifacts behind the result
//! tables, the DAG-parameter sweeps, and the per-node correlation data.
//!
//! Everything is deterministic given the master seed. Child seeds are
//! derived from (network, cascade, beta, variant) indices under distinct
//! domain tags, runs execute as independent jobs in a bounded pool, and
//! artifacts are assembled only after every worker has finished, in job
//! order. Wall-clock runtimes go to a separate timings file so the result
//! files are byte-stable across reruns.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::cascade::{generate_ground_truth, GroundTruth, SeedCount, SeedPolicy};
use crate::error::{Error, Result};
use crate::graph::{self, DirectedGraph, EdgeListOptions, NodeMetrics};
use crate::inference::{infer_with_index, AttackVariant, SolverConfig};
use crate::ldag::{DagIndex, LdagParams};
use crate::metrics::{self, EvaluationReport};
use crate::netgen::{GeneratorSpec, NetworkKind};
use crate::privacy::{bayesian_scores, estimate_population, PerturbedReports, RRMechanism};
use crate::rng::{child_seed, rng_from_seed};

// Seed-derivation domains. Distinct tags keep the per-purpose streams
// independent even when index tuples coincide, and adding variants or
// betas never perturbs the randomness of existing runs.
const GEN_DOMAIN: u64 = 1;
const DAG_DOMAIN: u64 = 2;
const CASCADE_DOMAIN: u64 = 3;
const PERTURB_DOMAIN: u64 = 4;

/// A network to run on: a synthetic generator or an edge-list file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetworkSpec {
    Synthetic(NetworkKind),
    File(PathBuf),
}

impl NetworkSpec {
    /// Parse a config value: a generator name or `file:PATH`.
    pub fn parse(s: &str) -> Option<Self> {
        if let Some(path) = s.strip_prefix("file:") {
            let path = path.trim();
            return (!path.is_empty()).then(|| NetworkSpec::File(PathBuf::from(path)));
        }
        NetworkKind::parse(s).map(NetworkSpec::Synthetic)
    }

    fn base_label(&self) -> String {
        match self {
            NetworkSpec::Synthetic(kind) => kind.label().to_string(),
            NetworkSpec::File(path) => {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("network");
                let cleaned: String = stem
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                    .collect();
                if cleaned.is_empty() {
                    "network".to_string()
                } else {
                    cleaned
                }
            }
        }
    }
}

/// An attribute-recovery method: the per-report Bayes posterior baseline
/// or one of the contagion attacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bayesian,
    Attack(AttackVariant),
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Bayesian => "bayesian",
            Method::Attack(v) => v.label(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "bayesian" {
            return Some(Method::Bayesian);
        }
        AttackVariant::parse(s).map(Method::Attack)
    }

    pub fn all() -> [Method; 5] {
        [
            Method::Bayesian,
            Method::Attack(AttackVariant::CoDag),
            Method::Attack(AttackVariant::ODag),
            Method::Attack(AttackVariant::CoRnd),
            Method::Attack(AttackVariant::ORnd),
        ]
    }
}

fn variant_tag(v: AttackVariant) -> u64 {
    match v {
        AttackVariant::CoDag => 1,
        AttackVariant::ODag => 2,
        AttackVariant::CoRnd => 3,
        AttackVariant::ORnd => 4,
    }
}

/// Full description of an experiment grid.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub networks: Vec<NetworkSpec>,
    pub nodes: usize,
    pub er_out_degree: f64,
    pub powerlaw_gamma: f64,
    pub powerlaw_d_min: usize,
    pub powerlaw_d_max: usize,
    pub min_degree: usize,
    /// Treat edge-list files as directed instead of expanding both ways.
    pub file_directed: bool,
    pub cascades: usize,
    pub betas: Vec<f64>,
    pub methods: Vec<Method>,
    pub seed_count: usize,
    /// Hierarchical graphs spread poorly from few seeds, so they get their
    /// own count.
    pub seed_count_hierarchical: usize,
    /// When set, overrides both counts; file networks default to 5%.
    pub seed_fraction: Option<f64>,
    pub size_window: (f64, f64),
    pub max_retries: usize,
    pub ldag: LdagParams,
    pub sweep_eta: Vec<f64>,
    pub sweep_n_max: Vec<usize>,
    pub sweep_variant: AttackVariant,
    pub solver: SolverConfig,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
    /// Also emit per-node scores and centrality columns.
    pub pernode: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            networks: vec![
                NetworkSpec::Synthetic(NetworkKind::CorePeriphery),
                NetworkSpec::Synthetic(NetworkKind::ErdosRenyi),
                NetworkSpec::Synthetic(NetworkKind::PowerLaw),
                NetworkSpec::Synthetic(NetworkKind::Hierarchical),
            ],
            nodes: 500,
            er_out_degree: 5.0,
            powerlaw_gamma: 1.0,
            powerlaw_d_min: 1,
            powerlaw_d_max: 0,
            min_degree: 3,
            file_directed: false,
            cascades: 10,
            betas: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            methods: Method::all().to_vec(),
            seed_count: 5,
            seed_count_hierarchical: 50,
            seed_fraction: None,
            size_window: (0.25, 0.75),
            max_retries: 100,
            ldag: LdagParams::default(),
            sweep_eta: vec![0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64],
            sweep_n_max: vec![3, 5, 10, 20, 50, 100],
            sweep_variant: AttackVariant::CoDag,
            solver: SolverConfig::default(),
            master_seed: 42,
            out_dir: PathBuf::from("out"),
            jobs: 0,
            pernode: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.networks.is_empty() {
            return Err(Error::Config("at least one network is required".into()));
        }
        if self.nodes < 2 {
            return Err(Error::Config(format!("nodes = {} is too small", self.nodes)));
        }
        if self.cascades == 0 {
            return Err(Error::Config("at least one cascade is required".into()));
        }
        if self.betas.is_empty() {
            return Err(Error::Config("at least one beta is required".into()));
        }
        for &beta in &self.betas {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Config(format!("beta {beta} outside [0, 1)")));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one variant is required".into()));
        }
        let (lo, hi) = self.size_window;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Config(format!(
                "cascade size window ({lo}, {hi}) is not a subrange of [0, 1]"
            )));
        }
        if self.seed_count == 0 || self.seed_count_hierarchical == 0 {
            return Err(Error::Config("seed counts must be >= 1".into()));
        }
        if let Some(f) = self.seed_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("seed_fraction {f} outside (0, 1]")));
            }
        }
        for &eta in &self.sweep_eta {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::Config(format!("sweep_eta {eta} outside (0, 1]")));
            }
        }
        if self.sweep_n_max.iter().any(|&m| m == 0) {
            return Err(Error::Config("sweep_n_max values must be >= 1".into()));
        }
        self.ldag
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.solver
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, lineno: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {lineno}: bad value '{value}' for {key}")))
}

fn parse_flag(key: &str, value: &str, lineno: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!(
            "line {lineno}: {key} must be true or false, got '{value}'"
        ))),
    }
}

fn note_scalar(seen: &mut HashSet<String>, key: &str, lineno: usize) -> Result<()> {
    if !seen.insert(key.to_string()) {
        return Err(Error::Config(format!("line {lineno}: duplicate key '{key}'")));
    }
    Ok(())
}

/// Parse the flat key=value config format. Blank lines and `#` comments
/// are skipped; list-valued keys (`network`, `beta`, `variant`,
/// `sweep_eta`, `sweep_n_max`) repeat to accumulate and replace the
/// defaults wholesale; scalar keys may appear once.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    let mut networks = Vec::new();
    let mut betas = Vec::new();
    let mut methods = Vec::new();
    let mut sweep_eta = Vec::new();
    let mut sweep_n_max = Vec::new();
    let mut seen = HashSet::new();

    for (index, raw) in text.lines().enumerate() {
        let lineno = index + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {lineno}: expected key=value")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "network" => networks.push(NetworkSpec::parse(value).ok_or_else(|| {
                Error::Config(format!("line {lineno}: unknown network '{value}'"))
            })?),
            "beta" => betas.push(parse_num("beta", value, lineno)?),
            "variant" => methods.push(Method::parse(value).ok_or_else(|| {
                Error::Config(format!("line {lineno}: unknown variant '{value}'"))
            })?),
            "sweep_eta" => sweep_eta.push(parse_num("sweep_eta", value, lineno)?),
            "sweep_n_max" => sweep_n_max.push(parse_num("sweep_n_max", value, lineno)?),
            _ => {
                note_scalar(&mut seen, key, lineno)?;
                match key {
                    "nodes" => config.nodes = parse_num(key, value, lineno)?,
                    "er_out_degree" => config.er_out_degree = parse_num(key, value, lineno)?,
                    "powerlaw_gamma" => config.powerlaw_gamma = parse_num(key, value, lineno)?,
                    "powerlaw_d_min" => config.powerlaw_d_min = parse_num(key, value, lineno)?,
                    "powerlaw_d_max" => config.powerlaw_d_max = parse_num(key, value, lineno)?,
                    "min_degree" => config.min_degree = parse_num(key, value, lineno)?,
                    "file_directed" => config.file_directed = parse_flag(key, value, lineno)?,
                    "cascades" => config.cascades = parse_num(key, value, lineno)?,
                    "seed_count" => config.seed_count = parse_num(key, value, lineno)?,
                    "seed_count_hierarchical" => {
                        config.seed_count_hierarchical = parse_num(key, value, lineno)?
                    }
                    "seed_fraction" => {
                        config.seed_fraction = Some(parse_num(key, value, lineno)?)
                    }
                    "window_low" => config.size_window.0 = parse_num(key, value, lineno)?,
                    "window_high" => config.size_window.1 = parse_num(key, value, lineno)?,
                    "max_retries" => config.max_retries = parse_num(key, value, lineno)?,
                    "eta" => config.ldag.eta = parse_num(key, value, lineno)?,
                    "n_max" => config.ldag.n_max = parse_num(key, value, lineno)?,
                    "sweep_variant" => {
                        config.sweep_variant = AttackVariant::parse(value).ok_or_else(|| {
                            Error::Config(format!(
                                "line {lineno}: sweep_variant must be a DAG attack, got '{value}'"
                            ))
                        })?
                    }
                    "max_iterations" => {
                        config.solver.max_iterations = parse_num(key, value, lineno)?
                    }
                    "tolerance" => config.solver.tolerance = parse_num(key, value, lineno)?,
                    "armijo" => config.solver.armijo = parse_num(key, value, lineno)?,
                    "penalty_start" => {
                        config.solver.penalty_start = parse_num(key, value, lineno)?
                    }
                    "penalty_growth" => {
                        config.solver.penalty_growth = parse_num(key, value, lineno)?
                    }
                    "violation_tolerance" => {
                        config.solver.violation_tolerance = parse_num(key, value, lineno)?
                    }
                    "initial_alpha" => {
                        config.solver.initial_alpha = Some(parse_num(key, value, lineno)?)
                    }
                    "master_seed" => config.master_seed = parse_num(key, value, lineno)?,
                    "out_dir" => config.out_dir = PathBuf::from(value),
                    "jobs" => config.jobs = parse_num(key, value, lineno)?,
                    "pernode" => config.pernode = parse_flag(key, value, lineno)?,
                    _ => {
                        return Err(Error::Config(format!(
                            "line {lineno}: unknown key '{key}'"
                        )))
                    }
                }
            }
        }
    }

    if !networks.is_empty() {
        config.networks = networks;
    }
    if !betas.is_empty() {
        config.betas = betas;
    }
    if !methods.is_empty() {
        config.methods = methods;
    }
    if !sweep_eta.is_empty() {
        config.sweep_eta = sweep_eta;
    }
    if !sweep_n_max.is_empty() {
        config.sweep_n_max = sweep_n_max;
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

/// One grid cell's outcome. Fields that do not apply to a method (no DAGs
/// for the Bayesian baseline, nothing after a failure) stay `None`.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub network: String,
    pub cascade: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub variant: String,
    pub auc: Option<f64>,
    pub upper_bound: f64,
    pub runtime_secs: f64,
    pub violation: Option<f64>,
    pub dag_mean_size: Option<f64>,
    pub error: Option<String>,
}

/// Mean AUC for one swept parameter value, with the anchored difference.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub network: String,
    pub param: &'static str,
    pub value: f64,
    pub beta: f64,
    pub mean_auc: f64,
    pub relative_auc: f64,
}

/// Aggregate of one (network, beta, variant) cell across cascades.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub network: String,
    pub beta: f64,
    pub epsilon: f64,
    pub variant: String,
    pub runs: usize,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub upper_bound: f64,
    pub beats_bound: bool,
}

struct PreparedNetwork {
    label: String,
    graph: DirectedGraph,
    node_metrics: Vec<NodeMetrics>,
    greedy: Option<DagIndex>,
    random: Vec<(AttackVariant, DagIndex)>,
    truths: Vec<GroundTruth>,
    /// Reports indexed by [cascade][beta]. Perturbation seeds exclude the
    /// variant so every method attacks identical reports.
    reports: Vec<Vec<PerturbedReports>>,
}

enum NetworkState {
    Ready(PreparedNetwork),
    Failed { label: String, message: String },
}

struct Job<'a> {
    net: &'a NetworkState,
    cascade: usize,
    beta_idx: usize,
    method: Method,
}

fn generator_spec(config: &ExperimentConfig, kind: NetworkKind) -> GeneratorSpec {
    let mut spec = GeneratorSpec::new(kind, config.nodes);
    spec.er_out_degree = config.er_out_degree;
    spec.powerlaw_gamma = config.powerlaw_gamma;
    spec.powerlaw_d_min = config.powerlaw_d_min;
    spec.powerlaw_d_max = config.powerlaw_d_max;
    spec
}

fn seed_policy(config: &ExperimentConfig, spec: &NetworkSpec) -> SeedPolicy {
    let count = if let Some(f) = config.seed_fraction {
        SeedCount::Fraction(f)
    } else {
        match spec {
            NetworkSpec::Synthetic(NetworkKind::Hierarchical) => {
                SeedCount::Fixed(config.seed_count_hierarchical)
            }
            NetworkSpec::Synthetic(_) => SeedCount::Fixed(config.seed_count),
            NetworkSpec::File(_) => SeedCount::Fraction(0.05),
        }
    };
    SeedPolicy {
        count,
        size_window: config.size_window,
        max_retries: config.max_retries,
    }
}

/// Generation and weight assignment share one stream per network, so the
/// prepared graph is a pure function of (master seed, network index).
fn prepared_graph(
    config: &ExperimentConfig,
    index: usize,
    spec: &NetworkSpec,
) -> Result<DirectedGraph> {
    let mut rng = rng_from_seed(child_seed(config.master_seed, &[GEN_DOMAIN, index as u64]));
    let (raw, skip_prune) = match spec {
        NetworkSpec::Synthetic(kind) => (
            generator_spec(config, *kind).generate(&mut rng)?,
            kind.skip_degree_prune(),
        ),
        NetworkSpec::File(path) => {
            let loaded = graph::load_edge_list(
                path,
                EdgeListOptions {
                    directed: config.file_directed,
                    string_ids: true,
                },
            )?;
            (loaded.graph, false)
        }
    };
    let prepared = raw.prepare(config.min_degree, skip_prune)?;
    Ok(prepared.assign_random_weights(&mut rng))
}

fn network_labels(specs: &[NetworkSpec]) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for spec in specs {
        *counts.entry(spec.base_label()).or_insert(0) += 1;
    }
    let mut seen: HashMap<String, usize> = HashMap::new();
    specs
        .iter()
        .map(|spec| {
            let base = spec.base_label();
            if counts[&base] == 1 {
                base
            } else {
                let k = seen.entry(base.clone()).or_insert(0);
                *k += 1;
                format!("{}_{}", base, k)
            }
        })
        .collect()
}

fn prepare_network(
    config: &ExperimentConfig,
    index: usize,
    spec: &NetworkSpec,
    label: String,
    with_indices: bool,
) -> Result<PreparedNetwork> {
    let graph = prepared_graph(config, index, spec)?;
    let node_metrics = graph.node_metrics(graph::DEFAULT_DAMPING, graph::DEFAULT_PAGERANK_ITERATIONS);
    let needs_attack = with_indices
        && config
            .methods
            .iter()
            .any(|m| matches!(m, Method::Attack(_)));
    let greedy = if needs_attack {
        Some(DagIndex::build_greedy(&graph, &config.ldag)?)
    } else {
        None
    };
    let mut random = Vec::new();
    if let Some(greedy_index) = &greedy {
        for method in &config.methods {
            if let Method::Attack(v) = method {
                if v.random_dags() && !random.iter().any(|(u, _)| u == v) {
                    let seed = child_seed(
                        config.master_seed,
                        &[DAG_DOMAIN, index as u64, variant_tag(*v)],
                    );
                    random.push((*v, greedy_index.matched_random(&graph, seed)?));
                }
            }
        }
    }
    let policy = seed_policy(config, spec);
    let mut truths = Vec::with_capacity(config.cascades);
    for c in 0..config.cascades {
        let mut rng = rng_from_seed(child_seed(
            config.master_seed,
            &[CASCADE_DOMAIN, index as u64, c as u64],
        ));
        truths.push(generate_ground_truth(&graph, &policy, &mut rng)?);
    }
    let mut reports = Vec::with_capacity(config.cascades);
    for (c, truth) in truths.iter().enumerate() {
        let mut per_beta = Vec::with_capacity(config.betas.len());
        for (b, &beta) in config.betas.iter().enumerate() {
            let mechanism = RRMechanism::new(beta)?;
            let mut rng = rng_from_seed(child_seed(
                config.master_seed,
                &[PERTURB_DOMAIN, index as u64, c as u64, b as u64],
            ));
            per_beta.push(mechanism.perturb(&truth.x, &mut rng));
        }
        reports.push(per_beta);
    }
    Ok(PreparedNetwork {
        label,
        graph,
        node_metrics,
        greedy,
        random,
        truths,
        reports,
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Run the configured grid and write results.csv, timings.csv and
/// summary.csv (plus pernode.csv when enabled) under the output directory.
/// Failed runs keep their row with an error marker; the call itself only
/// fails on invalid config or unwritable output.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let pool = thread_pool(config.jobs)?;
    let (records, pernode) = pool.install(|| execute_runs(config))?;
    write_text(&config.out_dir.join("results.csv"), &results_csv(&records))?;
    write_text(&config.out_dir.join("timings.csv"), &timings_csv(&records))?;
    write_text(
        &config.out_dir.join("summary.csv"),
        &summary_csv(&summarize(&records)),
    )?;
    if config.pernode {
        write_text(&config.out_dir.join("pernode.csv"), &pernode_csv(&pernode))?;
    }
    Ok(records)
}

fn execute_runs(config: &ExperimentConfig) -> Result<(Vec<RunRecord>, Vec<String>)> {
    let labels = network_labels(&config.networks);
    let nets: Vec<NetworkState> = config
        .networks
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            match prepare_network(config, i, spec, labels[i].clone(), true) {
                Ok(net) => NetworkState::Ready(net),
                Err(e) => NetworkState::Failed {
                    label: labels[i].clone(),
                    message: e.to_string(),
                },
            }
        })
        .collect();
    let mechanisms: Vec<RRMechanism> = config
        .betas
        .iter()
        .map(|&b| RRMechanism::new(b))
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for net in &nets {
        for cascade in 0..config.cascades {
            for beta_idx in 0..config.betas.len() {
                for &method in &config.methods {
                    jobs.push(Job {
                        net,
                        cascade,
                        beta_idx,
                        method,
                    });
                }
            }
        }
    }
    let outputs: Vec<(RunRecord, Vec<String>)> = jobs
        .par_iter()
        .map(|job| run_one(config, job, &mechanisms))
        .collect();
    let mut records = Vec::with_capacity(outputs.len());
    let mut pernode = Vec::new();
    for (record, rows) in outputs {
        records.push(record);
        pernode.extend(rows);
    }
    Ok((records, pernode))
}

fn run_one(
    config: &ExperimentConfig,
    job: &Job,
    mechanisms: &[RRMechanism],
) -> (RunRecord, Vec<String>) {
    let beta = config.betas[job.beta_idx];
    let mechanism = mechanisms[job.beta_idx];
    let epsilon = mechanism.epsilon();
    let upper_bound = crate::privacy::auc_upper_bound(epsilon, 0.0);
    let record = |label: &str, runtime: f64, error: Option<String>| RunRecord {
        network: label.to_string(),
        cascade: job.cascade,
        beta,
        epsilon,
        variant: job.method.label().to_string(),
        auc: None,
        upper_bound,
        runtime_secs: runtime,
        violation: None,
        dag_mean_size: None,
        error,
    };
    let net = match job.net {
        NetworkState::Ready(net) => net,
        NetworkState::Failed { label, message } => {
            return (record(label, 0.0, Some(message.clone())), Vec::new());
        }
    };
    let start = Instant::now();
    let attempt = attack(config, net, job, mechanism);
    let runtime_secs = start.elapsed().as_secs_f64();
    match attempt {
        Ok((report, x_hat, violation, dag_mean_size)) => {
            let rows = if config.pernode {
                pernode_rows(net, job, beta, &x_hat, &report)
            } else {
                Vec::new()
            };
            (
                RunRecord {
                    auc: Some(report.auc),
                    violation,
                    dag_mean_size,
                    error: None,
                    ..record(&net.label, runtime_secs, None)
                },
                rows,
            )
        }
        Err(e) => (
            record(&net.label, runtime_secs, Some(e.to_string())),
            Vec::new(),
        ),
    }
}

fn attack(
    config: &ExperimentConfig,
    net: &PreparedNetwork,
    job: &Job,
    mechanism: RRMechanism,
) -> Result<(EvaluationReport, Vec<f64>, Option<f64>, Option<f64>)> {
    let truth = &net.truths[job.cascade];
    let reports = &net.reports[job.cascade][job.beta_idx];
    let (x_hat, violation, dag_mean_size) = match job.method {
        Method::Bayesian => {
            let estimate = estimate_population(reports)?;
            (bayesian_scores(reports, estimate.p_tilde_x)?, None, None)
        }
        Method::Attack(variant) => {
            let index = if variant.random_dags() {
                net.random
                    .iter()
                    .find(|(v, _)| *v == variant)
                    .map(|(_, idx)| idx)
                    .ok_or_else(|| {
                        Error::InvalidParameter("random DAG index was not built".into())
                    })?
            } else {
                net.greedy
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("greedy DAG index was not built".into()))?
            };
            let outcome = infer_with_index(index, reports, variant, &config.solver)?;
            (
                outcome.result.x_hat,
                Some(outcome.result.violation),
                Some(outcome.dag_mean_size),
            )
        }
    };
    let report = metrics::evaluate(&x_hat, &truth.x, &mechanism, &net.node_metrics)?;
    Ok((report, x_hat, violation, dag_mean_size))
}

fn pernode_rows(
    net: &PreparedNetwork,
    job: &Job,
    beta: f64,
    x_hat: &[f64],
    report: &EvaluationReport,
) -> Vec<String> {
    let truth = &net.truths[job.cascade];
    let mut seed_mask = vec![false; x_hat.len()];
    for &s in &truth.seeds {
        seed_mask[s] = true;
    }
    x_hat
        .iter()
        .enumerate()
        .map(|(v, &score)| {
            let m = &net.node_metrics[v];
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                net.label,
                job.cascade,
                beta,
                job.method.label(),
                v,
                truth.x[v] as u8,
                seed_mask[v] as u8,
                score,
                report.per_node_expected_accuracy[v],
                m.weighted_in_degree,
                m.weighted_out_degree,
                m.pagerank,
            )
        })
        .collect()
}

/// Sweep eta and N_max over the configured lists for the sweep variant,
/// per beta, averaging AUC across cascades. Relative AUC anchors N_max
/// curves at their first value and eta curves at their last. Errors abort
/// the sweep.
pub fn sweep_dag_params(config: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    if config.sweep_eta.is_empty() && config.sweep_n_max.is_empty() {
        return Err(Error::Config(
            "sweep requires sweep_eta or sweep_n_max values".into(),
        ));
    }
    let labels = network_labels(&config.networks);
    let pool = thread_pool(config.jobs)?;
    pool.install(|| {
        let mut records = Vec::new();
        for (index, spec) in config.networks.iter().enumerate() {
            let net = prepare_network(config, index, spec, labels[index].clone(), false)?;
            let n_max_values: Vec<(f64, LdagParams)> = config
                .sweep_n_max
                .iter()
                .map(|&m| {
                    (
                        m as f64,
                        LdagParams {
                            eta: config.ldag.eta,
                            n_max: m,
                        },
                    )
                })
                .collect();
            sweep_param(config, index, &net, "n_max", &n_max_values, false, &mut records)?;
            let eta_values: Vec<(f64, LdagParams)> = config
                .sweep_eta
                .iter()
                .map(|&e| {
                    (
                        e,
                        LdagParams {
                            eta: e,
                            n_max: config.ldag.n_max,
                        },
                    )
                })
                .collect();
            sweep_param(config, index, &net, "eta", &eta_values, true, &mut records)?;
        }
        Ok(records)
    })
}

fn sweep_param(
    config: &ExperimentConfig,
    index: usize,
    net: &PreparedNetwork,
    param: &'static str,
    values: &[(f64, LdagParams)],
    anchor_last: bool,
    records: &mut Vec<SweepRecord>,
) -> Result<()> {
    if values.is_empty() {
        return Ok(());
    }
    let variant = config.sweep_variant;
    let mut means = vec![vec![0.0; config.betas.len()]; values.len()];
    for (vi, (_, params)) in values.iter().enumerate() {
        let greedy = DagIndex::build_greedy(&net.graph, params)?;
        let dag_index = if variant.random_dags() {
            let seed = child_seed(
                config.master_seed,
                &[DAG_DOMAIN, index as u64, variant_tag(variant), vi as u64],
            );
            greedy.matched_random(&net.graph, seed)?
        } else {
            greedy
        };
        for bi in 0..config.betas.len() {
            let mut total = 0.0;
            for (c, truth) in net.truths.iter().enumerate() {
                let outcome =
                    infer_with_index(&dag_index, &net.reports[c][bi], variant, &config.solver)?;
                total += metrics::auc(&outcome.result.x_hat, &truth.x)?;
            }
            means[vi][bi] = total / net.truths.len() as f64;
        }
    }
    let anchor = if anchor_last { values.len() - 1 } else { 0 };
    for (vi, (value, _)) in values.iter().enumerate() {
        for (bi, &beta) in config.betas.iter().enumerate() {
            records.push(SweepRecord {
                network: net.label.clone(),
                param,
                value: *value,
                beta,
                mean_auc: means[vi][bi],
                relative_auc: means[vi][bi] - means[anchor][bi],
            });
        }
    }
    Ok(())
}

/// Run the sweep and write sweep.csv under the output directory.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let records = sweep_dag_params(config)?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    write_text(&config.out_dir.join("sweep.csv"), &sweep_csv(&records))?;
    Ok(records)
}

/// Write each configured network, prepared and weighted exactly as the
/// experiment would see it, as an edge-list file. Returns the paths.
pub fn generate_networks(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let labels = network_labels(&config.networks);
    let mut paths = Vec::new();
    for (i, spec) in config.networks.iter().enumerate() {
        let g = prepared_graph(config, i, spec)?;
        let path = config.out_dir.join(format!("{}.edges", labels[i]));
        g.write_edge_list(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Score an x_hat CSV (last column per row) against a ground-truth CSV.
/// Returns printable key=value lines; `beta` adds the privacy ceiling.
pub fn eval_scores(scores_path: &Path, truth_path: &Path, beta: Option<f64>) -> Result<String> {
    let text = std::fs::read_to_string(scores_path).map_err(|e| Error::io(scores_path, e))?;
    let mut x_hat = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if index == 0 || line.trim().is_empty() {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or("");
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| Error::parse(scores_path, index + 1, "bad score"))?;
        x_hat.push(v);
    }
    if x_hat.is_empty() {
        return Err(Error::parse(scores_path, 1, "no score rows"));
    }
    let truth = crate::cascade::read_ground_truth(truth_path)?;
    if truth.x.len() != x_hat.len() {
        return Err(Error::InvalidParameter(format!(
            "{} scores for {} ground-truth nodes",
            x_hat.len(),
            truth.x.len()
        )));
    }
    let auc = metrics::auc(&x_hat, &truth.x)?;
    let mut out = format!("auc={auc:.4}\n");
    if let Some(beta) = beta {
        let epsilon = crate::privacy::epsilon_of_beta(beta)?;
        let bound = crate::privacy::auc_upper_bound(epsilon, 0.0);
        out.push_str(&format!(
            "epsilon={epsilon:.4}\nupper_bound={bound:.4}\nbeats_bound={}\n",
            auc > bound
        ));
    }
    Ok(out)
}

/// Aggregate successful records per (network, beta, variant), in first
/// appearance order: mean and sample standard deviation of AUC across
/// cascades, and whether the mean clears the privacy ceiling.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, u64, String)> = Vec::new();
    let mut groups: HashMap<(String, u64, String), Vec<&RunRecord>> = HashMap::new();
    for r in records {
        if r.auc.is_none() {
            continue;
        }
        let key = (r.network.clone(), r.beta.to_bits(), r.variant.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let aucs: Vec<f64> = rows.iter().map(|r| r.auc.unwrap()).collect();
            let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
            let std_auc = if aucs.len() > 1 {
                (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
                    / (aucs.len() - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            SummaryRow {
                network: rows[0].network.clone(),
                beta: rows[0].beta,
                epsilon: rows[0].epsilon,
                variant: rows[0].variant.clone(),
                runs: rows.len(),
                mean_auc: mean,
                std_auc,
                upper_bound: rows[0].upper_bound,
                beats_bound: mean > rows[0].upper_bound,
            }
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn sanitize_message(m: &str) -> String {
    m.replace('\n', " ").replace('\r', " ").replace(',', ";")
}

fn results_csv(records: &[RunRecord]) -> String {
    let mut out =
        String::from("network,cascade,beta,epsilon,variant,auc,upper_bound,violation,dag_mean_size,status\n");
    for r in records {
        let auc = r.auc.map(|a| format!("{a:.4}")).unwrap_or_default();
        let violation = r.violation.map(|v| format!("{v:.6}")).unwrap_or_default();
        let dag = r.dag_mean_size.map(|d| format!("{d:.2}")).unwrap_or_default();
        let status = match &r.error {
            None => "ok".to_string(),
            Some(m) => format!("error: {}", sanitize_message(m)),
        };
        out.push_str(&format!(
            "{},{},{},{:.4},{},{},{:.4},{},{},{}\n",
            r.network, r.cascade, r.beta, r.epsilon, r.variant, auc, r.upper_bound, violation,
            dag, status
        ));
    }
    out
}

/// Runtimes live apart from results.csv so the result files stay
/// byte-identical across reruns of the same config.
fn timings_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("network,cascade,beta,variant,runtime_secs\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{:.6}\n",
            r.network, r.cascade, r.beta, r.variant, r.runtime_secs
        ));
    }
    out
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out =
        String::from("network,beta,epsilon,variant,runs,mean_auc,std_auc,upper_bound,beats_bound\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{},{},{:.4},{:.4},{:.4},{}\n",
            r.network, r.beta, r.epsilon, r.variant, r.runs, r.mean_auc, r.std_auc,
            r.upper_bound, r.beats_bound
        ));
    }
    out
}

fn pernode_csv(rows: &[String]) -> String {
    let mut out = String::from(
        "network,cascade,beta,variant,node_id,x,is_seed,x_hat,expected_accuracy,weighted_in_degree,weighted_out_degree,pagerank\n",
    );
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}

fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("network,param,value,beta,mean_auc,relative_auc\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{:.4},{:.4}\n",
            r.network, r.param, r.value, r.beta, r.mean_auc, r.relative_auc
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_config(out_dir: PathBuf) -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.networks = vec![NetworkSpec::Synthetic(NetworkKind::ErdosRenyi)];
        config.nodes = 60;
        config.er_out_degree = 6.0;
        config.cascades = 2;
        config.betas = vec![0.5];
        config.methods = vec![Method::Bayesian, Method::Attack(AttackVariant::CoDag)];
        config.seed_count = 3;
        config.size_window = (0.05, 0.95);
        config.ldag.n_max = 15;
        config.solver.max_iterations = 150;
        config.out_dir = out_dir;
        config.jobs = 2;
        config.pernode = true;
        config
    }

    #[test]
    fn defaults_parse_from_empty_config() {
        let config = parse_config_str("").unwrap();
        assert_eq!(config.networks.len(), 4);
        assert_eq!(config.betas, vec![0.1, 0.3, 0.5, 0.7, 0.9]);
        assert_eq!(config.methods.len(), 5);
        assert_eq!(config.cascades, 10);
        assert_eq!(config.nodes, 500);
        assert_eq!(config.sweep_eta.len(), 7);
    }

    #[test]
    fn config_keys_round_trip() {
        let text = "\
# comment line
network = power_law
network = file:/tmp/some graph.edges

nodes = 120
cascades = 3
beta = 0.2
beta = 0.6
variant = bayesian
variant = o_dag
seed_count = 7
seed_fraction = 0.1
window_low = 0.2
window_high = 0.8
eta = 0.05
n_max = 40
sweep_eta = 0.1
sweep_n_max = 4
sweep_variant = o_rnd
max_iterations = 60
master_seed = 9
out_dir = /tmp/somewhere
jobs = 3
pernode = true
";
        let config = parse_config_str(text).unwrap();
        assert_eq!(
            config.networks,
            vec![
                NetworkSpec::Synthetic(NetworkKind::PowerLaw),
                NetworkSpec::File(PathBuf::from("/tmp/some graph.edges")),
            ]
        );
        assert_eq!(config.nodes, 120);
        assert_eq!(config.cascades, 3);
        assert_eq!(config.betas, vec![0.2, 0.6]);
        assert_eq!(
            config.methods,
            vec![Method::Bayesian, Method::Attack(AttackVariant::ODag)]
        );
        assert_eq!(config.seed_count, 7);
        assert_eq!(config.seed_fraction, Some(0.1));
        assert_eq!(config.size_window, (0.2, 0.8));
        assert_eq!(config.ldag.eta, 0.05);
        assert_eq!(config.ldag.n_max, 40);
        assert_eq!(config.sweep_eta, vec![0.1]);
        assert_eq!(config.sweep_n_max, vec![4]);
        assert_eq!(config.sweep_variant, AttackVariant::ORnd);
        assert_eq!(config.solver.max_iterations, 60);
        assert_eq!(config.master_seed, 9);
        assert_eq!(config.out_dir, PathBuf::from("/tmp/somewhere"));
        assert_eq!(config.jobs, 3);
        assert!(config.pernode);
    }

    #[test]
    fn config_rejects_unknown_and_duplicate_keys() {
        let err = parse_config_str("no_such_key = 1\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"));
        let err = parse_config_str("nodes = 50\nnodes = 60\n").unwrap_err();
        assert!(err.to_string().contains("duplicate key"));
        let err = parse_config_str("beta = not_a_number\n").unwrap_err();
        assert!(err.to_string().contains("bad value"));
        let err = parse_config_str("nodes 50\n").unwrap_err();
        assert!(err.to_string().contains("expected key=value"));
        let err = parse_config_str("beta = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("outside [0, 1)"));
        let err = parse_config_str("sweep_variant = bayesian\n").unwrap_err();
        assert!(err.to_string().contains("DAG attack"));
    }

    #[test]
    fn duplicate_network_kinds_get_numbered_labels() {
        let labels = network_labels(&[
            NetworkSpec::Synthetic(NetworkKind::PowerLaw),
            NetworkSpec::Synthetic(NetworkKind::ErdosRenyi),
            NetworkSpec::Synthetic(NetworkKind::PowerLaw),
        ]);
        assert_eq!(labels, vec!["power_law_1", "erdos_renyi", "power_law_2"]);
    }

    #[test]
    fn summarize_means_and_flags() {
        let base = RunRecord {
            network: "erdos_renyi".into(),
            cascade: 0,
            beta: 0.5,
            epsilon: 3.0f64.ln(),
            variant: "co_dag".into(),
            auc: Some(0.8),
            upper_bound: 0.75,
            runtime_secs: 0.0,
            violation: None,
            dag_mean_size: None,
            error: None,
        };
        let records = vec![
            base.clone(),
            RunRecord {
                cascade: 1,
                auc: Some(0.9),
                ..base.clone()
            },
            RunRecord {
                auc: None,
                error: Some("boom".into()),
                ..base.clone()
            },
            RunRecord {
                variant: "bayesian".into(),
                auc: Some(0.74),
                ..base.clone()
            },
        ];
        let rows = summarize(&records);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].variant, "co_dag");
        assert_eq!(rows[0].runs, 2);
        assert!((rows[0].mean_auc - 0.85).abs() < 1e-12);
        assert!((rows[0].std_auc - (0.005f64).sqrt()).abs() < 1e-12);
        assert!(rows[0].beats_bound);
        assert_eq!(rows[1].variant, "bayesian");
        assert_eq!(rows[1].runs, 1);
        assert_eq!(rows[1].std_auc, 0.0);
        assert!(!rows[1].beats_bound);
    }

    #[test]
    fn run_experiment_emits_deterministic_artifacts() {
        let dir = tempdir().unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        let records = run_experiment(&tiny_config(out_a.clone())).unwrap();
        // 1 network x 2 cascades x 1 beta x 2 methods.
        assert_eq!(records.len(), 4);
        assert!(records.iter().all(|r| r.error.is_none()));
        for r in &records {
            let expected = ((1.0 + r.beta) / (1.0 - r.beta)).ln();
            assert!((r.epsilon - expected).abs() < 1e-12);
        }
        run_experiment(&tiny_config(out_b.clone())).unwrap();
        for file in ["results.csv", "summary.csv", "pernode.csv"] {
            let a = std::fs::read(out_a.join(file)).unwrap();
            let b = std::fs::read(out_b.join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }
        let results = std::fs::read_to_string(out_a.join("results.csv")).unwrap();
        assert_eq!(results.lines().count(), 5);
        assert!(results.starts_with("network,cascade,beta,epsilon,variant,"));
        let timings = std::fs::read_to_string(out_a.join("timings.csv")).unwrap();
        assert_eq!(timings.lines().count(), 5);
        let pernode = std::fs::read_to_string(out_a.join("pernode.csv")).unwrap();
        let nodes = pernode.lines().count() - 1;
        assert_eq!(nodes % 4, 0);
        assert!(nodes > 0);
    }

    #[test]
    fn failed_runs_keep_marked_rows_and_others_proceed() {
        let dir = tempdir().unwrap();
        let mut config = tiny_config(dir.path().join("out"));
        config.pernode = false;
        // Zero contrast: every method fails on this beta, 0.5 still runs.
        config.betas = vec![0.0, 0.5];
        let records = run_experiment(&config).unwrap();
        assert_eq!(records.len(), 8);
        let failed: Vec<_> = records.iter().filter(|r| r.error.is_some()).collect();
        assert_eq!(failed.len(), 4);
        assert!(failed.iter().all(|r| r.beta == 0.0 && r.auc.is_none()));
        assert!(records
            .iter()
            .filter(|r| r.beta == 0.5)
            .all(|r| r.error.is_none() && r.auc.is_some()));
        let results = std::fs::read_to_string(config.out_dir.join("results.csv")).unwrap();
        assert_eq!(results.lines().count(), 9);
        assert_eq!(results.matches("error: ").count(), 4);
        // Failed rows never reach the summary.
        let summary = std::fs::read_to_string(config.out_dir.join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 3);
    }

    #[test]
    fn sweep_anchors_first_for_n_max_and_last_for_eta() {
        let dir = tempdir().unwrap();
        let mut config = tiny_config(dir.path().join("out"));
        config.pernode = false;
        config.cascades = 1;
        config.methods = vec![Method::Attack(AttackVariant::CoDag)];
        config.sweep_n_max = vec![3, 8];
        config.sweep_eta = vec![0.2];
        let records = run_sweep(&config).unwrap();
        assert_eq!(records.len(), 3);
        let n_max: Vec<_> = records.iter().filter(|r| r.param == "n_max").collect();
        assert_eq!(n_max.len(), 2);
        assert_eq!(n_max[0].value, 3.0);
        assert_eq!(n_max[0].relative_auc, 0.0);
        let diff = n_max[1].mean_auc - n_max[0].mean_auc;
        assert!((n_max[1].relative_auc - diff).abs() < 1e-15);
        // A single eta value anchors on itself.
        let eta: Vec<_> = records.iter().filter(|r| r.param == "eta").collect();
        assert_eq!(eta.len(), 1);
        assert_eq!(eta[0].relative_auc, 0.0);
        let text = std::fs::read_to_string(config.out_dir.join("sweep.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("network,param,value,beta,mean_auc,relative_auc"));
    }

    #[test]
    fn generated_network_files_feed_back_as_file_specs() {
        let dir = tempdir().unwrap();
        let mut gen_config = tiny_config(dir.path().join("gen"));
        gen_config.pernode = false;
        let paths = generate_networks(&gen_config).unwrap();
        assert_eq!(paths.len(), 1);
        assert!(paths[0].ends_with("erdos_renyi.edges"));
        let mut config = tiny_config(dir.path().join("out"));
        config.pernode = false;
        config.networks = vec![NetworkSpec::File(paths[0].clone())];
        config.file_directed = true;
        config.methods = vec![Method::Bayesian];
        config.cascades = 1;
        let records = run_experiment(&config).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].network, "erdos_renyi");
        assert!(records[0].error.is_none(), "{:?}", records[0].error);
    }

    #[test]
    fn eval_scores_reports_auc_and_bound() {
        let dir = tempdir().unwrap();
        let scores_path = dir.path().join("scores.csv");
        let truth_path = dir.path().join("truth.csv");
        std::fs::write(
            &scores_path,
            "node_id,alpha,x_hat\n0,0.5,0.9\n1,0.5,0.8\n2,0.5,0.1\n3,0.5,0.2\n",
        )
        .unwrap();
        let truth = GroundTruth {
            x: vec![true, true, false, false],
            seeds: vec![0],
            cascade_fraction: 0.5,
            attempts: 1,
            within_window: true,
        };
        crate::cascade::write_ground_truth(&truth_path, &truth).unwrap();
        let out = eval_scores(&scores_path, &truth_path, Some(0.5)).unwrap();
        assert!(out.contains("auc=1.0000"));
        assert!(out.contains("upper_bound=0.7500"));
        assert!(out.contains("beats_bound=true"));
        let brief = eval_scores(&scores_path, &truth_path, None).unwrap();
        assert!(brief.contains("auc=1.0000"));
        assert!(!brief.contains("upper_bound"));
    }
}
