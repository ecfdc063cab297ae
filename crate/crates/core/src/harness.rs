//! Deterministic experiment runs: confidence-mode sweeps, method
//! comparisons and budget sweeps, reported as CSV.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::admm::{admm_allocate_budget, AdmmParams};
use crate::confidence::{confidence_adjusted, confidence_fixed, ConfidenceVector, PageRankParams, DEFAULT_CLAMP};
use crate::dynamics::{overall_opinion, GodmSystem, SolverOptions};
use crate::error::{Error, Result};
use crate::graph::SignedDigraph;
use crate::greedy::{baseline_allocate, benefit, greedy_allocate, rank_nodes, AllocationPlan, Method, Objective, Ranking};
use crate::ingest::{
    dedupe_edges, gen_synthetic, init_opinions, normalize_weights, parse_edge_list, records_to_graph, DedupePolicy,
    EdgeListFormat, InitKind, InitScheme, Normalization, SyntheticSpec,
};
use crate::scalar::{dist_inf, norm_inf};

/// Largest allowed gap between the re-solved benefit and `g . delta_s`.
pub const BENEFIT_CROSS_CHECK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum GraphSource {
    File {
        path: PathBuf,
        #[serde(default)]
        format: EdgeListFormat,
        #[serde(default = "default_normalization")]
        normalization: Normalization,
        #[serde(default)]
        dedupe: DedupePolicy,
    },
    Synthetic(SyntheticSpec),
}

fn default_normalization() -> Normalization {
    Normalization::DivideByConstant(10.0)
}

/// Confidence-index mode, written `fixed:<alpha>` or `adjusted:<q>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum AlphaSpec {
    Fixed { alpha: f64 },
    Adjusted { q: f64 },
}

impl fmt::Display for AlphaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSpec::Fixed { alpha } => write!(f, "fixed:{alpha}"),
            AlphaSpec::Adjusted { q } => write!(f, "adjusted:{q}"),
        }
    }
}

fn parse_fraction(v: &str) -> Result<f64> {
    let bad = || Error::InvalidParameter(format!("cannot parse {v:?} as a number"));
    match v.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            Ok(a / b)
        }
        None => v.trim().parse().map_err(|_| bad()),
    }
}

impl FromStr for AlphaSpec {
    type Err = Error;

    /// Accepts `fixed:0.5`, `fixed:1/3` and `adjusted:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (mode, value) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("alpha spec {s:?} must look like fixed:<v> or adjusted:<q>")))?;
        let v = parse_fraction(value)?;
        match mode {
            "fixed" => Ok(AlphaSpec::Fixed { alpha: v }),
            "adjusted" => Ok(AlphaSpec::Adjusted { q: v }),
            _ => Err(Error::InvalidParameter(format!("unknown alpha mode {mode:?}"))),
        }
    }
}

impl AlphaSpec {
    pub fn build(&self, graph: &SignedDigraph<f64>, pagerank: PageRankParams, clamp: f64) -> Result<ConfidenceVector<f64>> {
        match *self {
            AlphaSpec::Fixed { alpha } => confidence_fixed(graph.node_count(), alpha, clamp),
            AlphaSpec::Adjusted { q } => confidence_adjusted(graph, q, pagerank, clamp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum BudgetSpec {
    Values(Vec<f64>),
    Sweep { start: f64, stop: f64, step: f64 },
}

impl BudgetSpec {
    /// Budget grid; a sweep includes `stop` when it lands on the grid.
    pub fn grid(&self) -> Result<Vec<f64>> {
        let grid = match self {
            BudgetSpec::Values(v) => v.clone(),
            BudgetSpec::Sweep { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Err(Error::Config(format!("bad budget sweep {start}..{stop} step {step}")));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=count).map(|k| start + k as f64 * step).collect()
            }
        };
        if grid.is_empty() {
            return Err(Error::Config("budget grid is empty".into()));
        }
        if let Some(b) = grid.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return Err(Error::Config(format!("budget {b} must be finite and nonnegative")));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol: f64,
    pub dense_threshold: usize,
    pub gmres_restart: usize,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::<f64>::default();
        SolverConfig { tol: d.tol, dense_threshold: d.dense_threshold, gmres_restart: d.gmres_restart, max_iter: d.max_iter }
    }
}

impl From<SolverConfig> for SolverOptions<f64> {
    fn from(c: SolverConfig) -> Self {
        SolverOptions { tol: c.tol, dense_threshold: c.dense_threshold, gmres_restart: c.gmres_restart, max_iter: c.max_iter }
    }
}

fn default_dataset() -> String {
    "dataset".into()
}
fn default_repetitions() -> usize {
    10
}
fn default_alpha() -> Vec<AlphaSpec> {
    vec![AlphaSpec::Adjusted { q: crate::confidence::DEFAULT_Q }]
}
fn default_methods() -> Vec<Method> {
    vec![Method::Greedy, Method::Rand, Method::Trust, Method::Io]
}
fn default_budget() -> BudgetSpec {
    BudgetSpec::Values(vec![200.0])
}
fn default_init() -> InitKind {
    InitKind::Uniform
}
fn default_clamp() -> f64 {
    DEFAULT_CLAMP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dataset")]
    pub dataset: String,
    pub graph: GraphSource,
    #[serde(default = "default_init")]
    pub init: InitKind,
    /// Seeds `seed_base .. seed_base + repetitions`.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<AlphaSpec>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default = "default_budget")]
    pub budget: BudgetSpec,
    #[serde(default = "default_clamp")]
    pub clamp: f64,
    #[serde(default)]
    pub pagerank: PageRankParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub admm: AdmmParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<String>, graph: GraphSource) -> Self {
        ExperimentConfig {
            dataset: dataset.into(),
            graph,
            init: default_init(),
            repetitions: default_repetitions(),
            seed_base: 0,
            alpha: default_alpha(),
            methods: default_methods(),
            objective: Objective::Maximize,
            budget: default_budget(),
            clamp: default_clamp(),
            pagerank: PageRankParams::default(),
            solver: SolverConfig::default(),
            admm: AdmmParams::default(),
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repetitions as u64).map(|k| self.seed_base + k).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.alpha.is_empty() {
            return Err(Error::Config("at least one alpha mode is required".into()));
        }
        self.budget.grid()?;
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form,
    /// ignoring the output path.
    pub fn fingerprint(&self) -> Result<String> {
        let canonical = ExperimentConfig { output: None, ..self.clone() }.to_toml()?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(hex::encode(digest)[..16].to_string())
    }
}

/// Loads, dedupes and normalizes an edge-list file.
pub fn load_graph_file(
    path: &Path,
    format: &EdgeListFormat,
    normalization: Normalization,
    dedupe: DedupePolicy,
) -> Result<SignedDigraph<f64>> {
    let ctx = || path.display().to_string();
    let file = File::open(path).map_err(|e| Error::from(e).context(ctx()))?;
    let parsed = parse_edge_list::<f64, _>(BufReader::new(file), format).map_err(|e| e.context(ctx()))?;
    if !parsed.malformed.is_empty() {
        log::warn!("{}: skipped {} malformed line(s)", ctx(), parsed.malformed.len());
    }
    let records = dedupe_edges(parsed.records, dedupe);
    let (records, dropped) = normalize_weights(records, normalization).map_err(|e| e.context(ctx()))?;
    if dropped > 0 {
        log::info!("{}: dropped {dropped} zero-weight edge(s)", ctx());
    }
    let (graph, _) = records_to_graph(&records).map_err(|e| e.context(ctx()))?;
    Ok(graph)
}

pub fn load_graph(source: &GraphSource) -> Result<SignedDigraph<f64>> {
    match source {
        GraphSource::File { path, format, normalization, dedupe } => load_graph_file(path, format, *normalization, *dedupe),
        GraphSource::Synthetic(spec) => gen_synthetic(spec),
    }
}

/// Seed for the random baseline ordering, decorrelated from the init seed.
pub fn rand_ranking_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5241_4E44
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub init: InitKind,
    pub seed: u64,
    pub alpha: String,
    pub method: Method,
    pub mu: f64,
    pub spent: f64,
    pub p_before: f64,
    pub p_after: f64,
    /// `p_after - p_before` from two equilibrium solves.
    pub benefit: f64,
    /// `g . delta_s`
    pub linear_benefit: f64,
    pub unit_benefit: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub alpha: String,
    pub method: Method,
    pub mu: f64,
    pub count: usize,
    pub mean_benefit: f64,
    pub std_benefit: f64,
    pub mean_unit_benefit: f64,
    pub mean_p_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub fingerprint: String,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_HEADER: [&str; 13] = [
    "fingerprint",
    "dataset",
    "init",
    "seed",
    "alpha",
    "method",
    "mu",
    "spent",
    "p_before",
    "p_after",
    "benefit",
    "linear_benefit",
    "unit_benefit",
];

pub const SUMMARY_HEADER: [&str; 9] =
    ["fingerprint", "alpha", "method", "mu", "count", "mean_benefit", "std_benefit", "mean_unit_benefit", "mean_p_after"];

fn init_name(k: InitKind) -> &'static str {
    match k {
        InitKind::Uniform => "uniform",
        InitKind::Normal => "normal",
        InitKind::DegreeProportional => "degree",
    }
}

impl ExperimentReport {
    /// Mean and sample standard deviation over seeds, keyed by
    /// `(alpha, method, mu)` in first-appearance order.
    pub fn aggregates(&self) -> Vec<AggregateRow> {
        let mut order: Vec<(String, Method, u64)> = Vec::new();
        let mut groups: BTreeMap<(String, Method, u64), Vec<&ReportRow>> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.alpha.clone(), r.method, r.mu.to_bits());
            groups
                .entry(key.clone())
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(r);
        }
        order
            .into_iter()
            .map(|key| {
                let rows = &groups[&key];
                let k = rows.len() as f64;
                let mean = |f: fn(&ReportRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / k;
                let mean_benefit = mean(|r| r.benefit);
                let var = if rows.len() > 1 {
                    rows.iter().map(|r| (r.benefit - mean_benefit).powi(2)).sum::<f64>() / (k - 1.0)
                } else {
                    0.0
                };
                AggregateRow {
                    alpha: key.0,
                    method: key.1,
                    mu: f64::from_bits(key.2),
                    count: rows.len(),
                    mean_benefit,
                    std_benefit: var.sqrt(),
                    mean_unit_benefit: mean(|r| r.unit_benefit),
                    mean_p_after: mean(|r| r.p_after),
                }
            })
            .collect()
    }

    pub fn mean_benefit(&self, alpha: &str, method: Method, mu: f64) -> Option<f64> {
        self.aggregates()
            .into_iter()
            .find(|a| a.alpha == alpha && a.method == method && a.mu == mu)
            .map(|a| a.mean_benefit)
    }

    /// Per-seed rows. Wall times are appended only when `timings` is set,
    /// so default output is byte-identical across reruns.
    pub fn write_csv<W: Write>(&self, writer: W, timings: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = REPORT_HEADER.to_vec();
        if timings {
            header.push("wall_time_ms");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                self.fingerprint.clone(),
                r.dataset.clone(),
                init_name(r.init).to_string(),
                r.seed.to_string(),
                r.alpha.clone(),
                r.method.to_string(),
                r.mu.to_string(),
                r.spent.to_string(),
                r.p_before.to_string(),
                r.p_after.to_string(),
                r.benefit.to_string(),
                r.linear_benefit.to_string(),
                r.unit_benefit.to_string(),
            ];
            if timings {
                rec.push(format!("{:.3}", r.wall_time_ms));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SUMMARY_HEADER)?;
        for a in self.aggregates() {
            w.write_record([
                self.fingerprint.clone(),
                a.alpha,
                a.method.to_string(),
                a.mu.to_string(),
                a.count.to_string(),
                a.mean_benefit.to_string(),
                a.std_benefit.to_string(),
                a.mean_unit_benefit.to_string(),
                a.mean_p_after.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Allocation for one method on one instance.
#[allow(clippy::too_many_arguments)]
pub fn allocate(
    method: Method,
    graph: &SignedDigraph<f64>,
    g: &[f64],
    s: &[f64],
    mu: f64,
    objective: Objective,
    seed: u64,
    admm: &AdmmParams,
) -> Result<AllocationPlan<f64>> {
    let ranking = match method {
        Method::Greedy => return greedy_allocate(g, s, mu, objective),
        Method::Admm => {
            let coef: Vec<f64> = g.iter().map(|v| v * objective.direction::<f64>()).collect();
            return Ok(admm_allocate_budget(&coef, s, mu, admm)?.plan);
        }
        Method::Rand => Ranking::Rand { seed: rand_ranking_seed(seed) },
        Method::Trust => Ranking::Trust,
        Method::Io => Ranking::Io,
    };
    let order = rank_nodes(graph, s, ranking)?;
    let order = match (method, objective) {
        // When minimizing, IO persuades the most positive nodes first.
        (Method::Io, Objective::Minimize) => order.into_iter().rev().collect(),
        _ => order,
    };
    baseline_allocate(&order, s, mu, objective, method)
}

/// Runs every `seed x alpha x method x budget` cell of the config on an
/// already-loaded graph.
pub fn run_on_graph(config: &ExperimentConfig, graph: &SignedDigraph<f64>) -> Result<ExperimentReport> {
    config.validate()?;
    let fingerprint = config.fingerprint()?;
    let budgets = config.budget.grid()?;
    let opts: SolverOptions<f64> = config.solver.into();
    let seeds = config.seeds();

    let mut rows = Vec::new();
    for spec in &config.alpha {
        let ctx = |e: Error| e.context(format!("{} alpha {spec}", config.dataset));
        let alpha = spec.build(graph, config.pagerank, config.clamp).map_err(ctx)?;
        let system = GodmSystem::new(graph, alpha).map_err(ctx)?;
        let g = system.contribution_index(&opts).map_err(ctx)?;

        let per_seed: Vec<Result<Vec<ReportRow>>> = seeds
            .par_iter()
            .map(|&seed| {
                let ctx = |e: Error| e.context(format!("{} alpha {spec} seed {seed}", config.dataset));
                let s = init_opinions(graph, InitScheme { kind: config.init, seed }).map_err(ctx)?;
                let before = system.equilibrium_direct(&s, &opts).map_err(ctx)?;
                let p_before = overall_opinion(&before.z_star);
                let mut out = Vec::with_capacity(config.methods.len() * budgets.len());
                for &method in &config.methods {
                    for &mu in &budgets {
                        let started = Instant::now();
                        let plan = allocate(method, graph, &g, &s, mu, config.objective, seed, &config.admm)
                            .map_err(|e| ctx(e.context(format!("{method} mu {mu}"))))?;
                        let after = system.equilibrium_direct(&plan.apply(&s), &opts).map_err(ctx)?;
                        let p_after = overall_opinion(&after.z_star);
                        let measured = p_after - p_before;
                        let linear = benefit(&g, &plan);
                        if (measured - linear).abs() > BENEFIT_CROSS_CHECK {
                            return Err(ctx(Error::CrossCheck(format!(
                                "{method} mu {mu}: re-solved benefit {measured} vs g.delta_s {linear}"
                            ))));
                        }
                        out.push(ReportRow {
                            dataset: config.dataset.clone(),
                            init: config.init,
                            seed,
                            alpha: spec.to_string(),
                            method,
                            mu,
                            spent: plan.spent,
                            p_before,
                            p_after,
                            benefit: measured,
                            linear_benefit: linear,
                            unit_benefit: if mu > 0.0 { measured / mu } else { 0.0 },
                            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
                        });
                    }
                }
                Ok(out)
            })
            .collect();
        for r in per_seed {
            rows.extend(r?);
        }
    }
    Ok(ExperimentReport { fingerprint, rows })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let graph = load_graph(&config.graph).map_err(|e| e.context(config.dataset.clone()))?;
    run_on_graph(config, &graph)
}

/// [`run_experiment`] over a budget grid, which must be strictly increasing.
pub fn sweep_budget(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = config.budget.grid()?;
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("budget grid must be strictly increasing".into()));
    }
    run_experiment(config)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelComparison {
    /// `||z_godm - z_omstn||_inf`
    pub deviation: f64,
    /// Against the classic averaging update; only on all-positive graphs.
    pub fj_deviation: Option<f64>,
}

/// Fixed point of `z_i = (s_i + sum_j w_ij z_j) / (c + sum_j f(w_ij))` by
/// synchronous sweeps.
fn averaging_fixed_point(graph: &SignedDigraph<f64>, s: &[f64], absolute: bool, tol: f64) -> Result<Vec<f64>> {
    let n = graph.node_count();
    let denom: Vec<f64> = (0..n)
        .map(|i| 1.0 + graph.successors(i).map(|(_, w)| if absolute { w.abs() } else { w }).sum::<f64>())
        .collect();
    let mut z = s.to_vec();
    for _ in 0..1_000_000 {
        let next: Vec<f64> = (0..n)
            .map(|i| (s[i] + graph.successors(i).map(|(j, w)| w * z[j]).sum::<f64>()) / denom[i])
            .collect();
        let change = dist_inf(&z, &next);
        z = next;
        if change < tol {
            return Ok(z);
        }
    }
    Err(Error::NotConverged { what: "averaging fixed point", iterations: 1_000_000, residual: f64::NAN })
}

/// Equilibrium at `alpha_i = 1/2` against the unit-confidence averaging
/// model `z_i = (s_i + sum w_ij z_j) / (1 + sum |w_ij|)`.
pub fn compare_models(graph: &SignedDigraph<f64>, s: &[f64], opts: &SolverOptions<f64>) -> Result<ModelComparison> {
    let alpha = confidence_fixed(graph.node_count(), 0.5, DEFAULT_CLAMP)?;
    let system = GodmSystem::new(graph, alpha)?;
    let z = system.equilibrium_direct(s, opts)?.z_star;
    let tol = 1e-14 * norm_inf(s).max(1.0);
    let omstn = averaging_fixed_point(graph, s, true, tol)?;
    let fj_deviation = if graph.all_positive() {
        Some(dist_inf(&z, &averaging_fixed_point(graph, s, false, tol)?))
    } else {
        None
    };
    Ok(ModelComparison { deviation: dist_inf(&z, &omstn), fj_deviation })
}
