use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use godm::admm::{admm_allocate_budget, admm_solve, AdmmParams, AdmmState};
use godm::confidence::{PageRankParams, DEFAULT_CLAMP, DEFAULT_DAMPING, DEFAULT_PR_TOL};
use godm::harness::{
    allocate, compare_models, load_graph, run_experiment, AlphaSpec, BudgetSpec, ExperimentConfig, GraphSource,
};
use godm::ingest::{
    dedupe_edges, gen_synthetic, init_opinions, normalize_weights, parse_edge_list, records_to_graph, write_edge_list,
    DedupePolicy, EdgeListFormat, EdgeRecord, InitKind, InitScheme, Normalization, SyntheticSpec, WeightDist,
};
use godm::{benefit, overall_opinion, Digraph, GodmSystem, Method, Objective, Plan, SolverOptions};

#[derive(Parser)]
#[command(name = "godm", version, about = "Opinion dynamics and opinion maximization on signed trust networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the equilibrium and per-node contribution index.
    Solve(SolveArgs),
    /// Spend a budget on internal opinions to raise (or lower) the overall opinion.
    Maximize(MaximizeArgs),
    /// Compare the alpha = 1/2 equilibrium with the unit-confidence and classic averaging models.
    Compare(CompareArgs),
    /// Run an experiment grid and write a CSV report.
    Sweep(SweepArgs),
    /// Write a synthetic signed edge list.
    Gen(GenArgs),
    /// Load a graph and print diagnostics.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct GraphArgs {
    /// Edge-list file (src, dst, weight[, timestamp]).
    #[arg(long, conflicts_with = "nodes")]
    graph: Option<PathBuf>,
    /// Field delimiter of the edge list.
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// The edge list starts with a header row.
    #[arg(long)]
    header: bool,
    /// Ignore the fourth (timestamp) column.
    #[arg(long)]
    no_timestamp: bool,
    /// Weight normalization: `max-abs`, `const:<c>` or `none`.
    #[arg(long, default_value = "const:10", value_parser = parse_normalization)]
    normalize: Normalization,
    #[arg(long, value_enum, default_value_t = DedupeArg::KeepLast)]
    dedupe: DedupeArg,

    #[command(flatten)]
    synthetic: SyntheticArgs,
}

#[derive(Args, Clone)]
struct SyntheticArgs {
    /// Generate a synthetic graph with this many nodes instead of reading a file.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    edge_prob: f64,
    #[arg(long, default_value_t = 0.2)]
    negative_prob: f64,
    /// Lower end of the uniform |weight| distribution.
    #[arg(long, default_value_t = 0.0)]
    weight_low: f64,
    #[arg(long, default_value_t = 1.0)]
    weight_high: f64,
    #[arg(long, default_value_t = 0)]
    graph_seed: u64,
}

impl SyntheticArgs {
    fn spec(&self, n: usize) -> SyntheticSpec {
        SyntheticSpec {
            n,
            edge_prob: self.edge_prob,
            negative_prob: self.negative_prob,
            weights: WeightDist::Uniform { low: self.weight_low, high: self.weight_high },
            seed: self.graph_seed,
        }
    }
}

impl GraphArgs {
    fn format(&self) -> EdgeListFormat {
        EdgeListFormat {
            delimiter: self.delimiter,
            has_header: self.header,
            timestamp_col: if self.no_timestamp { None } else { Some(3) },
            ..EdgeListFormat::default()
        }
    }

    fn source(&self) -> Option<GraphSource> {
        match (&self.graph, self.synthetic.nodes) {
            (Some(path), _) => Some(GraphSource::File {
                path: path.clone(),
                format: self.format(),
                normalization: self.normalize,
                dedupe: self.dedupe.into(),
            }),
            (None, Some(n)) => Some(GraphSource::Synthetic(self.synthetic.spec(n))),
            (None, None) => None,
        }
    }

    fn require_source(&self) -> Result<GraphSource> {
        match self.source() {
            Some(s) => Ok(s),
            None => bail!("no graph given: pass --graph <file> or --nodes <n>"),
        }
    }

    fn load(&self) -> Result<Digraph> {
        Ok(load_graph(&self.require_source()?)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DedupeArg {
    KeepLast,
    KeepFirst,
    Mean,
}

impl From<DedupeArg> for DedupePolicy {
    fn from(d: DedupeArg) -> Self {
        match d {
            DedupeArg::KeepLast => DedupePolicy::KeepLast,
            DedupeArg::KeepFirst => DedupePolicy::KeepFirst,
            DedupeArg::Mean => DedupePolicy::MeanWeight,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Uniform,
    Normal,
    Degree,
}

impl From<InitArg> for InitKind {
    fn from(i: InitArg) -> Self {
        match i {
            InitArg::Uniform => InitKind::Uniform,
            InitArg::Normal => InitKind::Normal,
            InitArg::Degree => InitKind::DegreeProportional,
        }
    }
}

fn parse_normalization(s: &str) -> std::result::Result<Normalization, String> {
    match s {
        "max-abs" => Ok(Normalization::DivideByMaxAbs),
        "none" => Ok(Normalization::Identity),
        _ => s
            .strip_prefix("const:")
            .and_then(|c| c.parse().ok())
            .map(Normalization::DivideByConstant)
            .ok_or_else(|| format!("expected max-abs, const:<c> or none, got {s:?}")),
    }
}

fn parse_budget_sweep(s: &str) -> std::result::Result<BudgetSpec, String> {
    let parts: Vec<f64> = s.split(':').map(|p| p.parse::<f64>().map_err(|e| e.to_string())).collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [start, stop, step] => Ok(BudgetSpec::Sweep { start, stop, step }),
        _ => Err(format!("expected start:stop:step, got {s:?}")),
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// `fixed:<alpha>` or `adjusted:<q>`; fractions like `fixed:1/3` are accepted.
    #[arg(long, default_value = "adjusted:0.5")]
    alpha: AlphaSpec,
    #[arg(long, default_value_t = DEFAULT_DAMPING)]
    damping: f64,
    #[arg(long, default_value_t = DEFAULT_PR_TOL)]
    pr_tol: f64,
    /// Confidence values are clamped to [clamp, 1 - clamp].
    #[arg(long, default_value_t = DEFAULT_CLAMP)]
    clamp: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Uniform)]
    init: InitArg,
    /// Seed for the internal opinions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn pagerank(&self) -> PageRankParams {
        PageRankParams { damping: self.damping, tol: self.pr_tol, ..PageRankParams::default() }
    }
}

#[derive(Args)]
struct OutputArg {
    /// Write CSV here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl OutputArg {
    fn open(&self) -> Result<Box<dyn Write>> {
        open_output(self.output.as_deref())
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct MaximizeArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// L1 budget mu.
    #[arg(long, default_value_t = 200.0)]
    budget: f64,
    #[arg(long, default_value = "greedy")]
    method: Method,
    /// `max` or `min`.
    #[arg(long, default_value = "max")]
    objective: Objective,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Run ADMM at this L1 weight instead of calibrating it to the budget.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    admm_tol: f64,
    #[arg(long, default_value_t = 5000)]
    admm_max_iter: usize,
    /// Adapt rho by residual balancing; --rho is the starting value.
    #[arg(long)]
    adaptive_rho: bool,
    /// Write the ADMM residual trace to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_enum, default_value_t = InitArg::Uniform)]
    init: InitArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed_base: Option<u64>,
    /// Confidence modes, comma separated, e.g. `fixed:2/3,fixed:1/2,adjusted:0.5`.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<AlphaSpec>>,
    /// Comma-separated subset of greedy, admm, rand, trust, io.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    objective: Option<Objective>,
    /// Budgets, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "budget_sweep")]
    budget: Option<Vec<f64>>,
    /// Budget grid as `start:stop:step`.
    #[arg(long, value_parser = parse_budget_sweep)]
    budget_sweep: Option<BudgetSpec>,
    #[arg(long)]
    clamp: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    pr_tol: Option<f64>,
    #[arg(long)]
    solver_tol: Option<f64>,
    #[arg(long)]
    dense_threshold: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    admm_tol: Option<f64>,
    #[arg(long)]
    admm_max_iter: Option<usize>,
    #[arg(long)]
    adaptive_rho: Option<bool>,
    /// Report CSV path (stdout when absent).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write mean/stddev rows per (alpha, method, budget).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Include per-row wall time (makes the report nondeterministic).
    #[arg(long)]
    timings: bool,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    graph: GraphArgs,
}

fn system_for<'g>(graph: &'g Digraph, model: &ModelArgs) -> Result<(GodmSystem<'g, f64>, Vec<f64>)> {
    let alpha = model.alpha.build(graph, model.pagerank(), model.clamp)?;
    let sys = GodmSystem::new(graph, alpha)?;
    let s = init_opinions(graph, InitScheme { kind: model.init.into(), seed: model.seed })?;
    Ok((sys, s))
}

fn solve(args: &SolveArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let (sys, s) = system_for(&graph, &args.model)?;
    let opts = SolverOptions::default();
    let eq = sys.equilibrium_direct(&s, &opts)?;
    let g = sys.contribution_index(&opts)?;
    let alpha = sys.alpha().values();

    let mut w = csv::Writer::from_writer(args.out.open()?);
    w.write_record(["node", "s", "alpha", "z_star", "g"])?;
    for i in 0..graph.node_count() {
        w.write_record([graph.label(i).to_string(), s[i].to_string(), alpha[i].to_string(), eq.z_star[i].to_string(), g[i].to_string()])?;
    }
    w.flush()?;
    let summary = json!({
        "nodes": graph.node_count(),
        "edges": graph.edge_count(),
        "alpha": args.model.alpha.to_string(),
        "overall_opinion": overall_opinion(&eq.z_star),
        "residual": eq.residual,
        "iterations": eq.iterations,
    });
    eprintln!("{summary}");
    Ok(())
}

fn write_trace(path: &Path, state: &AdmmState<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["iteration", "primal_residual", "dual_residual", "objective"])?;
    for r in &state.trace {
        w.write_record([r.iteration.to_string(), r.primal_residual.to_string(), r.dual_residual.to_string(), r.objective.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn maximize(args: &MaximizeArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let (sys, s) = system_for(&graph, &args.model)?;
    let opts = SolverOptions::default();
    let g = sys.contribution_index(&opts)?;
    let params = AdmmParams {
        rho: args.rho,
        tol_abs: args.admm_tol,
        tol_rel: args.admm_tol,
        max_iter: args.admm_max_iter,
        trace: args.trace.is_some(),
        adaptive_rho: args.adaptive_rho,
    };
    if args.lambda.is_some() && args.method != Method::Admm {
        bail!("--lambda only applies to --method admm");
    }
    let coef: Vec<f64> = g.iter().map(|v| v * args.objective.direction::<f64>()).collect();

    let (plan, state, lambda): (Plan, Option<AdmmState<f64>>, Option<f64>) = match (args.method, args.lambda) {
        (Method::Admm, Some(lambda)) => {
            let (plan, st) = admm_solve(&coef, &s, lambda, &params)?;
            (plan, Some(st), Some(lambda))
        }
        (Method::Admm, None) => {
            let out = admm_allocate_budget(&coef, &s, args.budget, &params)?;
            (out.plan, Some(out.state), Some(out.lambda))
        }
        (method, _) => (allocate(method, &graph, &g, &s, args.budget, args.objective, args.model.seed, &params)?, None, None),
    };
    if let (Some(path), Some(st)) = (&args.trace, &state) {
        write_trace(path, st)?;
    }

    let p_before = overall_opinion(&sys.equilibrium_direct(&s, &opts)?.z_star);
    let s_new = plan.apply(&s);
    let p_after = overall_opinion(&sys.equilibrium_direct(&s_new, &opts)?.z_star);

    let mut w = csv::Writer::from_writer(args.out.open()?);
    w.write_record(["node", "s", "delta_s", "s_new", "g"])?;
    for &(i, d) in &plan.touched {
        w.write_record([graph.label(i).to_string(), s[i].to_string(), d.to_string(), s_new[i].to_string(), g[i].to_string()])?;
    }
    w.flush()?;
    let summary = json!({
        "method": args.method.as_str(),
        "objective": if args.objective == Objective::Maximize { "max" } else { "min" },
        "mu": args.budget,
        "spent": plan.spent,
        "touched": plan.touched.len(),
        "p_before": p_before,
        "p_after": p_after,
        "benefit": p_after - p_before,
        "linear_benefit": benefit(&g, &plan),
        "lambda": lambda,
        "admm_iterations": state.as_ref().map(|st| st.iterations),
    });
    eprintln!("{summary}");
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let s = init_opinions(&graph, InitScheme { kind: args.init.into(), seed: args.seed })?;
    let c = compare_models(&graph, &s, &SolverOptions::default())?;
    let mut w = csv::Writer::from_writer(args.out.open()?);
    w.write_record(["nodes", "edges", "deviation", "fj_deviation"])?;
    w.write_record([
        graph.node_count().to_string(),
        graph.edge_count().to_string(),
        c.deviation.to_string(),
        c.fj_deviation.map(|d| d.to_string()).unwrap_or_default(),
    ])?;
    w.flush()?;
    Ok(())
}

fn sweep_config(args: &SweepArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, args.graph.source()) {
        (Some(path), source) => {
            let mut cfg = ExperimentConfig::load(path)?;
            if let Some(source) = source {
                cfg.graph = source;
            }
            cfg
        }
        (None, Some(source)) => ExperimentConfig::new("dataset", source),
        (None, None) => bail!("sweep needs --config or a graph (--graph <file> / --nodes <n>)"),
    };
    if let Some(v) = &args.dataset {
        cfg.dataset = v.clone();
    }
    if let Some(v) = args.init {
        cfg.init = v.into();
    }
    if let Some(v) = args.repetitions {
        cfg.repetitions = v;
    }
    if let Some(v) = args.seed_base {
        cfg.seed_base = v;
    }
    if let Some(v) = &args.alpha {
        cfg.alpha = v.clone();
    }
    if let Some(v) = &args.methods {
        cfg.methods = v.clone();
    }
    if let Some(v) = args.objective {
        cfg.objective = v;
    }
    if let Some(v) = &args.budget {
        cfg.budget = BudgetSpec::Values(v.clone());
    }
    if let Some(v) = &args.budget_sweep {
        cfg.budget = v.clone();
    }
    if let Some(v) = args.clamp {
        cfg.clamp = v;
    }
    if let Some(v) = args.damping {
        cfg.pagerank.damping = v;
    }
    if let Some(v) = args.pr_tol {
        cfg.pagerank.tol = v;
    }
    if let Some(v) = args.solver_tol {
        cfg.solver.tol = v;
    }
    if let Some(v) = args.dense_threshold {
        cfg.solver.dense_threshold = v;
    }
    if let Some(v) = args.rho {
        cfg.admm.rho = v;
    }
    if let Some(v) = args.admm_tol {
        cfg.admm.tol_abs = v;
        cfg.admm.tol_rel = v;
    }
    if let Some(v) = args.admm_max_iter {
        cfg.admm.max_iter = v;
    }
    if let Some(v) = args.adaptive_rho {
        cfg.admm.adaptive_rho = v;
    }
    if let Some(v) = &args.output {
        cfg.output = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let cfg = sweep_config(args)?;
    if args.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let report = run_experiment(&cfg)?;
    report.write_csv(open_output(cfg.output.as_deref())?, args.timings)?;
    if let Some(path) = &args.summary {
        report.write_summary_csv(open_output(Some(path))?)?;
    }
    log::info!("fingerprint {} rows {}", report.fingerprint, report.rows.len());
    Ok(())
}

fn gen(args: &GenArgs) -> Result<()> {
    let Some(n) = args.synthetic.nodes else {
        bail!("gen needs --nodes <n>");
    };
    let graph: Digraph = gen_synthetic(&args.synthetic.spec(n))?;
    let records: Vec<EdgeRecord<f64>> = graph.edge_records().into_iter().map(|(a, b, w)| EdgeRecord::new(a, b, w)).collect();
    write_edge_list(args.out.open()?, &records, args.delimiter)?;
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<()> {
    let mut report: Vec<(&str, String)> = Vec::new();
    let graph = match args.graph.require_source()? {
        GraphSource::File { path, format, normalization, dedupe } => {
            let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            let parsed = parse_edge_list::<f64, _>(BufReader::new(file), &format)?;
            for m in parsed.malformed.iter().take(10) {
                log::warn!("line {}: {}", m.line, m.reason);
            }
            let read = parsed.records.len();
            let records = dedupe_edges(parsed.records, dedupe);
            let collapsed = read - records.len();
            let (records, zero) = normalize_weights(records, normalization)?;
            let (graph, stats) = records_to_graph(&records)?;
            report.push(("records", read.to_string()));
            report.push(("malformed_lines", parsed.malformed.len().to_string()));
            report.push(("duplicates_collapsed", collapsed.to_string()));
            report.push(("zero_weight_dropped", zero.to_string()));
            report.push(("self_loops_dropped", stats.dropped_self_loops.to_string()));
            graph
        }
        source => load_graph(&source)?,
    };
    let d = graph.validate();
    report.push(("nodes", d.nodes.to_string()));
    report.push(("edges", d.edges.to_string()));
    report.push(("negative_edges", d.negative_edges.to_string()));
    if let Some((lo, hi)) = d.weight_range {
        report.push(("min_weight", lo.to_string()));
        report.push(("max_weight", hi.to_string()));
    }
    report.push(("sinks", d.sinks.to_string()));
    report.push(("isolated", d.isolated.to_string()));

    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["metric", "value"])?;
    for (k, v) in report {
        w.write_record([k, v.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

fn error_line(err: &anyhow::Error) -> serde_json::Value {
    let kind = err
        .chain()
        .find_map(|e| match (e.downcast_ref::<godm::Error>(), e.downcast_ref::<io::Error>()) {
            (Some(e), _) => Some(e.kind()),
            (None, Some(_)) => Some("io"),
            _ => None,
        })
        .unwrap_or("cli");
    let message = err.chain().map(|e| e.to_string()).collect::<Vec<_>>().join(": ");
    json!({ "error": { "kind": kind, "message": message } })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let message = e.kind().as_str().map_or_else(|| e.to_string(), str::to_string);
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": message } }));
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Maximize(a) => maximize(a),
        Command::Compare(a) => compare(a),
        Command::Sweep(a) => sweep(a),
        Command::Gen(a) => gen(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
