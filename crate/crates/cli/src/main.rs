mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use hetecf::atomic::write_atomic;
use hetecf::eval::{format_weights, report_weights, run_experiment, EvalError, ExperimentConfig, Method};
use hetecf::graph::{derive_ratings, load_graph, GraphError, HeteroGraph, RatingMatrix, Schema};
use hetecf::learner::{train, LearnerError};
use hetecf::metapath::{
    build_relation_set, build_relation_set_cached, parse_specs, CacheStatus, Group, MetaPath, MetaPathError,
    MetaPathSpec, PathSimVariant, RelationSet, SimilarityCache,
};
use hetecf::model::{read_model, write_model, Hyperparams, ModelError, Problem, SavedModel};
use hetecf::presets;
use hetecf::synth::{linear_fit, scaling_benchmark, timing_csv, BenchmarkConfig, Sweep, SynthError, SynthSpec};

use config::FileConfig;

#[derive(Parser, Debug)]
#[command(
    name = "hetecf",
    version,
    about = "Collaborative filtering on heterogeneous networks"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a graph and report node and edge counts.
    Validate {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Compute PathSim matrices for every meta-path into the cache directory.
    Similarity {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Fit the model and write the model file and training log.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        hp: HyperArgs,
        /// Model output path.
        #[arg(long, short)]
        out: PathBuf,
        /// Training log CSV (default: <out>.log.csv).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Repeated hold-out comparison of all methods.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        hp: HyperArgs,
        /// Report CSV output path.
        #[arg(long, short)]
        out: PathBuf,
        /// Comma-separated methods: user-mean, item-mean, nmf, mf, hete-cf.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Comma-separated training fractions.
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        /// Comma-separated latent dimensions.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Random splits per training fraction.
        #[arg(long)]
        trials: Option<usize>,
        /// Run trials in parallel. Results are then not bit-reproducible.
        #[arg(long)]
        parallel: bool,
    },
    /// Time training on synthetic networks over d and over network size.
    Benchmark {
        #[command(flatten)]
        hp: HyperArgs,
        /// Timing CSV output path.
        #[arg(long, short)]
        out: PathBuf,
        /// Comma-separated dimensions for the d sweep.
        #[arg(long, value_delimiter = ',')]
        d_values: Option<Vec<usize>>,
        /// Comma-separated node-count multipliers for the size sweep.
        #[arg(long, value_delimiter = ',')]
        size_multipliers: Option<Vec<usize>>,
        /// Latent dimension used in the size sweep.
        #[arg(long)]
        size_sweep_d: Option<usize>,
        /// Timed runs per cell; the median is reported.
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Top-k items for one user from a trained model.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        /// Model file written by `train`.
        #[arg(long, short)]
        model: PathBuf,
        /// User node id.
        #[arg(long, short)]
        user: String,
        /// Number of items to list.
        #[arg(long, short, default_value_t = 10)]
        k: usize,
    },
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Built-in layout supplying schema, meta-paths and target: dblp or meetup.
    #[arg(long)]
    preset: Option<String>,
    /// Schema file.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Node file: `<id>\t<type>` per line.
    #[arg(long)]
    nodes: Option<PathBuf>,
    /// Edge file: `<src>\t<dst>\t<relation>[\t<weight>]` per line.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Meta-path file: one `UU|II|UI: path` per line.
    #[arg(long)]
    metapaths: Option<PathBuf>,
    /// User-to-item meta-path defining the rating matrix.
    #[arg(long)]
    target: Option<String>,
    /// PathSim variant: rowcol or diagonal.
    #[arg(long)]
    variant: Option<String>,
    /// Similarity cache directory.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct HyperArgs {
    /// Ridge weight, >= 0.
    #[arg(long)]
    lambda: Option<f64>,
    /// Weight of the user-item meta-path term (default: rating density).
    #[arg(long)]
    mu: Option<f64>,
    /// Initial gradient step size.
    #[arg(long)]
    learn_rate: Option<f64>,
    /// Relative-change threshold of the inner loops.
    #[arg(long)]
    inner_tol: Option<f64>,
    /// Relative-change threshold of the outer loop.
    #[arg(long)]
    outer_tol: Option<f64>,
    /// Step cap per inner loop.
    #[arg(long)]
    max_inner: Option<usize>,
    /// Outer iteration cap.
    #[arg(long)]
    max_outer: Option<usize>,
    /// Latent dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// full-batch or stochastic.
    #[arg(long)]
    optimizer: Option<String>,
    /// simplex or nonnegative.
    #[arg(long)]
    weight_constraint: Option<String>,
}

/// Exit status 2: bad input. Exit status 3: numerical failure.
#[derive(Debug)]
enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<MetaPathError> for Failure {
    fn from(e: MetaPathError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFinite { .. } => Failure::Numerical(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<LearnerError> for Failure {
    fn from(e: LearnerError) -> Self {
        match e {
            LearnerError::Model(m) => m.into(),
            LearnerError::InvalidDimension => Failure::Input(e.to_string()),
            LearnerError::Divergence { .. } => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Learner(l) => l.into(),
            EvalError::Model(m) => m.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Learner(l) => l.into(),
            SynthError::Model(m) => m.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

fn write_artifact(path: &Path, contents: &str) -> Result<(), Failure> {
    write_atomic(path, contents.as_bytes()).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parse_value<T: std::str::FromStr<Err = String>>(what: &str, s: &str) -> Result<T, Failure> {
    s.parse().map_err(|e| Failure::Input(format!("{what}: {e}")))
}

struct Preset {
    schema: &'static str,
    metapaths: &'static str,
    target: &'static str,
}

fn preset(name: &str) -> Result<Preset, Failure> {
    match name {
        "dblp" => Ok(Preset {
            schema: presets::DBLP_SCHEMA,
            metapaths: presets::DBLP_METAPATHS,
            target: presets::DBLP_TARGET,
        }),
        "meetup" => Ok(Preset {
            schema: presets::MEETUP_SCHEMA,
            metapaths: presets::MEETUP_METAPATHS,
            target: presets::MEETUP_TARGET,
        }),
        other => Err(Failure::Input(format!("unknown preset {other:?} (dblp|meetup)"))),
    }
}

/// Data inputs after merging flags over the config file.
struct Data {
    graph: HeteroGraph,
    metapaths: Option<(String, String)>,
    target: Option<String>,
    variant: PathSimVariant,
    cache_dir: Option<PathBuf>,
}

impl Data {
    fn load(args: DataArgs, file: &FileConfig) -> Result<Self, Failure> {
        let f = &file.data;
        let preset = args
            .preset
            .or_else(|| f.preset.clone())
            .map(|p| preset(&p))
            .transpose()?;
        let nodes = args
            .nodes
            .or_else(|| f.nodes.clone())
            .ok_or_else(|| Failure::Input("missing --nodes".into()))?;
        let edges = args
            .edges
            .or_else(|| f.edges.clone())
            .ok_or_else(|| Failure::Input("missing --edges".into()))?;
        let graph = match (args.schema.or_else(|| f.schema.clone()), &preset) {
            (Some(schema), _) => load_graph(&nodes, &edges, &schema)?,
            (None, Some(p)) => {
                let schema = Schema::parse(p.schema)?;
                let nodes_text = read_text(&nodes)?;
                let edges_text = read_text(&edges)?;
                hetecf::graph::parse_graph(
                    schema,
                    &nodes_text,
                    &edges_text,
                    &nodes.display().to_string(),
                    &edges.display().to_string(),
                )?
            }
            (None, None) => return Err(Failure::Input("missing --schema".into())),
        };
        let metapaths = match (args.metapaths.or_else(|| f.metapaths.clone()), &preset) {
            (Some(path), _) => Some((read_text(&path)?, path.display().to_string())),
            (None, Some(p)) => Some((p.metapaths.to_string(), "preset meta-paths".to_string())),
            (None, None) => None,
        };
        let target = args
            .target
            .or_else(|| f.target.clone())
            .or_else(|| preset.as_ref().map(|p| p.target.to_string()));
        let variant = match args.variant.or_else(|| f.variant.clone()) {
            Some(v) => parse_value("--variant", &v)?,
            None => PathSimVariant::default(),
        };
        Ok(Self {
            graph,
            metapaths,
            target,
            variant,
            cache_dir: args.cache_dir.or_else(|| f.cache_dir.clone()),
        })
    }

    fn specs(&self) -> Result<Vec<MetaPathSpec>, Failure> {
        let (text, name) = self
            .metapaths
            .as_ref()
            .ok_or_else(|| Failure::Input("missing --metapaths".into()))?;
        parse_specs(self.graph.schema(), text).map_err(|e| Failure::Input(format!("{name}: {e}")))
    }

    fn relations(&self) -> Result<RelationSet, Failure> {
        let specs = self.specs()?;
        match &self.cache_dir {
            Some(dir) => {
                let (set, statuses) =
                    build_relation_set_cached(&self.graph, &specs, self.variant, &SimilarityCache::new(dir))?;
                for (spec, status) in specs.iter().zip(&statuses) {
                    if let CacheStatus::Hit(_) = status {
                        info!("skipped {}: cache up to date", spec.path);
                    }
                }
                Ok(set)
            }
            None => Ok(build_relation_set(&self.graph, &specs, self.variant)?),
        }
    }

    fn ratings(&self) -> Result<RatingMatrix, Failure> {
        let text = self
            .target
            .as_ref()
            .ok_or_else(|| Failure::Input("missing --target".into()))?;
        let path = MetaPath::parse(self.graph.schema(), text)?;
        let ratings = derive_ratings(&self.graph, &path, self.variant)?;
        if ratings.is_empty() {
            return Err(Failure::Input(format!("target meta-path {path} yields no ratings")));
        }
        Ok(ratings)
    }
}

fn hyperparams(args: HyperArgs, file: &FileConfig) -> Result<Hyperparams, Failure> {
    let t = &file.train;
    let d = Hyperparams::default();
    let optimizer = match args.optimizer.or_else(|| t.optimizer.clone()) {
        Some(s) => parse_value("--optimizer", &s)?,
        None => d.optimizer,
    };
    let weight_constraint = match args.weight_constraint.or_else(|| t.weight_constraint.clone()) {
        Some(s) => parse_value("--weight-constraint", &s)?,
        None => d.weight_constraint,
    };
    let hp = Hyperparams {
        lambda: args.lambda.or(t.lambda).unwrap_or(d.lambda),
        mu: args.mu.or(t.mu),
        learn_rate: args.learn_rate.or(t.learn_rate).unwrap_or(d.learn_rate),
        inner_tol: args.inner_tol.or(t.inner_tol).unwrap_or(d.inner_tol),
        outer_tol: args.outer_tol.or(t.outer_tol).unwrap_or(d.outer_tol),
        max_inner: args.max_inner.or(t.max_inner).unwrap_or(d.max_inner),
        max_outer: args.max_outer.or(t.max_outer).unwrap_or(d.max_outer),
        dim: args.dim.or(t.dim).unwrap_or(d.dim),
        seed: args.seed.or(t.seed).unwrap_or(d.seed),
        optimizer,
        weight_constraint,
    };
    hp.validate()?;
    Ok(hp)
}

fn path_labels(relations: &RelationSet) -> Vec<(Group, String)> {
    Group::ALL
        .iter()
        .flat_map(|&g| relations.labels(g).into_iter().map(move |l| (g, l)))
        .collect()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_validate(data: DataArgs, file: &FileConfig) -> Result<(), Failure> {
    let data = Data::load(data, file)?;
    let g = &data.graph;
    let schema = g.schema();
    println!("graph {}", g.content_hash());
    for (t, name) in schema.node_types().iter().enumerate() {
        println!("nodes\t{name}\t{}", g.node_count(t));
    }
    for (r, rel) in schema.relations().iter().enumerate() {
        println!("edges\t{}\t{}", rel.name, g.edge_count(r));
    }
    println!("total\t{} nodes\t{} edges", g.total_nodes(), g.total_edges());
    if data.metapaths.is_some() {
        let specs = data.specs()?;
        println!("metapaths\t{}", specs.len());
    }
    Ok(())
}

fn cmd_similarity(data: DataArgs, file: &FileConfig) -> Result<(), Failure> {
    let data = Data::load(data, file)?;
    let dir = data
        .cache_dir
        .clone()
        .ok_or_else(|| Failure::Input("missing --cache-dir".into()))?;
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    let specs = data.specs()?;
    let (_, statuses) = build_relation_set_cached(&data.graph, &specs, data.variant, &SimilarityCache::new(&dir))?;
    for (spec, status) in specs.iter().zip(statuses) {
        match status {
            CacheStatus::Hit(p) => println!("skipped\t{}\t{}", spec.path, p.display()),
            CacheStatus::Computed(p) => println!("computed\t{}\t{}", spec.path, p.display()),
            CacheStatus::Recomputed { path, reason } => {
                println!("recomputed\t{}\t{}\t{reason}", spec.path, path.display())
            }
        }
    }
    Ok(())
}

fn cmd_train(
    data: DataArgs,
    hp: HyperArgs,
    out: PathBuf,
    log_path: Option<PathBuf>,
    file: &FileConfig,
) -> Result<(), Failure> {
    let hp = hyperparams(hp, file)?;
    let data = Data::load(data, file)?;
    let ratings = data.ratings()?;
    let relations = data.relations()?;
    let problem = Problem::new(ratings, &relations)?;
    let mu = hp.effective_mu(&problem);
    let source = if hp.mu.is_some() { "override" } else { "rating density" };
    info!("effective mu = {mu} ({source})");
    info!(
        "training on {} users x {} items, {} ratings, paths {:?}",
        problem.users(),
        problem.items(),
        problem.ratings().len(),
        relations.counts()
    );
    let output = match train(&problem, &hp) {
        Ok(o) => o,
        Err(LearnerError::Divergence {
            phase,
            halvings,
            learn_rate,
            trace,
        }) => {
            let trace_path = sibling(&out, ".trace.txt");
            let mut text = String::from("# accepted objective values before divergence\n");
            for j in &trace {
                let _ = writeln!(text, "{j}");
            }
            write_artifact(&trace_path, &text)?;
            return Err(Failure::Numerical(format!(
                "{phase} phase diverged after {halvings} step halvings (learn rate {learn_rate:e}); \
                 objective trace written to {}",
                trace_path.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let labels = path_labels(&relations);
    let saved = SavedModel {
        model: output.model.clone(),
        weights: output.weights.clone(),
        hyperparams: hp,
        mu: output.mu,
        graph_hash: data.graph.content_hash(),
        paths: labels.clone(),
    };
    let log_path = log_path.unwrap_or_else(|| sibling(&out, ".log.csv"));
    write_model(&out, &saved)?;
    write_artifact(&log_path, &output.log_csv())?;
    let last = output.objective_trace.last().copied().unwrap_or(f64::NAN);
    println!(
        "objective {last} after {} outer iterations ({})",
        output.records.len(),
        if output.converged { "converged" } else { "iteration cap" }
    );
    print!("{}", format_weights(&report_weights(&output.weights, &labels)));
    println!("model\t{}", out.display());
    println!("log\t{}", log_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    data: DataArgs,
    hp: HyperArgs,
    out: PathBuf,
    methods: Option<Vec<String>>,
    fractions: Option<Vec<f64>>,
    dims: Option<Vec<usize>>,
    trials: Option<usize>,
    parallel: bool,
    file: &FileConfig,
) -> Result<(), Failure> {
    let hp = hyperparams(hp, file)?;
    let e = &file.evaluate;
    let defaults = ExperimentConfig::default();
    let methods = match methods.or_else(|| e.methods.clone()) {
        Some(names) => names
            .iter()
            .map(|m| parse_value::<Method>("--methods", m.trim()))
            .collect::<Result<Vec<_>, _>>()?,
        None => defaults.methods,
    };
    let config = ExperimentConfig {
        methods,
        fractions: fractions.or_else(|| e.fractions.clone()).unwrap_or(defaults.fractions),
        dims: dims.or_else(|| e.dims.clone()).unwrap_or(defaults.dims),
        trials: trials.or(e.trials).unwrap_or(defaults.trials),
        seed: hp.seed,
        parallel: parallel || e.parallel.unwrap_or(false),
        hp,
    };
    if config.parallel {
        info!("parallel trials: results may differ in the last bits between runs");
    }
    let data = Data::load(data, file)?;
    let ratings = data.ratings()?;
    let relations = data.relations()?;
    let report = run_experiment(&ratings, &relations, &config)?;
    write_artifact(&out, &report.to_csv())?;
    print!("{}", report.to_table());
    println!("report\t{}", out.display());
    if !report.failures.is_empty() {
        for f in &report.failures {
            eprintln!(
                "failed: {} fraction={} d={} trial={}: {}",
                f.method, f.fraction, f.d, f.trial, f.message
            );
        }
        return Err(Failure::Numerical(format!("{} runs failed", report.failures.len())));
    }
    Ok(())
}

fn cmd_benchmark(
    hp: HyperArgs,
    out: PathBuf,
    d_values: Option<Vec<usize>>,
    size_multipliers: Option<Vec<usize>>,
    size_sweep_d: Option<usize>,
    repeats: Option<usize>,
    file: &FileConfig,
) -> Result<(), Failure> {
    let b = &file.benchmark;
    let defaults = BenchmarkConfig::default();
    let base_hp = Hyperparams {
        max_outer: hp.max_outer.or(file.train.max_outer).unwrap_or(defaults.hp.max_outer),
        max_inner: hp.max_inner.or(file.train.max_inner).unwrap_or(defaults.hp.max_inner),
        ..hyperparams(hp, file)?
    };
    let config = BenchmarkConfig {
        d_values: d_values.or_else(|| b.d_values.clone()).unwrap_or(defaults.d_values),
        size_multipliers: size_multipliers
            .or_else(|| b.size_multipliers.clone())
            .unwrap_or(defaults.size_multipliers),
        size_sweep_d: size_sweep_d.or(b.size_sweep_d).unwrap_or(defaults.size_sweep_d),
        repeats: repeats.or(b.repeats).unwrap_or(defaults.repeats),
        hp: base_hp,
        ..defaults
    };
    if config.d_values.contains(&0) || config.size_sweep_d == 0 || config.size_multipliers.contains(&0) {
        return Err(Failure::Input("dimensions and size multipliers must be >= 1".into()));
    }
    let base = SynthSpec::dblp_default(config.hp.seed);
    let rows = scaling_benchmark(&base, &config)?;
    write_artifact(&out, &timing_csv(&rows))?;
    for (sweep, x_of) in [
        (
            Sweep::Dimension,
            (|r: &hetecf::synth::TimingRow| r.d as f64) as fn(&_) -> f64,
        ),
        (Sweep::Size, |r| (r.n * r.m) as f64),
    ] {
        let (x, y): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.sweep == sweep && r.error.is_none())
            .map(|r| (x_of(r), r.seconds_median))
            .unzip();
        if let Some((slope, _, r2)) = linear_fit(&x, &y) {
            println!("{} sweep: slope {slope:.3e} s/unit, R^2 {r2:.4}", sweep.as_str());
        }
    }
    println!("timings\t{}", out.display());
    let failed: Vec<_> = rows.iter().filter_map(|r| r.error.as_ref()).collect();
    if !failed.is_empty() {
        return Err(Failure::Numerical(format!(
            "{} benchmark cells failed: {}",
            failed.len(),
            failed[0]
        )));
    }
    Ok(())
}

fn cmd_predict(data: DataArgs, model: PathBuf, user: String, k: usize, file: &FileConfig) -> Result<(), Failure> {
    let saved = read_model(&model).map_err(|e| Failure::Input(format!("{}: {e}", model.display())))?;
    let data = Data::load(data, file)?;
    let g = &data.graph;
    let hash = g.content_hash();
    if hash != saved.graph_hash {
        return Err(Failure::Input(format!(
            "model {} was trained on graph {} but the given graph hashes to {hash}",
            model.display(),
            saved.graph_hash
        )));
    }
    let schema = g.schema();
    let u = match g.node(&user) {
        Some(r) if r.node_type == schema.user_type() => r.index,
        Some(_) => {
            return Err(Failure::Input(format!(
                "node {user:?} is not a {}",
                schema.type_name(schema.user_type())
            )))
        }
        None => return Err(Failure::Input(format!("unknown user id {user:?}"))),
    };
    let items = g.node_ids(schema.item_type());
    let mut scored: Vec<(f64, &str)> = (0..saved.model.items())
        .map(|j| Ok((saved.model.predict(u, j)?, items[j].as_str())))
        .collect::<Result<_, ModelError>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    for (rank, (score, id)) in scored.iter().take(k).enumerate() {
        println!("{}\t{id}\t{score}", rank + 1);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(Failure::Input)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Validate { data } => cmd_validate(data, &file),
        Command::Similarity { data } => cmd_similarity(data, &file),
        Command::Train { data, hp, out, log } => cmd_train(data, hp, out, log, &file),
        Command::Evaluate {
            data,
            hp,
            out,
            methods,
            fractions,
            dims,
            trials,
            parallel,
        } => cmd_evaluate(data, hp, out, methods, fractions, dims, trials, parallel, &file),
        Command::Benchmark {
            hp,
            out,
            d_values,
            size_multipliers,
            size_sweep_d,
            repeats,
        } => cmd_benchmark(hp, out, d_values, size_multipliers, size_sweep_d, repeats, &file),
        Command::Predict { data, model, user, k } => cmd_predict(data, model, user, k, &file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        (false, _) => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            if let Failure::Numerical(_) = f {
                warn!("numerical failure");
            }
            ExitCode::from(f.code())
        }
    }
}
