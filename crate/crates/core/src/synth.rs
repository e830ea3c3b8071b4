//! Random heterogeneous networks and the training-time scaling benchmark.

use std::fmt::Write as _;
use std::time::Instant;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{derive_ratings, GraphBuilder, GraphError, HeteroGraph, Schema};
use crate::learner::{train, LearnerError};
use crate::metapath::{build_relation_set, parse_specs, MetaPath, MetaPathError, PathSimVariant};
use crate::model::{Hyperparams, ModelError, Problem};
use crate::presets;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    MetaPath(#[from] MetaPathError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub schema: Schema,
    /// Nodes per type, in schema order.
    pub counts: Vec<usize>,
    /// Link probability per relation, in schema order.
    pub probabilities: Vec<f64>,
    pub seed: u64,
}

pub const DEFAULT_LINK_PROBABILITY: f64 = 0.2;

impl SynthSpec {
    pub fn new(schema: Schema, counts: Vec<usize>, probabilities: Vec<f64>, seed: u64) -> Result<Self, SynthError> {
        if counts.len() != schema.node_types().len() {
            return Err(SynthError::Spec(format!(
                "{} node counts for {} node types",
                counts.len(),
                schema.node_types().len()
            )));
        }
        if probabilities.len() != schema.relations().len() {
            return Err(SynthError::Spec(format!(
                "{} probabilities for {} relations",
                probabilities.len(),
                schema.relations().len()
            )));
        }
        if let Some(t) = counts.iter().position(|&c| c == 0) {
            return Err(SynthError::Spec(format!(
                "node type {} has count 0",
                schema.type_name(t)
            )));
        }
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(SynthError::Spec(format!("link probability {p} outside [0, 1]")));
        }
        Ok(Self {
            schema,
            counts,
            probabilities,
            seed,
        })
    }

    /// Same link probability for every relation.
    pub fn uniform(schema: Schema, counts: Vec<usize>, probability: f64, seed: u64) -> Result<Self, SynthError> {
        let k = schema.relations().len();
        Self::new(schema, counts, vec![probability; k], seed)
    }

    /// Bibliographic layout: 100 authors, 200 papers, 20 venues, 50 terms,
    /// every relation linked with probability 0.2.
    pub fn dblp_default(seed: u64) -> Self {
        let schema = Schema::parse(presets::DBLP_SCHEMA).expect("built-in schema");
        Self::uniform(schema, vec![100, 200, 20, 50], DEFAULT_LINK_PROBABILITY, seed).expect("valid defaults")
    }

    /// Every node count multiplied by `factor`.
    pub fn scaled(&self, factor: usize) -> Self {
        Self {
            counts: self.counts.iter().map(|c| c * factor.max(1)).collect(),
            ..self.clone()
        }
    }
}

/// Links every (source, target) pair of every relation independently with
/// the relation's probability. Pairs are visited relation by relation,
/// source-major; a node is never linked to itself.
pub fn generate(spec: &SynthSpec) -> Result<HeteroGraph, SynthError> {
    let schema = &spec.schema;
    let mut builder = GraphBuilder::new(schema.clone());
    for (t, &count) in spec.counts.iter().enumerate() {
        let prefix = schema.type_name(t).to_lowercase();
        for k in 0..count {
            builder.add_node_typed(&format!("{prefix}{k}"), t)?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for (r, rel) in schema.relations().iter().enumerate() {
        let p = spec.probabilities[r];
        for s in 0..spec.counts[rel.source] {
            for t in 0..spec.counts[rel.target] {
                if rel.source == rel.target && s == t {
                    continue;
                }
                if rng.random_bool(p) {
                    builder.add_edge_indexed(r, s, t, 1.0);
                }
            }
        }
    }
    Ok(builder.build())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Dimension,
    Size,
}

impl Sweep {
    pub fn as_str(self) -> &'static str {
        match self {
            Sweep::Dimension => "d",
            Sweep::Size => "size",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub d_values: Vec<usize>,
    pub size_multipliers: Vec<usize>,
    /// Latent dimension for the size sweep.
    pub size_sweep_d: usize,
    pub repeats: usize,
    /// Learner settings. Tolerances are forced to 0 so every run performs
    /// exactly the capped number of iterations.
    pub hp: Hyperparams,
    pub metapaths: String,
    pub target: String,
    pub variant: PathSimVariant,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            d_values: vec![5, 10, 20, 40],
            size_multipliers: vec![1, 2, 3, 4],
            size_sweep_d: 10,
            repeats: 3,
            hp: Hyperparams {
                max_outer: 3,
                max_inner: 10,
                ..Hyperparams::default()
            },
            metapaths: presets::DBLP_METAPATHS.to_string(),
            target: presets::DBLP_TARGET.to_string(),
            variant: PathSimVariant::RowCol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub sweep: Sweep,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    /// Total edges in the generated graph.
    pub edges: usize,
    /// Accepted gradient steps in the first repeat.
    pub iterations: usize,
    pub seconds_median: f64,
    pub seconds_min: f64,
    pub seconds_max: f64,
    pub error: Option<String>,
}

pub const TIMING_HEADER: &str = "sweep,d,n,m,edges,iterations,seconds_median,seconds_min,seconds_max,error";

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from(TIMING_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.sweep.as_str(),
            r.d,
            r.n,
            r.m,
            r.edges,
            r.iterations,
            r.seconds_median,
            r.seconds_min,
            r.seconds_max,
            r.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    out
}

/// Graph and training problem for one benchmark size.
pub fn benchmark_problem(spec: &SynthSpec, config: &BenchmarkConfig) -> Result<(HeteroGraph, Problem), SynthError> {
    let graph = generate(spec)?;
    let specs = parse_specs(graph.schema(), &config.metapaths)?;
    let target = MetaPath::parse(graph.schema(), &config.target)?;
    let ratings = derive_ratings(&graph, &target, config.variant)?;
    let relations = build_relation_set(&graph, &specs, config.variant)?;
    let problem = Problem::new(ratings, &relations)?;
    Ok((graph, problem))
}

struct Cell {
    sweep: Sweep,
    d: usize,
    problem: usize,
    times: Vec<f64>,
    iterations: usize,
    error: Option<String>,
}

fn blank_row(sweep: Sweep, d: usize, n: usize, m: usize, edges: usize) -> TimingRow {
    TimingRow {
        sweep,
        d,
        n,
        m,
        edges,
        iterations: 0,
        seconds_median: f64::NAN,
        seconds_min: f64::NAN,
        seconds_max: f64::NAN,
        error: None,
    }
}

/// Times training over a dimension sweep at the base size and a size sweep
/// at fixed dimension. Each cell gets one untimed warm-up run; the timed
/// repeats then cycle through all cells in turn so that a transient load
/// spike is spread across cells. A failing cell is recorded in its row and
/// the sweep continues.
pub fn scaling_benchmark(base: &SynthSpec, config: &BenchmarkConfig) -> Result<Vec<TimingRow>, SynthError> {
    let hp = Hyperparams {
        inner_tol: 0.0,
        outer_tol: 0.0,
        ..config.hp.clone()
    };
    hp.validate()?;
    let mut problems: Vec<(HeteroGraph, Problem)> = Vec::new();
    let mut cells: Vec<Cell> = Vec::new();
    let mut rows: Vec<Option<TimingRow>> = Vec::new();
    let cell = |sweep, d, problem, rows: &mut Vec<Option<TimingRow>>| {
        rows.push(None);
        Cell {
            sweep,
            d,
            problem,
            times: Vec::new(),
            iterations: 0,
            error: None,
        }
    };
    if !config.d_values.is_empty() {
        problems.push(benchmark_problem(base, config)?);
        for &d in &config.d_values {
            cells.push(cell(Sweep::Dimension, d, 0, &mut rows));
        }
    }
    for &k in &config.size_multipliers {
        let spec = base.scaled(k);
        match benchmark_problem(&spec, config) {
            Ok(p) => {
                problems.push(p);
                cells.push(cell(Sweep::Size, config.size_sweep_d, problems.len() - 1, &mut rows));
            }
            Err(e) => {
                warn!("size multiplier {k} failed: {e}");
                let n = spec.counts[spec.schema.user_type()];
                let m = spec.counts[spec.schema.item_type()];
                let mut row = blank_row(Sweep::Size, config.size_sweep_d, n, m, 0);
                row.error = Some(e.to_string());
                rows.push(Some(row));
            }
        }
    }

    let repeats = config.repeats.max(1);
    for round in 0..=repeats {
        for c in cells.iter_mut().filter(|c| c.error.is_none()) {
            let hp = Hyperparams { dim: c.d, ..hp.clone() };
            let start = Instant::now();
            match train(&problems[c.problem].1, &hp) {
                Ok(out) if round > 0 => {
                    c.times.push(start.elapsed().as_secs_f64());
                    if round == 1 {
                        c.iterations = out.step_trace.len() - 1;
                    }
                }
                Ok(_) => {}
                Err(e) => c.error = Some(e.to_string()),
            }
        }
    }

    let mut cells = cells.into_iter();
    Ok(rows
        .into_iter()
        .map(|slot| {
            slot.unwrap_or_else(|| {
                let mut c = cells.next().expect("one cell per open slot");
                let (graph, problem) = &problems[c.problem];
                let mut row = blank_row(c.sweep, c.d, problem.users(), problem.items(), graph.total_edges());
                let label = c.sweep.as_str();
                match c.error {
                    Some(e) => {
                        warn!("{label} sweep d={} n={} m={} failed: {e}", c.d, row.n, row.m);
                        row.error = Some(e);
                    }
                    None => {
                        c.times.sort_by(f64::total_cmp);
                        row.iterations = c.iterations;
                        row.seconds_median = c.times[c.times.len() / 2];
                        row.seconds_min = c.times[0];
                        row.seconds_max = c.times[c.times.len() - 1];
                        info!(
                            "{label} sweep d={} n={} m={}: {:.4}s",
                            c.d, row.n, row.m, row.seconds_median
                        );
                    }
                }
                row
            })
        })
        .collect())
}

/// Ordinary least squares `y ≈ slope·x + intercept`, with the coefficient
/// of determination. `None` for fewer than two points or constant `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some((slope, intercept, r2))
}
