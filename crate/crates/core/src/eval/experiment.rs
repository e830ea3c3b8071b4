use std::fmt::{self, Write as _};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;

use super::baselines::{ItemMean, Nmf, NmfOptions, Predictor, UserMean};
use super::{mae, rmse, split, EvalError, SplitSpec};
use crate::graph::RatingMatrix;
use crate::learner::train;
use crate::metapath::RelationSet;
use crate::model::{Hyperparams, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    UserMean,
    ItemMean,
    Nmf,
    /// Logistic matrix factorization without any meta-path information.
    LogisticMf,
    HeteCf,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::UserMean,
        Method::ItemMean,
        Method::Nmf,
        Method::LogisticMf,
        Method::HeteCf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::UserMean => "user-mean",
            Method::ItemMean => "item-mean",
            Method::Nmf => "nmf",
            Method::LogisticMf => "mf",
            Method::HeteCf => "hete-cf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?} (user-mean|item-mean|nmf|mf|hete-cf)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    /// Training fractions.
    pub fractions: Vec<f64>,
    /// Latent dimensions.
    pub dims: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Learner settings; `dim` and `seed` are overridden per cell and trial.
    pub hp: Hyperparams,
    /// Run trials on the rayon pool.
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            fractions: vec![0.4, 0.6],
            dims: vec![5, 10],
            trials: 10,
            seed: 42,
            hp: Hyperparams::default(),
            parallel: false,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), EvalError> {
        if self.methods.is_empty() || self.fractions.is_empty() || self.dims.is_empty() {
            return Err(EvalError::Config("methods, fractions and dims must be nonempty".into()));
        }
        if self.dims.contains(&0) {
            return Err(EvalError::Config("latent dimensions must be >= 1".into()));
        }
        for &f in &self.fractions {
            SplitSpec::new(f, self.trials, self.seed)?;
        }
        Ok(())
    }
}

/// Scores for one (method, fraction, d) cell, one entry per successful trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub fraction: f64,
    pub d: usize,
    pub mae: Vec<f64>,
    pub rmse: Vec<f64>,
}

/// `(mean, sample standard deviation)`; `sd` is 0 for a single value and
/// both are NaN for none.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl Cell {
    pub fn mae_stats(&self) -> (f64, f64) {
        mean_sd(&self.mae)
    }

    pub fn rmse_stats(&self) -> (f64, f64) {
        mean_sd(&self.rmse)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub method: Method,
    pub fraction: f64,
    pub d: usize,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Ordered by method, then fraction, then d, as configured.
    pub cells: Vec<Cell>,
    pub failures: Vec<Failure>,
}

pub const REPORT_HEADER: &str = "method,fraction,d,metric,mean,sd";

impl MetricReport {
    pub fn cell(&self, method: Method, fraction: f64, d: usize) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.fraction == fraction && c.d == d)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for c in &self.cells {
            for (metric, (mean, sd)) in [("MAE", c.mae_stats()), ("RMSE", c.rmse_stats())] {
                let _ = writeln!(out, "{},{},{},{metric},{mean},{sd}", c.method, c.fraction, c.d);
            }
        }
        out
    }

    /// Fraction × d × metric rows against one column per method, each cell
    /// `mean ± sd`.
    pub fn to_table(&self) -> String {
        let mut methods: Vec<Method> = Vec::new();
        let mut rows: Vec<(f64, usize)> = Vec::new();
        for c in &self.cells {
            if !methods.contains(&c.method) {
                methods.push(c.method);
            }
            if !rows.contains(&(c.fraction, c.d)) {
                rows.push((c.fraction, c.d));
            }
        }
        let mut out = format!("{:>9} {:>4} {:>6}", "training", "d", "metric");
        for m in &methods {
            let _ = write!(out, " {:>17}", m.as_str());
        }
        out.push('\n');
        for (fraction, d) in rows {
            for metric in ["MAE", "RMSE"] {
                let _ = write!(out, "{:>8.0}% {d:>4} {metric:>6}", fraction * 100.0);
                for &m in &methods {
                    let text = match self.cell(m, fraction, d) {
                        Some(c) => {
                            let (mean, sd) = if metric == "MAE" { c.mae_stats() } else { c.rmse_stats() };
                            format!("{mean:.4} ± {sd:.4}")
                        }
                        None => "-".into(),
                    };
                    let _ = write!(out, " {text:>17}");
                }
                out.push('\n');
            }
        }
        if !self.failures.is_empty() {
            let _ = writeln!(out, "{} failed runs:", self.failures.len());
            for f in &self.failures {
                let _ = writeln!(
                    out,
                    "  {} fraction={} d={} trial={}: {}",
                    f.method, f.fraction, f.d, f.trial, f.message
                );
            }
        }
        out
    }
}

type Outcome = (Method, usize, Result<(f64, f64), String>);

fn score(model: &dyn Predictor, test: &RatingMatrix) -> Result<(f64, f64), EvalError> {
    let pred = model.predict_entries(test);
    let truth: Vec<f64> = test.iter().map(|e| e.value).collect();
    Ok((mae(&pred, &truth)?, rmse(&pred, &truth)?))
}

fn run_method(
    method: Method,
    d: usize,
    trial_seed: u64,
    train_set: &RatingMatrix,
    test: &RatingMatrix,
    relations: &RelationSet,
    hp: &Hyperparams,
) -> Result<(f64, f64), EvalError> {
    let learner_hp = Hyperparams {
        dim: d,
        seed: trial_seed,
        ..hp.clone()
    };
    match method {
        Method::UserMean => score(&UserMean::fit(train_set), test),
        Method::ItemMean => score(&ItemMean::fit(train_set), test),
        Method::Nmf => score(&Nmf::fit(train_set, NmfOptions::new(d, trial_seed))?, test),
        Method::LogisticMf => {
            let problem = Problem::from_parts(train_set.clone(), vec![], vec![], vec![])?;
            score(&train(&problem, &learner_hp)?.model, test)
        }
        Method::HeteCf => {
            let problem = Problem::new(train_set.clone(), relations)?;
            score(&train(&problem, &learner_hp)?.model, test)
        }
    }
}

/// Repeated hold-out evaluation over every (method, fraction, d) cell.
/// Failures of individual runs are collected in the report.
pub fn run_experiment(
    ratings: &RatingMatrix,
    relations: &RelationSet,
    config: &ExperimentConfig,
) -> Result<MetricReport, EvalError> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.fractions.len())
        .flat_map(|f| (0..config.trials).map(move |t| (f, t)))
        .collect();
    let run_job = |&(f, trial): &(usize, usize)| -> Result<Vec<Outcome>, EvalError> {
        let fraction = config.fractions[f];
        let spec = SplitSpec::new(fraction, config.trials, config.seed)?;
        let (train_set, test) = split(ratings, &spec, trial)?;
        let trial_seed = config.seed.wrapping_add(trial as u64);
        let mut out = Vec::new();
        for &d in &config.dims {
            for &method in &config.methods {
                let result = run_method(method, d, trial_seed, &train_set, &test, relations, &config.hp)
                    .map_err(|e| e.to_string());
                if let Err(msg) = &result {
                    warn!("{method} fraction={fraction} d={d} trial={trial} failed: {msg}");
                }
                out.push((method, d, result));
            }
        }
        info!("finished fraction={fraction} trial={trial}");
        Ok(out)
    };
    let outcomes: Vec<Vec<Outcome>> = if config.parallel {
        jobs.par_iter().map(run_job).collect::<Result<_, _>>()?
    } else {
        jobs.iter().map(run_job).collect::<Result<_, _>>()?
    };

    let mut cells = Vec::new();
    for &method in &config.methods {
        for &fraction in &config.fractions {
            for &d in &config.dims {
                cells.push(Cell {
                    method,
                    fraction,
                    d,
                    mae: vec![],
                    rmse: vec![],
                });
            }
        }
    }
    let mut failures = Vec::new();
    for (&(f, trial), results) in jobs.iter().zip(outcomes) {
        let fraction = config.fractions[f];
        for (method, d, result) in results {
            match result {
                Ok((a, b)) => {
                    let cell = cells
                        .iter_mut()
                        .find(|c| c.method == method && c.fraction == fraction && c.d == d)
                        .expect("cell allocated above");
                    cell.mae.push(a);
                    cell.rmse.push(b);
                }
                Err(message) => failures.push(Failure {
                    method,
                    fraction,
                    d,
                    trial,
                    message,
                }),
            }
        }
    }
    Ok(MetricReport { cells, failures })
}
