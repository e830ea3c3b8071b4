//! Plain-text model file. Floats are written in Rust's shortest
//! round-trip form, so reading a written model reproduces it bit for bit.
//!
//! ```text
//! hetecf-model 1
//! shape <n> <m> <d>
//! paths <N_A> <N_B> <N_W>
//! graph <sha256 hex>
//! mu <effective mu>
//! hp <key> <value>          (one line per hyperparameter)
//! path <UU|II|UI> <meta-path>  (N_A + N_B + N_W lines)
//! U                          (n rows of d values)
//! V                          (m rows of d values)
//! alpha <N_A values>
//! beta <N_B values>
//! w <N_W values>
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::{FactorModel, Hyperparams, ModelError, PathWeights};
use crate::atomic::write_atomic;
use crate::metapath::Group;

const MAGIC: &str = "hetecf-model 1";

/// A trained model with everything needed to serve predictions and check
/// compatibility with a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: FactorModel,
    pub weights: PathWeights,
    pub hyperparams: Hyperparams,
    pub mu: f64,
    pub graph_hash: String,
    /// `(group, meta-path label)` for every weight, in weight order.
    pub paths: Vec<(Group, String)>,
}

impl SavedModel {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let m = &self.model;
        let (na, nb, nw) = self.weights.counts();
        let hp = &self.hyperparams;
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "shape {} {} {}", m.users(), m.items(), m.dim());
        let _ = writeln!(out, "paths {na} {nb} {nw}");
        let _ = writeln!(out, "graph {}", self.graph_hash);
        let _ = writeln!(out, "mu {}", self.mu);
        let _ = writeln!(out, "hp lambda {}", hp.lambda);
        match hp.mu {
            Some(mu) => {
                let _ = writeln!(out, "hp mu {mu}");
            }
            None => {
                let _ = writeln!(out, "hp mu auto");
            }
        }
        let _ = writeln!(out, "hp learn_rate {}", hp.learn_rate);
        let _ = writeln!(out, "hp inner_tol {}", hp.inner_tol);
        let _ = writeln!(out, "hp outer_tol {}", hp.outer_tol);
        let _ = writeln!(out, "hp max_inner {}", hp.max_inner);
        let _ = writeln!(out, "hp max_outer {}", hp.max_outer);
        let _ = writeln!(out, "hp dim {}", hp.dim);
        let _ = writeln!(out, "hp seed {}", hp.seed);
        let _ = writeln!(out, "hp optimizer {}", hp.optimizer.as_str());
        let _ = writeln!(out, "hp weight_constraint {}", hp.weight_constraint.as_str());
        for (group, label) in &self.paths {
            let _ = writeln!(out, "path {group} {label}");
        }
        let mut matrix = |name: &str, x: &Array2<f64>| {
            let _ = writeln!(out, "{name}");
            for row in x.rows() {
                let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{}", vals.join(" "));
            }
        };
        matrix("U", &m.u);
        matrix("V", &m.v);
        for (name, vals) in [
            ("alpha", &self.weights.alpha),
            ("beta", &self.weights.beta),
            ("w", &self.weights.w),
        ] {
            let mut line = name.to_string();
            for v in vals {
                let _ = write!(line, " {v}");
            }
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "end");
        out
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut r = Reader {
            lines: text.lines().enumerate(),
        };
        let fmt_err = |line: usize, message: String| ModelError::Format { line, message };

        let (no, magic) = r.fields("header")?;
        if magic.join(" ") != MAGIC {
            return Err(fmt_err(no, format!("expected {MAGIC:?}")));
        }
        let (no, f) = r.fields("shape")?;
        let [n, m, d] = match f.as_slice() {
            ["shape", n, m, d] => [parse_num(no, n)?, parse_num(no, m)?, parse_num(no, d)?],
            _ => return Err(fmt_err(no, "expected `shape n m d`".into())),
        };
        let (no, f) = r.fields("paths")?;
        let [na, nb, nw] = match f.as_slice() {
            ["paths", a, b, c] => [parse_num(no, a)?, parse_num(no, b)?, parse_num(no, c)?],
            _ => return Err(fmt_err(no, "expected `paths N_A N_B N_W`".into())),
        };
        let (no, f) = r.fields("graph")?;
        let graph_hash = match f.as_slice() {
            ["graph", h] => h.to_string(),
            _ => return Err(fmt_err(no, "expected `graph <hash>`".into())),
        };
        let (no, f) = r.fields("mu")?;
        let mu = match f.as_slice() {
            ["mu", v] => parse_f64(no, v)?,
            _ => return Err(fmt_err(no, "expected `mu <value>`".into())),
        };

        let mut hp = Hyperparams::default();
        for key in [
            "lambda",
            "mu",
            "learn_rate",
            "inner_tol",
            "outer_tol",
            "max_inner",
            "max_outer",
            "dim",
            "seed",
            "optimizer",
            "weight_constraint",
        ] {
            let (no, f) = r.fields(key)?;
            let value = match f.as_slice() {
                ["hp", k, v] if *k == key => *v,
                _ => return Err(fmt_err(no, format!("expected `hp {key} <value>`"))),
            };
            match key {
                "lambda" => hp.lambda = parse_f64(no, value)?,
                "mu" => {
                    hp.mu = if value == "auto" {
                        None
                    } else {
                        Some(parse_f64(no, value)?)
                    }
                }
                "learn_rate" => hp.learn_rate = parse_f64(no, value)?,
                "inner_tol" => hp.inner_tol = parse_f64(no, value)?,
                "outer_tol" => hp.outer_tol = parse_f64(no, value)?,
                "max_inner" => hp.max_inner = parse_num(no, value)?,
                "max_outer" => hp.max_outer = parse_num(no, value)?,
                "dim" => hp.dim = parse_num(no, value)?,
                "seed" => hp.seed = value.parse().map_err(|_| fmt_err(no, format!("bad seed {value:?}")))?,
                "optimizer" => hp.optimizer = value.parse().map_err(|e| fmt_err(no, e))?,
                "weight_constraint" => hp.weight_constraint = value.parse().map_err(|e| fmt_err(no, e))?,
                _ => unreachable!(),
            }
        }

        let mut paths = Vec::with_capacity(na + nb + nw);
        for _ in 0..na + nb + nw {
            let (no, line) = r.raw("path list")?;
            let rest = line
                .strip_prefix("path ")
                .ok_or_else(|| fmt_err(no, "expected `path <group> <meta-path>`".into()))?;
            let (group, label) = rest
                .split_once(' ')
                .ok_or_else(|| fmt_err(no, "expected `path <group> <meta-path>`".into()))?;
            paths.push((group.parse().map_err(|e| fmt_err(no, e))?, label.to_string()));
        }

        let mut read_matrix = |name: &str, rows: usize| -> Result<Array2<f64>, ModelError> {
            let (no, f) = r.fields(name)?;
            if f.as_slice() != [name] {
                return Err(fmt_err(no, format!("expected `{name}`")));
            }
            let mut data = Vec::with_capacity(rows * d);
            for _ in 0..rows {
                let (no, f) = r.fields("matrix row")?;
                if f.len() != d {
                    return Err(fmt_err(no, format!("expected {d} values, got {}", f.len())));
                }
                for v in f {
                    data.push(parse_f64(no, v)?);
                }
            }
            Ok(Array2::from_shape_vec((rows, d), data).expect("sized above"))
        };
        let u = read_matrix("U", n)?;
        let v = read_matrix("V", m)?;

        let mut read_vec = |name: &str, len: usize| -> Result<Vec<f64>, ModelError> {
            let (no, f) = r.fields(name)?;
            if f.first() != Some(&name) || f.len() != len + 1 {
                return Err(fmt_err(no, format!("expected `{name}` with {len} values")));
            }
            f[1..].iter().map(|v| parse_f64(no, v)).collect()
        };
        let weights = PathWeights {
            alpha: read_vec("alpha", na)?,
            beta: read_vec("beta", nb)?,
            w: read_vec("w", nw)?,
        };
        let (no, f) = r.fields("end")?;
        if f.as_slice() != ["end"] {
            return Err(fmt_err(no, "expected `end`".into()));
        }
        Ok(SavedModel {
            model: FactorModel { u, v },
            weights,
            hyperparams: hp,
            mu,
            graph_hash,
            paths,
        })
    }
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn raw(&mut self, what: &str) -> Result<(usize, &'a str), ModelError> {
        let (i, line) = self.lines.next().ok_or_else(|| ModelError::Format {
            line: 0,
            message: format!("unexpected end of file, expected {what}"),
        })?;
        Ok((i + 1, line))
    }

    fn fields(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), ModelError> {
        let (no, line) = self.raw(what)?;
        Ok((no, line.split_whitespace().collect()))
    }
}

fn parse_num(line: usize, s: &str) -> Result<usize, ModelError> {
    s.parse().map_err(|_| ModelError::Format {
        line,
        message: format!("bad integer {s:?}"),
    })
}

fn parse_f64(line: usize, s: &str) -> Result<f64, ModelError> {
    s.parse().map_err(|_| ModelError::Format {
        line,
        message: format!("bad number {s:?}"),
    })
}

pub fn write_model(path: &Path, saved: &SavedModel) -> Result<(), ModelError> {
    write_atomic(path, saved.render().as_bytes())?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<SavedModel, ModelError> {
    SavedModel::parse(&std::fs::read_to_string(path)?)
}
