//! The unified objective: logistic-link rating fit, graph-Laplacian
//! regularization per user-user and item-item meta-path, user-item
//! meta-path fit scaled by `mu`, and weighted-lambda ridge terms.
//!
//! ```text
//! J = Σ_obs (f(U_i·V_j) − R_ij)²
//!   + Σ_k α_k Tr(Uᵀ L_A^k U) + Σ_k β_k Tr(Vᵀ L_B^k V)
//!   + μ Σ_k w_k Σ_{obs in R^k} (f(U_i·V_j) − R^k_ij)²
//!   + λ (Σ_i n_i ‖U_i‖² + Σ_j n_j ‖V_j‖² + ‖A‖² + ‖B‖² + ‖W‖²)
//! ```
//!
//! Rating sums run over observed entries only. `n_i`, `n_j` count each
//! user's / item's observed ratings, with 1 substituted for nodes that have
//! none.

mod file;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use thiserror::Error;

use crate::graph::{GraphError, RatingMatrix};
use crate::metapath::{Group, RelationSet};
use crate::sparse::CsrMatrix;

pub use file::{read_model, write_model, SavedModel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {term}")]
    NonFinite { term: &'static str },
    #[error("similarity matrix is not symmetric (max |S - Sᵀ| = {0:e})")]
    Asymmetric(f64),
    #[error("similarity matrix has a negative entry")]
    NegativeSimilarity,
    #[error("index ({user}, {item}) out of range for {users}x{items}")]
    IndexOutOfRange {
        user: usize,
        item: usize,
        users: usize,
        items: usize,
    },
    #[error("rating matrix has an empty shape")]
    EmptyMatrix,
    #[error("invalid hyperparameter: {0}")]
    Hyperparams(String),
    #[error(transparent)]
    Ratings(#[from] GraphError),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
}

/// `1 / (1 + e^{-x})`, evaluated without overflow for any finite `x`.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Latent user factors `U` (n×d) and item factors `V` (m×d).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

impl FactorModel {
    pub fn new(u: Array2<f64>, v: Array2<f64>) -> Result<Self, ModelError> {
        if u.ncols() != v.ncols() {
            return Err(ModelError::Shape(format!(
                "U has {} columns, V has {}",
                u.ncols(),
                v.ncols()
            )));
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite { term: "factors" });
        }
        Ok(Self { u, v })
    }

    pub fn zeros(n: usize, m: usize, d: usize) -> Self {
        Self {
            u: Array2::zeros((n, d)),
            v: Array2::zeros((m, d)),
        }
    }

    pub fn users(&self) -> usize {
        self.u.nrows()
    }

    pub fn items(&self) -> usize {
        self.v.nrows()
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    /// `U_i · V_j` without bounds reporting.
    #[inline]
    pub fn score(&self, user: usize, item: usize) -> f64 {
        dot(self.u.row(user), self.v.row(item))
    }

    /// Predicted rating `f(U_i · V_j)`.
    pub fn predict(&self, user: usize, item: usize) -> Result<f64, ModelError> {
        if user >= self.users() || item >= self.items() {
            return Err(ModelError::IndexOutOfRange {
                user,
                item,
                users: self.users(),
                items: self.items(),
            });
        }
        Ok(logistic(self.score(user, item)))
    }
}

/// Per-meta-path importance weights: `alpha` (user-user), `beta`
/// (item-item), `w` (user-item).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathWeights {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub w: Vec<f64>,
}

impl PathWeights {
    pub fn zeros(na: usize, nb: usize, nw: usize) -> Self {
        Self {
            alpha: vec![0.0; na],
            beta: vec![0.0; nb],
            w: vec![0.0; nw],
        }
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.alpha.len(), self.beta.len(), self.w.len())
    }

    pub fn group(&self, group: Group) -> &[f64] {
        match group {
            Group::UserUser => &self.alpha,
            Group::ItemItem => &self.beta,
            Group::UserItem => &self.w,
        }
    }

    pub fn group_mut(&mut self, group: Group) -> &mut Vec<f64> {
        match group {
            Group::UserUser => &mut self.alpha,
            Group::ItemItem => &mut self.beta,
            Group::UserItem => &mut self.w,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty() && self.beta.is_empty() && self.w.is_empty()
    }

    pub fn squared_norm(&self) -> f64 {
        self.alpha.iter().chain(&self.beta).chain(&self.w).map(|x| x * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    /// Deterministic full-batch gradient descent with step rejection.
    #[default]
    FullBatch,
    /// Per-entry stochastic updates, one shuffled pass per inner iteration.
    Stochastic,
}

impl Optimizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Optimizer::FullBatch => "full-batch",
            Optimizer::Stochastic => "stochastic",
        }
    }
}

impl FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full-batch" => Ok(Optimizer::FullBatch),
            "stochastic" => Ok(Optimizer::Stochastic),
            other => Err(format!("unknown optimizer {other:?} (full-batch|stochastic)")),
        }
    }
}

/// Feasible set for the path weights after each weight-phase step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightConstraint {
    /// Each group's weights are nonnegative and sum to one.
    #[default]
    Simplex,
    /// Weights are clamped at zero only.
    Nonnegative,
}

impl WeightConstraint {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightConstraint::Simplex => "simplex",
            WeightConstraint::Nonnegative => "nonnegative",
        }
    }
}

impl FromStr for WeightConstraint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simplex" => Ok(WeightConstraint::Simplex),
            "nonnegative" => Ok(WeightConstraint::Nonnegative),
            other => Err(format!("unknown weight constraint {other:?} (simplex|nonnegative)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Ridge weight.
    pub lambda: f64,
    /// User-item meta-path weight; `None` means the rating density.
    pub mu: Option<f64>,
    /// Gradient step size.
    pub learn_rate: f64,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Latent dimension.
    pub dim: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub weight_constraint: WeightConstraint,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda: 0.001,
            mu: None,
            learn_rate: 0.1,
            inner_tol: 1e-4,
            outer_tol: 1e-4,
            max_inner: 100,
            max_outer: 50,
            dim: 10,
            seed: 42,
            optimizer: Optimizer::FullBatch,
            weight_constraint: WeightConstraint::Simplex,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Hyperparams(m));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda = {} must be finite and >= 0", self.lambda));
        }
        if let Some(mu) = self.mu {
            if !(0.0..=1.0).contains(&mu) {
                return bad(format!("mu = {mu} must lie in [0, 1]"));
            }
        }
        if !(self.learn_rate.is_finite() && self.learn_rate >= 0.0) {
            return bad(format!("learn_rate = {} must be finite and >= 0", self.learn_rate));
        }
        if self.inner_tol.is_nan() || self.inner_tol < 0.0 || self.outer_tol.is_nan() || self.outer_tol < 0.0 {
            return bad("tolerances must be >= 0".into());
        }
        if self.dim == 0 {
            return bad("latent dimension must be >= 1".into());
        }
        Ok(())
    }

    /// `mu` override if set, otherwise the density of the training ratings.
    pub fn effective_mu(&self, problem: &Problem) -> f64 {
        self.mu.unwrap_or(problem.density_mu())
    }
}

/// Proportion of observed cells, `Σ I_ij / (n·m)`.
pub fn mu_from_density(ratings: &RatingMatrix) -> Result<f64, ModelError> {
    if ratings.users() == 0 || ratings.items() == 0 {
        return Err(ModelError::EmptyMatrix);
    }
    Ok(ratings.density())
}

/// `L = D − S` for a symmetric nonnegative similarity matrix, stored as the
/// degree vector plus `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    similarity: CsrMatrix,
    degree: Vec<f64>,
}

pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

pub fn laplacian(similarity: &CsrMatrix) -> Result<Laplacian, ModelError> {
    if similarity.nrows() != similarity.ncols() {
        return Err(ModelError::Shape(format!(
            "similarity matrix is {}x{}",
            similarity.nrows(),
            similarity.ncols()
        )));
    }
    if similarity.values().iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite { term: "similarity" });
    }
    if similarity.values().iter().any(|&v| v < 0.0) {
        return Err(ModelError::NegativeSimilarity);
    }
    let asym = similarity.max_asymmetry();
    if asym > SYMMETRY_TOLERANCE {
        return Err(ModelError::Asymmetric(asym));
    }
    Ok(Laplacian {
        degree: similarity.row_sums(),
        similarity: similarity.clone(),
    })
}

impl Laplacian {
    pub fn size(&self) -> usize {
        self.degree.len()
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn similarity(&self) -> &CsrMatrix {
        &self.similarity
    }

    /// `L X`.
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(x.raw_dim());
        self.apply_scaled_into(x, 1.0, &mut out);
        out
    }

    /// `out += scale · L X`.
    pub(crate) fn apply_scaled_into(&self, x: &Array2<f64>, scale: f64, out: &mut Array2<f64>) {
        let d = x.ncols();
        for i in 0..self.size() {
            let deg = self.degree[i];
            let (cols, vals) = self.similarity.row(i);
            for k in 0..d {
                let mut acc = deg * x[[i, k]];
                for (&j, &s) in cols.iter().zip(vals) {
                    acc -= s * x[[j, k]];
                }
                out[[i, k]] += scale * acc;
            }
        }
    }

    /// `Tr(Xᵀ L X)`.
    pub fn trace_form(&self, x: &Array2<f64>) -> f64 {
        let mut total = 0.0;
        for i in 0..self.size() {
            let xi = x.row(i);
            let mut acc = self.degree[i] * dot(xi, xi);
            let (cols, vals) = self.similarity.row(i);
            for (&j, &s) in cols.iter().zip(vals) {
                acc -= s * dot(xi, x.row(j));
            }
            total += acc;
        }
        total
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = self.similarity.to_dense();
        for (i, row) in out.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = -*v;
            }
            row[i] += self.degree[i];
        }
        out
    }
}

/// Everything the objective needs besides the parameters: training ratings,
/// one Laplacian per user-user / item-item path, one sparse target per
/// user-item path, and the weighted-lambda counts.
#[derive(Debug, Clone)]
pub struct Problem {
    ratings: RatingMatrix,
    user_graphs: Vec<Laplacian>,
    item_graphs: Vec<Laplacian>,
    side: Vec<RatingMatrix>,
    user_reg: Vec<f64>,
    item_reg: Vec<f64>,
}

impl Problem {
    /// Builds a problem from training ratings and a relation set whose
    /// user-user / item-item matrices are already symmetric.
    pub fn new(ratings: RatingMatrix, relations: &RelationSet) -> Result<Self, ModelError> {
        let side = relations
            .user_item
            .iter()
            .map(|s| RatingMatrix::from_csr(s.values()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parts(
            ratings,
            relations.user_user.iter().map(|s| s.values().clone()).collect(),
            relations.item_item.iter().map(|s| s.values().clone()).collect(),
            side,
        )
    }

    pub fn from_parts(
        ratings: RatingMatrix,
        user_similarities: Vec<CsrMatrix>,
        item_similarities: Vec<CsrMatrix>,
        side: Vec<RatingMatrix>,
    ) -> Result<Self, ModelError> {
        let (n, m) = (ratings.users(), ratings.items());
        for s in &user_similarities {
            if s.shape() != (n, n) {
                return Err(ModelError::Shape(format!(
                    "user similarity is {:?}, expected ({n}, {n})",
                    s.shape()
                )));
            }
        }
        for s in &item_similarities {
            if s.shape() != (m, m) {
                return Err(ModelError::Shape(format!(
                    "item similarity is {:?}, expected ({m}, {m})",
                    s.shape()
                )));
            }
        }
        for r in &side {
            if (r.users(), r.items()) != (n, m) {
                return Err(ModelError::Shape(format!(
                    "user-item relation is {}x{}, expected {n}x{m}",
                    r.users(),
                    r.items()
                )));
            }
        }
        let reg = |counts: Vec<usize>| -> Vec<f64> {
            counts
                .into_iter()
                .map(|c| if c == 0 { 1.0 } else { c as f64 })
                .collect()
        };
        Ok(Self {
            user_reg: reg(ratings.user_counts()),
            item_reg: reg(ratings.item_counts()),
            user_graphs: user_similarities.iter().map(laplacian).collect::<Result<_, _>>()?,
            item_graphs: item_similarities.iter().map(laplacian).collect::<Result<_, _>>()?,
            side,
            ratings,
        })
    }

    pub fn ratings(&self) -> &RatingMatrix {
        &self.ratings
    }

    pub fn user_graphs(&self) -> &[Laplacian] {
        &self.user_graphs
    }

    pub fn item_graphs(&self) -> &[Laplacian] {
        &self.item_graphs
    }

    pub fn side(&self) -> &[RatingMatrix] {
        &self.side
    }

    /// Weighted-lambda multiplier per user.
    pub fn user_reg(&self) -> &[f64] {
        &self.user_reg
    }

    pub fn item_reg(&self) -> &[f64] {
        &self.item_reg
    }

    pub fn users(&self) -> usize {
        self.ratings.users()
    }

    pub fn items(&self) -> usize {
        self.ratings.items()
    }

    /// `(N_A, N_B, N_W)`.
    pub fn path_counts(&self) -> (usize, usize, usize) {
        (self.user_graphs.len(), self.item_graphs.len(), self.side.len())
    }

    pub fn density_mu(&self) -> f64 {
        self.ratings.density()
    }

    pub fn check_shapes(&self, model: &FactorModel, weights: &PathWeights) -> Result<(), ModelError> {
        if model.users() != self.users() || model.items() != self.items() {
            return Err(ModelError::Shape(format!(
                "model is {}x{}, ratings are {}x{}",
                model.users(),
                model.items(),
                self.users(),
                self.items()
            )));
        }
        if weights.counts() != self.path_counts() {
            return Err(ModelError::Shape(format!(
                "weights {:?} do not match meta-path counts {:?}",
                weights.counts(),
                self.path_counts()
            )));
        }
        Ok(())
    }
}

/// Squared logistic residuals over the observed entries of `target`.
pub(crate) fn squared_residuals(model: &FactorModel, target: &RatingMatrix) -> f64 {
    target
        .iter()
        .map(|e| {
            let r = logistic(model.score(e.user, e.item)) - e.value;
            r * r
        })
        .sum()
}

/// The individual terms of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveTerms {
    pub fit: f64,
    pub user_graph: f64,
    pub item_graph: f64,
    pub side: f64,
    pub factor_reg: f64,
    pub weight_reg: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.fit + self.user_graph + self.item_graph + self.side + self.factor_reg + self.weight_reg
    }
}

impl fmt::Display for ObjectiveTerms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fit={:.6e} user_graph={:.6e} item_graph={:.6e} side={:.6e} factor_reg={:.6e} weight_reg={:.6e}",
            self.fit, self.user_graph, self.item_graph, self.side, self.factor_reg, self.weight_reg
        )
    }
}

fn finite(value: f64, term: &'static str) -> Result<f64, ModelError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonFinite { term })
    }
}

pub fn objective_terms(
    model: &FactorModel,
    weights: &PathWeights,
    problem: &Problem,
    lambda: f64,
    mu: f64,
) -> Result<ObjectiveTerms, ModelError> {
    problem.check_shapes(model, weights)?;
    let fit = finite(squared_residuals(model, &problem.ratings), "rating fit")?;
    let user_graph = finite(
        weights
            .alpha
            .iter()
            .zip(&problem.user_graphs)
            .map(|(a, l)| a * l.trace_form(&model.u))
            .sum(),
        "user-user regularizer",
    )?;
    let item_graph = finite(
        weights
            .beta
            .iter()
            .zip(&problem.item_graphs)
            .map(|(b, l)| b * l.trace_form(&model.v))
            .sum(),
        "item-item regularizer",
    )?;
    let side = finite(
        mu * weights
            .w
            .iter()
            .zip(&problem.side)
            .map(|(w, r)| w * squared_residuals(model, r))
            .sum::<f64>(),
        "user-item meta-path fit",
    )?;
    let weighted_norm =
        |x: &Array2<f64>, c: &[f64]| -> f64 { x.rows().into_iter().zip(c).map(|(row, c)| c * dot(row, row)).sum() };
    let factor_reg = finite(
        lambda * (weighted_norm(&model.u, &problem.user_reg) + weighted_norm(&model.v, &problem.item_reg)),
        "factor regularizer",
    )?;
    let weight_reg = finite(lambda * weights.squared_norm(), "weight regularizer")?;
    Ok(ObjectiveTerms {
        fit,
        user_graph,
        item_graph,
        side,
        factor_reg,
        weight_reg,
    })
}

/// Total objective `J` under `hp` (with `mu` resolved against the problem).
pub fn objective(
    model: &FactorModel,
    weights: &PathWeights,
    problem: &Problem,
    hp: &Hyperparams,
) -> Result<f64, ModelError> {
    Ok(objective_terms(model, weights, problem, hp.lambda, hp.effective_mu(problem))?.total())
}

/// Per-path quantities that multiply the weights in the objective, for
/// fixed factors: `Tr(UᵀL_A^k U)`, `Tr(VᵀL_B^k V)` and the unscaled
/// user-item residual sums.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCosts {
    pub user: Vec<f64>,
    pub item: Vec<f64>,
    pub side: Vec<f64>,
}

pub fn path_costs(model: &FactorModel, problem: &Problem) -> PathCosts {
    PathCosts {
        user: problem.user_graphs.iter().map(|l| l.trace_form(&model.u)).collect(),
        item: problem.item_graphs.iter().map(|l| l.trace_form(&model.v)).collect(),
        side: problem.side.iter().map(|r| squared_residuals(model, r)).collect(),
    }
}

/// The part of `J` that depends on the weights:
/// `Σ α_k c^A_k + Σ β_k c^B_k + μ Σ w_k c^W_k + λ(‖A‖² + ‖B‖² + ‖W‖²)`.
pub fn weight_objective(weights: &PathWeights, costs: &PathCosts, lambda: f64, mu: f64) -> f64 {
    let lin = |w: &[f64], c: &[f64]| -> f64 { w.iter().zip(c).map(|(a, b)| a * b).sum() };
    lin(&weights.alpha, &costs.user)
        + lin(&weights.beta, &costs.item)
        + mu * lin(&weights.w, &costs.side)
        + lambda * weights.squared_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn logistic_values() {
        assert_eq!(logistic(0.0), 0.5);
        for x in [0.3, 2.0, 17.5, 40.0] {
            assert!((logistic(x) + logistic(-x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(logistic(500.0), 1.0);
        let tiny = logistic(-500.0);
        assert!(tiny.is_finite() && tiny >= 0.0);
        assert!((logistic(1.0) - 0.7310585786300049).abs() < 1e-15);
    }

    #[test]
    fn predict_examples() {
        let mut m = FactorModel::zeros(2, 2, 3);
        assert_eq!(m.predict(0, 1).unwrap(), 0.5);
        m.u[[0, 0]] = 1.0;
        m.v[[1, 0]] = 1.0;
        assert!((m.predict(0, 1).unwrap() - 0.7310585786).abs() < 1e-10);
        assert!(matches!(m.predict(2, 0), Err(ModelError::IndexOutOfRange { .. })));
    }

    #[test]
    fn two_node_laplacian() {
        let s = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let l = laplacian(&s).unwrap();
        assert_eq!(l.to_dense(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let z = laplacian(&CsrMatrix::zeros(3, 3)).unwrap();
        assert!(z.to_dense().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_rejects_bad_input() {
        let asym = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![0.5, 0.0]]);
        assert!(matches!(laplacian(&asym), Err(ModelError::Asymmetric(_))));
        let neg = CsrMatrix::from_dense(&[vec![0.0, -1.0], vec![-1.0, 0.0]]);
        assert!(matches!(laplacian(&neg), Err(ModelError::NegativeSimilarity)));
        assert!(laplacian(&CsrMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn laplacian_apply_matches_dense() {
        let s = CsrMatrix::from_dense(&[vec![0.2, 0.5, 0.0], vec![0.5, 0.0, 0.3], vec![0.0, 0.3, 0.0]]);
        let l = laplacian(&s).unwrap();
        let x = array![[1.0, -2.0], [0.5, 0.0], [3.0, 1.0]];
        let dense = l.to_dense();
        let lx = l.apply(&x);
        for i in 0..3 {
            for k in 0..2 {
                let want: f64 = (0..3).map(|j| dense[i][j] * x[[j, k]]).sum();
                assert!((lx[[i, k]] - want).abs() < 1e-14);
            }
            assert!(dense[i].iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn mu_rule() {
        let r = RatingMatrix::from_triplets(
            3,
            5,
            &[
                (0, 0, 0.1),
                (0, 1, 0.2),
                (1, 2, 0.3),
                (2, 3, 0.4),
                (2, 4, 0.5),
                (2, 0, 0.6),
            ],
        )
        .unwrap();
        assert_eq!(mu_from_density(&r).unwrap(), 0.4);
        let empty = RatingMatrix::new(4, 4, vec![]).unwrap();
        assert_eq!(mu_from_density(&empty).unwrap(), 0.0);
        let degenerate = RatingMatrix::new(0, 4, vec![]).unwrap();
        assert!(matches!(mu_from_density(&degenerate), Err(ModelError::EmptyMatrix)));
    }

    #[test]
    fn zero_factors_objective_is_fit_at_half() {
        let r = RatingMatrix::from_triplets(2, 3, &[(0, 0, 0.2), (1, 2, 0.9)]).unwrap();
        let s = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let side = RatingMatrix::from_triplets(2, 3, &[(0, 1, 0.7)]).unwrap();
        let p = Problem::from_parts(r, vec![s], vec![], vec![side]).unwrap();
        let model = FactorModel::zeros(2, 3, 2);
        let w = PathWeights::zeros(1, 0, 1);
        let j = objective(&model, &w, &p, &Hyperparams::default()).unwrap();
        let want = (0.5f64 - 0.2).powi(2) + (0.5f64 - 0.9).powi(2);
        assert!((j - want).abs() < 1e-15);
    }

    #[test]
    fn zero_similarity_regularizers_vanish() {
        let r = RatingMatrix::from_triplets(2, 2, &[(0, 0, 0.2)]).unwrap();
        let p = Problem::from_parts(r, vec![CsrMatrix::zeros(2, 2)], vec![CsrMatrix::zeros(2, 2)], vec![]).unwrap();
        let model = FactorModel::new(array![[1.0, 2.0], [-3.0, 0.5]], array![[0.3, 0.1], [2.0, 2.0]]).unwrap();
        let w = PathWeights {
            alpha: vec![3.0],
            beta: vec![5.0],
            w: vec![],
        };
        let t = objective_terms(&model, &w, &p, 0.1, 0.5).unwrap();
        assert_eq!(t.user_graph, 0.0);
        assert_eq!(t.item_graph, 0.0);
    }

    #[test]
    fn cold_nodes_regularized_with_unit_weight() {
        let r = RatingMatrix::from_triplets(2, 2, &[(0, 0, 0.2), (0, 1, 0.4)]).unwrap();
        let p = Problem::from_parts(r, vec![], vec![], vec![]).unwrap();
        assert_eq!(p.user_reg(), &[2.0, 1.0]);
        assert_eq!(p.item_reg(), &[1.0, 1.0]);
    }

    #[test]
    fn shape_errors() {
        let r = RatingMatrix::from_triplets(2, 2, &[(0, 0, 0.2)]).unwrap();
        assert!(Problem::from_parts(r.clone(), vec![CsrMatrix::zeros(3, 3)], vec![], vec![]).is_err());
        let p = Problem::from_parts(r, vec![], vec![], vec![]).unwrap();
        let w = PathWeights::zeros(1, 0, 0);
        assert!(objective(&FactorModel::zeros(2, 2, 1), &w, &p, &Hyperparams::default()).is_err());
        assert!(objective(
            &FactorModel::zeros(3, 2, 1),
            &PathWeights::default(),
            &p,
            &Hyperparams::default()
        )
        .is_err());
    }

    #[test]
    fn non_finite_term_is_named() {
        let r = RatingMatrix::from_triplets(1, 1, &[(0, 0, 0.2)]).unwrap();
        let p = Problem::from_parts(r, vec![], vec![], vec![]).unwrap();
        let model = FactorModel {
            u: array![[f64::MAX]],
            v: array![[f64::MAX]],
        };
        let err = objective(&model, &PathWeights::default(), &p, &Hyperparams::default()).unwrap_err();
        assert!(err.to_string().contains("regularizer"), "{err}");
    }

    #[test]
    fn hyperparam_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        let mut hp = Hyperparams {
            dim: 0,
            ..Hyperparams::default()
        };
        assert!(hp.validate().is_err());
        hp = Hyperparams {
            mu: Some(1.5),
            ..Hyperparams::default()
        };
        assert!(hp.validate().is_err());
    }
}
