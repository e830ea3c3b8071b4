//! Two-phase alternating gradient descent: factors `(U, V)` with the path
//! weights fixed, then the weights with the factors fixed, until the
//! parameters stop moving.

use std::fmt::Write as _;

use log::{debug, warn};
use ndarray::{Array2, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    dot, logistic, objective_terms, path_costs, weight_objective, FactorModel, Hyperparams, ModelError, Optimizer,
    PathWeights, Problem, WeightConstraint,
};

/// Consecutive step halvings before a phase gives up.
pub const MAX_HALVINGS: usize = 10;
/// Consecutive increasing epochs that trigger a halving in stochastic mode.
pub const STOCHASTIC_PATIENCE: usize = 5;
/// Half-width of the uniform factor initialisation.
pub const INIT_SCALE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("latent dimension must be >= 1")]
    InvalidDimension,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{phase} phase diverged after {halvings} step halvings (learn rate {learn_rate:e})")]
    Divergence {
        phase: Phase,
        halvings: usize,
        learn_rate: f64,
        /// Every accepted objective value up to the failure.
        trace: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Factors,
    Weights,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Factors => "factor",
            Phase::Weights => "weight",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: FactorModel,
    pub weights: PathWeights,
    /// Current step size; shrinks when steps are rejected.
    pub learn_rate: f64,
    /// Completed outer iterations.
    pub outer: usize,
    /// Inner iterations spent in the last factor and weight phases.
    pub inner_factors: usize,
    pub inner_weights: usize,
    /// Objective at the current parameters.
    pub objective: f64,
    pub factors_converged: bool,
    pub weights_converged: bool,
    /// Every accepted objective value, starting with the initial one.
    pub steps: Vec<f64>,
    rng: ChaCha8Rng,
}

/// Random initial state. `U` and `V` are uniform in `[−0.01, 0.01]`, the
/// weights uniform in `[0, 1]` (renormalised per group under the simplex
/// constraint). `U` is drawn first, row by row, then `V`, `α`, `β`, `w`.
pub fn init(hp: &Hyperparams, problem: &Problem) -> Result<TrainState, LearnerError> {
    if hp.dim == 0 {
        return Err(LearnerError::InvalidDimension);
    }
    hp.validate()?;
    let (n, m, d) = (problem.users(), problem.items(), hp.dim);
    let (na, nb, nw) = problem.path_counts();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let factor = |rows: usize, rng: &mut ChaCha8Rng| {
        Array2::from_shape_simple_fn((rows, d), || rng.random_range(-INIT_SCALE..=INIT_SCALE))
    };
    let u = factor(n, &mut rng);
    let v = factor(m, &mut rng);
    let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(0.0..=1.0)).collect() };
    let mut weights = PathWeights {
        alpha: draw(na),
        beta: draw(nb),
        w: draw(nw),
    };
    if hp.weight_constraint == WeightConstraint::Simplex {
        for g in [&mut weights.alpha, &mut weights.beta, &mut weights.w] {
            let total: f64 = g.iter().sum();
            if total > 0.0 {
                g.iter_mut().for_each(|x| *x /= total);
            } else {
                let k = g.len() as f64;
                g.iter_mut().for_each(|x| *x = 1.0 / k);
            }
        }
    }
    let model = FactorModel { u, v };
    let objective = objective_value(&model, &weights, problem, hp)?;
    Ok(TrainState {
        model,
        weights,
        learn_rate: hp.learn_rate,
        outer: 0,
        inner_factors: 0,
        inner_weights: 0,
        objective,
        factors_converged: false,
        weights_converged: false,
        steps: vec![objective],
        rng: ChaCha8Rng::seed_from_u64(hp.seed.wrapping_add(1)),
    })
}

fn objective_value(
    model: &FactorModel,
    weights: &PathWeights,
    problem: &Problem,
    hp: &Hyperparams,
) -> Result<f64, ModelError> {
    Ok(objective_terms(model, weights, problem, hp.lambda, hp.effective_mu(problem))?.total())
}

/// `2 f'(s) (f(s) − r)`, the derivative of `(f(s) − r)²` in `s`.
fn residual_slope(score: f64, target: f64) -> f64 {
    let f = logistic(score);
    2.0 * f * (1.0 - f) * (f - target)
}

/// Exact gradient of `J` with respect to `U` and `V`.
pub fn grad_factors(
    model: &FactorModel,
    weights: &PathWeights,
    problem: &Problem,
    hp: &Hyperparams,
) -> Result<(Array2<f64>, Array2<f64>), LearnerError> {
    problem.check_shapes(model, weights)?;
    let mu = hp.effective_mu(problem);
    let (u, v) = (&model.u, &model.v);
    let mut gu = Array2::zeros(u.raw_dim());
    let mut gv = Array2::zeros(v.raw_dim());
    let mut accumulate = |target: &crate::graph::RatingMatrix, scale: f64| {
        for e in target.iter() {
            let g = scale * residual_slope(dot(u.row(e.user), v.row(e.item)), e.value);
            gu.row_mut(e.user).scaled_add(g, &v.row(e.item));
            gv.row_mut(e.item).scaled_add(g, &u.row(e.user));
        }
    };
    accumulate(problem.ratings(), 1.0);
    for (w, side) in weights.w.iter().zip(problem.side()) {
        if *w != 0.0 && mu != 0.0 {
            accumulate(side, mu * w);
        }
    }
    for (a, l) in weights.alpha.iter().zip(problem.user_graphs()) {
        l.apply_scaled_into(u, 2.0 * a, &mut gu);
    }
    for (b, l) in weights.beta.iter().zip(problem.item_graphs()) {
        l.apply_scaled_into(v, 2.0 * b, &mut gv);
    }
    for (mut g, (x, c)) in gu
        .rows_mut()
        .into_iter()
        .zip(u.rows().into_iter().zip(problem.user_reg()))
    {
        g.scaled_add(2.0 * hp.lambda * c, &x);
    }
    for (mut g, (x, c)) in gv
        .rows_mut()
        .into_iter()
        .zip(v.rows().into_iter().zip(problem.item_reg()))
    {
        g.scaled_add(2.0 * hp.lambda * c, &x);
    }
    if !(gu.iter().all(|x| x.is_finite()) && gv.iter().all(|x| x.is_finite())) {
        return Err(ModelError::NonFinite {
            term: "factor gradient",
        }
        .into());
    }
    Ok((gu, gv))
}

/// Exact gradient of the weight objective `J₁` for fixed factors.
pub fn grad_weights(
    model: &FactorModel,
    weights: &PathWeights,
    problem: &Problem,
    hp: &Hyperparams,
) -> Result<PathWeights, LearnerError> {
    problem.check_shapes(model, weights)?;
    let costs = path_costs(model, problem);
    Ok(weight_gradient(weights, &costs, hp.lambda, hp.effective_mu(problem))?)
}

fn weight_gradient(
    weights: &PathWeights,
    costs: &crate::model::PathCosts,
    lambda: f64,
    mu: f64,
) -> Result<PathWeights, ModelError> {
    let lin = |w: &[f64], c: &[f64], scale: f64| -> Vec<f64> {
        w.iter().zip(c).map(|(w, c)| scale * c + 2.0 * lambda * w).collect()
    };
    let g = PathWeights {
        alpha: lin(&weights.alpha, &costs.user, 1.0),
        beta: lin(&weights.beta, &costs.item, 1.0),
        w: lin(&weights.w, &costs.side, mu),
    };
    if g.alpha.iter().chain(&g.beta).chain(&g.w).all(|x| x.is_finite()) {
        Ok(g)
    } else {
        Err(ModelError::NonFinite {
            term: "weight gradient",
        })
    }
}

/// `‖new − old‖_F / (‖old‖_F + 1e−12)`; zero for empty blocks.
pub fn relative_change<'a>(new: impl IntoIterator<Item = &'a f64>, old: impl IntoIterator<Item = &'a f64>) -> f64 {
    let (mut diff, mut base) = (0.0, 0.0);
    for (a, b) in new.into_iter().zip(old) {
        diff += (a - b) * (a - b);
        base += b * b;
    }
    diff.sqrt() / (base.sqrt() + 1e-12)
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}`.
pub fn project_simplex(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

fn project(weights: &mut PathWeights, constraint: WeightConstraint) {
    for g in [&mut weights.alpha, &mut weights.beta, &mut weights.w] {
        match constraint {
            WeightConstraint::Simplex => project_simplex(g),
            WeightConstraint::Nonnegative => g.iter_mut().for_each(|x| *x = x.max(0.0)),
        }
    }
}

/// Evaluates a trial point; `None` when some term is not finite.
fn try_objective(value: Result<f64, ModelError>) -> Result<Option<f64>, LearnerError> {
    match value {
        Ok(j) => Ok(Some(j)),
        Err(ModelError::NonFinite { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Outcome of searching for an acceptable step along a fixed direction.
enum Step<T> {
    Accepted(T, f64),
    /// No decrease after [`MAX_HALVINGS`] halvings, but every trial was
    /// finite: the phase has stalled at numerical precision.
    Stalled,
}

/// Halves the step until `trial` does not increase `J`.
fn backtrack<T>(
    state: &mut TrainState,
    phase: Phase,
    mut trial: impl FnMut(f64) -> Result<(T, Result<f64, ModelError>), LearnerError>,
) -> Result<Step<T>, LearnerError> {
    let start_rate = state.learn_rate;
    let mut halvings = 0;
    loop {
        let (candidate, value) = trial(state.learn_rate)?;
        let value = try_objective(value)?;
        match value {
            Some(j) if j <= state.objective => return Ok(Step::Accepted(candidate, j)),
            _ => {}
        }
        if halvings == MAX_HALVINGS {
            if value.is_none() {
                return Err(LearnerError::Divergence {
                    phase,
                    halvings,
                    learn_rate: state.learn_rate,
                    trace: state.steps.clone(),
                });
            }
            state.learn_rate = start_rate;
            return Ok(Step::Stalled);
        }
        halvings += 1;
        state.learn_rate *= 0.5;
        debug!("{phase} step rejected, learn rate halved to {:e}", state.learn_rate);
    }
}

/// Factor phase: gradient steps on `(U, V)` until the relative change of
/// both blocks drops below `inner_tol` or `max_inner` steps.
pub fn update_factors(state: &mut TrainState, problem: &Problem, hp: &Hyperparams) -> Result<(), LearnerError> {
    match hp.optimizer {
        Optimizer::FullBatch => update_factors_full(state, problem, hp),
        Optimizer::Stochastic => update_factors_stochastic(state, problem, hp),
    }
}

fn update_factors_full(state: &mut TrainState, problem: &Problem, hp: &Hyperparams) -> Result<(), LearnerError> {
    state.inner_factors = 0;
    state.factors_converged = false;
    for _ in 0..hp.max_inner {
        let (gu, gv) = grad_factors(&state.model, &state.weights, problem, hp)?;
        let weights = state.weights.clone();
        let current = state.model.clone();
        let step = backtrack(state, Phase::Factors, |rate| {
            let mut next = current.clone();
            next.u.scaled_add(-rate, &gu);
            next.v.scaled_add(-rate, &gv);
            let j = objective_value(&next, &weights, problem, hp);
            Ok((next, j))
        })?;
        state.inner_factors += 1;
        let Step::Accepted(next, j) = step else {
            state.factors_converged = true;
            break;
        };
        let change = relative_change(&next.u, &current.u).max(relative_change(&next.v, &current.v));
        state.model = next;
        state.objective = j;
        state.steps.push(j);
        if change < hp.inner_tol {
            state.factors_converged = true;
            break;
        }
    }
    Ok(())
}

/// One pass over the observed entries in random order. Each entry moves its
/// user and item rows along its own residual gradient (plus the ridge term
/// of a rated node); the graph terms and the ridge term of unrated nodes are
/// applied once per epoch as a full-batch step.
fn stochastic_epoch(
    model: &mut FactorModel,
    weights: &PathWeights,
    problem: &Problem,
    hp: &Hyperparams,
    rate: f64,
    rng: &mut ChaCha8Rng,
) {
    let mu = hp.effective_mu(problem);
    let mut order: Vec<(usize, usize)> = (0..problem.ratings().len()).map(|p| (0, p)).collect();
    for (k, side) in problem.side().iter().enumerate() {
        if weights.w[k] != 0.0 && mu != 0.0 {
            order.extend((0..side.len()).map(|p| (k + 1, p)));
        }
    }
    order.shuffle(rng);
    let d = model.dim();
    let mut ui = vec![0.0; d];
    for (source, p) in order {
        let (e, scale, ridge) = if source == 0 {
            (problem.ratings().entries()[p], 1.0, hp.lambda)
        } else {
            (problem.side()[source - 1].entries()[p], mu * weights.w[source - 1], 0.0)
        };
        let g = scale * residual_slope(dot(model.u.row(e.user), model.v.row(e.item)), e.value);
        for k in 0..d {
            ui[k] = model.u[[e.user, k]];
            let vj = model.v[[e.item, k]];
            model.u[[e.user, k]] -= rate * (g * vj + 2.0 * ridge * ui[k]);
            model.v[[e.item, k]] -= rate * (g * ui[k] + 2.0 * ridge * vj);
        }
    }
    let mut gu = Array2::zeros(model.u.raw_dim());
    let mut gv = Array2::zeros(model.v.raw_dim());
    for (a, l) in weights.alpha.iter().zip(problem.user_graphs()) {
        l.apply_scaled_into(&model.u, 2.0 * a, &mut gu);
    }
    for (b, l) in weights.beta.iter().zip(problem.item_graphs()) {
        l.apply_scaled_into(&model.v, 2.0 * b, &mut gv);
    }
    let cold = |counts: Vec<usize>, x: &Array2<f64>, g: &mut Array2<f64>| {
        for (i, c) in counts.into_iter().enumerate() {
            if c == 0 {
                g.row_mut(i).scaled_add(2.0 * hp.lambda, &x.row(i));
            }
        }
    };
    cold(problem.ratings().user_counts(), &model.u, &mut gu);
    cold(problem.ratings().item_counts(), &model.v, &mut gv);
    model.u.scaled_add(-rate, &gu);
    model.v.scaled_add(-rate, &gv);
}

fn update_factors_stochastic(state: &mut TrainState, problem: &Problem, hp: &Hyperparams) -> Result<(), LearnerError> {
    state.inner_factors = 0;
    state.factors_converged = false;
    let mut rising = 0;
    let mut halvings = 0;
    for _ in 0..hp.max_inner {
        let previous = state.model.clone();
        let mut next = previous.clone();
        stochastic_epoch(&mut next, &state.weights, problem, hp, state.learn_rate, &mut state.rng);
        let j = try_objective(objective_value(&next, &state.weights, problem, hp))?;
        state.inner_factors += 1;
        let Some(j) = j else {
            return Err(LearnerError::Divergence {
                phase: Phase::Factors,
                halvings,
                learn_rate: state.learn_rate,
                trace: state.steps.clone(),
            });
        };
        rising = if j > state.objective { rising + 1 } else { 0 };
        let change = relative_change(&next.u, &previous.u).max(relative_change(&next.v, &previous.v));
        state.model = next;
        state.objective = j;
        state.steps.push(j);
        if rising == STOCHASTIC_PATIENCE {
            rising = 0;
            halvings += 1;
            state.learn_rate *= 0.5;
            warn!(
                "objective rose for {STOCHASTIC_PATIENCE} epochs, learn rate halved to {:e}",
                state.learn_rate
            );
            if halvings == MAX_HALVINGS {
                return Err(LearnerError::Divergence {
                    phase: Phase::Factors,
                    halvings,
                    learn_rate: state.learn_rate,
                    trace: state.steps.clone(),
                });
            }
        }
        if change < hp.inner_tol {
            state.factors_converged = true;
            break;
        }
    }
    Ok(())
}

/// Weight phase: projected gradient steps on the weight objective until the
/// relative change of every weight group drops below `inner_tol` or
/// `max_inner` steps.
pub fn update_weights(state: &mut TrainState, problem: &Problem, hp: &Hyperparams) -> Result<(), LearnerError> {
    state.inner_weights = 0;
    state.weights_converged = false;
    if state.weights.is_empty() {
        state.weights_converged = true;
        return Ok(());
    }
    problem.check_shapes(&state.model, &state.weights)?;
    let mu = hp.effective_mu(problem);
    let costs = path_costs(&state.model, problem);
    // J = J₁ + terms that do not depend on the weights.
    let fixed = state.objective - weight_objective(&state.weights, &costs, hp.lambda, mu);
    for _ in 0..hp.max_inner {
        let grad = weight_gradient(&state.weights, &costs, hp.lambda, mu)?;
        let current = state.weights.clone();
        let step = backtrack(state, Phase::Weights, |rate| {
            let mut next = current.clone();
            for (x, g) in [
                (&mut next.alpha, &grad.alpha),
                (&mut next.beta, &grad.beta),
                (&mut next.w, &grad.w),
            ] {
                x.iter_mut().zip(g).for_each(|(x, g)| *x -= rate * g);
            }
            project(&mut next, hp.weight_constraint);
            let j1 = weight_objective(&next, &costs, hp.lambda, mu);
            let j = if j1.is_finite() {
                Ok(fixed + j1)
            } else {
                Err(ModelError::NonFinite {
                    term: "weight objective",
                })
            };
            Ok((next, j))
        })?;
        state.inner_weights += 1;
        let Step::Accepted(next, j) = step else {
            state.weights_converged = true;
            break;
        };
        let change = relative_change(&next.alpha, &current.alpha)
            .max(relative_change(&next.beta, &current.beta))
            .max(relative_change(&next.w, &current.w));
        state.weights = next;
        state.objective = j;
        state.steps.push(j);
        if change < hp.inner_tol {
            state.weights_converged = true;
            break;
        }
    }
    Ok(())
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterRecord {
    pub outer_iter: usize,
    pub objective: f64,
    pub rel_change_u: f64,
    pub rel_change_v: f64,
    pub rel_change_a: f64,
    pub rel_change_b: f64,
    pub rel_change_w: f64,
    pub learn_rate: f64,
}

impl OuterRecord {
    fn max_change(&self) -> f64 {
        [
            self.rel_change_u,
            self.rel_change_v,
            self.rel_change_a,
            self.rel_change_b,
            self.rel_change_w,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: FactorModel,
    pub weights: PathWeights,
    /// `J` at the start and after every outer iteration.
    pub objective_trace: Vec<f64>,
    /// Every accepted `J`, both phases, starting with the initial value.
    pub step_trace: Vec<f64>,
    pub records: Vec<OuterRecord>,
    pub converged: bool,
    pub mu: f64,
    pub final_learn_rate: f64,
}

impl TrainOutput {
    pub fn log_csv(&self) -> String {
        training_log_csv(&self.records)
    }
}

pub const TRAINING_LOG_HEADER: &str =
    "outer_iter,objective,rel_change_u,rel_change_v,rel_change_a,rel_change_b,rel_change_w,learn_rate";

pub fn training_log_csv(records: &[OuterRecord]) -> String {
    let mut out = String::from(TRAINING_LOG_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.outer_iter,
            r.objective,
            r.rel_change_u,
            r.rel_change_v,
            r.rel_change_a,
            r.rel_change_b,
            r.rel_change_w,
            r.learn_rate
        );
    }
    out
}

/// Runs the outer loop from a fresh random state.
pub fn train(problem: &Problem, hp: &Hyperparams) -> Result<TrainOutput, LearnerError> {
    let state = init(hp, problem)?;
    train_from(state, problem, hp)
}

/// Runs the outer loop from `state`.
pub fn train_from(mut state: TrainState, problem: &Problem, hp: &Hyperparams) -> Result<TrainOutput, LearnerError> {
    hp.validate()?;
    let mut objective_trace = vec![state.objective];
    let mut records = Vec::new();
    let mut converged = false;
    for outer in 0..hp.max_outer {
        let before_model = state.model.clone();
        let before_weights = state.weights.clone();
        update_factors(&mut state, problem, hp)?;
        update_weights(&mut state, problem, hp)?;
        state.outer = outer + 1;
        objective_trace.push(state.objective);
        let record = OuterRecord {
            outer_iter: outer + 1,
            objective: state.objective,
            rel_change_u: relative_change(&state.model.u, &before_model.u),
            rel_change_v: relative_change(&state.model.v, &before_model.v),
            rel_change_a: relative_change(&state.weights.alpha, &before_weights.alpha),
            rel_change_b: relative_change(&state.weights.beta, &before_weights.beta),
            rel_change_w: relative_change(&state.weights.w, &before_weights.w),
            learn_rate: state.learn_rate,
        };
        debug!(
            "outer {}: J={:.6e} inner=({}, {}) max change {:.3e}",
            record.outer_iter,
            record.objective,
            state.inner_factors,
            state.inner_weights,
            record.max_change()
        );
        records.push(record);
        if record.max_change() < hp.outer_tol {
            converged = true;
            break;
        }
    }
    Ok(TrainOutput {
        mu: hp.effective_mu(problem),
        final_learn_rate: state.learn_rate,
        model: state.model,
        weights: state.weights,
        objective_trace,
        step_trace: state.steps,
        records,
        converged,
    })
}

/// Dense `f(U Vᵀ)`.
pub fn prediction_matrix(model: &FactorModel) -> Array2<f64> {
    let mut p = model.u.dot(&model.v.t());
    Zip::from(&mut p).for_each(|x| *x = logistic(*x));
    p
}
