use log::warn;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::graph::RatingMatrix;
use crate::model::{dot, FactorModel};

/// Anything that scores a (user, item) pair.
pub trait Predictor {
    fn predict(&self, user: usize, item: usize) -> f64;

    /// Predictions for every entry of `target`, in entry order.
    fn predict_entries(&self, target: &RatingMatrix) -> Vec<f64> {
        target.iter().map(|e| self.predict(e.user, e.item)).collect()
    }
}

impl Predictor for FactorModel {
    fn predict(&self, user: usize, item: usize) -> f64 {
        crate::model::logistic(self.score(user, item))
    }
}

fn global_mean(train: &RatingMatrix) -> f64 {
    if train.is_empty() {
        0.5
    } else {
        train.iter().map(|e| e.value).sum::<f64>() / train.len() as f64
    }
}

/// Means over one axis; `None` where nothing was observed.
fn axis_means(train: &RatingMatrix, len: usize, key: impl Fn(usize, usize) -> usize) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; len];
    let mut count = vec![0usize; len];
    for e in train.iter() {
        let k = key(e.user, e.item);
        sum[k] += e.value;
        count[k] += 1;
    }
    sum.into_iter()
        .zip(count)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect()
}

/// Predicts the user's mean training rating.
#[derive(Debug, Clone, PartialEq)]
pub struct UserMean {
    means: Vec<Option<f64>>,
    global: f64,
}

impl UserMean {
    pub fn fit(train: &RatingMatrix) -> Self {
        Self {
            means: axis_means(train, train.users(), |u, _| u),
            global: global_mean(train),
        }
    }
}

impl Predictor for UserMean {
    fn predict(&self, user: usize, _item: usize) -> f64 {
        self.means.get(user).copied().flatten().unwrap_or(self.global)
    }
}

/// Predicts the item's mean training rating.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemMean {
    means: Vec<Option<f64>>,
    global: f64,
}

impl ItemMean {
    pub fn fit(train: &RatingMatrix) -> Self {
        Self {
            means: axis_means(train, train.items(), |_, i| i),
            global: global_mean(train),
        }
    }
}

impl Predictor for ItemMean {
    fn predict(&self, _user: usize, item: usize) -> f64 {
        self.means.get(item).copied().flatten().unwrap_or(self.global)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfOptions {
    pub dim: usize,
    pub max_iter: usize,
    /// Stop when the relative decrease of the masked loss falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl NmfOptions {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            max_iter: 500,
            tol: 1e-9,
            seed,
        }
    }
}

/// Nonnegative factorization `R ≈ W Hᵀ` fit to the observed entries only,
/// by masked multiplicative updates. Predictions are clipped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nmf {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    pub iterations: usize,
    pub loss: f64,
}

const NMF_EPS: f64 = 1e-12;

fn masked_loss(w: &Array2<f64>, h: &Array2<f64>, train: &RatingMatrix) -> f64 {
    train
        .iter()
        .map(|e| {
            let r = dot(w.row(e.user), h.row(e.item)) - e.value;
            r * r
        })
        .sum()
}

impl Nmf {
    pub fn fit(train: &RatingMatrix, opts: NmfOptions) -> Result<Self, EvalError> {
        if opts.dim == 0 {
            return Err(EvalError::Config("NMF dimension must be >= 1".into()));
        }
        let d = opts.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let scale = (4.0 * global_mean(train) / d as f64).sqrt();
        let mut w = Array2::from_shape_simple_fn((train.users(), d), || scale * rng.random_range(0.01..1.0));
        let mut h = Array2::from_shape_simple_fn((train.items(), d), || scale * rng.random_range(0.01..1.0));
        let mut loss = masked_loss(&w, &h, train);
        let mut best = (w.clone(), h.clone(), loss);
        let mut iterations = 0;
        for _ in 0..opts.max_iter {
            iterations += 1;
            multiplicative_step(&mut w, &h, train, false);
            multiplicative_step(&mut h, &w, train, true);
            let next = masked_loss(&w, &h, train);
            if !next.is_finite() {
                warn!("NMF loss became non-finite after {iterations} iterations; keeping best iterate");
                break;
            }
            let decrease = (loss - next) / loss.max(NMF_EPS);
            loss = next;
            if loss < best.2 {
                best = (w.clone(), h.clone(), loss);
            }
            if decrease.abs() < opts.tol {
                break;
            }
        }
        let (w, h, loss) = best;
        Ok(Self { w, h, iterations, loss })
    }
}

/// Updates `x` (rows indexed by users, or by items when `by_item`) with
/// `other` held fixed.
fn multiplicative_step(x: &mut Array2<f64>, other: &Array2<f64>, train: &RatingMatrix, by_item: bool) {
    let mut numer = Array2::<f64>::zeros(x.raw_dim());
    let mut denom = Array2::<f64>::zeros(x.raw_dim());
    for e in train.iter() {
        let (row, col) = if by_item { (e.item, e.user) } else { (e.user, e.item) };
        let approx = dot(x.row(row), other.row(col));
        numer.row_mut(row).scaled_add(e.value, &other.row(col));
        denom.row_mut(row).scaled_add(approx, &other.row(col));
    }
    ndarray::Zip::from(x).and(&numer).and(&denom).for_each(|x, &n, &d| {
        if d > 0.0 {
            *x *= n / (d + NMF_EPS);
        }
    });
}

impl Predictor for Nmf {
    fn predict(&self, user: usize, item: usize) -> f64 {
        dot(self.w.row(user), self.h.row(item)).clamp(0.0, 1.0)
    }
}
