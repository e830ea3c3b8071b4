//! Independent oracles and instance generators shared by the integration
//! and acceptance tests. Nothing here calls into the library's numerical
//! code; it only uses the library's types to hand data over.

#![allow(dead_code)]

use hetecf::graph::{GraphBuilder, HeteroGraph, RatingMatrix, Schema};
use hetecf::metapath::{Direction, MetaPath, Step};
use hetecf::model::{FactorModel, PathWeights, Problem};
use hetecf::sparse::CsrMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A small objective instance held in plain dense form.
#[derive(Debug, Clone)]
pub struct DenseInstance {
    pub n: usize,
    pub m: usize,
    pub ratings: Vec<(usize, usize, f64)>,
    pub user_sims: Vec<Dense>,
    pub item_sims: Vec<Dense>,
    pub side: Vec<Vec<(usize, usize, f64)>>,
}

fn random_symmetric(rng: &mut ChaCha8Rng, k: usize, density: f64) -> Dense {
    let mut s = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..i {
            if rng.random_bool(density) {
                let v = rng.random_range(0.0..1.0);
                s[i][j] = v;
                s[j][i] = v;
            }
        }
    }
    s
}

fn random_entries(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if rng.random_bool(density) {
                out.push((i, j, rng.random_range(0.01..1.0)));
            }
        }
    }
    out
}

impl DenseInstance {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, m: usize, paths: (usize, usize, usize)) -> Self {
        let density = rng.random_range(0.2..0.8);
        Self {
            n,
            m,
            ratings: random_entries(rng, n, m, density),
            user_sims: (0..paths.0).map(|_| random_symmetric(rng, n, 0.4)).collect(),
            item_sims: (0..paths.1).map(|_| random_symmetric(rng, m, 0.4)).collect(),
            side: (0..paths.2).map(|_| random_entries(rng, n, m, 0.3)).collect(),
        }
    }

    pub fn problem(&self) -> Problem {
        let csr = |s: &Dense| CsrMatrix::from_dense(s);
        Problem::from_parts(
            RatingMatrix::from_triplets(self.n, self.m, &self.ratings).unwrap(),
            self.user_sims.iter().map(csr).collect(),
            self.item_sims.iter().map(csr).collect(),
            self.side
                .iter()
                .map(|t| RatingMatrix::from_triplets(self.n, self.m, t).unwrap())
                .collect(),
        )
        .unwrap()
    }

    /// Direct evaluation of the objective: squared logistic residuals,
    /// pairwise graph smoothness `½ Σ_ij S_ij ‖x_i − x_j‖²`, weighted ridge
    /// with rating counts (1 for unrated rows) and plain ridge on weights.
    pub fn objective(&self, u: &Dense, v: &Dense, weights: &PathWeights, lambda: f64, mu: f64) -> f64 {
        let dotp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let resid = |t: &[(usize, usize, f64)]| {
            t.iter()
                .map(|&(i, j, r)| (sigmoid(dotp(&u[i], &v[j])) - r).powi(2))
                .sum::<f64>()
        };
        let smooth = |s: &Dense, x: &Dense| {
            let mut total = 0.0;
            for i in 0..s.len() {
                for j in 0..s.len() {
                    let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    total += 0.5 * s[i][j] * d2;
                }
            }
            total
        };
        let mut j = resid(&self.ratings);
        for (a, s) in weights.alpha.iter().zip(&self.user_sims) {
            j += a * smooth(s, u);
        }
        for (b, s) in weights.beta.iter().zip(&self.item_sims) {
            j += b * smooth(s, v);
        }
        for (w, t) in weights.w.iter().zip(&self.side) {
            j += mu * w * resid(t);
        }
        let mut cu = vec![0usize; self.n];
        let mut cv = vec![0usize; self.m];
        for &(i, jj, _) in &self.ratings {
            cu[i] += 1;
            cv[jj] += 1;
        }
        let c = |k: usize| if k == 0 { 1.0 } else { k as f64 };
        let mut reg = 0.0;
        for (row, &k) in u.iter().zip(&cu) {
            reg += c(k) * dotp(row, row);
        }
        for (row, &k) in v.iter().zip(&cv) {
            reg += c(k) * dotp(row, row);
        }
        let wsq: f64 = weights
            .alpha
            .iter()
            .chain(&weights.beta)
            .chain(&weights.w)
            .map(|x| x * x)
            .sum();
        j + lambda * (reg + wsq)
    }
}

pub fn to_dense(a: &Array2<f64>) -> Dense {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn random_params(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    d: usize,
    paths: (usize, usize, usize),
) -> (FactorModel, PathWeights) {
    let mut mat = |r: usize| Array2::from_shape_simple_fn((r, d), || rng.random_range(-1.0..1.0));
    let u = mat(n);
    let v = mat(m);
    let mut vec = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(0.0..1.0)).collect() };
    let weights = PathWeights {
        alpha: vec(paths.0),
        beta: vec(paths.1),
        w: vec(paths.2),
    };
    (FactorModel { u, v }, weights)
}

/// Relative comparison with an absolute floor for tiny values.
pub fn fd_close(analytic: f64, numeric: f64, rel: f64, floor: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs());
    if scale < floor {
        (analytic - numeric).abs() <= floor
    } else {
        (analytic - numeric).abs() / scale <= rel
    }
}

// ---------------------------------------------------------------------------
// Random heterogeneous graphs with an edge list kept on the side.

pub const TEST_SCHEMA: &str = "\
type A user
type B item
type C
relation ab A B
relation bc B C
relation ca C A
relation aa A A
";

pub struct RandomGraph {
    pub schema: Schema,
    pub counts: Vec<usize>,
    /// Per relation, edges as (source index, target index).
    pub edges: Vec<Vec<(usize, usize)>>,
    pub graph: HeteroGraph,
}

impl RandomGraph {
    pub fn generate(rng: &mut ChaCha8Rng, max_nodes: usize) -> Self {
        let schema = Schema::parse(TEST_SCHEMA).unwrap();
        let k = schema.node_types().len();
        let per_type = max_nodes / k;
        let counts: Vec<usize> = (0..k).map(|_| rng.random_range(1..=per_type)).collect();
        let mut builder = GraphBuilder::new(schema.clone());
        for (t, &c) in counts.iter().enumerate() {
            for i in 0..c {
                builder
                    .add_node(&format!("{}{i}", schema.type_name(t)), schema.type_name(t))
                    .unwrap();
            }
        }
        let mut edges = Vec::new();
        for rel in schema.relations() {
            let p = rng.random_range(0.1..0.6);
            let mut list = Vec::new();
            for s in 0..counts[rel.source] {
                for t in 0..counts[rel.target] {
                    if rel.source == rel.target && s == t {
                        continue;
                    }
                    if rng.random_bool(p) {
                        list.push((s, t));
                        builder
                            .add_edge(
                                &format!("{}{s}", schema.type_name(rel.source)),
                                &format!("{}{t}", schema.type_name(rel.target)),
                                &rel.name,
                                1.0,
                            )
                            .unwrap();
                    }
                }
            }
            edges.push(list);
        }
        let graph = builder.build();
        Self {
            schema,
            counts,
            edges,
            graph,
        }
    }

    /// Exhaustive enumeration of path instances: `out[s][t]` is the number
    /// of node sequences from `s` to `t` that follow `steps`.
    pub fn dfs_counts(&self, start_type: usize, steps: &[(usize, Direction)]) -> Vec<Vec<u64>> {
        let mut neighbors: Vec<Vec<Vec<usize>>> = Vec::new();
        for &(r, dir) in steps {
            let rel = &self.schema.relations()[r];
            let (from, _) = match dir {
                Direction::Forward => (rel.source, rel.target),
                Direction::Backward => (rel.target, rel.source),
            };
            let mut adj = vec![Vec::new(); self.counts[from]];
            for &(s, t) in &self.edges[r] {
                match dir {
                    Direction::Forward => adj[s].push(t),
                    Direction::Backward => adj[t].push(s),
                }
            }
            neighbors.push(adj);
        }
        let end_type = self.end_type(start_type, steps);
        let mut out = vec![vec![0u64; self.counts[end_type]]; self.counts[start_type]];
        fn walk(node: usize, depth: usize, neighbors: &[Vec<Vec<usize>>], row: &mut [u64]) {
            if depth == neighbors.len() {
                row[node] += 1;
                return;
            }
            for &next in &neighbors[depth][node] {
                walk(next, depth + 1, neighbors, row);
            }
        }
        for (s, row) in out.iter_mut().enumerate() {
            walk(s, 0, &neighbors, row);
        }
        out
    }

    pub fn end_type(&self, start_type: usize, steps: &[(usize, Direction)]) -> usize {
        let mut t = start_type;
        for &(r, dir) in steps {
            let rel = &self.schema.relations()[r];
            t = match dir {
                Direction::Forward => rel.target,
                Direction::Backward => rel.source,
            };
        }
        t
    }

    /// Every type-compatible step sequence of length 1..=max_len.
    pub fn all_paths(&self, max_len: usize) -> Vec<(usize, Vec<(usize, Direction)>)> {
        let mut out = Vec::new();
        let rels = self.schema.relations();
        fn extend(
            rels: &[hetecf::graph::RelationType],
            start: usize,
            current: usize,
            prefix: &mut Vec<(usize, Direction)>,
            max_len: usize,
            out: &mut Vec<(usize, Vec<(usize, Direction)>)>,
        ) {
            if !prefix.is_empty() {
                out.push((start, prefix.clone()));
            }
            if prefix.len() == max_len {
                return;
            }
            for (r, rel) in rels.iter().enumerate() {
                for dir in [Direction::Forward, Direction::Backward] {
                    let (from, to) = match dir {
                        Direction::Forward => (rel.source, rel.target),
                        Direction::Backward => (rel.target, rel.source),
                    };
                    if from == current {
                        prefix.push((r, dir));
                        extend(rels, start, to, prefix, max_len, out);
                        prefix.pop();
                    }
                }
            }
        }
        for start in 0..self.schema.node_types().len() {
            extend(rels, start, start, &mut Vec::new(), max_len, &mut out);
        }
        out
    }

    pub fn metapath(&self, start_type: usize, steps: &[(usize, Direction)]) -> MetaPath {
        let steps = steps
            .iter()
            .map(|&(r, direction)| Step {
                relation: self.schema.relations()[r].name.clone(),
                direction,
            })
            .collect();
        MetaPath::new(&self.schema, self.schema.type_name(start_type), steps).unwrap()
    }
}

// ---------------------------------------------------------------------------
// Plain logistic matrix factorization, written out independently with the
// same step-acceptance rules as the learner: a step that does not lower the
// objective is retried at half the rate, ten failed halvings end the phase
// (or abort when the objective is not finite), and phases stop on relative
// parameter change.

pub struct MfSettings {
    pub lambda: f64,
    pub learn_rate: f64,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub dim: usize,
    pub seed: u64,
}

pub struct MfRun {
    pub u: Dense,
    pub v: Dense,
    pub steps: Vec<f64>,
}

pub fn plain_mf(n: usize, m: usize, ratings: &[(usize, usize, f64)], s: &MfSettings) -> MfRun {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut u: Dense = (0..n)
        .map(|_| (0..s.dim).map(|_| rng.random_range(-0.01..=0.01)).collect())
        .collect();
    let mut v: Dense = (0..m)
        .map(|_| (0..s.dim).map(|_| rng.random_range(-0.01..=0.01)).collect())
        .collect();
    let mut cu = vec![0usize; n];
    let mut cv = vec![0usize; m];
    for &(i, j, _) in ratings {
        cu[i] += 1;
        cv[j] += 1;
    }
    let cu: Vec<f64> = cu.iter().map(|&c| if c == 0 { 1.0 } else { c as f64 }).collect();
    let cv: Vec<f64> = cv.iter().map(|&c| if c == 0 { 1.0 } else { c as f64 }).collect();
    let dotp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let objective = |u: &Dense, v: &Dense| -> f64 {
        let fit: f64 = ratings
            .iter()
            .map(|&(i, j, r)| (sigmoid(dotp(&u[i], &v[j])) - r).powi(2))
            .sum();
        let ru: f64 = u.iter().zip(&cu).map(|(x, c)| c * dotp(x, x)).sum();
        let rv: f64 = v.iter().zip(&cv).map(|(x, c)| c * dotp(x, x)).sum();
        fit + s.lambda * (ru + rv)
    };
    let rel = |new: &Dense, old: &Dense| {
        let mut diff = 0.0;
        let mut base = 0.0;
        for (a, b) in new.iter().flatten().zip(old.iter().flatten()) {
            diff += (a - b) * (a - b);
            base += b * b;
        }
        diff.sqrt() / (base.sqrt() + 1e-12)
    };
    let mut j = objective(&u, &v);
    let mut steps = vec![j];
    let mut rate = s.learn_rate;
    for _ in 0..s.max_outer {
        let (u0, v0) = (u.clone(), v.clone());
        for _ in 0..s.max_inner {
            let mut gu = vec![vec![0.0; s.dim]; n];
            let mut gv = vec![vec![0.0; s.dim]; m];
            for &(i, jj, r) in ratings {
                let f = sigmoid(dotp(&u[i], &v[jj]));
                let g = 2.0 * f * (1.0 - f) * (f - r);
                for k in 0..s.dim {
                    gu[i][k] += g * v[jj][k];
                    gv[jj][k] += g * u[i][k];
                }
            }
            for i in 0..n {
                for k in 0..s.dim {
                    gu[i][k] += 2.0 * s.lambda * cu[i] * u[i][k];
                }
            }
            for jj in 0..m {
                for k in 0..s.dim {
                    gv[jj][k] += 2.0 * s.lambda * cv[jj] * v[jj][k];
                }
            }
            let start_rate = rate;
            let mut halvings = 0;
            let accepted = loop {
                let step = |x: &Dense, g: &Dense| -> Dense {
                    x.iter()
                        .zip(g)
                        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - rate * q).collect())
                        .collect()
                };
                let (nu, nv) = (step(&u, &gu), step(&v, &gv));
                let nj = objective(&nu, &nv);
                if nj.is_finite() && nj <= j {
                    break Some((nu, nv, nj));
                }
                if halvings == 10 {
                    assert!(nj.is_finite(), "oracle diverged");
                    rate = start_rate;
                    break None;
                }
                halvings += 1;
                rate *= 0.5;
            };
            let Some((nu, nv, nj)) = accepted else { break };
            let change = rel(&nu, &u).max(rel(&nv, &v));
            u = nu;
            v = nv;
            j = nj;
            steps.push(j);
            if change < s.inner_tol {
                break;
            }
        }
        if rel(&u, &u0).max(rel(&v, &v0)) < s.outer_tol {
            break;
        }
    }
    MfRun { u, v, steps }
}

// ---------------------------------------------------------------------------
// Synthetic recovery instance: rank-2 ground truth, one informative and one
// noise relation per group.

pub struct RecoveryInstance {
    pub n: usize,
    pub m: usize,
    pub train: RatingMatrix,
    /// All unobserved cells with their true values.
    pub test: RatingMatrix,
    pub user_sims: Vec<CsrMatrix>,
    pub item_sims: Vec<CsrMatrix>,
    pub side: Vec<RatingMatrix>,
    /// Position of the informative matrix within each group (0 or 1).
    pub informative: usize,
}

/// Symmetric k-nearest-neighbour kernel `1 / (1 + d²)`, scaled so the
/// average row sum is 1.
fn knn_similarity(points: &[[f64; 2]], k: usize) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut sym = std::collections::BTreeMap::new();
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dx = points[i][0] - points[j][0];
                let dy = points[i][1] - points[j][1];
                (dx * dx + dy * dy, j)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(d2, j) in d.iter().take(k) {
            let s = 1.0 / (1.0 + d2);
            let key = (i.min(j), i.max(j));
            sym.insert(key, s);
        }
    }
    // Scale to mean degree 1.
    let total: f64 = 2.0 * sym.values().sum::<f64>();
    let scale = n as f64 / total;
    sym.into_iter()
        .flat_map(|((i, j), s)| [(i, j, s * scale), (j, i, s * scale)])
        .collect()
}

fn shuffled(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

impl RecoveryInstance {
    pub fn generate(seed: u64, n: usize, m: usize, observed: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE ^ seed);
        let point = |rng: &mut ChaCha8Rng| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let us: Vec<[f64; 2]> = (0..n).map(|_| point(&mut rng)).collect();
        let vs: Vec<[f64; 2]> = (0..m).map(|_| point(&mut rng)).collect();
        let truth = |i: usize, j: usize| sigmoid(us[i][0] * vs[j][0] + us[i][1] * vs[j][1]);
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut side = Vec::new();
        for i in 0..n {
            for j in 0..m {
                let r = truth(i, j);
                if rng.random_bool(observed) {
                    train.push((i, j, r));
                } else {
                    test.push((i, j, r));
                }
                if rng.random_bool(observed) {
                    side.push((i, j, r));
                }
            }
        }
        let uu = knn_similarity(&us, 10);
        let ii = knn_similarity(&vs, 10);
        let pu = shuffled(&mut rng, n);
        let pi = shuffled(&mut rng, m);
        let permute = |t: &[(usize, usize, f64)], p: &[usize]| -> Vec<(usize, usize, f64)> {
            t.iter().map(|&(i, j, s)| (p[i], p[j], s)).collect()
        };
        let uu_noise = permute(&uu, &pu);
        let ii_noise = permute(&ii, &pi);
        let side_noise: Vec<_> = side.iter().map(|&(i, j, r)| (pu[i], j, r)).collect();
        let informative = (seed % 2) as usize;
        let order = |a: CsrMatrix, b: CsrMatrix| if informative == 0 { vec![a, b] } else { vec![b, a] };
        let side_a = RatingMatrix::from_triplets(n, m, &side).unwrap();
        let side_b = RatingMatrix::from_triplets(n, m, &side_noise).unwrap();
        Self {
            n,
            m,
            train: RatingMatrix::from_triplets(n, m, &train).unwrap(),
            test: RatingMatrix::from_triplets(n, m, &test).unwrap(),
            user_sims: order(
                CsrMatrix::from_triplets(n, n, &uu),
                CsrMatrix::from_triplets(n, n, &uu_noise),
            ),
            item_sims: order(
                CsrMatrix::from_triplets(m, m, &ii),
                CsrMatrix::from_triplets(m, m, &ii_noise),
            ),
            side: if informative == 0 {
                vec![side_a, side_b]
            } else {
                vec![side_b, side_a]
            },
            informative,
        }
    }

    pub fn problem(&self) -> Problem {
        Problem::from_parts(
            self.train.clone(),
            self.user_sims.clone(),
            self.item_sims.clone(),
            self.side.clone(),
        )
        .unwrap()
    }
}

pub fn rmse_oracle(pred: &[f64], truth: &[f64]) -> f64 {
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    (s / pred.len() as f64).sqrt()
}

pub fn median(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

/// Least squares `R²` of `y` on `x`.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}
