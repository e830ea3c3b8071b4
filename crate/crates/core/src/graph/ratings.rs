use std::collections::HashSet;

use super::GraphError;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

/// Sparse user-item matrix with values in `[0, 1]`. Stored entries are the
/// observed ones; a zero rating is an unobserved entry and is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    n: usize,
    m: usize,
    entries: Vec<Rating>,
}

impl RatingMatrix {
    pub fn new(n: usize, m: usize, entries: Vec<Rating>) -> Result<Self, GraphError> {
        let mut seen = HashSet::with_capacity(entries.len());
        let mut kept = Vec::with_capacity(entries.len());
        for e in entries {
            if e.user >= n || e.item >= m {
                return Err(GraphError::Ratings(format!(
                    "entry ({}, {}) outside {n}x{m}",
                    e.user, e.item
                )));
            }
            if !e.value.is_finite() || !(0.0..=1.0).contains(&e.value) {
                return Err(GraphError::Ratings(format!(
                    "rating {} at ({}, {}) not in [0, 1]",
                    e.value, e.user, e.item
                )));
            }
            if !seen.insert((e.user, e.item)) {
                return Err(GraphError::Ratings(format!("duplicate entry ({}, {})", e.user, e.item)));
            }
            if e.value != 0.0 {
                kept.push(e);
            }
        }
        kept.sort_by_key(|e| (e.user, e.item));
        Ok(Self { n, m, entries: kept })
    }

    pub fn from_triplets(n: usize, m: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        Self::new(
            n,
            m,
            triplets
                .iter()
                .map(|&(user, item, value)| Rating { user, item, value })
                .collect(),
        )
    }

    /// Reads observed entries out of a sparse matrix with values in `[0, 1]`.
    pub fn from_csr(matrix: &CsrMatrix) -> Result<Self, GraphError> {
        let triplets: Vec<_> = matrix.iter().collect();
        Self::from_triplets(matrix.nrows(), matrix.ncols(), &triplets)
    }

    pub fn users(&self) -> usize {
        self.n
    }

    pub fn items(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &Rating> {
        self.entries.iter()
    }

    pub fn get(&self, user: usize, item: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&(user, item), |e| (e.user, e.item))
            .ok()
            .map(|i| self.entries[i].value)
    }

    /// Fraction of the `n * m` cells that are observed; zero for an empty
    /// shape.
    pub fn density(&self) -> f64 {
        let cells = self.n * self.m;
        if cells == 0 {
            0.0
        } else {
            self.entries.len() as f64 / cells as f64
        }
    }

    /// Observed ratings per user.
    pub fn user_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n];
        for e in &self.entries {
            c[e.user] += 1;
        }
        c
    }

    /// Observed ratings per item.
    pub fn item_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.m];
        for e in &self.entries {
            c[e.item] += 1;
        }
        c
    }

    /// Same shape, keeping only the given entry positions.
    pub fn subset(&self, positions: &[usize]) -> RatingMatrix {
        let mut entries: Vec<Rating> = positions.iter().map(|&p| self.entries[p]).collect();
        entries.sort_by_key(|e| (e.user, e.item));
        RatingMatrix {
            n: self.n,
            m: self.m,
            entries,
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let triplets: Vec<_> = self.entries.iter().map(|e| (e.user, e.item, e.value)).collect();
        CsrMatrix::from_triplets(self.n, self.m, &triplets)
    }
}
