//! Hete-CF: collaborative filtering on heterogeneous social networks.
//!
//! User-user, item-item and user-item meta-path similarities are fused into
//! a graph-regularized, logistic-link matrix factorization whose factors and
//! per-path weights are learned by alternating gradient descent.
//!
//! The pipeline is: load a [`graph::HeteroGraph`], derive the rating matrix
//! from a target meta-path, build a [`metapath::RelationSet`] from the
//! selected meta-paths, assemble a [`model::Problem`] and run
//! [`learner::train`].

pub mod atomic;
pub mod eval;
pub mod graph;
pub mod learner;
pub mod metapath;
pub mod model;
pub mod presets;
pub mod sparse;
pub mod synth;
