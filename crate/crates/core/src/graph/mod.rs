//! Typed heterogeneous network: schema, per-type node index spaces and
//! per-relation weighted adjacency.

mod io;
mod ratings;
mod schema;

use std::collections::HashMap;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metapath::{self, MetaPath, MetaPathError, PathSimVariant};
use crate::sparse::CsrMatrix;

pub use io::{load_graph, parse_graph, save_graph};
pub use ratings::{Rating, RatingMatrix};
pub use schema::{RelationType, Schema};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("unknown node id {0:?}")]
    UnknownNode(String),
    #[error("unknown node type {0:?}")]
    UnknownType(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("edge {src:?} -> {dst:?} ({relation}): {message}")]
    InvalidEdge {
        src: String,
        dst: String,
        relation: String,
        message: String,
    },
    #[error("invalid ratings: {0}")]
    Ratings(String),
    #[error(transparent)]
    MetaPath(#[from] Box<MetaPathError>),
}

impl GraphError {
    /// Attaches file and line context to an error raised while ingesting a
    /// record.
    fn at(self, file: &str, line: usize) -> GraphError {
        match self {
            GraphError::Parse { .. } | GraphError::Io { .. } => self,
            other => GraphError::Parse {
                file: file.to_string(),
                line,
                message: other.to_string(),
            },
        }
    }
}

/// Location of a node: its type and its dense index within that type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef {
    pub node_type: usize,
    pub index: usize,
}

/// An immutable heterogeneous network.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    schema: Schema,
    node_ids: Vec<Vec<String>>,
    lookup: HashMap<String, NodeRef>,
    adjacency: Vec<CsrMatrix>,
}

impl HeteroGraph {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn node_count(&self, node_type: usize) -> usize {
        self.node_ids[node_type].len()
    }

    pub fn total_nodes(&self) -> usize {
        self.node_ids.iter().map(Vec::len).sum()
    }

    pub fn node_ids(&self, node_type: usize) -> &[String] {
        &self.node_ids[node_type]
    }

    pub fn node(&self, id: &str) -> Option<NodeRef> {
        self.lookup.get(id).copied()
    }

    pub fn user_count(&self) -> usize {
        self.node_count(self.schema.user_type())
    }

    pub fn item_count(&self) -> usize {
        self.node_count(self.schema.item_type())
    }

    /// Number of distinct (merged) edges of a relation.
    pub fn edge_count(&self, relation: usize) -> usize {
        self.adjacency[relation].nnz()
    }

    pub fn total_edges(&self) -> usize {
        self.adjacency.iter().map(CsrMatrix::nnz).sum()
    }

    pub(crate) fn relation_matrix(&self, relation: usize) -> &CsrMatrix {
        &self.adjacency[relation]
    }

    /// Weighted adjacency of `relation`, shaped `|source| x |target|`, or its
    /// transpose (the reverse relation) when `transposed` is set.
    pub fn adjacency(&self, relation: &str, transposed: bool) -> Result<CsrMatrix, GraphError> {
        let idx = self
            .schema
            .relation_index(relation)
            .ok_or_else(|| GraphError::UnknownRelation(relation.to_string()))?;
        let m = &self.adjacency[idx];
        Ok(if transposed { m.transpose() } else { m.clone() })
    }

    /// SHA-256 over a canonical serialisation of schema, nodes and merged
    /// edges. Independent of edge-file line order.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.schema.to_string().as_bytes());
        for (t, ids) in self.node_ids.iter().enumerate() {
            for id in ids {
                h.update(format!("n\t{id}\t{t}\n").as_bytes());
            }
        }
        for (r, m) in self.adjacency.iter().enumerate() {
            for (s, d, w) in m.iter() {
                h.update(format!("e\t{r}\t{s}\t{d}\t{w}\n").as_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Incremental, validating construction of a [`HeteroGraph`].
#[derive(Debug)]
pub struct GraphBuilder {
    schema: Schema,
    node_ids: Vec<Vec<String>>,
    lookup: HashMap<String, NodeRef>,
    edges: Vec<Vec<(usize, usize, f64)>>,
}

impl GraphBuilder {
    pub fn new(schema: Schema) -> Self {
        let types = schema.node_types().len();
        let rels = schema.relations().len();
        Self {
            schema,
            node_ids: vec![Vec::new(); types],
            lookup: HashMap::new(),
            edges: vec![Vec::new(); rels],
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn add_node(&mut self, id: &str, node_type: &str) -> Result<NodeRef, GraphError> {
        let t = self
            .schema
            .type_index(node_type)
            .ok_or_else(|| GraphError::UnknownType(node_type.to_string()))?;
        self.add_node_typed(id, t)
    }

    pub fn add_node_typed(&mut self, id: &str, node_type: usize) -> Result<NodeRef, GraphError> {
        if id.is_empty() || id.contains(['\t', '\n', '\r']) {
            return Err(GraphError::Schema(format!("invalid node id {id:?}")));
        }
        if self.lookup.contains_key(id) {
            return Err(GraphError::DuplicateNode(id.to_string()));
        }
        let node = NodeRef {
            node_type,
            index: self.node_ids[node_type].len(),
        };
        self.node_ids[node_type].push(id.to_string());
        self.lookup.insert(id.to_string(), node);
        Ok(node)
    }

    /// Adds an edge; parallel edges are merged by summing their weights.
    pub fn add_edge(&mut self, src: &str, dst: &str, relation: &str, weight: f64) -> Result<(), GraphError> {
        let r = self
            .schema
            .relation_index(relation)
            .ok_or_else(|| GraphError::UnknownRelation(relation.to_string()))?;
        let s = self
            .lookup
            .get(src)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(src.to_string()))?;
        let d = self
            .lookup
            .get(dst)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(dst.to_string()))?;
        let invalid = |message: String| GraphError::InvalidEdge {
            src: src.to_string(),
            dst: dst.to_string(),
            relation: relation.to_string(),
            message,
        };
        let rel = &self.schema.relations()[r];
        if s.node_type != rel.source || d.node_type != rel.target {
            return Err(invalid(format!(
                "endpoint types {} -> {} do not match relation {} -> {}",
                self.schema.type_name(s.node_type),
                self.schema.type_name(d.node_type),
                self.schema.type_name(rel.source),
                self.schema.type_name(rel.target),
            )));
        }
        if s == d {
            return Err(invalid("self-loops are not allowed".into()));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(invalid(format!("weight {weight} must be finite and >= 0")));
        }
        self.add_edge_indexed(r, s.index, d.index, weight);
        Ok(())
    }

    /// Unchecked fast path used by generators that already hold valid
    /// indices.
    pub(crate) fn add_edge_indexed(&mut self, relation: usize, src: usize, dst: usize, weight: f64) {
        self.edges[relation].push((src, dst, weight));
    }

    pub fn build(self) -> HeteroGraph {
        let adjacency = self
            .schema
            .relations()
            .iter()
            .zip(&self.edges)
            .map(|(rel, edges)| {
                CsrMatrix::from_triplets(self.node_ids[rel.source].len(), self.node_ids[rel.target].len(), edges)
            })
            .collect();
        HeteroGraph {
            schema: self.schema,
            node_ids: self.node_ids,
            lookup: self.lookup,
            adjacency,
        }
    }
}

/// Derives the target rating matrix as the PathSim of a user-to-item
/// meta-path. Pairs with zero similarity are unobserved.
pub fn derive_ratings(
    graph: &HeteroGraph,
    target_path: &MetaPath,
    variant: PathSimVariant,
) -> Result<RatingMatrix, GraphError> {
    let schema = graph.schema();
    let (start, end) = (target_path.source_type(), target_path.target_type());
    if schema.type_index(start) != Some(schema.user_type()) || schema.type_index(end) != Some(schema.item_type()) {
        return Err(GraphError::Schema(format!(
            "target meta-path must run from {} to {}, got {} to {}",
            schema.type_name(schema.user_type()),
            schema.type_name(schema.item_type()),
            start,
            end
        )));
    }
    let pc = metapath::path_count(graph, target_path).map_err(Box::new)?;
    let sim = metapath::pathsim(&pc, variant).map_err(Box::new)?;
    let entries: Vec<Rating> = sim
        .values()
        .iter()
        .map(|(user, item, value)| Rating { user, item, value })
        .collect();
    RatingMatrix::new(graph.user_count(), graph.item_count(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apc_schema() -> Schema {
        Schema::parse(
            "type Author user\ntype Paper\ntype Conf item\ntype Term\n\
             relation writes Author Paper\nrelation published_in Paper Conf\n\
             relation contains Paper Term\nrelation cites Paper Paper\n",
        )
        .unwrap()
    }

    #[test]
    fn smallest_valid_instance() {
        let mut b = GraphBuilder::new(apc_schema());
        b.add_node("a1", "Author").unwrap();
        b.add_node("p1", "Paper").unwrap();
        b.add_node("c1", "Conf").unwrap();
        b.add_edge("a1", "p1", "writes", 1.0).unwrap();
        b.add_edge("p1", "c1", "published_in", 1.0).unwrap();
        let g = b.build();
        assert_eq!(g.total_nodes(), 3);
        assert_eq!(g.total_edges(), 2);
    }

    #[test]
    fn adjacency_shapes_and_transpose() {
        let mut b = GraphBuilder::new(apc_schema());
        for a in ["a1", "a2"] {
            b.add_node(a, "Author").unwrap();
        }
        for p in ["p1", "p2", "p3"] {
            b.add_node(p, "Paper").unwrap();
        }
        b.add_edge("a1", "p1", "writes", 1.0).unwrap();
        let g = b.build();
        let w = g.adjacency("writes", false).unwrap();
        assert_eq!(w.shape(), (2, 3));
        assert_eq!(w.get(0, 0), 1.0);
        assert_eq!(w.nnz(), 1);
        assert_eq!(g.adjacency("writes", true).unwrap(), w.transpose());
        let empty = g.adjacency("contains", false).unwrap();
        assert_eq!(empty.shape(), (3, 0));
        assert!(matches!(
            g.adjacency("nope", false),
            Err(GraphError::UnknownRelation(_))
        ));
    }

    #[test]
    fn parallel_edges_are_summed() {
        let mut b = GraphBuilder::new(apc_schema());
        b.add_node("a1", "Author").unwrap();
        b.add_node("p1", "Paper").unwrap();
        b.add_edge("a1", "p1", "writes", 1.0).unwrap();
        b.add_edge("a1", "p1", "writes", 2.0).unwrap();
        let g = b.build();
        assert_eq!(g.edge_count(0), 1);
        assert_eq!(g.adjacency("writes", false).unwrap().get(0, 0), 3.0);
    }

    #[test]
    fn rejects_type_mismatch_and_self_loops() {
        let mut b = GraphBuilder::new(apc_schema());
        b.add_node("a1", "Author").unwrap();
        b.add_node("p1", "Paper").unwrap();
        b.add_node("c1", "Conf").unwrap();
        assert!(matches!(
            b.add_edge("a1", "c1", "writes", 1.0),
            Err(GraphError::InvalidEdge { .. })
        ));
        assert!(matches!(
            b.add_edge("p1", "p1", "cites", 1.0),
            Err(GraphError::InvalidEdge { .. })
        ));
        assert!(b.add_edge("a1", "p1", "writes", -1.0).is_err());
        assert!(matches!(
            b.add_edge("a9", "p1", "writes", 1.0),
            Err(GraphError::UnknownNode(id)) if id == "a9"
        ));
        assert!(matches!(b.add_node("a1", "Paper"), Err(GraphError::DuplicateNode(_))));
    }

    #[test]
    fn ratings_require_user_to_item_path() {
        let g = GraphBuilder::new(apc_schema()).build();
        let p = MetaPath::parse(g.schema(), "Author -writes-> Paper <-writes- Author").unwrap();
        assert!(derive_ratings(&g, &p, PathSimVariant::RowCol).is_err());
    }

    #[test]
    fn no_path_instances_give_empty_ratings() {
        let mut b = GraphBuilder::new(apc_schema());
        b.add_node("a1", "Author").unwrap();
        b.add_node("c1", "Conf").unwrap();
        let g = b.build();
        let p = MetaPath::parse(g.schema(), "Author -writes-> Paper -published_in-> Conf").unwrap();
        let r = derive_ratings(&g, &p, PathSimVariant::RowCol).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.density(), 0.0);
    }

    #[test]
    fn single_conference_author() {
        let mut b = GraphBuilder::new(apc_schema());
        for (id, t) in [
            ("a1", "Author"),
            ("a2", "Author"),
            ("p1", "Paper"),
            ("p2", "Paper"),
            ("p3", "Paper"),
            ("c1", "Conf"),
            ("c2", "Conf"),
        ] {
            b.add_node(id, t).unwrap();
        }
        b.add_edge("a1", "p1", "writes", 1.0).unwrap();
        b.add_edge("a1", "p2", "writes", 1.0).unwrap();
        b.add_edge("a2", "p3", "writes", 1.0).unwrap();
        b.add_edge("p1", "c1", "published_in", 1.0).unwrap();
        b.add_edge("p2", "c1", "published_in", 1.0).unwrap();
        b.add_edge("p3", "c2", "published_in", 1.0).unwrap();
        let g = b.build();
        let p = MetaPath::parse(g.schema(), "Author -writes-> Paper -published_in-> Conf").unwrap();
        let r = derive_ratings(&g, &p, PathSimVariant::RowCol).unwrap();
        let a1: Vec<_> = r.iter().filter(|e| e.user == 0).collect();
        assert_eq!(a1.len(), 1);
        assert_eq!(a1[0].item, 0);
        assert!(a1[0].value > 0.0);
    }

    #[test]
    fn hash_ignores_edge_order() {
        let build = |rev: bool| {
            let mut b = GraphBuilder::new(apc_schema());
            b.add_node("a1", "Author").unwrap();
            b.add_node("p1", "Paper").unwrap();
            b.add_node("p2", "Paper").unwrap();
            let mut edges = vec![("a1", "p1"), ("a1", "p2")];
            if rev {
                edges.reverse();
            }
            for (s, d) in edges {
                b.add_edge(s, d, "writes", 1.0).unwrap();
            }
            b.build()
        };
        assert_eq!(build(false).content_hash(), build(true).content_hash());
        assert_eq!(build(false).content_hash().len(), 64);
    }
}
