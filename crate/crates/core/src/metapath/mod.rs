//! Meta-paths over a [`Schema`], path counting by adjacency chain products,
//! and PathSim similarity.

mod cache;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{HeteroGraph, Schema};
use crate::sparse::CsrMatrix;

pub use cache::{CacheStatus, SimilarityCache};

#[derive(Debug, Error)]
pub enum MetaPathError {
    #[error("cannot parse meta-path {text:?}: {message}")]
    Parse { text: String, message: String },
    #[error("meta-path {path}: step {step}: {message}")]
    Incompatible { path: String, step: usize, message: String },
    #[error("diagonal PathSim needs a palindromic meta-path, got {0}")]
    NotPalindromic(String),
    #[error("{group} meta-path must run {expected}, got {path}")]
    GroupEndpoints {
        group: Group,
        expected: String,
        path: String,
    },
    #[error("meta-path spec line {line}: {source}")]
    Spec {
        line: usize,
        #[source]
        source: Box<MetaPathError>,
    },
    #[error("similarity cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub relation: String,
    pub direction: Direction,
}

/// An ordered, type-compatible sequence of relation traversals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetaPath {
    types: Vec<String>,
    steps: Vec<Step>,
}

impl MetaPath {
    /// Validates `steps` against `schema`, starting from `start_type`.
    pub fn new(schema: &Schema, start_type: &str, steps: Vec<Step>) -> Result<Self, MetaPathError> {
        let mut types = vec![start_type.to_string()];
        let label = || {
            let mut s = start_type.to_string();
            for st in &steps {
                match st.direction {
                    Direction::Forward => s.push_str(&format!(" -{}-> ?", st.relation)),
                    Direction::Backward => s.push_str(&format!(" <-{}- ?", st.relation)),
                }
            }
            s
        };
        if schema.type_index(start_type).is_none() {
            return Err(MetaPathError::Incompatible {
                path: label(),
                step: 0,
                message: format!("unknown node type {start_type:?}"),
            });
        }
        if steps.is_empty() {
            return Err(MetaPathError::Incompatible {
                path: label(),
                step: 0,
                message: "a meta-path needs at least one step".into(),
            });
        }
        for (i, step) in steps.iter().enumerate() {
            let rel = schema
                .relation(&step.relation)
                .ok_or_else(|| MetaPathError::Incompatible {
                    path: label(),
                    step: i + 1,
                    message: format!("unknown relation {:?}", step.relation),
                })?;
            let (from, to) = match step.direction {
                Direction::Forward => (rel.source, rel.target),
                Direction::Backward => (rel.target, rel.source),
            };
            let current = types.last().expect("nonempty");
            if schema.type_name(from) != current {
                return Err(MetaPathError::Incompatible {
                    path: label(),
                    step: i + 1,
                    message: format!(
                        "relation {:?} traversed {:?} starts at {}, not {}",
                        step.relation,
                        step.direction,
                        schema.type_name(from),
                        current
                    ),
                });
            }
            types.push(schema.type_name(to).to_string());
        }
        Ok(Self { types, steps })
    }

    /// Parses `T1 -rel1-> T2 <-rel2- T3 ...`; `<-rel-` traverses `rel`
    /// from its target type back to its source type.
    pub fn parse(schema: &Schema, text: &str) -> Result<Self, MetaPathError> {
        let err = |message: String| MetaPathError::Parse {
            text: text.to_string(),
            message,
        };
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() < 3 || tokens.len().is_multiple_of(2) {
            return Err(err("expected `Type -rel-> Type ...`".into()));
        }
        let mut steps = Vec::new();
        for pair in tokens[1..].chunks(2) {
            let arrow = pair[0];
            let step = if let Some(rel) = arrow.strip_prefix("<-").and_then(|a| a.strip_suffix('-')) {
                Step {
                    relation: rel.to_string(),
                    direction: Direction::Backward,
                }
            } else if let Some(rel) = arrow.strip_prefix('-').and_then(|a| a.strip_suffix("->")) {
                Step {
                    relation: rel.to_string(),
                    direction: Direction::Forward,
                }
            } else {
                return Err(err(format!("bad arrow {arrow:?}")));
            };
            if step.relation.is_empty() {
                return Err(err(format!("empty relation in {arrow:?}")));
            }
            steps.push(step);
        }
        let path = Self::new(schema, tokens[0], steps).map_err(|e| err(e.to_string()))?;
        for (i, ty) in tokens.iter().step_by(2).enumerate() {
            if *ty != path.types[i] {
                return Err(err(format!(
                    "type {ty:?} at position {} does not match relation endpoint {}",
                    i + 1,
                    path.types[i]
                )));
            }
        }
        Ok(path)
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn source_type(&self) -> &str {
        &self.types[0]
    }

    pub fn target_type(&self) -> &str {
        self.types.last().expect("nonempty")
    }

    /// Steps in reverse order with each direction flipped.
    pub fn reverse(&self) -> MetaPath {
        MetaPath {
            types: self.types.iter().rev().cloned().collect(),
            steps: self
                .steps
                .iter()
                .rev()
                .map(|s| Step {
                    relation: s.relation.clone(),
                    direction: s.direction.flip(),
                })
                .collect(),
        }
    }

    /// True when the path equals its own reverse, step for step.
    pub fn is_palindromic(&self) -> bool {
        self.reverse() == *self
    }

    /// Compact type sequence, e.g. `Author-Paper-Conf`.
    pub fn short_label(&self) -> String {
        self.types.join("-")
    }
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.types[0])?;
        for (step, ty) in self.steps.iter().zip(&self.types[1..]) {
            match step.direction {
                Direction::Forward => write!(f, " -{}-> {}", step.relation, ty)?,
                Direction::Backward => write!(f, " <-{}- {}", step.relation, ty)?,
            }
        }
        Ok(())
    }
}

/// Weighted path-instance counts between the endpoint types of a meta-path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCountMatrix {
    pub path: MetaPath,
    pub counts: CsrMatrix,
}

/// Product of the per-step adjacency matrices: entry `(s, t)` sums the
/// weight products of all path instances from `s` to `t` (nodes may repeat).
pub fn path_count(graph: &HeteroGraph, path: &MetaPath) -> Result<PathCountMatrix, MetaPathError> {
    // Re-validate against this graph's schema.
    let checked = MetaPath::new(graph.schema(), path.source_type(), path.steps.clone())?;
    if checked != *path {
        return Err(MetaPathError::Incompatible {
            path: path.to_string(),
            step: 0,
            message: "type sequence does not match the graph schema".into(),
        });
    }
    let mut acc: Option<CsrMatrix> = None;
    for step in &path.steps {
        let rel = graph.schema().relation_index(&step.relation).expect("validated above");
        let m = graph.relation_matrix(rel);
        let m = match step.direction {
            Direction::Forward => m.clone(),
            Direction::Backward => m.transpose(),
        };
        acc = Some(match acc {
            None => m,
            Some(a) => a.matmul(&m),
        });
    }
    Ok(PathCountMatrix {
        path: path.clone(),
        counts: acc.expect("nonempty path"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PathSimVariant {
    /// `2·PC(s,t) / (Σ_t' PC(s,t') + Σ_s' PC(s',t))`.
    #[default]
    RowCol,
    /// `2·PC(s,t) / (PC(s,s) + PC(t,t))`, palindromic paths only.
    Diagonal,
}

impl PathSimVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PathSimVariant::RowCol => "rowcol",
            PathSimVariant::Diagonal => "diagonal",
        }
    }
}

impl fmt::Display for PathSimVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PathSimVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rowcol" => Ok(PathSimVariant::RowCol),
            "diagonal" => Ok(PathSimVariant::Diagonal),
            other => Err(format!("unknown PathSim variant {other:?} (rowcol|diagonal)")),
        }
    }
}

/// PathSim values for one meta-path, all in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    label: String,
    variant: PathSimVariant,
    values: CsrMatrix,
}

impl SimilarityMatrix {
    pub fn new(label: String, variant: PathSimVariant, values: CsrMatrix) -> Self {
        Self { label, variant, values }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn variant(&self) -> PathSimVariant {
        self.variant
    }

    pub fn values(&self) -> &CsrMatrix {
        &self.values
    }

    /// `(S + Sᵀ) / 2`.
    pub fn symmetrized(&self) -> SimilarityMatrix {
        let t = self.values.transpose();
        SimilarityMatrix {
            label: self.label.clone(),
            variant: self.variant,
            values: self.values.linear_combination(0.5, &t, 0.5),
        }
    }
}

pub fn pathsim(pc: &PathCountMatrix, variant: PathSimVariant) -> Result<SimilarityMatrix, MetaPathError> {
    let counts = &pc.counts;
    let values = match variant {
        PathSimVariant::RowCol => {
            let rows = counts.row_sums();
            let cols = counts.col_sums();
            counts.map_values(|s, t, v| ratio(v, rows[s] + cols[t]))
        }
        PathSimVariant::Diagonal => {
            if !pc.path.is_palindromic() {
                return Err(MetaPathError::NotPalindromic(pc.path.to_string()));
            }
            let diag: Vec<f64> = (0..counts.nrows()).map(|i| counts.get(i, i)).collect();
            counts.map_values(|s, t, v| ratio(v, diag[s] + diag[t]))
        }
    };
    Ok(SimilarityMatrix {
        label: pc.path.to_string(),
        variant,
        values,
    })
}

fn ratio(count: f64, denom: f64) -> f64 {
    if denom > 0.0 {
        (2.0 * count / denom).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Which relation family a meta-path feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    UserUser,
    ItemItem,
    UserItem,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::UserUser, Group::ItemItem, Group::UserItem];

    pub fn code(self) -> &'static str {
        match self {
            Group::UserUser => "UU",
            Group::ItemItem => "II",
            Group::UserItem => "UI",
        }
    }

    fn endpoints(self, schema: &Schema) -> (usize, usize) {
        let (u, i) = (schema.user_type(), schema.item_type());
        match self {
            Group::UserUser => (u, u),
            Group::ItemItem => (i, i),
            Group::UserItem => (u, i),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "UU" => Ok(Group::UserUser),
            "II" => Ok(Group::ItemItem),
            "UI" => Ok(Group::UserItem),
            other => Err(format!("unknown group {other:?} (UU|II|UI)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaPathSpec {
    pub group: Group,
    pub path: MetaPath,
    /// 1-based line in the spec file (0 when built programmatically).
    pub line: usize,
}

impl MetaPathSpec {
    pub fn new(schema: &Schema, group: Group, path: MetaPath) -> Result<Self, MetaPathError> {
        let (from, to) = group.endpoints(schema);
        if schema.type_index(path.source_type()) != Some(from) || schema.type_index(path.target_type()) != Some(to) {
            return Err(MetaPathError::GroupEndpoints {
                group,
                expected: format!("{} to {}", schema.type_name(from), schema.type_name(to)),
                path: path.to_string(),
            });
        }
        Ok(Self { group, path, line: 0 })
    }
}

/// Parses a meta-path spec file: one `GROUP: path` per line, `#` comments.
pub fn parse_specs(schema: &Schema, text: &str) -> Result<Vec<MetaPathSpec>, MetaPathError> {
    let mut specs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let rec = raw.trim();
        if rec.is_empty() || rec.starts_with('#') {
            continue;
        }
        let wrap = |source: MetaPathError| MetaPathError::Spec {
            line,
            source: Box::new(source),
        };
        let (group, path) = rec.split_once(':').ok_or_else(|| {
            wrap(MetaPathError::Parse {
                text: rec.to_string(),
                message: "expected `GROUP: path`".into(),
            })
        })?;
        let group: Group = group.trim().parse().map_err(|message| {
            wrap(MetaPathError::Parse {
                text: rec.to_string(),
                message,
            })
        })?;
        let path = MetaPath::parse(schema, path.trim()).map_err(wrap)?;
        let mut spec = MetaPathSpec::new(schema, group, path).map_err(wrap)?;
        spec.line = line;
        specs.push(spec);
    }
    Ok(specs)
}

/// Similarity matrices for every selected meta-path, grouped by role.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelationSet {
    pub user_user: Vec<SimilarityMatrix>,
    pub item_item: Vec<SimilarityMatrix>,
    pub user_item: Vec<SimilarityMatrix>,
}

impl RelationSet {
    /// `(N_A, N_B, N_W)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.user_user.len(), self.item_item.len(), self.user_item.len())
    }

    pub fn group(&self, group: Group) -> &[SimilarityMatrix] {
        match group {
            Group::UserUser => &self.user_user,
            Group::ItemItem => &self.item_item,
            Group::UserItem => &self.user_item,
        }
    }

    pub fn labels(&self, group: Group) -> Vec<String> {
        self.group(group).iter().map(|s| s.label().to_string()).collect()
    }

    fn push(&mut self, group: Group, sim: SimilarityMatrix) {
        match group {
            Group::UserUser => self.user_user.push(sim.symmetrized()),
            Group::ItemItem => self.item_item.push(sim.symmetrized()),
            Group::UserItem => self.user_item.push(sim),
        }
    }
}

/// Computes PathSim for every spec (in parallel, order preserved).
/// User-user and item-item matrices are symmetrized.
pub fn build_relation_set(
    graph: &HeteroGraph,
    specs: &[MetaPathSpec],
    variant: PathSimVariant,
) -> Result<RelationSet, MetaPathError> {
    let sims: Vec<Result<SimilarityMatrix, MetaPathError>> = specs
        .par_iter()
        .map(|spec| {
            let spec = MetaPathSpec::new(graph.schema(), spec.group, spec.path.clone())?;
            pathsim(&path_count(graph, &spec.path)?, variant)
        })
        .collect();
    let mut set = RelationSet::default();
    for (spec, sim) in specs.iter().zip(sims) {
        let sim = sim.map_err(|e| match spec.line {
            0 => e,
            line => MetaPathError::Spec {
                line,
                source: Box::new(e),
            },
        })?;
        set.push(spec.group, sim);
    }
    Ok(set)
}

/// As [`build_relation_set`], reading and refreshing the on-disk cache.
pub fn build_relation_set_cached(
    graph: &HeteroGraph,
    specs: &[MetaPathSpec],
    variant: PathSimVariant,
    cache: &SimilarityCache,
) -> Result<(RelationSet, Vec<CacheStatus>), MetaPathError> {
    let mut set = RelationSet::default();
    let mut statuses = Vec::with_capacity(specs.len());
    let hash = graph.content_hash();
    for spec in specs {
        let spec_checked = MetaPathSpec::new(graph.schema(), spec.group, spec.path.clone())?;
        let (sim, status) = cache
            .get_or_compute(graph, &hash, &spec_checked.path, variant)
            .map_err(|e| MetaPathError::Spec {
                line: spec.line,
                source: Box::new(e),
            })?;
        set.push(spec.group, sim);
        statuses.push(status);
    }
    Ok((set, statuses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphBuilder, Schema};
    use crate::presets;

    fn apa_graph(edges: &[(&str, &str)]) -> HeteroGraph {
        let mut b = GraphBuilder::new(Schema::parse(presets::DBLP_SCHEMA).unwrap());
        for a in ["a1", "a2", "a3"] {
            b.add_node(a, "Author").unwrap();
        }
        for p in ["p1", "p2", "p3"] {
            b.add_node(p, "Paper").unwrap();
        }
        for (a, p) in edges {
            b.add_edge(a, p, "writes", 1.0).unwrap();
        }
        b.build()
    }

    fn dblp() -> Schema {
        Schema::parse(presets::DBLP_SCHEMA).unwrap()
    }

    #[test]
    fn parse_and_display() {
        let s = dblp();
        let text = "Author -writes-> Paper -published_in-> Conf";
        let p = MetaPath::parse(&s, text).unwrap();
        assert_eq!(p.to_string(), text);
        assert_eq!(p.short_label(), "Author-Paper-Conf");
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn parse_rejects_incompatible_steps() {
        let s = dblp();
        assert!(MetaPath::parse(&s, "Author -published_in-> Conf").is_err());
        assert!(MetaPath::parse(&s, "Author -writes-> Conf").is_err());
        assert!(MetaPath::parse(&s, "Author").is_err());
        assert!(MetaPath::parse(&s, "Author =writes=> Paper").is_err());
        assert!(MetaPath::parse(&s, "Author -nope-> Paper").is_err());
    }

    #[test]
    fn reverse_examples() {
        let s = dblp();
        let apc = MetaPath::parse(&s, "Author -writes-> Paper -published_in-> Conf").unwrap();
        assert_eq!(apc.reverse().to_string(), "Conf <-published_in- Paper <-writes- Author");
        assert!(!apc.is_palindromic());
        let apa = MetaPath::parse(&s, "Author -writes-> Paper <-writes- Author").unwrap();
        assert_eq!(apa.reverse(), apa);
        assert!(apa.is_palindromic());
        let cppc = MetaPath::parse(&s, "Conf <-published_in- Paper -cites-> Paper -published_in-> Conf").unwrap();
        assert_eq!(cppc.reverse().types(), cppc.types());
        assert!(!cppc.is_palindromic());
    }

    #[test]
    fn shared_paper_counts() {
        let g = apa_graph(&[("a1", "p1"), ("a2", "p1")]);
        let p = MetaPath::parse(g.schema(), "Author -writes-> Paper <-writes- Author").unwrap();
        let pc = path_count(&g, &p).unwrap();
        assert_eq!(pc.counts.get(0, 1), 1.0);
        assert_eq!(pc.counts.get(0, 0), 1.0);
        assert_eq!(pc.counts.get(0, 2), 0.0);
    }

    #[test]
    fn no_edges_zero_counts() {
        let g = apa_graph(&[]);
        let p = MetaPath::parse(g.schema(), "Author -writes-> Paper <-writes- Author").unwrap();
        let pc = path_count(&g, &p).unwrap();
        assert_eq!(pc.counts.shape(), (3, 3));
        assert_eq!(pc.counts.nnz(), 0);
    }

    #[test]
    fn single_instance_similarity_is_one() {
        let g = apa_graph(&[("a1", "p1")]);
        let p = MetaPath::parse(g.schema(), "Author -writes-> Paper").unwrap();
        let sim = pathsim(&path_count(&g, &p).unwrap(), PathSimVariant::RowCol).unwrap();
        assert_eq!(sim.values().get(0, 0), 1.0);
        assert_eq!(sim.values().get(1, 0), 0.0);
    }

    #[test]
    fn diagonal_needs_palindrome() {
        let g = apa_graph(&[("a1", "p1")]);
        let p = MetaPath::parse(g.schema(), "Author -writes-> Paper").unwrap();
        let pc = path_count(&g, &p).unwrap();
        assert!(matches!(
            pathsim(&pc, PathSimVariant::Diagonal),
            Err(MetaPathError::NotPalindromic(_))
        ));
    }

    #[test]
    fn diagonal_self_similarity_is_one() {
        let g = apa_graph(&[("a1", "p1"), ("a2", "p1"), ("a1", "p2")]);
        let p = MetaPath::parse(g.schema(), "Author -writes-> Paper <-writes- Author").unwrap();
        let sim = pathsim(&path_count(&g, &p).unwrap(), PathSimVariant::Diagonal).unwrap();
        assert_eq!(sim.values().get(0, 0), 1.0);
        assert_eq!(sim.values().get(1, 1), 1.0);
        // PC(a1,a2)=1, PC(a1,a1)=2, PC(a2,a2)=1
        assert!((sim.values().get(0, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn spec_file_groups_and_errors() {
        let s = dblp();
        let specs = parse_specs(&s, presets::DBLP_METAPATHS).unwrap();
        let count = |g| specs.iter().filter(|x| x.group == g).count();
        assert_eq!(count(Group::UserUser), 3);
        assert_eq!(count(Group::ItemItem), 3);
        assert_eq!(count(Group::UserItem), 2);

        let err = parse_specs(&s, "# c\nUU: Author -writes-> Paper\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(parse_specs(&s, "XX: Author -writes-> Paper <-writes- Author\n").is_err());
        assert!(parse_specs(&s, "Author -writes-> Paper\n").is_err());
    }

    #[test]
    fn empty_specs_give_empty_set() {
        let g = apa_graph(&[]);
        let set = build_relation_set(&g, &[], PathSimVariant::RowCol).unwrap();
        assert_eq!(set.counts(), (0, 0, 0));
    }

    #[test]
    fn relation_set_symmetrizes_intra_type_paths() {
        let schema = dblp();
        let mut b = GraphBuilder::new(schema.clone());
        for (id, t) in [("p1", "Paper"), ("p2", "Paper"), ("c1", "Conf"), ("c2", "Conf")] {
            b.add_node(id, t).unwrap();
        }
        b.add_edge("p1", "c1", "published_in", 1.0).unwrap();
        b.add_edge("p2", "c2", "published_in", 1.0).unwrap();
        b.add_edge("p1", "p2", "cites", 1.0).unwrap();
        let g = b.build();
        let path = MetaPath::parse(
            &schema,
            "Conf <-published_in- Paper -cites-> Paper -published_in-> Conf",
        )
        .unwrap();
        let raw = pathsim(&path_count(&g, &path).unwrap(), PathSimVariant::RowCol).unwrap();
        assert!(raw.values().max_asymmetry() > 0.0);
        let spec = MetaPathSpec::new(&schema, Group::ItemItem, path).unwrap();
        let set = build_relation_set(&g, &[spec], PathSimVariant::RowCol).unwrap();
        assert_eq!(set.item_item[0].values().max_asymmetry(), 0.0);
        assert_eq!(set.item_item[0].values().get(0, 1), 0.5);
    }
}
