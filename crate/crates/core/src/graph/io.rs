//! Tab-separated node/edge files plus the line-oriented schema file.
//!
//! ```text
//! nodes:  <node_id>\t<node_type>
//! edges:  <src_id>\t<dst_id>\t<relation>[\t<weight>]
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. A missing weight
//! means 1.0.

use std::fmt::Write as _;
use std::path::Path;

use super::{GraphBuilder, GraphError, HeteroGraph, Schema};
use crate::atomic::write_atomic;

fn read(path: &Path) -> Result<String, GraphError> {
    std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
}

/// Loads and validates a graph from its three files.
pub fn load_graph(nodes_path: &Path, edges_path: &Path, schema_path: &Path) -> Result<HeteroGraph, GraphError> {
    let schema_text = read(schema_path)?;
    let nodes_text = read(nodes_path)?;
    let edges_text = read(edges_path)?;
    let schema = Schema::parse(&schema_text).map_err(|e| match e {
        GraphError::Parse { line, message, .. } => GraphError::Parse {
            file: schema_path.display().to_string(),
            line,
            message,
        },
        other => other,
    })?;
    parse_graph(
        schema,
        &nodes_text,
        &edges_text,
        &nodes_path.display().to_string(),
        &edges_path.display().to_string(),
    )
}

/// Builds a graph from in-memory file contents; `nodes_name` and
/// `edges_name` label error messages.
pub fn parse_graph(
    schema: Schema,
    nodes: &str,
    edges: &str,
    nodes_name: &str,
    edges_name: &str,
) -> Result<HeteroGraph, GraphError> {
    let mut builder = GraphBuilder::new(schema);
    for (line, rec) in records(nodes) {
        let fields: Vec<&str> = rec.split('\t').collect();
        match fields.as_slice() {
            [id, ty] => {
                builder
                    .add_node(id.trim(), ty.trim())
                    .map_err(|e| e.at(nodes_name, line))?;
            }
            _ => {
                return Err(GraphError::Parse {
                    file: nodes_name.to_string(),
                    line,
                    message: format!("expected `<node_id>\\t<node_type>`, got {rec:?}"),
                })
            }
        }
    }
    for (line, rec) in records(edges) {
        let fields: Vec<&str> = rec.split('\t').map(str::trim).collect();
        let (src, dst, rel, weight) = match fields.as_slice() {
            [s, d, r] => (*s, *d, *r, 1.0),
            [s, d, r, w] => {
                let w: f64 = w.parse().map_err(|_| GraphError::Parse {
                    file: edges_name.to_string(),
                    line,
                    message: format!("invalid weight {w:?}"),
                })?;
                (*s, *d, *r, w)
            }
            _ => {
                return Err(GraphError::Parse {
                    file: edges_name.to_string(),
                    line,
                    message: format!("expected `<src>\\t<dst>\\t<relation>[\\t<weight>]`, got {rec:?}"),
                })
            }
        };
        builder
            .add_edge(src, dst, rel, weight)
            .map_err(|e| e.at(edges_name, line))?;
    }
    Ok(builder.build())
}

/// Writes the graph back out in the ingestion format. Node order is
/// preserved so reloading reproduces the same indices.
pub fn save_graph(
    graph: &HeteroGraph,
    nodes_path: &Path,
    edges_path: &Path,
    schema_path: &Path,
) -> Result<(), GraphError> {
    let schema = graph.schema();
    let mut nodes = String::new();
    for (t, name) in schema.node_types().iter().enumerate() {
        for id in graph.node_ids(t) {
            let _ = writeln!(nodes, "{id}\t{name}");
        }
    }
    let mut edges = String::new();
    for (r, rel) in schema.relations().iter().enumerate() {
        let src_ids = graph.node_ids(rel.source);
        let dst_ids = graph.node_ids(rel.target);
        for (s, d, w) in graph.relation_matrix(r).iter() {
            if w == 1.0 {
                let _ = writeln!(edges, "{}\t{}\t{}", src_ids[s], dst_ids[d], rel.name);
            } else {
                let _ = writeln!(edges, "{}\t{}\t{}\t{}", src_ids[s], dst_ids[d], rel.name, w);
            }
        }
    }
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GraphError::Io { path, source }
    };
    write_atomic(schema_path, schema.to_string().as_bytes()).map_err(io_err(schema_path))?;
    write_atomic(nodes_path, nodes.as_bytes()).map_err(io_err(nodes_path))?;
    write_atomic(edges_path, edges.as_bytes()).map_err(io_err(edges_path))?;
    Ok(())
}
