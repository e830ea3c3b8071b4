//! On-disk cache of PathSim matrices keyed by graph hash, meta-path and
//! variant.
//!
//! File layout (one file per key):
//!
//! ```text
//! # hetecf-similarity 1
//! # path: Author -writes-> Paper <-writes- Author
//! # variant: rowcol
//! # graph: <sha256 hex>
//! # shape: <rows> <cols>
//! <row>\t<col>\t<value>
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;
use sha2::{Digest, Sha256};

use super::{path_count, pathsim, MetaPath, MetaPathError, PathSimVariant, SimilarityMatrix};
use crate::atomic::write_atomic;
use crate::graph::HeteroGraph;
use crate::sparse::CsrMatrix;

const MAGIC: &str = "# hetecf-similarity 1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheStatus {
    /// Loaded from an up-to-date cache file.
    Hit(PathBuf),
    /// No cache file existed; computed and written.
    Computed(PathBuf),
    /// A cache file existed but was unreadable; recomputed and rewritten.
    Recomputed { path: PathBuf, reason: String },
}

#[derive(Debug, Clone)]
pub struct SimilarityCache {
    dir: PathBuf,
}

impl SimilarityCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file_for(&self, graph_hash: &str, path: &MetaPath, variant: PathSimVariant) -> PathBuf {
        let mut h = Sha256::new();
        h.update(graph_hash.as_bytes());
        h.update(b"\n");
        h.update(path.to_string().as_bytes());
        h.update(b"\n");
        h.update(variant.as_str().as_bytes());
        let key = hex::encode(h.finalize());
        self.dir.join(format!("sim-{}.tsv", &key[..16]))
    }

    pub fn get_or_compute(
        &self,
        graph: &HeteroGraph,
        graph_hash: &str,
        path: &MetaPath,
        variant: PathSimVariant,
    ) -> Result<(SimilarityMatrix, CacheStatus), MetaPathError> {
        let file = self.file_for(graph_hash, path, variant);
        let mut stale = None;
        if file.exists() {
            match read_cache(&file, graph_hash, path, variant) {
                Ok(sim) => return Ok((sim, CacheStatus::Hit(file))),
                Err(reason) => {
                    warn!("recomputing similarity cache {}: {reason}", file.display());
                    stale = Some(reason);
                }
            }
        }
        let sim = pathsim(&path_count(graph, path)?, variant)?;
        std::fs::create_dir_all(&self.dir).map_err(|e| MetaPathError::Cache {
            path: self.dir.display().to_string(),
            message: e.to_string(),
        })?;
        write_atomic(&file, render(&sim, graph_hash).as_bytes()).map_err(|e| MetaPathError::Cache {
            path: file.display().to_string(),
            message: e.to_string(),
        })?;
        let status = match stale {
            None => CacheStatus::Computed(file),
            Some(reason) => CacheStatus::Recomputed { path: file, reason },
        };
        Ok((sim, status))
    }
}

fn render(sim: &SimilarityMatrix, graph_hash: &str) -> String {
    let v = sim.values();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "# path: {}", sim.label());
    let _ = writeln!(out, "# variant: {}", sim.variant());
    let _ = writeln!(out, "# graph: {graph_hash}");
    let _ = writeln!(out, "# shape: {} {}", v.nrows(), v.ncols());
    for (r, c, x) in v.iter() {
        let _ = writeln!(out, "{r}\t{c}\t{x}");
    }
    out
}

fn read_cache(
    file: &Path,
    graph_hash: &str,
    path: &MetaPath,
    variant: PathSimVariant,
) -> Result<SimilarityMatrix, String> {
    let text = std::fs::read_to_string(file).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let mut header = |key: &str| -> Result<String, String> {
        let line = lines.next().ok_or("truncated header")?;
        if key.is_empty() {
            return if line == MAGIC {
                Ok(String::new())
            } else {
                Err(format!("bad magic line {line:?}"))
            };
        }
        line.strip_prefix(&format!("# {key}: "))
            .map(str::to_string)
            .ok_or_else(|| format!("expected `# {key}:` header, got {line:?}"))
    };
    header("")?;
    let label = path.to_string();
    if header("path")? != label {
        return Err("meta-path mismatch".into());
    }
    if header("variant")? != variant.as_str() {
        return Err("variant mismatch".into());
    }
    if header("graph")? != graph_hash {
        return Err("graph hash mismatch".into());
    }
    let shape = header("shape")?;
    let (rows, cols) = shape
        .split_once(' ')
        .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
        .ok_or_else(|| format!("bad shape {shape:?}"))?;
    let mut triplets = Vec::new();
    for line in lines {
        let mut f = line.split('\t');
        let parsed = (|| {
            let r: usize = f.next()?.parse().ok()?;
            let c: usize = f.next()?.parse().ok()?;
            let v: f64 = f.next()?.parse().ok()?;
            if f.next().is_some() || r >= rows || c >= cols || !(0.0..=1.0).contains(&v) {
                return None;
            }
            Some((r, c, v))
        })();
        triplets.push(parsed.ok_or_else(|| format!("bad entry {line:?}"))?);
    }
    Ok(SimilarityMatrix::new(
        label,
        variant,
        CsrMatrix::from_triplets(rows, cols, &triplets),
    ))
}
