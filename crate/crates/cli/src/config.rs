//! TOML run configuration. Every field is optional; command-line flags take
//! precedence over the file. Relative paths in the file are resolved against
//! the file's directory.
//!
//! ```toml
//! [data]
//! preset = "dblp"            # built-in schema, meta-paths and target
//! schema = "schema.txt"
//! nodes = "nodes.tsv"
//! edges = "edges.tsv"
//! metapaths = "metapaths.txt"
//! target = "Author -writes-> Paper -published_in-> Conf"
//! variant = "rowcol"
//! cache_dir = "cache"
//!
//! [train]
//! lambda = 0.001
//! mu = 0.5
//! dim = 10
//! seed = 42
//! optimizer = "full-batch"
//!
//! [evaluate]
//! methods = ["nmf", "hete-cf"]
//! fractions = [0.4, 0.6]
//! dims = [5, 10]
//! trials = 10
//!
//! [benchmark]
//! d_values = [5, 10, 20, 40]
//! size_multipliers = [1, 2, 3, 4]
//! repeats = 3
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub benchmark: BenchmarkSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub preset: Option<String>,
    pub schema: Option<PathBuf>,
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub metapaths: Option<PathBuf>,
    pub target: Option<String>,
    pub variant: Option<String>,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub learn_rate: Option<f64>,
    pub inner_tol: Option<f64>,
    pub outer_tol: Option<f64>,
    pub max_inner: Option<usize>,
    pub max_outer: Option<usize>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    pub optimizer: Option<String>,
    pub weight_constraint: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub methods: Option<Vec<String>>,
    pub fractions: Option<Vec<f64>>,
    pub dims: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub parallel: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub d_values: Option<Vec<usize>>,
    pub size_multipliers: Option<Vec<usize>>,
    pub size_sweep_d: Option<usize>,
    pub repeats: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut config: FileConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let d = &mut config.data;
        for p in [
            &mut d.schema,
            &mut d.nodes,
            &mut d.edges,
            &mut d.metapaths,
            &mut d.cache_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_resolve_against_file_directory() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.toml");
        std::fs::write(
            &file,
            "[data]\nnodes = \"n.tsv\"\nedges = \"/abs/e.tsv\"\n[train]\ndim = 3\n",
        )
        .unwrap();
        let c = FileConfig::load(&file).unwrap();
        assert_eq!(c.data.nodes.unwrap(), dir.path().join("n.tsv"));
        assert_eq!(c.data.edges.unwrap(), PathBuf::from("/abs/e.tsv"));
        assert_eq!(c.train.dim, Some(3));
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.toml");
        std::fs::write(&file, "[train]\nlamda = 0.1\n").unwrap();
        let err = FileConfig::load(&file).unwrap_err();
        assert!(err.contains("lamda"), "{err}");
    }
}
