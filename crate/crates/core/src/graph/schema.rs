use std::collections::HashSet;
use std::fmt;

use super::GraphError;

/// A typed relation between two node types. Same-type relations (for
/// example a user friendship relation) are allowed when declared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationType {
    pub name: String,
    pub source: usize,
    pub target: usize,
}

/// Declared node types and relations of a heterogeneous network, with one
/// type flagged as the user type and one as the item type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    node_types: Vec<String>,
    relations: Vec<RelationType>,
    user_type: usize,
    item_type: usize,
}

impl Schema {
    /// Validates and builds a schema. Relations are given as
    /// `(name, source type name, target type name)`.
    pub fn new(
        node_types: Vec<String>,
        user_type: &str,
        item_type: &str,
        relations: &[(&str, &str, &str)],
    ) -> Result<Self, GraphError> {
        let mut seen = HashSet::new();
        for t in &node_types {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(GraphError::Schema(format!("invalid node type name {t:?}")));
            }
            if !seen.insert(t.as_str()) {
                return Err(GraphError::Schema(format!("node type {t:?} declared twice")));
            }
        }
        if node_types.len() < 2 {
            return Err(GraphError::Schema(format!(
                "a heterogeneous network needs at least 2 node types, got {}",
                node_types.len()
            )));
        }
        let find = |name: &str| node_types.iter().position(|t| t == name);
        let user =
            find(user_type).ok_or_else(|| GraphError::Schema(format!("user type {user_type:?} is not declared")))?;
        let item =
            find(item_type).ok_or_else(|| GraphError::Schema(format!("item type {item_type:?} is not declared")))?;
        if user == item {
            return Err(GraphError::Schema(format!(
                "user and item type must differ, both are {user_type:?}"
            )));
        }

        let mut names = HashSet::new();
        let mut rels = Vec::with_capacity(relations.len());
        for &(name, src, dst) in relations {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(GraphError::Schema(format!("invalid relation name {name:?}")));
            }
            if !names.insert(name) {
                return Err(GraphError::Schema(format!("relation {name:?} declared twice")));
            }
            let source = find(src)
                .ok_or_else(|| GraphError::Schema(format!("relation {name:?} references undeclared type {src:?}")))?;
            let target = find(dst)
                .ok_or_else(|| GraphError::Schema(format!("relation {name:?} references undeclared type {dst:?}")))?;
            rels.push(RelationType {
                name: name.to_string(),
                source,
                target,
            });
        }
        Ok(Self {
            node_types,
            relations: rels,
            user_type: user,
            item_type: item,
        })
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn relations(&self) -> &[RelationType] {
        &self.relations
    }

    pub fn user_type(&self) -> usize {
        self.user_type
    }

    pub fn item_type(&self) -> usize {
        self.item_type
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|t| t == name)
    }

    pub fn type_name(&self, index: usize) -> &str {
        &self.node_types[index]
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn relation(&self, name: &str) -> Option<&RelationType> {
        self.relations.iter().find(|r| r.name == name)
    }

    /// Parses the schema file grammar:
    ///
    /// ```text
    /// # comment
    /// type Author user
    /// type Paper
    /// type Conf item
    /// relation writes Author Paper
    /// ```
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut types = Vec::new();
        let mut user = None;
        let mut item = None;
        let mut relations: Vec<(String, String, String)> = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: String| GraphError::Parse {
                file: "schema".into(),
                line: line_no,
                message: msg,
            };
            match fields.as_slice() {
                ["type", name] => types.push(name.to_string()),
                ["type", name, flag] => {
                    let slot = match *flag {
                        "user" => &mut user,
                        "item" => &mut item,
                        other => return Err(bad(format!("unknown type flag {other:?}"))),
                    };
                    if slot.is_some() {
                        return Err(bad(format!("more than one type flagged {flag:?}")));
                    }
                    *slot = Some(name.to_string());
                    types.push(name.to_string());
                }
                ["relation", name, src, dst] => relations.push((name.to_string(), src.to_string(), dst.to_string())),
                _ => return Err(bad(format!("unrecognised schema line {line:?}"))),
            }
        }
        let user = user.ok_or_else(|| GraphError::Schema("no type flagged as user".into()))?;
        let item = item.ok_or_else(|| GraphError::Schema("no type flagged as item".into()))?;
        let rel_refs: Vec<(&str, &str, &str)> = relations
            .iter()
            .map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str()))
            .collect();
        Schema::new(types, &user, &item, &rel_refs)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.node_types.iter().enumerate() {
            if i == self.user_type {
                writeln!(f, "type {t} user")?;
            } else if i == self.item_type {
                writeln!(f, "type {t} item")?;
            } else {
                writeln!(f, "type {t}")?;
            }
        }
        for r in &self.relations {
            writeln!(
                f,
                "relation {} {} {}",
                r.name, self.node_types[r.source], self.node_types[r.target]
            )?;
        }
        Ok(())
    }
}
