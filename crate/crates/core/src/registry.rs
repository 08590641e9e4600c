//! Semantic type registry and the type-to-group mapping.
//!
//! The registry is loaded from a tab-separated table
//! (`sty_code  sty_name  sgr_code  sgr_name`, `#` comments) so deployments can
//! edit it without recompiling. A copy of the public UMLS table ships with the
//! crate, see [`Registry::builtin`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Type code of the annotation-only "Abbreviation" type.
pub const ABBREVIATION: &str = "abbr";
/// Type code of the annotation-only "Negation" type.
pub const NEGATION: &str = "negt";
/// Group code reserved for [`ABBREVIATION`] and [`NEGATION`].
pub const NO_GROUP: &str = "NA";
const NO_GROUP_NAME: &str = "N/A";

const BUILTIN_TABLE: &str = include_str!("../data/semantic_types.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("no semantic types")]
    Empty,
    #[error("line {line}: expected 4 tab-separated columns, found {found}")]
    Columns { line: usize, found: usize },
    #[error("line {line}: duplicate semantic type code `{code}`")]
    DuplicateType { line: usize, code: String },
    #[error("line {line}: semantic type `{code}` has no group")]
    MissingGroup { line: usize, code: String },
    #[error("line {line}: empty or malformed semantic type code `{code}`")]
    BadCode { line: usize, code: String },
    #[error("line {line}: group `{code}` is named both `{first}` and `{second}`")]
    GroupNameConflict {
        line: usize,
        code: String,
        first: String,
        second: String,
    },
    #[error("`{code}` must belong to group {NO_GROUP}, found `{group}`")]
    ReservedType { code: String, group: String },
    #[error("unknown semantic type `{0}`")]
    UnknownType(String),
    #[error("failed to read registry: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticGroup {
    pub code: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticType {
    pub code: String,
    pub name: String,
    /// Code of the owning [`SemanticGroup`].
    pub group: String,
}

/// Immutable set of semantic types keyed by code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    types: BTreeMap<String, SemanticType>,
    groups: BTreeMap<String, SemanticGroup>,
}

impl Registry {
    /// The registry shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TABLE).expect("builtin registry table is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| RegistryError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let mut types = BTreeMap::new();
        let mut groups: BTreeMap<String, SemanticGroup> = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
            if cols.len() < 3 || cols.len() > 4 {
                return Err(RegistryError::Columns {
                    line,
                    found: cols.len(),
                });
            }
            let (code, name, group_code) = (cols[0], cols[1], cols[2]);
            let group_name = cols.get(3).copied().unwrap_or("");
            if code.is_empty() || code.chars().any(char::is_whitespace) {
                return Err(RegistryError::BadCode {
                    line,
                    code: code.to_string(),
                });
            }
            if group_code.is_empty() {
                return Err(RegistryError::MissingGroup {
                    line,
                    code: code.to_string(),
                });
            }
            if types.contains_key(code) {
                return Err(RegistryError::DuplicateType {
                    line,
                    code: code.to_string(),
                });
            }
            let group_name = if group_name.is_empty() { group_code } else { group_name };
            match groups.get(group_code) {
                Some(existing) if existing.name != group_name => {
                    return Err(RegistryError::GroupNameConflict {
                        line,
                        code: group_code.to_string(),
                        first: existing.name.clone(),
                        second: group_name.to_string(),
                    })
                }
                Some(_) => {}
                None => {
                    groups.insert(
                        group_code.to_string(),
                        SemanticGroup {
                            code: group_code.to_string(),
                            name: group_name.to_string(),
                        },
                    );
                }
            }
            types.insert(
                code.to_string(),
                SemanticType {
                    code: code.to_string(),
                    name: name.to_string(),
                    group: group_code.to_string(),
                },
            );
        }

        if types.is_empty() {
            return Err(RegistryError::Empty);
        }

        groups.entry(NO_GROUP.to_string()).or_insert_with(|| SemanticGroup {
            code: NO_GROUP.to_string(),
            name: NO_GROUP_NAME.to_string(),
        });
        for (code, name) in [(ABBREVIATION, "Abbreviation"), (NEGATION, "Negation")] {
            match types.get(code) {
                Some(sty) if sty.group != NO_GROUP => {
                    return Err(RegistryError::ReservedType {
                        code: code.to_string(),
                        group: sty.group.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    types.insert(
                        code.to_string(),
                        SemanticType {
                            code: code.to_string(),
                            name: name.to_string(),
                            group: NO_GROUP.to_string(),
                        },
                    );
                }
            }
        }

        Ok(Self { types, groups })
    }

    pub fn get(&self, code: &str) -> Option<&SemanticType> {
        self.types.get(code)
    }

    pub fn contains(&self, code: &str) -> bool {
        self.types.contains_key(code)
    }

    /// Looks a type up by display name, e.g. "Sign or Symptom".
    pub fn by_name(&self, name: &str) -> Option<&SemanticType> {
        self.types.values().find(|t| t.name == name)
    }

    pub fn group(&self, code: &str) -> Option<&SemanticGroup> {
        self.groups.get(code)
    }

    pub fn sty_to_sgr(&self, sty: &str) -> Result<&SemanticGroup, RegistryError> {
        let ty = self
            .types
            .get(sty)
            .ok_or_else(|| RegistryError::UnknownType(sty.to_string()))?;
        Ok(&self.groups[&ty.group])
    }

    pub fn types(&self) -> impl Iterator<Item = &SemanticType> {
        self.types.values()
    }

    pub fn groups(&self) -> impl Iterator<Item = &SemanticGroup> {
        self.groups.values()
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}
