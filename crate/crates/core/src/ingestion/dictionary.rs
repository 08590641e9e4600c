use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GoldRecord, IngestionError};
use crate::registry::{ABBREVIATION, NEGATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryKind {
    NegationCue,
    Abbreviation,
}

impl DictionaryKind {
    fn type_code(self) -> &'static str {
        match self {
            DictionaryKind::NegationCue => NEGATION,
            DictionaryKind::Abbreviation => ABBREVIATION,
        }
    }
}

impl fmt::Display for DictionaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DictionaryKind::NegationCue => "negation",
            DictionaryKind::Abbreviation => "abbreviation",
        })
    }
}

impl FromStr for DictionaryKind {
    type Err = IngestionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negation" | "negation_cue" => Ok(DictionaryKind::NegationCue),
            "abbreviation" => Ok(DictionaryKind::Abbreviation),
            other => Err(IngestionError::Malformed(format!("unknown dictionary `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub surface: String,
    pub kind: DictionaryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<String>,
    pub frequency: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dictionaries {
    pub negation: Vec<DictionaryEntry>,
    pub abbreviation: Vec<DictionaryEntry>,
    pub warnings: Vec<String>,
}

impl Dictionaries {
    pub fn get(&self, kind: DictionaryKind) -> &[DictionaryEntry] {
        match kind {
            DictionaryKind::NegationCue => &self.negation,
            DictionaryKind::Abbreviation => &self.abbreviation,
        }
    }
}

#[derive(Default)]
struct Counts {
    total: usize,
    forms: BTreeMap<String, usize>,
    expansions: BTreeMap<String, usize>,
}

/// Most frequent key, ties to the lexicographically smallest.
fn most_frequent(counts: &BTreeMap<String, usize>) -> Option<String> {
    counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(k, _)| k.clone())
}

fn collect(corpus: &[GoldRecord], kind: DictionaryKind) -> Vec<DictionaryEntry> {
    let mut by_key: BTreeMap<String, Counts> = BTreeMap::new();
    for ann in corpus
        .iter()
        .flat_map(|r| &r.annotations)
        .filter(|a| a.types.iter().any(|t| t == kind.type_code()))
    {
        let c = by_key.entry(ann.surface.to_lowercase()).or_default();
        c.total += 1;
        *c.forms.entry(ann.surface.clone()).or_default() += 1;
        if kind == DictionaryKind::Abbreviation {
            if let Some(exp) = ann.expansion.as_ref().filter(|e| !e.trim().is_empty()) {
                *c.expansions.entry(exp.clone()).or_default() += 1;
            }
        }
    }
    let mut entries: Vec<(String, DictionaryEntry)> = by_key
        .into_iter()
        .map(|(key, c)| {
            let entry = DictionaryEntry {
                surface: most_frequent(&c.forms).expect("counted at least once"),
                kind,
                expansion: most_frequent(&c.expansions),
                frequency: c.total,
            };
            (key, entry)
        })
        .collect();
    entries.sort_by(|a, b| b.1.frequency.cmp(&a.1.frequency).then_with(|| a.0.cmp(&b.0)));
    entries.into_iter().map(|(_, e)| e).collect()
}

/// Negation-cue and abbreviation dictionaries over a set of gold documents.
/// Surfaces are counted case-insensitively.
pub fn extract_dictionaries(corpus: &[GoldRecord]) -> Dictionaries {
    let mut warnings = Vec::new();
    if corpus.is_empty() {
        warnings.push("empty corpus: no gold documents to extract from".to_string());
    }
    Dictionaries {
        negation: collect(corpus, DictionaryKind::NegationCue),
        abbreviation: collect(corpus, DictionaryKind::Abbreviation),
        warnings,
    }
}

/// `surface<TAB>frequency<TAB>expansion` lines; the last column is empty when
/// there is no expansion.
pub fn dictionary_tsv(entries: &[DictionaryEntry]) -> String {
    let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
    entries
        .iter()
        .map(|e| {
            format!(
                "{}\t{}\t{}\n",
                clean(&e.surface),
                e.frequency,
                e.expansion.as_deref().map(clean).unwrap_or_default()
            )
        })
        .collect()
}
