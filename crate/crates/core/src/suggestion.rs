//! Annotation assistant: proposes semantic types for a selected span from
//! earlier annotations and from a terminology. Suggestions are never written
//! back as annotations.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{char_len, char_slice, Annotation, ModelError, Span};
use crate::registry::{Registry, RegistryError};

#[derive(Debug, Error)]
pub enum SuggestionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("selection must cover 1 to {max} tokens, got {got}")]
    Selection { got: usize, max: usize },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("terminology provider unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Error)]
pub enum TerminologyError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("cannot read terminology file: {0}")]
    Io(#[from] std::io::Error),
}

/// Case-folds and collapses runs of whitespace to one space.
pub fn normalize(s: &str) -> String {
    s.split_whitespace()
        .map(|t| t.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Levenshtein distance over code points, or `None` once it exceeds `bound`.
pub fn bounded_levenshtein(a: &str, b: &str, bound: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.len().abs_diff(b.len()) > bound {
        return None;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
            row_min = row_min.min(cur[j + 1]);
        }
        if row_min > bound {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= bound).then_some(d)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminologyEntry {
    pub term: String,
    pub types: BTreeSet<String>,
}

pub trait TerminologyProvider: Send + Sync {
    /// Entries whose normalized term is within `max_distance` edits of
    /// `normalized`. Providers may return extra candidates; callers re-check.
    fn lookup(&self, normalized: &str, max_distance: usize) -> Result<Vec<TerminologyEntry>, ProviderError>;
}

/// Terminology loaded from a `term<TAB>sty[,sty...]` file.
#[derive(Debug, Clone, Default)]
pub struct FileTerminology {
    entries: Vec<TerminologyEntry>,
    exact: HashMap<String, usize>,
}

impl FileTerminology {
    pub fn load(path: &Path, registry: &Registry) -> Result<Self, TerminologyError> {
        Self::parse(&std::fs::read_to_string(path)?, registry)
    }

    pub fn parse(text: &str, registry: &Registry) -> Result<Self, TerminologyError> {
        let mut merged: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: &str| TerminologyError::Line {
                line: i + 1,
                message: message.to_string(),
            };
            let (term, types) = line.split_once('\t').ok_or_else(|| err("expected term<TAB>types"))?;
            let term = normalize(term);
            if term.is_empty() {
                return Err(err("empty term"));
            }
            let types: BTreeSet<String> = types
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect();
            if types.is_empty() {
                return Err(err("no semantic types"));
            }
            for t in &types {
                if !registry.contains(t) {
                    return Err(RegistryError::UnknownType(t.clone()).into());
                }
            }
            merged.entry(term).or_default().extend(types);
        }
        Ok(Self::from_entries(
            merged.into_iter().map(|(term, types)| TerminologyEntry { term, types }),
        ))
    }

    pub fn from_entries(entries: impl IntoIterator<Item = TerminologyEntry>) -> Self {
        let entries: Vec<_> = entries.into_iter().collect();
        let exact = entries.iter().enumerate().map(|(i, e)| (e.term.clone(), i)).collect();
        FileTerminology { entries, exact }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl TerminologyProvider for FileTerminology {
    fn lookup(&self, normalized: &str, max_distance: usize) -> Result<Vec<TerminologyEntry>, ProviderError> {
        if max_distance == 0 {
            return Ok(self
                .exact
                .get(normalized)
                .map(|&i| self.entries[i].clone())
                .into_iter()
                .collect());
        }
        Ok(self
            .entries
            .iter()
            .filter(|e| bounded_levenshtein(normalized, &e.term, max_distance).is_some())
            .cloned()
            .collect())
    }
}

/// Accepted (surface, types) pairs, counted per annotation round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HistoryIndex {
    counts: BTreeMap<String, BTreeMap<BTreeSet<String>, BTreeMap<u32, u64>>>,
}

impl HistoryIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts one saved annotation under its normalized surface.
    pub fn record_acceptance(&mut self, surface: &str, annotation: &Annotation) {
        let key = normalize(surface);
        if key.is_empty() {
            return;
        }
        *self
            .counts
            .entry(key)
            .or_default()
            .entry(annotation.types.clone())
            .or_default()
            .entry(annotation.created_round)
            .or_default() += 1;
    }

    /// Type sets seen for `normalized`, ignoring rounds before `since_round`.
    pub fn frequencies(&self, normalized: &str, since_round: Option<u32>) -> Vec<(BTreeSet<String>, u64)> {
        let Some(by_types) = self.counts.get(normalized) else {
            return Vec::new();
        };
        by_types
            .iter()
            .map(|(types, rounds)| {
                let n = rounds.range(since_round.unwrap_or(0)..).map(|(_, c)| c).sum();
                (types.clone(), n)
            })
            .filter(|(_, n)| *n > 0)
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Copy holding only the entries for `normalized`.
    pub fn subset(&self, normalized: &str) -> HistoryIndex {
        HistoryIndex {
            counts: self
                .counts
                .get_key_value(normalized)
                .map(|(k, v)| (k.clone(), v.clone()))
                .into_iter()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionSource {
    History,
    TerminologyExact,
    TerminologyFuzzy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub span: Span,
    pub types: BTreeSet<String>,
    pub source: SuggestionSource,
    /// History: acceptance count. Exact: 1. Fuzzy: `1 / (1 + distance)`.
    pub score: f64,
    pub term: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<usize>,
}

impl Suggestion {
    fn rank(&self, other: &Suggestion) -> Ordering {
        self.source
            .cmp(&other.source)
            .then_with(|| other.score.total_cmp(&self.score))
            .then_with(|| self.types.iter().cmp(other.types.iter()))
            .then_with(|| self.term.cmp(&other.term))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestConfig {
    pub max_tokens: usize,
    /// Terms up to this many characters get `short_bound`, longer ones `long_bound`.
    pub short_term_chars: usize,
    pub short_bound: usize,
    pub long_bound: usize,
    /// History from rounds before this one is ignored.
    pub stale_after_round: Option<u32>,
}

impl Default for SuggestConfig {
    fn default() -> Self {
        SuggestConfig {
            max_tokens: 6,
            short_term_chars: 6,
            short_bound: 1,
            long_bound: 2,
            stale_after_round: None,
        }
    }
}

impl SuggestConfig {
    pub fn fuzzy_bound(&self, normalized: &str) -> usize {
        if normalized.chars().count() <= self.short_term_chars {
            self.short_bound
        } else {
            self.long_bound
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuggestionResult {
    pub suggestions: Vec<Suggestion>,
    pub provider_unavailable: bool,
}

/// Ranked suggestions for the text under `span`. Ordering is history, then
/// exact terminology hits, then fuzzy ones; within a source by score
/// descending and type codes ascending.
pub fn suggest(
    text: &str,
    span: Span,
    history: &HistoryIndex,
    provider: Option<&dyn TerminologyProvider>,
    config: &SuggestConfig,
) -> Result<SuggestionResult, SuggestionError> {
    span.check_within(char_len(text))?;
    let selected = char_slice(text, span).expect("span checked");
    let tokens = selected.split_whitespace().count();
    if tokens == 0 || tokens > config.max_tokens {
        return Err(SuggestionError::Selection {
            got: tokens,
            max: config.max_tokens,
        });
    }
    let norm = normalize(selected);

    let mut out = Vec::new();
    for (types, n) in history.frequencies(&norm, config.stale_after_round) {
        out.push(Suggestion {
            span,
            types,
            source: SuggestionSource::History,
            score: n as f64,
            term: norm.clone(),
            distance: None,
        });
    }

    let mut provider_unavailable = false;
    if let Some(p) = provider {
        let bound = config.fuzzy_bound(&norm);
        match p.lookup(&norm, bound) {
            Ok(entries) => {
                for e in entries {
                    let term = normalize(&e.term);
                    if e.types.is_empty() {
                        continue;
                    }
                    let Some(d) = bounded_levenshtein(&norm, &term, bound) else {
                        continue;
                    };
                    let source = if d == 0 {
                        SuggestionSource::TerminologyExact
                    } else {
                        SuggestionSource::TerminologyFuzzy
                    };
                    out.push(Suggestion {
                        span,
                        types: e.types,
                        source,
                        score: 1.0 / (1.0 + d as f64),
                        term,
                        distance: (d > 0).then_some(d),
                    });
                }
            }
            Err(_) => provider_unavailable = true,
        }
    } else {
        provider_unavailable = true;
    }

    out.sort_by(|a, b| a.rank(b));
    // one suggestion per type set and source, keeping the best ranked
    let mut seen = BTreeSet::new();
    out.retain(|s| seen.insert((s.source, s.types.clone())));
    Ok(SuggestionResult {
        suggestions: out,
        provider_unavailable,
    })
}
