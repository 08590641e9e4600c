//! Observed inter-annotator agreement.
//!
//! `IAA = matches / (matches + non_matches)` where a full pair counts as one
//! match, a half pair (overlapping spans) as half a match and half a
//! non-match, and every unpaired annotation as one non-match. Agreement over
//! two empty sets is undefined (`None`), never 1.0.

mod pairing;
mod relations;
mod report;
mod strength;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Annotation, DocumentId};
use crate::registry::{Registry, RegistryError};

pub(crate) use pairing::order_key;
pub use pairing::{common_document, pair_annotations, PairKind, PairingResult};
pub use relations::{relation_iaa, relation_iaa_for_type};
pub use report::{aggregate, compare_documents, Aggregate, CorpusAgreement, DocumentAgreement, Score, VariantScores};
pub use strength::{segment, strength_label, AgreementBand, Reliability, SegmentLabel, Segmentation, Strength};

/// Default gold/platinum threshold; gold requires a strictly greater value.
pub const GOLD_THRESHOLD: f64 = 0.67;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgreementError {
    #[error("annotation sets belong to different documents ({0} and {1})")]
    DifferentDocuments(DocumentId, DocumentId),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("agreement value {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("cannot segment unannotated document")]
    Undefined,
    #[error("no document has a defined agreement value")]
    NothingToAggregate,
    #[error("unknown agreement variant `{0}`")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Identical span, intersecting semantic types.
    Strict,
    /// Overlapping span, intersecting semantic types.
    Lenient,
    /// Identical span, intersecting semantic groups.
    Flexible,
    /// Overlapping span, intersecting semantic groups.
    Relaxed,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Strict, Variant::Lenient, Variant::Flexible, Variant::Relaxed];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Strict => "strict",
            Variant::Lenient => "lenient",
            Variant::Flexible => "flexible",
            Variant::Relaxed => "relaxed",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = AgreementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| AgreementError::UnknownVariant(s.to_string()))
    }
}

/// Pair counts behind one agreement value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub full: usize,
    pub half: usize,
    pub unpaired: usize,
}

impl Tally {
    pub fn matches(&self) -> f64 {
        self.full as f64 + 0.5 * self.half as f64
    }

    pub fn non_matches(&self) -> f64 {
        self.unpaired as f64 + 0.5 * self.half as f64
    }

    /// `matches / (matches + non_matches)`, or `None` when nothing was compared.
    pub fn value(&self) -> Option<f64> {
        let total = self.full + self.half + self.unpaired;
        (total > 0).then(|| self.matches() / total as f64)
    }

    /// Exact comparison of two values without rounding. Undefined sorts lowest.
    pub fn cmp_value(&self, other: &Tally) -> Ordering {
        let num = |t: &Tally| (2 * t.full + t.half) as u128;
        let den = |t: &Tally| (t.full + t.half + t.unpaired) as u128;
        match (den(self), den(other)) {
            (0, 0) => Ordering::Equal,
            (0, _) => Ordering::Less,
            (_, 0) => Ordering::Greater,
            (d1, d2) => (num(self) * d2).cmp(&(num(other) * d1)),
        }
    }
}

impl std::ops::Add for Tally {
    type Output = Tally;

    fn add(self, rhs: Tally) -> Tally {
        Tally {
            full: self.full + rhs.full,
            half: self.half + rhs.half,
            unpaired: self.unpaired + rhs.unpaired,
        }
    }
}

impl std::iter::Sum for Tally {
    fn sum<I: Iterator<Item = Tally>>(iter: I) -> Tally {
        iter.fold(Tally::default(), |acc, t| acc + t)
    }
}

/// Agreement value of a pairing.
pub fn iaa(pairing: &PairingResult<'_>) -> Option<f64> {
    pairing.tally().value()
}

/// Strict agreement restricted to annotations carrying `sty`.
pub fn per_type_iaa(
    set_a: &[Annotation],
    set_b: &[Annotation],
    sty: &str,
    registry: &Registry,
) -> Result<Option<f64>, AgreementError> {
    Ok(per_type_tally(set_a, set_b, sty, registry)?.value())
}

pub(crate) fn per_type_tally(
    set_a: &[Annotation],
    set_b: &[Annotation],
    sty: &str,
    registry: &Registry,
) -> Result<Tally, AgreementError> {
    if !registry.contains(sty) {
        return Err(RegistryError::UnknownType(sty.to_string()).into());
    }
    let keep = |set: &[Annotation]| set.iter().filter(|a| a.has_type(sty)).cloned().collect::<Vec<_>>();
    let (a, b) = (keep(set_a), keep(set_b));
    Ok(pair_annotations(&a, &b, Variant::Strict, registry)?.tally())
}
