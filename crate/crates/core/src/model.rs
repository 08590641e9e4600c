//! Entities shared by every stage of the annotation workflow.
//!
//! Offsets are counted in Unicode scalar values (code points), 0-based and
//! end-exclusive. Use [`char_slice`] to turn a [`Span`] back into text.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::{ABBREVIATION, NEGATION};

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_newtype!(
    /// Identifier of a [`Document`].
    DocumentId
);
id_newtype!(
    /// Identifier of an [`Actor`].
    ActorId
);
id_newtype!(
    /// Identifier of an [`Annotation`].
    AnnotationId
);
id_newtype!(
    /// Identifier of a [`Relation`].
    RelationId
);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid span {start}..{end}: start must be smaller than end")]
    EmptySpan { start: usize, end: usize },
    #[error("span {start}..{end} exceeds document length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
    #[error("annotation {0} has no semantic types")]
    NoTypes(AnnotationId),
    #[error("annotation {0} carries an expansion but is not typed Abbreviation")]
    ExpansionWithoutAbbreviation(AnnotationId),
    #[error("relation {0} links an annotation to itself")]
    SelfRelation(RelationId),
    #[error("relation {relation} references unknown annotation {annotation}")]
    UnknownEndpoint {
        relation: RelationId,
        annotation: AnnotationId,
    },
    #[error("relation {0} connects annotations from different documents or annotators")]
    ForeignEndpoint(RelationId),
    #[error("relation {0} is negation_of but its source is not typed Negation")]
    NegationSourceNotNegation(RelationId),
    #[error("document {id} cannot move from {from} back to {to}")]
    StatusRegression {
        id: DocumentId,
        from: DocumentStatus,
        to: DocumentStatus,
    },
}

/// Half-open character range `[start, end)` over a document text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Result<Self, ModelError> {
        if start >= end {
            return Err(ModelError::EmptySpan { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Number of characters shared by both spans.
    pub fn overlap_len(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn check_within(&self, len: usize) -> Result<(), ModelError> {
        if self.start >= self.end {
            return Err(ModelError::EmptySpan {
                start: self.start,
                end: self.end,
            });
        }
        if self.end > len {
            return Err(ModelError::SpanOutOfBounds {
                start: self.start,
                end: self.end,
                len,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Length of `text` in code points.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Returns the substring selected by a code-point span, or `None` if the span
/// falls outside the text.
pub fn char_slice(text: &str, span: Span) -> Option<&str> {
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let start = indices.nth(span.start)?;
    let end = if span.end == span.start {
        start
    } else {
        indices.nth(span.end - span.start - 1)?
    };
    Some(&text[start..end])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Annotator,
    Adjudicator,
    Manager,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Annotator => "annotator",
            Role::Adjudicator => "adjudicator",
            Role::Manager => "manager",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Actor {
    pub id: ActorId,
    pub name: String,
    pub role: Role,
    /// Free-form background, e.g. "physician" or "medical student".
    #[serde(default)]
    pub profile: String,
}

impl Actor {
    pub fn new(id: impl Into<String>, role: Role) -> Self {
        let id = id.into();
        Self {
            name: id.clone(),
            id: ActorId(id),
            role,
            profile: String::new(),
        }
    }
}

/// Workflow position of a document. Transitions only move forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentStatus {
    Imported,
    Reviewed,
    Assigned,
    Annotated,
    Adjudicated,
}

impl fmt::Display for DocumentStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DocumentStatus::Imported => "imported",
            DocumentStatus::Reviewed => "reviewed",
            DocumentStatus::Assigned => "assigned",
            DocumentStatus::Annotated => "annotated",
            DocumentStatus::Adjudicated => "adjudicated",
        })
    }
}

/// Body of one free-text field inside the assembled document text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocumentId,
    pub source: crate::ingestion::SourceRecord,
    pub text: String,
    pub sections: Vec<Section>,
    pub status: DocumentStatus,
}

impl Document {
    pub fn char_len(&self) -> usize {
        char_len(&self.text)
    }

    pub fn surface(&self, span: Span) -> Option<&str> {
        char_slice(&self.text, span)
    }

    /// Moves the document to `next`. Staying in place is allowed; moving back is not.
    pub fn advance(&mut self, next: DocumentStatus) -> Result<(), ModelError> {
        if next < self.status {
            return Err(ModelError::StatusRegression {
                id: self.id.clone(),
                from: self.status,
                to: next,
            });
        }
        self.status = next;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: AnnotationId,
    pub document: DocumentId,
    pub annotator: ActorId,
    pub span: Span,
    /// Semantic type codes; never empty.
    pub types: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<String>,
    #[serde(default)]
    pub created_round: u32,
}

impl Annotation {
    /// Builds an annotation, enforcing the type, expansion and bounds invariants
    /// against a document of `doc_len` characters.
    pub fn try_new(
        id: AnnotationId,
        document: DocumentId,
        annotator: ActorId,
        span: Span,
        types: impl IntoIterator<Item = String>,
        expansion: Option<String>,
        doc_len: usize,
    ) -> Result<Self, ModelError> {
        let annotation = Self {
            id,
            document,
            annotator,
            span,
            types: types.into_iter().collect(),
            expansion,
            created_round: 0,
        };
        annotation.validate(doc_len)?;
        Ok(annotation)
    }

    pub fn validate(&self, doc_len: usize) -> Result<(), ModelError> {
        if self.types.is_empty() {
            return Err(ModelError::NoTypes(self.id.clone()));
        }
        if self.expansion.is_some() && !self.types.contains(ABBREVIATION) {
            return Err(ModelError::ExpansionWithoutAbbreviation(self.id.clone()));
        }
        self.span.check_within(doc_len)
    }

    pub fn with_round(mut self, round: u32) -> Self {
        self.created_round = round;
        self
    }

    /// Smallest type code; used as an ordering key.
    pub fn first_type(&self) -> &str {
        self.types.iter().next().map(String::as_str).unwrap_or("")
    }

    pub fn has_type(&self, code: &str) -> bool {
        self.types.contains(code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationType {
    AssociatedWith,
    NegationOf,
}

impl RelationType {
    pub const ALL: [RelationType; 2] = [RelationType::AssociatedWith, RelationType::NegationOf];

    pub fn code(&self) -> &'static str {
        match self {
            RelationType::AssociatedWith => "associated_with",
            RelationType::NegationOf => "negation_of",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code() == code)
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Directed typed edge between two annotations of the same annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub id: RelationId,
    pub source: AnnotationId,
    pub target: AnnotationId,
    pub rtype: RelationType,
    pub annotator: ActorId,
}

impl Relation {
    /// Checks the relation against the annotations it points to.
    pub fn validate<'a>(&self, lookup: impl Fn(&AnnotationId) -> Option<&'a Annotation>) -> Result<(), ModelError> {
        if self.source == self.target {
            return Err(ModelError::SelfRelation(self.id.clone()));
        }
        let find = |id: &AnnotationId| {
            lookup(id).ok_or_else(|| ModelError::UnknownEndpoint {
                relation: self.id.clone(),
                annotation: id.clone(),
            })
        };
        let source = find(&self.source)?;
        let target = find(&self.target)?;
        if source.document != target.document
            || source.annotator != target.annotator
            || source.annotator != self.annotator
        {
            return Err(ModelError::ForeignEndpoint(self.id.clone()));
        }
        if self.rtype == RelationType::NegationOf && !source.has_type(NEGATION) {
            return Err(ModelError::NegationSourceNotNegation(self.id.clone()));
        }
        Ok(())
    }
}
