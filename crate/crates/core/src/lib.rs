//! Domain model, agreement metrics, adjudication and corpus export for
//! double-annotated clinical text.
//!
//! All span offsets are 0-based, end-exclusive Unicode code point indices
//! into the assembled document text.

pub mod adjudication;
pub mod agreement;
pub mod ingestion;
pub mod model;
pub mod registry;
pub mod suggestion;
pub mod workflow;

pub use agreement::{Tally, Variant};
pub use model::{
    char_len, char_slice, Actor, ActorId, Annotation, AnnotationId, Document, DocumentId, DocumentStatus, ModelError,
    Relation, RelationId, RelationType, Role, Section, Span,
};
pub use registry::Registry;
