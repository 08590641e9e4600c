//! Source record import, PHI redaction, gold export and dictionary extraction.

mod dictionary;
mod export;
mod records;
mod redaction;

pub use dictionary::{dictionary_tsv, extract_dictionaries, Dictionaries, DictionaryEntry, DictionaryKind};
pub use export::{
    export_corpus, export_gold, parse_corpus, parse_gold, ExportFormat, GoldAnnotationRecord, GoldDocumentRecord,
    GoldRecord, GoldRelationRecord, GoldSection, IaaSummary,
};
pub use records::{import_records, parse_jsonl, ImportReport, ImportWarning, SourceRecord, FREE_TEXT_FIELDS};
pub use redaction::{apply_redaction, apply_redactions, Redaction, PHI_PLACEHOLDER};

use thiserror::Error;

use crate::model::{AnnotationId, DocumentId, DocumentStatus, ModelError, Role};

#[derive(Debug, Error)]
pub enum IngestionError {
    #[error("empty import batch")]
    EmptyBatch,
    #[error("duplicate occurrence-id {0} in batch")]
    DuplicateOccurrence(u64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("redaction window closed: document {id} is {status}")]
    RedactionWindowClosed { id: DocumentId, status: DocumentStatus },
    #[error("role {0} may not redact documents")]
    RedactionRole(Role),
    #[error("redaction must lie inside a single section body")]
    RedactionOutsideSection,
    #[error("redaction overlaps annotation {0}")]
    RedactionOverlapsAnnotation(AnnotationId),
    #[error("redactions overlap each other")]
    OverlappingRedactions,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("document {0} is not adjudicated")]
    NotAdjudicated(DocumentId),
    #[error("gold export is malformed: {0}")]
    Malformed(String),
}
