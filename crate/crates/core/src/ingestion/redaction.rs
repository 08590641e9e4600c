use serde::{Deserialize, Serialize};

use super::IngestionError;
use crate::model::{char_len, Actor, ActorId, Annotation, Document, DocumentId, DocumentStatus, Role, Span};

pub const PHI_PLACEHOLDER: &str = "[PHI]";

/// Audit record of one manual PHI removal. `span` is in the coordinates of the
/// text the redaction was applied to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Redaction {
    pub document: DocumentId,
    pub span: Span,
    pub reviewer: ActorId,
    pub replacement: String,
}

fn shift(pos: usize, delta: isize) -> usize {
    (pos as isize + delta) as usize
}

/// Replaces `span` with [`PHI_PLACEHOLDER`] and shifts every stored offset
/// behind it. The span must sit inside one section body and must not cut
/// through an existing annotation.
pub fn apply_redaction(
    doc: &mut Document,
    annotations: &mut [Annotation],
    span: Span,
    reviewer: &Actor,
) -> Result<Redaction, IngestionError> {
    check_allowed(doc, reviewer)?;
    span.check_within(doc.char_len())?;
    let section = doc
        .sections
        .iter()
        .position(|s| s.span.contains(&span))
        .ok_or(IngestionError::RedactionOutsideSection)?;
    if let Some(hit) = annotations
        .iter()
        .find(|a| a.document == doc.id && a.span.overlaps(&span))
    {
        return Err(IngestionError::RedactionOverlapsAnnotation(hit.id.clone()));
    }

    let delta = char_len(PHI_PLACEHOLDER) as isize - span.len() as isize;
    let byte_range = {
        let mut idx = doc
            .text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(doc.text.len()));
        let start = idx.nth(span.start).expect("span checked");
        let end = idx.nth(span.len() - 1).expect("span checked");
        start..end
    };
    doc.text.replace_range(byte_range, PHI_PLACEHOLDER);

    for (i, s) in doc.sections.iter_mut().enumerate() {
        if i == section {
            s.span.end = shift(s.span.end, delta);
        } else if s.span.start >= span.end {
            s.span.start = shift(s.span.start, delta);
            s.span.end = shift(s.span.end, delta);
        }
    }
    for a in annotations.iter_mut().filter(|a| a.document == doc.id) {
        if a.span.start >= span.end {
            a.span.start = shift(a.span.start, delta);
            a.span.end = shift(a.span.end, delta);
        }
    }
    doc.advance(DocumentStatus::Reviewed)?;
    Ok(Redaction {
        document: doc.id.clone(),
        span,
        reviewer: reviewer.id.clone(),
        replacement: PHI_PLACEHOLDER.to_string(),
    })
}

/// Applies several redactions given in the coordinates of the current text.
/// Order of `spans` does not matter.
pub fn apply_redactions(
    doc: &mut Document,
    annotations: &mut [Annotation],
    spans: &[Span],
    reviewer: &Actor,
) -> Result<Vec<Redaction>, IngestionError> {
    check_allowed(doc, reviewer)?;
    let mut sorted = spans.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0].overlaps(&w[1])) {
        return Err(IngestionError::OverlappingRedactions);
    }
    // right to left keeps the remaining spans valid; work on copies so a
    // failure leaves the inputs untouched
    let mut doc_copy = doc.clone();
    let mut ann_copy = annotations.to_vec();
    let mut out = Vec::with_capacity(sorted.len());
    for span in sorted.into_iter().rev() {
        out.push(apply_redaction(&mut doc_copy, &mut ann_copy, span, reviewer)?);
    }
    // an empty batch still records that the document was reviewed
    doc_copy.advance(DocumentStatus::Reviewed)?;
    *doc = doc_copy;
    annotations.clone_from_slice(&ann_copy);
    Ok(out)
}

fn check_allowed(doc: &Document, reviewer: &Actor) -> Result<(), IngestionError> {
    if !matches!(reviewer.role, Role::Manager | Role::Adjudicator) {
        return Err(IngestionError::RedactionRole(reviewer.role));
    }
    if doc.status > DocumentStatus::Reviewed {
        return Err(IngestionError::RedactionWindowClosed {
            id: doc.id.clone(),
            status: doc.status,
        });
    }
    Ok(())
}
