//! Durable state: an append-only JSON Lines journal replayed into memory.
//!
//! Every accepted write becomes one [`Entry`]. The entry is validated against
//! the in-memory [`State`] first, then appended and fsynced; only then is the
//! request acknowledged. The journal doubles as the audit log.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clinanno_core::adjudication::{
    adjudicate, AdjudicationDecision, AdjudicationError, DivergenceSet, GoldDocument, Submission,
};
use clinanno_core::agreement::{compare_documents, DocumentAgreement, SegmentLabel, Segmentation};
use clinanno_core::ingestion::{apply_redactions, IngestionError, Redaction};
use clinanno_core::registry::Registry;
use clinanno_core::suggestion::HistoryIndex;
use clinanno_core::workflow::Assignment;
use clinanno_core::{
    char_slice, Actor, ActorId, Annotation, AnnotationId, Document, DocumentId, DocumentStatus, ModelError, Relation,
    Role, Span,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const JOURNAL_FILE: &str = "journal.jsonl";

/// Why a write was refused. Each kind maps onto one HTTP status.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Rejection {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
}

impl From<ModelError> for Rejection {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::StatusRegression { .. } => Rejection::Conflict(e.to_string()),
            _ => Rejection::Invalid(e.to_string()),
        }
    }
}

impl From<IngestionError> for Rejection {
    fn from(e: IngestionError) -> Self {
        match e {
            IngestionError::RedactionRole(_) => Rejection::Forbidden(e.to_string()),
            IngestionError::RedactionWindowClosed { .. } | IngestionError::DuplicateOccurrence(_) => {
                Rejection::Conflict(e.to_string())
            }
            _ => Rejection::Invalid(e.to_string()),
        }
    }
}

impl From<AdjudicationError> for Rejection {
    fn from(e: AdjudicationError) -> Self {
        match e {
            AdjudicationError::Unauthorized { .. } => Rejection::Forbidden(e.to_string()),
            AdjudicationError::AwaitingSecondAnnotation | AdjudicationError::NotAnnotated { .. } => {
                Rejection::Conflict(e.to_string())
            }
            _ => Rejection::Invalid(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Import {
        documents: Vec<Document>,
    },
    Redact {
        document: DocumentId,
        spans: Vec<Span>,
        reviewer: Actor,
    },
    Assign {
        assignments: Vec<Assignment>,
    },
    SaveAnnotation {
        annotation: Annotation,
    },
    DeleteAnnotation {
        document: DocumentId,
        annotation: AnnotationId,
    },
    Submit {
        document: DocumentId,
        annotations: Vec<Annotation>,
        relations: Vec<Relation>,
    },
    Adjudicate {
        decision: AdjudicationDecision,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub actor: ActorId,
    pub event: Event,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot open storage {path}: {source}")]
    Open { path: PathBuf, source: std::io::Error },
    #[error("journal line {line} is corrupt: {message}")]
    Corrupt { line: usize, message: String },
    #[error("journal entry {seq} does not replay: {rejection}")]
    Replay { seq: u64, rejection: Rejection },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub struct Journal {
    file: File,
    path: PathBuf,
}

impl Journal {
    /// Opens (creating if needed) the journal under `dir` and returns every
    /// stored entry. A torn final line left by a crash mid-append is cut off;
    /// that write was never acknowledged.
    pub fn open(dir: &Path) -> Result<(Journal, Vec<Entry>), StoreError> {
        let open_err = |source| StoreError::Open {
            path: dir.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(open_err)?;
        let path = dir.join(JOURNAL_FILE);
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(open_err)?;

        let mut entries = Vec::new();
        let mut good_len = 0u64;
        let mut reader = BufReader::new(&file);
        let mut line = String::new();
        let mut n = 0;
        loop {
            line.clear();
            let read = reader.read_line(&mut line)?;
            if read == 0 {
                break;
            }
            n += 1;
            if !line.ends_with('\n') {
                break;
            }
            let entry = serde_json::from_str::<Entry>(line.trim_end()).map_err(|e| StoreError::Corrupt {
                line: n,
                message: e.to_string(),
            })?;
            entries.push(entry);
            good_len += read as u64;
        }
        drop(reader);
        if file.metadata()?.len() != good_len {
            tracing::warn!(path = %path.display(), "dropping torn journal tail");
            file.set_len(good_len)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok((Journal { file, path }, entries))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one entry and waits until it reaches the disk.
    pub fn append(&mut self, entry: &Entry) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(entry).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }

    pub fn read_all(&self) -> Result<Vec<Entry>, StoreError> {
        let reader = BufReader::new(File::open(&self.path)?);
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            out.push(serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DocState {
    pub doc: Document,
    pub redactions: Vec<Redaction>,
    pub assignment: Option<Assignment>,
    /// Saved but not yet submitted annotations, per annotator.
    pub drafts: BTreeMap<ActorId, BTreeMap<AnnotationId, Annotation>>,
    pub submissions: BTreeMap<ActorId, Submission>,
    pub gold: Option<GoldDocument>,
}

impl DocState {
    /// Everything an annotator currently has on the document.
    pub fn own_annotations(&self, actor: &ActorId) -> Vec<Annotation> {
        match self.submissions.get(actor) {
            Some(s) => s.annotations.clone(),
            None => self
                .drafts
                .get(actor)
                .map(|d| d.values().cloned().collect())
                .unwrap_or_default(),
        }
    }

    pub fn both_submitted(&self) -> bool {
        self.submissions.len() == 2
    }

    pub fn divergence(&self, registry: &Registry) -> Result<DivergenceSet, AdjudicationError> {
        let subs: Vec<Submission> = self.submissions.values().cloned().collect();
        DivergenceSet::compute(&subs, registry)
    }

    /// Agreement between the two submissions, `None` until both are in.
    pub fn agreement(&self, registry: &Registry) -> Option<Result<DocumentAgreement, Rejection>> {
        if !self.both_submitted() {
            return None;
        }
        let mut subs = self.submissions.values();
        let (a, b) = (subs.next()?, subs.next()?);
        Some(
            compare_documents(
                self.doc.id.clone(),
                &a.annotations,
                &b.annotations,
                &a.relations,
                &b.relations,
                registry,
            )
            .map_err(|e| Rejection::Invalid(e.to_string())),
        )
    }

    fn ids_in_use(&self, except: &ActorId) -> BTreeSet<&AnnotationId> {
        let drafts = self
            .drafts
            .iter()
            .filter(|(a, _)| *a != except)
            .flat_map(|(_, d)| d.keys());
        let submitted = self
            .submissions
            .iter()
            .filter(|(a, _)| *a != except)
            .flat_map(|(_, s)| s.annotations.iter().map(|a| &a.id));
        drafts.chain(submitted).collect()
    }
}

pub struct State {
    pub registry: Arc<Registry>,
    pub segmentation: Segmentation,
    pub docs: BTreeMap<DocumentId, DocState>,
    pub history: HistoryIndex,
    pub next_seq: u64,
}

impl State {
    pub fn new(registry: Arc<Registry>, segmentation: Segmentation) -> Self {
        State {
            registry,
            segmentation,
            docs: BTreeMap::new(),
            history: HistoryIndex::new(),
            next_seq: 1,
        }
    }

    /// Rebuilds the state from a journal.
    pub fn replay(registry: Arc<Registry>, segmentation: Segmentation, entries: &[Entry]) -> Result<Self, StoreError> {
        let mut state = State::new(registry, segmentation);
        for e in entries {
            state
                .apply(e)
                .map_err(|rejection| StoreError::Replay { seq: e.seq, rejection })?;
        }
        Ok(state)
    }

    pub fn doc(&self, id: &DocumentId) -> Result<&DocState, Rejection> {
        self.docs
            .get(id)
            .ok_or_else(|| Rejection::NotFound(format!("document {id} not found")))
    }

    fn doc_mut(&mut self, id: &DocumentId) -> Result<&mut DocState, Rejection> {
        self.docs
            .get_mut(id)
            .ok_or_else(|| Rejection::NotFound(format!("document {id} not found")))
    }

    pub fn counts(&self) -> BTreeMap<DocumentStatus, usize> {
        let mut out = BTreeMap::new();
        for d in self.docs.values() {
            *out.entry(d.doc.status).or_insert(0) += 1;
        }
        out
    }

    /// Validates `entry` and applies it. A rejected entry leaves the state untouched.
    pub fn apply(&mut self, entry: &Entry) -> Result<(), Rejection> {
        match &entry.event {
            Event::Import { documents } => self.import(documents)?,
            Event::Redact {
                document,
                spans,
                reviewer,
            } => self.redact(document, spans, reviewer)?,
            Event::Assign { assignments } => self.assign(assignments)?,
            Event::SaveAnnotation { annotation } => self.save(&entry.actor, annotation)?,
            Event::DeleteAnnotation { document, annotation } => self.delete(&entry.actor, document, annotation)?,
            Event::Submit {
                document,
                annotations,
                relations,
            } => self.submit(&entry.actor, document, annotations, relations)?,
            Event::Adjudicate { decision } => self.adjudicate(decision)?,
        }
        self.next_seq = self.next_seq.max(entry.seq + 1);
        Ok(())
    }

    fn import(&mut self, documents: &[Document]) -> Result<(), Rejection> {
        let mut seen = BTreeSet::new();
        for d in documents {
            if self.docs.contains_key(&d.id) || !seen.insert(&d.id) {
                return Err(Rejection::Conflict(format!("document {} already imported", d.id)));
            }
        }
        for d in documents {
            self.docs.insert(
                d.id.clone(),
                DocState {
                    doc: d.clone(),
                    redactions: Vec::new(),
                    assignment: None,
                    drafts: BTreeMap::new(),
                    submissions: BTreeMap::new(),
                    gold: None,
                },
            );
        }
        Ok(())
    }

    fn redact(&mut self, id: &DocumentId, spans: &[Span], reviewer: &Actor) -> Result<(), Rejection> {
        let d = self.doc_mut(id)?;
        apply_redactions(&mut d.doc, &mut [], spans, reviewer)?;
        // applied right to left, so every span is in pre-redaction coordinates
        let mut sorted = spans.to_vec();
        sorted.sort();
        for span in sorted.into_iter().rev() {
            d.redactions.push(Redaction {
                document: id.clone(),
                span,
                reviewer: reviewer.id.clone(),
                replacement: clinanno_core::ingestion::PHI_PLACEHOLDER.to_string(),
            });
        }
        Ok(())
    }

    fn assign(&mut self, assignments: &[Assignment]) -> Result<(), Rejection> {
        for a in assignments {
            let d = self.doc(&a.document)?;
            let started = !d.drafts.is_empty() || !d.submissions.is_empty();
            match d.doc.status {
                DocumentStatus::Reviewed => {}
                DocumentStatus::Assigned if !started => {}
                status => {
                    return Err(Rejection::Conflict(format!(
                        "document {} is {status} and cannot be (re)assigned",
                        a.document
                    )))
                }
            }
        }
        for a in assignments {
            let d = self.doc_mut(&a.document)?;
            d.doc.advance(DocumentStatus::Assigned)?;
            d.assignment = Some(a.clone());
        }
        Ok(())
    }

    /// Checks that `actor` may still change their annotations on the document.
    fn open_for(&self, actor: &ActorId, id: &DocumentId) -> Result<&DocState, Rejection> {
        let d = self.doc(id)?;
        let assigned = d.assignment.as_ref().is_some_and(|a| a.is_annotator(actor));
        if !assigned {
            return Err(Rejection::Forbidden(format!(
                "{actor} is not assigned to annotate document {id}"
            )));
        }
        if d.submissions.contains_key(actor) {
            return Err(Rejection::Conflict(format!("{actor} already submitted document {id}")));
        }
        if d.doc.status != DocumentStatus::Assigned {
            return Err(Rejection::Conflict(format!("document {id} is {}", d.doc.status)));
        }
        Ok(d)
    }

    fn check_annotation(&self, d: &DocState, actor: &ActorId, a: &Annotation) -> Result<(), Rejection> {
        if &a.annotator != actor || a.document != d.doc.id {
            return Err(Rejection::Invalid(format!(
                "annotation {} must belong to {actor} on document {}",
                a.id, d.doc.id
            )));
        }
        a.validate(d.doc.char_len())?;
        if let Some(unknown) = a.types.iter().find(|t| !self.registry.contains(t)) {
            return Err(Rejection::Invalid(format!(
                "annotation {}: unknown semantic type `{unknown}`",
                a.id
            )));
        }
        if d.ids_in_use(actor).contains(&a.id) {
            return Err(Rejection::Conflict(format!("annotation id {} is already taken", a.id)));
        }
        Ok(())
    }

    fn record_history(&mut self, id: &DocumentId, a: &Annotation) {
        let Some(d) = self.docs.get(id) else { return };
        if let Some(surface) = char_slice(&d.doc.text, a.span).map(str::to_string) {
            self.history.record_acceptance(&surface, a);
        }
    }

    fn save(&mut self, actor: &ActorId, a: &Annotation) -> Result<(), Rejection> {
        let d = self.open_for(actor, &a.document)?;
        self.check_annotation(d, actor, a)?;
        let is_new = !d.drafts.get(actor).is_some_and(|m| m.contains_key(&a.id));
        if is_new {
            self.record_history(&a.document, a);
        }
        self.doc_mut(&a.document)?
            .drafts
            .entry(actor.clone())
            .or_default()
            .insert(a.id.clone(), a.clone());
        Ok(())
    }

    fn delete(&mut self, actor: &ActorId, id: &DocumentId, ann: &AnnotationId) -> Result<(), Rejection> {
        self.open_for(actor, id)?;
        let d = self.doc_mut(id)?;
        let removed = d.drafts.get_mut(actor).and_then(|m| m.remove(ann));
        if removed.is_none() {
            return Err(Rejection::NotFound(format!("annotation {ann} not found")));
        }
        Ok(())
    }

    fn submit(
        &mut self,
        actor: &ActorId,
        id: &DocumentId,
        annotations: &[Annotation],
        relations: &[Relation],
    ) -> Result<(), Rejection> {
        let d = self.open_for(actor, id)?;
        let mut merged = d.drafts.get(actor).cloned().unwrap_or_default();
        let mut fresh = Vec::new();
        for a in annotations {
            self.check_annotation(d, actor, a)?;
            if !merged.contains_key(&a.id) {
                fresh.push(a.clone());
            }
            merged.insert(a.id.clone(), a.clone());
        }
        let mut rel_ids = BTreeSet::new();
        for r in relations {
            if &r.annotator != actor {
                return Err(Rejection::Invalid(format!("relation {} must belong to {actor}", r.id)));
            }
            if !rel_ids.insert(&r.id) {
                return Err(Rejection::Invalid(format!("relation id {} is used twice", r.id)));
            }
            r.validate(|ann| merged.get(ann))
                .map_err(|e| Rejection::Invalid(format!("relation {}: {e}", r.id)))?;
        }

        for a in &fresh {
            self.record_history(id, a);
        }
        let d = self.doc_mut(id)?;
        d.drafts.remove(actor);
        d.submissions.insert(
            actor.clone(),
            Submission {
                annotator: actor.clone(),
                annotations: merged.into_values().collect(),
                relations: relations.to_vec(),
            },
        );
        if d.both_submitted() {
            d.doc.advance(DocumentStatus::Annotated)?;
        }
        Ok(())
    }

    /// Segment label a document would get from its current submissions.
    pub fn segment_of(&self, d: &DocState) -> Result<SegmentLabel, Rejection> {
        match d.agreement(&self.registry) {
            None => Err(Rejection::Conflict(
                AdjudicationError::AwaitingSecondAnnotation.to_string(),
            )),
            Some(report) => Ok(report?.segment(self.segmentation).unwrap_or(SegmentLabel::Platinum)),
        }
    }

    fn adjudicate(&mut self, decision: &AdjudicationDecision) -> Result<(), Rejection> {
        let d = self.doc(&decision.document)?;
        if d.gold.is_some() {
            return Err(Rejection::Conflict(format!(
                "document {} is already adjudicated",
                decision.document
            )));
        }
        let assigned = d
            .assignment
            .as_ref()
            .map(|a| a.adjudicator.clone())
            .ok_or_else(|| Rejection::Conflict(format!("document {} is not assigned", decision.document)))?;
        if !d.both_submitted() {
            return Err(Rejection::Conflict(
                AdjudicationError::AwaitingSecondAnnotation.to_string(),
            ));
        }
        let div = d.divergence(&self.registry)?;
        let segment = self.segment_of(d)?;
        let mut doc = d.doc.clone();
        let gold = adjudicate(&mut doc, &div, decision, &assigned, segment)?;
        let d = self.doc_mut(&decision.document)?;
        d.doc = doc;
        d.gold = Some(gold);
        Ok(())
    }
}

/// Whether `role` may see documents that are not yet assigned (PHI review).
pub fn reviews_unassigned(role: Role) -> bool {
    matches!(role, Role::Manager | Role::Adjudicator)
}
