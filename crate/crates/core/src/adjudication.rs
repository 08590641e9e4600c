//! Divergence computation and gold document construction.
//!
//! The adjudicator works under two constraints: annotations both annotators
//! agreed on (strict pairs) are locked and cannot be removed, and nothing can
//! be added that neither annotator produced. The only freedom is choosing which
//! single-annotator candidates survive.

use std::collections::{BTreeSet, HashMap, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::{pair_annotations, AgreementError, SegmentLabel, Variant};
use crate::model::{
    ActorId, Annotation, AnnotationId, Document, DocumentId, DocumentStatus, ModelError, Relation, RelationId,
    RelationType, Span,
};
use crate::registry::Registry;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdjudicationError {
    #[error("awaiting second annotation")]
    AwaitingSecondAnnotation,
    #[error("both submissions come from annotator {0}")]
    SameAnnotator(ActorId),
    #[error("annotation id {0} is used by both annotators")]
    SharedAnnotationId(AnnotationId),
    #[error("adjudicator cannot create annotations (unknown annotation {0})")]
    CannotCreate(AnnotationId),
    #[error("adjudicator cannot create relations (unknown relation {0})")]
    CannotCreateRelation(RelationId),
    #[error("adjudicator cannot remove agreed annotations ({0} is locked)")]
    CannotRemoveAgreed(AnnotationId),
    #[error("{actor} is not the adjudicator assigned to document {document}")]
    Unauthorized { actor: ActorId, document: DocumentId },
    #[error("decision targets document {decision} but divergence is for {divergence}")]
    WrongDocument {
        decision: DocumentId,
        divergence: DocumentId,
    },
    #[error("document {id} is {status}; adjudication needs an annotated document")]
    NotAnnotated { id: DocumentId, status: DocumentStatus },
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One annotator's finalized work on a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub annotator: ActorId,
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub relations: Vec<Relation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Both,
    AOnly,
    BOnly,
}

/// A strict pair merged into one record. Its gold id is annotator A's id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockedAnnotation {
    pub id: AnnotationId,
    pub span: Span,
    /// Union of both annotators' types.
    pub types: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<String>,
    pub from_a: AnnotationId,
    pub from_b: AnnotationId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRelation {
    pub id: RelationId,
    pub source: AnnotationId,
    pub target: AnnotationId,
    pub rtype: RelationType,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSet {
    pub document: DocumentId,
    pub annotator_a: ActorId,
    pub annotator_b: ActorId,
    pub locked: Vec<LockedAnnotation>,
    pub candidates_a: Vec<Annotation>,
    pub candidates_b: Vec<Annotation>,
    pub locked_relations: Vec<GoldRelation>,
    pub relation_candidates_a: Vec<Relation>,
    pub relation_candidates_b: Vec<Relation>,
    /// Exact (span, types) repeats by the same annotator, folded into an earlier record.
    pub merged_duplicates: Vec<AnnotationId>,
}

/// Drops exact (span, types) repeats; returns survivors, dropped ids and an id remap.
fn dedupe(annotations: &[Annotation]) -> (Vec<Annotation>, Vec<AnnotationId>, HashMap<AnnotationId, AnnotationId>) {
    let mut sorted: Vec<&Annotation> = annotations.iter().collect();
    sorted.sort_by(|x, y| crate::agreement::order_key(x, y));
    let mut seen: HashMap<(Span, &BTreeSet<String>), &AnnotationId> = HashMap::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut remap = HashMap::new();
    for ann in sorted {
        match seen.get(&(ann.span, &ann.types)) {
            Some(first) => {
                dropped.push(ann.id.clone());
                remap.insert(ann.id.clone(), (*first).clone());
            }
            None => {
                seen.insert((ann.span, &ann.types), &ann.id);
                kept.push(ann.clone());
            }
        }
    }
    (kept, dropped, remap)
}

fn remap_relations(relations: &[Relation], remap: &HashMap<AnnotationId, AnnotationId>) -> Vec<Relation> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut sorted: Vec<&Relation> = relations.iter().collect();
    sorted.sort_by(|x, y| x.id.cmp(&y.id));
    for rel in sorted {
        let mut rel = rel.clone();
        if let Some(to) = remap.get(&rel.source) {
            rel.source = to.clone();
        }
        if let Some(to) = remap.get(&rel.target) {
            rel.target = to.clone();
        }
        if seen.insert((rel.source.clone(), rel.target.clone(), rel.rtype)) {
            out.push(rel);
        }
    }
    out
}

impl DivergenceSet {
    /// Splits two submissions into locked agreement and per-annotator candidates.
    ///
    /// Annotator A is the one whose id sorts first.
    pub fn compute(submissions: &[Submission], registry: &Registry) -> Result<Self, AdjudicationError> {
        let (first, second) = match submissions {
            [a, b] => (a, b),
            _ => return Err(AdjudicationError::AwaitingSecondAnnotation),
        };
        if first.annotator == second.annotator {
            return Err(AdjudicationError::SameAnnotator(first.annotator.clone()));
        }
        let (sub_a, sub_b) = if first.annotator < second.annotator {
            (first, second)
        } else {
            (second, first)
        };
        let ids_a: HashSet<&AnnotationId> = sub_a.annotations.iter().map(|a| &a.id).collect();
        if let Some(shared) = sub_b.annotations.iter().find(|b| ids_a.contains(&b.id)) {
            return Err(AdjudicationError::SharedAnnotationId(shared.id.clone()));
        }

        let (set_a, dup_a, remap_a) = dedupe(&sub_a.annotations);
        let (set_b, dup_b, remap_b) = dedupe(&sub_b.annotations);
        let rels_a = remap_relations(&sub_a.relations, &remap_a);
        let rels_b = remap_relations(&sub_b.relations, &remap_b);

        let document = crate::agreement::common_document(&set_a, &set_b)?.unwrap_or_else(|| DocumentId::new(""));
        let strict = pair_annotations(&set_a, &set_b, Variant::Strict, registry)?;

        let mut locked = Vec::new();
        let mut a_to_gold: HashMap<AnnotationId, AnnotationId> = HashMap::new();
        let mut b_to_gold: HashMap<AnnotationId, AnnotationId> = HashMap::new();
        for (a, b) in &strict.full_pairs {
            a_to_gold.insert(a.id.clone(), a.id.clone());
            b_to_gold.insert(b.id.clone(), a.id.clone());
            locked.push(LockedAnnotation {
                id: a.id.clone(),
                span: a.span,
                types: a.types.union(&b.types).cloned().collect(),
                expansion: a.expansion.clone().or_else(|| b.expansion.clone()),
                from_a: a.id.clone(),
                from_b: b.id.clone(),
            });
        }
        locked.sort_by(|x, y| (x.span, &x.types, &x.id).cmp(&(y.span, &y.types, &y.id)));

        let candidates = |set: &[Annotation], map: &HashMap<AnnotationId, AnnotationId>| {
            set.iter()
                .filter(|a| !map.contains_key(&a.id))
                .cloned()
                .collect::<Vec<_>>()
        };
        let candidates_a = candidates(&set_a, &a_to_gold);
        let candidates_b = candidates(&set_b, &b_to_gold);

        // relations whose endpoints are all locked and that both annotators drew
        let gold_key = |r: &Relation, map: &HashMap<AnnotationId, AnnotationId>| {
            Some((map.get(&r.source)?.clone(), map.get(&r.target)?.clone(), r.rtype))
        };
        let mut b_used = vec![false; rels_b.len()];
        let mut locked_relations = Vec::new();
        let mut relation_candidates_a = Vec::new();
        for ra in &rels_a {
            let hit = gold_key(ra, &a_to_gold).and_then(|key| {
                rels_b
                    .iter()
                    .enumerate()
                    .find(|(j, rb)| !b_used[*j] && gold_key(rb, &b_to_gold).as_ref() == Some(&key))
                    .map(|(j, _)| (j, key))
            });
            match hit {
                Some((j, (source, target, rtype))) => {
                    b_used[j] = true;
                    locked_relations.push(GoldRelation {
                        id: ra.id.clone(),
                        source,
                        target,
                        rtype,
                        origin: Origin::Both,
                    });
                }
                None => relation_candidates_a.push(ra.clone()),
            }
        }
        let relation_candidates_b = rels_b
            .iter()
            .zip(&b_used)
            .filter(|(_, used)| !**used)
            .map(|(r, _)| r.clone())
            .collect();

        let mut merged_duplicates = dup_a;
        merged_duplicates.extend(dup_b);

        Ok(Self {
            document,
            annotator_a: sub_a.annotator.clone(),
            annotator_b: sub_b.annotator.clone(),
            locked,
            candidates_a,
            candidates_b,
            locked_relations,
            relation_candidates_a,
            relation_candidates_b,
            merged_duplicates,
        })
    }

    /// Candidates in review order: by position, A and B interleaved.
    pub fn review_order(&self) -> Vec<(Origin, &Annotation)> {
        let mut all: Vec<(Origin, &Annotation)> = self
            .candidates_a
            .iter()
            .map(|a| (Origin::AOnly, a))
            .chain(self.candidates_b.iter().map(|b| (Origin::BOnly, b)))
            .collect();
        all.sort_by(|x, y| (x.1.span, x.0, &x.1.id).cmp(&(y.1.span, y.0, &y.1.id)));
        all
    }

    fn is_locked(&self, id: &AnnotationId) -> bool {
        self.locked
            .iter()
            .any(|l| &l.id == id || &l.from_a == id || &l.from_b == id)
    }

    /// Maps an annotator's annotation id onto the id it carries in the gold set.
    fn gold_id<'a>(&'a self, id: &'a AnnotationId) -> &'a AnnotationId {
        self.locked
            .iter()
            .find(|l| &l.from_a == id || &l.from_b == id)
            .map(|l| &l.id)
            .unwrap_or(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjudicationDecision {
    pub document: DocumentId,
    pub adjudicator: ActorId,
    /// Candidate annotations to keep.
    pub kept: Vec<AnnotationId>,
    /// Annotations the adjudicator asks to remove; only candidates may be listed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<AnnotationId>,
    /// Candidate relations to keep. `None` keeps every candidate relation whose
    /// endpoints survive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kept_relations: Option<Vec<RelationId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub id: AnnotationId,
    pub span: Span,
    pub types: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<String>,
    pub origin: Origin,
    /// Annotator records this gold annotation came from.
    pub sources: Vec<AnnotationId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldDocument {
    pub document: DocumentId,
    pub adjudicator: ActorId,
    pub annotations: Vec<GoldAnnotation>,
    pub relations: Vec<GoldRelation>,
    pub segment: SegmentLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Applies an adjudicator's decision and marks the document adjudicated.
pub fn adjudicate(
    doc: &mut Document,
    div: &DivergenceSet,
    decision: &AdjudicationDecision,
    assigned_adjudicator: &ActorId,
    segment: SegmentLabel,
) -> Result<GoldDocument, AdjudicationError> {
    if &decision.adjudicator != assigned_adjudicator {
        return Err(AdjudicationError::Unauthorized {
            actor: decision.adjudicator.clone(),
            document: doc.id.clone(),
        });
    }
    if decision.document != doc.id || (!div.document.as_str().is_empty() && div.document != doc.id) {
        return Err(AdjudicationError::WrongDocument {
            decision: decision.document.clone(),
            divergence: div.document.clone(),
        });
    }
    if !matches!(doc.status, DocumentStatus::Annotated | DocumentStatus::Adjudicated) {
        return Err(AdjudicationError::NotAnnotated {
            id: doc.id.clone(),
            status: doc.status,
        });
    }
    if let Some(id) = decision.dropped.iter().find(|id| div.is_locked(id)) {
        return Err(AdjudicationError::CannotRemoveAgreed(id.clone()));
    }

    let kept: HashSet<&AnnotationId> = decision.kept.iter().collect();
    let duplicate_of = |id: &AnnotationId| div.merged_duplicates.contains(id);
    for id in &decision.kept {
        let known = div.is_locked(id)
            || div.candidates_a.iter().chain(&div.candidates_b).any(|c| &c.id == id)
            || duplicate_of(id);
        if !known {
            return Err(AdjudicationError::CannotCreate(id.clone()));
        }
    }

    let mut annotations: Vec<GoldAnnotation> = div
        .locked
        .iter()
        .map(|l| GoldAnnotation {
            id: l.id.clone(),
            span: l.span,
            types: l.types.clone(),
            expansion: l.expansion.clone(),
            origin: Origin::Both,
            sources: vec![l.from_a.clone(), l.from_b.clone()],
        })
        .collect();
    let dropped: HashSet<&AnnotationId> = decision.dropped.iter().collect();
    for (origin, cand) in div.review_order() {
        if kept.contains(&cand.id) && !dropped.contains(&cand.id) {
            annotations.push(GoldAnnotation {
                id: cand.id.clone(),
                span: cand.span,
                types: cand.types.clone(),
                expansion: cand.expansion.clone(),
                origin,
                sources: vec![cand.id.clone()],
            });
        }
    }
    annotations.sort_by(|x, y| {
        (x.span.start, x.span.end, x.types.iter().next(), &x.id).cmp(&(
            y.span.start,
            y.span.end,
            y.types.iter().next(),
            &y.id,
        ))
    });

    let gold_ids: HashSet<&AnnotationId> = annotations.iter().map(|a| &a.id).collect();
    let candidate_relations: Vec<(Origin, &Relation)> = div
        .relation_candidates_a
        .iter()
        .map(|r| (Origin::AOnly, r))
        .chain(div.relation_candidates_b.iter().map(|r| (Origin::BOnly, r)))
        .collect();
    if let Some(wanted) = &decision.kept_relations {
        for id in wanted {
            let known = div.locked_relations.iter().any(|r| &r.id == id)
                || candidate_relations.iter().any(|(_, r)| &r.id == id);
            if !known {
                return Err(AdjudicationError::CannotCreateRelation(id.clone()));
            }
        }
    }

    let mut relations = div.locked_relations.clone();
    let mut seen: HashSet<(AnnotationId, AnnotationId, RelationType)> = relations
        .iter()
        .map(|r| (r.source.clone(), r.target.clone(), r.rtype))
        .collect();
    for (origin, rel) in candidate_relations {
        if let Some(wanted) = &decision.kept_relations {
            if !wanted.contains(&rel.id) {
                continue;
            }
        }
        let source = div.gold_id(&rel.source).clone();
        let target = div.gold_id(&rel.target).clone();
        if !gold_ids.contains(&source) || !gold_ids.contains(&target) {
            continue;
        }
        if seen.insert((source.clone(), target.clone(), rel.rtype)) {
            relations.push(GoldRelation {
                id: rel.id.clone(),
                source,
                target,
                rtype: rel.rtype,
                origin,
            });
        }
    }
    relations.sort_by(|x, y| (&x.source, &x.target, &x.id).cmp(&(&y.source, &y.target, &y.id)));

    doc.advance(DocumentStatus::Adjudicated)?;
    Ok(GoldDocument {
        document: doc.id.clone(),
        adjudicator: decision.adjudicator.clone(),
        annotations,
        relations,
        segment,
        decided_at: decision.timestamp,
        note: decision.note.clone(),
    })
}
