//! Random double-annotation assignment, round reports and the stopping rule
//! for guideline revision rounds.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::DocumentAgreement;
use crate::model::{Actor, ActorId, Document, DocumentId, DocumentStatus, ModelError, Role};

/// Default tolerance on strict agreement between consecutive round means.
pub const DEFAULT_EPSILON: f64 = 0.02;
/// Number of most recent rounds that must agree before stopping.
pub const STABLE_ROUNDS: usize = 3;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("at least two annotators are required, got {0}")]
    TooFewAnnotators(usize),
    #[error("at least one adjudicator is required")]
    NoAdjudicator,
    #[error("actor {actor} has role {role}, expected {expected}")]
    WrongRole { actor: ActorId, role: Role, expected: Role },
    #[error("actor {0} is listed twice")]
    DuplicateActor(ActorId),
    #[error("document {id} is {status}, expected reviewed")]
    NotReviewed { id: DocumentId, status: DocumentStatus },
    #[error("empty assignment batch")]
    EmptyBatch,
    #[error("round {0} has no document with a defined agreement value")]
    EmptyRound(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub document: DocumentId,
    /// The pair is unordered; `annotator_a` is always the smaller id.
    pub annotator_a: ActorId,
    pub annotator_b: ActorId,
    pub adjudicator: ActorId,
    pub round: u32,
}

impl Assignment {
    pub fn involves(&self, actor: &ActorId) -> bool {
        &self.annotator_a == actor || &self.annotator_b == actor || &self.adjudicator == actor
    }

    pub fn is_annotator(&self, actor: &ActorId) -> bool {
        &self.annotator_a == actor || &self.annotator_b == actor
    }
}

fn check_roles<'a>(actors: &'a [Actor], role: Role, seen: &mut BTreeSet<&'a ActorId>) -> Result<(), WorkflowError> {
    for a in actors {
        if a.role != role {
            return Err(WorkflowError::WrongRole {
                actor: a.id.clone(),
                role: a.role,
                expected: role,
            });
        }
        if !seen.insert(&a.id) {
            return Err(WorkflowError::DuplicateActor(a.id.clone()));
        }
    }
    Ok(())
}

/// Endless stream of concatenated random permutations. Any prefix uses every
/// id either `k` or `k + 1` times, and two consecutive ids never repeat.
struct Rotation<'a> {
    ids: Vec<&'a ActorId>,
    queue: Vec<&'a ActorId>,
    last: Option<&'a ActorId>,
}

impl<'a> Rotation<'a> {
    fn new(actors: &'a [Actor]) -> Self {
        let mut ids: Vec<_> = actors.iter().map(|a| &a.id).collect();
        ids.sort();
        Rotation {
            ids,
            queue: Vec::new(),
            last: None,
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> &'a ActorId {
        if self.queue.is_empty() {
            let mut perm = self.ids.clone();
            perm.shuffle(rng);
            if perm.len() > 1 && Some(perm[0]) == self.last {
                perm.swap(0, 1);
            }
            perm.reverse();
            self.queue = perm;
        }
        let id = self.queue.pop().expect("rotation is non-empty");
        self.last = Some(id);
        id
    }
}

/// Draws an annotator pair and an adjudicator for each document. Pure and
/// deterministic for a fixed seed.
pub fn plan_assignments(
    documents: &[DocumentId],
    annotators: &[Actor],
    adjudicators: &[Actor],
    seed: u64,
    round: u32,
) -> Result<Vec<Assignment>, WorkflowError> {
    if annotators.len() < 2 {
        return Err(WorkflowError::TooFewAnnotators(annotators.len()));
    }
    if adjudicators.is_empty() {
        return Err(WorkflowError::NoAdjudicator);
    }
    if documents.is_empty() {
        return Err(WorkflowError::EmptyBatch);
    }
    let mut seen = BTreeSet::new();
    check_roles(annotators, Role::Annotator, &mut seen)?;
    check_roles(adjudicators, Role::Adjudicator, &mut seen)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Rotation::new(annotators);
    let mut judges = Rotation::new(adjudicators);
    Ok(documents
        .iter()
        .map(|doc| {
            let x = pairs.next(&mut rng);
            let y = pairs.next(&mut rng);
            let (a, b) = if x < y { (x, y) } else { (y, x) };
            Assignment {
                document: doc.clone(),
                annotator_a: a.clone(),
                annotator_b: b.clone(),
                adjudicator: judges.next(&mut rng).clone(),
                round,
            }
        })
        .collect())
}

/// Plans assignments for reviewed documents and moves them to `assigned`.
/// Nothing changes if any document is not ready.
pub fn assign(
    documents: &mut [Document],
    annotators: &[Actor],
    adjudicators: &[Actor],
    seed: u64,
    round: u32,
) -> Result<Vec<Assignment>, WorkflowError> {
    if let Some(d) = documents.iter().find(|d| d.status != DocumentStatus::Reviewed) {
        return Err(WorkflowError::NotReviewed {
            id: d.id.clone(),
            status: d.status,
        });
    }
    let ids: Vec<_> = documents.iter().map(|d| d.id.clone()).collect();
    let plan = plan_assignments(&ids, annotators, adjudicators, seed, round)?;
    for d in documents.iter_mut() {
        d.advance(DocumentStatus::Assigned)?;
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMean {
    pub annotator_a: ActorId,
    pub annotator_b: ActorId,
    pub documents: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u32,
    pub documents: Vec<DocumentId>,
    /// Mean strict agreement over documents with a defined value.
    pub mean_strict: f64,
    pub pairs: Vec<PairMean>,
}

impl RoundReport {
    /// Builds the report from each document's assignment and agreement.
    pub fn build(round: u32, entries: &[(&Assignment, &DocumentAgreement)]) -> Result<Self, WorkflowError> {
        let mut by_pair: BTreeMap<(&ActorId, &ActorId), Vec<f64>> = BTreeMap::new();
        let mut all = Vec::new();
        for (asg, agr) in entries {
            if let Some(v) = agr.concepts.strict.value {
                all.push(v);
                by_pair.entry((&asg.annotator_a, &asg.annotator_b)).or_default().push(v);
            }
        }
        if all.is_empty() {
            return Err(WorkflowError::EmptyRound(round));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok(RoundReport {
            round,
            documents: entries.iter().map(|(a, _)| a.document.clone()).collect(),
            mean_strict: mean(&all),
            pairs: by_pair
                .into_iter()
                .map(|((a, b), v)| PairMean {
                    annotator_a: a.clone(),
                    annotator_b: b.clone(),
                    documents: v.len(),
                    mean: mean(&v),
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Continue,
}

/// Stable when the last three round means lie within `epsilon` of each other.
/// A negative or NaN `epsilon` never reports stability.
pub fn check_stability(rounds: &[RoundReport], epsilon: f64) -> Stability {
    let means: Vec<f64> = rounds.iter().map(|r| r.mean_strict).collect();
    check_stability_means(&means, epsilon)
}

pub fn check_stability_means(means: &[f64], epsilon: f64) -> Stability {
    if means.len() < STABLE_ROUNDS || epsilon.is_nan() || epsilon < 0.0 {
        return Stability::Continue;
    }
    let tail = &means[means.len() - STABLE_ROUNDS..];
    let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    // slack absorbs rounding in differences such as 0.61 - 0.59
    if max - min <= epsilon + 1e-12 {
        Stability::Stable
    } else {
        Stability::Continue
    }
}
