//! Pairing of two annotators' annotation sets.
//!
//! Every variant is built as a refinement of the variants it must dominate:
//!
//! | variant  | steps                                                             |
//! |----------|-------------------------------------------------------------------|
//! | strict   | same-span/type                                                    |
//! | flexible | strict, then same-span/group on the leftovers                     |
//! | lenient  | strict, then overlap/type half pairs on the leftovers             |
//! | relaxed  | best of (lenient + same-span/group + overlap/group) and           |
//! |          | (flexible + overlap/group)                                        |
//!
//! Steps only add pairs and every added pair raises the score, so
//! strict ≤ flexible ≤ relaxed and strict ≤ lenient ≤ relaxed hold for every
//! input.
//!
//! Each step is a deterministic greedy pass. One side, the canonical side, is
//! iterated in `(start, end, smallest type, types, id)` order; the other side
//! supplies candidates. The canonical side is the one whose annotator id (then
//! content) sorts first, which makes scores independent of argument order.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AgreementError, Tally, Variant};
use crate::model::{ActorId, Annotation, DocumentId};
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Predicate {
    /// Semantic type sets intersect.
    Type,
    /// Semantic group sets intersect.
    Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Full(Predicate),
    Half(Predicate),
}

const STRICT: &[Step] = &[Step::Full(Predicate::Type)];
const FLEXIBLE: &[Step] = &[Step::Full(Predicate::Type), Step::Full(Predicate::Group)];
const LENIENT: &[Step] = &[Step::Full(Predicate::Type), Step::Half(Predicate::Type)];
const RELAXED_VIA_LENIENT: &[Step] = &[
    Step::Full(Predicate::Type),
    Step::Half(Predicate::Type),
    Step::Full(Predicate::Group),
    Step::Half(Predicate::Group),
];
const RELAXED_VIA_FLEXIBLE: &[Step] = &[
    Step::Full(Predicate::Type),
    Step::Full(Predicate::Group),
    Step::Half(Predicate::Group),
];

/// Whether a pair was formed on identical spans or on overlapping ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Full,
    Half,
}

/// Outcome of pairing two annotation sets. Pairs are oriented `(set_a, set_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingResult<'a> {
    pub full_pairs: Vec<(&'a Annotation, &'a Annotation)>,
    pub half_pairs: Vec<(&'a Annotation, &'a Annotation)>,
    pub unpaired: Vec<&'a Annotation>,
}

impl PairingResult<'_> {
    pub fn tally(&self) -> Tally {
        Tally {
            full: self.full_pairs.len(),
            half: self.half_pairs.len(),
            unpaired: self.unpaired.len(),
        }
    }
}

struct Item<'a> {
    ann: &'a Annotation,
    groups: BTreeSet<String>,
}

impl Item<'_> {
    fn matches(&self, other: &Item<'_>, pred: Predicate) -> bool {
        match pred {
            Predicate::Type => !self.ann.types.is_disjoint(&other.ann.types),
            Predicate::Group => !self.groups.is_disjoint(&other.groups),
        }
    }
}

/// Iteration and tie-break order shared by both sides.
pub(crate) fn order_key(a: &Annotation, b: &Annotation) -> Ordering {
    (a.span.start, a.span.end, a.first_type(), &a.types, &a.id).cmp(&(
        b.span.start,
        b.span.end,
        b.first_type(),
        &b.types,
        &b.id,
    ))
}

/// True when `b` should be iterated instead of `a`.
fn canonical_is_b(a: &[Annotation], b: &[Annotation]) -> bool {
    fn annotator(set: &[Annotation]) -> Option<&ActorId> {
        set.iter().map(|x| &x.annotator).min()
    }
    fn content(set: &[Annotation]) -> Vec<(usize, usize, &BTreeSet<String>)> {
        let mut v: Vec<_> = set.iter().map(|x| (x.span.start, x.span.end, &x.types)).collect();
        v.sort();
        v
    }
    match annotator(a).cmp(&annotator(b)) {
        Ordering::Less => false,
        Ordering::Greater => true,
        Ordering::Equal => content(b) < content(a),
    }
}

fn check_document(set_a: &[Annotation], set_b: &[Annotation]) -> Result<(), AgreementError> {
    let mut docs = set_a.iter().chain(set_b).map(|a| &a.document);
    if let Some(first) = docs.next() {
        if let Some(other) = docs.find(|d| *d != first) {
            return Err(AgreementError::DifferentDocuments(first.clone(), other.clone()));
        }
    }
    Ok(())
}

fn items<'a>(set: &'a [Annotation], registry: &Registry) -> Result<Vec<Item<'a>>, AgreementError> {
    let mut out = Vec::with_capacity(set.len());
    for ann in set {
        let mut groups = BTreeSet::new();
        for ty in &ann.types {
            groups.insert(registry.sty_to_sgr(ty)?.code.clone());
        }
        out.push(Item { ann, groups });
    }
    out.sort_by(|x, y| order_key(x.ann, y.ann));
    Ok(out)
}

struct Matcher<'r, 'a> {
    left: &'r [Item<'a>],
    right: &'r [Item<'a>],
    left_used: Vec<bool>,
    right_used: Vec<bool>,
    pairs: Vec<(usize, usize, PairKind)>,
}

impl<'r, 'a> Matcher<'r, 'a> {
    fn new(left: &'r [Item<'a>], right: &'r [Item<'a>]) -> Self {
        Self {
            left,
            right,
            left_used: vec![false; left.len()],
            right_used: vec![false; right.len()],
            pairs: Vec::new(),
        }
    }

    fn run(&mut self, steps: &[Step]) {
        for step in steps {
            match *step {
                Step::Full(pred) => self.full(pred),
                Step::Half(pred) => self.half(pred),
            }
        }
    }

    fn full(&mut self, pred: Predicate) {
        for i in 0..self.left.len() {
            if self.left_used[i] {
                continue;
            }
            let l = &self.left[i];
            // right side is sorted by order_key, so the first hit is the preferred one
            let hit = (0..self.right.len()).find(|&j| {
                !self.right_used[j] && self.right[j].ann.span == l.ann.span && l.matches(&self.right[j], pred)
            });
            if let Some(j) = hit {
                self.left_used[i] = true;
                self.right_used[j] = true;
                self.pairs.push((i, j, PairKind::Full));
            }
        }
    }

    fn half(&mut self, pred: Predicate) {
        for i in 0..self.left.len() {
            if self.left_used[i] {
                continue;
            }
            let l = &self.left[i];
            let mut best: Option<(usize, usize)> = None;
            for j in 0..self.right.len() {
                let r = &self.right[j];
                if self.right_used[j]
                    || r.ann.span == l.ann.span
                    || !l.ann.span.overlaps(&r.ann.span)
                    || !l.matches(r, pred)
                {
                    continue;
                }
                let overlap = l.ann.span.overlap_len(&r.ann.span);
                // strictly greater keeps the earliest (smallest start, end, type) on ties
                if best.is_none_or(|(_, o)| overlap > o) {
                    best = Some((j, overlap));
                }
            }
            if let Some((j, _)) = best {
                self.left_used[i] = true;
                self.right_used[j] = true;
                self.pairs.push((i, j, PairKind::Half));
            }
        }
    }

    fn tally(&self) -> Tally {
        let full = self.pairs.iter().filter(|p| p.2 == PairKind::Full).count();
        let half = self.pairs.len() - full;
        Tally {
            full,
            half,
            unpaired: self.left.len() + self.right.len() - 2 * self.pairs.len(),
        }
    }
}

/// Pairs two annotators' annotations of one document under `variant`.
pub fn pair_annotations<'a>(
    set_a: &'a [Annotation],
    set_b: &'a [Annotation],
    variant: Variant,
    registry: &Registry,
) -> Result<PairingResult<'a>, AgreementError> {
    check_document(set_a, set_b)?;
    let items_a = items(set_a, registry)?;
    let items_b = items(set_b, registry)?;
    let swap = canonical_is_b(set_a, set_b);
    let (left, right) = if swap {
        (&items_b, &items_a)
    } else {
        (&items_a, &items_b)
    };

    let run = |steps: &[Step]| {
        let mut m = Matcher::new(left, right);
        m.run(steps);
        m
    };
    let matcher = match variant {
        Variant::Strict => run(STRICT),
        Variant::Flexible => run(FLEXIBLE),
        Variant::Lenient => run(LENIENT),
        Variant::Relaxed => {
            let via_lenient = run(RELAXED_VIA_LENIENT);
            let via_flexible = run(RELAXED_VIA_FLEXIBLE);
            if via_flexible.tally().cmp_value(&via_lenient.tally()) == Ordering::Greater {
                via_flexible
            } else {
                via_lenient
            }
        }
    };

    let mut result = PairingResult {
        full_pairs: Vec::new(),
        half_pairs: Vec::new(),
        unpaired: Vec::new(),
    };
    for &(i, j, kind) in &matcher.pairs {
        let (l, r) = (left[i].ann, right[j].ann);
        let pair = if swap { (r, l) } else { (l, r) };
        match kind {
            PairKind::Full => result.full_pairs.push(pair),
            PairKind::Half => result.half_pairs.push(pair),
        }
    }
    let (used_a, used_b) = if swap {
        (&matcher.right_used, &matcher.left_used)
    } else {
        (&matcher.left_used, &matcher.right_used)
    };
    let (sorted_a, sorted_b) = if swap { (right, left) } else { (left, right) };
    for (item, used) in sorted_a.iter().zip(used_a).chain(sorted_b.iter().zip(used_b)) {
        if !used {
            result.unpaired.push(item.ann);
        }
    }
    Ok(result)
}

/// The document shared by two annotation sets, if any annotation exists.
pub fn common_document(set_a: &[Annotation], set_b: &[Annotation]) -> Result<Option<DocumentId>, AgreementError> {
    check_document(set_a, set_b)?;
    Ok(set_a.iter().chain(set_b).map(|a| a.document.clone()).next())
}
