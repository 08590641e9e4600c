//! Relation agreement over relations whose two endpoints both annotators labeled.

use std::collections::HashMap;

use super::{PairingResult, Tally};
use crate::model::{AnnotationId, Relation, RelationType};

/// Relation tally given a strict concept pairing.
///
/// A relation is eligible only when both of its endpoints belong to strict full
/// pairs. Ineligible relations are ignored entirely, so a missed concept does
/// not also count against relation agreement.
pub fn relation_iaa(rels_a: &[Relation], rels_b: &[Relation], strict: &PairingResult<'_>) -> Tally {
    let a_to_b: HashMap<&AnnotationId, &AnnotationId> = strict.full_pairs.iter().map(|(a, b)| (&a.id, &b.id)).collect();
    let b_ids: std::collections::HashSet<&AnnotationId> = strict.full_pairs.iter().map(|(_, b)| &b.id).collect();

    let mut eligible_a: Vec<&Relation> = rels_a
        .iter()
        .filter(|r| a_to_b.contains_key(&r.source) && a_to_b.contains_key(&r.target))
        .collect();
    let mut eligible_b: Vec<&Relation> = rels_b
        .iter()
        .filter(|r| b_ids.contains(&r.source) && b_ids.contains(&r.target))
        .collect();
    eligible_a.sort_by(|x, y| x.id.cmp(&y.id));
    eligible_b.sort_by(|x, y| x.id.cmp(&y.id));

    let mut used_b = vec![false; eligible_b.len()];
    let mut matched = 0;
    for ra in &eligible_a {
        let (src, tgt) = (a_to_b[&ra.source], a_to_b[&ra.target]);
        let hit = eligible_b
            .iter()
            .enumerate()
            .find(|(j, rb)| !used_b[*j] && &rb.source == src && &rb.target == tgt && rb.rtype == ra.rtype);
        if let Some((j, _)) = hit {
            used_b[j] = true;
            matched += 1;
        }
    }
    Tally {
        full: matched,
        half: 0,
        unpaired: eligible_a.len() + eligible_b.len() - 2 * matched,
    }
}

/// [`relation_iaa`] restricted to one relation type.
pub fn relation_iaa_for_type(
    rels_a: &[Relation],
    rels_b: &[Relation],
    strict: &PairingResult<'_>,
    rtype: RelationType,
) -> Tally {
    let keep = |rels: &[Relation]| rels.iter().filter(|r| r.rtype == rtype).cloned().collect::<Vec<_>>();
    relation_iaa(&keep(rels_a), &keep(rels_b), strict)
}
