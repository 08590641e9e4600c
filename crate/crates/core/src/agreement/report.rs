//! Per-document and corpus agreement reports.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    pair_annotations, per_type_tally, relation_iaa, relation_iaa_for_type, segment, strength_label, AgreementError,
    SegmentLabel, Segmentation, Strength, Tally, Variant,
};
use crate::model::{Annotation, DocumentId, Relation, RelationType};
use crate::registry::Registry;

/// One agreement value with the counts that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub tally: Tally,
    pub value: Option<f64>,
    pub strength: Option<Strength>,
}

impl From<Tally> for Score {
    fn from(tally: Tally) -> Self {
        let value = tally.value();
        Self {
            tally,
            value,
            strength: value.map(|v| strength_label(v).expect("agreement values lie in [0, 1]")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantScores<T> {
    pub strict: T,
    pub lenient: T,
    pub flexible: T,
    pub relaxed: T,
}

impl<T> VariantScores<T> {
    pub fn get(&self, variant: Variant) -> &T {
        match variant {
            Variant::Strict => &self.strict,
            Variant::Lenient => &self.lenient,
            Variant::Flexible => &self.flexible,
            Variant::Relaxed => &self.relaxed,
        }
    }

    fn try_build<E>(mut f: impl FnMut(Variant) -> Result<T, E>) -> Result<Self, E> {
        Ok(Self {
            strict: f(Variant::Strict)?,
            lenient: f(Variant::Lenient)?,
            flexible: f(Variant::Flexible)?,
            relaxed: f(Variant::Relaxed)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentAgreement {
    pub document: DocumentId,
    pub concepts: VariantScores<Score>,
    pub relations: Score,
    /// Strict agreement per semantic type code.
    pub per_type: BTreeMap<String, Score>,
    /// Relation agreement per relation type code.
    pub per_relation_type: BTreeMap<String, Score>,
}

impl DocumentAgreement {
    pub fn segment(&self, segmentation: Segmentation) -> Result<SegmentLabel, AgreementError> {
        segment(self.concepts.get(segmentation.variant).value, segmentation.threshold)
    }
}

/// Full agreement report for one double-annotated document.
pub fn compare_documents(
    document: DocumentId,
    set_a: &[Annotation],
    set_b: &[Annotation],
    rels_a: &[Relation],
    rels_b: &[Relation],
    registry: &Registry,
) -> Result<DocumentAgreement, AgreementError> {
    let concepts =
        VariantScores::try_build(|v| pair_annotations(set_a, set_b, v, registry).map(|p| Score::from(p.tally())))?;
    let strict = pair_annotations(set_a, set_b, Variant::Strict, registry)?;
    let relations = Score::from(relation_iaa(rels_a, rels_b, &strict));

    let types: BTreeSet<&String> = set_a.iter().chain(set_b).flat_map(|a| &a.types).collect();
    let mut per_type = BTreeMap::new();
    for ty in types {
        per_type.insert(ty.clone(), Score::from(per_type_tally(set_a, set_b, ty, registry)?));
    }
    let mut per_relation_type = BTreeMap::new();
    for rtype in RelationType::ALL {
        let tally = relation_iaa_for_type(rels_a, rels_b, &strict, rtype);
        if tally.value().is_some() {
            per_relation_type.insert(rtype.code().to_string(), Score::from(tally));
        }
    }
    Ok(DocumentAgreement {
        document,
        concepts,
        relations,
        per_type,
        per_relation_type,
    })
}

/// Corpus-level summary of one measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Documents with a defined value.
    pub documents: usize,
    /// Unweighted mean of per-document values.
    pub macro_mean: Option<f64>,
    /// Pooled counts across documents.
    pub micro: Option<f64>,
    pub pooled: Tally,
    pub macro_strength: Option<Strength>,
    pub micro_strength: Option<Strength>,
}

impl Aggregate {
    fn from_scores<'a>(scores: impl Iterator<Item = &'a Score>) -> Self {
        let mut documents = 0;
        let mut sum = 0.0;
        let mut pooled = Tally::default();
        for s in scores {
            if let Some(v) = s.value {
                documents += 1;
                sum += v;
                pooled = pooled + s.tally;
            }
        }
        let macro_mean = (documents > 0).then(|| sum / documents as f64);
        let micro = pooled.value();
        // the float mean may stray a hair outside [0, 1]
        let label = |v: Option<f64>| v.map(|x| strength_label(x.clamp(0.0, 1.0)).expect("clamped"));
        Self {
            documents,
            macro_mean,
            micro,
            pooled,
            macro_strength: label(macro_mean),
            micro_strength: label(micro),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusAgreement {
    pub documents: usize,
    pub concepts: VariantScores<Aggregate>,
    pub relations: Aggregate,
    pub per_type: BTreeMap<String, Aggregate>,
    pub per_relation_type: BTreeMap<String, Aggregate>,
}

/// Macro and micro averages over per-document reports. Undefined documents are skipped.
pub fn aggregate(reports: &[DocumentAgreement]) -> Result<CorpusAgreement, AgreementError> {
    if reports.iter().all(|r| r.concepts.strict.value.is_none()) {
        return Err(AgreementError::NothingToAggregate);
    }
    let concepts = VariantScores::try_build(|v| {
        Ok::<_, AgreementError>(Aggregate::from_scores(reports.iter().map(|r| r.concepts.get(v))))
    })?;
    let relations = Aggregate::from_scores(reports.iter().map(|r| &r.relations));

    let keyed = |pick: fn(&DocumentAgreement) -> &BTreeMap<String, Score>| {
        let keys: BTreeSet<&String> = reports.iter().flat_map(|r| pick(r).keys()).collect();
        keys.into_iter()
            .map(|k| {
                let agg = Aggregate::from_scores(reports.iter().filter_map(|r| pick(r).get(k)));
                (k.clone(), agg)
            })
            .filter(|(_, agg)| agg.documents > 0)
            .collect::<BTreeMap<_, _>>()
    };

    Ok(CorpusAgreement {
        documents: reports.len(),
        concepts,
        relations,
        per_type: keyed(|r| &r.per_type),
        per_relation_type: keyed(|r| &r.per_relation_type),
    })
}
