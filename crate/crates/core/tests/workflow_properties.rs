use std::collections::BTreeMap;

use clinanno_core::workflow::plan_assignments;
use clinanno_core::{Actor, ActorId, DocumentId, Role};
use proptest::prelude::*;

fn team(prefix: &str, n: usize, role: Role) -> Vec<Actor> {
    (0..n).map(|i| Actor::new(format!("{prefix}{i}"), role)).collect()
}

fn spread(counts: &BTreeMap<&ActorId, usize>, everyone: &[Actor]) -> usize {
    let loads: Vec<usize> = everyone
        .iter()
        .map(|a| counts.get(&a.id).copied().unwrap_or(0))
        .collect();
    loads.iter().max().unwrap() - loads.iter().min().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn balanced_and_never_self_adjudicated(
        docs in 1usize..60,
        annotators in 2usize..7,
        adjudicators in 1usize..4,
        seed in any::<u64>(),
    ) {
        let ann = team("ann", annotators, Role::Annotator);
        let adj = team("adj", adjudicators, Role::Adjudicator);
        let ids: Vec<DocumentId> = (0..docs).map(|i| DocumentId::new(format!("d{i}"))).collect();
        let plan = plan_assignments(&ids, &ann, &adj, seed, 2).unwrap();
        prop_assert_eq!(plan.len(), docs);

        let mut ann_load = BTreeMap::new();
        let mut adj_load = BTreeMap::new();
        for (a, id) in plan.iter().zip(&ids) {
            prop_assert_eq!(&a.document, id);
            prop_assert!(a.annotator_a < a.annotator_b);
            prop_assert!(a.adjudicator != a.annotator_a && a.adjudicator != a.annotator_b);
            prop_assert_eq!(a.round, 2);
            *ann_load.entry(&a.annotator_a).or_insert(0) += 1;
            *ann_load.entry(&a.annotator_b).or_insert(0) += 1;
            *adj_load.entry(&a.adjudicator).or_insert(0) += 1;
        }
        prop_assert!(spread(&ann_load, &ann) <= 1, "{:?}", ann_load);
        prop_assert!(spread(&adj_load, &adj) <= 1, "{:?}", adj_load);

        prop_assert_eq!(plan, plan_assignments(&ids, &ann, &adj, seed, 2).unwrap());
    }
}
