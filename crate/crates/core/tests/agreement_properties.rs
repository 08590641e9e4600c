use std::collections::BTreeSet;

use clinanno_core::agreement::{aggregate, compare_documents, pair_annotations, relation_iaa};
use clinanno_core::{Annotation, Registry, Relation, RelationType, Span, Tally, Variant};
use proptest::prelude::*;

#[path = "support/oracle.rs"]
mod oracle;

use oracle::{ann, oracle, oracle_value};

const TYPES: [&str; 6] = ["sosy", "fndg", "dsyn", "orch", "phsu", "podg"];

fn types_strategy() -> impl Strategy<Value = BTreeSet<String>> {
    proptest::sample::subsequence(TYPES.to_vec(), 1..=2).prop_map(|v| v.into_iter().map(String::from).collect())
}

fn set_strategy(who: &'static str, prefix: &'static str) -> impl Strategy<Value = Vec<Annotation>> {
    proptest::collection::vec((0usize..20, 1usize..5, types_strategy()), 0..8).prop_map(move |v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (s, l, t))| ann(format!("{prefix}{i}"), who, s, l, t))
            .collect()
    })
}

fn relations_strategy(who: &'static str, prefix: &'static str, n: usize) -> impl Strategy<Value = Vec<Relation>> {
    proptest::collection::vec((0usize..8, 0usize..8, any::<bool>()), 0..6).prop_map(move |v| {
        v.into_iter()
            .enumerate()
            .filter(|(_, (s, t, _))| s != t && *s < n && *t < n)
            .map(|(i, (s, t, neg))| Relation {
                id: format!("{who}-r{i}").into(),
                source: format!("{prefix}{s}").into(),
                target: format!("{prefix}{t}").into(),
                rtype: if neg {
                    RelationType::NegationOf
                } else {
                    RelationType::AssociatedWith
                },
                annotator: who.into(),
            })
            .collect()
    })
}

fn value(a: &[Annotation], b: &[Annotation], v: Variant, reg: &Registry) -> Option<f64> {
    pair_annotations(a, b, v, reg).unwrap().tally().value()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_independent_pairing_model(a in set_strategy("ann1", "a"), b in set_strategy("ann2", "b")) {
        let reg = Registry::builtin();
        for v in Variant::ALL {
            let got = pair_annotations(&a, &b, v, &reg).unwrap().tally();
            let want = oracle(&a, &b, v, &reg);
            prop_assert_eq!(got, want, "{}", v);
            prop_assert_eq!(got.value(), oracle_value(&want));
        }
    }

    #[test]
    fn symmetric_in_argument_order(a in set_strategy("ann1", "a"), b in set_strategy("ann2", "b")) {
        let reg = Registry::builtin();
        for v in Variant::ALL {
            prop_assert_eq!(value(&a, &b, v, &reg), value(&b, &a, v, &reg), "{}", v);
        }
    }

    #[test]
    fn identical_sets_agree_fully(a in set_strategy("ann1", "a")) {
        prop_assume!(!a.is_empty());
        let reg = Registry::builtin();
        let copy: Vec<Annotation> = a.iter().cloned().map(|mut x| { x.annotator = "ann2".into(); x }).collect();
        for v in Variant::ALL {
            prop_assert_eq!(value(&a, &copy, v, &reg), Some(1.0), "{}", v);
        }
    }

    #[test]
    fn disjoint_spans_agree_zero(a in set_strategy("ann1", "a"), b in set_strategy("ann2", "b")) {
        prop_assume!(!a.is_empty() || !b.is_empty());
        let reg = Registry::builtin();
        let moved: Vec<Annotation> = b.iter().cloned().map(|mut x| {
            x.span = Span { start: x.span.start + 100, end: x.span.end + 100 };
            x
        }).collect();
        for v in Variant::ALL {
            prop_assert_eq!(value(&a, &moved, v, &reg), Some(0.0), "{}", v);
        }
    }

    #[test]
    fn looser_variants_never_score_lower(a in set_strategy("ann1", "a"), b in set_strategy("ann2", "b")) {
        let reg = Registry::builtin();
        let s = value(&a, &b, Variant::Strict, &reg).unwrap_or(0.0);
        let l = value(&a, &b, Variant::Lenient, &reg).unwrap_or(0.0);
        let f = value(&a, &b, Variant::Flexible, &reg).unwrap_or(0.0);
        let r = value(&a, &b, Variant::Relaxed, &reg).unwrap_or(0.0);
        prop_assert!(s <= l && l <= r, "strict {s} lenient {l} relaxed {r}");
        prop_assert!(s <= f && f <= r, "strict {s} flexible {f} relaxed {r}");
        for x in [s, l, f, r] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn relation_agreement_is_symmetric(
        a in set_strategy("ann1", "a"),
        b in set_strategy("ann2", "b"),
        ra in relations_strategy("ann1", "a", 8),
        rb in relations_strategy("ann2", "b", 8),
    ) {
        let reg = Registry::builtin();
        let ab = pair_annotations(&a, &b, Variant::Strict, &reg).unwrap();
        let ba = pair_annotations(&b, &a, Variant::Strict, &reg).unwrap();
        let x = relation_iaa(&ra, &rb, &ab);
        let y = relation_iaa(&rb, &ra, &ba);
        prop_assert_eq!(x.value(), y.value());
        prop_assert_eq!(x.half, 0);
    }

    #[test]
    fn corpus_means(docs in proptest::collection::vec((set_strategy("ann1", "a"), set_strategy("ann2", "b")), 1..6)) {
        let reg = Registry::builtin();
        let reports: Vec<_> = docs
            .iter()
            .enumerate()
            .map(|(i, (a, b))| compare_documents(format!("d{i}").into(), a, b, &[], &[], &reg).unwrap())
            .collect();
        let strict: Vec<Tally> = docs.iter().map(|(a, b)| oracle(a, b, Variant::Strict, &reg)).collect();
        let defined: Vec<f64> = strict.iter().filter_map(oracle_value).collect();
        match aggregate(&reports) {
            Err(_) => prop_assert!(defined.is_empty()),
            Ok(corpus) => {
                let macro_mean = defined.iter().sum::<f64>() / defined.len() as f64;
                let num: usize = strict.iter().map(|t| 2 * t.full + t.half).sum();
                let den: usize = strict.iter().map(|t| 2 * (t.full + t.half + t.unpaired)).sum();
                prop_assert!((corpus.concepts.strict.macro_mean.unwrap() - macro_mean).abs() < 1e-12);
                prop_assert!((corpus.concepts.strict.micro.unwrap() - num as f64 / den as f64).abs() < 1e-12);
                prop_assert_eq!(corpus.concepts.strict.documents, defined.len());
            }
        }
    }
}

#[test]
fn worked_example_with_one_half_pair() {
    // A: dor[0,3) sosy, febre[10,15) sosy, dipirona[20,28) orch
    // B: dor[0,3) sosy, febre alta[10,20) sosy, insulina[30,38) phsu
    let reg = Registry::builtin();
    let t = |s: &[(usize, usize, &str)], who: &str, p: &str| -> Vec<Annotation> {
        s.iter()
            .enumerate()
            .map(|(i, &(st, en, ty))| ann(format!("{p}{i}"), who, st, en - st, [ty.to_string()].into()))
            .collect()
    };
    let a = t(&[(0, 3, "sosy"), (10, 15, "sosy"), (20, 28, "orch")], "A", "a");
    let b = t(&[(0, 3, "sosy"), (10, 20, "sosy"), (30, 38, "phsu")], "B", "b");
    // strict: 1 full, 4 unpaired -> 1/5
    assert_eq!(value(&a, &b, Variant::Strict, &reg), Some(1.0 / 5.0));
    // lenient: 1 full + 1 half + 2 unpaired -> 1.5/4
    assert_eq!(value(&a, &b, Variant::Lenient, &reg), Some(1.5 / 4.0));
    // orch and phsu share a group but the spans are disjoint
    assert_eq!(value(&a, &b, Variant::Flexible, &reg), Some(1.0 / 5.0));
    assert_eq!(value(&a, &b, Variant::Relaxed, &reg), Some(1.5 / 4.0));
}
