//! Independent pairing model shared by the agreement tests and the acceptance
//! suite. Each step repeatedly takes the globally smallest eligible
//! (left rank, preference, right rank) candidate.

#![allow(dead_code)]

use std::collections::BTreeSet;

use clinanno_core::{Annotation, Registry, Span, Tally, Variant};

pub fn ann(id: String, who: &str, start: usize, len: usize, types: BTreeSet<String>) -> Annotation {
    Annotation {
        id: id.into(),
        document: "doc".into(),
        annotator: who.into(),
        span: Span {
            start,
            end: start + len,
        },
        types,
        expansion: None,
        created_round: 0,
    }
}

#[derive(Clone, Copy, PartialEq)]
pub enum Pred {
    Type,
    Group,
}

#[derive(Clone, Copy, PartialEq)]
pub enum Kind {
    Identical,
    Overlap,
}

type Key = (usize, usize, String, Vec<String>, String);

fn key(a: &Annotation) -> Key {
    let types: Vec<String> = a.types.iter().cloned().collect();
    (a.span.start, a.span.end, types[0].clone(), types, a.id.to_string())
}

fn groups(a: &Annotation, reg: &Registry) -> BTreeSet<String> {
    a.types
        .iter()
        .map(|t| reg.sty_to_sgr(t).unwrap().code.clone())
        .collect()
}

pub fn oracle_tally(a: &[Annotation], b: &[Annotation], steps: &[(Kind, Pred)], reg: &Registry) -> Tally {
    let min_who = |s: &[Annotation]| s.iter().map(|x| x.annotator.to_string()).min();
    let content = |s: &[Annotation]| {
        let mut v: Vec<(usize, usize, Vec<String>)> = s
            .iter()
            .map(|x| (x.span.start, x.span.end, x.types.iter().cloned().collect()))
            .collect();
        v.sort();
        v
    };
    let swap = match min_who(a).cmp(&min_who(b)) {
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Equal => content(b) < content(a),
    };
    let (mut left, mut right) = if swap {
        (b.to_vec(), a.to_vec())
    } else {
        (a.to_vec(), b.to_vec())
    };
    left.sort_by_key(key);
    right.sort_by_key(key);

    let mut lu = vec![false; left.len()];
    let mut ru = vec![false; right.len()];
    let (mut full, mut half) = (0, 0);
    for &(kind, pred) in steps {
        loop {
            let mut best: Option<(usize, i64, usize)> = None;
            for (i, l) in left.iter().enumerate() {
                for (j, r) in right.iter().enumerate() {
                    if lu[i] || ru[j] {
                        continue;
                    }
                    let same = l.span == r.span;
                    let ov = l.span.end.min(r.span.end) as i64 - l.span.start.max(r.span.start) as i64;
                    let shape = match kind {
                        Kind::Identical => same,
                        Kind::Overlap => !same && ov > 0,
                    };
                    let compatible = match pred {
                        Pred::Type => l.types.intersection(&r.types).next().is_some(),
                        Pred::Group => groups(l, reg).intersection(&groups(r, reg)).next().is_some(),
                    };
                    if !shape || !compatible {
                        continue;
                    }
                    let cand = (i, -ov, j);
                    if best.is_none_or(|b| cand < b) {
                        best = Some(cand);
                    }
                }
            }
            let Some((i, _, j)) = best else { break };
            lu[i] = true;
            ru[j] = true;
            match kind {
                Kind::Identical => full += 1,
                Kind::Overlap => half += 1,
            }
        }
    }
    Tally {
        full,
        half,
        unpaired: left.len() + right.len() - 2 * (full + half),
    }
}

pub fn oracle_value(t: &Tally) -> Option<f64> {
    let n = t.full + t.half + t.unpaired;
    (n > 0).then(|| (t.full as f64 + t.half as f64 / 2.0) / n as f64)
}

pub fn oracle(a: &[Annotation], b: &[Annotation], v: Variant, reg: &Registry) -> Tally {
    use Kind::*;
    use Pred::*;
    match v {
        Variant::Strict => oracle_tally(a, b, &[(Identical, Type)], reg),
        Variant::Flexible => oracle_tally(a, b, &[(Identical, Type), (Identical, Group)], reg),
        Variant::Lenient => oracle_tally(a, b, &[(Identical, Type), (Overlap, Type)], reg),
        Variant::Relaxed => {
            let x = oracle_tally(
                a,
                b,
                &[(Identical, Type), (Overlap, Type), (Identical, Group), (Overlap, Group)],
                reg,
            );
            let y = oracle_tally(a, b, &[(Identical, Type), (Identical, Group), (Overlap, Group)], reg);
            if oracle_value(&y) > oracle_value(&x) {
                y
            } else {
                x
            }
        }
    }
}
