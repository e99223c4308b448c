mod common;

use std::collections::HashSet;

use cocr_core::distill::{distill, DistillConfig};
use cocr_core::eval::{answer_correct, auc, AccCurve, CaseMode};
use cocr_core::penman::{parse_penman, serialize_penman};
use cocr_core::reconstruct::{reconstruct_documents, MockBackend, MockKind};
use proptest::prelude::*;

/// Linear curve through `(1, y1)` and `(20, y20)`, sampled at k = 1..=20.
fn affine(y1: f64, y20: f64) -> (AccCurve, impl Fn(f64) -> f64) {
    let slope = (y20 - y1) / 19.0;
    let f = move |x: f64| y1 + slope * (x - 1.0);
    let values: Vec<f64> = (1..=20).map(|k| f(k as f64)).collect();
    (AccCurve::from_values(1, &values).unwrap(), f)
}

fn interval() -> impl Strategy<Value = (u32, u32)> {
    (1u32..20).prop_flat_map(|s| (Just(s), (s + 1)..=20))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_graphs_round_trip(seed in any::<u64>()) {
        let g = common::random_graph(&mut common::rng(seed), 12, 2);
        let text = serialize_penman(&g).unwrap();
        let back = parse_penman(&text).unwrap();
        prop_assert_eq!(&back, &g, "{}", text);
        prop_assert_eq!(serialize_penman(&back).unwrap(), text);
    }

    #[test]
    fn auc_of_affine_curve_is_exact(y1 in 0.0..=100.0f64, y20 in 0.0..=100.0f64, (s, e) in interval()) {
        let (curve, f) = affine(y1, y20);
        let exact = 0.5 * (f(s as f64) + f(e as f64)) * (e - s) as f64;
        prop_assert!((auc(&curve, s, e).unwrap() - exact).abs() < 1e-9);
    }

    #[test]
    fn auc_is_additive(values in prop::collection::vec(0.0..=100.0f64, 20), (s, e) in interval()) {
        prop_assume!(e - s >= 2);
        let curve = AccCurve::from_values(1, &values).unwrap();
        let whole = auc(&curve, s, e).unwrap();
        for m in (s + 1)..e {
            let split = auc(&curve, s, m).unwrap() + auc(&curve, m, e).unwrap();
            prop_assert!((whole - split).abs() < 1e-9);
        }
    }

    #[test]
    fn auc_scales_linearly(values in prop::collection::vec(0.0..=100.0f64, 20), c in 0.0..=1.0f64, (s, e) in interval()) {
        let curve = AccCurve::from_values(1, &values).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
        let scaled = AccCurve::from_values(1, &scaled).unwrap();
        prop_assert!((auc(&scaled, s, e).unwrap() - c * auc(&curve, s, e).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn dominating_curve_has_larger_auc(values in prop::collection::vec((0.0..=100.0f64, 0.0..=1.0f64), 20), (s, e) in interval()) {
        let hi: Vec<f64> = values.iter().map(|(v, _)| *v).collect();
        let lo: Vec<f64> = values.iter().map(|(v, f)| v * f).collect();
        let hi = AccCurve::from_values(1, &hi).unwrap();
        let lo = AccCurve::from_values(1, &lo).unwrap();
        prop_assert!(auc(&hi, s, e).unwrap() >= auc(&lo, s, e).unwrap() - 1e-12);
    }

    #[test]
    fn answer_match_survives_extension(gold in "[A-Za-z]{1,8}( [A-Za-z]{1,8})?", pre in "[ -~]{0,20}", post in "[ -~]{0,20}") {
        let golds = vec![gold.clone()];
        prop_assert!(answer_correct(&gold, &golds, CaseMode::Insensitive).unwrap());
        let extended = format!("{pre} {gold} {post}");
        prop_assert!(answer_correct(&extended, &golds, CaseMode::Insensitive).unwrap());
        prop_assert!(answer_correct(&extended.to_uppercase(), &golds, CaseMode::Insensitive).unwrap());
        prop_assert!(answer_correct(&extended, &golds, CaseMode::Exact).unwrap());
    }

    #[test]
    fn distilled_concepts_are_clean(seed in any::<u64>()) {
        let (graph, source) = common::random_document(&mut common::rng(seed));
        let list = distill(&graph, &source, &DistillConfig::default()).unwrap();
        let mut seen = HashSet::new();
        for c in &list.concepts {
            prop_assert!(seen.insert(c.to_lowercase()), "duplicate {c} in {:?}", list.concepts);
            let tail = c.rsplit('-').next().unwrap();
            prop_assert!(!(c.contains('-') && tail.len() == 2 && tail.chars().all(|ch| ch.is_ascii_digit())), "sense suffix on {c}");
            prop_assert!(!c.contains('_'));
        }
        prop_assert_eq!(list.origins.len(), list.concepts.len());
        let covered: usize = list.per_sentence.iter().map(|r| r.len()).sum();
        prop_assert_eq!(covered, list.len());
    }

    #[test]
    fn concept_echo_covers_every_concept(seed in any::<u64>()) {
        let (graph, source) = common::random_document(&mut common::rng(seed));
        let list = distill(&graph, &source, &DistillConfig::default()).unwrap();
        let rc = reconstruct_documents(std::slice::from_ref(&list), &MockBackend::new(MockKind::ConceptEcho)).unwrap();
        for c in &list.concepts {
            prop_assert!(rc.joined.contains(c.as_str()), "{c} missing from {}", rc.joined);
        }
    }
}
