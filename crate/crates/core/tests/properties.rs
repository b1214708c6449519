mod common;

use std::collections::{BTreeSet, HashSet};

use common::*;
use fineval_core::analysis::{
    bucket_errors, common_errors, pair_analysis, single_analysis, AnalysisOptions, ErrorCase,
};
use fineval_core::bio::{extract_spans, is_valid, parse_tags, repair};
use fineval_core::bucketing::{partition, BucketAddress, BucketPlan};
use fineval_core::combination::{combine, Resolution};
use fineval_core::ingest::{
    load_dataset, load_system, parse_classification_tsv, parse_conll, parse_score_tsv, serialize_system,
    ConllColumns,
};
use fineval_core::metrics::span_f1;
use fineval_core::model::PredictionPayload;
use fineval_core::{Attribute, BootstrapConfig, EvalMode, MetricTally, Span, SystemOutput, Tag, TaskKind};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn opts() -> AnalysisOptions {
    AnalysisOptions::new(BootstrapConfig::new(20, 0.95, 0).unwrap()).generated_at("fixed")
}

/// Every (start, end, label) that is a maximal lenient span, found by
/// checking each candidate triple against the tagging rules directly.
fn brute_force_spans(tags: &[Tag]) -> HashSet<(usize, usize, String)> {
    let label_of = |t: &Tag| match t {
        Tag::Begin(l) | Tag::Inside(l) => Some(l.clone()),
        Tag::Outside => None,
    };
    let mut out = HashSet::new();
    for i in 0..tags.len() {
        for j in i..tags.len() {
            for label in LABELS {
                let opens = match &tags[i] {
                    Tag::Begin(l) => l == label,
                    Tag::Inside(l) => l == label && (i == 0 || label_of(&tags[i - 1]).as_deref() != Some(label)),
                    Tag::Outside => false,
                };
                let body = (i + 1..=j).all(|k| tags[k] == Tag::Inside(label.to_string()));
                let closed = j + 1 == tags.len() || tags[j + 1] != Tag::Inside(label.to_string());
                if opens && body && closed {
                    out.insert((i, j, label.to_string()));
                }
            }
        }
    }
    out
}

fn tallies(report_series: &[fineval_core::report::BucketPerformance]) -> MetricTally {
    report_series
        .iter()
        .map(|b| b.components)
        .reduce(|a, b| a + b)
        .unwrap()
}

fn span_tags(s: &SystemOutput, i: usize) -> &[Tag] {
    match &s.predictions[i].payload {
        PredictionPayload::Sequence { tags } => tags,
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn span_f1_matches_set_oracle(seed in any::<u64>(), len in 1usize..=12) {
        let mut r = rng(seed);
        let gold = random_tags(&mut r, len);
        let pred = random_tags(&mut r, len);
        let g = brute_force_spans(&gold);
        let p = brute_force_spans(&pred);
        let tp = g.intersection(&p).count() as u64;
        let (tally, _) = span_f1(&extract_spans(&gold), &extract_spans(&pred));
        prop_assert_eq!(tally, MetricTally::SpanF1 { tp, fp: p.len() as u64 - tp, fn_: g.len() as u64 - tp });
    }

    #[test]
    fn extraction_survives_tag_round_trip(seed in any::<u64>(), len in 0usize..=20) {
        let tags = random_tags(&mut rng(seed), len);
        let strings: Vec<String> = tags.iter().map(Tag::to_string).collect();
        let reparsed = parse_tags(&strings).unwrap();
        prop_assert_eq!(extract_spans(&reparsed), extract_spans(&tags));
        prop_assert_eq!(extract_spans(&repair(&tags)), extract_spans(&tags));
        prop_assert!(is_valid(&repair(&tags)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn classification_buckets_reconcile(seed in any::<u64>(), n in 1usize..400) {
        let (ds, systems) = random_cls(seed, n, 1);
        let r = single_analysis(&systems[0], &ds, &Attribute::defaults_for(ds.task), &opts()).unwrap();
        let MetricTally::Accuracy { correct, total } = r.overall.components else { panic!() };
        prop_assert_eq!(total, n as u64);
        for series in r.per_attribute.values() {
            prop_assert_eq!(tallies(series), MetricTally::Accuracy { correct, total });
            prop_assert_eq!(series.iter().map(|b| b.n).sum::<usize>(), n);
            for b in series.iter().filter(|b| b.n > 0) {
                let MetricTally::Accuracy { correct, total } = b.components else { panic!() };
                prop_assert_eq!(b.value, Some(correct as f64 / total as f64));
            }
        }
    }

    #[test]
    fn span_buckets_reconcile(seed in any::<u64>(), sentences in 1usize..60) {
        let (ds, systems) = random_ner(seed, sentences, 15, 1);
        let r = single_analysis(&systems[0], &ds, &Attribute::defaults_for(ds.task), &opts()).unwrap();
        let MetricTally::SpanF1 { tp, fp, fn_ } = r.overall.components else { panic!() };
        for (attr, series) in &r.per_attribute {
            let MetricTally::SpanF1 { tp: btp, fp: bfp, fn_: bfn } = tallies(series) else { panic!() };
            prop_assert_eq!((btp, bfn), (tp, fn_), "{}", attr);
            if attr == "eLen" || attr == "sLen" || attr == "eFreq" {
                prop_assert_eq!(bfp, fp, "{}", attr);
            } else {
                prop_assert!(bfp <= fp);
            }
        }
    }

    #[test]
    fn buckets_partition_gold_units(seed in any::<u64>(), sentences in 1usize..40) {
        let (ds, _) = random_ner(seed, sentences, 15, 0);
        let mode = EvalMode::default();
        let units = ds.gold_units(mode.bio_mode).unwrap();
        let plan = BucketPlan::build(&ds, &Attribute::defaults_for(ds.task), mode).unwrap();
        for (attr, rule) in &plan.entries {
            let buckets = partition(&ds, *attr, rule, mode).unwrap();
            let mut seen = BTreeSet::new();
            for b in &buckets {
                prop_assert_eq!(b.n, b.units.len());
                for u in &b.units {
                    prop_assert!(seen.insert(u.clone()), "unit in two buckets");
                }
            }
            prop_assert_eq!(seen.len(), units.len());
        }
    }

    #[test]
    fn sample_order_does_not_change_values(seed in any::<u64>(), sentences in 2usize..40) {
        let (ds, systems) = random_ner(seed, sentences, 10, 1);
        let mut order: Vec<usize> = (0..sentences).collect();
        order.shuffle(&mut rng(seed ^ 1));
        let gold = gold_tags(&ds);
        let ds2 = ner_dataset("ner", order.iter().map(|&i| gold[i].clone()).collect());
        let sys2 = ner_system("s0", order.iter().map(|&i| span_tags(&systems[0], i).to_vec()).collect());
        let attrs = [Attribute::EntityLength, Attribute::EntityLabel];
        let a = single_analysis(&systems[0], &ds, &attrs, &opts()).unwrap();
        let b = single_analysis(&sys2, &ds2, &attrs, &opts()).unwrap();
        prop_assert_eq!(a.overall.value, b.overall.value);
        for (attr, series) in &a.per_attribute {
            for (x, y) in series.iter().zip(&b.per_attribute[attr]) {
                prop_assert_eq!((&x.key, x.n, x.value, x.components), (&y.key, y.n, y.value, y.components));
            }
        }
    }

    #[test]
    fn pair_gaps_are_exact_differences(seed in any::<u64>(), sentences in 1usize..40) {
        let (ds, s) = random_ner(seed, sentences, 12, 2);
        let attrs = Attribute::defaults_for(ds.task);
        let p = pair_analysis(&s[0], &s[1], &ds, &attrs, &opts()).unwrap();
        let a = single_analysis(&s[0], &ds, &attrs, &opts()).unwrap();
        let b = single_analysis(&s[1], &ds, &attrs, &opts()).unwrap();
        for (attr, gaps) in &p.per_attribute {
            for (i, g) in gaps.iter().enumerate() {
                let (x, y) = (a.per_attribute[attr][i].value, b.per_attribute[attr][i].value);
                prop_assert_eq!(g.gap, x.zip(y).map(|(x, y)| x - y));
            }
        }
        let same = pair_analysis(&s[0], &s[0], &ds, &attrs, &opts()).unwrap();
        prop_assert!(same.per_attribute.values().flatten().all(|g| g.gap.is_none() || g.gap == Some(0.0)));
    }

    #[test]
    fn bucket_errors_match_tallies(seed in any::<u64>(), sentences in 1usize..30) {
        let (ds, s) = random_ner(seed, sentences, 10, 1);
        let r = single_analysis(&s[0], &ds, &Attribute::defaults_for(ds.task), &opts()).unwrap();
        for (attr, series) in &r.per_attribute {
            for b in series {
                let addr = format!("{attr}|{}", b.key);
                let cases = bucket_errors(&s[0], &ds, &addr, EvalMode::default()).unwrap();
                let MetricTally::SpanF1 { fp, fn_, .. } = b.components else { panic!() };
                prop_assert_eq!(cases.len() as u64, fp + fn_, "{}", addr);
                prop_assert!(cases.windows(2).all(|w| (w[0].sample_id, w[0].unit.span().map(|s| s.start))
                    <= (w[1].sample_id, w[1].unit.span().map(|s| s.start))));
            }
        }
        let (cds, cs) = random_cls(seed, 50, 1);
        let cr = single_analysis(&cs[0], &cds, &[Attribute::Label], &opts()).unwrap();
        for b in &cr.per_attribute["label"] {
            let cases = bucket_errors(&cs[0], &cds, &BucketAddress { attribute: "label".into(), key: b.key.clone() }.to_string(), EvalMode::default()).unwrap();
            let MetricTally::Accuracy { correct, .. } = b.components else { panic!() };
            prop_assert_eq!(cases.len() + correct as usize, b.n);
        }
    }

    #[test]
    fn more_systems_never_grow_common_errors(seed in any::<u64>()) {
        let (ds, s) = random_ner(seed, 20, 10, 3);
        let key = |c: &ErrorCase| (c.unit.clone(), c.error_kind);
        let two: BTreeSet<_> = common_errors(&[&s[0], &s[1]], &ds, EvalMode::default()).unwrap().iter().map(key).collect();
        let three: BTreeSet<_> = common_errors(&[&s[0], &s[1], &s[2]], &ds, EvalMode::default()).unwrap().iter().map(key).collect();
        prop_assert!(three.is_subset(&two));
    }

    #[test]
    fn combining_copies_is_identity(seed in any::<u64>()) {
        let (ds, s) = random_ner(seed, 20, 10, 1);
        let c = combine(&[&s[0], &s[0], &s[0]], &ds).unwrap();
        for i in 0..ds.len() {
            let repaired = repair(span_tags(&s[0], i));
            prop_assert_eq!(span_tags(&c.output, i), repaired.as_slice());
            prop_assert_eq!(extract_spans(span_tags(&c.output, i)), extract_spans(span_tags(&s[0], i)));
        }
        let (cds, cs) = random_cls(seed, 100, 1);
        let cc = combine(&[&cs[0], &cs[0], &cs[0]], &cds).unwrap();
        prop_assert_eq!(cls_labels(&cc.output), cls_labels(&cs[0]));
    }

    #[test]
    fn combined_tags_are_valid_bio(seed in any::<u64>(), members in 2usize..6) {
        let (ds, s) = random_ner(seed, 20, 12, members);
        let refs: Vec<&SystemOutput> = s.iter().collect();
        let c = combine(&refs, &ds).unwrap();
        for i in 0..ds.len() {
            prop_assert!(is_valid(span_tags(&c.output, i)));
        }
    }

    #[test]
    fn member_order_irrelevant_without_ties(seed in any::<u64>()) {
        let (ds, s) = random_cls(seed, 200, 3);
        let a = combine(&[&s[0], &s[1], &s[2]], &ds).unwrap();
        let b = combine(&[&s[2], &s[0], &s[1]], &ds).unwrap();
        for (i, v) in a.provenance.iter().enumerate() {
            if v.resolution != Resolution::TieBroken {
                prop_assert_eq!(&cls_labels(&a.output)[i], &cls_labels(&b.output)[i]);
            }
        }
    }

    #[test]
    fn system_files_round_trip(seed in any::<u64>()) {
        let (ds, s) = random_ner(seed, 15, 10, 1);
        let text = serialize_system(&ds, &s[0]);
        let ds2 = load_dataset("ner", TaskKind::SequenceLabeling, text.as_bytes(), ConllColumns::default()).unwrap();
        let s2 = load_system(&ds2, text.as_bytes(), ConllColumns::default()).unwrap();
        prop_assert_eq!(&ds2.samples, &ds.samples);
        prop_assert_eq!(&s2.predictions, &s[0].predictions);
        prop_assert_eq!(serialize_system(&ds2, &s2), text);

        let (cds, cs) = random_cls(seed, 40, 1);
        let ctext = serialize_system(&cds, &cs[0]);
        let cds2 = load_dataset("cls", TaskKind::TextClassification, ctext.as_bytes(), ConllColumns::default()).unwrap();
        let cs2 = load_system(&cds2, ctext.as_bytes(), ConllColumns::default()).unwrap();
        prop_assert_eq!(&cs2.predictions, &cs[0].predictions);
        prop_assert_eq!(serialize_system(&cds2, &cs2), ctext);
    }

    #[test]
    fn score_files_round_trip(scores in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let text: String = scores.iter().enumerate().map(|(i, x)| format!("doc{i}\t{x}\n")).collect();
        let ds = load_dataset("g", TaskKind::ScoredGeneration, text.as_bytes(), ConllColumns::default()).unwrap();
        let s = load_system(&ds, text.as_bytes(), ConllColumns::default()).unwrap();
        prop_assert_eq!(serialize_system(&ds, &s), text);
    }

    #[test]
    fn parsers_are_total(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let _ = parse_classification_tsv(&bytes);
        let _ = parse_conll(&bytes, ConllColumns::default());
        let _ = parse_score_tsv(&bytes);
    }

    #[test]
    fn parsers_are_total_on_near_valid_text(lines in prop::collection::vec("[a-zA-Z0-9 \\t.#-]{0,20}", 0..30)) {
        let text = lines.join("\n");
        let _ = parse_classification_tsv(text.as_bytes());
        let _ = parse_conll(text.as_bytes(), ConllColumns { token: 0, gold: 1, pred: 2 });
        let _ = parse_score_tsv(text.as_bytes());
    }
}

#[test]
fn spans_helper_agrees_on_known_case() {
    let tags = parse_tags(&["I-ORG", "I-ORG", "O", "I-ORG"]).unwrap();
    let expected: HashSet<(usize, usize, String)> = [(0, 1, "ORG".to_string()), (3, 3, "ORG".to_string())].into();
    assert_eq!(brute_force_spans(&tags), expected);
    assert_eq!(extract_spans(&tags), vec![Span::new(0, 1, "ORG"), Span::new(3, 3, "ORG")]);
}
