mod common;

use std::collections::BTreeMap;

use common::corpus::{brat_round_trips, corpus, event_corpus, mutation_documents};
use sdoh_core::brat::validate_document;
use sdoh_core::events::normalize_events;
use sdoh_core::s1::project_gold;
use sdoh_core::schema::{enumerate_targets, report_targets, TargetKind};
use sdoh_core::scorer::score_corpus;
use sdoh_core::Schema;

#[test]
fn every_document_is_clean() {
    let schema = Schema::default_schema();
    for doc in corpus(7, 200) {
        assert!(validate_document(&doc).is_empty(), "{}", doc.doc_id());
        assert!(normalize_events(&doc, &schema).1.is_empty(), "{}", doc.doc_id());
    }
}

#[test]
fn classification_targets_have_five_positive_sentences() {
    let schema = Schema::default_schema();
    let targets = enumerate_targets(&schema);
    let mut counts: BTreeMap<String, usize> = targets.classification.iter().map(|t| (t.key(), 0)).collect();
    for doc in corpus(7, 200) {
        let (events, _) = normalize_events(&doc, &schema);
        let (examples, findings) = project_gold(doc.doc_id(), doc.text(), &events, &targets);
        assert!(findings.is_empty(), "{findings:?}");
        for ex in examples {
            for t in ex.positives {
                *counts.get_mut(&t.key()).unwrap() += 1;
            }
        }
    }
    for (key, n) in &counts {
        assert!(*n >= 5, "{key} has {n} positive sentences");
    }
}

#[test]
fn every_report_row_has_positives() {
    let schema = Schema::default_schema();
    let gold = event_corpus(&corpus(7, 200), &schema);
    let (report, _) = score_corpus(&gold, &gold, &schema);
    let empty: Vec<String> = report
        .rows
        .iter()
        .filter(|r| r.counts.positives == 0)
        .map(|r| r.target.key())
        .collect();
    assert!(empty.is_empty(), "{empty:?}");
    assert_eq!(report.rows.len(), report_targets(&schema).len());
    assert!(report.rows.iter().any(|r| r.target.kind == TargetKind::SpanOnly));
}

#[test]
fn same_seed_same_corpus_different_seed_differs() {
    let a = corpus(11, 30);
    assert_eq!(a, corpus(11, 30));
    assert_ne!(a, corpus(12, 30));
}

#[test]
fn synthetic_and_mutated_documents_round_trip() {
    for doc in corpus(7, 200).iter().chain(&mutation_documents(99, 50)) {
        assert!(brat_round_trips(doc), "{}", doc.doc_id());
    }
}
