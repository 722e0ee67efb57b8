//! Event scoring: triggers, labeled values and span-only arguments are counted
//! separately per target, then micro-aggregated.
//!
//! Gold and predicted events of one type are aligned one-to-one by trigger
//! overlap. A trigger true positive is an aligned pair. A labeled value is a
//! true positive when both sides of an aligned pair carry it (evidence spans
//! are ignored). Span-only arguments are paired by overlap inside aligned
//! events. Positives and predicted positives count every occurrence whether
//! or not it was aligned.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::events::SdohEvent;
use crate::findings::Finding;
use crate::schema::{report_targets, Schema, Target, TargetKind};
use crate::span::Span;

/// Events per document id.
pub type EventCorpus = BTreeMap<String, Vec<SdohEvent>>;

/// Assumptions recorded in every report header.
pub const SCORING_ASSUMPTIONS: &[&str] = &[
    "triggers match on any character overlap within the same event type",
    "event alignment is greedy in ascending (gold start, predicted start) order",
    "labeled arguments are matched by value only; evidence spans are not compared",
    "span-only arguments match on overlap within aligned events",
    "zero denominators yield 0.0",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventAlignment {
    /// (gold index, predicted index), sorted by gold index.
    pub pairs: Vec<(usize, usize)>,
}

/// Greedy one-to-one pairing of overlapping spans, ascending by (gold start, predicted start).
pub fn pair_overlapping(gold: &[Span], pred: &[Span]) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(usize, usize, usize, usize)> = Vec::new();
    for (g, gs) in gold.iter().enumerate() {
        for (p, ps) in pred.iter().enumerate() {
            if gs.overlaps(ps) {
                candidates.push((gs.start, ps.start, g, p));
            }
        }
    }
    candidates.sort_unstable();
    let mut used_g = vec![false; gold.len()];
    let mut used_p = vec![false; pred.len()];
    let mut pairs = Vec::new();
    for (_, _, g, p) in candidates {
        if !used_g[g] && !used_p[p] {
            used_g[g] = true;
            used_p[p] = true;
            pairs.push((g, p));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Aligns events of one document, each event type independently.
pub fn align_events(gold: &[SdohEvent], pred: &[SdohEvent]) -> EventAlignment {
    let g: Vec<_> = gold.iter().map(trigger_key).collect();
    let p: Vec<_> = pred.iter().map(trigger_key).collect();
    EventAlignment {
        pairs: align_triggers(&g, &p),
    }
}

fn trigger_key(e: &SdohEvent) -> (&str, Span) {
    (e.event_type.as_str(), e.trigger.span)
}

fn align_triggers(gold: &[(&str, Span)], pred: &[(&str, Span)]) -> Vec<(usize, usize)> {
    let mut types: Vec<&str> = gold.iter().map(|(t, _)| *t).collect();
    types.sort_unstable();
    types.dedup();
    let mut pairs = Vec::new();
    for ty in types {
        let g_idx: Vec<usize> = (0..gold.len()).filter(|&i| gold[i].0 == ty).collect();
        let p_idx: Vec<usize> = (0..pred.len()).filter(|&i| pred[i].0 == ty).collect();
        let g_spans: Vec<Span> = g_idx.iter().map(|&i| gold[i].1).collect();
        let p_spans: Vec<Span> = p_idx.iter().map(|&i| pred[i].1).collect();
        pairs.extend(
            pair_overlapping(&g_spans, &p_spans)
                .into_iter()
                .map(|(g, p)| (g_idx[g], p_idx[p])),
        );
    }
    pairs.sort_unstable();
    pairs
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub positives: u64,
    pub true_positives: u64,
    pub predicted_positives: u64,
}

impl AddAssign for Counts {
    fn add_assign(&mut self, rhs: Counts) {
        self.positives += rhs.positives;
        self.true_positives += rhs.true_positives;
        self.predicted_positives += rhs.predicted_positives;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 from raw counts; any zero denominator gives 0.0.
///
/// Panics if `tp` exceeds either denominator.
pub fn prf1(tp: u64, pp: u64, positives: u64) -> Metrics {
    assert!(
        tp <= pp && tp <= positives,
        "true positives {tp} exceed predicted {pp} or gold {positives}"
    );
    let precision = ratio(tp, pp);
    let recall = ratio(tp, positives);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        precision,
        recall,
        f1,
    }
}

impl Counts {
    pub fn metrics(&self) -> Metrics {
        prf1(self.true_positives, self.predicted_positives, self.positives)
    }
}

/// Per-target counts for some set of documents. Merging is associative and commutative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    counts: Vec<Counts>,
}

impl Tally {
    pub fn counts(&self) -> &[Counts] {
        &self.counts
    }

    pub fn merge(&mut self, other: &Tally) {
        assert_eq!(self.counts.len(), other.counts.len(), "tallies over different schemas");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += *b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub target: Target,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub rows: Vec<CountRow>,
    pub overall: Counts,
    pub metrics: Metrics,
}

/// Counting engine bound to one schema.
#[derive(Debug, Clone)]
pub struct Scorer {
    targets: Vec<Target>,
    index: HashMap<Target, usize>,
    schema: Schema,
}

impl Scorer {
    pub fn new(schema: &Schema) -> Self {
        let targets = report_targets(schema);
        let index = targets
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Scorer {
            targets,
            index,
            schema: schema.clone(),
        }
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn empty_tally(&self) -> Tally {
        Tally {
            counts: vec![Counts::default(); self.targets.len()],
        }
    }

    fn slot(&self, target: &Target) -> usize {
        self.index[target]
    }

    fn usable<'a>(
        &self,
        doc_id: &str,
        side: &str,
        events: &'a [SdohEvent],
        findings: &mut Vec<Finding>,
    ) -> Vec<&'a SdohEvent> {
        events
            .iter()
            .enumerate()
            .filter_map(|(i, e)| {
                let unknown = e.unknown_parts(&self.schema);
                if unknown.is_empty() {
                    Some(e)
                } else {
                    findings.push(Finding::warning(
                        format!("{doc_id}:{side}#{i}"),
                        format!("event ignored for counting: {}", unknown.join("; ")),
                    ));
                    None
                }
            })
            .collect()
    }

    fn count_occurrences(&self, tally: &mut Tally, events: &[&SdohEvent], gold: bool) {
        for ev in events {
            let mut bump = |t: Target, n: u64| {
                let c = &mut tally.counts[self.slot(&t)];
                if gold {
                    c.positives += n;
                } else {
                    c.predicted_positives += n;
                }
            };
            bump(Target::trigger(&ev.event_type), 1);
            for (arg, l) in &ev.labeled_args {
                bump(Target::labeled(&ev.event_type, arg, &l.value), 1);
            }
            for (arg, spans) in &ev.span_only_args {
                bump(Target::span_only(&ev.event_type, arg), spans.len() as u64);
            }
        }
    }

    /// Counts one document. Events naming anything outside the schema are ignored with a finding.
    pub fn score_document(
        &self,
        doc_id: &str,
        gold: &[SdohEvent],
        pred: &[SdohEvent],
    ) -> (Tally, Vec<Finding>) {
        let mut findings = Vec::new();
        let gold = self.usable(doc_id, "gold", gold, &mut findings);
        let pred = self.usable(doc_id, "pred", pred, &mut findings);
        let mut tally = self.empty_tally();
        self.count_occurrences(&mut tally, &gold, true);
        self.count_occurrences(&mut tally, &pred, false);

        let g_keys: Vec<_> = gold.iter().map(|e| trigger_key(e)).collect();
        let p_keys: Vec<_> = pred.iter().map(|e| trigger_key(e)).collect();
        for (gi, pi) in align_triggers(&g_keys, &p_keys) {
            let (g, p) = (gold[gi], pred[pi]);
            let ty = &g.event_type;
            tally.counts[self.slot(&Target::trigger(ty))].true_positives += 1;
            for (arg, gl) in &g.labeled_args {
                if p.label(arg) == Some(gl.value.as_str()) {
                    tally.counts[self.slot(&Target::labeled(ty, arg, &gl.value))].true_positives += 1;
                }
            }
            for (arg, g_spans) in &g.span_only_args {
                let Some(p_spans) = p.span_only_args.get(arg) else {
                    continue;
                };
                let gs: Vec<Span> = g_spans.iter().map(|m| m.span).collect();
                let ps: Vec<Span> = p_spans.iter().map(|m| m.span).collect();
                let matched = pair_overlapping(&gs, &ps).len() as u64;
                tally.counts[self.slot(&Target::span_only(ty, arg))].true_positives += matched;
            }
        }
        (tally, findings)
    }

    pub fn report(&self, tally: &Tally) -> ScoreReport {
        let rows: Vec<CountRow> = self
            .targets
            .iter()
            .zip(&tally.counts)
            .map(|(t, c)| CountRow {
                target: t.clone(),
                counts: *c,
            })
            .collect();
        let mut overall = Counts::default();
        for r in &rows {
            overall += r.counts;
        }
        ScoreReport {
            rows,
            metrics: overall.metrics(),
            overall,
        }
    }
}

/// Scores a predicted corpus against gold. Documents missing on one side count as empty.
pub fn score_corpus(gold: &EventCorpus, pred: &EventCorpus, schema: &Schema) -> (ScoreReport, Vec<Finding>) {
    let scorer = Scorer::new(schema);
    let mut tally = scorer.empty_tally();
    let mut findings = Vec::new();
    for (doc_id, g) in gold {
        let p = pred.get(doc_id).map(Vec::as_slice).unwrap_or(&[]);
        let (t, f) = scorer.score_document(doc_id, g, p);
        tally.merge(&t);
        findings.extend(f);
    }
    for (doc_id, p) in pred {
        if !gold.contains_key(doc_id) {
            findings.push(Finding::warning(doc_id, "predicted document has no gold counterpart"));
            let (t, f) = scorer.score_document(doc_id, &[], p);
            tally.merge(&t);
            findings.extend(f);
        }
    }
    (scorer.report(&tally), findings)
}

#[derive(Serialize)]
struct JsonRow {
    #[serde(flatten)]
    counts: Counts,
    #[serde(flatten)]
    metrics: Metrics,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    format: &'static str,
    format_version: u32,
    assumptions: &'a [&'a str],
    overall: JsonRow,
    rows: BTreeMap<String, JsonRow>,
}

impl ScoreReport {
    pub fn to_json(&self) -> String {
        let report = JsonReport {
            format: "sdoh-score-report",
            format_version: 1,
            assumptions: SCORING_ASSUMPTIONS,
            overall: JsonRow {
                counts: self.overall,
                metrics: self.metrics,
            },
            rows: self
                .rows
                .iter()
                .map(|r| {
                    (
                        r.target.key(),
                        JsonRow {
                            counts: r.counts,
                            metrics: r.counts.metrics(),
                        },
                    )
                })
                .collect(),
        };
        serde_json::to_string_pretty(&report).expect("report serializes")
    }

    /// Tab-separated table: an OVERALL row, one row per target with repeated
    /// type/argument cells left blank, then a summary block.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("SDOH type\targument\tsubtype\tPositives\tTP\tPP\n");
        let o = &self.overall;
        let _ = writeln!(
            out,
            "OVERALL\t-\t-\t{}\t{}\t{}",
            o.positives, o.true_positives, o.predicted_positives
        );
        let mut last_type: Option<&str> = None;
        let mut last_arg: Option<&str> = None;
        for r in &self.rows {
            let t = &r.target;
            let ty_cell = if last_type == Some(t.event_type.as_str()) {
                ""
            } else {
                last_arg = None;
                &t.event_type
            };
            let arg = t.argument_label();
            let arg_cell = if last_arg == Some(arg) { "" } else { arg };
            let subtype = match t.kind {
                TargetKind::LabeledValue => t.value.as_deref().unwrap_or("N/A"),
                _ => "N/A",
            };
            let c = &r.counts;
            let _ = writeln!(
                out,
                "{ty_cell}\t{arg_cell}\t{subtype}\t{}\t{}\t{}",
                c.positives, c.true_positives, c.predicted_positives
            );
            last_type = Some(&t.event_type);
            last_arg = Some(arg);
        }
        let m = &self.metrics;
        out.push('\n');
        out.push_str("True Positives\tPredicted Positives\tPrecision\tRecall\tF1\n");
        let _ = writeln!(
            out,
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}",
            o.true_positives, o.predicted_positives, m.precision, m.recall, m.f1
        );
        out
    }

    pub fn row(&self, key: &str) -> Option<&CountRow> {
        self.rows.iter().find(|r| r.target.key() == key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span::Mention;

    fn ev(ty: &str, s: usize, e: usize) -> SdohEvent {
        SdohEvent::new(ty, Mention::new(Span::new(s, e), "x"))
    }

    #[test]
    fn identical_events_all_pair() {
        let g = vec![ev("Alcohol", 0, 4), ev("Drug", 10, 14), ev("Alcohol", 20, 24)];
        assert_eq!(align_events(&g, &g).pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn disjoint_triggers_do_not_pair() {
        let g = vec![ev("Alcohol", 0, 5)];
        let p = vec![ev("Alcohol", 10, 15)];
        assert!(align_events(&g, &p).pairs.is_empty());
    }

    #[test]
    fn type_mismatch_does_not_pair() {
        let g = vec![ev("Alcohol", 0, 5)];
        let p = vec![ev("Drug", 0, 5)];
        assert!(align_events(&g, &p).pairs.is_empty());
    }

    #[test]
    fn greedy_prefers_earlier_predicted_start() {
        // Hand trace: candidates (0,0) for pred 0 and (0,4) for pred 1; the first wins,
        // after which gold 0 is used up.
        let g = vec![ev("Alcohol", 0, 10)];
        let p = vec![ev("Alcohol", 4, 10), ev("Alcohol", 0, 3)];
        assert_eq!(align_events(&g, &p).pairs, vec![(0, 1)]);
    }

    #[test]
    fn wrong_status_value() {
        // Hand trace of the counting rules.
        let schema = Schema::default_schema();
        let g = vec![ev("Alcohol", 0, 4).with_label("Status", "none", None)];
        let p = vec![ev("Alcohol", 0, 4).with_label("Status", "current", None)];
        let scorer = Scorer::new(&schema);
        let (tally, findings) = scorer.score_document("d", &g, &p);
        assert!(findings.is_empty());
        let report = scorer.report(&tally);
        let row = |k: &str| report.row(k).unwrap().counts;
        let c = |p, t, pp| Counts {
            positives: p,
            true_positives: t,
            predicted_positives: pp,
        };
        assert_eq!(row("Alcohol/Trigger/-"), c(1, 1, 1));
        assert_eq!(row("Alcohol/Status/none"), c(1, 0, 0));
        assert_eq!(row("Alcohol/Status/current"), c(0, 0, 1));
        assert_eq!(report.overall, c(2, 1, 2));
    }

    #[test]
    fn unmatched_prediction_only_adds_predicted() {
        let schema = Schema::default_schema();
        let p = vec![ev("Tobacco", 0, 4)
            .with_label("Status", "current", None)
            .with_span("Amount", Mention::new(Span::new(5, 10), "1 ppd"))];
        let (report, _) = score_corpus(
            &EventCorpus::from([("d".to_string(), vec![])]),
            &EventCorpus::from([("d".to_string(), p)]),
            &schema,
        );
        assert_eq!(report.overall.true_positives, 0);
        assert_eq!(report.overall.predicted_positives, 3);
        assert_eq!(report.overall.positives, 0);
    }

    #[test]
    fn unknown_prediction_ignored_with_finding() {
        let schema = Schema::default_schema();
        let p = vec![ev("Alcohol", 0, 4).with_label("Status", "sometimes", None)];
        let scorer = Scorer::new(&schema);
        let (tally, findings) = scorer.score_document("d", &[], &p);
        assert_eq!(findings.len(), 1);
        assert_eq!(scorer.report(&tally).overall, Counts::default());
    }

    #[test]
    fn span_only_pairs_within_aligned_events() {
        let schema = Schema::default_schema();
        let m = |s, e| Mention::new(Span::new(s, e), "x");
        let g = vec![ev("Tobacco", 0, 4)
            .with_span("History", m(10, 15))
            .with_span("History", m(20, 25))];
        let p = vec![ev("Tobacco", 1, 3)
            .with_span("History", m(12, 22))
            .with_span("History", m(30, 35))];
        let scorer = Scorer::new(&schema);
        let (tally, _) = scorer.score_document("d", &g, &p);
        let r = scorer.report(&tally);
        let h = r.row("Tobacco/History/-").unwrap().counts;
        assert_eq!((h.positives, h.true_positives, h.predicted_positives), (2, 1, 2));
    }

    #[test]
    fn prf1_reported_rows() {
        let close = |a: f64, b: f64| (a - b).abs() <= 5e-4;
        let m = prf1(3070, 3472, 3471);
        assert!(close(m.precision, 0.8842) && close(m.recall, 0.8845) && close(m.f1, 0.8843));
        let m = prf1(2157, 3032, 3471);
        assert!(close(m.precision, 0.7114) && close(m.recall, 0.6214) && close(m.f1, 0.6634));
    }

    #[test]
    fn prf1_zero_denominators() {
        assert_eq!(
            prf1(0, 0, 0),
            Metrics {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0
            }
        );
        assert_eq!(prf1(0, 5, 0).f1, 0.0);
    }

    #[test]
    #[should_panic(expected = "exceed")]
    fn prf1_contract_violation() {
        prf1(5, 3, 10);
    }

    #[test]
    fn tsv_layout() {
        let schema = Schema::default_schema();
        let (report, _) = score_corpus(&EventCorpus::new(), &EventCorpus::new(), &schema);
        let tsv = report.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "SDOH type\targument\tsubtype\tPositives\tTP\tPP");
        assert_eq!(lines[1], "OVERALL\t-\t-\t0\t0\t0");
        assert_eq!(lines[2], "Alcohol\tTrigger\tN/A\t0\t0\t0");
        assert_eq!(lines[3], "\tStatus\tcurrent\t0\t0\t0");
        assert_eq!(lines[4], "\t\tnone\t0\t0\t0");
        // 48 target rows, header, overall, blank, summary header, summary
        assert_eq!(lines.len(), 48 + 5);
        assert!(report.to_json().contains("\"Alcohol/Status/none\""));
    }
}
