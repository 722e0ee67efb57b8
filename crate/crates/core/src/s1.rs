//! Independent sentence classifier plus per-target taggers, merged per sentence.
//!
//! Training projects gold events onto sentences. Every classification target
//! becomes one output of a multi-label classifier, and every sequence target
//! gets its own BIO tagger. Prediction runs both on each sentence separately
//! and merges them into at most one event per (sentence, event type).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::brat::{AnnotatedDocument, TextDocument};
use crate::bundle::{create_dir, file_stem, PipelineError};
use crate::crf::{decode_bio_spans, encode_bio, train_crf, CrfConfig, CrfModel, TagSet};
use crate::events::{normalize_events, SdohEvent};
use crate::findings::Finding;
use crate::linear::{train_multilabel, MultiLabelModel, TrainConfig};
use crate::persist::{format_tag, Versioned};
use crate::schema::{enumerate_targets, Schema, Target, TargetSets};
use crate::span::{Mention, Span};
use crate::textproc::{featurize_sentence, featurize_tokens, sentences, FeatureVector, Sentence, VocabMode, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceExample {
    pub sentence: Sentence,
    pub positives: BTreeSet<Target>,
    /// BIO labels per sequence target, one per token.
    pub labels: BTreeMap<Target, Vec<String>>,
}

/// BIO category used by a sequence target's tagger.
pub fn tag_category(target: &Target) -> &str {
    target.argument_label()
}

/// Sentence-level training view of one annotated document.
pub fn project_gold(
    doc_id: &str,
    text: &str,
    events: &[SdohEvent],
    targets: &TargetSets,
) -> (Vec<SentenceExample>, Vec<Finding>) {
    let sents = sentences(text);
    let mut findings = Vec::new();
    let mut positives: Vec<BTreeSet<Target>> = vec![BTreeSet::new(); sents.len()];
    let mut spans: Vec<BTreeMap<Target, Vec<Span>>> = vec![BTreeMap::new(); sents.len()];
    let classification: BTreeSet<&Target> = targets.classification.iter().collect();
    let sequence: BTreeSet<&Target> = targets.sequence.iter().collect();

    for (k, ev) in events.iter().enumerate() {
        let id = format!("{doc_id}#{}", k + 1);
        let hits: Vec<usize> = (0..sents.len())
            .filter(|&s| sents[s].span.overlaps(&ev.trigger.span))
            .collect();
        let Some(&home) = hits.first() else {
            findings.push(Finding::warning(&id, "trigger lies outside every sentence"));
            continue;
        };
        if hits.len() > 1 {
            findings.push(Finding::warning(&id, "trigger crosses a sentence boundary"));
        }
        let trigger = Target::trigger(&ev.event_type);
        for &s in &hits {
            if classification.contains(&trigger) {
                positives[s].insert(trigger.clone());
            }
            for (arg, l) in &ev.labeled_args {
                let t = Target::labeled(&ev.event_type, arg, &l.value);
                if classification.contains(&t) {
                    positives[s].insert(t);
                }
            }
            if let (true, Some(clipped)) = (sequence.contains(&trigger), ev.trigger.span.clip(&sents[s].span)) {
                spans[s].entry(trigger.clone()).or_default().push(clipped);
            }
        }

        let bounds = sents[home].span;
        for (arg, l) in &ev.labeled_args {
            if l.evidence.as_ref().is_some_and(|m| !bounds.contains(&m.span)) {
                findings.push(Finding::warning(&id, format!("{arg} evidence lies outside the trigger sentence")));
            }
        }
        for (arg, mentions) in &ev.span_only_args {
            let t = Target::span_only(&ev.event_type, arg);
            for m in mentions {
                let clipped = m.span.clip(&bounds);
                if clipped != Some(m.span) {
                    findings.push(Finding::warning(
                        &id,
                        format!("{arg} span {} crosses the trigger sentence; outside part dropped", m.span),
                    ));
                }
                if let (true, Some(c)) = (sequence.contains(&t), clipped) {
                    spans[home].entry(t.clone()).or_default().push(c);
                }
            }
        }
    }

    let examples = sents
        .into_iter()
        .zip(positives)
        .zip(spans)
        .map(|((sentence, positives), spans)| {
            let labels = targets
                .sequence
                .iter()
                .map(|t| {
                    let marked: Vec<(&str, Span)> = spans
                        .get(t)
                        .map(|v| v.iter().map(|s| (tag_category(t), *s)).collect())
                        .unwrap_or_default();
                    (t.clone(), encode_bio(&marked, &sentence.tokens))
                })
                .collect();
            SentenceExample {
                sentence,
                positives,
                labels,
            }
        })
        .collect();
    (examples, findings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S1Config {
    pub classifier: TrainConfig,
    pub tagger: CrfConfig,
    /// Event types whose History span implies `Status=past` when no Status fires.
    pub history_implies_past: Vec<String>,
}

impl Default for S1Config {
    fn default() -> Self {
        S1Config {
            classifier: TrainConfig::default(),
            tagger: CrfConfig::default(),
            history_implies_past: vec!["Alcohol".into(), "Drug".into(), "Tobacco".into()],
        }
    }
}

impl S1Config {
    pub fn with_seed(seed: u64) -> Self {
        let mut c = S1Config::default();
        c.classifier.seed = seed;
        c.tagger.seed = seed;
        c
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.classifier.epochs = epochs;
        self.tagger.epochs = epochs;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct S1Model {
    pub schema: Schema,
    pub config: S1Config,
    pub classifier: MultiLabelModel,
    /// One tagger per sequence target, in `enumerate_targets` order.
    pub taggers: Vec<(Target, CrfModel)>,
    /// Index of the first tagger sharing each tagger's vocabulary.
    vocab_owner: Vec<usize>,
}

impl S1Model {
    pub fn new(
        schema: Schema,
        config: S1Config,
        classifier: MultiLabelModel,
        taggers: Vec<(Target, CrfModel)>,
    ) -> Result<Self, PipelineError> {
        let targets = enumerate_targets(&schema);
        if classifier.targets != targets.classification {
            return Err(PipelineError::Bundle(
                "classifier targets differ from the schema's classification targets".into(),
            ));
        }
        let tagged: Vec<&Target> = taggers.iter().map(|(t, _)| t).collect();
        if tagged != targets.sequence.iter().collect::<Vec<_>>() {
            return Err(PipelineError::Bundle(
                "tagger targets differ from the schema's sequence targets".into(),
            ));
        }
        let vocab_owner = (0..taggers.len())
            .map(|i| {
                (0..i)
                    .find(|&j| taggers[j].1.vocabulary == taggers[i].1.vocabulary)
                    .unwrap_or(i)
            })
            .collect();
        Ok(S1Model {
            schema,
            config,
            classifier,
            taggers,
            vocab_owner,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        create_dir(&dir.join("taggers"))?;
        self.classifier.save(&dir.join("classifier.json"))?;
        let mut files = Vec::new();
        for (i, (t, m)) in self.taggers.iter().enumerate() {
            let file = format!("taggers/{}.json", file_stem(i, &t.key()));
            m.save(&dir.join(&file))?;
            files.push(TaggerEntry {
                target: t.clone(),
                file,
            });
        }
        S1Manifest {
            format: format_tag::<S1Manifest>(),
            format_version: S1Manifest::VERSION,
            schema: self.schema.clone(),
            config: self.config.clone(),
            classifier_file: "classifier.json".into(),
            classification_targets: self.classifier.targets.iter().map(Target::key).collect(),
            taggers: files,
            decisions: S1_DECISIONS.iter().map(|s| s.to_string()).collect(),
        }
        .save(&dir.join("manifest.json"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let manifest = S1Manifest::load(&dir.join("manifest.json"))?;
        let classifier = MultiLabelModel::load(&dir.join(&manifest.classifier_file))?;
        let taggers = manifest
            .taggers
            .iter()
            .map(|e| Ok((e.target.clone(), CrfModel::load(&dir.join(&e.file))?)))
            .collect::<Result<Vec<_>, PipelineError>>()?;
        S1Model::new(manifest.schema, manifest.config, classifier, taggers)
    }
}

const S1_DECISIONS: &[&str] = &[
    "a value fires only when its probability is strictly above the threshold",
    "mandatory labeled arguments with nothing above threshold take the highest-probability value",
    "History without Status sets Status=past for the configured event types, before the fallback",
    "trigger span is the first tagged trigger, else the whole sentence",
    "labeled-argument evidence is the sentence span",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TaggerEntry {
    target: Target,
    file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct S1Manifest {
    format: String,
    format_version: u64,
    schema: Schema,
    config: S1Config,
    classifier_file: String,
    classification_targets: Vec<String>,
    taggers: Vec<TaggerEntry>,
    decisions: Vec<String>,
}

impl Versioned for S1Manifest {
    const FORMAT: &'static str = "sdoh-s1-bundle";
    const VERSION: u64 = 1;
}

/// Trains the classifier and one tagger per sequence target.
///
/// Documents are normalized against `schema` first; normalization and
/// projection findings are returned alongside the model.
pub fn train_s1(
    docs: &[AnnotatedDocument],
    schema: &Schema,
    config: &S1Config,
) -> Result<(S1Model, Vec<Finding>), PipelineError> {
    if docs.is_empty() {
        return Err(PipelineError::NoDocuments);
    }
    let targets = enumerate_targets(schema);
    let mut findings = Vec::new();
    let mut examples = Vec::new();
    for doc in docs {
        let (events, f) = normalize_events(doc, schema);
        findings.extend(f);
        let (ex, f) = project_gold(doc.doc_id(), doc.text(), &events, &targets);
        findings.extend(f);
        examples.extend(ex);
    }
    if examples.is_empty() {
        return Err(PipelineError::NoDocuments);
    }

    let mut sent_vocab = Vocabulary::new();
    let clf_examples: Vec<(FeatureVector, BTreeSet<Target>)> = examples
        .iter()
        .map(|e| {
            let fv = featurize_sentence(&e.sentence.tokens, VocabMode::Building(&mut sent_vocab));
            (fv, e.positives.clone())
        })
        .collect();
    let classifier = train_multilabel(&clf_examples, &targets.classification, sent_vocab, &config.classifier)?;

    let tokened: Vec<&SentenceExample> = examples.iter().filter(|e| !e.sentence.tokens.is_empty()).collect();
    let mut tok_vocab = Vocabulary::new();
    let tok_feats: Vec<Vec<FeatureVector>> = tokened
        .iter()
        .map(|e| featurize_tokens(&e.sentence.tokens, &mut VocabMode::Building(&mut tok_vocab)))
        .collect();
    let mut taggers = Vec::new();
    for t in &targets.sequence {
        let tagset = TagSet::new(&[tag_category(t)])?;
        let seq: Vec<(Vec<FeatureVector>, Vec<usize>)> = tokened
            .iter()
            .zip(&tok_feats)
            .map(|(e, f)| Ok((f.clone(), tagset.encode(&e.labels[t])?)))
            .collect::<Result<_, crate::crf::CrfError>>()?;
        let model = train_crf(&seq, tagset, tok_vocab.clone(), &config.tagger)?;
        taggers.push((t.clone(), model));
    }

    let model = S1Model::new(schema.clone(), config.clone(), classifier, taggers)?;
    Ok((model, findings))
}

fn mention(doc: &TextDocument, span: Span) -> Mention {
    Mention::new(span, doc.slice(span).unwrap_or_default())
}

/// Events for one document, in sentence order then schema order.
pub fn predict_s1(model: &S1Model, doc: &TextDocument) -> Vec<SdohEvent> {
    let threshold = model.config.classifier.threshold;
    let index: BTreeMap<&Target, usize> = model.classifier.targets.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut out = Vec::new();

    for sent in sentences(doc.text()) {
        let fv = featurize_sentence(&sent.tokens, VocabMode::Frozen(&model.classifier.vocabulary));
        let probs = model.classifier.predict(&fv);
        let prob = |t: &Target| index.get(t).map_or(0.0, |&i| probs[i]);

        let mut tagged: BTreeMap<&Target, Vec<Span>> = BTreeMap::new();
        if !sent.tokens.is_empty() {
            let mut feats: Vec<Option<Vec<FeatureVector>>> = vec![None; model.taggers.len()];
            for (i, (t, crf)) in model.taggers.iter().enumerate() {
                let owner = model.vocab_owner[i];
                if feats[owner].is_none() {
                    feats[owner] = Some(featurize_tokens(&sent.tokens, &mut VocabMode::Frozen(&crf.vocabulary)));
                }
                let labels = crf.tag(feats[owner].as_ref().expect("just filled")).expect("nonempty sentence");
                let spans = decode_bio_spans(&labels, &sent.tokens).into_iter().map(|(_, s)| s).collect();
                tagged.insert(t, spans);
            }
        }
        let spans_of = |t: &Target| tagged.get(t).cloned().unwrap_or_default();

        for et in &model.schema.event_types {
            let trigger = Target::trigger(&et.name);
            let trigger_spans = spans_of(&trigger);
            let mut best: Vec<(&str, &str, f64)> = Vec::new();
            for def in et.labeled() {
                let top = def
                    .values
                    .iter()
                    .map(|v| (v.as_str(), prob(&Target::labeled(&et.name, &def.name, v))))
                    .fold(None, |acc: Option<(&str, f64)>, (v, p)| match acc {
                        Some((_, q)) if q >= p => acc,
                        _ => Some((v, p)),
                    });
                if let Some((v, p)) = top {
                    best.push((def.name.as_str(), v, p));
                }
            }
            let span_args: Vec<(&str, Vec<Span>)> = et
                .span_only()
                .map(|d| (d.name.as_str(), spans_of(&Target::span_only(&et.name, &d.name))))
                .collect();

            let exists = prob(&trigger) > threshold
                || !trigger_spans.is_empty()
                || best.iter().any(|b| b.2 > threshold)
                || span_args.iter().any(|(_, s)| !s.is_empty());
            if !exists {
                continue;
            }

            let trigger_span = trigger_spans.first().copied().unwrap_or(sent.span);
            let evidence = Some(mention(doc, sent.span));
            let mut ev = SdohEvent::new(et.name.clone(), mention(doc, trigger_span));
            for &(arg, value, p) in &best {
                if p > threshold {
                    ev = ev.with_label(arg, value, evidence.clone());
                }
            }
            let has_history = span_args.iter().any(|(a, s)| *a == "History" && !s.is_empty());
            if has_history
                && model.config.history_implies_past.contains(&et.name)
                && ev.label("Status").is_none()
                && et.argument("Status").is_some_and(|d| d.accepts("past"))
            {
                ev = ev.with_label("Status", "past", evidence.clone());
            }
            for &(arg, value, _) in &best {
                let mandatory = et.argument(arg).is_some_and(|d| d.mandatory);
                if mandatory && ev.label(arg).is_none() {
                    ev = ev.with_label(arg, value, evidence.clone());
                }
            }
            for (arg, spans) in span_args {
                for s in spans {
                    ev = ev.with_span(arg, mention(doc, s));
                }
            }
            out.push(ev);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Schema;

    fn doc(text: &str) -> TextDocument {
        TextDocument::new("d", text).unwrap()
    }

    fn m(text: &str, s: usize, e: usize) -> Mention {
        Mention::new(Span::new(s, e), text.chars().skip(s).take(e - s).collect::<String>())
    }

    #[test]
    fn projection_marks_positives_and_bio() {
        let schema = Schema::default_schema();
        let targets = enumerate_targets(&schema);
        let text = "Denies EtOH. Smokes 1 ppd.";
        let events = vec![
            SdohEvent::new("Alcohol", m(text, 7, 11)).with_label("Status", "none", Some(m(text, 0, 6))),
            SdohEvent::new("Tobacco", m(text, 13, 19))
                .with_label("Status", "current", Some(m(text, 13, 19)))
                .with_span("Amount", m(text, 20, 25)),
        ];
        let (ex, findings) = project_gold("d", text, &events, &targets);
        assert!(findings.is_empty());
        assert_eq!(ex.len(), 2);
        assert_eq!(
            ex[0].positives,
            BTreeSet::from([Target::trigger("Alcohol"), Target::labeled("Alcohol", "Status", "none")])
        );
        assert_eq!(ex[0].labels[&Target::trigger("Alcohol")], ["O", "B-Trigger", "O"]);
        assert_eq!(ex[1].labels[&Target::span_only("Tobacco", "Amount")], ["O", "B-Amount", "I-Amount", "O"]);
        assert!(ex[0].labels[&Target::span_only("Tobacco", "Amount")].iter().all(|l| l == "O"));
    }

    #[test]
    fn unannotated_sentence_is_negative() {
        let targets = enumerate_targets(&Schema::default_schema());
        let (ex, _) = project_gold("d", "Vitals stable.", &[], &targets);
        assert!(ex[0].positives.is_empty());
        assert!(ex[0].labels.values().flatten().all(|l| l == "O"));
    }

    #[test]
    fn cross_sentence_argument_warns_and_is_dropped() {
        let targets = enumerate_targets(&Schema::default_schema());
        let text = "Drinks beer. Daily.";
        let ev = SdohEvent::new("Alcohol", m(text, 0, 6))
            .with_label("Status", "current", Some(m(text, 0, 6)))
            .with_span("Frequency", m(text, 13, 18));
        let (ex, findings) = project_gold("d", text, &[ev], &targets);
        assert_eq!(findings.len(), 1);
        assert!(ex[1].labels.values().flatten().all(|l| l == "O"));
    }

    /// A model whose classifier and taggers are all zero except where set.
    fn crafted(schema: &Schema) -> (S1Model, Vocabulary) {
        let targets = enumerate_targets(schema);
        let mut vocab = Vocabulary::new();
        vocab.intern("bias");
        let config = S1Config::default();
        let classifier = MultiLabelModel::zeros(targets.classification.clone(), vocab.clone(), config.classifier.clone());
        let taggers = targets
            .sequence
            .iter()
            .map(|t| {
                let tags = TagSet::new(&[tag_category(t)]).unwrap();
                (t.clone(), CrfModel::zeros(tags, vocab.clone(), config.tagger.clone()))
            })
            .collect();
        (S1Model::new(schema.clone(), config, classifier, taggers).unwrap(), vocab)
    }

    fn set_bias(model: &mut S1Model, target: &Target, bias: f64) {
        let i = model.classifier.target_index(target).unwrap();
        model.classifier.biases[i] = bias;
    }

    #[test]
    fn zero_model_predicts_nothing() {
        let schema = Schema::default_schema();
        let (model, _) = crafted(&schema);
        assert!(predict_s1(&model, &doc("Denies EtOH.")).is_empty());
    }

    #[test]
    fn labeled_value_alone_creates_sentence_event() {
        let schema = Schema::default_schema();
        let (mut model, _) = crafted(&schema);
        for t in model.classifier.targets.clone() {
            set_bias(&mut model, &t, -5.0);
        }
        set_bias(&mut model, &Target::labeled("Alcohol", "Status", "none"), 5.0);
        let text = "Denies EtOH.";
        let events = predict_s1(&model, &doc(text));
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].event_type, "Alcohol");
        assert_eq!(events[0].trigger.span, Span::new(0, 12));
        assert_eq!(events[0].label("Status"), Some("none"));
        assert!(events[0].is_schema_valid(&schema));
    }

    #[test]
    fn tagged_trigger_and_amount_are_used() {
        let schema = Schema::default_schema();
        let (mut model, vocab) = crafted(&schema);
        for t in model.classifier.targets.clone() {
            set_bias(&mut model, &t, -5.0);
        }
        // "Now smokes 1 ppd." : tokens Now(0,3) smokes(4,10) 1(11,12) ppd(13,16) .(16,17)
        let mut v = vocab;
        let w_smokes = v.intern("w=smokes");
        let w_1 = v.intern("w=1");
        let w_ppd = v.intern("w=ppd");
        for (t, crf) in model.taggers.iter_mut() {
            crf.vocabulary = v.clone();
            crf.emissions = vec![0.0; v.len() * 3];
            if *t == Target::trigger("Tobacco") {
                crf.emissions[w_smokes as usize * 3 + 1] = 5.0;
            }
            if *t == Target::span_only("Tobacco", "Amount") {
                crf.emissions[w_1 as usize * 3 + 1] = 5.0;
                crf.emissions[w_ppd as usize * 3 + 2] = 5.0;
            }
        }
        let model = S1Model::new(model.schema, model.config, model.classifier, model.taggers).unwrap();
        let events = predict_s1(&model, &doc("Now smokes 1 ppd."));
        assert_eq!(events.len(), 1);
        let ev = &events[0];
        assert_eq!(ev.trigger.span, Span::new(4, 10));
        assert_eq!(ev.span_only_args["Amount"].len(), 1);
        assert_eq!(ev.span_only_args["Amount"][0].span, Span::new(11, 16));
        assert!(ev.is_schema_valid(&schema));
    }

    #[test]
    fn history_implies_past_before_fallback() {
        let schema = Schema::default_schema();
        let (mut model, vocab) = crafted(&schema);
        for t in model.classifier.targets.clone() {
            set_bias(&mut model, &t, -5.0);
        }
        set_bias(&mut model, &Target::labeled("Tobacco", "Status", "current"), -1.0);
        let mut v = vocab;
        let w_ago = v.intern("w=ago");
        for (t, crf) in model.taggers.iter_mut() {
            crf.vocabulary = v.clone();
            crf.emissions = vec![0.0; v.len() * 3];
            if *t == Target::span_only("Tobacco", "History") {
                crf.emissions[w_ago as usize * 3 + 1] = 5.0;
            }
        }
        let model = S1Model::new(model.schema, model.config, model.classifier, model.taggers).unwrap();
        let events = predict_s1(&model, &doc("Quit ago."));
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].label("Status"), Some("past"));
    }
}
