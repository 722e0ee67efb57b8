//! Joint phrase tagging followed by rule-based linking within each sentence.

pub mod rules;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::brat::{AnnotatedDocument, TextDocument};
use crate::bundle::{create_dir, PipelineError};
use crate::crf::{decode_bio_spans, encode_bio, train_crf, CrfConfig, CrfModel, TagSet};
use crate::events::{normalize_events, SdohEvent};
use crate::findings::Finding;
use crate::persist::{format_tag, Versioned};
use crate::schema::Schema;
use crate::span::{Mention, Span};
use crate::textproc::{featurize_tokens, sentences, FeatureVector, Sentence, VocabMode, Vocabulary};

pub use rules::{parse_ruleset, Direction, Rule, RuleError, RuleSet, STARTER_RULES};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PhraseCandidate {
    pub category: String,
    pub span: Span,
    pub surface: String,
}

/// Argument candidate categories: every argument name of the schema, in
/// first-appearance order.
pub fn candidate_categories(schema: &Schema) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for et in &schema.event_types {
        for a in &et.arguments {
            if !out.contains(&a.name) {
                out.push(a.name.clone());
            }
        }
    }
    out
}

/// Trigger categories (event types) followed by candidate categories.
pub fn joint_tagset(schema: &Schema) -> Result<TagSet, PipelineError> {
    let mut cats: Vec<String> = schema.event_types.iter().map(|e| e.name.clone()).collect();
    cats.extend(candidate_categories(schema));
    Ok(TagSet::new(&cats)?)
}

/// Gold phrases of one sentence: triggers first, so that a labeled argument
/// anchored on its trigger does not displace it.
fn gold_phrases(events: &[SdohEvent], bounds: &Span) -> Vec<(String, Span)> {
    let mut out = Vec::new();
    for ev in events {
        if let Some(s) = ev.trigger.span.clip(bounds) {
            out.push((ev.event_type.clone(), s));
        }
    }
    for ev in events {
        for (arg, l) in &ev.labeled_args {
            if let Some(s) = l.evidence.as_ref().and_then(|m| m.span.clip(bounds)) {
                out.push((arg.clone(), s));
            }
        }
        for (arg, ms) in &ev.span_only_args {
            out.extend(ms.iter().filter_map(|m| m.span.clip(bounds)).map(|s| (arg.clone(), s)));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop events lacking a mandatory labeled argument.
    #[default]
    Omit,
    /// Keep them; the finding is still reported.
    EmitIncomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S3Config {
    pub tagger: CrfConfig,
    pub missing_policy: MissingPolicy,
}

impl Default for S3Config {
    fn default() -> Self {
        S3Config {
            tagger: CrfConfig::default(),
            missing_policy: MissingPolicy::Omit,
        }
    }
}

impl S3Config {
    pub fn with_seed(seed: u64) -> Self {
        let mut c = S3Config::default();
        c.tagger.seed = seed;
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct S3Model {
    pub schema: Schema,
    pub config: S3Config,
    pub tagger: CrfModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct S3Manifest {
    format: String,
    format_version: u64,
    schema: Schema,
    config: S3Config,
    tagger_file: String,
    categories: Vec<String>,
}

impl Versioned for S3Manifest {
    const FORMAT: &'static str = "sdoh-s3-bundle";
    const VERSION: u64 = 1;
}

impl S3Model {
    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        create_dir(dir)?;
        self.tagger.save(&dir.join("phrase_tagger.json"))?;
        S3Manifest {
            format: format_tag::<S3Manifest>(),
            format_version: S3Manifest::VERSION,
            schema: self.schema.clone(),
            config: self.config.clone(),
            tagger_file: "phrase_tagger.json".into(),
            categories: self.tagger.tagset.categories().map(str::to_string).collect(),
        }
        .save(&dir.join("manifest.json"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let manifest = S3Manifest::load(&dir.join("manifest.json"))?;
        let tagger = CrfModel::load(&dir.join(&manifest.tagger_file))?;
        if tagger.tagset != joint_tagset(&manifest.schema)? {
            return Err(PipelineError::Bundle("phrase tagger labels differ from the schema".into()));
        }
        Ok(S3Model {
            schema: manifest.schema,
            config: manifest.config,
            tagger,
        })
    }
}

/// Trains the joint phrase tagger on the gold phrases of `docs`.
pub fn train_s3(
    docs: &[AnnotatedDocument],
    schema: &Schema,
    config: &S3Config,
) -> Result<(S3Model, Vec<Finding>), PipelineError> {
    let tagset = joint_tagset(schema)?;
    let mut findings = Vec::new();
    let mut vocab = Vocabulary::new();
    let mut examples: Vec<(Vec<FeatureVector>, Vec<usize>)> = Vec::new();
    for doc in docs {
        let (events, f) = normalize_events(doc, schema);
        findings.extend(f);
        for sent in sentences(doc.text()) {
            if sent.tokens.is_empty() {
                continue;
            }
            let phrases = gold_phrases(&events, &sent.span);
            let labels = tagset.encode(&encode_bio(&phrases, &sent.tokens))?;
            let feats = featurize_tokens(&sent.tokens, &mut VocabMode::Building(&mut vocab));
            examples.push((feats, labels));
        }
    }
    if examples.is_empty() {
        return Err(PipelineError::NoDocuments);
    }
    let tagger = train_crf(&examples, tagset, vocab, &config.tagger)?;
    Ok((
        S3Model {
            schema: schema.clone(),
            config: config.clone(),
            tagger,
        },
        findings,
    ))
}

/// Tagged phrases of `text` in document order.
pub fn detect_phrases(tagger: &CrfModel, text: &str) -> Vec<PhraseCandidate> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    for sent in sentences(text) {
        if sent.tokens.is_empty() {
            continue;
        }
        let feats = featurize_tokens(&sent.tokens, &mut VocabMode::Frozen(&tagger.vocabulary));
        let labels = tagger.tag(&feats).expect("nonempty sentence");
        for (category, span) in decode_bio_spans(&labels, &sent.tokens) {
            out.push(PhraseCandidate {
                category,
                surface: chars[span.start..span.end].iter().collect(),
                span,
            });
        }
    }
    out
}

struct Placed<'a> {
    cand: &'a PhraseCandidate,
    first: usize,
    last: usize,
}

/// Signed token offset of `c` from `t`: positive to the right, negative to the left.
fn offset(t: &Placed, c: &Placed) -> isize {
    if c.first > t.last {
        (c.first - t.last) as isize
    } else if t.first > c.last {
        -((t.first - c.last) as isize)
    } else {
        0
    }
}

/// Nearest-first order for candidates; on equal distance the left one comes first.
fn nearness(delta: isize) -> (usize, bool) {
    (delta.unsigned_abs(), delta > 0)
}

/// Links argument candidates to trigger candidates sentence by sentence.
///
/// Each argument candidate is owned by its nearest trigger whose event type
/// has an argument of the candidate's category (tie: the trigger on the
/// left). Rules then run in order for each trigger over the candidates it
/// owns. A labeled rule sets a value from the nearest matching candidate if
/// the argument is still unset; a span-only rule attaches every matching
/// candidate. Candidates are used at most once.
pub fn link_arguments(
    candidates: &[PhraseCandidate],
    rules: &RuleSet,
    sentences: &[Sentence],
    schema: &Schema,
    policy: MissingPolicy,
) -> (Vec<SdohEvent>, Vec<Finding>) {
    let mut events = Vec::new();
    let mut findings = Vec::new();
    for sent in sentences {
        let placed: Vec<Placed> = candidates
            .iter()
            .filter(|c| sent.span.overlaps(&c.span))
            .filter_map(|c| {
                let (first, last) = sent.token_range(&c.span)?;
                Some(Placed { cand: c, first, last })
            })
            .collect();
        let is_trigger = |p: &Placed| schema.event_type(&p.cand.category).is_some();
        let triggers: Vec<&Placed> = placed.iter().filter(|p| is_trigger(p)).collect();
        let args: Vec<&Placed> = placed.iter().filter(|p| !is_trigger(p)).collect();

        let owner: Vec<Option<usize>> = args
            .iter()
            .map(|a| {
                (0..triggers.len())
                    .filter(|&t| schema.argument(&triggers[t].cand.category, &a.cand.category).is_some())
                    .min_by_key(|&t| {
                        let d = offset(triggers[t], a);
                        (d.unsigned_abs(), d < 0)
                    })
            })
            .collect();
        let mut used = vec![false; args.len()];

        for (ti, trig) in triggers.iter().enumerate() {
            let t = trig.cand;
            let mut ev = SdohEvent::new(t.category.clone(), Mention::new(t.span, t.surface.clone()));
            for rule in rules.rules.iter().filter(|r| r.event_type == t.category) {
                if rule.trigger_pattern.as_ref().is_some_and(|p| !p.is_match(&t.surface)) {
                    continue;
                }
                if rule.value.is_some() && ev.label(&rule.arg_name).is_some() {
                    continue;
                }
                let mut hits: Vec<(usize, isize)> = (0..args.len())
                    .filter(|&i| !used[i] && owner[i] == Some(ti) && args[i].cand.category == rule.arg_name)
                    .map(|i| (i, offset(trig, args[i])))
                    .filter(|&(i, d)| rule.reaches(d) && rule.candidate_pattern.is_match(&args[i].cand.surface))
                    .collect();
                hits.sort_by_key(|&(i, d)| (nearness(d), i));
                if let Some(value) = &rule.value {
                    if let Some(&(i, _)) = hits.first() {
                        let c = args[i].cand;
                        ev = ev.with_label(&rule.arg_name, value, Some(Mention::new(c.span, c.surface.clone())));
                        used[i] = true;
                    }
                } else {
                    hits.sort_by_key(|&(i, _)| args[i].first);
                    for (i, _) in hits {
                        let c = args[i].cand;
                        ev = ev.with_span(&rule.arg_name, Mention::new(c.span, c.surface.clone()));
                        used[i] = true;
                    }
                }
            }

            let missing = ev.missing_mandatory(schema);
            if missing.is_empty() {
                events.push(ev);
                continue;
            }
            let id = format!("{} trigger {}", t.category, t.span);
            let action = match policy {
                MissingPolicy::Omit => "event omitted",
                MissingPolicy::EmitIncomplete => "event kept",
            };
            findings.push(Finding::warning(
                id,
                format!("no rule set mandatory {}; {action}", missing.join(", ")),
            ));
            if policy == MissingPolicy::EmitIncomplete {
                events.push(ev);
            }
        }
    }
    (events, findings)
}

/// Events for one document. Finding ids are prefixed with the document id.
pub fn predict_s3(model: &S3Model, rules: &RuleSet, doc: &TextDocument) -> (Vec<SdohEvent>, Vec<Finding>) {
    let candidates = detect_phrases(&model.tagger, doc.text());
    let sents = sentences(doc.text());
    let (events, mut findings) = link_arguments(&candidates, rules, &sents, &model.schema, model.config.missing_policy);
    for f in &mut findings {
        f.id = format!("{}:{}", doc.doc_id(), f.id);
    }
    (events, findings)
}
