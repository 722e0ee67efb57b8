//! Deterministic synthetic social-history notes with gold annotations.
//!
//! Each document is a short note built from sentence templates. Templates are
//! plain strings with `{...}` slots:
//!
//! ```text
//! {T}                    trigger of event 0, default lexicon
//! {Status:Denies|No}     argument of event 0, inline choices
//! {1:T:alcohol}          trigger of event 1
//! {0,1,2:Status:Denies}  one phrase shared by events 0, 1 and 2
//! ```
//!
//! Labeled values come from the template, never from the chosen phrase.
//! Labeled arguments with no slot are anchored on the trigger.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brat::{AnnotatedDocument, TextDocument};
use crate::events::{denormalize_events, EventError, SdohEvent};
use crate::schema::Schema;
use crate::span::{Mention, Span};

pub const TEMPLATE_VERSION: &str = "synth-templates-1";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("no template fits the schema")]
    NoTemplates,
    #[error(transparent)]
    Event(#[from] EventError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub n_documents: usize,
    pub distractor_rate: f64,
    pub template_version: String,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 7,
            n_documents: 200,
            distractor_rate: 0.3,
            template_version: TEMPLATE_VERSION.to_string(),
        }
    }
}

impl GenConfig {
    pub fn new(seed: u64, n_documents: usize) -> Self {
        GenConfig {
            seed,
            n_documents,
            ..GenConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_documents == 0 {
            return Err(SynthError::InvalidConfig("n_documents must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.distractor_rate) {
            return Err(SynthError::InvalidConfig("distractor_rate must lie in [0, 1]".into()));
        }
        if self.template_version != TEMPLATE_VERSION {
            return Err(SynthError::InvalidConfig(format!(
                "unknown template version {:?}",
                self.template_version
            )));
        }
        Ok(())
    }
}

struct Template {
    events: &'static [&'static str],
    /// `(event index, argument, value)`
    labels: &'static [(usize, &'static str, &'static str)],
    text: &'static str,
}

const fn t1(
    event: &'static [&'static str],
    labels: &'static [(usize, &'static str, &'static str)],
    text: &'static str,
) -> Template {
    Template {
        events: event,
        labels,
        text,
    }
}

const ALC: &[&str] = &["Alcohol"];
const DRG: &[&str] = &["Drug"];
const TOB: &[&str] = &["Tobacco"];
const EMP: &[&str] = &["Employment"];
const LIV: &[&str] = &["LivingStatus"];

#[rustfmt::skip]
const SINGLE: &[Template] = &[
    t1(ALC, &[(0, "Status", "none")], "{Status:Denies|Denies any} {T} use."),
    t1(ALC, &[(0, "Status", "none")], "{T:EtOH|ETOH|Alcohol}: {Status:none|denies|negative}."),
    t1(ALC, &[(0, "Status", "none")], "{Status:No} {T} use reported."),
    t1(ALC, &[(0, "Status", "current")], "{Status:Currently} {T:drinks} {Amount} {Frequency}."),
    t1(ALC, &[(0, "Status", "current")], "{T:EtOH|ETOH|Alcohol}: {Status:current|yes}, {Amount} of {Type} {Frequency}."),
    t1(ALC, &[(0, "Status", "current")], "{Status:Social|Occasional} {T} use, mostly {Type}."),
    t1(ALC, &[(0, "Status", "current")], "{Status:Reports} {T:drinking} {Type} {Frequency} {Duration}."),
    t1(ALC, &[(0, "Status", "past")], "{Status:Quit|Stopped} {T:drinking} {History}."),
    t1(ALC, &[(0, "Status", "past")], "{Status:Former|Remote} heavy {T} use {Duration}, sober since {History:2010|2016|last spring}."),
    t1(ALC, &[(0, "Status", "past")], "{Status:History of} {T} abuse, last drink {History}."),
    t1(ALC, &[(0, "Status", "past")], "{T:EtOH|ETOH} {History}, previously {Amount} {Frequency}."),

    t1(DRG, &[(0, "Status", "none")], "{Status:Denies} {T:IVDU|illicit drug use|recreational drug use}."),
    t1(DRG, &[(0, "Status", "none")], "{Status:No} {T:IVDU|illicit drugs}."),
    t1(DRG, &[(0, "Status", "none")], "{T:Drugs|Illicits}: {Status:none|denies|never}."),
    t1(DRG, &[(0, "Status", "current")], "{Status:Active|Current} {T:IVDU} with {Type} {Frequency}."),
    t1(DRG, &[(0, "Status", "current")], "{Status:Currently} {T:uses} {Type} {Method}, {Amount} {Frequency}."),
    t1(DRG, &[(0, "Status", "current")], "{T:Drugs|Illicits}: {Status:current|yes}, {Type} {Duration}."),
    t1(DRG, &[(0, "Status", "past")], "{Status:Former|Prior|History of} {T:IVDU} {Duration}, clean since {History:2012|2018|last year}."),
    t1(DRG, &[(0, "Status", "past")], "{Status:Remote} {T:drug use} including {Type} {Method}."),
    t1(DRG, &[(0, "Status", "past")], "{Status:Quit} {T:using} {Type} {History}."),
    t1(DRG, &[(0, "Status", "past")], "{T:IVDU} {History}, used {Type} {Method}."),

    t1(TOB, &[(0, "Status", "none")], "{Status:Never} {T:smoker}."),
    t1(TOB, &[(0, "Status", "none")], "{Status:Denies} {T:tobacco|smoking}."),
    t1(TOB, &[(0, "Status", "none")], "{T:Tobacco}: {Status:never|none|denies}."),
    t1(TOB, &[(0, "Status", "current")], "{Status:Current|Active} {T:smoker}, {Amount} {Duration}."),
    t1(TOB, &[(0, "Status", "current")], "{Status:Currently} {T:smokes} {Amount} of {Type}."),
    t1(TOB, &[(0, "Status", "current")], "{T:Tobacco}: {Status:current|yes}, {Amount} {Frequency}."),
    t1(TOB, &[(0, "Status", "current")], "{Status:Current} {T:tobacco} user, {Method} {Type} {Frequency}."),
    t1(TOB, &[(0, "Status", "past")], "{Status:Former|Ex} {T:smoker} {Duration}, quit {History}."),
    t1(TOB, &[(0, "Status", "past")], "{Status:Quit} {T:smoking} {History}."),
    t1(TOB, &[(0, "Status", "past")], "{T:Tobacco}: {Status:quit|former} {History}, previously {Amount}."),
    t1(TOB, &[(0, "Status", "past")], "{T:Smoked} {Type} {Duration}, stopped {History}."),

    t1(EMP, &[(0, "Status", "employed")], "{T:Works} {Status:full time|part time} as a {Type} {Duration}."),
    t1(EMP, &[(0, "Status", "employed")], "{T:Occupation}: {Type}, {Status:currently working|employed}."),
    t1(EMP, &[(0, "Status", "employed")], "{T:Works} as a {Type}."),
    t1(EMP, &[(0, "Status", "homemaker")], "{T:Occupation}: {Status:homemaker|stay at home mother}."),
    t1(EMP, &[(0, "Status", "homemaker")], "{T:Works} as a {Status:homemaker} {Duration}."),
    t1(EMP, &[(0, "Status", "on_disability")], "{Status:On disability|Receives SSDI} since {History:2015|2012|her accident}, {T:previously worked} as a {Type}."),
    t1(EMP, &[(0, "Status", "on_disability")], "{T:Employment}: {Status:disabled|on disability}."),
    t1(EMP, &[(0, "Status", "retired")], "{Status:Retired} from {T:work} as a {Type} {History}."),
    t1(EMP, &[(0, "Status", "retired")], "{T:Employment|Occupation}: {Status:retired} {Type}."),
    t1(EMP, &[(0, "Status", "student")], "{T:Occupation}: {Status:student|college student|graduate student}."),
    t1(EMP, &[(0, "Status", "student")], "{T:Works} part time while a {Status:student}."),
    t1(EMP, &[(0, "Status", "unemployed")], "{T:Employment}: {Status:unemployed|not working} {Duration}."),
    t1(EMP, &[(0, "Status", "unemployed")], "{Status:Currently unemployed}, {T:previously worked} as a {Type}."),
    t1(EMP, &[(0, "Status", "unemployed")], "{Status:Lost} {T:job} as a {Type} {History}."),

    t1(LIV, &[(0, "Status", "current"), (0, "Type", "alone")], "{Status:Currently|Now} {T:lives} {Type}."),
    t1(LIV, &[(0, "Status", "current"), (0, "Type", "with_family")], "{Status:Currently|Now} {T:lives} {Type}."),
    t1(LIV, &[(0, "Status", "current"), (0, "Type", "with_others")], "{Status:Currently|Now} {T:lives} {Type} {Duration}."),
    t1(LIV, &[(0, "Status", "current"), (0, "Type", "homeless")], "{Status:Currently} {T:living} {Type}."),
    t1(LIV, &[(0, "Status", "current"), (0, "Type", "homeless")], "{T:Housing}: {Status:currently} {Type:homeless}."),
    t1(LIV, &[(0, "Status", "current"), (0, "Type", "alone")], "{T:Lives} {Type}."),
    t1(LIV, &[(0, "Status", "current"), (0, "Type", "with_family")], "{T:Lives} {Type} {Duration}."),
    t1(LIV, &[(0, "Status", "past"), (0, "Type", "alone")], "{Status:Previously|Formerly} {T:lived} {Type} {Duration}."),
    t1(LIV, &[(0, "Status", "past"), (0, "Type", "with_others")], "{Status:Previously|Formerly} {T:lived} {Type} until {History:2019|last year}."),
    t1(LIV, &[(0, "Status", "past"), (0, "Type", "homeless")], "{Status:Previously|Formerly} {T:living} {Type} {Duration}."),
    t1(LIV, &[(0, "Status", "past"), (0, "Type", "with_family")], "{Status:Previously} {T:lived} {Type} until {History:2017|her divorce}."),
];

#[rustfmt::skip]
const MULTI: &[Template] = &[
    Template {
        events: &["Tobacco", "Alcohol", "Drug"],
        labels: &[(0, "Status", "none"), (1, "Status", "none"), (2, "Status", "none")],
        text: "{0,1,2:Status:Denies} {0:T:tobacco}, {1:T:alcohol} or {2:T:illicit drug} use.",
    },
    Template {
        events: &["Tobacco", "Alcohol"],
        labels: &[(0, "Status", "none"), (1, "Status", "current")],
        text: "{0:Status:No} {0:T:tobacco}, {1:Status:occasional} {1:T:EtOH}.",
    },
    Template {
        events: &["LivingStatus", "Employment"],
        labels: &[(0, "Status", "current"), (0, "Type", "with_family"), (1, "Status", "employed")],
        text: "{0:T:Lives} {0:Type} and {1:T:works} as a {1:Type}.",
    },
];

const DISTRACTORS: &[&str] = &[
    "Patient presents with chest pain.",
    "No known drug allergies.",
    "Vitals stable on admission.",
    "Family history of alcoholism in father.",
    "Follow up in 2 weeks.",
    "Married with two children.",
    "Exercises three times a week.",
    "Denies recent travel.",
    "Enjoys gardening and reading.",
    "Lungs clear to auscultation.",
];

const HEADERS: &[&str] = &["Social History:", "SOCIAL HISTORY:", "SH:"];

fn lexicon(event: &str, role: &str, value: Option<&str>) -> &'static [&'static str] {
    match (event, role, value) {
        ("Alcohol", "T", _) => &["EtOH", "ETOH", "alcohol", "etoh"],
        ("Drug", "T", _) => &["IVDU", "illicit drugs", "recreational drugs"],
        ("Tobacco", "T", _) => &["tobacco", "smoking"],
        ("Employment", "T", _) => &["works", "occupation"],
        ("LivingStatus", "T", _) => &["lives"],
        ("Alcohol", "Amount", _) => &["2 beers", "a glass of wine", "3 drinks", "1-2 drinks", "a six pack"],
        ("Alcohol", "Type", _) => &["beer", "wine", "liquor", "vodka"],
        ("Drug", "Amount", _) => &["1 gram", "small amounts", "2 bags"],
        ("Drug", "Type", _) => &["cocaine", "heroin", "marijuana", "methamphetamine"],
        ("Drug", "Method", _) => &["IV", "intranasally", "by injection"],
        ("Tobacco", "Amount", _) => &["1 ppd", "half a pack", "1/2 ppd", "10 cigarettes", "2 ppd"],
        ("Tobacco", "Type", _) => &["cigarettes", "cigars", "chewing tobacco", "pipe tobacco"],
        ("Tobacco", "Method", _) => &["chews", "smokes"],
        ("Employment", "Type", _) => &["construction worker", "teacher", "nurse", "truck driver", "accountant"],
        ("LivingStatus", "Type", Some("alone")) => &["alone", "by herself", "by himself"],
        ("LivingStatus", "Type", Some("with_family")) => &["with her husband", "with his wife", "with family", "with her daughter"],
        ("LivingStatus", "Type", Some("with_others")) => &["with roommates", "with a friend", "in a group home"],
        ("LivingStatus", "Type", Some("homeless")) => &["in a shelter", "on the streets", "in his car"],
        (_, "Frequency", _) => &["daily", "per day", "weekly", "on weekends", "twice a week", "occasionally"],
        (_, "Duration", _) => &["for eight years", "for 20 years", "x 10 years", "for several years", "for 30 years"],
        (_, "History", _) => &["7 years ago", "in 2005", "10 years ago", "last year", "20 years ago"],
        _ => &[],
    }
}

enum Piece<'a> {
    Lit(&'a str),
    Slot {
        events: Vec<usize>,
        role: &'a str,
        choices: Option<Vec<&'a str>>,
    },
}

fn parse_template(text: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(Piece::Lit(&rest[..open]));
        }
        let close = open + rest[open..].find('}').expect("unclosed template slot");
        let mut parts: Vec<&str> = rest[open + 1..close].splitn(3, ':').collect();
        let events = if parts[0].chars().all(|c| c.is_ascii_digit() || c == ',') {
            let idx = parts.remove(0);
            idx.split(',').map(|i| i.parse().expect("event index")).collect()
        } else {
            vec![0]
        };
        let role = parts[0];
        let choices = parts.get(1).map(|c| c.split('|').collect());
        out.push(Piece::Slot { events, role, choices });
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        out.push(Piece::Lit(rest));
    }
    out
}

fn template_fits(t: &Template, schema: &Schema) -> bool {
    let known_events = t.events.iter().all(|e| schema.event_type(e).is_some());
    let known_labels = t.labels.iter().all(|(i, arg, value)| {
        schema
            .argument(t.events[*i], arg)
            .is_some_and(|d| d.accepts(value))
    });
    let known_slots = parse_template(t.text).iter().all(|p| match p {
        Piece::Lit(_) => true,
        Piece::Slot { events, role, .. } => events
            .iter()
            .all(|&i| *role == "T" || schema.argument(t.events[i], role).is_some()),
    });
    known_events && known_labels && known_slots
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Appends a template realization to `text` and returns its events.
fn realize(t: &Template, schema: &Schema, rng: &mut ChaCha8Rng, text: &mut String) -> Vec<SdohEvent> {
    let value_of = |event: usize, arg: &str| {
        t.labels
            .iter()
            .find(|(i, a, _)| *i == event && *a == arg)
            .map(|l| l.2)
    };
    let mut offset = text.chars().count();
    let mut triggers: Vec<Option<Mention>> = vec![None; t.events.len()];
    let mut args: Vec<(usize, &str, Mention)> = Vec::new();
    let mut first = true;
    for piece in parse_template(t.text) {
        let phrase = match piece {
            Piece::Lit(s) => s.to_string(),
            Piece::Slot { events, role, choices } => {
                let pool = choices.unwrap_or_else(|| {
                    lexicon(t.events[events[0]], role, value_of(events[0], role)).to_vec()
                });
                let phrase = pool.choose(rng).expect("nonempty slot lexicon").to_string();
                let phrase = if first { capitalize_first(&phrase) } else { phrase };
                let n = phrase.chars().count();
                let m = Mention::new(Span::new(offset, offset + n), phrase.clone());
                for i in events {
                    if role == "T" {
                        triggers[i] = Some(m.clone());
                    } else {
                        args.push((i, role, m.clone()));
                    }
                }
                phrase
            }
        };
        let phrase = if first { capitalize_first(&phrase) } else { phrase };
        first = false;
        offset += phrase.chars().count();
        text.push_str(&phrase);
    }

    let mut out: Vec<SdohEvent> = t
        .events
        .iter()
        .zip(triggers)
        .map(|(e, trig)| SdohEvent::new(*e, trig.expect("template has a trigger per event")))
        .collect();
    for (i, arg, value) in t.labels {
        let evidence = args
            .iter()
            .find(|(j, a, _)| j == i && a == arg)
            .map(|x| x.2.clone());
        out[*i] = out[*i].clone().with_label(arg, value, evidence);
    }
    for (i, arg, m) in args {
        let def = schema.argument(t.events[i], arg).expect("template checked");
        if !def.is_labeled() {
            out[i] = out[i].clone().with_span(arg, m);
        }
    }
    out
}

/// One document from its own random stream.
fn generate_document(
    index: usize,
    config: &GenConfig,
    schema: &Schema,
    singles: &[&Template],
    multis: &[&Template],
) -> Result<AnnotatedDocument, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);

    let mut types: Vec<&str> = schema.event_types.iter().map(|e| e.name.as_str()).collect();
    types.retain(|ty| singles.iter().any(|t| t.events[0] == *ty));
    types.shuffle(&mut rng);
    let wanted = rng.gen_range(1..=5usize.min(types.len()));

    let mut chosen: Vec<&Template> = Vec::new();
    let mut used: Vec<&str> = Vec::new();
    if rng.gen_bool(0.15) {
        if let Some(m) = multis.choose(&mut rng) {
            chosen.push(m);
            used.extend(m.events.iter().copied());
        }
    }
    for ty in types {
        if used.len() >= wanted {
            break;
        }
        if used.contains(&ty) {
            continue;
        }
        let pool: Vec<&&Template> = singles.iter().filter(|t| t.events[0] == ty).collect();
        chosen.push(pool.choose(&mut rng).expect("type has templates"));
        used.push(ty);
    }
    chosen.shuffle(&mut rng);

    let mut text = String::new();
    if rng.gen_bool(0.5) {
        text.push_str(HEADERS.choose(&mut rng).expect("headers"));
        text.push('\n');
    }
    let mut events = Vec::new();
    let mut sep = "";
    for t in chosen {
        if rng.gen_bool(config.distractor_rate) {
            text.push_str(sep);
            text.push_str(DISTRACTORS.choose(&mut rng).expect("distractors"));
            sep = if rng.gen_bool(0.3) { "\n" } else { " " };
        }
        text.push_str(sep);
        events.extend(realize(t, schema, &mut rng, &mut text));
        sep = if rng.gen_bool(0.3) { "\n" } else { " " };
    }
    if rng.gen_bool(config.distractor_rate) {
        text.push_str(sep);
        text.push_str(DISTRACTORS.choose(&mut rng).expect("distractors"));
    }
    text.push('\n');

    let doc = TextDocument::new(format!("synth_{index:04}"), text).expect("nonempty id");
    Ok(denormalize_events(&events, &doc, schema)?)
}

/// Documents `synth_0000 ..` in order. Document `i` depends only on the seed
/// and `i`, so a longer corpus extends a shorter one with the same seed.
pub fn generate_corpus(config: &GenConfig, schema: &Schema) -> Result<Vec<AnnotatedDocument>, SynthError> {
    config.validate()?;
    let singles: Vec<&Template> = SINGLE.iter().filter(|t| template_fits(t, schema)).collect();
    let multis: Vec<&Template> = MULTI.iter().filter(|t| template_fits(t, schema)).collect();
    if singles.is_empty() {
        return Err(SynthError::NoTemplates);
    }
    (0..config.n_documents)
        .map(|i| generate_document(i, config, schema, &singles, &multis))
        .collect()
}
