//! Normalized SDOH events and their mapping to and from brat annotations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brat::{
    AnnotatedDocument, AttributeAnnotation, EventAnnotation, EventArg, TextBound, TextDocument,
};
use crate::findings::Finding;
use crate::schema::Schema;
use crate::span::{Mention, Span};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabeledArg {
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Mention>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SdohEvent {
    pub event_type: String,
    pub trigger: Mention,
    #[serde(default)]
    pub labeled_args: BTreeMap<String, LabeledArg>,
    #[serde(default)]
    pub span_only_args: BTreeMap<String, Vec<Mention>>,
}

impl SdohEvent {
    pub fn new(event_type: impl Into<String>, trigger: Mention) -> Self {
        SdohEvent {
            event_type: event_type.into(),
            trigger,
            labeled_args: BTreeMap::new(),
            span_only_args: BTreeMap::new(),
        }
    }

    pub fn with_label(mut self, arg: &str, value: &str, evidence: Option<Mention>) -> Self {
        self.labeled_args.insert(
            arg.to_string(),
            LabeledArg {
                value: value.to_string(),
                evidence,
            },
        );
        self
    }

    pub fn with_span(mut self, arg: &str, mention: Mention) -> Self {
        self.span_only_args
            .entry(arg.to_string())
            .or_default()
            .push(mention);
        self
    }

    pub fn label(&self, arg: &str) -> Option<&str> {
        self.labeled_args.get(arg).map(|l| l.value.as_str())
    }

    /// Elements of this event that the schema does not know: type, argument names, values.
    pub fn unknown_parts(&self, schema: &Schema) -> Vec<String> {
        let Some(et) = schema.event_type(&self.event_type) else {
            return vec![format!("unknown event type {}", self.event_type)];
        };
        let mut out = Vec::new();
        for (name, arg) in &self.labeled_args {
            match et.argument(name) {
                Some(def) if def.is_labeled() => {
                    if !def.accepts(&arg.value) {
                        out.push(format!("unknown value {}/{}={}", et.name, name, arg.value));
                    }
                }
                _ => out.push(format!("unknown labeled argument {}/{}", et.name, name)),
            }
        }
        for name in self.span_only_args.keys() {
            if !et.argument(name).is_some_and(|d| !d.is_labeled()) {
                out.push(format!("unknown span-only argument {}/{}", et.name, name));
            }
        }
        out
    }

    /// Mandatory labeled arguments of the event type that this event lacks.
    pub fn missing_mandatory<'s>(&self, schema: &'s Schema) -> Vec<&'s str> {
        schema
            .event_type(&self.event_type)
            .map(|et| {
                et.labeled()
                    .filter(|a| a.mandatory && !self.labeled_args.contains_key(&a.name))
                    .map(|a| a.name.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn is_schema_valid(&self, schema: &Schema) -> bool {
        self.unknown_parts(schema).is_empty() && self.missing_mandatory(schema).is_empty()
    }

    /// Every span this event references.
    pub fn spans(&self) -> impl Iterator<Item = Span> + '_ {
        std::iter::once(self.trigger.span)
            .chain(
                self.labeled_args
                    .values()
                    .filter_map(|l| l.evidence.as_ref().map(|m| m.span)),
            )
            .chain(self.span_only_args.values().flatten().map(|m| m.span))
    }
}

#[derive(Debug, Error)]
pub enum EventError {
    #[error("event {index}: span {span} lies outside text of length {len}")]
    SpanOutOfRange { index: usize, span: Span, len: usize },
    #[error("event {index}: {message}")]
    NotInSchema { index: usize, message: String },
}

/// Strips a repeated-role suffix: `History2` -> `History`.
pub fn role_base(role: &str) -> &str {
    let trimmed = role.trim_end_matches(|c: char| c.is_ascii_digit());
    if trimmed.is_empty() {
        role
    } else {
        trimmed
    }
}

fn mention_of(doc: &AnnotatedDocument, tb: &TextBound) -> Option<Mention> {
    let span = tb.first_fragment()?;
    let surface = doc.document().slice(span)?;
    Some(Mention::new(span, surface))
}

/// Converts brat events into schema-checked [`SdohEvent`]s.
///
/// Non-conforming pieces are skipped and reported; nothing is dropped silently.
pub fn normalize_events(doc: &AnnotatedDocument, schema: &Schema) -> (Vec<SdohEvent>, Vec<Finding>) {
    let mut events = Vec::new();
    let mut findings = Vec::new();
    let doc_id = doc.doc_id();

    for e in doc.events() {
        let eid = format!("{doc_id}:{}", e.id);
        let Some(et) = schema.event_type(&e.event_type) else {
            findings.push(Finding::warning(&eid, format!("unknown event type {}", e.event_type)));
            continue;
        };
        let Some(trigger) = doc.text_bound(&e.trigger_ref).and_then(|t| mention_of(doc, t)) else {
            findings.push(Finding::error(&eid, format!("unresolved trigger {}", e.trigger_ref)));
            continue;
        };
        let mut event = SdohEvent::new(&et.name, trigger);

        for arg in &e.args {
            let name = role_base(&arg.role);
            let Some(def) = et.argument(name) else {
                findings.push(Finding::warning(&eid, format!("unknown role {}", arg.role)));
                continue;
            };
            let Some(tb) = doc.text_bound(&arg.target) else {
                findings.push(Finding::error(&eid, format!("unresolved argument {}", arg.target)));
                continue;
            };
            let Some(mention) = mention_of(doc, tb) else {
                findings.push(Finding::error(&eid, format!("{} has no usable span", tb.id)));
                continue;
            };
            if def.is_labeled() {
                let attr_name = def.value_attribute();
                let Some(attr) = doc.attributes_of(&tb.id).find(|a| a.name == attr_name) else {
                    findings.push(Finding::warning(
                        &eid,
                        format!("{} argument {} has no {attr_name} attribute", name, tb.id),
                    ));
                    continue;
                };
                if !def.accepts(&attr.value) {
                    findings.push(Finding::warning(
                        &eid,
                        format!("value {} not allowed for {}/{}", attr.value, et.name, name),
                    ));
                    continue;
                }
                if event.labeled_args.contains_key(name) {
                    findings.push(Finding::warning(&eid, format!("repeated labeled argument {name}")));
                    continue;
                }
                event = event.with_label(name, &attr.value, Some(mention));
            } else {
                event = event.with_span(name, mention);
            }
        }

        for missing in event.missing_mandatory(schema) {
            findings.push(Finding::warning(&eid, format!("missing mandatory argument {missing}")));
        }
        events.push(event);
    }
    (events, findings)
}

struct IdAlloc {
    t: usize,
    e: usize,
    a: usize,
}

impl IdAlloc {
    fn next_t(&mut self) -> String {
        self.t += 1;
        format!("T{}", self.t)
    }
    fn next_e(&mut self) -> String {
        self.e += 1;
        format!("E{}", self.e)
    }
    fn next_a(&mut self) -> String {
        self.a += 1;
        format!("A{}", self.a)
    }
}

/// Writes events back to brat with fresh ids.
///
/// Labeled arguments without evidence are anchored on the trigger span.
/// Repeated span-only roles are numbered `Name`, `Name2`, `Name3`, ...
pub fn denormalize_events(
    events: &[SdohEvent],
    document: &TextDocument,
    schema: &Schema,
) -> Result<AnnotatedDocument, EventError> {
    let len = document.char_len();
    let mut ids = IdAlloc { t: 0, e: 0, a: 0 };
    let mut tbs = Vec::new();
    let mut evs = Vec::new();
    let mut attrs = Vec::new();

    for (index, ev) in events.iter().enumerate() {
        if let Some(message) = ev.unknown_parts(schema).into_iter().next() {
            return Err(EventError::NotInSchema { index, message });
        }
        let et = schema.event_type(&ev.event_type).expect("checked above");
        let mut push_tb = |label: String, span: Span| -> Result<String, EventError> {
            let surface = match document.slice(span) {
                Some(s) if span.start < span.end => s,
                _ => return Err(EventError::SpanOutOfRange { index, span, len }),
            };
            let id = ids.next_t();
            tbs.push(TextBound {
                id: id.clone(),
                label,
                fragments: vec![span],
                surface: surface.to_string(),
            });
            Ok(id)
        };

        let trigger_ref = push_tb(et.name.clone(), ev.trigger.span)?;
        let mut args = Vec::new();
        let mut pending_attrs = Vec::new();
        for def in &et.arguments {
            if def.is_labeled() {
                let Some(l) = ev.labeled_args.get(&def.name) else {
                    continue;
                };
                let span = l.evidence.as_ref().map_or(ev.trigger.span, |m| m.span);
                let target = push_tb(def.span_label(), span)?;
                pending_attrs.push((def.value_attribute(), target.clone(), l.value.clone()));
                args.push(EventArg {
                    role: def.name.clone(),
                    target,
                });
            } else if let Some(mentions) = ev.span_only_args.get(&def.name) {
                for (k, m) in mentions.iter().enumerate() {
                    let target = push_tb(def.span_label(), m.span)?;
                    let role = if k == 0 {
                        def.name.clone()
                    } else {
                        format!("{}{}", def.name, k + 1)
                    };
                    args.push(EventArg { role, target });
                }
            }
        }
        evs.push(EventAnnotation {
            id: ids.next_e(),
            event_type: et.name.clone(),
            trigger_ref,
            args,
        });
        for (name, target, value) in pending_attrs {
            attrs.push(AttributeAnnotation {
                id: ids.next_a(),
                name,
                target,
                value,
            });
        }
    }
    Ok(AnnotatedDocument::new(
        document.clone(),
        tbs,
        evs,
        attrs,
        Vec::new(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brat::{parse_ann, serialize_ann, validate_document};

    fn doc(text: &str) -> TextDocument {
        TextDocument::new("d", text).unwrap()
    }

    fn m(text: &str, s: usize, e: usize) -> Mention {
        let chars: String = text.chars().skip(s).take(e - s).collect();
        Mention::new(Span::new(s, e), chars)
    }

    #[test]
    fn four_line_example_normalizes() {
        let ann = "T1\tAlcohol 0 4\tEtOH\nT2\tStatusTime 5 11\tdenies\nE1\tAlcohol:T1 Status:T2\nA1\tStatusTimeVal T2 none\n";
        let d = parse_ann(ann, doc("EtOH denies")).unwrap();
        let (events, findings) = normalize_events(&d, &Schema::default_schema());
        assert!(findings.is_empty(), "{findings:?}");
        assert_eq!(
            events,
            vec![SdohEvent::new("Alcohol", Mention::new(Span::new(0, 4), "EtOH")).with_label(
                "Status",
                "none",
                Some(Mention::new(Span::new(5, 11), "denies"))
            )]
        );
    }

    #[test]
    fn unknown_role_dropped_with_finding() {
        let ann = "T1\tAlcohol 0 4\tEtOH\nT2\tStatusTime 5 11\tdenies\nT3\tFoo 5 11\tdenies\nE1\tAlcohol:T1 Status:T2 Foo:T3\nA1\tStatusTimeVal T2 none\n";
        let d = parse_ann(ann, doc("EtOH denies")).unwrap();
        let (events, findings) = normalize_events(&d, &Schema::default_schema());
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].label("Status"), Some("none"));
        assert!(events[0].span_only_args.is_empty());
        assert_eq!(findings.len(), 1);
        assert!(findings[0].message.contains("Foo"));
    }

    #[test]
    fn two_same_type_events() {
        let text = "Smokes cigars. Quit cigarettes.";
        let ann = "T1\tTobacco 0 6\tSmokes\nT2\tStatusTime 0 6\tSmokes\nE1\tTobacco:T1 Status:T2\nA1\tStatusTimeVal T2 current\n\
T3\tTobacco 20 30\tcigarettes\nT4\tStatusTime 15 19\tQuit\nE2\tTobacco:T3 Status:T4\nA2\tStatusTimeVal T4 past\n";
        let d = parse_ann(ann, doc(text)).unwrap();
        assert!(validate_document(&d).is_empty());
        let (events, findings) = normalize_events(&d, &Schema::default_schema());
        assert!(findings.is_empty());
        assert_eq!(events.len(), 2);
        assert!(events.iter().all(|e| e.event_type == "Tobacco"));
    }

    #[test]
    fn missing_attribute_omits_argument() {
        let ann = "T1\tAlcohol 0 4\tEtOH\nT2\tStatusTime 5 11\tdenies\nE1\tAlcohol:T1 Status:T2\n";
        let d = parse_ann(ann, doc("EtOH denies")).unwrap();
        let (events, findings) = normalize_events(&d, &Schema::default_schema());
        assert_eq!(events.len(), 1);
        assert!(events[0].labeled_args.is_empty());
        // one for the missing attribute, one for the mandatory violation
        assert_eq!(findings.len(), 2);
    }

    #[test]
    fn unknown_event_type_skipped() {
        let ann = "T1\tWeather 0 4\tEtOH\nE1\tWeather:T1\n";
        let d = parse_ann(ann, doc("EtOH")).unwrap();
        let (events, findings) = normalize_events(&d, &Schema::default_schema());
        assert!(events.is_empty());
        assert_eq!(findings.len(), 1);
    }

    #[test]
    fn empty_round_trip() {
        let d = denormalize_events(&[], &doc("nothing"), &Schema::default_schema()).unwrap();
        assert_eq!(d.annotation_count(), 0);
    }

    #[test]
    fn alcohol_event_round_trips() {
        let text = "Denies EtOH.";
        let schema = Schema::default_schema();
        let ev = SdohEvent::new("Alcohol", m(text, 7, 11)).with_label(
            "Status",
            "none",
            Some(m(text, 0, 6)),
        );
        let d = denormalize_events(std::slice::from_ref(&ev), &doc(text), &schema).unwrap();
        assert!(validate_document(&d).is_empty());
        let (back, findings) = normalize_events(&d, &schema);
        assert!(findings.is_empty());
        assert_eq!(back, vec![ev]);
    }

    #[test]
    fn repeated_roles_are_numbered() {
        let text = "Smoked 1 ppd, quit 2001 and again 2010.";
        let schema = Schema::default_schema();
        let ev = SdohEvent::new("Tobacco", m(text, 0, 6))
            .with_label("Status", "past", Some(m(text, 14, 18)))
            .with_span("History", m(text, 19, 23))
            .with_span("History", m(text, 34, 38));
        let d = denormalize_events(std::slice::from_ref(&ev), &doc(text), &schema).unwrap();
        let roles: Vec<&str> = d.events()[0].args.iter().map(|a| a.role.as_str()).collect();
        assert_eq!(roles, ["Status", "History", "History2"]);
        // survive a trip through the text format
        let reparsed = parse_ann(&serialize_ann(&d).unwrap(), doc(text)).unwrap();
        assert_eq!(reparsed, d);
        let (back, findings) = normalize_events(&reparsed, &schema);
        assert!(findings.is_empty());
        assert_eq!(back, vec![ev]);
    }

    #[test]
    fn placeholder_evidence_uses_trigger() {
        let text = "EtOH";
        let schema = Schema::default_schema();
        let ev = SdohEvent::new("Alcohol", m(text, 0, 4)).with_label("Status", "none", None);
        let d = denormalize_events(&[ev], &doc(text), &schema).unwrap();
        let (back, _) = normalize_events(&d, &schema);
        assert_eq!(
            back[0].labeled_args["Status"].evidence,
            Some(Mention::new(Span::new(0, 4), "EtOH"))
        );
    }

    #[test]
    fn out_of_range_span_rejected() {
        let ev = SdohEvent::new("Alcohol", Mention::new(Span::new(0, 40), "x"));
        let err = denormalize_events(&[ev], &doc("EtOH"), &Schema::default_schema()).unwrap_err();
        assert!(matches!(err, EventError::SpanOutOfRange { .. }));
    }

    #[test]
    fn role_suffix_stripping() {
        assert_eq!(role_base("History2"), "History");
        assert_eq!(role_base("Status"), "Status");
    }
}
