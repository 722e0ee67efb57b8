use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdoh_core::brat::{parse_ann, serialize_ann, AnnotatedDocument, EventAnnotation, EventArg, TextBound};
use sdoh_core::codec::{build_sandwich, parse_table};
use sdoh_core::events::normalize_events;
use sdoh_core::scorer::EventCorpus;
use sdoh_core::synth::{generate_corpus, GenConfig};
use sdoh_core::{Schema, Span, TextDocument};

pub fn corpus(seed: u64, n: usize) -> Vec<AnnotatedDocument> {
    generate_corpus(&GenConfig::new(seed, n), &Schema::default_schema()).expect("synthetic corpus")
}

pub fn event_corpus(docs: &[AnnotatedDocument], schema: &Schema) -> EventCorpus {
    docs.iter()
        .map(|d| {
            let (events, findings) = normalize_events(d, schema);
            assert!(findings.is_empty(), "{findings:?}");
            (d.doc_id().to_string(), events)
        })
        .collect()
}

/// `serialize ∘ parse` is the identity on `doc`, and parsing the output again
/// gives the same annotations.
pub fn brat_round_trips(doc: &AnnotatedDocument) -> bool {
    let Ok(ann) = serialize_ann(doc) else {
        return false;
    };
    let Ok(back) = parse_ann(&ann, doc.document().clone()) else {
        return false;
    };
    back == *doc && serialize_ann(&back).ok().as_deref() == Some(ann.as_str())
}

const EXOTIC: &[&str] = &["é", "日本", "🚬", "ß", "Ω", "\u{301}", "\t", "\r\n", "  "];

/// A synthetic document rewritten to stress the standoff format: a non-ASCII
/// prefix shifting every offset, discontinuous text-bounds, value-less
/// attributes, and relation and note lines kept verbatim.
pub fn mutate(doc: &AnnotatedDocument, rng: &mut ChaCha8Rng) -> AnnotatedDocument {
    let prefix: String = (0..rng.gen_range(0..4)).map(|_| EXOTIC[rng.gen_range(0..EXOTIC.len())]).collect();
    let shift = prefix.chars().count();
    let text = format!("{prefix}{}", doc.text());
    let document = TextDocument::new(doc.doc_id(), text.clone()).expect("document");
    let chars: Vec<char> = text.chars().collect();
    let surface = |s: &Span| chars[s.start..s.end].iter().collect::<String>();

    let (_, tbs, events, mut attrs, mut ignored) = doc.clone().into_parts();
    let mut tbs: Vec<TextBound> = tbs
        .into_iter()
        .map(|mut t| {
            for f in &mut t.fragments {
                *f = Span::new(f.start + shift, f.end + shift);
            }
            t
        })
        .collect();
    let mut events = events;
    let len = chars.len();
    let extra = rng.gen_range(0..3);
    for next_t in (tbs.len() + 100..).take(extra) {
        let a = rng.gen_range(0..len.max(1));
        let b = (a + rng.gen_range(0..6)).min(len);
        let c = (b + rng.gen_range(0..4)).min(len);
        let d = (c + rng.gen_range(0..6)).min(len);
        tbs.push(TextBound {
            id: format!("T{next_t}"),
            label: "Noise".into(),
            fragments: vec![Span::new(a, b), Span::new(c, d)],
            surface: String::new(),
        });
    }
    if let Some(t) = tbs.first().cloned() {
        events.push(EventAnnotation {
            id: "E900".into(),
            event_type: "Noise".into(),
            trigger_ref: t.id.clone(),
            args: vec![EventArg {
                role: "Other".into(),
                target: t.id.clone(),
            }],
        });
        attrs.push(sdoh_core::brat::AttributeAnnotation {
            id: "A900".into(),
            name: "Negated".into(),
            target: t.id.clone(),
            value: String::new(),
        });
        ignored.push(format!("R1\tRel Arg1:{} Arg2:{}", t.id, t.id));
        ignored.push(format!("#1\tAnnotatorNotes {}\tchecked {}", t.id, rng.gen::<u16>()));
    }
    // Surfaces are re-read after the shift; line breaks cannot appear in a T line.
    for t in &mut tbs {
        t.surface = t
            .fragments
            .iter()
            .map(&surface)
            .collect::<Vec<_>>()
            .join(" ")
            .replace(['\r', '\n'], " ");
    }
    AnnotatedDocument::new(document, tbs, events, attrs, ignored)
}

pub fn mutation_documents(seed: u64, count: usize) -> Vec<AnnotatedDocument> {
    let base = corpus(seed, count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    base.iter().map(|d| mutate(d, &mut rng)).collect()
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CodecStats {
    pub values: usize,
    pub values_recovered: usize,
    pub spans: usize,
    pub spans_exact: usize,
    pub rows_lost: usize,
}

/// Renders gold events into training-layout sandwiches, parses the gold rows
/// back against the flattened narrative and compares row by row.
pub fn codec_round_trip(docs: &[AnnotatedDocument], schema: &Schema) -> CodecStats {
    let mut st = CodecStats::default();
    for doc in docs {
        let (gold, _) = normalize_events(doc, schema);
        for et in &schema.event_types {
            let of_type: Vec<_> = gold.iter().filter(|e| e.event_type == et.name).cloned().collect();
            let s = build_sandwich(doc.text(), &et.name, Some(&gold), schema);
            let generated = s.gold_rows.clone().unwrap_or_default().join("\n");
            let (parsed, _) = parse_table(&generated, &s.narrative, &et.name, schema);
            if parsed.len() != of_type.len() {
                st.rows_lost += of_type.len().abs_diff(parsed.len());
            }
            for (i, g) in of_type.iter().enumerate() {
                let p = parsed.get(i);
                st.values += g.labeled_args.len();
                st.values_recovered += g
                    .labeled_args
                    .iter()
                    .filter(|(a, l)| p.and_then(|p| p.label(a)) == Some(l.value.as_str()))
                    .count();
                st.spans += 1;
                st.spans_exact += usize::from(p.is_some_and(|p| p.trigger.span == g.trigger.span));
                for (arg, ms) in &g.span_only_args {
                    let got: Vec<Span> = p
                        .and_then(|p| p.span_only_args.get(arg))
                        .map(|v| v.iter().map(|m| m.span).collect())
                        .unwrap_or_default();
                    for (k, m) in ms.iter().enumerate() {
                        st.spans += 1;
                        st.spans_exact += usize::from(got.get(k) == Some(&m.span));
                    }
                }
            }
        }
    }
    st
}
