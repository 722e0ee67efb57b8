use crate::span::Span;
use crate::textproc::Token;

fn split_tag(label: &str) -> Option<(bool, &str)> {
    if let Some(c) = label.strip_prefix("B-") {
        Some((true, c))
    } else {
        label.strip_prefix("I-").map(|c| (false, c))
    }
}

/// Turns BIO labels into `(category, span)` pairs. An `I-` that does not
/// continue a span of its own category opens a new one; anything that is
/// neither `B-` nor `I-` counts as outside.
pub fn decode_bio_spans<S: AsRef<str>>(labels: &[S], tokens: &[Token]) -> Vec<(String, Span)> {
    assert_eq!(labels.len(), tokens.len(), "labels and tokens differ in length");
    let mut out: Vec<(String, Span)> = Vec::new();
    let mut open: Option<(&str, usize, usize)> = None;
    let mut close = |open: &mut Option<(&str, usize, usize)>| {
        if let Some((cat, first, last)) = open.take() {
            out.push((cat.to_string(), Span::new(tokens[first].span.start, tokens[last].span.end)));
        }
    };
    for (i, label) in labels.iter().enumerate() {
        match split_tag(label.as_ref()) {
            Some((false, cat)) if matches!(open, Some((c, _, _)) if c == cat) => {
                if let Some(o) = open.as_mut() {
                    o.2 = i;
                }
            }
            Some((_, cat)) => {
                close(&mut open);
                open = Some((cat, i, i));
            }
            None => close(&mut open),
        }
    }
    close(&mut open);
    out
}

/// BIO labels marking each span over the tokens it overlaps. Spans are taken
/// in order and tokens already claimed by an earlier span are left alone.
pub fn encode_bio<S: AsRef<str>>(spans: &[(S, Span)], tokens: &[Token]) -> Vec<String> {
    let mut labels = vec![super::OUTSIDE.to_string(); tokens.len()];
    for (cat, span) in spans {
        let mut first = true;
        for (i, tok) in tokens.iter().enumerate() {
            if !tok.span.overlaps(span) {
                continue;
            }
            if labels[i] != super::OUTSIDE {
                first = true;
                continue;
            }
            labels[i] = format!("{}-{}", if first { "B" } else { "I" }, cat.as_ref());
            first = false;
        }
    }
    labels
}
