//! Offset-preserving sentence splitting, tokenization and sparse features.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::span::Span;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub span: Span,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub span: Span,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Tokens whose span overlaps `span`, as an index range.
    pub fn token_range(&self, span: &Span) -> Option<(usize, usize)> {
        let first = self.tokens.iter().position(|t| t.span.overlaps(span))?;
        let last = self.tokens.iter().rposition(|t| t.span.overlaps(span))?;
        Some((first, last))
    }

    /// Span covering tokens `first..=last`.
    pub fn tokens_span(&self, first: usize, last: usize) -> Span {
        Span::new(self.tokens[first].span.start, self.tokens[last].span.end)
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

/// Splits at newline runs, and after `.`, `?` or `!` when followed by
/// whitespace and then an uppercase letter or digit. Sentences are trimmed
/// of surrounding whitespace; offsets are in code points.
pub fn split_sentences(text: &str) -> Vec<Span> {
    let chars: Vec<char> = text.chars().collect();
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' || c == '\r' {
            cuts.push(i);
        } else if is_terminal(c) {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            if j > i + 1 && j < chars.len() && (chars[j].is_uppercase() || chars[j].is_ascii_digit()) {
                cuts.push(i + 1);
            }
        }
        i += 1;
    }
    cuts.push(chars.len());

    let mut spans = Vec::new();
    let mut start = 0;
    for cut in cuts {
        let mut s = start;
        let mut e = cut;
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            spans.push(Span::new(s, e));
        }
        start = cut;
    }
    spans
}

/// Maximal alphanumeric runs become tokens; every other non-whitespace character
/// is a token of its own. Offsets are relative to `text`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut run: Option<(usize, String)> = None;
    let flush = |run: &mut Option<(usize, String)>, end: usize, tokens: &mut Vec<Token>| {
        if let Some((start, surface)) = run.take() {
            tokens.push(Token {
                span: Span::new(start, end),
                surface,
            });
        }
    };
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        n = i + 1;
        if c.is_alphanumeric() {
            match &mut run {
                Some((_, s)) => s.push(c),
                None => run = Some((i, c.to_string())),
            }
            continue;
        }
        flush(&mut run, i, &mut tokens);
        if !c.is_whitespace() {
            tokens.push(Token {
                span: Span::new(i, i + 1),
                surface: c.to_string(),
            });
        }
    }
    flush(&mut run, n, &mut tokens);
    tokens
}

/// Sentences of `text` with tokens in document offsets.
pub fn sentences(text: &str) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    split_sentences(text)
        .into_iter()
        .map(|span| {
            let slice: String = chars[span.start..span.end].iter().collect();
            let tokens = tokenize(&slice)
                .into_iter()
                .map(|t| Token {
                    span: Span::new(t.span.start + span.start, t.span.end + span.start),
                    surface: t.surface,
                })
                .collect();
            Sentence { span, tokens }
        })
        .collect()
}

/// Interned feature strings. Ids are assigned in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(names: Vec<String>) -> Self {
        let ids = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        Vocabulary { names, ids }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.names
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(id) = self.ids.get(name) {
            return *id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }
}

/// How feature strings are mapped to ids.
pub enum VocabMode<'a> {
    /// Unknown features are added.
    Building(&'a mut Vocabulary),
    /// Unknown features are dropped.
    Frozen(&'a Vocabulary),
}

impl VocabMode<'_> {
    pub fn vectorize<S: AsRef<str>>(&mut self, features: &[S]) -> FeatureVector {
        let ids = features.iter().filter_map(|f| match self {
            VocabMode::Building(v) => Some(v.intern(f.as_ref())),
            VocabMode::Frozen(v) => v.get(f.as_ref()),
        });
        FeatureVector::from_ids(ids)
    }
}

/// Sparse vector, sorted by feature id, binary presence weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn from_ids(ids: impl IntoIterator<Item = u32>) -> Self {
        let mut ids: Vec<u32> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        FeatureVector {
            entries: ids.into_iter().map(|i| (i, 1.0)).collect(),
        }
    }

    /// Builds from arbitrary (id, weight) pairs; repeated ids are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut entries: Vec<(u32, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (id, w) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == id => last.1 += w,
                _ => merged.push((id, w)),
            }
        }
        FeatureVector { entries: merged }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, w)| weights.get(i as usize).copied().unwrap_or(0.0) * w)
            .sum()
    }

    pub fn max_id(&self) -> Option<u32> {
        self.entries.last().map(|e| e.0)
    }
}

fn has_digit(s: &str) -> bool {
    s.chars().any(|c| c.is_ascii_digit())
}

/// Sentence-level feature names: lowercase unigrams and bigrams, a digit flag, and a bias.
pub fn sentence_feature_names(tokens: &[Token]) -> Vec<String> {
    let lower: Vec<String> = tokens.iter().map(|t| t.surface.to_lowercase()).collect();
    let mut out = vec!["bias".to_string()];
    out.extend(lower.iter().map(|w| format!("w={w}")));
    out.extend(lower.windows(2).map(|p| format!("b={}|{}", p[0], p[1])));
    if tokens.iter().any(|t| has_digit(&t.surface)) {
        out.push("has_digit".to_string());
    }
    out
}

/// Collapsed character-class shape: `EtOH` -> `XxX`, `1-2` -> `9-9`.
pub fn word_shape(word: &str) -> String {
    let mut shape = String::new();
    for c in word.chars() {
        let class = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            '9'
        } else {
            c
        };
        if !shape.ends_with(class) {
            shape.push(class);
        }
    }
    shape
}

/// Token-context feature names at `index`.
pub fn token_feature_names(tokens: &[Token], index: usize) -> Vec<String> {
    let word = tokens[index].surface.to_lowercase();
    let chars: Vec<char> = word.chars().collect();
    let mut out = vec!["bias".to_string(), format!("w={word}")];
    for k in 1..=chars.len().min(3) {
        let prefix: String = chars[..k].iter().collect();
        let suffix: String = chars[chars.len() - k..].iter().collect();
        out.push(format!("p{k}={prefix}"));
        out.push(format!("s{k}={suffix}"));
    }
    out.push(format!("shape={}", word_shape(&tokens[index].surface)));
    let prev = index
        .checked_sub(1)
        .map(|i| tokens[i].surface.to_lowercase())
        .unwrap_or_else(|| "<s>".into());
    let next = tokens
        .get(index + 1)
        .map(|t| t.surface.to_lowercase())
        .unwrap_or_else(|| "</s>".into());
    out.push(format!("w-1={prev}"));
    out.push(format!("w+1={next}"));
    out
}

pub fn featurize_sentence(tokens: &[Token], mut vocab: VocabMode<'_>) -> FeatureVector {
    vocab.vectorize(&sentence_feature_names(tokens))
}

pub fn featurize_token_context(tokens: &[Token], index: usize, mut vocab: VocabMode<'_>) -> FeatureVector {
    vocab.vectorize(&token_feature_names(tokens, index))
}

/// Token-context vectors for every position of a sentence.
pub fn featurize_tokens(tokens: &[Token], vocab: &mut VocabMode<'_>) -> Vec<FeatureVector> {
    (0..tokens.len())
        .map(|i| vocab.vectorize(&token_feature_names(tokens, i)))
        .collect()
}
