use std::fmt;

use serde::{Deserialize, Serialize};

/// Half-open character range `[start, end)` measured in Unicode code points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// True when the two ranges share at least one character.
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Intersection, or `None` when the ranges do not overlap.
    pub fn clip(&self, bounds: &Span) -> Option<Span> {
        let start = self.start.max(bounds.start);
        let end = self.end.min(bounds.end);
        (start < end).then_some(Span { start, end })
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.start, self.end)
    }
}

/// A span together with the text it covers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub span: Span,
    pub surface: String,
}

impl Mention {
    pub fn new(span: Span, surface: impl Into<String>) -> Self {
        Mention {
            span,
            surface: surface.into(),
        }
    }
}

/// Maps code-point offsets of a string to byte offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharIndex {
    bytes: Vec<usize>,
}

impl CharIndex {
    pub fn new(text: &str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        CharIndex { bytes }
    }

    /// Number of code points.
    pub fn char_len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn byte_offset(&self, char_offset: usize) -> Option<usize> {
        self.bytes.get(char_offset).copied()
    }

    pub fn slice<'a>(&self, text: &'a str, span: Span) -> Option<&'a str> {
        if span.start > span.end {
            return None;
        }
        let start = self.byte_offset(span.start)?;
        let end = self.byte_offset(span.end)?;
        text.get(start..end)
    }
}
