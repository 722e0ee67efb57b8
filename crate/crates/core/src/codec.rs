//! Per-event-type tables and prompt files for text-to-table extraction.
//!
//! A table has one pipe-delimited row per event. Columns are `Trigger`, then
//! the labeled arguments, then the span-only arguments, in schema order.
//! Several spans of one argument share a cell, joined by `"; "`. A literal
//! `|` or `\` inside a cell is escaped with a backslash.

use std::collections::BTreeMap;

use crate::events::SdohEvent;
use crate::findings::Finding;
use crate::schema::{EventTypeDef, Schema};
use crate::span::{Mention, Span};

pub const SANDWICH_FORMAT: &str = "sdoh-sandwich";
pub const SANDWICH_VERSION: u64 = 1;
pub const SPAN_JOINER: &str = "; ";
pub const PROMPT_TEMPLATE: &str =
    "Make a table about {type} in the following story. Use exact words or phrases from the story.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTable {
    pub event_type: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn table_columns(et: &EventTypeDef) -> Vec<String> {
    let mut cols = vec!["Trigger".to_string()];
    cols.extend(et.labeled().map(|a| a.name.clone()));
    cols.extend(et.span_only().map(|a| a.name.clone()));
    cols
}

/// One row per event of `event_type`; events of other types are skipped.
/// An event type missing from the schema yields a table with only a Trigger column.
pub fn events_to_table(events: &[SdohEvent], event_type: &str, schema: &Schema) -> EventTable {
    let columns = schema
        .event_type(event_type)
        .map(table_columns)
        .unwrap_or_else(|| vec!["Trigger".to_string()]);
    let rows = events
        .iter()
        .filter(|e| e.event_type == event_type)
        .map(|e| {
            let mut row = vec![e.trigger.surface.clone()];
            for col in &columns[1..] {
                let cell = match (e.labeled_args.get(col), e.span_only_args.get(col)) {
                    (Some(l), _) => l.value.clone(),
                    (None, Some(ms)) => ms
                        .iter()
                        .map(|m| m.surface.as_str())
                        .collect::<Vec<_>>()
                        .join(SPAN_JOINER),
                    (None, None) => String::new(),
                };
                row.push(cell);
            }
            row
        })
        .collect();
    EventTable {
        event_type: event_type.to_string(),
        columns,
        rows,
    }
}

fn escape_cell(cell: &str) -> String {
    cell.replace('\\', "\\\\").replace('|', "\\|")
}

pub fn render_row(cells: &[String]) -> String {
    cells.iter().map(|c| escape_cell(c)).collect::<Vec<_>>().join(" | ")
}

/// Splits a row on unescaped pipes, trimming and unescaping each cell.
pub fn split_row(line: &str) -> Vec<String> {
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(n @ ('|' | '\\')) => cur.push(n),
                Some(n) => {
                    cur.push('\\');
                    cur.push(n);
                }
                None => cur.push('\\'),
            },
            '|' => cells.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    cells.push(cur);
    cells.into_iter().map(|c| c.trim().to_string()).collect()
}

impl EventTable {
    pub fn header(&self) -> String {
        render_row(&self.columns)
    }

    pub fn rendered_rows(&self) -> Vec<String> {
        self.rows.iter().map(|r| render_row(r)).collect()
    }

    /// Header line followed by one line per row.
    pub fn render(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for r in self.rendered_rows() {
            out.push_str(&r);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSandwich {
    pub event_type: String,
    pub prompt: String,
    pub narrative: String,
    pub header: String,
    pub gold_rows: Option<Vec<String>>,
}

/// Replaces every line break with a space, keeping character offsets.
pub fn flatten_narrative(text: &str) -> String {
    text.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }).collect()
}

pub fn build_sandwich(
    narrative: &str,
    event_type: &str,
    gold: Option<&[SdohEvent]>,
    schema: &Schema,
) -> PromptSandwich {
    let table = events_to_table(gold.unwrap_or_default(), event_type, schema);
    PromptSandwich {
        event_type: event_type.to_string(),
        prompt: PROMPT_TEMPLATE.replace("{type}", event_type),
        narrative: flatten_narrative(narrative),
        header: table.header(),
        gold_rows: gold.map(|_| table.rendered_rows()),
    }
}

impl PromptSandwich {
    /// Prompt, narrative and table, separated by blank lines. Without gold
    /// rows the text ends at the header.
    pub fn text(&self) -> String {
        let mut out = format!("{}\n\n{}\n\n{}\n", self.prompt, self.narrative, self.header);
        for r in self.gold_rows.iter().flatten() {
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    /// File form: a version line naming the document, event type and mode
    /// (`train` with gold rows, `infer` without), a blank line, then
    /// [`PromptSandwich::text`].
    pub fn to_file(&self, doc_id: &str) -> String {
        let mode = if self.gold_rows.is_some() { "train" } else { "infer" };
        format!(
            "# {SANDWICH_FORMAT} {SANDWICH_VERSION} doc={doc_id} type={} mode={mode}\n\n{}",
            self.event_type,
            self.text()
        )
    }

    /// Inverse of [`PromptSandwich::to_file`]; returns the document id too.
    pub fn from_file(content: &str) -> Result<(String, PromptSandwich), String> {
        let mut lines = content.split('\n');
        let first = lines.next().unwrap_or_default();
        let fields: Vec<&str> = first.split_whitespace().collect();
        match fields.as_slice() {
            ["#", fmt, ver, ..] if *fmt == SANDWICH_FORMAT => {
                if ver.parse::<u64>().ok() != Some(SANDWICH_VERSION) {
                    return Err(format!("unsupported sandwich version {ver}"));
                }
            }
            _ => return Err("missing sandwich header line".into()),
        }
        let field = |key: &str| {
            fields
                .iter()
                .find_map(|f| f.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .map(str::to_string)
                .ok_or_else(|| format!("header lacks {key}="))
        };
        let doc_id = field("doc")?;
        let event_type = field("type")?;
        let train = match field("mode")?.as_str() {
            "train" => true,
            "infer" => false,
            other => return Err(format!("unknown sandwich mode {other}")),
        };
        let rest: Vec<&str> = lines.collect();
        // blank, prompt, blank, narrative, blank, header, rows...
        if rest.len() < 6 || !rest[0].is_empty() || !rest[2].is_empty() || !rest[4].is_empty() {
            return Err("sandwich sections are malformed".into());
        }
        let rows: Vec<String> = rest[6..]
            .iter()
            .filter(|l| !l.is_empty())
            .map(|l| l.to_string())
            .collect();
        Ok((
            doc_id,
            PromptSandwich {
                event_type,
                prompt: rest[1].to_string(),
                narrative: rest[3].to_string(),
                header: rest[5].to_string(),
                gold_rows: train.then_some(rows),
            },
        ))
    }
}

fn fold(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

/// First case-insensitive occurrence of `needle` at or after `from`, in chars.
pub fn find_ci(haystack: &[char], needle: &str, from: usize) -> Option<usize> {
    let needle: Vec<char> = needle.chars().map(fold).collect();
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (from..=haystack.len() - needle.len())
        .find(|&i| needle.iter().zip(&haystack[i..]).all(|(n, h)| *n == fold(*h)))
}

/// Forward from `from`, then from the start if nothing follows.
fn locate(haystack: &[char], needle: &str, from: usize) -> Option<usize> {
    find_ci(haystack, needle, from).or_else(|| find_ci(haystack, needle, 0))
}

/// Parses generated rows back into events over `narrative`.
///
/// A header line (cells equal to the column names, any case) is skipped.
/// Triggers are found by their first occurrence in the narrative; span-only
/// cells are searched forward from the previous match in the row and fall
/// back to the first occurrence anywhere.
pub fn parse_table(
    generated: &str,
    narrative: &str,
    event_type: &str,
    schema: &Schema,
) -> (Vec<SdohEvent>, Vec<Finding>) {
    let mut findings = Vec::new();
    let Some(et) = schema.event_type(event_type) else {
        findings.push(Finding::error(event_type, "event type is not in the schema"));
        return (Vec::new(), findings);
    };
    let columns = table_columns(et);
    let hay: Vec<char> = narrative.chars().collect();
    let slice = |s: usize, len: usize| hay[s..s + len].iter().collect::<String>();
    let mut events = Vec::new();

    for (n, line) in generated.lines().enumerate() {
        let id = format!("{event_type} row {}", n + 1);
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = split_row(line);
        if cells.iter().zip(&columns).all(|(c, h)| c.eq_ignore_ascii_case(h)) && cells.len() == columns.len() {
            continue;
        }
        if cells.len() > columns.len() {
            findings.push(Finding::warning(&id, format!("{} cells for {} columns; row dropped", cells.len(), columns.len())));
            continue;
        }
        cells.resize(columns.len(), String::new());

        let trigger_text = &cells[0];
        let Some(start) = (!trigger_text.is_empty()).then(|| find_ci(&hay, trigger_text, 0)).flatten() else {
            findings.push(Finding::warning(&id, format!("trigger {trigger_text:?} not found in the narrative; row dropped")));
            continue;
        };
        let len = trigger_text.chars().count();
        let trigger = Mention::new(Span::new(start, start + len), slice(start, len));
        let mut ev = SdohEvent::new(event_type, trigger.clone());
        let mut cursor = start;

        for (col, cell) in columns.iter().zip(&cells).skip(1) {
            if cell.is_empty() {
                continue;
            }
            let def = et.argument(col).expect("column from schema");
            if def.is_labeled() {
                if def.accepts(cell) {
                    ev = ev.with_label(col, cell, Some(trigger.clone()));
                } else {
                    findings.push(Finding::warning(&id, format!("{cell:?} is not a value of {col}; dropped")));
                }
                continue;
            }
            for part in cell.split(SPAN_JOINER.trim()).map(str::trim).filter(|p| !p.is_empty()) {
                match locate(&hay, part, cursor) {
                    Some(s) => {
                        let len = part.chars().count();
                        ev = ev.with_span(col, Mention::new(Span::new(s, s + len), slice(s, len)));
                        cursor = s;
                    }
                    None => findings.push(Finding::warning(&id, format!("{col} {part:?} not found; dropped"))),
                }
            }
        }
        for missing in ev.missing_mandatory(schema) {
            findings.push(Finding::warning(&id, format!("missing mandatory argument {missing}")));
        }
        events.push(ev);
    }
    (events, findings)
}

/// Sandwiches for every event type of the schema, keyed by event type.
pub fn encode_document(
    text: &str,
    gold: Option<&[SdohEvent]>,
    schema: &Schema,
) -> BTreeMap<String, PromptSandwich> {
    schema
        .event_types
        .iter()
        .map(|et| (et.name.clone(), build_sandwich(text, &et.name, gold, schema)))
        .collect()
}
