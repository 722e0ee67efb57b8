//! Reading, validating and writing brat standoff annotations.
//!
//! A document is a UTF-8 narrative (`<name>.txt`) paired with a line-oriented
//! annotation file (`<name>.ann`). Only text-bound (`T`), event (`E`) and
//! attribute (`A`) lines are modelled; every other line kind is kept verbatim
//! and written back unchanged. All offsets are Unicode code-point offsets.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::findings::Finding;
use crate::span::{CharIndex, Span};

#[derive(Debug, Error)]
pub enum BratError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {id} has offset {offset} beyond text length {len}")]
    OffsetOutOfRange {
        line: usize,
        id: String,
        offset: usize,
        len: usize,
    },
    #[error("cannot serialize: {id} references unknown annotation {target}")]
    Unresolved { id: String, target: String },
    #[error("document id must not be empty")]
    EmptyDocId,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Document {
        path: PathBuf,
        #[source]
        source: Box<BratError>,
    },
}

/// Narrative text with its identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextDocument {
    doc_id: String,
    text: String,
    index: CharIndex,
}

impl TextDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Result<Self, BratError> {
        let doc_id = doc_id.into();
        if doc_id.is_empty() {
            return Err(BratError::EmptyDocId);
        }
        let text = text.into();
        let index = CharIndex::new(&text);
        Ok(TextDocument {
            doc_id,
            text,
            index,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Length in code points.
    pub fn char_len(&self) -> usize {
        self.index.char_len()
    }

    pub fn slice(&self, span: Span) -> Option<&str> {
        self.index.slice(&self.text, span)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextBound {
    pub id: String,
    pub label: String,
    pub fragments: Vec<Span>,
    pub surface: String,
}

impl TextBound {
    /// Extent of the first fragment.
    pub fn first_fragment(&self) -> Option<Span> {
        self.fragments.first().copied()
    }

    /// Concatenation of the fragment texts joined by single spaces.
    pub fn expected_surface(&self, doc: &TextDocument) -> Option<String> {
        let parts: Option<Vec<&str>> = self.fragments.iter().map(|f| doc.slice(*f)).collect();
        parts.map(|p| p.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventArg {
    pub role: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventAnnotation {
    pub id: String,
    pub event_type: String,
    pub trigger_ref: String,
    pub args: Vec<EventArg>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeAnnotation {
    pub id: String,
    pub name: String,
    pub target: String,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnRef {
    TextBound(usize),
    Event(usize),
    Attribute(usize),
}

/// A narrative and its annotations. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDocument {
    document: TextDocument,
    text_bounds: Vec<TextBound>,
    events: Vec<EventAnnotation>,
    attributes: Vec<AttributeAnnotation>,
    ignored_lines: Vec<String>,
    id_index: HashMap<String, AnnRef>,
}

impl AnnotatedDocument {
    pub fn new(
        document: TextDocument,
        text_bounds: Vec<TextBound>,
        events: Vec<EventAnnotation>,
        attributes: Vec<AttributeAnnotation>,
        ignored_lines: Vec<String>,
    ) -> Self {
        let mut id_index = HashMap::new();
        for (i, t) in text_bounds.iter().enumerate() {
            id_index.entry(t.id.clone()).or_insert(AnnRef::TextBound(i));
        }
        for (i, e) in events.iter().enumerate() {
            id_index.entry(e.id.clone()).or_insert(AnnRef::Event(i));
        }
        for (i, a) in attributes.iter().enumerate() {
            id_index.entry(a.id.clone()).or_insert(AnnRef::Attribute(i));
        }
        AnnotatedDocument {
            document,
            text_bounds,
            events,
            attributes,
            ignored_lines,
            id_index,
        }
    }

    pub fn empty(document: TextDocument) -> Self {
        Self::new(document, Vec::new(), Vec::new(), Vec::new(), Vec::new())
    }

    pub fn document(&self) -> &TextDocument {
        &self.document
    }

    pub fn doc_id(&self) -> &str {
        self.document.doc_id()
    }

    pub fn text(&self) -> &str {
        self.document.text()
    }

    pub fn text_bounds(&self) -> &[TextBound] {
        &self.text_bounds
    }

    pub fn events(&self) -> &[EventAnnotation] {
        &self.events
    }

    pub fn attributes(&self) -> &[AttributeAnnotation] {
        &self.attributes
    }

    pub fn ignored_lines(&self) -> &[String] {
        &self.ignored_lines
    }

    pub fn lookup(&self, id: &str) -> Option<AnnRef> {
        self.id_index.get(id).copied()
    }

    pub fn text_bound(&self, id: &str) -> Option<&TextBound> {
        match self.lookup(id)? {
            AnnRef::TextBound(i) => self.text_bounds.get(i),
            _ => None,
        }
    }

    /// Attributes attached to `target`, in file order.
    pub fn attributes_of<'a>(
        &'a self,
        target: &'a str,
    ) -> impl Iterator<Item = &'a AttributeAnnotation> + 'a {
        self.attributes.iter().filter(move |a| a.target == target)
    }

    pub fn annotation_count(&self) -> usize {
        self.text_bounds.len() + self.events.len() + self.attributes.len()
    }

    pub fn into_parts(
        self,
    ) -> (
        TextDocument,
        Vec<TextBound>,
        Vec<EventAnnotation>,
        Vec<AttributeAnnotation>,
        Vec<String>,
    ) {
        (
            self.document,
            self.text_bounds,
            self.events,
            self.attributes,
            self.ignored_lines,
        )
    }
}

fn numbered_id(field: &str, prefix: char) -> bool {
    let mut chars = field.chars();
    chars.next() == Some(prefix) && {
        let rest = chars.as_str();
        !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> BratError {
    BratError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_text_bound(line_no: usize, line: &str, char_len: usize) -> Result<TextBound, BratError> {
    let fields: Vec<&str> = line.splitn(3, '\t').collect();
    if fields.len() != 3 {
        return Err(parse_err(
            line_no,
            format!("text-bound needs 3 tab-separated fields, found {}", fields.len()),
        ));
    }
    let id = fields[0].to_string();
    let (label, offsets) = fields[1]
        .split_once(' ')
        .ok_or_else(|| parse_err(line_no, format!("{id}: missing offsets")))?;
    if label.is_empty() {
        return Err(parse_err(line_no, format!("{id}: empty label")));
    }
    let mut fragments = Vec::new();
    for frag in offsets.split(';') {
        let nums: Vec<&str> = frag.split_whitespace().collect();
        if nums.len() != 2 {
            return Err(parse_err(line_no, format!("{id}: malformed fragment {frag:?}")));
        }
        let mut bounds = [0usize; 2];
        for (slot, n) in bounds.iter_mut().zip(&nums) {
            *slot = n
                .parse()
                .map_err(|_| parse_err(line_no, format!("{id}: non-numeric offset {n:?}")))?;
        }
        for &offset in &bounds {
            if offset > char_len {
                return Err(BratError::OffsetOutOfRange {
                    line: line_no,
                    id,
                    offset,
                    len: char_len,
                });
            }
        }
        fragments.push(Span::new(bounds[0], bounds[1]));
    }
    Ok(TextBound {
        id,
        label: label.to_string(),
        fragments,
        surface: fields[2].to_string(),
    })
}

fn parse_event(line_no: usize, line: &str) -> Result<EventAnnotation, BratError> {
    let (id, body) = line
        .split_once('\t')
        .ok_or_else(|| parse_err(line_no, "event needs 2 tab-separated fields"))?;
    if body.contains('\t') {
        return Err(parse_err(line_no, format!("{id}: unexpected extra field")));
    }
    let mut parts = body.split_whitespace().map(|p| {
        p.split_once(':')
            .map(|(role, target)| (role.to_string(), target.to_string()))
            .ok_or_else(|| parse_err(line_no, format!("{id}: expected ROLE:ID, found {p:?}")))
    });
    let (event_type, trigger_ref) = parts
        .next()
        .ok_or_else(|| parse_err(line_no, format!("{id}: missing trigger")))??;
    let args = parts
        .map(|r| r.map(|(role, target)| EventArg { role, target }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EventAnnotation {
        id: id.to_string(),
        event_type,
        trigger_ref,
        args,
    })
}

fn parse_attribute(line_no: usize, line: &str) -> Result<AttributeAnnotation, BratError> {
    let (id, body) = line
        .split_once('\t')
        .ok_or_else(|| parse_err(line_no, "attribute needs 2 tab-separated fields"))?;
    let parts: Vec<&str> = body.split_whitespace().collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(parse_err(
            line_no,
            format!("{id}: attribute needs NAME TARGET [VALUE]"),
        ));
    }
    Ok(AttributeAnnotation {
        id: id.to_string(),
        name: parts[0].to_string(),
        target: parts[1].to_string(),
        value: parts.get(2).map(|s| s.to_string()).unwrap_or_default(),
    })
}

/// Parses standoff annotation text against an already loaded narrative.
///
/// Surface mismatches are left for [`validate_document`]; malformed lines and
/// out-of-range offsets are hard errors.
pub fn parse_ann(ann_text: &str, document: TextDocument) -> Result<AnnotatedDocument, BratError> {
    let char_len = document.char_len();
    let mut text_bounds = Vec::new();
    let mut events = Vec::new();
    let mut attributes = Vec::new();
    let mut ignored = Vec::new();

    for (i, raw) in ann_text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let head = line.split(['\t', ' ']).next().unwrap_or("");
        if numbered_id(head, 'T') {
            text_bounds.push(parse_text_bound(line_no, line, char_len)?);
        } else if numbered_id(head, 'E') {
            events.push(parse_event(line_no, line)?);
        } else if numbered_id(head, 'A') {
            attributes.push(parse_attribute(line_no, line)?);
        } else {
            ignored.push(line.to_string());
        }
    }
    Ok(AnnotatedDocument::new(
        document,
        text_bounds,
        events,
        attributes,
        ignored,
    ))
}

/// Renders `T`, then `E`, then `A` lines, then retained foreign lines.
pub fn serialize_ann(doc: &AnnotatedDocument) -> Result<String, BratError> {
    let unresolved = |id: &str, target: &str| BratError::Unresolved {
        id: id.to_string(),
        target: target.to_string(),
    };
    for e in &doc.events {
        if doc.text_bound(&e.trigger_ref).is_none() {
            return Err(unresolved(&e.id, &e.trigger_ref));
        }
        if let Some(a) = e.args.iter().find(|a| doc.lookup(&a.target).is_none()) {
            return Err(unresolved(&e.id, &a.target));
        }
    }
    if let Some(a) = doc.attributes.iter().find(|a| doc.lookup(&a.target).is_none()) {
        return Err(unresolved(&a.id, &a.target));
    }

    let mut out = String::new();
    for t in &doc.text_bounds {
        let offsets: Vec<String> = t
            .fragments
            .iter()
            .map(|f| format!("{} {}", f.start, f.end))
            .collect();
        let _ = writeln!(out, "{}\t{} {}\t{}", t.id, t.label, offsets.join(";"), t.surface);
    }
    for e in &doc.events {
        let _ = write!(out, "{}\t{}:{}", e.id, e.event_type, e.trigger_ref);
        for a in &e.args {
            let _ = write!(out, " {}:{}", a.role, a.target);
        }
        out.push('\n');
    }
    for a in &doc.attributes {
        if a.value.is_empty() {
            let _ = writeln!(out, "{}\t{} {}", a.id, a.name, a.target);
        } else {
            let _ = writeln!(out, "{}\t{} {} {}", a.id, a.name, a.target, a.value);
        }
    }
    for line in &doc.ignored_lines {
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}

/// Checks every structural invariant; an empty result means the document is well formed.
pub fn validate_document(doc: &AnnotatedDocument) -> Vec<Finding> {
    let mut findings = Vec::new();
    let mut seen = HashSet::new();
    let len = doc.document.char_len();

    let ids = doc
        .text_bounds
        .iter()
        .map(|t| (&t.id, 'T'))
        .chain(doc.events.iter().map(|e| (&e.id, 'E')))
        .chain(doc.attributes.iter().map(|a| (&a.id, 'A')));
    for (id, prefix) in ids {
        if !numbered_id(id, prefix) {
            findings.push(Finding::error(id.as_str(), format!("id must match {prefix}<digits>")));
        }
        if !seen.insert(id.as_str()) {
            findings.push(Finding::error(id.as_str(), "duplicate id"));
        }
    }

    for t in &doc.text_bounds {
        if t.fragments.is_empty() {
            findings.push(Finding::error(&t.id, "text-bound has no fragments"));
            continue;
        }
        let mut ok = true;
        for (k, f) in t.fragments.iter().enumerate() {
            if f.start >= f.end {
                findings.push(Finding::error(&t.id, format!("fragment {f} is empty or reversed")));
                ok = false;
            }
            if f.end > len {
                findings.push(Finding::error(&t.id, format!("fragment {f} exceeds text length {len}")));
                ok = false;
            }
            if k > 0 && t.fragments[k - 1].end > f.start {
                findings.push(Finding::error(&t.id, "fragments overlap or are out of order"));
                ok = false;
            }
        }
        if ok {
            match t.expected_surface(&doc.document) {
                Some(expected) if expected == t.surface => {}
                Some(expected) => findings.push(Finding::error(
                    &t.id,
                    format!("surface {:?} does not match text {:?}", t.surface, expected),
                )),
                None => findings.push(Finding::error(&t.id, "fragments do not slice the text")),
            }
        }
    }

    for e in &doc.events {
        match doc.text_bound(&e.trigger_ref) {
            None => findings.push(Finding::error(
                &e.id,
                format!("unresolved reference {}", e.trigger_ref),
            )),
            Some(t) if t.label != e.event_type => findings.push(Finding::error(
                &e.id,
                format!("event type {} differs from trigger label {}", e.event_type, t.label),
            )),
            Some(_) => {}
        }
        for a in &e.args {
            if doc.text_bound(&a.target).is_none() {
                findings.push(Finding::error(
                    &e.id,
                    format!("unresolved reference {} (role {})", a.target, a.role),
                ));
            }
        }
    }

    let mut attr_keys = HashSet::new();
    for a in &doc.attributes {
        if doc.lookup(&a.target).is_none() {
            findings.push(Finding::error(&a.id, format!("unresolved reference {}", a.target)));
        }
        if a.value.is_empty() {
            findings.push(Finding::error(&a.id, "attribute value is empty"));
        }
        if !attr_keys.insert((a.name.as_str(), a.target.as_str())) {
            findings.push(Finding::error(
                &a.id,
                format!("second {} attribute on {}", a.name, a.target),
            ));
        }
    }
    findings
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BratError + '_ {
    move |source| BratError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads one `<stem>.txt` / `<stem>.ann` pair. A missing `.ann` yields an unannotated document.
pub fn read_document(txt_path: &Path) -> Result<AnnotatedDocument, BratError> {
    let text = fs::read_to_string(txt_path).map_err(io_err(txt_path))?;
    let doc_id = txt_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let document = TextDocument::new(doc_id, text)?;
    let ann_path = txt_path.with_extension("ann");
    let ann = match fs::read_to_string(&ann_path) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(io_err(&ann_path)(e)),
    };
    parse_ann(&ann, document).map_err(|e| BratError::Document {
        path: ann_path,
        source: Box::new(e),
    })
}

/// Reads every document of a corpus directory, sorted by document id.
pub fn read_corpus_dir(dir: &Path) -> Result<Vec<AnnotatedDocument>, BratError> {
    let mut txts = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            txts.push(path);
        }
    }
    txts.sort();
    txts.iter().map(|p| read_document(p)).collect()
}

/// Writes `<doc_id>.txt` and `<doc_id>.ann` into `dir`, creating it if needed.
pub fn write_document(dir: &Path, doc: &AnnotatedDocument) -> Result<(), BratError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let ann = serialize_ann(doc)?;
    let txt_path = dir.join(format!("{}.txt", doc.doc_id()));
    fs::write(&txt_path, doc.text()).map_err(io_err(&txt_path))?;
    let ann_path = dir.join(format!("{}.ann", doc.doc_id()));
    fs::write(&ann_path, ann).map_err(io_err(&ann_path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_LINES: &str =
        "T1\tAlcohol 0 4\tEtOH\nT2\tStatusTime 5 11\tdenies\nE1\tAlcohol:T1 Status:T2\nA1\tStatusTimeVal T2 none\n";

    fn doc(text: &str) -> TextDocument {
        TextDocument::new("d", text).unwrap()
    }

    #[test]
    fn single_text_bound() {
        let text = "Social history: EtOH none";
        let d = parse_ann("T1\tAlcohol 16 20\tEtOH", doc(text)).unwrap();
        assert_eq!(
            d.text_bounds(),
            &[TextBound {
                id: "T1".into(),
                label: "Alcohol".into(),
                fragments: vec![Span::new(16, 20)],
                surface: "EtOH".into(),
            }]
        );
        assert!(validate_document(&d).is_empty());
    }

    #[test]
    fn offsets_fifteen_to_nineteen() {
        let text = "Social history EtOH: none";
        let d = parse_ann("T1\tAlcohol 15 19\tEtOH", doc(text)).unwrap();
        assert_eq!(d.text_bounds()[0].fragments, vec![Span::new(15, 19)]);
        assert!(validate_document(&d).is_empty());
    }

    #[test]
    fn empty_file() {
        let d = parse_ann("", doc("anything")).unwrap();
        assert_eq!(d.annotation_count(), 0);
        assert_eq!(serialize_ann(&d).unwrap(), "");
    }

    #[test]
    fn four_line_example() {
        let d = parse_ann(FOUR_LINES, doc("EtOH denies")).unwrap();
        assert_eq!(d.text_bounds().len(), 2);
        assert_eq!(d.events().len(), 1);
        assert_eq!(
            d.events()[0].args,
            vec![EventArg {
                role: "Status".into(),
                target: "T2".into()
            }]
        );
        assert_eq!(
            d.attributes()[0],
            AttributeAnnotation {
                id: "A1".into(),
                name: "StatusTimeVal".into(),
                target: "T2".into(),
                value: "none".into(),
            }
        );
        assert!(validate_document(&d).is_empty());
        assert_eq!(serialize_ann(&d).unwrap(), FOUR_LINES);
    }

    #[test]
    fn serialization_orders_by_kind() {
        let shuffled = "A1\tStatusTimeVal T2 none\nE1\tAlcohol:T1 Status:T2\nT2\tStatusTime 5 11\tdenies\nT1\tAlcohol 0 4\tEtOH\n";
        let d = parse_ann(shuffled, doc("EtOH denies")).unwrap();
        let out = serialize_ann(&d).unwrap();
        let kinds: Vec<char> = out.lines().map(|l| l.chars().next().unwrap()).collect();
        assert_eq!(kinds, vec!['T', 'T', 'E', 'A']);
    }

    #[test]
    fn discontinuous_fragments() {
        let text = "abc xxxx def";
        let ann = "T1\tType 0 3;9 12\tabc def\n";
        let d = parse_ann(ann, doc(text)).unwrap();
        assert_eq!(
            d.text_bounds()[0].fragments,
            vec![Span::new(0, 3), Span::new(9, 12)]
        );
        assert!(validate_document(&d).is_empty());
        assert_eq!(serialize_ann(&d).unwrap(), ann);

        let d = parse_ann("T1\tType 0 3;8 11\tabc xde\n", doc("abc xxxxxde")).unwrap();
        assert!(serialize_ann(&d).unwrap().contains("\tType 0 3;8 11\t"));
    }

    #[test]
    fn foreign_lines_are_retained() {
        let ann = "T1\tAlcohol 0 4\tEtOH\nR1\tRel Arg1:T1 Arg2:T1\n#1\tAnnotatorNotes T1\tnote here\n";
        let d = parse_ann(ann, doc("EtOH")).unwrap();
        assert_eq!(d.ignored_lines().len(), 2);
        assert_eq!(serialize_ann(&d).unwrap(), ann);
    }

    #[test]
    fn malformed_lines_cite_line_number() {
        let err = parse_ann("T1\tAlcohol 0 4\tEtOH\nT2\tAlcohol x 4\tEtOH", doc("EtOH")).unwrap_err();
        assert!(matches!(err, BratError::Parse { line: 2, .. }), "{err}");
        let err = parse_ann("T1\tAlcohol 0 4", doc("EtOH")).unwrap_err();
        assert!(matches!(err, BratError::Parse { line: 1, .. }));
        let err = parse_ann("\nE1\tAlcohol", doc("EtOH")).unwrap_err();
        assert!(matches!(err, BratError::Parse { line: 2, .. }));
        let err = parse_ann("A1\tStatusTimeVal", doc("EtOH")).unwrap_err();
        assert!(matches!(err, BratError::Parse { line: 1, .. }));
    }

    #[test]
    fn offset_out_of_range() {
        let err = parse_ann("T1\tAlcohol 0 40\tEtOH", doc("EtOH")).unwrap_err();
        assert!(matches!(err, BratError::OffsetOutOfRange { offset: 40, .. }));
    }

    #[test]
    fn unresolved_reference_finding() {
        let d = parse_ann("T1\tAlcohol 0 4\tEtOH\nE1\tAlcohol:T1 Status:T9\n", doc("EtOH")).unwrap();
        let findings = validate_document(&d);
        assert_eq!(findings.len(), 1);
        assert!(findings[0].is_error());
        assert_eq!(findings[0].id, "E1");
        assert!(findings[0].message.contains("unresolved reference"));
        assert!(matches!(
            serialize_ann(&d),
            Err(BratError::Unresolved { ref id, ref target }) if id == "E1" && target == "T9"
        ));
    }

    #[test]
    fn surface_mismatch_detected_after_one_edit() {
        let good = parse_ann(FOUR_LINES, doc("EtOH denies")).unwrap();
        assert!(validate_document(&good).is_empty());
        let edited = FOUR_LINES.replace("\tdenies", "\tdenied");
        let bad = parse_ann(&edited, doc("EtOH denies")).unwrap();
        let findings = validate_document(&bad);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].id, "T2");
    }

    #[test]
    fn duplicate_attribute_and_id() {
        let ann = "T1\tAlcohol 0 4\tEtOH\nT1\tAlcohol 0 4\tEtOH\nA1\tX T1 a\nA2\tX T1 b\n";
        let d = parse_ann(ann, doc("EtOH")).unwrap();
        let msgs: Vec<String> = validate_document(&d).into_iter().map(|f| f.message).collect();
        assert!(msgs.iter().any(|m| m == "duplicate id"));
        assert!(msgs.iter().any(|m| m.starts_with("second X attribute")));
    }

    #[test]
    fn multibyte_offsets_are_code_points() {
        let text = "Café: EtOH";
        let d = parse_ann("T1\tAlcohol 6 10\tEtOH\n", doc(text)).unwrap();
        assert!(validate_document(&d).is_empty());
    }

    #[test]
    fn empty_doc_id_rejected() {
        assert!(matches!(TextDocument::new("", "x"), Err(BratError::EmptyDocId)));
    }
}
