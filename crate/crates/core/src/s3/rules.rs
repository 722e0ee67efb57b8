//! Rule DSL for linking argument candidates to triggers.
//!
//! ```text
//! # comment
//! RULE alc_none event=Alcohol arg=Status value=none cand=/(?i)\b(denies|no)\b/ dir=either dist=8
//! ```
//!
//! Keys: `event`, `arg`, `cand` (required); `value` (labeled arguments only);
//! `trig`, `dir` (`left`, `right`, `either`; default `either`), `dist`
//! (tokens; default 8) and `scope` (only `sentence`). Patterns are delimited by
//! slashes; `\/` inside a pattern stands for a literal slash.

use std::collections::BTreeSet;

use regex::Regex;
use thiserror::Error;

use crate::schema::Schema;

pub const DEFAULT_DISTANCE: usize = 8;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct RuleError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
    Either,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Sentence,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub id: String,
    pub event_type: String,
    pub arg_name: String,
    pub value: Option<String>,
    pub trigger_pattern: Option<Regex>,
    pub candidate_pattern: Regex,
    pub scope: Scope,
    pub direction: Direction,
    pub max_token_distance: usize,
}

impl Rule {
    /// Whether a candidate at signed token offset `delta` from the trigger
    /// (negative = left) is in reach.
    pub fn reaches(&self, delta: isize) -> bool {
        let side_ok = match self.direction {
            Direction::Left => delta < 0,
            Direction::Right => delta > 0,
            Direction::Either => delta != 0,
        };
        side_ok && delta.unsigned_abs() <= self.max_token_distance
    }
}

#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Splits `key=value` fields, keeping slash-delimited values whole.
fn fields(rest: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = rest.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let key_start = i;
        while i < chars.len() && chars[i] != '=' && !chars[i].is_whitespace() {
            i += 1;
        }
        if i >= chars.len() || chars[i] != '=' {
            let word: String = chars[key_start..i].iter().collect();
            return Err(format!("expected key=value, found {word:?}"));
        }
        let key: String = chars[key_start..i].iter().collect();
        i += 1;
        let mut value = String::new();
        if chars.get(i) == Some(&'/') {
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(format!("unterminated pattern for {key}")),
                    Some('\\') if chars.get(i + 1) == Some(&'/') => {
                        value.push('/');
                        i += 2;
                    }
                    Some('/') => {
                        i += 1;
                        break;
                    }
                    Some(&c) => {
                        value.push(c);
                        i += 1;
                    }
                }
            }
            if chars.get(i).is_some_and(|c| !c.is_whitespace()) {
                return Err(format!("unexpected text after pattern for {key}"));
            }
        } else {
            while i < chars.len() && !chars[i].is_whitespace() {
                value.push(chars[i]);
                i += 1;
            }
        }
        out.push((key, value));
    }
    Ok(out)
}

fn parse_rule(line: &str, schema: &Schema) -> Result<Rule, String> {
    let rest = line.strip_prefix("RULE").filter(|r| r.starts_with(char::is_whitespace));
    let rest = rest.ok_or("line must start with RULE")?.trim_start();
    let (id, rest) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    if id.is_empty() || id.contains('=') {
        return Err("missing rule id".into());
    }

    let mut event = None;
    let mut arg = None;
    let mut value = None;
    let mut trig = None;
    let mut cand = None;
    let mut direction = Direction::Either;
    let mut dist = DEFAULT_DISTANCE;
    let mut seen = BTreeSet::new();
    for (key, v) in fields(rest)? {
        if !seen.insert(key.clone()) {
            return Err(format!("duplicate key {key}"));
        }
        let compile = |p: &str| Regex::new(p).map_err(|e| format!("bad pattern for {key}: {e}"));
        match key.as_str() {
            "event" => event = Some(v),
            "arg" => arg = Some(v),
            "value" => value = Some(v),
            "trig" => trig = Some(compile(&v)?),
            "cand" => cand = Some(compile(&v)?),
            "dir" => {
                direction = match v.as_str() {
                    "left" => Direction::Left,
                    "right" => Direction::Right,
                    "either" => Direction::Either,
                    _ => return Err(format!("dir must be left, right or either, not {v:?}")),
                }
            }
            "dist" => dist = v.parse().map_err(|_| format!("dist must be a token count, not {v:?}"))?,
            "scope" if v == "sentence" => {}
            "scope" => return Err(format!("unsupported scope {v:?}")),
            _ => return Err(format!("unknown key {key}")),
        }
    }

    let event = event.ok_or("missing event=")?;
    let arg = arg.ok_or("missing arg=")?;
    let cand = cand.ok_or("missing cand=")?;
    let et = schema
        .event_type(&event)
        .ok_or_else(|| format!("event type {event} is not in the schema"))?;
    let def = et
        .argument(&arg)
        .ok_or_else(|| format!("{event} has no argument {arg}"))?;
    match (&value, def.is_labeled()) {
        (None, true) => return Err(format!("{event}/{arg} is labeled and needs value=")),
        (Some(_), false) => return Err(format!("{event}/{arg} is span-only and takes no value=")),
        (Some(v), true) if !def.accepts(v) => {
            return Err(format!("{v:?} is not a value of {event}/{arg}"))
        }
        _ => {}
    }
    Ok(Rule {
        id: id.to_string(),
        event_type: event,
        arg_name: arg,
        value,
        trigger_pattern: trig,
        candidate_pattern: cand,
        scope: Scope::Sentence,
        direction,
        max_token_distance: dist,
    })
}

/// Parses a rule file. Errors carry 1-based line numbers.
pub fn parse_ruleset(text: &str, schema: &Schema) -> Result<RuleSet, RuleError> {
    let mut rules: Vec<Rule> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| RuleError { line: n + 1, message };
        let rule = parse_rule(line, schema).map_err(err)?;
        if rules.iter().any(|r| r.id == rule.id) {
            return Err(err(format!("duplicate rule id {}", rule.id)));
        }
        rules.push(rule);
    }
    Ok(RuleSet { rules })
}

pub const STARTER_RULES: &str = include_str!("../../data/starter.rules");

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::default_schema()
    }

    #[test]
    fn single_rule() {
        let rs = parse_ruleset(
            r"RULE alc_none event=Alcohol arg=Status value=none cand=/(?i)\b(denies|no|none|negative)\b/ dir=either dist=8",
            &schema(),
        )
        .unwrap();
        assert_eq!(rs.len(), 1);
        let r = &rs.rules[0];
        assert_eq!((r.id.as_str(), r.value.as_deref()), ("alc_none", Some("none")));
        assert!(r.candidate_pattern.is_match("Denies"));
        assert_eq!(r.direction, Direction::Either);
        assert_eq!(r.max_token_distance, 8);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let rs = parse_ruleset("# header\n\n   \n# RULE x\n", &schema()).unwrap();
        assert!(rs.is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let s = schema();
        let bad_value = "# c\nRULE bad event=Alcohol arg=Status value=sometimes cand=/x/";
        assert_eq!(parse_ruleset(bad_value, &s).unwrap_err().line, 2);
        for text in [
            "RULE a event=Alcohol arg=Status value=none cand=/(/",
            "RULE a event=Alcohol arg=Status value=none cand=/x/ color=red",
            "RULE a event=Alcohol arg=Amount value=two cand=/x/",
            "RULE a event=Alcohol arg=Status cand=/x/",
            "RULE a event=Weather arg=Status value=none cand=/x/",
            "RULE a event=Alcohol arg=Amount cand=/x/ dir=up",
            "RULE a event=Alcohol arg=Amount cand=/x",
            "RULE a event=Alcohol arg=Amount",
            "RULE a event=Alcohol arg=Amount cand=/x/\nRULE a event=Alcohol arg=Type cand=/x/",
        ] {
            assert!(parse_ruleset(text, &s).is_err(), "{text}");
        }
    }

    #[test]
    fn slash_escape_and_spaces_in_patterns() {
        let rs = parse_ruleset(r"RULE a event=Tobacco arg=Amount cand=/\d\/\d ppd/ dir=right dist=3", &schema()).unwrap();
        assert!(rs.rules[0].candidate_pattern.is_match("1/2 ppd"));
        assert!(rs.rules[0].reaches(3) && !rs.rules[0].reaches(-1) && !rs.rules[0].reaches(4));
    }

    #[test]
    fn starter_rules_parse() {
        let rs = parse_ruleset(STARTER_RULES, &schema()).unwrap();
        assert!(rs.len() > 20);
    }
}
