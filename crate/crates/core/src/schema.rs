//! Declarative SDOH event inventory and the targets derived from it.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_SCHEMA: &str = include_str!("../data/default_schema.json");

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate event type {0}")]
    DuplicateEventType(String),
    #[error("{event_type}: duplicate argument {arg}")]
    DuplicateArgument { event_type: String, arg: String },
    #[error("{event_type}/{arg}: labeled argument has no values")]
    EmptyValues { event_type: String, arg: String },
    #[error("{event_type}/{arg}: span-only argument must not list values")]
    SpanOnlyValues { event_type: String, arg: String },
    #[error("{event_type}/{arg}: duplicate value {value}")]
    DuplicateValue {
        event_type: String,
        arg: String,
        value: String,
    },
    #[error("invalid name {0:?}")]
    InvalidName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgKind {
    Labeled,
    SpanOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentDef {
    pub name: String,
    pub kind: ArgKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
    #[serde(default)]
    pub mandatory: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute_name: Option<String>,
}

impl ArgumentDef {
    pub fn is_labeled(&self) -> bool {
        self.kind == ArgKind::Labeled
    }

    /// Name of the brat attribute carrying the value; `<Name>Val` unless configured.
    pub fn value_attribute(&self) -> String {
        self.attribute_name
            .clone()
            .unwrap_or_else(|| format!("{}Val", self.name))
    }

    /// Text-bound label used when writing this argument to brat.
    pub fn span_label(&self) -> String {
        match (&self.kind, &self.attribute_name) {
            (ArgKind::Labeled, Some(attr)) => attr
                .strip_suffix("Val")
                .filter(|s| !s.is_empty())
                .unwrap_or(attr)
                .to_string(),
            _ => self.name.clone(),
        }
    }

    pub fn accepts(&self, value: &str) -> bool {
        self.values.iter().any(|v| v == value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTypeDef {
    pub name: String,
    pub arguments: Vec<ArgumentDef>,
}

impl EventTypeDef {
    pub fn argument(&self, name: &str) -> Option<&ArgumentDef> {
        self.arguments.iter().find(|a| a.name == name)
    }

    pub fn labeled(&self) -> impl Iterator<Item = &ArgumentDef> {
        self.arguments.iter().filter(|a| a.is_labeled())
    }

    pub fn span_only(&self) -> impl Iterator<Item = &ArgumentDef> {
        self.arguments.iter().filter(|a| !a.is_labeled())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub version: String,
    pub event_types: Vec<EventTypeDef>,
}

impl Schema {
    /// The built-in five-type inventory.
    pub fn default_schema() -> Schema {
        load_schema(Some(DEFAULT_SCHEMA)).expect("bundled schema is valid")
    }

    pub fn empty() -> Schema {
        Schema {
            version: "empty".into(),
            event_types: Vec::new(),
        }
    }

    pub fn event_type(&self, name: &str) -> Option<&EventTypeDef> {
        self.event_types.iter().find(|e| e.name == name)
    }

    pub fn argument(&self, event_type: &str, arg: &str) -> Option<&ArgumentDef> {
        self.event_type(event_type)?.argument(arg)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut types = HashSet::new();
        for et in &self.event_types {
            check_name(&et.name)?;
            if !types.insert(et.name.as_str()) {
                return Err(SchemaError::DuplicateEventType(et.name.clone()));
            }
            let mut args = HashSet::new();
            for a in &et.arguments {
                check_name(&a.name)?;
                let ctx = || (et.name.clone(), a.name.clone());
                if a.name == "Trigger" || !args.insert(a.name.as_str()) {
                    let (event_type, arg) = ctx();
                    return Err(SchemaError::DuplicateArgument { event_type, arg });
                }
                match a.kind {
                    ArgKind::Labeled if a.values.is_empty() => {
                        let (event_type, arg) = ctx();
                        return Err(SchemaError::EmptyValues { event_type, arg });
                    }
                    ArgKind::SpanOnly if !a.values.is_empty() => {
                        let (event_type, arg) = ctx();
                        return Err(SchemaError::SpanOnlyValues { event_type, arg });
                    }
                    _ => {}
                }
                let mut values = HashSet::new();
                for v in &a.values {
                    check_name(v)?;
                    if !values.insert(v.as_str()) {
                        let (event_type, arg) = ctx();
                        return Err(SchemaError::DuplicateValue {
                            event_type,
                            arg,
                            value: v.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

fn check_name(name: &str) -> Result<(), SchemaError> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == '|' || c == ':') {
        return Err(SchemaError::InvalidName(name.to_string()));
    }
    Ok(())
}

/// Parses and validates a JSON schema config; `None` yields the built-in default.
pub fn load_schema(config: Option<&str>) -> Result<Schema, SchemaError> {
    let schema: Schema = serde_json::from_str(config.unwrap_or(DEFAULT_SCHEMA))?;
    schema.validate()?;
    Ok(schema)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Trigger,
    LabeledValue,
    SpanOnly,
}

/// One countable / learnable unit: a trigger type, a labeled value, or a span-only argument.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Target {
    pub kind: TargetKind,
    pub event_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl Target {
    pub fn trigger(event_type: &str) -> Target {
        Target {
            kind: TargetKind::Trigger,
            event_type: event_type.to_string(),
            arg_name: None,
            value: None,
        }
    }

    pub fn labeled(event_type: &str, arg: &str, value: &str) -> Target {
        Target {
            kind: TargetKind::LabeledValue,
            event_type: event_type.to_string(),
            arg_name: Some(arg.to_string()),
            value: Some(value.to_string()),
        }
    }

    pub fn span_only(event_type: &str, arg: &str) -> Target {
        Target {
            kind: TargetKind::SpanOnly,
            event_type: event_type.to_string(),
            arg_name: Some(arg.to_string()),
            value: None,
        }
    }

    /// Argument column as printed in reports.
    pub fn argument_label(&self) -> &str {
        self.arg_name.as_deref().unwrap_or("Trigger")
    }

    /// `event_type/argument/subtype`, with `-` for an absent subtype.
    pub fn key(&self) -> String {
        format!(
            "{}/{}/{}",
            self.event_type,
            self.argument_label(),
            self.value.as_deref().unwrap_or("-")
        )
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// Targets of the sentence classifier and of the sequence taggers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSets {
    pub classification: Vec<Target>,
    pub sequence: Vec<Target>,
}

pub fn enumerate_targets(schema: &Schema) -> TargetSets {
    let triggers: Vec<Target> = schema
        .event_types
        .iter()
        .map(|et| Target::trigger(&et.name))
        .collect();
    let mut classification = triggers.clone();
    let mut sequence = triggers;
    for et in &schema.event_types {
        for a in et.labeled() {
            classification.extend(a.values.iter().map(|v| Target::labeled(&et.name, &a.name, v)));
        }
        sequence.extend(et.span_only().map(|a| Target::span_only(&et.name, &a.name)));
    }
    TargetSets {
        classification,
        sequence,
    }
}

/// Every scored row in report order: per event type, the trigger then each argument in schema order.
pub fn report_targets(schema: &Schema) -> Vec<Target> {
    let mut out = Vec::new();
    for et in &schema.event_types {
        out.push(Target::trigger(&et.name));
        for a in &et.arguments {
            match a.kind {
                ArgKind::Labeled => {
                    out.extend(a.values.iter().map(|v| Target::labeled(&et.name, &a.name, v)))
                }
                ArgKind::SpanOnly => out.push(Target::span_only(&et.name, &a.name)),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_five_types() {
        let s = Schema::default_schema();
        let names: Vec<&str> = s.event_types.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["Alcohol", "Drug", "Tobacco", "Employment", "LivingStatus"]);
    }

    #[test]
    fn alcohol_status_values() {
        let s = Schema::default_schema();
        let status = s.argument("Alcohol", "Status").unwrap();
        assert!(status.is_labeled());
        assert_eq!(status.values, ["current", "none", "past"]);
        assert!(status.mandatory);
    }

    #[test]
    fn default_inventory_matches_reported_rows() {
        let s = Schema::default_schema();
        let span_only = |t: &str| -> Vec<String> {
            s.event_type(t).unwrap().span_only().map(|a| a.name.clone()).collect()
        };
        assert_eq!(span_only("Alcohol"), ["Amount", "Duration", "Frequency", "History", "Type"]);
        assert_eq!(
            span_only("Drug"),
            ["Amount", "Duration", "Frequency", "History", "Method", "Type"]
        );
        assert_eq!(span_only("Tobacco"), span_only("Drug"));
        assert_eq!(span_only("Employment"), ["Duration", "History", "Type"]);
        assert_eq!(span_only("LivingStatus"), ["Duration", "History"]);
        assert_eq!(
            s.argument("Employment", "Status").unwrap().values,
            ["employed", "homemaker", "on_disability", "retired", "student", "unemployed"]
        );
        assert_eq!(s.argument("LivingStatus", "Status").unwrap().values, ["current", "past"]);
        assert_eq!(
            s.argument("LivingStatus", "Type").unwrap().values,
            ["alone", "homeless", "with_family", "with_others"]
        );
    }

    #[test]
    fn default_target_counts() {
        let t = enumerate_targets(&Schema::default_schema());
        let triggers = t
            .classification
            .iter()
            .filter(|t| t.kind == TargetKind::Trigger)
            .count();
        assert_eq!(triggers, 5);
        assert_eq!(t.classification.len(), 26);
        assert_eq!(t.sequence.len(), 27);
    }

    #[test]
    fn empty_schema_has_no_targets() {
        let t = enumerate_targets(&Schema::empty());
        assert!(t.classification.is_empty());
        assert!(t.sequence.is_empty());
    }

    #[test]
    fn enumeration_is_stable() {
        let s = Schema::default_schema();
        assert_eq!(enumerate_targets(&s), enumerate_targets(&s));
        assert_eq!(report_targets(&s).len(), 5 + 21 + 22);
    }

    #[test]
    fn labeled_without_values_rejected() {
        let cfg = r#"{"version":"x","event_types":[{"name":"Alcohol","arguments":[
            {"name":"Status","kind":"labeled","values":[]}]}]}"#;
        assert!(matches!(load_schema(Some(cfg)), Err(SchemaError::EmptyValues { .. })));
    }

    #[test]
    fn duplicates_rejected() {
        let cfg = r#"{"version":"x","event_types":[{"name":"A","arguments":[]},{"name":"A","arguments":[]}]}"#;
        assert!(matches!(load_schema(Some(cfg)), Err(SchemaError::DuplicateEventType(_))));
        let cfg = r#"{"version":"x","event_types":[{"name":"A","arguments":[
            {"name":"X","kind":"span_only"},{"name":"X","kind":"span_only"}]}]}"#;
        assert!(matches!(load_schema(Some(cfg)), Err(SchemaError::DuplicateArgument { .. })));
    }

    #[test]
    fn attribute_naming() {
        let s = Schema::default_schema();
        let status = s.argument("Alcohol", "Status").unwrap();
        assert_eq!(status.value_attribute(), "StatusTimeVal");
        assert_eq!(status.span_label(), "StatusTime");
        let bare = ArgumentDef {
            name: "Status".into(),
            kind: ArgKind::Labeled,
            values: vec!["a".into()],
            mandatory: true,
            attribute_name: None,
        };
        assert_eq!(bare.value_attribute(), "StatusVal");
        assert_eq!(bare.span_label(), "Status");
    }

    #[test]
    fn only_listed_values_accepted() {
        let s = Schema::default_schema();
        let status = s.argument("Employment", "Status").unwrap();
        assert!(status.accepts("retired"));
        assert!(!status.accepts("sometimes"));
        assert!(!status.accepts("Retired"));
    }
}
