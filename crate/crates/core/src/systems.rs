//! Extraction systems behind a common interface, selected by name.

use std::collections::BTreeMap;
use std::path::Path;

use crate::brat::{AnnotatedDocument, TextDocument};
use crate::bundle::PipelineError;
use crate::events::SdohEvent;
use crate::findings::Finding;
use crate::s1::{predict_s1, train_s1, S1Config, S1Model};
use crate::s3::rules::{parse_ruleset, RuleSet, STARTER_RULES};
use crate::s3::{predict_s3, train_s3, MissingPolicy, S3Config, S3Model};
use crate::schema::Schema;

/// Settings shared by all systems; each system reads the parts it uses.
#[derive(Debug, Clone, Default)]
pub struct SystemOptions {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    /// Linking rules for `s3`; the starter rules when absent.
    pub rules: Option<RuleSet>,
    pub missing_policy: MissingPolicy,
}

/// A trained model ready to extract events from raw text.
pub trait Extractor: Send + Sync {
    fn system(&self) -> &'static str;
    fn schema(&self) -> &Schema;
    fn extract(&self, doc: &TextDocument) -> (Vec<SdohEvent>, Vec<Finding>);
    fn save(&self, dir: &Path) -> Result<(), PipelineError>;
}

pub trait System: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn train(
        &self,
        docs: &[AnnotatedDocument],
        schema: &Schema,
        options: &SystemOptions,
    ) -> Result<(Box<dyn Extractor>, Vec<Finding>), PipelineError>;
    fn load(&self, dir: &Path, options: &SystemOptions) -> Result<Box<dyn Extractor>, PipelineError>;
}

pub struct SystemRegistry {
    systems: BTreeMap<&'static str, Box<dyn System>>,
}

impl SystemRegistry {
    pub fn empty() -> Self {
        SystemRegistry {
            systems: BTreeMap::new(),
        }
    }

    /// `s1` and `s3`.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(S1System));
        r.register(Box::new(S3System));
        r
    }

    /// Replaces any system already registered under the same name.
    pub fn register(&mut self, system: Box<dyn System>) {
        self.systems.insert(system.name(), system);
    }

    pub fn get(&self, name: &str) -> Option<&dyn System> {
        self.systems.get(name).map(|s| s.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.systems.keys().copied()
    }
}

impl Default for SystemRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

pub struct S1System;

pub struct S1Extractor(pub S1Model);

impl System for S1System {
    fn name(&self) -> &'static str {
        "s1"
    }

    fn description(&self) -> &'static str {
        "sentence classifier with per-target CRF taggers"
    }

    fn train(
        &self,
        docs: &[AnnotatedDocument],
        schema: &Schema,
        options: &SystemOptions,
    ) -> Result<(Box<dyn Extractor>, Vec<Finding>), PipelineError> {
        let mut config = options.seed.map(S1Config::with_seed).unwrap_or_default();
        if let Some(e) = options.epochs {
            config = config.with_epochs(e);
        }
        let (model, findings) = train_s1(docs, schema, &config)?;
        Ok((Box::new(S1Extractor(model)), findings))
    }

    fn load(&self, dir: &Path, _options: &SystemOptions) -> Result<Box<dyn Extractor>, PipelineError> {
        Ok(Box::new(S1Extractor(S1Model::load(dir)?)))
    }
}

impl Extractor for S1Extractor {
    fn system(&self) -> &'static str {
        "s1"
    }

    fn schema(&self) -> &Schema {
        &self.0.schema
    }

    fn extract(&self, doc: &TextDocument) -> (Vec<SdohEvent>, Vec<Finding>) {
        (predict_s1(&self.0, doc), Vec::new())
    }

    fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        self.0.save(dir)
    }
}

pub struct S3System;

pub struct S3Extractor {
    pub model: S3Model,
    pub rules: RuleSet,
}

fn rules_for(options: &SystemOptions, schema: &Schema) -> Result<RuleSet, PipelineError> {
    match &options.rules {
        Some(r) => Ok(r.clone()),
        None => parse_ruleset(STARTER_RULES, schema).map_err(|e| PipelineError::Bundle(format!("starter rules: {e}"))),
    }
}

impl System for S3System {
    fn name(&self) -> &'static str {
        "s3"
    }

    fn description(&self) -> &'static str {
        "joint CRF phrase tagger with rule-based argument linking"
    }

    fn train(
        &self,
        docs: &[AnnotatedDocument],
        schema: &Schema,
        options: &SystemOptions,
    ) -> Result<(Box<dyn Extractor>, Vec<Finding>), PipelineError> {
        let mut config = options.seed.map(S3Config::with_seed).unwrap_or_default();
        if let Some(e) = options.epochs {
            config.tagger.epochs = e;
        }
        config.missing_policy = options.missing_policy;
        let rules = rules_for(options, schema)?;
        let (model, findings) = train_s3(docs, schema, &config)?;
        Ok((Box::new(S3Extractor { model, rules }), findings))
    }

    /// The bundle's own missing-argument policy is replaced by the one in `options`.
    fn load(&self, dir: &Path, options: &SystemOptions) -> Result<Box<dyn Extractor>, PipelineError> {
        let mut model = S3Model::load(dir)?;
        model.config.missing_policy = options.missing_policy;
        let rules = rules_for(options, &model.schema)?;
        Ok(Box::new(S3Extractor { model, rules }))
    }
}

impl Extractor for S3Extractor {
    fn system(&self) -> &'static str {
        "s3"
    }

    fn schema(&self) -> &Schema {
        &self.model.schema
    }

    fn extract(&self, doc: &TextDocument) -> (Vec<SdohEvent>, Vec<Finding>) {
        predict_s3(&self.model, &self.rules, doc)
    }

    fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        self.model.save(dir)
    }
}
