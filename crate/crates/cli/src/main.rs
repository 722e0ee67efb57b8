mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use sdoh_core::brat::{read_corpus_dir, read_document, validate_document, write_document};
use sdoh_core::codec::{parse_table, PromptSandwich, SANDWICH_FORMAT, SANDWICH_VERSION};
use sdoh_core::events::{denormalize_events, normalize_events};
use sdoh_core::s3::{parse_ruleset, MissingPolicy};
use sdoh_core::schema::load_schema;
use sdoh_core::scorer::{Scorer, SCORING_ASSUMPTIONS};
use sdoh_core::synth::{generate_corpus, GenConfig};
use sdoh_core::systems::{SystemOptions, SystemRegistry};
use sdoh_core::{AnnotatedDocument, Finding, Schema, SdohEvent, TextDocument};

use manifest::MANIFEST_FILE;

#[derive(Parser)]
#[command(name = "sdoh", version, about = "Social-history event extraction toolkit")]
struct Cli {
    /// JSON schema file; the built-in schema when omitted.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a brat corpus for annotation problems.
    Validate {
        dir: PathBuf,
        /// Exit with status 1 when any finding is reported.
        #[arg(long)]
        strict: bool,
        /// Where to write the run manifest (none by default).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Generate a synthetic annotated corpus.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Train/dev/test fractions, e.g. 0.8,0.1,0.1.
        #[arg(long)]
        split: Option<String>,
        #[arg(long, default_value_t = 0.3)]
        distractor_rate: f64,
    },
    /// Sentence classifier and per-target taggers.
    S1 {
        #[command(subcommand)]
        action: SystemAction,
    },
    /// Joint phrase tagger with rule-based linking.
    S3 {
        #[command(subcommand)]
        action: SystemAction,
    },
    /// Score predicted events against gold.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        json: PathBuf,
        #[arg(long)]
        tsv: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
        /// Defaults to `<json stem>.manifest.json` beside the JSON report.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Convert between corpora and prompt/table files.
    Codec {
        #[command(subcommand)]
        action: CodecAction,
    },
}

#[derive(Subcommand)]
enum SystemAction {
    Train(TrainArgs),
    Predict(PredictArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Annotated training corpus.
    #[arg(long)]
    train: PathBuf,
    /// Output model bundle directory.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Corpus to annotate; existing annotations are ignored.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Linking rules (s3 only); the starter rules when omitted.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Keep events lacking a mandatory argument (s3 only).
    #[arg(long)]
    emit_incomplete: bool,
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum CodecAction {
    /// Write one prompt file per document and event type.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Append the gold rows (training layout).
        #[arg(long)]
        with_gold: bool,
    },
    /// Parse generated tables back into a brat corpus.
    Decode {
        #[arg(long)]
        sandwiches: PathBuf,
        /// Directory of `<doc>.<type>.table.txt` files; the gold rows inside
        /// the prompt files are decoded when omitted.
        #[arg(long)]
        generated: Option<PathBuf>,
        /// Original corpus whose text (with line breaks) is written out.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strict: bool,
    },
}

/// Failure carrying the process exit status.
#[derive(Debug)]
struct Exit(u8);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            if let Some(Exit(code)) = e.downcast_ref::<Exit>() {
                return ExitCode::from(*code);
            }
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit {}", self.0)
    }
}

impl std::error::Error for Exit {}

/// Existing path made absolute.
fn existing(path: &Path) -> Result<PathBuf> {
    fs::canonicalize(path).with_context(|| format!("{} not found", path.display()))
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).with_context(|| format!("resolving {}", path.display()))
}

fn show(path: &Path) -> String {
    path.display().to_string()
}

/// Returns `Ok(false)` when `--strict` turns findings into a failing status.
fn run(cli: Cli) -> Result<bool> {
    let (schema, schema_source) = match &cli.schema {
        Some(p) => {
            let p = existing(p)?;
            let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            (load_schema(Some(&text)).with_context(|| format!("schema {}", p.display()))?, Some(p))
        }
        None => (load_schema(None)?, None),
    };
    let schema_json: Value = serde_json::from_str(&schema.to_json())?;
    let base = json!({
        "schema": schema_json,
        "schema_file": schema_source.as_deref().map(show),
    });
    let ctx = Ctx { schema, base };

    match cli.command {
        Command::Validate { dir, strict, manifest } => ctx.validate(&dir, strict, manifest.as_deref()),
        Command::Synth {
            seed,
            n,
            out,
            split,
            distractor_rate,
        } => ctx.synth(seed, n, &out, split.as_deref(), distractor_rate).map(|_| true),
        Command::S1 { action } => ctx.system("s1", action),
        Command::S3 { action } => ctx.system("s3", action),
        Command::Score {
            gold,
            pred,
            json,
            tsv,
            strict,
            manifest,
        } => ctx.score(&gold, &pred, &json, tsv.as_deref(), strict, manifest.as_deref()),
        Command::Codec { action } => match action {
            CodecAction::Encode { input, out, with_gold } => ctx.encode(&input, &out, with_gold).map(|_| true),
            CodecAction::Decode {
                sandwiches,
                generated,
                corpus,
                out,
                strict,
            } => ctx.decode(&sandwiches, generated.as_deref(), corpus.as_deref(), &out, strict),
        },
    }
}

struct Ctx {
    schema: Schema,
    base: Value,
}

fn report_findings(findings: &[Finding]) {
    for f in findings {
        eprintln!("{f}");
    }
}

fn with(base: &Value, extra: Value) -> Value {
    let mut v = base.clone();
    if let (Some(obj), Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    v
}

fn parse_split(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| anyhow!("--split expects three comma-separated fractions"))?;
    let [a, b, c] = parts[..] else {
        bail!("--split expects three comma-separated fractions");
    };
    if [a, b, c].iter().any(|x| !(0.0..=1.0).contains(x)) || ((a + b + c) - 1.0).abs() > 1e-6 {
        bail!("--split fractions must lie in [0, 1] and sum to 1");
    }
    Ok([a, b, c])
}

fn normalized_corpus(docs: &[AnnotatedDocument], schema: &Schema) -> (BTreeMap<String, Vec<SdohEvent>>, Vec<Finding>) {
    let per_doc: Vec<_> = docs.par_iter().map(|d| (d.doc_id().to_string(), normalize_events(d, schema))).collect();
    let mut corpus = BTreeMap::new();
    let mut findings = Vec::new();
    for (id, (events, f)) in per_doc {
        corpus.insert(id, events);
        findings.extend(f);
    }
    (corpus, findings)
}

impl Ctx {
    fn validate(&self, dir: &Path, strict: bool, manifest_path: Option<&Path>) -> Result<bool> {
        let dir = existing(dir)?;
        let mut txts: Vec<PathBuf> = fs::read_dir(&dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "txt"))
            .collect();
        txts.sort();
        let per_doc: Vec<Vec<Finding>> = txts
            .par_iter()
            .map(|p| match read_document(p) {
                Ok(doc) => {
                    let mut f = validate_document(&doc);
                    f.extend(normalize_events(&doc, &self.schema).1);
                    f.into_iter()
                        .map(|x| Finding {
                            id: format!("{}: {}", doc.doc_id(), x.id),
                            ..x
                        })
                        .collect()
                }
                Err(e) => vec![Finding::error(show(p), e.to_string())],
            })
            .collect();
        let findings: Vec<Finding> = per_doc.into_iter().flatten().collect();
        for f in &findings {
            println!("{f}");
        }
        println!("{} documents, {} findings", txts.len(), findings.len());
        if let Some(m) = manifest_path {
            let config = with(&self.base, json!({"dir": show(&dir), "strict": strict}));
            manifest::write(&absolute(m)?, "validate", config)?;
        }
        Ok(!(strict && !findings.is_empty()))
    }

    fn synth(&self, seed: u64, n: usize, out: &Path, split: Option<&str>, distractor_rate: f64) -> Result<()> {
        let out = absolute(out)?;
        let fractions = split.map(parse_split).transpose()?;
        let config = GenConfig {
            distractor_rate,
            ..GenConfig::new(seed, n)
        };
        config.validate()?;
        let docs = generate_corpus(&config, &self.schema)?;
        let mut parts: Vec<(&str, &[AnnotatedDocument])> = Vec::new();
        if let Some([a, b, _]) = fractions {
            let cut1 = ((n as f64 * a).round() as usize).min(n);
            let cut2 = ((n as f64 * (a + b)).round() as usize).clamp(cut1, n);
            parts.push(("train", &docs[..cut1]));
            parts.push(("dev", &docs[cut1..cut2]));
            parts.push(("test", &docs[cut2..]));
        } else {
            parts.push(("", &docs));
        }
        for (name, slice) in &parts {
            let dir = if name.is_empty() { out.clone() } else { out.join(name) };
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for d in *slice {
                write_document(&dir, d)?;
            }
        }
        let sizes: BTreeMap<&str, usize> = parts.iter().map(|(k, v)| (*k, v.len())).collect();
        let cfg = with(
            &self.base,
            json!({
                "seed": seed,
                "n_documents": n,
                "distractor_rate": distractor_rate,
                "template_version": config.template_version,
                "split": fractions,
                "split_sizes": sizes,
            }),
        );
        manifest::write(&out.join(MANIFEST_FILE), "synth", cfg)?;
        println!("wrote {n} documents to {}", out.display());
        Ok(())
    }

    fn system(&self, name: &str, action: SystemAction) -> Result<bool> {
        let registry = SystemRegistry::with_defaults();
        let system = registry.get(name).ok_or_else(|| anyhow!("unknown system {name}"))?;
        match action {
            SystemAction::Train(a) => {
                let train = existing(&a.train)?;
                let model_dir = absolute(&a.model)?;
                let docs = read_corpus_dir(&train)?;
                let options = SystemOptions {
                    seed: Some(a.seed),
                    epochs: a.epochs,
                    ..Default::default()
                };
                let (extractor, findings) = system.train(&docs, &self.schema, &options)?;
                report_findings(&findings);
                extractor.save(&model_dir)?;
                let cfg = with(
                    &self.base,
                    json!({"system": name, "train": show(&train), "seed": a.seed, "epochs": a.epochs, "documents": docs.len()}),
                );
                manifest::write(&model_dir.join(MANIFEST_FILE), &format!("{name} train"), cfg)?;
                println!("trained {name} on {} documents; model in {}", docs.len(), model_dir.display());
                Ok(true)
            }
            SystemAction::Predict(a) => {
                if name != "s3" && (a.rules.is_some() || a.emit_incomplete) {
                    eprintln!("error: --rules and --emit-incomplete apply to s3 only");
                    return Err(Exit(2).into());
                }
                let model_dir = existing(&a.model)?;
                let input = existing(&a.input)?;
                let rules_path = a.rules.as_deref().map(existing).transpose()?;
                let out = absolute(&a.out)?;
                let rules = match &rules_path {
                    Some(p) => {
                        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                        Some(parse_ruleset(&text, &self.schema).with_context(|| format!("rules {}", p.display()))?)
                    }
                    None => None,
                };
                let options = SystemOptions {
                    rules,
                    missing_policy: if a.emit_incomplete {
                        MissingPolicy::EmitIncomplete
                    } else {
                        MissingPolicy::Omit
                    },
                    ..Default::default()
                };
                let extractor = system.load(&model_dir, &options)?;
                let docs = read_corpus_dir(&input)?;
                let schema = extractor.schema();
                let results: Vec<Result<(AnnotatedDocument, Vec<Finding>)>> = docs
                    .par_iter()
                    .map(|d| {
                        let (events, findings) = extractor.extract(d.document());
                        let ann = denormalize_events(&events, d.document(), schema)
                            .with_context(|| format!("writing predictions for {}", d.doc_id()))?;
                        Ok((ann, findings))
                    })
                    .collect();
                fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
                let mut findings = Vec::new();
                for r in results {
                    let (ann, f) = r?;
                    write_document(&out, &ann)?;
                    findings.extend(f);
                }
                report_findings(&findings);
                let cfg = with(
                    &self.base,
                    json!({
                        "system": name,
                        "model": show(&model_dir),
                        "input": show(&input),
                        "rules": rules_path.as_deref().map(show),
                        "emit_incomplete": a.emit_incomplete,
                    }),
                );
                manifest::write(&out.join(MANIFEST_FILE), &format!("{name} predict"), cfg)?;
                println!("{} documents, {} findings", docs.len(), findings.len());
                Ok(!(a.strict && !findings.is_empty()))
            }
        }
    }

    fn score(
        &self,
        gold: &Path,
        pred: &Path,
        json_out: &Path,
        tsv_out: Option<&Path>,
        strict: bool,
        manifest_path: Option<&Path>,
    ) -> Result<bool> {
        let gold = existing(gold)?;
        let pred = existing(pred)?;
        let json_out = absolute(json_out)?;
        let tsv_out = tsv_out.map(absolute).transpose()?;
        let manifest_path = match manifest_path {
            Some(p) => absolute(p)?,
            None => json_out.with_file_name(format!(
                "{}.manifest.json",
                json_out.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default()
            )),
        };
        let gold_docs = read_corpus_dir(&gold)?;
        let pred_docs = read_corpus_dir(&pred)?;
        let (g, mut findings) = normalized_corpus(&gold_docs, &self.schema);
        let (p, pf) = normalized_corpus(&pred_docs, &self.schema);
        findings.extend(pf);

        let scorer = Scorer::new(&self.schema);
        let ids: Vec<&String> = g.keys().chain(p.keys().filter(|k| !g.contains_key(*k))).collect();
        let per_doc: Vec<_> = ids
            .par_iter()
            .map(|id| {
                let ge = g.get(*id).map(Vec::as_slice).unwrap_or(&[]);
                let pe = p.get(*id).map(Vec::as_slice).unwrap_or(&[]);
                let mut f = Vec::new();
                if !g.contains_key(*id) {
                    f.push(Finding::warning(id.as_str(), "predicted document has no gold counterpart"));
                }
                let (t, sf) = scorer.score_document(id, ge, pe);
                f.extend(sf);
                (t, f)
            })
            .collect();
        let mut tally = scorer.empty_tally();
        for (t, f) in per_doc {
            tally.merge(&t);
            findings.extend(f);
        }
        let report = scorer.report(&tally);
        report_findings(&findings);

        for path in std::iter::once(&json_out).chain(tsv_out.as_ref()) {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
        }
        fs::write(&json_out, report.to_json() + "\n").with_context(|| format!("writing {}", json_out.display()))?;
        if let Some(t) = &tsv_out {
            fs::write(t, report.to_tsv()).with_context(|| format!("writing {}", t.display()))?;
        }
        let cfg = with(
            &self.base,
            json!({
                "gold": show(&gold),
                "pred": show(&pred),
                "json": show(&json_out),
                "tsv": tsv_out.as_deref().map(show),
                "assumptions": SCORING_ASSUMPTIONS,
            }),
        );
        manifest::write(&manifest_path, "score", cfg)?;
        let m = report.metrics;
        println!(
            "OVERALL positives {} TP {} PP {} P {:.4} R {:.4} F1 {:.4}",
            report.overall.positives, report.overall.true_positives, report.overall.predicted_positives, m.precision, m.recall, m.f1
        );
        Ok(!(strict && !findings.is_empty()))
    }

    fn encode(&self, input: &Path, out: &Path, with_gold: bool) -> Result<()> {
        let input = existing(input)?;
        let out = absolute(out)?;
        let docs = read_corpus_dir(&input)?;
        let (gold, findings) = normalized_corpus(&docs, &self.schema);
        report_findings(&findings);
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let mut written = 0;
        for d in &docs {
            let events = with_gold.then(|| gold[d.doc_id()].as_slice());
            for (ty, s) in sdoh_core::codec::encode_document(d.text(), events, &self.schema) {
                let path = out.join(format!("{}.{ty}.sandwich.txt", d.doc_id()));
                fs::write(&path, s.to_file(d.doc_id())).with_context(|| format!("writing {}", path.display()))?;
                written += 1;
            }
        }
        let cfg = with(
            &self.base,
            json!({
                "input": show(&input),
                "with_gold": with_gold,
                "sandwich_format": SANDWICH_FORMAT,
                "sandwich_version": SANDWICH_VERSION,
            }),
        );
        manifest::write(&out.join(MANIFEST_FILE), "codec encode", cfg)?;
        println!("wrote {written} prompt files for {} documents", docs.len());
        Ok(())
    }

    fn decode(
        &self,
        sandwiches: &Path,
        generated: Option<&Path>,
        corpus: Option<&Path>,
        out: &Path,
        strict: bool,
    ) -> Result<bool> {
        let sandwiches = existing(sandwiches)?;
        let generated = generated.map(existing).transpose()?;
        let corpus = corpus.map(existing).transpose()?;
        let out = absolute(out)?;
        let mut files: Vec<PathBuf> = fs::read_dir(&sandwiches)
            .with_context(|| format!("reading {}", sandwiches.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".sandwich.txt"))
            .collect();
        files.sort();

        let mut findings = Vec::new();
        // doc id -> (narrative, events)
        let mut docs: BTreeMap<String, (String, Vec<SdohEvent>)> = BTreeMap::new();
        for path in &files {
            let content = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let (doc_id, s) = PromptSandwich::from_file(&content).map_err(|e| anyhow!("{}: {e}", path.display()))?;
            let table = match &generated {
                Some(dir) => {
                    let g = dir.join(format!("{doc_id}.{}.table.txt", s.event_type));
                    match fs::read_to_string(&g) {
                        Ok(t) => t,
                        Err(_) => {
                            findings.push(Finding::warning(show(&g), "no generated table; treated as empty"));
                            String::new()
                        }
                    }
                }
                None => s.gold_rows.iter().flatten().map(|r| format!("{r}\n")).collect(),
            };
            let (events, f) = parse_table(&table, &s.narrative, &s.event_type, &self.schema);
            findings.extend(f.into_iter().map(|x| Finding {
                id: format!("{doc_id}: {}", x.id),
                ..x
            }));
            let entry = docs.entry(doc_id).or_insert_with(|| (s.narrative.clone(), Vec::new()));
            entry.1.extend(events);
        }

        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        for (doc_id, (narrative, events)) in &docs {
            let mut text = narrative.clone();
            if let Some(dir) = &corpus {
                let original = read_document(&dir.join(format!("{doc_id}.txt")))?;
                if original.document().char_len() == narrative.chars().count() {
                    text = original.text().to_string();
                } else {
                    findings.push(Finding::warning(doc_id.as_str(), "original text length differs; narrative kept"));
                }
            }
            let document = TextDocument::new(doc_id.as_str(), text)?;
            let keep: Vec<SdohEvent> = events.iter().filter(|e| e.unknown_parts(&self.schema).is_empty()).cloned().collect();
            write_document(&out, &denormalize_events(&keep, &document, &self.schema)?)?;
        }
        report_findings(&findings);
        let cfg = with(
            &self.base,
            json!({
                "sandwiches": show(&sandwiches),
                "generated": generated.as_deref().map(show),
                "corpus": corpus.as_deref().map(show),
            }),
        );
        manifest::write(&out.join(MANIFEST_FILE), "codec decode", cfg)?;
        println!("{} documents, {} findings", docs.len(), findings.len());
        Ok(!(strict && !findings.is_empty()))
    }
}
