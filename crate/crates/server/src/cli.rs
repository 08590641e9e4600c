//! Offline commands. Each returns the JSON it prints.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use clinanno_core::adjudication::Submission;
use clinanno_core::agreement::{compare_documents, segment as split, SegmentLabel, Variant, GOLD_THRESHOLD};
use clinanno_core::ingestion::{parse_corpus, parse_gold, ExportFormat, GoldRecord, SourceRecord};
use clinanno_core::registry::Registry;
use clinanno_core::workflow::plan_assignments;
use clinanno_core::{Actor, DocumentId, Role};
use serde::Deserialize;
use serde_json::{json, Map, Value};

#[derive(Debug, Args)]
pub struct AssignArgs {
    /// One document id per line, or JSON Lines source records.
    #[arg(long)]
    pub batch: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub annotators: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub adjudicators: Vec<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub round: u32,
}

#[derive(Debug, Args)]
pub struct IaaArgs {
    /// JSON with the two submissions: `{"submissions": [{...}, {...}]}`.
    #[arg(long)]
    pub doc: PathBuf,
    /// `all` or one of strict, lenient, flexible, relaxed.
    #[arg(long, default_value = "all")]
    pub variant: String,
    #[arg(long)]
    pub per_type: bool,
    #[arg(long, default_value_t = GOLD_THRESHOLD)]
    pub threshold: f64,
    /// Semantic type table; the bundled one when absent.
    #[arg(long)]
    pub registry: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Directory of `.json` / `.xml` gold exports.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = GOLD_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value = "strict")]
    pub variant: String,
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Document ids from a batch file. Lines starting with `{` are source records.
pub fn batch_ids(text: &str) -> anyhow::Result<Vec<DocumentId>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('{') {
            let rec: SourceRecord = serde_json::from_str(line).with_context(|| format!("batch line {}", i + 1))?;
            out.push(DocumentId::new(rec.occurrence_id.to_string()));
        } else {
            out.push(DocumentId::new(line));
        }
    }
    Ok(out)
}

pub fn assign(args: &AssignArgs) -> anyhow::Result<String> {
    let ids = batch_ids(&read(&args.batch)?)?;
    let team = |ids: &[String], role| ids.iter().map(|id| Actor::new(id.trim(), role)).collect::<Vec<_>>();
    let plan = plan_assignments(
        &ids,
        &team(&args.annotators, Role::Annotator),
        &team(&args.adjudicators, Role::Adjudicator),
        args.seed,
        args.round,
    )?;
    Ok(serde_json::to_string_pretty(&plan)?)
}

#[derive(Deserialize)]
struct DoubleAnnotation {
    #[serde(default)]
    document: Option<DocumentId>,
    submissions: Vec<Submission>,
}

pub fn iaa(args: &IaaArgs) -> anyhow::Result<String> {
    let registry = match &args.registry {
        Some(p) => Registry::load(p)?,
        None => Registry::builtin(),
    };
    let input: DoubleAnnotation = serde_json::from_str(&read(&args.doc)?).context("parsing double annotation")?;
    iaa_report(input, &args.variant, args.per_type, args.threshold, &registry).map(|v| v.to_string())
}

fn iaa_report(
    input: DoubleAnnotation,
    variant: &str,
    per_type: bool,
    threshold: f64,
    registry: &Registry,
) -> anyhow::Result<Value> {
    let [a, b] = <[Submission; 2]>::try_from(input.submissions)
        .map_err(|s| anyhow::anyhow!("expected two submissions, got {}", s.len()))?;
    let document = input
        .document
        .or_else(|| {
            a.annotations
                .iter()
                .chain(&b.annotations)
                .map(|x| x.document.clone())
                .next()
        })
        .unwrap_or_else(|| DocumentId::new(""));
    let report = compare_documents(
        document,
        &a.annotations,
        &b.annotations,
        &a.relations,
        &b.relations,
        registry,
    )?;

    let selected: Vec<Variant> = if variant == "all" {
        Variant::ALL.to_vec()
    } else {
        vec![variant.parse()?]
    };
    let mut concepts = Map::new();
    for v in &selected {
        concepts.insert(v.name().to_string(), json!(report.concepts.get(*v)));
    }
    let split_on = if selected.len() == 1 {
        selected[0]
    } else {
        Variant::Strict
    };
    let label = split(report.concepts.get(split_on).value, threshold).unwrap_or(SegmentLabel::Platinum);
    let mut out = json!({
        "document": report.document,
        "concepts": concepts,
        "relations": report.relations,
        "segment": { "variant": split_on.name(), "threshold": threshold, "label": label },
    });
    if per_type {
        out["per_type"] = json!(report.per_type);
        out["per_relation_type"] = json!(report.per_relation_type);
    }
    Ok(out)
}

fn parse_export(bytes: &[u8], format: ExportFormat) -> anyhow::Result<Vec<GoldRecord>> {
    match parse_corpus(bytes, format) {
        Ok(records) => Ok(records),
        Err(_) => Ok(vec![parse_gold(bytes, format)?]),
    }
}

pub fn segment_corpus(dir: &Path, variant: Variant, threshold: f64) -> anyhow::Result<Value> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.sort();
    let mut gold = Vec::new();
    let mut platinum = Vec::new();
    let mut documents = Vec::new();
    for path in files {
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ExportFormat::Json,
            Some("xml") => ExportFormat::Xml,
            _ => continue,
        };
        let bytes = std::fs::read(&path)?;
        let records = parse_export(&bytes, format).with_context(|| format!("parsing {}", path.display()))?;
        for r in records {
            let value = match variant {
                Variant::Strict => r.iaa.strict,
                Variant::Lenient => r.iaa.lenient,
                Variant::Flexible => r.iaa.flexible,
                Variant::Relaxed => r.iaa.relaxed,
            };
            // no recorded value: keep the label assigned at adjudication
            let label = split(value, threshold).unwrap_or(r.segment);
            match label {
                SegmentLabel::Gold => gold.push(r.document.id.clone()),
                SegmentLabel::Platinum => platinum.push(r.document.id.clone()),
            }
            documents.push(json!({
                "id": r.document.id,
                "file": path.file_name().map(|f| f.to_string_lossy().into_owned()),
                "value": value,
                "segment": label,
            }));
        }
    }
    if documents.is_empty() {
        bail!("no gold exports found in {}", dir.display());
    }
    Ok(json!({
        "variant": variant.name(),
        "threshold": threshold,
        "gold": gold,
        "platinum": platinum,
        "documents": documents,
    }))
}

pub fn segment(args: &SegmentArgs) -> anyhow::Result<String> {
    let manifest = segment_corpus(&args.corpus, args.variant.parse()?, args.threshold)?;
    Ok(serde_json::to_string_pretty(&manifest)?)
}
