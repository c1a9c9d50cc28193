use crate::data::{load_catalog, load_documents, pair_documents};
use crate::io::{manifest_path, Input, Outputs, RunManifest};
use crate::{CatalogArgs, Common};
use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::PathBuf;
use tripletgen::attribution::{
    match_triplets, nel_rc_errors, ner_error, AttributionError, MentionDoc, MentionMode,
};
use tripletgen::linearize::Span;
use tripletgen::metrics::micro_scores;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exact,
    Partial,
}

#[derive(Args, Serialize)]
pub struct AttributeArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[command(flatten)]
    pub catalog: CatalogArgs,
    /// Recognized mentions, JSONL `{"id": ..., "mentions": [[start, end], ...]}`.
    #[arg(long)]
    pub mentions: Option<PathBuf>,
    /// Mention matching for the NER error (default: both).
    #[arg(long, value_enum, requires = "mentions")]
    pub mode: Option<ModeArg>,
    /// JSON destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct MentionRecord {
    id: String,
    #[serde(default)]
    mentions: Vec<[usize; 2]>,
}

#[derive(Serialize)]
struct Report {
    documents: usize,
    edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    ner_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ner_partial: Option<f64>,
    nel_error: f64,
    rc_error: f64,
    overall_recall_error: f64,
    /// Matching edges per weight.
    weights: BTreeMap<u8, usize>,
    dropped_predictions: usize,
}

fn read_mentions(input: &Input) -> Result<HashMap<String, Vec<Span>>> {
    let mut out = HashMap::new();
    for (i, line) in input.bytes.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MentionRecord = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", input.path.display(), i + 1))?;
        let spans = rec
            .mentions
            .iter()
            .map(|&[s, e]| {
                Span::new(s, e)
                    .with_context(|| format!("document {:?}: invalid span [{s}, {e}]", rec.id))
            })
            .collect::<Result<Vec<_>>>()?;
        if out.insert(rec.id.clone(), spans).is_some() {
            bail!(
                "{}: duplicate document id {:?}",
                input.path.display(),
                rec.id
            );
        }
    }
    Ok(out)
}

pub fn run(args: &AttributeArgs, common: &Common) -> Result<()> {
    let loaded = load_catalog(&args.catalog.entity_catalog, &args.catalog.relation_catalog)?;
    let gold_in = Input::read(&args.gold)?;
    let pred_in = Input::read(&args.pred)?;
    let mut manifest = RunManifest::new("attribute", common.seed, args)?;
    manifest.input("gold", &gold_in);
    manifest.input("pred", &pred_in);
    manifest.input("entity_catalog", &loaded.entities);
    manifest.input("relation_catalog", &loaded.relations);
    let paired = pair_documents(
        load_documents(&gold_in)?,
        load_documents(&pred_in)?,
        &loaded.catalog,
    )?;

    let rates = nel_rc_errors(&paired.pairs);
    let mut weights = BTreeMap::new();
    for p in &paired.pairs {
        for e in match_triplets(&p.gold, &p.predicted).edges {
            *weights.entry(e.weight).or_insert(0) += 1;
        }
    }

    let (mut ner_exact, mut ner_partial) = (None, None);
    if let Some(path) = &args.mentions {
        let input = Input::read(path)?;
        manifest.input("mentions", &input);
        let mut mentions = read_mentions(&input)?;
        let docs: Vec<MentionDoc> = paired
            .gold_docs
            .iter()
            .zip(&paired.gold_mentions)
            .map(|(d, gold)| MentionDoc {
                gold: gold.clone(),
                predicted_mentions: mentions.remove(&d.id).unwrap_or_default(),
            })
            .collect();
        let ner = |mode| {
            ner_error(&docs, mode).map_err(|e| {
                let AttributionError::MissingSpans { doc, .. } = e;
                anyhow::Error::new(e).context(format!("document {:?}", paired.gold_docs[doc].id))
            })
        };
        let want = |m: ModeArg| args.mode.is_none_or(|chosen| chosen == m);
        if want(ModeArg::Exact) {
            ner_exact = Some(ner(MentionMode::Exact)?);
        }
        if want(ModeArg::Partial) {
            ner_partial = Some(ner(MentionMode::Partial)?);
        }
    }

    let edges = rates.edges;
    let report = Report {
        documents: paired.pairs.len(),
        edges,
        ner_exact,
        ner_partial,
        nel_error: rates.nel_error,
        rc_error: rates.rc_error,
        overall_recall_error: if edges == 0 {
            0.0
        } else {
            1.0 - micro_scores(&paired.pairs).recall
        },
        weights,
        dropped_predictions: paired.dropped_predictions,
    };

    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    let mut out = Outputs::default();
    match &args.out {
        Some(p) => {
            out.stage(p, json.as_bytes())?;
            out.stage_json(&manifest_path(common.manifest_out.as_deref(), p), &manifest)?;
            out.commit()
        }
        None => {
            if let Some(m) = &common.manifest_out {
                out.stage_json(m, &manifest)?;
            }
            out.commit()?;
            print!("{json}");
            Ok(())
        }
    }
}
