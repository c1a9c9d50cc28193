use crate::data::{load_catalog, load_counts, load_documents, pair_documents, Paired};
use crate::io::{manifest_path, Input, Outputs, RunManifest};
use crate::{CatalogArgs, Common, MacroModeArg};
use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use tripletgen::catalog::Catalog;
use tripletgen::metrics::{
    bootstrap_ci, bucketed_f1, macro_scores, micro_scores, BootstrapConfig, BucketScore, Counts,
    EvalPair, Interval, MacroMode, Scores,
};

#[derive(Args, Serialize)]
pub struct EvaluateArgs {
    /// Gold JSONL.
    #[arg(long)]
    pub gold: PathBuf,
    /// Prediction JSONL; the top-level `triplets` of each record are scored.
    #[arg(long)]
    pub pred: PathBuf,
    #[command(flatten)]
    pub catalog: CatalogArgs,
    /// Training occurrence counts (`relation_name<TAB>count`), needed for --buckets.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Add per-bucket scores to the report and write the bucket table.
    #[arg(long)]
    pub buckets: bool,
    /// TSV bucket table destination (default: `<out>.buckets.tsv`, or stdout after the report).
    #[arg(long)]
    pub bucket_table: Option<PathBuf>,
    /// Bootstrap resamples for confidence intervals (0 disables).
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value = "zero")]
    pub macro_mode: MacroModeArg,
    /// JSON report destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct BucketsArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[command(flatten)]
    pub catalog: CatalogArgs,
    #[arg(long)]
    pub counts: PathBuf,
    /// TSV destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RelationRow {
    relation: String,
    #[serde(flatten)]
    counts: Counts,
    #[serde(flatten)]
    scores: Scores,
}

#[derive(Serialize)]
struct Intervals {
    resamples: usize,
    level: f64,
    seed: u64,
    micro_f1: Interval,
    macro_f1: Interval,
}

#[derive(Serialize)]
struct BucketReport {
    /// Relations in the counts file that are not in the catalog.
    unknown_count_relations: usize,
    buckets: Vec<BucketScore>,
}

#[derive(Serialize)]
struct Report {
    documents: usize,
    dropped_predictions: usize,
    missing_predictions: usize,
    extra_predictions: usize,
    micro: Scores,
    macro_mode: MacroModeArg,
    #[serde(rename = "macro")]
    macro_: Scores,
    per_relation: Vec<RelationRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap: Option<Intervals>,
    #[serde(skip_serializing_if = "Option::is_none")]
    buckets: Option<BucketReport>,
}

struct Loaded {
    catalog: Catalog,
    paired: Paired,
    manifest: RunManifest,
}

fn load<C: Serialize>(
    subcommand: &'static str,
    args: &C,
    gold: &Path,
    pred: &Path,
    catalog: &CatalogArgs,
    common: &Common,
) -> Result<Loaded> {
    let loaded = load_catalog(&catalog.entity_catalog, &catalog.relation_catalog)?;
    let gold_in = Input::read(gold)?;
    let pred_in = Input::read(pred)?;
    let mut manifest = RunManifest::new(subcommand, common.seed, args)?;
    manifest.input("gold", &gold_in);
    manifest.input("pred", &pred_in);
    manifest.input("entity_catalog", &loaded.entities);
    manifest.input("relation_catalog", &loaded.relations);
    let paired = pair_documents(
        load_documents(&gold_in)?,
        load_documents(&pred_in)?,
        &loaded.catalog,
    )?;
    Ok(Loaded {
        catalog: loaded.catalog,
        paired,
        manifest,
    })
}

fn bucket_scores(
    pairs: &[EvalPair],
    counts_path: &Path,
    cat: &Catalog,
    manifest: &mut RunManifest,
) -> Result<BucketReport> {
    let input = Input::read(counts_path)?;
    manifest.input("counts", &input);
    let (counts, unknown_count_relations) = load_counts(&input, cat)?;
    Ok(BucketReport {
        unknown_count_relations,
        buckets: bucketed_f1(pairs, &counts).into_values().collect(),
    })
}

pub fn bucket_tsv(buckets: &[BucketScore]) -> String {
    let mut out = String::from("bucket\tmin_count\tmax_count\trelations\tgold\tpredicted\tcorrect\tprecision\trecall\tf1\n");
    for b in buckets {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            b.bucket,
            b.min_count,
            b.max_count,
            b.relations,
            b.counts.gold,
            b.counts.predicted,
            b.counts.correct,
            b.scores.precision,
            b.scores.recall,
            b.scores.f1
        )
        .unwrap();
    }
    out
}

fn macro_f1(sample: &[&EvalPair], mode: MacroMode) -> f64 {
    macro_scores(sample.iter().copied(), mode).scores.f1
}

pub fn run(args: &EvaluateArgs, common: &Common) -> Result<()> {
    if args.buckets && args.counts.is_none() {
        bail!("--buckets needs --counts");
    }
    let Loaded {
        catalog,
        paired,
        mut manifest,
    } = load(
        "evaluate",
        args,
        &args.gold,
        &args.pred,
        &args.catalog,
        common,
    )?;
    let pairs = &paired.pairs;
    let mode: MacroMode = args.macro_mode.into();
    let mac = macro_scores(pairs, mode);

    let bootstrap = if args.bootstrap > 0 {
        let cfg = BootstrapConfig {
            resamples: args.bootstrap,
            level: args.level,
            seed: common.seed,
        };
        Some(Intervals {
            resamples: cfg.resamples,
            level: cfg.level,
            seed: cfg.seed,
            micro_f1: bootstrap_ci(pairs, |s| micro_scores(s.iter().copied()).f1, &cfg)?,
            macro_f1: bootstrap_ci(pairs, |s| macro_f1(s, mode), &cfg)?,
        })
    } else {
        None
    };

    let buckets = match (&args.counts, args.buckets) {
        (Some(path), true) => Some(bucket_scores(pairs, path, &catalog, &mut manifest)?),
        _ => None,
    };

    let report = Report {
        documents: pairs.len(),
        dropped_predictions: paired.dropped_predictions,
        missing_predictions: paired.missing_predictions,
        extra_predictions: paired.extra_predictions,
        micro: micro_scores(pairs),
        macro_mode: args.macro_mode,
        macro_: mac.scores,
        per_relation: mac
            .per_relation
            .into_iter()
            .map(|r| RelationRow {
                relation: catalog
                    .relation_name(r.relation)
                    .unwrap_or_default()
                    .to_owned(),
                counts: r.counts,
                scores: r.scores,
            })
            .collect(),
        bootstrap,
        buckets,
    };

    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    let table = report.buckets.as_ref().map(|b| bucket_tsv(&b.buckets));
    match &args.out {
        Some(out_path) => {
            let mut out = Outputs::default();
            out.stage(out_path, json.as_bytes())?;
            if let Some(table) = &table {
                let dest = args.bucket_table.clone().unwrap_or_else(|| {
                    let mut name = out_path.file_name().unwrap_or_default().to_os_string();
                    name.push(".buckets.tsv");
                    out_path.with_file_name(name)
                });
                out.stage(&dest, table.as_bytes())?;
            }
            out.stage_json(
                &manifest_path(common.manifest_out.as_deref(), out_path),
                &manifest,
            )?;
            out.commit()
        }
        None => {
            let mut out = Outputs::default();
            if let (Some(table), Some(dest)) = (&table, &args.bucket_table) {
                out.stage(dest, table.as_bytes())?;
            }
            if let Some(m) = &common.manifest_out {
                out.stage_json(m, &manifest)?;
            }
            out.commit()?;
            print!("{json}");
            if let (Some(table), None) = (&table, &args.bucket_table) {
                print!("{table}");
            }
            Ok(())
        }
    }
}

pub fn run_buckets(args: &BucketsArgs, common: &Common) -> Result<()> {
    let Loaded {
        catalog,
        paired,
        mut manifest,
    } = load(
        "buckets",
        args,
        &args.gold,
        &args.pred,
        &args.catalog,
        common,
    )?;
    let report = bucket_scores(&paired.pairs, &args.counts, &catalog, &mut manifest)?;
    if report.unknown_count_relations > 0 {
        eprintln!(
            "warning: {} relation(s) in the counts file are not in the catalog",
            report.unknown_count_relations
        );
    }
    let table = bucket_tsv(&report.buckets);
    let mut out = Outputs::default();
    match &args.out {
        Some(p) => {
            out.stage(p, table.as_bytes())?;
            out.stage_json(&manifest_path(common.manifest_out.as_deref(), p), &manifest)?;
            out.commit()
        }
        None => {
            if let Some(m) = &common.manifest_out {
                out.stage_json(m, &manifest)?;
            }
            out.commit()?;
            print!("{table}");
            Ok(())
        }
    }
}
