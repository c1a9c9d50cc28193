use crate::build_trie::{load_trie, ENTITY_TRIE, RELATION_TRIE};
use crate::data::{gold_triplets, load_catalog, load_documents};
use crate::io::{manifest_path, Input, Outputs, RunManifest};
use crate::{CatalogArgs, Common};
use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use tripletgen::catalog::{ByteTokenizer, Catalog, TokenId, Tries};
use tripletgen::decoder::{decode, Candidate, DecodeConfig, DecodeError, Scorer};
use tripletgen::linearize::{
    linearize, order_triplets, write_jsonl, CandidateRecord, DocumentRecord, Triplet, TripletRecord,
};
use tripletgen::scorers::{
    train_ngram, training_sequence, NGramScorer, OracleScorer, UniformScorer,
};

/// `uniform`, `oracle:FILE` or `ngram:FILE`.
#[derive(Clone, Debug, Serialize)]
#[serde(into = "String")]
pub enum ScorerSpec {
    Uniform,
    /// Per-document targets: the gold triplets of the matching id in FILE.
    Oracle(PathBuf),
    /// n-gram model trained on the documents in FILE.
    NGram(PathBuf),
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "uniform" => Ok(ScorerSpec::Uniform),
            Some(("oracle", f)) if !f.is_empty() => Ok(ScorerSpec::Oracle(f.into())),
            Some(("ngram", f)) if !f.is_empty() => Ok(ScorerSpec::NGram(f.into())),
            _ => Err(format!(
                "unknown scorer {s:?}; expected uniform, oracle:FILE or ngram:FILE"
            )),
        }
    }
}

impl From<ScorerSpec> for String {
    fn from(s: ScorerSpec) -> String {
        match s {
            ScorerSpec::Uniform => "uniform".to_owned(),
            ScorerSpec::Oracle(p) => format!("oracle:{}", p.display()),
            ScorerSpec::NGram(p) => format!("ngram:{}", p.display()),
        }
    }
}

#[derive(Args, Serialize)]
pub struct DecodeArgs {
    /// JSONL documents with `id` and `input`.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub catalog: CatalogArgs,
    /// Directory written by `build-trie`; tries are rebuilt from the catalog when omitted.
    #[arg(long)]
    pub trie_dir: Option<PathBuf>,
    /// `uniform`, `oracle:FILE` (each document's gold triplets in FILE) or
    /// `ngram:FILE` (byte n-gram trained on FILE).
    #[arg(long, default_value = "uniform")]
    pub scorer: ScorerSpec,
    /// Probability the oracle scorer puts on its target token.
    #[arg(long, default_value_t = OracleScorer::DEFAULT_MASS)]
    pub oracle_mass: f64,
    #[arg(long, default_value_t = 3)]
    pub ngram_order: usize,
    #[arg(long, default_value_t = 5)]
    pub beam_size: usize,
    #[arg(long, default_value_t = 256)]
    pub max_len: usize,
    #[arg(long, default_value_t = 0.0)]
    pub length_alpha: f64,
    /// Disallow the empty triplet set.
    #[arg(long)]
    pub no_empty: bool,
    #[arg(long)]
    pub max_triplets: Option<usize>,
    /// Prediction JSONL to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn tries(args: &DecodeArgs, cat: &Catalog, ent: &Input, rel: &Input) -> Result<Tries> {
    match &args.trie_dir {
        Some(dir) => Ok(Tries {
            entities: load_trie(&dir.join(ENTITY_TRIE), &ent.sha256)?,
            relations: load_trie(&dir.join(RELATION_TRIE), &rel.sha256)?,
        }),
        None => cat.build_tries(&ByteTokenizer).context("building tries"),
    }
}

fn gold_linearization(doc: &DocumentRecord, cat: &Catalog) -> Result<Vec<TokenId>> {
    let ordered: Vec<Triplet> = order_triplets(gold_triplets(doc, cat)?)
        .into_iter()
        .map(|m| m.triplet)
        .collect();
    Ok(linearize(&ordered, cat, &ByteTokenizer)?)
}

enum Scoring {
    Shared(Box<dyn Scorer>),
    PerDocument(HashMap<String, OracleScorer>),
}

fn scoring(args: &DecodeArgs, cat: &Catalog, manifest: &mut RunManifest) -> Result<Scoring> {
    let vocab = ByteTokenizer::VOCAB_SIZE;
    Ok(match &args.scorer {
        ScorerSpec::Uniform => Scoring::Shared(Box::new(UniformScorer::new(vocab)?)),
        ScorerSpec::Oracle(path) => {
            let input = Input::read(path)?;
            manifest.input("oracle", &input);
            let mut targets = HashMap::new();
            for doc in load_documents(&input)? {
                let target = gold_linearization(&doc, cat)?;
                targets.insert(doc.id, OracleScorer::new(target, args.oracle_mass, vocab)?);
            }
            Scoring::PerDocument(targets)
        }
        ScorerSpec::NGram(path) => {
            let input = Input::read(path)?;
            manifest.input("ngram_train", &input);
            let corpus = load_documents(&input)?
                .iter()
                .map(|doc| {
                    Ok(training_sequence(
                        &doc.input,
                        &gold_linearization(doc, cat)?,
                        &ByteTokenizer,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let model: NGramScorer =
                train_ngram(&corpus, args.ngram_order, Arc::new(ByteTokenizer))?;
            Scoring::Shared(Box::new(model))
        }
    })
}

/// Distinct triplets in generation order.
fn records(triplets: &[Triplet], cat: &Catalog) -> Vec<TripletRecord> {
    let mut seen = std::collections::HashSet::new();
    triplets
        .iter()
        .filter(|t| seen.insert(**t))
        .map(|t| TripletRecord::from_triplet(t, cat).expect("decoded ids come from the catalog"))
        .collect()
}

fn to_record(doc: &DocumentRecord, cands: &[Candidate], cat: &Catalog) -> DocumentRecord {
    DocumentRecord {
        id: doc.id.clone(),
        input: doc.input.clone(),
        triplets: cands
            .first()
            .map(|c| records(&c.sequence, cat))
            .unwrap_or_default(),
        candidates: cands
            .iter()
            .enumerate()
            .map(|(i, c)| CandidateRecord {
                rank: i + 1,
                log_prob: c.log_prob,
                triplets: records(&c.sequence, cat),
            })
            .collect(),
    }
}

pub fn run(args: &DecodeArgs, common: &Common) -> Result<()> {
    let loaded = load_catalog(&args.catalog.entity_catalog, &args.catalog.relation_catalog)?;
    let cat = &loaded.catalog;
    let input = Input::read(&args.input)?;
    let docs = load_documents(&input)?;
    let mut manifest = RunManifest::new("decode", common.seed, args)?;
    manifest.input("input", &input);
    manifest.input("entity_catalog", &loaded.entities);
    manifest.input("relation_catalog", &loaded.relations);

    let cfg = DecodeConfig {
        beam_size: args.beam_size,
        max_len: args.max_len,
        length_alpha: args.length_alpha,
        allow_empty_set: !args.no_empty,
        max_triplets: args.max_triplets,
    };
    cfg.validate()?;
    let tries = tries(args, cat, &loaded.entities, &loaded.relations)?;
    let scoring = scoring(args, cat, &mut manifest)?;

    let results: Vec<Result<Option<DocumentRecord>>> = docs
        .par_iter()
        .map(|doc| {
            let scorer: &dyn Scorer = match &scoring {
                Scoring::Shared(s) => s.as_ref(),
                Scoring::PerDocument(m) => match m.get(&doc.id) {
                    Some(s) => s,
                    None => bail!("oracle file has no document {:?}", doc.id),
                },
            };
            match decode(&doc.input, scorer, &tries, &cfg) {
                Ok(cands) => Ok(Some(to_record(doc, &cands, cat))),
                Err(DecodeError::NoCompleteHypothesis { .. }) => Ok(None),
                Err(e) => Err(e).with_context(|| format!("decoding document {:?}", doc.id)),
            }
        })
        .collect();

    let mut out_records = Vec::with_capacity(docs.len());
    let mut unfinished = 0;
    for (doc, r) in docs.iter().zip(results) {
        match r? {
            Some(rec) => out_records.push(rec),
            None => {
                unfinished += 1;
                out_records.push(to_record(doc, &[], cat));
            }
        }
    }
    if unfinished > 0 {
        eprintln!(
            "warning: {unfinished} document(s) produced no sequence within {} tokens",
            cfg.max_len
        );
    }

    let mut buf = Vec::new();
    write_jsonl(&mut buf, &out_records)?;
    let mut out = Outputs::default();
    out.stage(&args.out, &buf)?;
    out.stage_json(
        &manifest_path(common.manifest_out.as_deref(), &args.out),
        &manifest,
    )?;
    out.commit()
}
