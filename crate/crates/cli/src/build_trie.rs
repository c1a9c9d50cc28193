use crate::data::load_catalog;
use crate::io::{Outputs, RunManifest};
use crate::Common;
use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use tripletgen::catalog::{ByteTokenizer, TokenTrie, Tokenizer, TrieHeader};

pub const ENTITY_TRIE: &str = "entities.trie";
pub const RELATION_TRIE: &str = "relations.trie";

#[derive(Args, Serialize)]
pub struct BuildTrieArgs {
    /// Entity catalog TSV (`id<TAB>name[<TAB>external_id]`).
    #[arg(long)]
    pub entities: PathBuf,
    /// Relation catalog TSV.
    #[arg(long)]
    pub relations: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct TrieStats {
    names: usize,
    nodes: usize,
    /// In-memory size of the trie arrays.
    bytes: usize,
    file_bytes: usize,
    build_seconds: f64,
}

#[derive(Serialize)]
struct Stats {
    tokenizer: &'static str,
    entities: TrieStats,
    relations: TrieStats,
}

/// Header source string tying a trie file to the catalog it was built from.
pub fn source_tag(sha256: &str) -> String {
    format!("sha256:{sha256}")
}

fn build<'a>(
    names: impl Iterator<Item = (u32, &'a str)>,
    sha256: &str,
) -> Result<(Vec<u8>, TrieStats)> {
    let start = Instant::now();
    let trie = TokenTrie::build(names, &ByteTokenizer)?;
    let build_seconds = start.elapsed().as_secs_f64();
    let header = TrieHeader {
        tokenizer: ByteTokenizer.name().to_owned(),
        source: source_tag(sha256),
    };
    let mut buf = Vec::new();
    trie.write_to(&header, &mut buf)?;
    let stats = TrieStats {
        names: trie.len(),
        nodes: trie.node_count(),
        bytes: trie.heap_bytes(),
        file_bytes: buf.len(),
        build_seconds,
    };
    Ok((buf, stats))
}

pub fn run(args: &BuildTrieArgs, common: &Common) -> Result<()> {
    let loaded = load_catalog(&args.entities, &args.relations)?;
    let cat = &loaded.catalog;
    let (ent_bytes, ent_stats) = build(
        cat.entities().map(|(id, n)| (id.0, n)),
        &loaded.entities.sha256,
    )
    .context("building the entity trie")?;
    let (rel_bytes, rel_stats) = build(
        cat.relations().map(|(id, n)| (id.0, n)),
        &loaded.relations.sha256,
    )
    .context("building the relation trie")?;

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut manifest = RunManifest::new("build-trie", common.seed, args)?;
    manifest.input("entities", &loaded.entities);
    manifest.input("relations", &loaded.relations);

    let mut out = Outputs::default();
    out.stage(&args.out_dir.join(ENTITY_TRIE), &ent_bytes)?;
    out.stage(&args.out_dir.join(RELATION_TRIE), &rel_bytes)?;
    out.stage_json(
        &args.out_dir.join("stats.json"),
        &Stats {
            tokenizer: "utf8-bytes",
            entities: ent_stats,
            relations: rel_stats,
        },
    )?;
    let manifest_path = common
        .manifest_out
        .clone()
        .unwrap_or_else(|| args.out_dir.join("manifest.json"));
    out.stage_json(&manifest_path, &manifest)?;
    out.commit()
}

/// Loads a trie written by `build-trie`, refusing files built from a
/// different catalog or with a different tokenizer.
pub fn load_trie(path: &Path, expected_sha256: &str) -> Result<TokenTrie> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (header, trie) = TokenTrie::read_from(std::io::BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))?;
    if header.tokenizer != ByteTokenizer.name() {
        anyhow::bail!(
            "{} was built with tokenizer {:?}",
            path.display(),
            header.tokenizer
        );
    }
    if header.source != source_tag(expected_sha256) {
        anyhow::bail!(
            "{} was built from a different catalog ({})",
            path.display(),
            header.source
        );
    }
    Ok(trie)
}
