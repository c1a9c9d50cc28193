//! `tripletgen`: build catalog tries, decode documents into triplet sets,
//! and score predictions against gold annotations.

mod attribute;
mod build_trie;
mod data;
mod decode;
mod evaluate;
mod io;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "tripletgen",
    version,
    about = "Catalog-constrained triplet extraction and evaluation"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Serialize)]
pub struct Common {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Serialize the entity and relation tries of a catalog.
    BuildTrie(build_trie::BuildTrieArgs),
    /// Decode input documents into ranked triplet sets.
    Decode(decode::DecodeArgs),
    /// Micro and macro scores, optionally with bootstrap intervals and buckets.
    Evaluate(evaluate::EvaluateArgs),
    /// Per-bucket scores by training occurrence count, as TSV.
    Buckets(evaluate::BucketsArgs),
    /// Split recall error into recognition, linking and relation components.
    Attribute(attribute::AttributeArgs),
}

/// Catalog file flags shared by most subcommands.
#[derive(Args, Clone, Serialize)]
pub struct CatalogArgs {
    #[arg(long)]
    pub entity_catalog: PathBuf,
    #[arg(long)]
    pub relation_catalog: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MacroModeArg {
    Zero,
    Exclude,
}

impl From<MacroModeArg> for tripletgen::metrics::MacroMode {
    fn from(m: MacroModeArg) -> Self {
        match m {
            MacroModeArg::Zero => tripletgen::metrics::MacroMode::Zero,
            MacroModeArg::Exclude => tripletgen::metrics::MacroMode::Exclude,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.jobs)
        .build_global()?;
    match cli.command {
        Command::BuildTrie(a) => build_trie::run(&a, &cli.common),
        Command::Decode(a) => decode::run(&a, &cli.common),
        Command::Evaluate(a) => evaluate::run(&a, &cli.common),
        Command::Buckets(a) => evaluate::run_buckets(&a, &cli.common),
        Command::Attribute(a) => attribute::run(&a, &cli.common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
