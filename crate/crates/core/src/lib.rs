//! Catalog-constrained generation of (subject, relation, object) triplet sets
//! and the evaluation tooling around it.
//!
//! - [`catalog`]: entity/relation catalogs, tokenizers and prefix tries.
//! - [`linearize`]: triplet sets as special-token sequences, and back.
//! - [`decoder`]: constrained beam search over any [`Scorer`].
//! - [`scorers`]: deterministic reference scorers.
//! - [`metrics`]: micro/macro scores, occurrence buckets, bootstrap intervals.
//! - [`attribution`]: NER/NEL/RC error attribution by greedy matching.

pub mod attribution;
pub mod catalog;
pub mod decoder;
pub mod linearize;
pub mod metrics;
pub mod scorers;

pub use catalog::{
    ByteTokenizer, Catalog, EntityId, RelationId, TokenId, TokenTrie, Tokenizer, Tries,
};
pub use decoder::{decode, Candidate, DecodeConfig, DecodeError, Scorer};
pub use linearize::{
    linearize, order_triplets, parse, MentionedTriplet, Span, Triplet, TripletSet,
};
pub use metrics::{EvalPair, Scores};
