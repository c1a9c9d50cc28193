//! Deterministic reference scorers.
//!
//! None of these model language; they exist so the decoder can be exercised
//! and checked without a neural network.

use crate::catalog::{TokenId, Tokenizer};
use crate::decoder::Scorer;
use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScorerError {
    #[error("vocabulary must have at least {0} entries")]
    VocabTooSmall(usize),
    #[error("oracle target is empty")]
    EmptyTarget,
    #[error("oracle target token {0} is outside the vocabulary")]
    TargetOutOfVocab(TokenId),
    #[error("mass must lie strictly between 0 and 1, got {0}")]
    InvalidMass(f64),
    #[error("table has {got} entries, vocabulary has {expected}")]
    TableSize { expected: usize, got: usize },
    #[error("table probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("training corpus is empty")]
    EmptyCorpus,
}

/// Tolerance for checking that a table exponentiates to a distribution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

fn check_normalized(table: &[f64]) -> Result<(), ScorerError> {
    let sum: f64 = table.iter().map(|lp| lp.exp()).sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE || sum.is_nan() {
        return Err(ScorerError::NotNormalized(sum));
    }
    Ok(())
}

/// `log_softmax` of arbitrary finite logits.
pub fn log_softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    for l in logits.iter_mut() {
        *l -= lse;
    }
}

/// Same log-probability for every token and prefix.
#[derive(Clone, Debug)]
pub struct UniformScorer {
    vocab_size: usize,
}

impl UniformScorer {
    pub fn new(vocab_size: usize) -> Result<Self, ScorerError> {
        if vocab_size == 0 {
            return Err(ScorerError::VocabTooSmall(1));
        }
        Ok(UniformScorer { vocab_size })
    }
}

impl Scorer for UniformScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_log_probs(&self, _: &str, _: &[TokenId]) -> Vec<f64> {
        vec![-(self.vocab_size as f64).ln(); self.vocab_size]
    }
}

/// Puts `mass` on the next token of a fixed target while the prefix follows
/// it; uniform everywhere else.
#[derive(Clone, Debug)]
pub struct OracleScorer {
    target: Vec<TokenId>,
    vocab_size: usize,
    on_target: f64,
    off_target: f64,
}

impl OracleScorer {
    pub const DEFAULT_MASS: f64 = 0.99;

    pub fn new(target: Vec<TokenId>, mass: f64, vocab_size: usize) -> Result<Self, ScorerError> {
        if target.is_empty() {
            return Err(ScorerError::EmptyTarget);
        }
        if !(mass > 0.0 && mass < 1.0) {
            return Err(ScorerError::InvalidMass(mass));
        }
        if vocab_size < 2 {
            return Err(ScorerError::VocabTooSmall(2));
        }
        if let Some(&t) = target.iter().find(|t| t.index() >= vocab_size) {
            return Err(ScorerError::TargetOutOfVocab(t));
        }
        Ok(OracleScorer {
            target,
            vocab_size,
            on_target: mass.ln(),
            off_target: ((1.0 - mass) / (vocab_size - 1) as f64).ln(),
        })
    }

    pub fn target(&self) -> &[TokenId] {
        &self.target
    }
}

impl Scorer for OracleScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_log_probs(&self, _: &str, prefix: &[TokenId]) -> Vec<f64> {
        match self.target.get(prefix.len()) {
            Some(&next) if self.target.starts_with(prefix) => {
                let mut out = vec![self.off_target; self.vocab_size];
                out[next.index()] = self.on_target;
                out
            }
            _ => vec![-(self.vocab_size as f64).ln(); self.vocab_size],
        }
    }
}

/// Explicit per-prefix distributions with a uniform fallback. The input
/// context is ignored.
#[derive(Clone, Debug)]
pub struct TableScorer {
    vocab_size: usize,
    tables: HashMap<Vec<TokenId>, Vec<f64>>,
}

impl TableScorer {
    pub fn new(vocab_size: usize) -> Result<Self, ScorerError> {
        if vocab_size == 0 {
            return Err(ScorerError::VocabTooSmall(1));
        }
        Ok(TableScorer {
            vocab_size,
            tables: HashMap::new(),
        })
    }

    /// Stores the distribution used after `prefix`.
    pub fn insert(&mut self, prefix: Vec<TokenId>, log_probs: Vec<f64>) -> Result<(), ScorerError> {
        if log_probs.len() != self.vocab_size {
            return Err(ScorerError::TableSize {
                expected: self.vocab_size,
                got: log_probs.len(),
            });
        }
        check_normalized(&log_probs)?;
        self.tables.insert(prefix, log_probs);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

impl Scorer for TableScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_log_probs(&self, _: &str, prefix: &[TokenId]) -> Vec<f64> {
        match self.tables.get(prefix) {
            Some(t) => t.clone(),
            None => vec![-(self.vocab_size as f64).ln(); self.vocab_size],
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Pseudo-random distributions derived from a hash of `(seed, context,
/// prefix)`: a procedurally generated table over every possible prefix.
///
/// `sharpness` scales the logits, which are uniform on `[-1, 1)` before
/// scaling; larger values give peakier distributions.
#[derive(Clone, Debug)]
pub struct HashScorer {
    vocab_size: usize,
    seed: u64,
    sharpness: f64,
}

impl HashScorer {
    pub fn new(vocab_size: usize, seed: u64, sharpness: f64) -> Result<Self, ScorerError> {
        if vocab_size == 0 {
            return Err(ScorerError::VocabTooSmall(1));
        }
        Ok(HashScorer {
            vocab_size,
            seed,
            sharpness,
        })
    }

    fn key(&self, context: &str, prefix: &[TokenId]) -> u64 {
        let mut h = splitmix64(self.seed);
        for b in context.bytes() {
            h = splitmix64(h ^ u64::from(b));
        }
        h = splitmix64(h ^ 0xff00);
        for t in prefix {
            h = splitmix64(h ^ u64::from(t.0));
        }
        h
    }
}

impl Scorer for HashScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_log_probs(&self, context: &str, prefix: &[TokenId]) -> Vec<f64> {
        let key = self.key(context, prefix);
        let mut logits: Vec<f64> = (0..self.vocab_size as u64)
            .map(|t| {
                let u = (splitmix64(key ^ t.wrapping_mul(0x2545_f491_4f6c_dd1d)) >> 11) as f64
                    / (1u64 << 53) as f64;
                self.sharpness * (2.0 * u - 1.0)
            })
            .collect();
        log_softmax(&mut logits);
        logits
    }
}

#[derive(Clone, Debug, Default)]
struct Followers {
    total: u64,
    next: HashMap<TokenId, u64>,
}

/// Add-one smoothed n-gram model over token ids.
///
/// The input context is tokenized and prepended to the prefix, so the first
/// generated tokens are conditioned on the tail of the input text.
#[derive(Clone)]
pub struct NGramScorer {
    order: usize,
    vocab_size: usize,
    histories: HashMap<Vec<TokenId>, Followers>,
    tokenizer: Arc<dyn Tokenizer>,
}

impl std::fmt::Debug for NGramScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NGramScorer")
            .field("order", &self.order)
            .field("vocab_size", &self.vocab_size)
            .field("histories", &self.histories.len())
            .finish()
    }
}

/// Sequence an n-gram model is trained on for one document: the tokenized
/// input followed by its linearization.
pub fn training_sequence(
    input: &str,
    linearization: &[TokenId],
    tok: &dyn Tokenizer,
) -> Vec<TokenId> {
    let mut seq = tok.encode(input);
    seq.extend_from_slice(linearization);
    seq
}

/// Counts `order`-grams over `corpus`. Histories shorter than `order - 1`
/// occur at sequence starts and are counted as their own contexts.
pub fn train_ngram(
    corpus: &[Vec<TokenId>],
    order: usize,
    tokenizer: Arc<dyn Tokenizer>,
) -> Result<NGramScorer, ScorerError> {
    if order == 0 {
        return Err(ScorerError::InvalidOrder);
    }
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(ScorerError::EmptyCorpus);
    }
    let mut histories: HashMap<Vec<TokenId>, Followers> = HashMap::new();
    for seq in corpus {
        for i in 0..seq.len() {
            let history = &seq[i.saturating_sub(order - 1)..i];
            let f = histories.entry(history.to_vec()).or_default();
            f.total += 1;
            *f.next.entry(seq[i]).or_default() += 1;
        }
    }
    Ok(NGramScorer {
        order,
        vocab_size: tokenizer.vocab_size(),
        histories,
        tokenizer,
    })
}

impl NGramScorer {
    pub fn order(&self) -> usize {
        self.order
    }

    fn history(&self, context: &str, prefix: &[TokenId]) -> Vec<TokenId> {
        let want = self.order - 1;
        if prefix.len() >= want {
            return prefix[prefix.len() - want..].to_vec();
        }
        let ctx = self.tokenizer.encode(context);
        let from_ctx = (want - prefix.len()).min(ctx.len());
        let mut h = ctx[ctx.len() - from_ctx..].to_vec();
        h.extend_from_slice(prefix);
        h
    }
}

impl Scorer for NGramScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_log_probs(&self, context: &str, prefix: &[TokenId]) -> Vec<f64> {
        let history = self.history(context, prefix);
        let v = self.vocab_size as f64;
        match self.histories.get(&history) {
            None => vec![-v.ln(); self.vocab_size],
            Some(f) => {
                let denom = (f.total as f64 + v).ln();
                let mut out = vec![-denom; self.vocab_size];
                for (t, &c) in &f.next {
                    if let Some(slot) = out.get_mut(t.index()) {
                        *slot = ((c + 1) as f64).ln() - denom;
                    }
                }
                out
            }
        }
    }
}
