//! Bi-level constrained beam search.
//!
//! Decoding walks a small grammar over the linearization markers and, inside
//! each name segment, the entity or relation trie. At every step a hypothesis
//! may only be extended with tokens that keep it a prefix of some valid
//! linearization, so every finished hypothesis parses cleanly against the
//! catalog the tries were built from.
//!
//! Probability mass on disallowed tokens is dropped, not renormalized: the
//! log-probability of a hypothesis is always the plain sum of the scorer's
//! log-probabilities for its tokens.

use crate::catalog::{EntityId, NodeId, RelationId, TokenId, TokenTrie, Tries};
use crate::linearize::{Triplet, TripletSet};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::sync::{Arc, Mutex};
use thiserror::Error;

/// Next-token distribution `log p(y_i | y_<i, x)`.
///
/// Implementations return one log-probability per vocabulary entry, indexed
/// by token id. Values must exponentiate to a distribution and be
/// deterministic for a fixed `(context, prefix)`.
pub trait Scorer: Send + Sync {
    fn vocab_size(&self) -> usize;
    fn next_log_probs(&self, context: &str, prefix: &[TokenId]) -> Vec<f64>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_log_probs(&self, context: &str, prefix: &[TokenId]) -> Vec<f64> {
        (**self).next_log_probs(context, prefix)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_log_probs(&self, context: &str, prefix: &[TokenId]) -> Vec<f64> {
        (**self).next_log_probs(context, prefix)
    }
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_log_probs(&self, context: &str, prefix: &[TokenId]) -> Vec<f64> {
        (**self).next_log_probs(context, prefix)
    }
}

/// A scorer that cannot serve concurrent calls (e.g. one holding a mutable
/// model session). Wrap it in [`Serialized`] to use it as a [`Scorer`].
pub trait ExclusiveScorer: Send {
    fn vocab_size(&self) -> usize;
    fn next_log_probs(&mut self, context: &str, prefix: &[TokenId]) -> Vec<f64>;
}

/// Serializes access to an [`ExclusiveScorer`].
pub struct Serialized<S> {
    inner: Mutex<S>,
    vocab_size: usize,
}

impl<S: ExclusiveScorer> Serialized<S> {
    pub fn new(scorer: S) -> Self {
        Serialized {
            vocab_size: scorer.vocab_size(),
            inner: Mutex::new(scorer),
        }
    }
}

impl<S: ExclusiveScorer> Scorer for Serialized<S> {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }
    fn next_log_probs(&self, context: &str, prefix: &[TokenId]) -> Vec<f64> {
        self.inner
            .lock()
            .unwrap_or_else(|poisoned| poisoned.into_inner())
            .next_log_probs(context, prefix)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeConfig {
    pub beam_size: usize,
    /// Longest sequence, `<eos>` included. Unfinished hypotheses reaching it
    /// are discarded.
    pub max_len: usize,
    /// Ranking score is `log_prob / len^length_alpha`; 0 ranks by raw log-prob.
    pub length_alpha: f64,
    /// Whether the empty triplet set (`<eos>` as the first token) is allowed.
    pub allow_empty_set: bool,
    pub max_triplets: Option<usize>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_size: 5,
            max_len: 256,
            length_alpha: 0.0,
            allow_empty_set: true,
            max_triplets: None,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_size == 0 {
            return Err(DecodeError::InvalidConfig("beam_size must be at least 1"));
        }
        if self.max_len < 2 {
            return Err(DecodeError::InvalidConfig("max_len must be at least 2"));
        }
        if !(self.length_alpha >= 0.0 && self.length_alpha.is_finite()) {
            return Err(DecodeError::InvalidConfig(
                "length_alpha must be a finite non-negative number",
            ));
        }
        Ok(())
    }

    fn score(&self, log_prob: f64, len: usize) -> f64 {
        if self.length_alpha == 0.0 {
            log_prob
        } else {
            log_prob / (len as f64).powf(self.length_alpha)
        }
    }

    /// Best score any extension of a live hypothesis can still reach.
    fn upper_bound(&self, log_prob: f64, len: usize) -> f64 {
        if self.length_alpha == 0.0 {
            log_prob
        } else {
            // log_prob can only fall; a longer final length only shrinks its magnitude
            self.score(log_prob, len + 1)
                .max(self.score(log_prob, self.max_len))
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("invalid decode config: {0}")]
    InvalidConfig(&'static str),
    #[error("no allowed continuation after {prefix:?}")]
    DeadEnd { prefix: Vec<TokenId> },
    #[error("scorer returned {got} log-probs but token {needed} is reachable")]
    ScorerVocabulary { needed: usize, got: usize },
    #[error("no hypothesis finished within {max_len} tokens")]
    NoCompleteHypothesis {
        max_len: usize,
        best_partial: Option<Vec<TokenId>>,
        best_partial_log_prob: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Expecting `<sub>` or `<eos>`.
    Boundary,
    Subject,
    Relation,
    Object,
}

/// A partial decode.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub log_prob: f64,
    pub phase: Phase,
    /// Position in the trie of the current name segment (root at boundaries).
    pub cursor: NodeId,
    pub finished: bool,
    triplets: Vec<Triplet>,
    subject: Option<EntityId>,
    relation: Option<RelationId>,
}

impl Hypothesis {
    pub fn start(tries: &Tries) -> Self {
        Hypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
            phase: Phase::Boundary,
            cursor: tries.entities.root(),
            finished: false,
            triplets: Vec::new(),
            subject: None,
            relation: None,
        }
    }

    /// Completed triplets in generation order (duplicates kept).
    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    fn trie<'t>(&self, tries: &'t Tries) -> &'t TokenTrie {
        match self.phase {
            Phase::Relation => &tries.relations,
            _ => &tries.entities,
        }
    }

    /// Extends the hypothesis by `token`, which must be in `allowed_tokens`.
    pub fn advance(&self, token: TokenId, token_log_prob: f64, tries: &Tries) -> Hypothesis {
        let mut next = self.clone();
        next.tokens.push(token);
        next.log_prob += token_log_prob;
        let terminal = || {
            self.trie(tries)
                .terminal(self.cursor)
                .expect("closing marker on non-terminal node")
        };
        match (self.phase, token) {
            (Phase::Boundary, TokenId::EOS) => next.finished = true,
            (Phase::Boundary, TokenId::SUB) => {
                next.phase = Phase::Subject;
                next.cursor = tries.entities.root();
            }
            (Phase::Subject, TokenId::REL) => {
                next.subject = Some(EntityId(terminal()));
                next.phase = Phase::Relation;
                next.cursor = tries.relations.root();
            }
            (Phase::Relation, TokenId::OBJ) => {
                next.relation = Some(RelationId(terminal()));
                next.phase = Phase::Object;
                next.cursor = tries.entities.root();
            }
            (Phase::Object, TokenId::ET) => {
                next.triplets.push(Triplet {
                    subject: next.subject.take().expect("subject set"),
                    relation: next.relation.take().expect("relation set"),
                    object: EntityId(terminal()),
                });
                next.phase = Phase::Boundary;
                next.cursor = tries.entities.root();
            }
            (Phase::Subject | Phase::Relation | Phase::Object, t) if !t.is_special() => {
                next.cursor = self
                    .trie(tries)
                    .child(self.cursor, t)
                    .expect("token outside the trie");
            }
            (phase, t) => panic!("token {t} not allowed in phase {phase:?}"),
        }
        next
    }
}

/// Tokens that keep `h` a prefix of a catalog-valid linearization, ascending.
pub fn allowed_tokens(
    h: &Hypothesis,
    tries: &Tries,
    cfg: &DecodeConfig,
) -> Result<Vec<TokenId>, DecodeError> {
    debug_assert!(!h.finished);
    let mut out = Vec::new();
    match h.phase {
        Phase::Boundary => {
            let done = h.triplets.len();
            let room = cfg.max_triplets.is_none_or(|m| done < m);
            if room && !tries.entities.is_empty() && !tries.relations.is_empty() {
                out.push(TokenId::SUB);
            }
            if done > 0 || cfg.allow_empty_set {
                out.push(TokenId::EOS);
            }
        }
        phase => {
            let trie = h.trie(tries);
            if trie.terminal(h.cursor).is_some() {
                out.push(match phase {
                    Phase::Subject => TokenId::REL,
                    Phase::Relation => TokenId::OBJ,
                    _ => TokenId::ET,
                });
            }
            out.extend_from_slice(trie.child_tokens(h.cursor));
        }
    }
    if out.is_empty() {
        return Err(DecodeError::DeadEnd {
            prefix: h.tokens.clone(),
        });
    }
    Ok(out)
}

/// A finished decode.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub tokens: Vec<TokenId>,
    /// Triplets in generation order.
    pub sequence: Vec<Triplet>,
    pub triplets: TripletSet,
    pub log_prob: f64,
    pub score: f64,
}

struct Expansion {
    parent: usize,
    token: TokenId,
    log_prob: f64,
    score: f64,
}

fn rank(
    a_score: f64,
    a_tokens: (&[TokenId], Option<TokenId>),
    b_score: f64,
    b_tokens: (&[TokenId], Option<TokenId>),
) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| {
        let a = a_tokens.0.iter().chain(a_tokens.1.iter());
        let b = b_tokens.0.iter().chain(b_tokens.1.iter());
        a.cmp(b)
    })
}

/// Top-`beam_size` finished sequences for `input`, best first.
///
/// Results are ordered by score descending, ties broken by the
/// lexicographically smaller token sequence.
pub fn decode(
    input: &str,
    scorer: &dyn Scorer,
    tries: &Tries,
    cfg: &DecodeConfig,
) -> Result<Vec<Candidate>, DecodeError> {
    cfg.validate()?;
    let k = cfg.beam_size;
    let mut live = vec![Hypothesis::start(tries)];
    // finished hypotheses with their scores, kept sorted and at most k long
    let mut finished: Vec<(f64, Hypothesis)> = Vec::new();
    let mut best_partial: Option<Hypothesis> = None;

    for _ in 0..cfg.max_len {
        if live.is_empty() {
            break;
        }
        if finished.len() >= k {
            let kth = finished[k - 1].0;
            let bound = live
                .iter()
                .map(|h| cfg.upper_bound(h.log_prob, h.tokens.len()))
                .fold(f64::NEG_INFINITY, f64::max);
            if bound < kth {
                break;
            }
        }

        let mut expansions = Vec::new();
        for (parent, h) in live.iter().enumerate() {
            let allowed = allowed_tokens(h, tries, cfg)?;
            let log_probs = scorer.next_log_probs(input, &h.tokens);
            let needed = allowed.last().map_or(0, |t| t.index() + 1);
            if log_probs.len() < needed {
                return Err(DecodeError::ScorerVocabulary {
                    needed,
                    got: log_probs.len(),
                });
            }
            for token in allowed {
                let log_prob = h.log_prob + log_probs[token.index()];
                // zero-probability (or NaN) continuations are never ranked
                if log_prob.is_nan() || log_prob == f64::NEG_INFINITY {
                    continue;
                }
                expansions.push(Expansion {
                    parent,
                    token,
                    log_prob,
                    score: cfg.score(log_prob, h.tokens.len() + 1),
                });
            }
        }
        expansions.sort_by(|a, b| {
            rank(
                a.score,
                (&live[a.parent].tokens, Some(a.token)),
                b.score,
                (&live[b.parent].tokens, Some(b.token)),
            )
        });

        // A live expansion survives only if fewer than k items (finished
        // results or better expansions) outrank it.
        let mut next_live = Vec::new();
        let mut newly_finished = Vec::new();
        let mut fi = 0;
        for (idx, e) in expansions.iter().enumerate() {
            let parent = &live[e.parent];
            let child = || {
                let mut h = parent.advance(e.token, 0.0, tries);
                h.log_prob = e.log_prob;
                h
            };
            if e.token == TokenId::EOS {
                newly_finished.push((e.score, child()));
                continue;
            }
            while fi < finished.len()
                && rank(
                    finished[fi].0,
                    (&finished[fi].1.tokens, None),
                    e.score,
                    (&parent.tokens, Some(e.token)),
                ) == Ordering::Less
            {
                fi += 1;
            }
            if fi + idx < k {
                next_live.push(child());
            }
        }

        if !newly_finished.is_empty() {
            finished.extend(newly_finished);
            finished.sort_by(|a, b| rank(a.0, (&a.1.tokens, None), b.0, (&b.1.tokens, None)));
            finished.truncate(k);
        }

        // hypotheses that can no longer finish within max_len are dropped
        let (keep, full): (Vec<_>, Vec<_>) = next_live
            .into_iter()
            .partition(|h| h.tokens.len() < cfg.max_len);
        if let Some(h) = full.into_iter().next() {
            if best_partial
                .as_ref()
                .is_none_or(|b| h.log_prob > b.log_prob)
            {
                best_partial = Some(h);
            }
        }
        live = keep;
    }

    if finished.is_empty() {
        let best = best_partial.or_else(|| live.into_iter().next());
        return Err(DecodeError::NoCompleteHypothesis {
            max_len: cfg.max_len,
            best_partial_log_prob: best.as_ref().map(|h| h.log_prob),
            best_partial: best.map(|h| h.tokens),
        });
    }

    Ok(finished
        .into_iter()
        .map(|(score, h)| Candidate {
            triplets: h.triplets.iter().copied().collect(),
            sequence: h.triplets,
            tokens: h.tokens,
            log_prob: h.log_prob,
            score,
        })
        .collect())
}

/// Decodes every input, in parallel on the current rayon pool. Output order
/// follows input order.
pub fn decode_all<S: AsRef<str> + Sync>(
    inputs: &[S],
    scorer: &dyn Scorer,
    tries: &Tries,
    cfg: &DecodeConfig,
) -> Vec<Result<Vec<Candidate>, DecodeError>> {
    inputs
        .par_iter()
        .map(|input| decode(input.as_ref(), scorer, tries, cfg))
        .collect()
}
