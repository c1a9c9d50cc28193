//! Precision, recall and F1 over predicted triplet sets.
//!
//! A predicted triplet is correct only if subject, relation and object all
//! match a gold triplet of the same document. Micro scores pool triplets
//! across documents; macro scores compute the pooled score per relation and
//! average over relations with equal weight.

mod bootstrap;
mod buckets;

pub use bootstrap::{bootstrap_ci, BootstrapConfig, Interval};
pub use buckets::{
    bucket_bounds, bucket_index, bucket_relations, bucketed_f1, BucketScore, UNSEEN_BUCKET,
};

use crate::catalog::RelationId;
use crate::linearize::{Triplet, TripletSet};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("bootstrap needs at least one resample")]
    NoResamples,
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
}

/// Predicted and gold triplets of one document.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalPair {
    pub doc_id: String,
    pub predicted: TripletSet,
    pub gold: TripletSet,
}

/// Raw counts behind a precision/recall pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    fn add(&mut self, other: Counts) {
        self.correct += other.correct;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }

    /// Counts for one document, keeping only triplets accepted by `keep`.
    pub fn of_pair(pair: &EvalPair, keep: impl Fn(&Triplet) -> bool) -> Counts {
        Counts {
            correct: pair
                .predicted
                .iter()
                .filter(|t| keep(t) && pair.gold.contains(t))
                .count(),
            predicted: pair.predicted.iter().filter(|t| keep(t)).count(),
            gold: pair.gold.iter().filter(|t| keep(t)).count(),
        }
    }

    pub fn scores(&self) -> Scores {
        Scores::from_counts(*self)
    }
}

/// Precision, recall and their harmonic mean. A zero denominator yields 0
/// with the matching `*_undefined` flag set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub precision_undefined: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recall_undefined: bool,
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

impl Scores {
    pub fn from_counts(c: Counts) -> Scores {
        let (precision, precision_undefined) = ratio(c.correct, c.predicted);
        let (recall, recall_undefined) = ratio(c.correct, c.gold);
        Scores {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
            precision_undefined,
            recall_undefined,
        }
    }
}

/// Pooled counts over documents, restricted to triplets accepted by `keep`.
pub fn pooled_counts<'a, I>(pairs: I, keep: impl Fn(&Triplet) -> bool) -> Counts
where
    I: IntoIterator<Item = &'a EvalPair>,
{
    let mut total = Counts::default();
    for pair in pairs {
        total.add(Counts::of_pair(pair, &keep));
    }
    total
}

pub fn micro_scores<'a, I>(pairs: I) -> Scores
where
    I: IntoIterator<Item = &'a EvalPair>,
{
    pooled_counts(pairs, |_| true).scores()
}

/// How relations whose precision (or recall) denominator is zero enter the
/// macro average.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacroMode {
    /// The undefined term counts as 0.
    #[default]
    Zero,
    /// The relation is left out of that average.
    Exclude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationScore {
    pub relation: RelationId,
    pub counts: Counts,
    pub scores: Scores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub scores: Scores,
    /// Every relation occurring in gold or predictions, by id.
    pub per_relation: Vec<RelationScore>,
}

/// Pooled counts per relation, over relations occurring anywhere in `pairs`.
pub fn per_relation_counts<'a, I>(pairs: I) -> BTreeMap<RelationId, Counts>
where
    I: IntoIterator<Item = &'a EvalPair>,
{
    let mut out: BTreeMap<RelationId, Counts> = BTreeMap::new();
    for pair in pairs {
        for t in pair.predicted.iter() {
            let c = out.entry(t.relation).or_default();
            c.predicted += 1;
            if pair.gold.contains(t) {
                c.correct += 1;
            }
        }
        for t in pair.gold.iter() {
            out.entry(t.relation).or_default().gold += 1;
        }
    }
    out
}

pub fn macro_scores<'a, I>(pairs: I, mode: MacroMode) -> MacroScores
where
    I: IntoIterator<Item = &'a EvalPair>,
{
    let per_relation: Vec<RelationScore> = per_relation_counts(pairs)
        .into_iter()
        .map(|(relation, counts)| RelationScore {
            relation,
            counts,
            scores: counts.scores(),
        })
        .collect();

    let average = |term: fn(&Scores) -> (f64, bool)| -> (f64, bool) {
        let terms: Vec<f64> = per_relation
            .iter()
            .map(|r| term(&r.scores))
            .filter(|&(_, undefined)| mode == MacroMode::Zero || !undefined)
            .map(|(v, _)| v)
            .collect();
        if terms.is_empty() {
            (0.0, true)
        } else {
            (terms.iter().sum::<f64>() / terms.len() as f64, false)
        }
    };
    let (precision, precision_undefined) = average(|s| (s.precision, s.precision_undefined));
    let (recall, recall_undefined) = average(|s| (s.recall, s.recall_undefined));
    MacroScores {
        scores: Scores {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
            precision_undefined,
            recall_undefined,
        },
        per_relation,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub micro: Scores,
    pub macro_: MacroScores,
}

pub fn score_report(pairs: &[EvalPair], mode: MacroMode) -> ScoreReport {
    ScoreReport {
        micro: micro_scores(pairs),
        macro_: macro_scores(pairs, mode),
    }
}
