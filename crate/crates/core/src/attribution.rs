//! Splitting end-to-end recall error into entity recognition (NER), entity
//! linking (NEL) and relation classification (RC) components.
//!
//! Every gold triplet is greedily paired with its closest predicted triplet on
//! a six-level similarity scale:
//!
//! | weight | gold vs prediction                                |
//! |--------|---------------------------------------------------|
//! | 1      | identical                                         |
//! | 2      | same relation, exactly one entity position differs |
//! | 3      | same subject and object, relation differs          |
//! | 4      | relation differs, exactly one entity in common     |
//! | 5      | same relation, neither entity matches              |
//! | 6      | nothing in common, or no prediction left           |
//!
//! Entities are compared positionally (subject with subject, object with
//! object).

use crate::linearize::{MentionedTriplet, Span, Triplet, TripletSet};
use crate::metrics::EvalPair;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NEL_WEIGHTS: [u8; 4] = [2, 4, 5, 6];
pub const RC_WEIGHTS: [u8; 3] = [3, 4, 6];

pub fn edge_weight(gold: &Triplet, pred: &Triplet) -> u8 {
    let same_rel = gold.relation == pred.relation;
    let shared =
        usize::from(gold.subject == pred.subject) + usize::from(gold.object == pred.object);
    match (same_rel, shared) {
        (true, 2) => 1,
        (true, 1) => 2,
        (false, 2) => 3,
        (false, 1) => 4,
        (true, _) => 5,
        (false, _) => 6,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchEdge {
    pub gold: Triplet,
    pub pred: Option<Triplet>,
    pub weight: u8,
}

/// One edge per gold triplet, in gold id order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Matching {
    pub edges: Vec<MatchEdge>,
}

/// Greedy weighted matching of gold to predicted triplets.
///
/// Edges are taken by ascending weight, ties going to the smaller gold and
/// then the smaller predicted triplet. Each prediction is used at most once;
/// gold triplets left over are paired with no prediction at weight 6.
pub fn match_triplets(gold: &TripletSet, pred: &TripletSet) -> Matching {
    let gold: Vec<&Triplet> = gold.iter().collect();
    let pred: Vec<&Triplet> = pred.iter().collect();

    // Filling buckets in (gold, pred) order leaves each one tie-sorted.
    let mut buckets: [Vec<(usize, usize)>; 6] = Default::default();
    for (gi, g) in gold.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            buckets[usize::from(edge_weight(g, p)) - 1].push((gi, pi));
        }
    }

    let mut matched: Vec<Option<(usize, u8)>> = vec![None; gold.len()];
    let mut used = vec![false; pred.len()];
    let mut remaining = gold.len().min(pred.len());
    'outer: for (w, bucket) in buckets.iter().enumerate() {
        for &(gi, pi) in bucket {
            if remaining == 0 {
                break 'outer;
            }
            if matched[gi].is_none() && !used[pi] {
                matched[gi] = Some((pi, w as u8 + 1));
                used[pi] = true;
                remaining -= 1;
            }
        }
    }

    Matching {
        edges: gold
            .iter()
            .zip(matched)
            .map(|(g, m)| MatchEdge {
                gold: **g,
                pred: m.map(|(pi, _)| *pred[pi]),
                weight: m.map_or(6, |(_, w)| w),
            })
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub nel_error: f64,
    pub rc_error: f64,
    pub edges: usize,
}

/// Share of matching edges with a NEL weight (2, 4, 5, 6) and with an RC
/// weight (3, 4, 6), pooled over documents.
pub fn nel_rc_errors<'a, I>(pairs: I) -> ErrorRates
where
    I: IntoIterator<Item = &'a EvalPair>,
{
    let mut edges = 0usize;
    let mut nel = 0usize;
    let mut rc = 0usize;
    for pair in pairs {
        for e in match_triplets(&pair.gold, &pair.predicted).edges {
            edges += 1;
            nel += usize::from(NEL_WEIGHTS.contains(&e.weight));
            rc += usize::from(RC_WEIGHTS.contains(&e.weight));
        }
    }
    if edges == 0 {
        return ErrorRates::default();
    }
    ErrorRates {
        nel_error: nel as f64 / edges as f64,
        rc_error: rc as f64 / edges as f64,
        edges,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionMode {
    /// Predicted span must equal the gold span.
    Exact,
    /// Any character overlap suffices.
    Partial,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttributionError {
    #[error("gold triplet {triplet} of document {doc} has no mention span for its {role}")]
    MissingSpans {
        doc: usize,
        triplet: usize,
        role: &'static str,
    },
}

/// Gold triplets with mentions, plus the mentions a recognizer produced.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MentionDoc {
    pub gold: Vec<MentionedTriplet>,
    pub predicted_mentions: Vec<Span>,
}

/// Fraction of gold triplets with at least one entity mention the
/// recognizer missed.
///
/// Every gold triplet must carry both subject and object spans.
pub fn ner_error(docs: &[MentionDoc], mode: MentionMode) -> Result<f64, AttributionError> {
    let found = |gold: &Span, predicted: &[Span]| match mode {
        MentionMode::Exact => predicted.contains(gold),
        MentionMode::Partial => predicted.iter().any(|p| p.overlaps(gold)),
    };
    let mut total = 0usize;
    let mut missed = 0usize;
    for (d, doc) in docs.iter().enumerate() {
        for (i, t) in doc.gold.iter().enumerate() {
            let missing = |role| AttributionError::MissingSpans {
                doc: d,
                triplet: i,
                role,
            };
            let sub = t.subject_span.ok_or_else(|| missing("subject"))?;
            let obj = t.object_span.ok_or_else(|| missing("object"))?;
            total += 1;
            if !found(&sub, &doc.predicted_mentions) || !found(&obj, &doc.predicted_mentions) {
                missed += 1;
            }
        }
    }
    Ok(if total == 0 {
        0.0
    } else {
        missed as f64 / total as f64
    })
}
