//! Relation occurrence buckets: bucket `i` holds relations seen between `2^i`
//! and `2^(i+1) - 1` times in training.

use super::{pooled_counts, Counts, EvalPair, Scores};
use crate::catalog::RelationId;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Bucket for relations with no training occurrences.
pub const UNSEEN_BUCKET: i32 = -1;

/// `floor(log2(count))`, or [`UNSEEN_BUCKET`] for 0.
pub fn bucket_index(count: u64) -> i32 {
    if count == 0 {
        UNSEEN_BUCKET
    } else {
        63 - count.leading_zeros() as i32
    }
}

/// Inclusive count range `[lo, hi]` of a bucket.
pub fn bucket_bounds(bucket: i32) -> (u64, u64) {
    match bucket {
        b if b < 0 => (0, 0),
        63 => (1 << 63, u64::MAX),
        b => (1 << b, (1 << (b + 1)) - 1),
    }
}

pub fn bucket_relations(counts: &HashMap<RelationId, u64>) -> BTreeMap<RelationId, i32> {
    counts.iter().map(|(&r, &c)| (r, bucket_index(c))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketScore {
    pub bucket: i32,
    pub min_count: u64,
    pub max_count: u64,
    /// Relations assigned to this bucket.
    pub relations: usize,
    pub counts: Counts,
    pub scores: Scores,
}

/// Micro scores per occurrence bucket.
///
/// Relations absent from `counts` fall in [`UNSEEN_BUCKET`]. Buckets with no
/// gold or predicted triplets are omitted.
pub fn bucketed_f1(
    pairs: &[EvalPair],
    counts: &HashMap<RelationId, u64>,
) -> BTreeMap<i32, BucketScore> {
    let bucket_of = |r: &RelationId| bucket_index(counts.get(r).copied().unwrap_or(0));

    let mut members: BTreeMap<i32, BTreeSet<RelationId>> = BTreeMap::new();
    for r in counts.keys() {
        members.entry(bucket_of(r)).or_default().insert(*r);
    }
    for pair in pairs {
        for t in pair.gold.iter().chain(pair.predicted.iter()) {
            members
                .entry(bucket_of(&t.relation))
                .or_default()
                .insert(t.relation);
        }
    }

    members
        .into_iter()
        .filter_map(|(bucket, relations)| {
            let c = pooled_counts(pairs, |t| bucket_of(&t.relation) == bucket);
            if c.gold == 0 && c.predicted == 0 {
                return None;
            }
            let (min_count, max_count) = bucket_bounds(bucket);
            Some((
                bucket,
                BucketScore {
                    bucket,
                    min_count,
                    max_count,
                    relations: relations.len(),
                    counts: c,
                    scores: c.scores(),
                },
            ))
        })
        .collect()
}
