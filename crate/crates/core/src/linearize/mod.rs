//! Triplets and their special-token linearization.
//!
//! A triplet set is written as one block per triplet,
//! `<sub> subject <rel> relation <obj> object <et>`, followed by `<eos>`.
//! [`parse`] is the lenient inverse: malformed or unresolvable blocks are
//! reported as diagnostics and skipped, so arbitrary decoder output can always
//! be scored.

mod records;

pub use records::{
    read_jsonl, write_jsonl, CandidateRecord, DocumentRecord, RecordError, TripletRecord,
};

use crate::catalog::{Catalog, EntityId, NameClass, RelationId, TokenId, Tokenizer};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl Triplet {
    pub fn new(subject: u32, relation: u32, object: u32) -> Self {
        Triplet {
            subject: EntityId(subject),
            relation: RelationId(relation),
            object: EntityId(object),
        }
    }
}

/// Half-open character range `[start, end)` into a source text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    /// Returns `None` for empty or inverted ranges.
    pub fn new(start: usize, end: usize) -> Option<Self> {
        (start < end).then_some(Span { start, end })
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start.max(other.start) < self.end.min(other.end)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MentionedTriplet {
    pub triplet: Triplet,
    pub subject_span: Option<Span>,
    pub object_span: Option<Span>,
}

impl From<Triplet> for MentionedTriplet {
    fn from(triplet: Triplet) -> Self {
        MentionedTriplet {
            triplet,
            subject_span: None,
            object_span: None,
        }
    }
}

/// Unordered, duplicate-free collection of triplets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TripletSet(BTreeSet<Triplet>);

impl TripletSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, t: Triplet) -> bool {
        self.0.insert(t)
    }

    pub fn contains(&self, t: &Triplet) -> bool {
        self.0.contains(t)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Triplets in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Triplet> + '_ {
        self.0.iter()
    }

    pub fn intersection_len(&self, other: &TripletSet) -> usize {
        self.0.intersection(&other.0).count()
    }
}

impl FromIterator<Triplet> for TripletSet {
    fn from_iter<I: IntoIterator<Item = Triplet>>(iter: I) -> Self {
        TripletSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a TripletSet {
    type Item = &'a Triplet;
    type IntoIter = std::collections::btree_set::Iter<'a, Triplet>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

fn span_start_cmp(a: Option<Span>, b: Option<Span>) -> Ordering {
    match (a, b) {
        (Some(a), Some(b)) => a.start.cmp(&b.start),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Canonical training order: by subject mention start, then object mention
/// start, then id triple. Missing spans sort after present ones.
pub fn order_triplets(mut triplets: Vec<MentionedTriplet>) -> Vec<MentionedTriplet> {
    triplets.sort_by(|a, b| {
        span_start_cmp(a.subject_span, b.subject_span)
            .then_with(|| span_start_cmp(a.object_span, b.object_span))
            .then_with(|| a.triplet.cmp(&b.triplet))
    });
    triplets
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinearizeError {
    #[error("unknown entity id {0}")]
    UnknownEntity(u32),
    #[error("unknown relation id {0}")]
    UnknownRelation(u32),
}

/// Writes triplets, in the given order, as a special-token sequence.
pub fn linearize<'a, I>(
    triplets: I,
    cat: &Catalog,
    tok: &dyn Tokenizer,
) -> Result<Vec<TokenId>, LinearizeError>
where
    I: IntoIterator<Item = &'a Triplet>,
{
    let mut out = Vec::new();
    for t in triplets {
        let sub = cat
            .entity_name(t.subject)
            .ok_or(LinearizeError::UnknownEntity(t.subject.0))?;
        let rel = cat
            .relation_name(t.relation)
            .ok_or(LinearizeError::UnknownRelation(t.relation.0))?;
        let obj = cat
            .entity_name(t.object)
            .ok_or(LinearizeError::UnknownEntity(t.object.0))?;
        out.push(TokenId::SUB);
        out.extend(tok.encode(sub));
        out.push(TokenId::REL);
        out.extend(tok.encode(rel));
        out.push(TokenId::OBJ);
        out.extend(tok.encode(obj));
        out.push(TokenId::ET);
    }
    out.push(TokenId::EOS);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    UnknownName {
        class: NameClass,
        name: String,
    },
    UndecodableName {
        class: NameClass,
    },
    EmptyName {
        class: NameClass,
    },
    UnexpectedToken {
        found: TokenId,
    },
    /// The sequence ended inside a triplet block.
    Truncated,
    MissingEos,
    TrailingTokens {
        count: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    /// Token index the problem was detected at.
    pub position: usize,
    pub kind: DiagnosticKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Parsed {
    pub triplets: TripletSet,
    pub diagnostics: Vec<Diagnostic>,
}

impl Parsed {
    pub fn is_clean(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

#[derive(Clone, Copy)]
enum State {
    Boundary,
    // start index of each name segment seen so far in the block
    Subject(usize),
    Relation(usize, usize),
    Object(usize, usize, usize),
    Skip,
}

/// Reads every well-formed, resolvable block out of `seq`.
pub fn parse(seq: &[TokenId], cat: &Catalog, tok: &dyn Tokenizer) -> Parsed {
    let mut parsed = Parsed::default();
    let mut state = State::Boundary;
    let mut eos_at = None;

    for (i, &t) in seq.iter().enumerate() {
        let next = match (state, t) {
            (_, TokenId::EOS) => {
                if !matches!(state, State::Boundary | State::Skip) {
                    parsed.diag(i, DiagnosticKind::Truncated);
                }
                eos_at = Some(i);
                break;
            }
            (State::Subject(s), TokenId::REL) => State::Relation(s, i + 1),
            (State::Relation(s, r), TokenId::OBJ) => State::Object(s, r, i + 1),
            (State::Object(s, r, o), TokenId::ET) => {
                if let Some(triplet) = resolve_block(seq, (s, r, o, i), cat, tok, &mut parsed) {
                    parsed.triplets.insert(triplet);
                }
                State::Boundary
            }
            (State::Subject(_) | State::Relation(..) | State::Object(..), t) if !t.is_special() => {
                state
            }
            (State::Skip, t) if t != TokenId::SUB => State::Skip,
            (_, TokenId::SUB) => {
                if !matches!(state, State::Boundary | State::Skip) {
                    parsed.diag(i, DiagnosticKind::UnexpectedToken { found: t });
                }
                State::Subject(i + 1)
            }
            (_, found) => {
                parsed.diag(i, DiagnosticKind::UnexpectedToken { found });
                State::Skip
            }
        };
        state = next;
    }

    match eos_at {
        Some(i) if i + 1 < seq.len() => parsed.diag(
            i + 1,
            DiagnosticKind::TrailingTokens {
                count: seq.len() - i - 1,
            },
        ),
        Some(_) => {}
        None => {
            if !matches!(state, State::Boundary | State::Skip) {
                parsed.diag(seq.len(), DiagnosticKind::Truncated);
            }
            parsed.diag(seq.len(), DiagnosticKind::MissingEos);
        }
    }
    parsed
}

impl Parsed {
    fn diag(&mut self, position: usize, kind: DiagnosticKind) {
        self.diagnostics.push(Diagnostic { position, kind });
    }
}

fn resolve_block(
    seq: &[TokenId],
    (s, r, o, end): (usize, usize, usize, usize),
    cat: &Catalog,
    tok: &dyn Tokenizer,
    parsed: &mut Parsed,
) -> Option<Triplet> {
    // each segment runs up to the marker that precedes the next one
    let mut name = |class, range: std::ops::Range<usize>| -> Option<u32> {
        let start = range.start;
        let tokens = &seq[range];
        let kind = if tokens.is_empty() {
            DiagnosticKind::EmptyName { class }
        } else {
            match tok.decode(tokens) {
                None => DiagnosticKind::UndecodableName { class },
                Some(text) => {
                    let id = match class {
                        NameClass::Entity => cat.entity_id(&text).map(|e| e.0),
                        NameClass::Relation => cat.relation_id(&text).map(|r| r.0),
                    };
                    match id {
                        Some(id) => return Some(id),
                        None => DiagnosticKind::UnknownName { class, name: text },
                    }
                }
            }
        };
        parsed.diag(start, kind);
        None
    };
    let subject = name(NameClass::Entity, s..r - 1);
    let relation = name(NameClass::Relation, r..o - 1);
    let object = name(NameClass::Entity, o..end);
    Some(Triplet::new(subject?, relation?, object?))
}
