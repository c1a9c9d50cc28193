//! JSON Lines dataset and prediction records.

use super::{MentionedTriplet, Span, Triplet};
use crate::catalog::{Catalog, NameClass};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

/// One triplet as written in dataset files, by name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub sub: String,
    pub rel: String,
    pub obj: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_span: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obj_span: Option<[usize; 2]>,
}

/// A ranked decoding candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub rank: usize,
    pub log_prob: f64,
    pub triplets: Vec<TripletRecord>,
}

/// A document: `{"id", "input", "triplets"}`, plus ranked `candidates` in
/// prediction files. Decode inputs may omit `triplets`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    #[serde(default)]
    pub input: String,
    #[serde(default)]
    pub triplets: Vec<TripletRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateRecord>,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("unknown {class} name {name:?}")]
    UnknownName { class: NameClass, name: String },
    #[error("invalid span [{0}, {1}]")]
    InvalidSpan(usize, usize),
    #[error("span [{start}, {end}] is outside the {len}-character input")]
    SpanOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn to_span(raw: Option<[usize; 2]>, text_len: Option<usize>) -> Result<Option<Span>, RecordError> {
    let Some([start, end]) = raw else {
        return Ok(None);
    };
    let span = Span::new(start, end).ok_or(RecordError::InvalidSpan(start, end))?;
    if let Some(len) = text_len {
        if end > len {
            return Err(RecordError::SpanOutOfBounds { start, end, len });
        }
    }
    Ok(Some(span))
}

impl TripletRecord {
    pub fn from_triplet(t: &Triplet, cat: &Catalog) -> Option<Self> {
        Some(TripletRecord {
            sub: cat.entity_name(t.subject)?.to_owned(),
            rel: cat.relation_name(t.relation)?.to_owned(),
            obj: cat.entity_name(t.object)?.to_owned(),
            sub_span: None,
            obj_span: None,
        })
    }

    /// Resolves names against `cat`. When `input` is given, spans are checked
    /// against its character length.
    pub fn resolve(
        &self,
        cat: &Catalog,
        input: Option<&str>,
    ) -> Result<MentionedTriplet, RecordError> {
        let entity = |name: &str| {
            cat.entity_id(name).ok_or_else(|| RecordError::UnknownName {
                class: NameClass::Entity,
                name: name.to_owned(),
            })
        };
        let subject = entity(&self.sub)?;
        let object = entity(&self.obj)?;
        let relation = cat
            .relation_id(&self.rel)
            .ok_or_else(|| RecordError::UnknownName {
                class: NameClass::Relation,
                name: self.rel.clone(),
            })?;
        let len = input.filter(|s| !s.is_empty()).map(|s| s.chars().count());
        Ok(MentionedTriplet {
            triplet: Triplet {
                subject,
                relation,
                object,
            },
            subject_span: to_span(self.sub_span, len)?,
            object_span: to_span(self.obj_span, len)?,
        })
    }
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<DocumentRecord>, RecordError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| RecordError::Json {
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut writer: W, records: &[DocumentRecord]) -> Result<(), RecordError> {
    for rec in records {
        serde_json::to_writer(&mut writer, rec)
            .map_err(|source| RecordError::Json { line: 0, source })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
