//! Loading catalogs and JSONL documents into core types.

use crate::io::Input;
use anyhow::{bail, Context, Result};
use std::collections::{HashMap, HashSet};
use std::path::Path;
use tripletgen::catalog::{
    read_catalog_tsv, read_counts_tsv, Catalog, CatalogError, NameClass, RelationId,
};
use tripletgen::linearize::{
    read_jsonl, DocumentRecord, MentionedTriplet, TripletRecord, TripletSet,
};
use tripletgen::metrics::EvalPair;

pub struct LoadedCatalog {
    pub catalog: Catalog,
    pub entities: Input,
    pub relations: Input,
}

pub fn load_catalog(entities: &Path, relations: &Path) -> Result<LoadedCatalog> {
    let ent = Input::read(entities)?;
    let rel = Input::read(relations)?;
    let ent_rows = read_catalog_tsv(ent.bytes.as_slice())
        .with_context(|| format!("parsing {}", entities.display()))?;
    let rel_rows = read_catalog_tsv(rel.bytes.as_slice())
        .with_context(|| format!("parsing {}", relations.display()))?;
    let catalog = Catalog::from_rows(&ent_rows, &rel_rows).map_err(|e| {
        let file = match &e {
            CatalogError::DuplicateName { class, .. }
            | CatalogError::EmptyName { class, .. }
            | CatalogError::TooManyNames { class, .. } => {
                if *class == NameClass::Entity {
                    entities
                } else {
                    relations
                }
            }
            _ => entities,
        };
        anyhow::Error::new(e).context(format!("loading {}", file.display()))
    })?;
    Ok(LoadedCatalog {
        catalog,
        entities: ent,
        relations: rel,
    })
}

pub fn load_documents(input: &Input) -> Result<Vec<DocumentRecord>> {
    let docs = read_jsonl(input.bytes.as_slice())
        .with_context(|| format!("parsing {}", input.path.display()))?;
    let mut seen = HashSet::new();
    for d in &docs {
        if !seen.insert(d.id.as_str()) {
            bail!("{}: duplicate document id {:?}", input.path.display(), d.id);
        }
    }
    Ok(docs)
}

/// Gold triplets of one document. Unknown names are an error.
pub fn gold_triplets(doc: &DocumentRecord, cat: &Catalog) -> Result<Vec<MentionedTriplet>> {
    doc.triplets
        .iter()
        .map(|t| t.resolve(cat, Some(&doc.input)))
        .collect::<Result<_, _>>()
        .with_context(|| format!("gold document {:?}", doc.id))
}

/// Predicted triplets, dropping those naming anything outside the catalog.
/// Returns the kept set and the number dropped.
pub fn predicted_triplets(records: &[TripletRecord], cat: &Catalog) -> (TripletSet, usize) {
    let mut set = TripletSet::new();
    let mut dropped = 0;
    for r in records {
        match r.resolve(cat, None) {
            Ok(m) => {
                set.insert(m.triplet);
            }
            Err(_) => dropped += 1,
        }
    }
    (set, dropped)
}

pub struct Paired {
    pub pairs: Vec<EvalPair>,
    pub gold_docs: Vec<DocumentRecord>,
    pub gold_mentions: Vec<Vec<MentionedTriplet>>,
    /// Predicted triplets naming unknown entities or relations.
    pub dropped_predictions: usize,
    /// Gold documents with no prediction record (scored as empty predictions).
    pub missing_predictions: usize,
    /// Prediction records whose id is not in the gold file (ignored).
    pub extra_predictions: usize,
}

/// Aligns predictions to gold documents by id, in gold order.
pub fn pair_documents(
    gold: Vec<DocumentRecord>,
    pred: Vec<DocumentRecord>,
    cat: &Catalog,
) -> Result<Paired> {
    let gold_ids: HashSet<&str> = gold.iter().map(|d| d.id.as_str()).collect();
    let extra_predictions = pred
        .iter()
        .filter(|p| !gold_ids.contains(p.id.as_str()))
        .count();
    let by_id: HashMap<&str, &DocumentRecord> = pred.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut pairs = Vec::with_capacity(gold.len());
    let mut gold_mentions = Vec::with_capacity(gold.len());
    let (mut dropped_predictions, mut missing_predictions) = (0, 0);
    for doc in &gold {
        let mentions = gold_triplets(doc, cat)?;
        let predicted = match by_id.get(doc.id.as_str()) {
            Some(p) => {
                let (set, dropped) = predicted_triplets(&p.triplets, cat);
                dropped_predictions += dropped;
                set
            }
            None => {
                missing_predictions += 1;
                TripletSet::new()
            }
        };
        pairs.push(EvalPair {
            doc_id: doc.id.clone(),
            predicted,
            gold: mentions.iter().map(|m| m.triplet).collect(),
        });
        gold_mentions.push(mentions);
    }
    Ok(Paired {
        pairs,
        gold_docs: gold,
        gold_mentions,
        dropped_predictions,
        missing_predictions,
        extra_predictions,
    })
}

/// Training occurrence counts by relation id. Relations not in the catalog
/// are skipped and counted.
pub fn load_counts(input: &Input, cat: &Catalog) -> Result<(HashMap<RelationId, u64>, usize)> {
    let rows = read_counts_tsv(input.bytes.as_slice())
        .with_context(|| format!("parsing {}", input.path.display()))?;
    let mut counts = HashMap::new();
    let mut unknown = 0;
    for (name, count) in rows {
        match cat.relation_id(&name) {
            Some(id) => {
                if counts.insert(id, count).is_some() {
                    bail!("{}: relation {name:?} listed twice", input.path.display());
                }
            }
            None => unknown += 1,
        }
    }
    Ok((counts, unknown))
}
