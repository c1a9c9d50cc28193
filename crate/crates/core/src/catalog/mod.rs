//! Entity and relation catalogs, tokenization, and the prefix tries built
//! over catalog names.
//!
//! A [`Catalog`] is an immutable pair of name tables with dense ids assigned
//! in input order. Names are kept in a single string arena with an index
//! sorted by name, so multi-million entity catalogs stay compact.

mod tokenizer;
mod trie;
mod tsv;

pub use tokenizer::{ByteTokenizer, TokenId, Tokenizer};
pub use trie::{Continuations, NodeId, TokenTrie, TrieError, TrieHeader, Tries};
pub use tsv::{read_catalog_tsv, read_counts_tsv, CatalogRow};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NameClass {
    Entity,
    Relation,
}

impl fmt::Display for NameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NameClass::Entity => "entity",
            NameClass::Relation => "relation",
        })
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("duplicate {class} name {name:?}")]
    DuplicateName { name: String, class: NameClass },
    #[error("blank {class} name at position {index}")]
    EmptyName { class: NameClass, index: usize },
    #[error("{class} catalog has {count} names, more than ids can address")]
    TooManyNames { class: NameClass, count: usize },
    #[error("top_n must be at least 1")]
    InvalidTopN,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One class of names (entities or relations) with dense ids.
#[derive(Clone, Debug)]
struct NameTable {
    arena: String,
    // offsets[i]..offsets[i + 1] is the byte range of name i in `arena`
    offsets: Vec<usize>,
    // ids ordered by name, for lookup by binary search
    by_name: Vec<u32>,
    external: Option<Vec<Option<Box<str>>>>,
}

impl NameTable {
    fn build<I, S>(class: NameClass, names: I) -> Result<Self, CatalogError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut arena = String::new();
        let mut offsets = vec![0];
        for (index, name) in names.into_iter().enumerate() {
            let name = name.as_ref();
            if name.trim().is_empty() {
                return Err(CatalogError::EmptyName { class, index });
            }
            arena.push_str(name);
            offsets.push(arena.len());
        }
        let count = offsets.len() - 1;
        if u32::try_from(count).is_err() {
            return Err(CatalogError::TooManyNames { class, count });
        }
        let mut table = NameTable {
            arena,
            offsets,
            by_name: (0..count as u32).collect(),
            external: None,
        };
        let mut by_name = std::mem::take(&mut table.by_name);
        by_name.sort_unstable_by(|&a, &b| table.name(a).cmp(table.name(b)).then(a.cmp(&b)));
        if let Some(w) = by_name
            .windows(2)
            .find(|w| table.name(w[0]) == table.name(w[1]))
        {
            return Err(CatalogError::DuplicateName {
                name: table.name(w[0]).to_owned(),
                class,
            });
        }
        table.by_name = by_name;
        Ok(table)
    }

    fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    fn name(&self, id: u32) -> &str {
        let i = id as usize;
        &self.arena[self.offsets[i]..self.offsets[i + 1]]
    }

    fn get(&self, id: u32) -> Option<&str> {
        ((id as usize) < self.len()).then(|| self.name(id))
    }

    fn lookup(&self, name: &str) -> Option<u32> {
        self.by_name
            .binary_search_by(|&id| self.name(id).cmp(name))
            .ok()
            .map(|pos| self.by_name[pos])
    }

    fn iter(&self) -> impl Iterator<Item = (u32, &str)> + '_ {
        (0..self.len() as u32).map(move |id| (id, self.name(id)))
    }

    fn external(&self, id: u32) -> Option<&str> {
        self.external.as_ref()?.get(id as usize)?.as_deref()
    }
}

/// Immutable registry of entity and relation names.
#[derive(Clone, Debug)]
pub struct Catalog {
    entities: NameTable,
    relations: NameTable,
}

impl Catalog {
    /// Builds a catalog, assigning ids `0..n` in input order within each class.
    pub fn new<E, R, S, T>(entity_names: E, relation_names: R) -> Result<Self, CatalogError>
    where
        E: IntoIterator<Item = S>,
        R: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        Ok(Catalog {
            entities: NameTable::build(NameClass::Entity, entity_names)?,
            relations: NameTable::build(NameClass::Relation, relation_names)?,
        })
    }

    /// Builds a catalog from parsed TSV rows, carrying external ids along.
    pub fn from_rows(
        entities: &[CatalogRow],
        relations: &[CatalogRow],
    ) -> Result<Self, CatalogError> {
        let mut cat = Catalog::new(
            entities.iter().map(|r| r.name.as_str()),
            relations.iter().map(|r| r.name.as_str()),
        )?;
        cat.entities.external = collect_external(entities);
        cat.relations.external = collect_external(relations);
        Ok(cat)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_name(&self, id: EntityId) -> Option<&str> {
        self.entities.get(id.0)
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relations.get(id.0)
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.lookup(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.lookup(name).map(RelationId)
    }

    pub fn entity_external_id(&self, id: EntityId) -> Option<&str> {
        self.entities.external(id.0)
    }

    pub fn relation_external_id(&self, id: RelationId) -> Option<&str> {
        self.relations.external(id.0)
    }

    pub fn entities(&self) -> impl Iterator<Item = (EntityId, &str)> + '_ {
        self.entities.iter().map(|(id, n)| (EntityId(id), n))
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelationId, &str)> + '_ {
        self.relations.iter().map(|(id, n)| (RelationId(id), n))
    }

    /// Builds the entity and relation tries under `tok`.
    pub fn build_tries(&self, tok: &dyn Tokenizer) -> Result<Tries, TrieError> {
        Ok(Tries {
            entities: TokenTrie::build(self.entities.iter(), tok)?,
            relations: TokenTrie::build(self.relations.iter(), tok)?,
        })
    }

    /// Keeps the `top_n` most frequent relations.
    ///
    /// Ties on count go to the smaller original id. Kept relations are
    /// re-numbered densely in their original relative order; entities are
    /// untouched. Relations missing from `counts` count as zero. When `top_n`
    /// is at least the number of relations, the full catalog is returned with
    /// an identity mapping.
    pub fn restrict_relations(
        &self,
        counts: &HashMap<RelationId, u64>,
        top_n: usize,
    ) -> Result<(Catalog, RelationRemap), CatalogError> {
        if top_n == 0 {
            return Err(CatalogError::InvalidTopN);
        }
        let total = self.relation_count();
        let mut ranked: Vec<u32> = (0..total as u32).collect();
        if top_n < total {
            let count = |id: u32| counts.get(&RelationId(id)).copied().unwrap_or(0);
            ranked.sort_by(|&a, &b| count(b).cmp(&count(a)).then(a.cmp(&b)));
            ranked.truncate(top_n);
            ranked.sort_unstable();
        }

        let mut old_to_new = vec![None; total];
        for (new, &old) in ranked.iter().enumerate() {
            old_to_new[old as usize] = Some(RelationId(new as u32));
        }
        let mut relations = NameTable::build(
            NameClass::Relation,
            ranked.iter().map(|&id| self.relations.name(id)),
        )?;
        relations.external = self
            .relations
            .external
            .as_ref()
            .map(|ext| ranked.iter().map(|&id| ext[id as usize].clone()).collect());
        let remap = RelationRemap {
            old_to_new,
            new_to_old: ranked.into_iter().map(RelationId).collect(),
        };
        Ok((
            Catalog {
                entities: self.entities.clone(),
                relations,
            },
            remap,
        ))
    }
}

fn collect_external(rows: &[CatalogRow]) -> Option<Vec<Option<Box<str>>>> {
    rows.iter().any(|r| r.external_id.is_some()).then(|| {
        rows.iter()
            .map(|r| r.external_id.as_deref().map(Box::from))
            .collect()
    })
}

/// Relation id translation produced by [`Catalog::restrict_relations`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationRemap {
    old_to_new: Vec<Option<RelationId>>,
    new_to_old: Vec<RelationId>,
}

impl RelationRemap {
    pub fn new_id(&self, old: RelationId) -> Option<RelationId> {
        self.old_to_new.get(old.0 as usize).copied().flatten()
    }

    pub fn old_id(&self, new: RelationId) -> Option<RelationId> {
        self.new_to_old.get(new.0 as usize).copied()
    }

    pub fn kept(&self) -> &[RelationId] {
        &self.new_to_old
    }

    pub fn is_identity(&self) -> bool {
        self.new_to_old.len() == self.old_to_new.len()
            && self
                .new_to_old
                .iter()
                .enumerate()
                .all(|(i, r)| r.0 as usize == i)
    }
}
