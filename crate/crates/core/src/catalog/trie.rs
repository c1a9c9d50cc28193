//! Immutable prefix trie over tokenized names.
//!
//! Nodes are laid out in breadth-first order so that the children of every
//! node occupy a contiguous, label-sorted index range. The whole trie is three
//! flat arrays: the edge label into each node, the child-range offsets, and
//! the terminal marker.

use super::tokenizer::{TokenId, Tokenizer};
use std::collections::VecDeque;
use std::io::{self, Read, Write};
use thiserror::Error;

const NO_TERMINAL: u32 = u32::MAX;
const MAGIC: &[u8; 8] = b"TGTRIE\0\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrieError {
    #[error("names {first:?} and {second:?} tokenize identically")]
    DuplicateName { first: String, second: String },
    #[error("name with id {id} tokenizes to an empty sequence")]
    EmptyName { id: u32 },
    #[error("prefix leaves the trie after {matched} tokens")]
    InvalidPrefix { matched: usize },
    #[error("not a trie file")]
    BadMagic,
    #[error("trie format version {found} is not supported (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("corrupt trie file: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

/// Answer to a prefix query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Continuations {
    /// Next tokens that stay inside the trie, ascending.
    pub tokens: Vec<TokenId>,
    /// Catalog id of the name that ends exactly at the prefix.
    pub completed: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenTrie {
    labels: Vec<TokenId>,
    child_offsets: Vec<u32>,
    terminal: Vec<u32>,
    names: usize,
}

/// Metadata stored alongside a serialized trie.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TrieHeader {
    pub tokenizer: String,
    /// Opaque description of the source catalog (e.g. a digest).
    pub source: String,
}

impl TokenTrie {
    /// Tokenizes every `(id, name)` pair with `tok` and builds the trie.
    pub fn build<'a, I>(names: I, tok: &dyn Tokenizer) -> Result<Self, TrieError>
    where
        I: IntoIterator<Item = (u32, &'a str)>,
    {
        let mut flat = Vec::new();
        let mut entries = Vec::new();
        let mut raw = Vec::new();
        for (id, name) in names {
            let start = flat.len();
            flat.extend(tok.encode(name));
            entries.push(Entry {
                start: start as u32,
                len: (flat.len() - start) as u32,
                id,
            });
            raw.push(name);
        }
        Self::from_flat(&flat, entries).map_err(|e| match e {
            BuildError::Duplicate(a, b) => TrieError::DuplicateName {
                first: raw[a].to_owned(),
                second: raw[b].to_owned(),
            },
            BuildError::Empty(id) => TrieError::EmptyName { id },
        })
    }

    /// Builds a trie directly from token sequences.
    pub fn from_sequences<S: AsRef<[TokenId]>>(seqs: &[(u32, S)]) -> Result<Self, TrieError> {
        let mut flat = Vec::new();
        let mut entries = Vec::with_capacity(seqs.len());
        for (id, seq) in seqs {
            let start = flat.len();
            flat.extend_from_slice(seq.as_ref());
            entries.push(Entry {
                start: start as u32,
                len: seq.as_ref().len() as u32,
                id: *id,
            });
        }
        Self::from_flat(&flat, entries).map_err(|e| match e {
            BuildError::Duplicate(a, b) => TrieError::DuplicateName {
                first: format!("#{}", seqs[a].0),
                second: format!("#{}", seqs[b].0),
            },
            BuildError::Empty(id) => TrieError::EmptyName { id },
        })
    }

    fn from_flat(flat: &[TokenId], entries: Vec<Entry>) -> Result<Self, BuildError> {
        let seq = |e: &Entry| &flat[e.start as usize..(e.start + e.len) as usize];
        if let Some(e) = entries.iter().find(|e| e.len == 0) {
            return Err(BuildError::Empty(e.id));
        }
        // Sort entry positions so duplicates can be reported by input index.
        let mut order: Vec<u32> = (0..entries.len() as u32).collect();
        order.sort_unstable_by(|&a, &b| {
            seq(&entries[a as usize])
                .cmp(seq(&entries[b as usize]))
                .then(a.cmp(&b))
        });
        if let Some(w) = order
            .windows(2)
            .find(|w| seq(&entries[w[0] as usize]) == seq(&entries[w[1] as usize]))
        {
            return Err(BuildError::Duplicate(w[0] as usize, w[1] as usize));
        }
        let sorted: Vec<&Entry> = order.iter().map(|&i| &entries[i as usize]).collect();

        let mut labels = vec![TokenId(0)];
        let mut child_offsets = vec![1u32];
        let mut terminal = Vec::new();
        let mut queue = VecDeque::from([(0usize, sorted.len(), 0usize)]);
        while let Some((mut lo, hi, depth)) = queue.pop_front() {
            // Sorted order puts the name ending at this depth first.
            if lo < hi && sorted[lo].len as usize == depth {
                terminal.push(sorted[lo].id);
                lo += 1;
            } else {
                terminal.push(NO_TERMINAL);
            }
            let mut children = 0u32;
            while lo < hi {
                let label = seq(sorted[lo])[depth];
                let mut end = lo + 1;
                while end < hi && seq(sorted[end])[depth] == label {
                    end += 1;
                }
                labels.push(label);
                queue.push_back((lo, end, depth + 1));
                children += 1;
                lo = end;
            }
            let last = *child_offsets.last().unwrap();
            child_offsets.push(last + children);
        }

        labels.shrink_to_fit();
        child_offsets.shrink_to_fit();
        terminal.shrink_to_fit();
        Ok(TokenTrie {
            labels,
            child_offsets,
            terminal,
            names: entries.len(),
        })
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node_count(&self) -> usize {
        self.terminal.len()
    }

    /// Number of names stored.
    pub fn len(&self) -> usize {
        self.names
    }

    pub fn is_empty(&self) -> bool {
        self.names == 0
    }

    fn child_range(&self, node: NodeId) -> std::ops::Range<usize> {
        let i = node.0 as usize;
        self.child_offsets[i] as usize..self.child_offsets[i + 1] as usize
    }

    pub fn child(&self, node: NodeId, token: TokenId) -> Option<NodeId> {
        let range = self.child_range(node);
        let start = range.start;
        self.labels[range]
            .binary_search(&token)
            .ok()
            .map(|pos| NodeId((start + pos) as u32))
    }

    pub fn children(&self, node: NodeId) -> impl ExactSizeIterator<Item = (TokenId, NodeId)> + '_ {
        self.child_range(node)
            .map(|i| (self.labels[i], NodeId(i as u32)))
    }

    pub fn child_tokens(&self, node: NodeId) -> &[TokenId] {
        &self.labels[self.child_range(node)]
    }

    pub fn terminal(&self, node: NodeId) -> Option<u32> {
        let t = self.terminal[node.0 as usize];
        (t != NO_TERMINAL).then_some(t)
    }

    pub fn walk(&self, prefix: &[TokenId]) -> Result<NodeId, TrieError> {
        let mut node = self.root();
        for (matched, &tok) in prefix.iter().enumerate() {
            node = self
                .child(node, tok)
                .ok_or(TrieError::InvalidPrefix { matched })?;
        }
        Ok(node)
    }

    /// Tokens that may follow `prefix`, and the id of the name it completes.
    pub fn allowed_next(&self, prefix: &[TokenId]) -> Result<Continuations, TrieError> {
        let node = self.walk(prefix)?;
        Ok(Continuations {
            tokens: self.child_tokens(node).to_vec(),
            completed: self.terminal(node),
        })
    }

    pub fn lookup(&self, seq: &[TokenId]) -> Option<u32> {
        self.walk(seq).ok().and_then(|n| self.terminal(n))
    }

    /// Bytes held by the trie's arrays.
    pub fn heap_bytes(&self) -> usize {
        self.labels.capacity() * std::mem::size_of::<TokenId>()
            + self.child_offsets.capacity() * std::mem::size_of::<u32>()
            + self.terminal.capacity() * std::mem::size_of::<u32>()
    }

    /// Writes the versioned binary form. Reading it back yields an equal trie.
    pub fn write_to<W: Write>(&self, header: &TrieHeader, mut w: W) -> Result<(), TrieError> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        write_str(&mut w, &header.tokenizer)?;
        write_str(&mut w, &header.source)?;
        w.write_all(&(self.names as u64).to_le_bytes())?;
        w.write_all(&(self.node_count() as u64).to_le_bytes())?;
        write_u32s(&mut w, self.labels.iter().map(|t| t.0))?;
        write_u32s(&mut w, self.child_offsets.iter().copied())?;
        write_u32s(&mut w, self.terminal.iter().copied())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<(TrieHeader, Self), TrieError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(TrieError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(TrieError::UnsupportedVersion { found: version });
        }
        let header = TrieHeader {
            tokenizer: read_str(&mut r)?,
            source: read_str(&mut r)?,
        };
        let names = read_u64(&mut r)? as usize;
        let nodes = read_u64(&mut r)? as usize;
        if nodes == 0 || nodes > u32::MAX as usize {
            return Err(TrieError::Corrupt("node count"));
        }
        let labels = read_u32s(&mut r, nodes)?.into_iter().map(TokenId).collect();
        let child_offsets = read_u32s(&mut r, nodes + 1)?;
        let terminal = read_u32s(&mut r, nodes)?;
        let trie = TokenTrie {
            labels,
            child_offsets,
            terminal,
            names,
        };
        trie.check()?;
        Ok((header, trie))
    }

    fn check(&self) -> Result<(), TrieError> {
        let n = self.node_count();
        if self.child_offsets[0] != 1 || *self.child_offsets.last().unwrap() as usize != n {
            return Err(TrieError::Corrupt("child offsets"));
        }
        if self.child_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(TrieError::Corrupt("child offsets"));
        }
        for i in 0..n {
            if self.labels[self.child_range(NodeId(i as u32))]
                .windows(2)
                .any(|w| w[0] >= w[1])
            {
                return Err(TrieError::Corrupt("child labels"));
            }
        }
        if self.terminal.iter().filter(|&&t| t != NO_TERMINAL).count() != self.names {
            return Err(TrieError::Corrupt("name count"));
        }
        Ok(())
    }
}

struct Entry {
    start: u32,
    len: u32,
    id: u32,
}

enum BuildError {
    Duplicate(usize, usize),
    Empty(u32),
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn write_u32s<W: Write>(w: &mut W, values: impl Iterator<Item = u32>) -> io::Result<()> {
    let mut buf = Vec::with_capacity(1 << 16);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
        if buf.len() >= 1 << 16 {
            w.write_all(&buf)?;
            buf.clear();
        }
    }
    w.write_all(&buf)
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, TrieError> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| TrieError::Corrupt("header text"))
}

fn read_u32s<R: Read>(r: &mut R, count: usize) -> io::Result<Vec<u32>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// The entity and relation tries of one catalog.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tries {
    pub entities: TokenTrie,
    pub relations: TokenTrie,
}
