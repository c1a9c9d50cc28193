//! Token ids and the tokenizer contract.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A vocabulary index.
///
/// Ids `0..=4` are the structural markers of the linearization grammar; every
/// content token a [`Tokenizer`] emits is at or above [`TokenId::FIRST_CONTENT`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    /// Opens a triplet; the subject name follows.
    pub const SUB: TokenId = TokenId(0);
    /// Ends the subject name; the relation name follows.
    pub const REL: TokenId = TokenId(1);
    /// Ends the relation name; the object name follows.
    pub const OBJ: TokenId = TokenId(2);
    /// Ends the object name and the triplet.
    pub const ET: TokenId = TokenId(3);
    /// Ends the whole sequence.
    pub const EOS: TokenId = TokenId(4);
    pub const FIRST_CONTENT: TokenId = TokenId(5);

    pub fn is_special(self) -> bool {
        self.0 < Self::FIRST_CONTENT.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TokenId::SUB => f.write_str("<sub>"),
            TokenId::REL => f.write_str("<rel>"),
            TokenId::OBJ => f.write_str("<obj>"),
            TokenId::ET => f.write_str("<et>"),
            TokenId::EOS => f.write_str("<eos>"),
            TokenId(id) => write!(f, "#{id}"),
        }
    }
}

/// Maps text to content tokens and back.
///
/// Implementations must be deterministic, must never emit a special id for
/// content text, and must round-trip every catalog name exactly.
pub trait Tokenizer: Send + Sync {
    /// Short identifier recorded in serialized tries.
    fn name(&self) -> &str;

    /// Total vocabulary size including the five special tokens.
    fn vocab_size(&self) -> usize;

    fn encode(&self, text: &str) -> Vec<TokenId>;

    /// Returns `None` when the tokens do not decode to valid text (including
    /// when a special token is present).
    fn decode(&self, tokens: &[TokenId]) -> Option<String>;
}

/// UTF-8 byte-level tokenizer: one content token per byte, `id = byte + 5`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ByteTokenizer;

impl ByteTokenizer {
    pub const VOCAB_SIZE: usize = 256 + TokenId::FIRST_CONTENT.0 as usize;

    pub fn byte_token(byte: u8) -> TokenId {
        TokenId(byte as u32 + TokenId::FIRST_CONTENT.0)
    }
}

impl Tokenizer for ByteTokenizer {
    fn name(&self) -> &str {
        "utf8-bytes"
    }

    fn vocab_size(&self) -> usize {
        Self::VOCAB_SIZE
    }

    fn encode(&self, text: &str) -> Vec<TokenId> {
        text.bytes().map(Self::byte_token).collect()
    }

    fn decode(&self, tokens: &[TokenId]) -> Option<String> {
        let bytes = tokens
            .iter()
            .map(|t| {
                t.0.checked_sub(TokenId::FIRST_CONTENT.0)
                    .and_then(|b| u8::try_from(b).ok())
            })
            .collect::<Option<Vec<u8>>>()?;
        String::from_utf8(bytes).ok()
    }
}
