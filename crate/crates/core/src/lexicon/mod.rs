//! Label dictionaries and the token embedding table standing in for the
//! pretrained text embedder.
//!
//! File formats:
//!
//! - dictionary: UTF-8 text, one label per line, `#` starts a comment, blank
//!   lines ignored. Labels are trimmed and lowercased.
//! - embedding table: `u64 vocab_size`, `u64 dim`, then per row
//!   `u32 token_len`, the token bytes, and `dim` little-endian `f64`s.

mod dictionary;
mod table;

use std::path::Path;
use std::sync::Arc;

pub use dictionary::{LabelDictionary, LabelKind};
pub use table::EmbeddingTable;

use crate::error::{Error, Result};

/// A shared, immutable embedding row.
pub type Embedding = Arc<[f64]>;

/// Result of [`embed_tokens`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddedWords {
    pub vectors: Vec<Embedding>,
    /// Words with no known token.
    pub skipped: usize,
}

/// Lowercased tokens: maximal runs of alphanumerics (apostrophes allowed
/// inside a word).
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Embeds a label as the mean of its known token rows. Case-insensitive.
pub fn embed_label(label: &str, table: &EmbeddingTable) -> Result<Embedding> {
    let tokens = tokenize(label);
    if tokens.is_empty() {
        return Err(Error::EmptyInput("embed_label"));
    }
    let mut sum = vec![0.0; table.dim()];
    let mut known = 0usize;
    for tok in &tokens {
        if let Some(row) = table.row(tok) {
            sum.iter_mut().zip(row).for_each(|(s, r)| *s += r);
            known += 1;
        }
    }
    if known == 0 {
        return Err(Error::UnknownToken(label.to_string()));
    }
    if known > 1 {
        let inv = known as f64;
        sum.iter_mut().for_each(|s| *s /= inv);
    }
    Ok(sum.into())
}

/// Embeds each word in order; words with no known token are skipped and counted.
pub fn embed_tokens<S: AsRef<str>>(words: &[S], table: &EmbeddingTable) -> EmbeddedWords {
    let mut out = EmbeddedWords::default();
    for w in words {
        match embed_label(w.as_ref(), table) {
            Ok(v) => out.vectors.push(v),
            Err(_) => out.skipped += 1,
        }
    }
    out
}

/// The two label dictionaries plus the embedding table they were built from.
#[derive(Clone, Debug)]
pub struct Lexicon {
    pub actions: LabelDictionary,
    pub objects: LabelDictionary,
    pub table: EmbeddingTable,
}

impl Lexicon {
    pub fn load(actions: &Path, objects: &Path, embeddings: &Path) -> Result<Self> {
        let table = EmbeddingTable::load(embeddings)?;
        let actions = LabelDictionary::load(actions, LabelKind::Action, &table)?;
        let objects = LabelDictionary::load(objects, LabelKind::Object, &table)?;
        Ok(Self { actions, objects, table })
    }

    pub fn save(&self, actions: &Path, objects: &Path, embeddings: &Path) -> Result<()> {
        self.table.save(embeddings)?;
        self.actions.save(actions)?;
        self.objects.save(objects)
    }

    pub fn dictionary(&self, kind: LabelKind) -> &LabelDictionary {
        match kind {
            LabelKind::Action => &self.actions,
            LabelKind::Object => &self.objects,
        }
    }
}
