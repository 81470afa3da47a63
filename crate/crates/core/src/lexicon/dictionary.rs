use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{embed_label, Embedding, EmbeddingTable};
use crate::error::{Error, Result};
use crate::numerics::kernels::norm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Action,
    Object,
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelKind::Action => "action",
            LabelKind::Object => "object",
        })
    }
}

/// An ordered set of unique labels with one embedding row each.
#[derive(Clone, Debug)]
pub struct LabelDictionary {
    kind: LabelKind,
    labels: Vec<String>,
    embeddings: Vec<Embedding>,
    norms: Vec<f64>,
    index: HashMap<String, usize>,
    max_words: usize,
}

/// Trims, lowercases and collapses internal whitespace.
pub(crate) fn normalize_label(raw: &str) -> String {
    raw.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

impl LabelDictionary {
    /// Builds a dictionary, embedding each label through `table`.
    pub fn from_labels<S: AsRef<str>>(kind: LabelKind, labels: &[S], table: &EmbeddingTable) -> Result<Self> {
        let mut dict = Self {
            kind,
            labels: Vec::with_capacity(labels.len()),
            embeddings: Vec::with_capacity(labels.len()),
            norms: Vec::with_capacity(labels.len()),
            index: HashMap::with_capacity(labels.len()),
            max_words: 0,
        };
        for raw in labels {
            let label = normalize_label(raw.as_ref());
            if label.is_empty() {
                return Err(Error::Data("empty label".into()));
            }
            if dict.index.contains_key(&label) {
                return Err(Error::Data(format!("duplicate label {label:?}")));
            }
            let e = embed_label(&label, table)?;
            let n = norm(&e);
            if n == 0.0 {
                return Err(Error::Data(format!("label {label:?} has a zero-norm embedding")));
            }
            dict.max_words = dict.max_words.max(label.split(' ').count());
            dict.index.insert(label.clone(), dict.labels.len());
            dict.labels.push(label);
            dict.embeddings.push(e);
            dict.norms.push(n);
        }
        Ok(dict)
    }

    /// Label lines of a dictionary file: comments and blank lines removed.
    pub fn parse(text: &str) -> Vec<(usize, String)> {
        text.lines()
            .enumerate()
            .filter_map(|(i, line)| {
                let body = line.split('#').next().unwrap_or("");
                let label = normalize_label(body);
                (!label.is_empty()).then_some((i + 1, label))
            })
            .collect()
    }

    pub fn load(path: &Path, kind: LabelKind, table: &EmbeddingTable) -> Result<Self> {
        let load_err = |reason: String| Error::Load {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
        let lines = Self::parse(&text);
        let mut first_seen: HashMap<&str, usize> = HashMap::new();
        for (line, label) in &lines {
            if let Some(prev) = first_seen.insert(label, *line) {
                return Err(load_err(format!("duplicate label {label:?} on lines {prev} and {line}")));
            }
        }
        let labels: Vec<&str> = lines.iter().map(|(_, l)| l.as_str()).collect();
        Self::from_labels(kind, &labels, table).map_err(|e| load_err(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = format!("# {} labels\n", self.kind);
        for l in &self.labels {
            text.push_str(l);
            text.push('\n');
        }
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn embedding(&self, i: usize) -> &Embedding {
        &self.embeddings[i]
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    /// Euclidean norm of each embedding row.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Longest label, in words.
    pub fn max_words(&self) -> usize {
        self.max_words
    }

    pub fn dim(&self) -> usize {
        self.embeddings.first().map_or(0, |e| e.len())
    }
}
