//! The weight-free dissociation step.
//!
//! A modality feature is turned into two ordered label sequences by exact
//! cosine retrieval against the action and object dictionaries. The subtitle is
//! turned into verb and noun sequences by dictionary membership. Nothing here is
//! trained; the returned vectors are the dictionary embeddings themselves.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{embed_tokens, tokenize, Embedding, LabelDictionary, LabelKind, Lexicon};
use crate::numerics::kernels::{dot, norm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Audio,
    Text,
    Subtitle,
}

/// One pathway's input sequence.
///
/// For audio/text sources this holds exactly K vectors in descending
/// similarity order (ties by ascending dictionary index) with their label ids.
/// For the subtitle source it holds the extracted words in textual order.
#[derive(Clone, Debug)]
pub struct PathwayFeatureSet {
    pub kind: LabelKind,
    pub source: FeatureSource,
    pub vectors: Vec<Embedding>,
    pub label_ids: Option<Vec<usize>>,
    pub similarities: Option<Vec<f64>>,
    /// The query had zero norm: every similarity was 0 and the first K labels were taken.
    pub degenerate: bool,
    /// Subtitle pathway with no extracted words, holding a single zero vector.
    pub sentinel: bool,
}

impl PathwayFeatureSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Selected label strings (audio/text sources only).
    pub fn labels<'d>(&self, dict: &'d LabelDictionary) -> Vec<&'d str> {
        self.label_ids
            .iter()
            .flatten()
            .map(|&i| dict.label(i))
            .collect()
    }
}

/// Indices of the `k` largest similarities, descending, ties by ascending index.
fn top_k_indices(sims: &[f64], k: usize) -> Vec<usize> {
    let cmp = |a: &usize, b: &usize| sims[*b].partial_cmp(&sims[*a]).unwrap_or(Ordering::Equal).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..sims.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx
}

/// Selects the `k` dictionary labels most cosine-similar to `feature`.
pub fn top_k_labels(
    feature: &[f64],
    dict: &LabelDictionary,
    k: usize,
    source: FeatureSource,
) -> Result<PathwayFeatureSet> {
    Ok(top_k_labels_many(&[(feature, source)], dict, k)?.remove(0))
}

/// [`top_k_labels`] for several features in one pass over the dictionary.
pub fn top_k_labels_many(
    features: &[(&[f64], FeatureSource)],
    dict: &LabelDictionary,
    k: usize,
) -> Result<Vec<PathwayFeatureSet>> {
    if k == 0 || k > dict.len() {
        return Err(Error::Config(format!(
            "K = {k} must be in 1..={} for the {} dictionary",
            dict.len(),
            dict.kind()
        )));
    }
    let mut f_norms = Vec::with_capacity(features.len());
    for (feature, _) in features {
        if feature.len() != dict.dim() {
            return Err(crate::error::dim_err("top_k_labels", dict.dim(), feature.len()));
        }
        if feature.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("top_k_labels feature".into()));
        }
        f_norms.push(norm(feature));
    }
    let mut sims = vec![vec![0.0; dict.len()]; features.len()];
    // row-major sweep: each dictionary row is read once for all features
    for (i, (e, n)) in dict.embeddings().iter().zip(dict.norms()).enumerate() {
        for (j, (feature, _)) in features.iter().enumerate() {
            if f_norms[j] != 0.0 {
                sims[j][i] = dot(feature, e) / (f_norms[j] * n);
            }
        }
    }
    Ok(features
        .iter()
        .zip(sims)
        .zip(f_norms)
        .map(|(((_, source), sims), f_norm)| {
            let degenerate = f_norm == 0.0;
            if degenerate {
                log::warn!("zero-norm {source:?} feature; taking the first {k} {} labels", dict.kind());
            }
            let ids = top_k_indices(&sims, k);
            PathwayFeatureSet {
                kind: dict.kind(),
                source: *source,
                vectors: ids.iter().map(|&i| dict.embedding(i).clone()).collect(),
                similarities: Some(ids.iter().map(|&i| sims[i]).collect()),
                label_ids: Some(ids),
                degenerate,
                sentinel: false,
            }
        })
        .collect())
}

/// The four retrieved pathways of one answer candidate.
#[derive(Clone, Debug)]
pub struct ModalityPathways {
    pub audio_actions: PathwayFeatureSet,
    pub audio_objects: PathwayFeatureSet,
    pub text_actions: PathwayFeatureSet,
    pub text_objects: PathwayFeatureSet,
}

pub fn extract_modality_pathways(d: &[f64], t: &[f64], lexicon: &Lexicon, k: usize) -> Result<ModalityPathways> {
    Ok(extract_candidates(&[(d, t)], lexicon, k)?.remove(0))
}

/// [`extract_modality_pathways`] for every `(d, t)` pair, sharing dictionary passes.
pub fn extract_candidates(pairs: &[(&[f64], &[f64])], lexicon: &Lexicon, k: usize) -> Result<Vec<ModalityPathways>> {
    let queries: Vec<(&[f64], FeatureSource)> = pairs
        .iter()
        .flat_map(|(d, t)| [(*d, FeatureSource::Audio), (*t, FeatureSource::Text)])
        .collect();
    let mut actions = top_k_labels_many(&queries, &lexicon.actions, k)?.into_iter();
    let mut objects = top_k_labels_many(&queries, &lexicon.objects, k)?.into_iter();
    let mut out = Vec::with_capacity(pairs.len());
    while let (Some(audio_actions), Some(text_actions)) = (actions.next(), actions.next()) {
        let (Some(audio_objects), Some(text_objects)) = (objects.next(), objects.next()) else {
            unreachable!("both dictionaries see the same queries");
        };
        out.push(ModalityPathways {
            audio_actions,
            audio_objects,
            text_actions,
            text_objects,
        });
    }
    Ok(out)
}

/// Dictionary words found in a subtitle, in order of occurrence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubtitleWords {
    pub verbs: Vec<String>,
    pub nouns: Vec<String>,
}

/// Greedy longest-match scan of `tokens` against `dict`'s labels.
fn match_labels(tokens: &[String], dict: &LabelDictionary) -> Vec<String> {
    let mut found = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = dict.max_words().min(tokens.len() - i);
        let hit = (1..=longest).rev().find_map(|n| {
            let phrase = tokens[i..i + n].join(" ");
            dict.position(&phrase).map(|_| (phrase, n))
        });
        match hit {
            Some((phrase, n)) => {
                found.push(phrase);
                i += n;
            }
            None => i += 1,
        }
    }
    found
}

/// A word is a verb iff it is an action label and a noun iff it is an object
/// label. Duplicates are kept; a word in both dictionaries lands in both lists.
pub fn extract_subtitle_words(subtitle: &str, lexicon: &Lexicon) -> SubtitleWords {
    let tokens = tokenize(subtitle);
    SubtitleWords {
        verbs: match_labels(&tokens, &lexicon.actions),
        nouns: match_labels(&tokens, &lexicon.objects),
    }
}

/// Subtitle action and object pathways.
#[derive(Clone, Debug)]
pub struct SubtitlePathways {
    pub actions: PathwayFeatureSet,
    pub objects: PathwayFeatureSet,
    pub words: SubtitleWords,
}

fn subtitle_set(kind: LabelKind, words: &[String], lexicon: &Lexicon) -> PathwayFeatureSet {
    let embedded = embed_tokens(words, &lexicon.table);
    let sentinel = embedded.vectors.is_empty();
    let vectors = if sentinel {
        vec![Embedding::from(vec![0.0; lexicon.table.dim()])]
    } else {
        embedded.vectors
    };
    PathwayFeatureSet {
        kind,
        source: FeatureSource::Subtitle,
        vectors,
        label_ids: None,
        similarities: None,
        degenerate: false,
        sentinel,
    }
}

/// Embeds the extracted verbs and nouns. An empty list becomes a single zero
/// vector flagged as a sentinel.
pub fn subtitle_pathways(subtitle: &str, lexicon: &Lexicon) -> SubtitlePathways {
    let words = extract_subtitle_words(subtitle, lexicon);
    SubtitlePathways {
        actions: subtitle_set(LabelKind::Action, &words.verbs, lexicon),
        objects: subtitle_set(LabelKind::Object, &words.nouns, lexicon),
        words,
    }
}
