//! Action/object pathway classifier for multiple-choice video question answering.
//!
//! Pretrained modality features (an audio-side vector `D` and a text-side vector
//! `T` per answer candidate) are dissociated into *action* and *object* evidence
//! by retrieving their nearest labels from two fixed dictionaries. The raw
//! subtitle goes through the same dictionaries by membership. Each pathway is
//! projected, aggregated by a bidirectional LSTM, and compared against its
//! subtitle counterpart with an attention-weighted cosine similarity; a linear
//! head over `T` adds a text logit.
//!
//! Modules, bottom-up:
//!
//! - [`numerics`]: tensors, a small reverse-mode tape, LSTM cells, Adam and checkpoints.
//! - [`lexicon`]: label dictionaries and the token embedding table.
//! - [`extractor`]: the weight-free top-K retrieval and subtitle word extraction.
//! - [`network`]: configuration, parameter layout/census, projections and global representations.
//! - [`classifier`]: per-candidate scoring and the per-question logits.
//! - [`harness`]: records, synthetic data, genre splits, training, evaluation and ablations.
//!
//! The guide in `book/` walks through each of these with runnable snippets.

pub mod classifier;
pub mod error;
pub mod extractor;
pub mod harness;
pub mod lexicon;
pub mod network;
pub mod numerics;

pub use error::{Error, Result};

/// Number of answer candidates per question.
pub const NUM_CANDIDATES: usize = 5;

/// Width of the pretrained modality features and of the text embedder.
pub const FEATURE_DIM: usize = 768;

// The book chapters are compiled as doctests so their snippets never drift.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/numerics.md")]
    mod numerics {}
    #[doc = include_str!("../../../book/src/lexicon.md")]
    mod lexicon {}
    #[doc = include_str!("../../../book/src/extractor.md")]
    mod extractor {}
    #[doc = include_str!("../../../book/src/pathways.md")]
    mod pathways {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    mod classifier {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
}
