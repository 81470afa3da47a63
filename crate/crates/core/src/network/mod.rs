//! Trainable pathway machinery: four projections, two bidirectional LSTMs,
//! the parameter layout and its census.
//!
//! Weight sharing follows the model definition: `fc_a`/`fc_o` project both the
//! text-modality and the subtitle pathways, and each of `lstm_a`/`lstm_o`
//! aggregates the subtitle, audio and text sequences of its pathway.

mod config;
mod params;

pub use config::{PathwayConfig, Variant};
pub use params::{census, count_params, param_layout, Affine, BiLstm, Layers, ModelParams, ParamSpec};

use crate::error::{Error, Result};
use crate::extractor::{FeatureSource, PathwayFeatureSet};
use crate::lexicon::LabelKind;
use crate::numerics::{bilstm, Tape, Var};

/// The projection owning a `(source, kind)` pair.
pub fn projection_for(layers: &Layers, source: FeatureSource, kind: LabelKind) -> Result<Affine> {
    let (layer, name) = match (source, kind) {
        (FeatureSource::Audio, LabelKind::Action) => (layers.fc_da, "fc_da"),
        (FeatureSource::Audio, LabelKind::Object) => (layers.fc_do, "fc_do"),
        (_, LabelKind::Action) => (layers.fc_a, "fc_a"),
        (_, LabelKind::Object) => (layers.fc_o, "fc_o"),
    };
    layer.ok_or_else(|| Error::Config(format!("{kind} pathway is disabled ({name} missing)")))
}

/// Applies the owning projection to every vector of the set, in order.
pub fn project_pathway(tape: &mut Tape<'_>, set: &PathwayFeatureSet, layers: &Layers) -> Result<Vec<Var>> {
    let fc = projection_for(layers, set.source, set.kind)?;
    set.vectors
        .iter()
        .map(|v| {
            let x = tape.constant(v.to_vec());
            tape.affine(x, fc.w, fc.b)
        })
        .collect()
}

/// Bidirectional LSTM of the pathway over `seq` from zero states.
pub fn global_representation(tape: &mut Tape<'_>, seq: &[Var], kind: LabelKind, layers: &Layers) -> Result<Var> {
    let lstm = match kind {
        LabelKind::Action => layers.lstm_a,
        LabelKind::Object => layers.lstm_o,
    }
    .ok_or_else(|| Error::Config(format!("{kind} pathway is disabled")))?;
    if seq.is_empty() {
        return Err(Error::Invariant("pathway sequence is empty".into()));
    }
    bilstm(tape, seq, lstm.fwd, lstm.bwd)
}
