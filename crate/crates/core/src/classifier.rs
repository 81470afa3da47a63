//! Candidate scoring.
//!
//! For the AOPath variants, each candidate gets four pathway terms
//! (audio-action, audio-object, text-action, text-object). Each term is the
//! cosine similarity between the candidate's global representation and the
//! matching subtitle representation, multiplied by an attention weight that
//! the shared `fc_att` head reads off the candidate representation. The text
//! head adds `fc_t(T)`; the candidate logit is the plain sum.

use crate::error::{Error, Result};
use crate::extractor::{extract_candidates, subtitle_pathways, ModalityPathways, PathwayFeatureSet, SubtitlePathways};
use crate::harness::QARecord;
use crate::lexicon::{Embedding, LabelKind, Lexicon};
use crate::network::{global_representation, project_pathway, Affine, BiLstm, Layers, ModelParams, PathwayConfig, Variant};
use crate::numerics::{bilstm, ParamGrads, Tape, Var};
use crate::NUM_CANDIDATES;

/// Slot order of the four pathway terms.
pub const PATHWAY_SLOTS: [&str; 4] = ["audio-action", "audio-object", "text-action", "text-object"];

/// Numeric breakdown of one candidate's logit.
///
/// For `NoPaths` the audio-action and text-action slots carry the scoring
/// head's outputs over the raw audio and text representations; the other
/// slots stay zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateScore {
    pub pathway_terms: [f64; 4],
    /// Attention weight per slot; `1.0` when attention is off, `0.0` for disabled slots.
    pub attention_weights: [f64; 4],
    pub cosines: [f64; 4],
    pub text_logit: f64,
    pub audio_logit: Option<f64>,
    pub total: f64,
}

/// A question with its weight-free features already extracted.
#[derive(Clone, Debug)]
pub struct PreparedQuestion {
    pub id: String,
    pub gold: usize,
    pub genre: String,
    pub subtitle: Option<SubtitlePathways>,
    pub candidates: Vec<PreparedCandidate>,
}

#[derive(Clone, Debug)]
pub struct PreparedCandidate {
    pub d: Embedding,
    pub t: Embedding,
    pub pathways: Option<ModalityPathways>,
}

impl PreparedQuestion {
    /// Runs the extractor for every candidate (only when `cfg` reads pathways).
    pub fn new(record: &QARecord, cfg: &PathwayConfig, lexicon: &Lexicon) -> Result<Self> {
        record.validate()?;
        let pathways = cfg.uses_pathways();
        let mut extracted = if pathways {
            let pairs: Vec<(&[f64], &[f64])> = record.d.iter().zip(&record.t).map(|(d, t)| (&d[..], &t[..])).collect();
            extract_candidates(&pairs, lexicon, cfg.k)?.into_iter().map(Some).collect()
        } else {
            vec![None; record.d.len()]
        };
        let candidates = record
            .d
            .iter()
            .zip(&record.t)
            .zip(extracted.iter_mut())
            .map(|((d, t), p)| PreparedCandidate {
                d: d.clone(),
                t: t.clone(),
                pathways: p.take(),
            })
            .collect();
        Ok(Self {
            id: record.id.clone(),
            gold: record.gold,
            genre: record.genre.clone(),
            subtitle: pathways.then(|| subtitle_pathways(&record.subtitle, lexicon)),
            candidates,
        })
    }
}

/// Tape handles of one candidate's score.
#[derive(Clone, Debug)]
pub struct CandidateGraph {
    pub terms: [Option<Var>; 4],
    pub alphas: [Option<Var>; 4],
    pub cosines: [Option<Var>; 4],
    pub text_logit: Option<Var>,
    pub audio_logit: Option<Var>,
    pub total: Var,
}

impl CandidateGraph {
    pub fn score(&self, tape: &Tape<'_>) -> CandidateScore {
        let get = |v: Option<Var>, default: f64| v.map_or(default, |v| tape.scalar(v));
        let mut s = CandidateScore {
            pathway_terms: [0.0; 4],
            attention_weights: [0.0; 4],
            cosines: [0.0; 4],
            text_logit: get(self.text_logit, 0.0),
            audio_logit: self.audio_logit.map(|v| tape.scalar(v)),
            total: tape.scalar(self.total),
        };
        for k in 0..4 {
            s.pathway_terms[k] = get(self.terms[k], 0.0);
            s.cosines[k] = get(self.cosines[k], 0.0);
            s.attention_weights[k] = match (self.terms[k], self.alphas[k]) {
                (_, Some(a)) => tape.scalar(a),
                (Some(_), None) => 1.0,
                (None, None) => 0.0,
            };
        }
        s
    }
}

/// Attention-weighted cosine term. Returns `(term, alpha)`; `alpha` is `None`
/// when attention is off (equivalent to `α = 1`).
pub fn pathway_term(tape: &mut Tape<'_>, rep: Var, sub_rep: Var, attention: Option<Affine>) -> Result<(Var, Option<Var>)> {
    let (term, alpha, _) = pathway_term_parts(tape, rep, sub_rep, attention)?;
    Ok((term, alpha))
}

fn pathway_term_parts(
    tape: &mut Tape<'_>,
    rep: Var,
    sub_rep: Var,
    attention: Option<Affine>,
) -> Result<(Var, Option<Var>, Var)> {
    let cos = tape.cosine(rep, sub_rep)?;
    match attention {
        Some(fc) => {
            let alpha = tape.affine(rep, fc.w, fc.b)?;
            Ok((tape.mul(cos, alpha)?, Some(alpha), cos))
        }
        None => Ok((cos, None, cos)),
    }
}

/// Global representations of the four candidate pathways, in slot order.
pub type CandidateReps = [Option<Var>; 4];
/// Subtitle action and object representations.
pub type SubtitleReps = [Option<Var>; 2];

/// Sums the enabled pathway terms and heads into one candidate logit.
pub fn score_candidate(
    tape: &mut Tape<'_>,
    reps: &CandidateReps,
    sub: &SubtitleReps,
    t_feat: Var,
    d_feat: Var,
    layers: &Layers,
    cfg: &PathwayConfig,
) -> Result<CandidateGraph> {
    let mut g = CandidateGraph {
        terms: [None; 4],
        alphas: [None; 4],
        cosines: [None; 4],
        text_logit: None,
        audio_logit: None,
        total: Var::Node(0),
    };
    let attention = if cfg.use_attention { layers.fc_att } else { None };
    if cfg.use_attention && attention.is_none() && cfg.uses_pathways() {
        return Err(Error::Config("attention enabled but fc_att is missing".into()));
    }
    let enabled = [cfg.use_actions, cfg.use_objects, cfg.use_actions, cfg.use_objects];
    let mut parts = Vec::new();
    if cfg.uses_pathways() {
        for slot in 0..4 {
            if !enabled[slot] {
                continue;
            }
            let (Some(rep), Some(sub_rep)) = (reps[slot], sub[slot % 2]) else {
                return Err(Error::Invariant(format!("missing representation for the {} pathway", PATHWAY_SLOTS[slot])));
            };
            let (term, alpha, cos) = pathway_term_parts(tape, rep, sub_rep, attention)?;
            g.cosines[slot] = Some(cos);
            g.terms[slot] = Some(term);
            g.alphas[slot] = alpha;
            parts.push(term);
        }
    }
    if cfg.use_text_head {
        let fc = layers.fc_t.ok_or_else(|| Error::Config("text head enabled but fc_t is missing".into()))?;
        let t = tape.affine(t_feat, fc.w, fc.b)?;
        g.text_logit = Some(t);
        parts.push(t);
    }
    if cfg.use_audio_head {
        let fc = layers.fc_d.ok_or_else(|| Error::Config("audio head enabled but fc_d is missing".into()))?;
        let d = tape.affine(d_feat, fc.w, fc.b)?;
        g.audio_logit = Some(d);
        parts.push(d);
    }
    g.total = tape.sum(&parts)?;
    Ok(g)
}

/// Per-question graph: candidate scores and the stacked logits.
#[derive(Clone, Debug)]
pub struct QuestionGraph {
    pub candidates: Vec<CandidateGraph>,
    pub subtitle_reps: SubtitleReps,
    pub logits: Var,
}

fn pathway_rep(tape: &mut Tape<'_>, set: &PathwayFeatureSet, layers: &Layers) -> Result<Var> {
    if set.sentinel {
        // no subtitle words: a zero representation, so the cosine term is 0
        let hid = match set.kind {
            LabelKind::Action => layers.lstm_a,
            LabelKind::Object => layers.lstm_o,
        }
        .map(|l| tape.shape(l.fwd.w_hh)[1])
        .ok_or_else(|| Error::Config(format!("{} pathway is disabled", set.kind)))?;
        return Ok(tape.zeros(2 * hid));
    }
    let seq = project_pathway(tape, set, layers)?;
    global_representation(tape, &seq, set.kind, layers)
}

fn raw_rep(tape: &mut Tape<'_>, feat: Var, fc: Option<Affine>, lstm: Option<BiLstm>) -> Result<Var> {
    let (fc, lstm) = fc.zip(lstm).ok_or_else(|| Error::Config("nopaths layers missing".into()))?;
    let x = tape.affine(feat, fc.w, fc.b)?;
    bilstm(tape, &[x], lstm.fwd, lstm.bwd)
}

/// Builds the full forward graph of one prepared question.
pub fn build_question_graph(tape: &mut Tape<'_>, q: &PreparedQuestion, params: &ModelParams) -> Result<QuestionGraph> {
    if q.candidates.len() != NUM_CANDIDATES {
        return Err(Error::Data(format!(
            "question {} has {} candidates, expected {NUM_CANDIDATES}",
            q.id,
            q.candidates.len()
        )));
    }
    let cfg = params.config();
    let layers = params.layers();

    let mut subtitle_reps: SubtitleReps = [None, None];
    if cfg.uses_pathways() {
        let sub = q
            .subtitle
            .as_ref()
            .ok_or_else(|| Error::Invariant(format!("question {} was prepared without pathways", q.id)))?;
        if cfg.use_actions {
            subtitle_reps[0] = Some(pathway_rep(tape, &sub.actions, layers)?);
        }
        if cfg.use_objects {
            subtitle_reps[1] = Some(pathway_rep(tape, &sub.objects, layers)?);
        }
    }

    let mut candidates = Vec::with_capacity(NUM_CANDIDATES);
    for c in &q.candidates {
        let t_feat = tape.constant(c.t.to_vec());
        let d_feat = tape.constant(c.d.to_vec());
        let graph = match cfg.variant {
            Variant::AopathB | Variant::AopathS => {
                let mut reps: CandidateReps = [None; 4];
                if cfg.uses_pathways() {
                    let p = c
                        .pathways
                        .as_ref()
                        .ok_or_else(|| Error::Invariant(format!("question {} was prepared without pathways", q.id)))?;
                    let sets = [&p.audio_actions, &p.audio_objects, &p.text_actions, &p.text_objects];
                    let on = [cfg.use_actions, cfg.use_objects, cfg.use_actions, cfg.use_objects];
                    for slot in 0..4 {
                        if on[slot] {
                            reps[slot] = Some(pathway_rep(tape, sets[slot], layers)?);
                        }
                    }
                }
                score_candidate(tape, &reps, &subtitle_reps, t_feat, d_feat, layers, cfg)?
            }
            Variant::AtClassifier => at_classifier(tape, t_feat, d_feat, layers, cfg)?,
            Variant::NoPaths => no_paths(tape, t_feat, d_feat, layers, cfg)?,
        };
        candidates.push(graph);
    }
    let totals: Vec<Var> = candidates.iter().map(|c| c.total).collect();
    let logits = tape.concat(&totals)?;
    Ok(QuestionGraph {
        candidates,
        subtitle_reps,
        logits,
    })
}

/// Shared `768 → 1` head over `T` (and over `D` when the audio input is used).
fn at_classifier(tape: &mut Tape<'_>, t: Var, d: Var, layers: &Layers, cfg: &PathwayConfig) -> Result<CandidateGraph> {
    let fc = layers.fc_t.ok_or_else(|| Error::Config("fc_t missing".into()))?;
    let text = tape.affine(t, fc.w, fc.b)?;
    let mut parts = vec![text];
    let mut audio_logit = None;
    if cfg.use_audio_head {
        let a = tape.affine(d, fc.w, fc.b)?;
        audio_logit = Some(a);
        parts.push(a);
    }
    let total = tape.sum(&parts)?;
    Ok(CandidateGraph {
        terms: [None; 4],
        alphas: [None; 4],
        cosines: [None; 4],
        text_logit: Some(text),
        audio_logit,
        total,
    })
}

/// Projection and BiLSTM over the raw features, scored by `fc_att`, plus `fc_t(T)`.
fn no_paths(tape: &mut Tape<'_>, t: Var, d: Var, layers: &Layers, cfg: &PathwayConfig) -> Result<CandidateGraph> {
    let att = layers.fc_att.ok_or_else(|| Error::Config("fc_att missing".into()))?;
    let rd = raw_rep(tape, d, layers.fc_d_raw, layers.lstm_raw)?;
    let rt = raw_rep(tape, t, layers.fc_t_raw, layers.lstm_raw)?;
    let sd = tape.affine(rd, att.w, att.b)?;
    let st = tape.affine(rt, att.w, att.b)?;
    let mut parts = vec![sd, st];
    let mut text_logit = None;
    if cfg.use_text_head {
        let fc = layers.fc_t.ok_or_else(|| Error::Config("fc_t missing".into()))?;
        let tl = tape.affine(t, fc.w, fc.b)?;
        text_logit = Some(tl);
        parts.push(tl);
    }
    let total = tape.sum(&parts)?;
    Ok(CandidateGraph {
        terms: [Some(sd), None, Some(st), None],
        alphas: [None; 4],
        cosines: [None; 4],
        text_logit,
        audio_logit: None,
        total,
    })
}

/// Loss, logits and parameter gradients of one question.
#[derive(Clone, Debug)]
pub struct QuestionEval {
    pub loss: f64,
    pub logits: Vec<f64>,
    pub grads: ParamGrads,
}

/// Forward and backward pass of one question on a fresh tape.
pub fn question_gradients(q: &PreparedQuestion, params: &ModelParams) -> Result<QuestionEval> {
    let mut tape = Tape::new(params.tensors());
    let graph = build_question_graph(&mut tape, q, params)?;
    let loss = tape.softmax_cross_entropy(graph.logits, q.gold)?;
    let mut grads = params.new_grads();
    tape.backward(loss, &mut grads)?;
    Ok(QuestionEval {
        loss: tape.scalar(loss),
        logits: tape.value(graph.logits).to_vec(),
        grads,
    })
}

/// Logits and per-candidate breakdown of a prepared question (no gradients).
pub fn score_question(q: &PreparedQuestion, params: &ModelParams) -> Result<(Vec<f64>, Vec<CandidateScore>)> {
    let mut tape = Tape::new(params.tensors());
    let graph = build_question_graph(&mut tape, q, params)?;
    let logits = tape.checked_value(graph.logits)?.to_vec();
    let scores = graph.candidates.iter().map(|c| c.score(&tape)).collect();
    Ok((logits, scores))
}

/// Extracts pathways for `record` and returns its five candidate logits.
pub fn forward_question(record: &QARecord, params: &ModelParams, lexicon: &Lexicon) -> Result<Vec<f64>> {
    let q = PreparedQuestion::new(record, params.config(), lexicon)?;
    Ok(score_question(&q, params)?.0)
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in logits.iter().enumerate() {
        if *v > logits[best] {
            best = i;
        }
    }
    best
}
