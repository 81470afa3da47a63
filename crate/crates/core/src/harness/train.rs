use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::eval::{evaluate_prepared, prepare_all};
use super::{GenreSplit, Metrics, RunConfig};
use crate::classifier::{build_question_graph, PreparedQuestion};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::network::ModelParams;
use crate::numerics::{adam_step, AdamState, ParamGrads, Tape};

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub params: ModelParams,
    /// Mean per-record loss of each epoch.
    pub loss_curve: Vec<f64>,
    /// Ids of every record a gradient was taken on.
    pub visited: BTreeSet<String>,
}

/// Adds one question's loss gradient into `grads`; returns the loss.
pub fn accumulate_question(q: &PreparedQuestion, params: &ModelParams, grads: &mut ParamGrads) -> Result<f64> {
    let mut tape = Tape::new(params.tensors());
    let graph = build_question_graph(&mut tape, q, params)?;
    let loss = tape.softmax_cross_entropy(graph.logits, q.gold)?;
    let value = tape.scalar(loss);
    if !value.is_finite() {
        return Err(Error::Diverged {
            record: q.id.clone(),
            detail: format!("loss is {value}"),
        });
    }
    tape.backward(loss, grads)?;
    Ok(value)
}

/// Trains freshly initialised parameters (seeded by `cfg.seed`) on `split.train`.
pub fn train(cfg: &RunConfig, split: &GenreSplit, lexicon: &Lexicon) -> Result<TrainRun> {
    cfg.validate()?;
    let params = ModelParams::init(&cfg.model, cfg.seed)?;
    let questions = prepare_all(&split.train, &params, lexicon)?;
    let run = train_prepared(params, cfg, &questions)?;
    split.audit(&run.visited)?;
    Ok(run)
}

/// Mini-batch Adam over prepared questions, starting from `params`.
///
/// Each epoch shuffles the question order with a generator seeded once from
/// `cfg.shuffle_seed()`. A batch's gradient is the mean of its records'
/// gradients.
pub fn train_prepared(mut params: ModelParams, cfg: &RunConfig, questions: &[PreparedQuestion]) -> Result<TrainRun> {
    if questions.is_empty() {
        return Err(Error::EmptyInput("train"));
    }
    let mut adam = AdamState::new(params.tensors(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed());
    let mut order: Vec<usize> = (0..questions.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut visited = BTreeSet::new();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = params.new_grads();
            for &i in batch {
                let q = &questions[i];
                epoch_loss += accumulate_question(q, &params, &mut grads)?;
                visited.insert(q.id.clone());
            }
            if grads.iter().any(|(_, g)| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::Diverged {
                    record: questions[batch[0]].id.clone(),
                    detail: format!("non-finite gradient in the batch starting here (epoch {epoch})"),
                });
            }
            params.accumulate(&grads, 1.0 / batch.len() as f64)?;
            params.fill_missing_grads();
            adam_step(params.tensors_mut(), &mut adam)?;
        }
        let mean = epoch_loss / questions.len() as f64;
        log::info!("epoch {}: mean loss {mean:.6}", epoch + 1);
        loss_curve.push(mean);
    }
    Ok(TrainRun {
        params,
        loss_curve,
        visited,
    })
}

/// A trained model with its evaluation metrics.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub params: ModelParams,
    pub metrics: Metrics,
}

/// Trains on `split.train`, evaluates on `split.eval`.
pub fn run_experiment(cfg: &RunConfig, split: &GenreSplit, lexicon: &Lexicon) -> Result<Experiment> {
    let run = train(cfg, split, lexicon)?;
    let eval = prepare_all(&split.eval, &run.params, lexicon)?;
    let mut metrics = evaluate_prepared(&run.params, &eval)?;
    metrics.loss_curve = run.loss_curve;
    Ok(Experiment {
        params: run.params,
        metrics,
    })
}
