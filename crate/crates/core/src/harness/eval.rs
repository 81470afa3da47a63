use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::QARecord;
use crate::classifier::{argmax, score_question, PreparedQuestion};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::network::ModelParams;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenreMetrics {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Exact-match accuracy overall and per genre, plus the training loss curve
/// (mean per-record loss of each epoch) when there was one.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub per_genre: BTreeMap<String, GenreMetrics>,
    pub loss_curve: Vec<f64>,
}

impl Metrics {
    /// Builds metrics from `(genre, predicted, gold)` triples.
    pub fn from_predictions<'a>(preds: impl IntoIterator<Item = (&'a str, usize, usize)>) -> Self {
        let mut m = Metrics::default();
        for (genre, pred, gold) in preds {
            let hit = usize::from(pred == gold);
            m.n += 1;
            m.correct += hit;
            let g = m.per_genre.entry(genre.to_string()).or_default();
            g.n += 1;
            g.correct += hit;
        }
        let ratio = |c: usize, n: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
        m.accuracy = ratio(m.correct, m.n);
        for g in m.per_genre.values_mut() {
            g.accuracy = ratio(g.correct, g.n);
        }
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Scores already-prepared questions (in parallel; results keep input order).
pub fn evaluate_prepared(params: &ModelParams, questions: &[PreparedQuestion]) -> Result<Metrics> {
    if questions.is_empty() {
        return Err(Error::EmptyInput("evaluate"));
    }
    let preds = questions
        .par_iter()
        .map(|q| score_question(q, params).map(|(logits, _)| argmax(&logits)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Metrics::from_predictions(
        questions.iter().zip(preds).map(|(q, p)| (q.genre.as_str(), p, q.gold)),
    ))
}

/// Extraction in parallel, order preserved.
pub fn prepare_all(records: &[QARecord], params: &ModelParams, lexicon: &Lexicon) -> Result<Vec<PreparedQuestion>> {
    records
        .par_iter()
        .map(|r| PreparedQuestion::new(r, params.config(), lexicon))
        .collect()
}

/// Accuracy of `params` on `records`: argmax of the logits against gold, ties
/// going to the lowest index.
pub fn evaluate(params: &ModelParams, records: &[QARecord], lexicon: &Lexicon) -> Result<Metrics> {
    evaluate_prepared(params, &prepare_all(records, params, lexicon)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_predictions() {
        let logits = [
            ([0.1, 0.9, 0.0, 0.0, 0.0], 1, "a"),
            ([2.0, 2.0, 1.0, 0.0, 0.0], 1, "a"),
            ([0.0, 0.0, 0.0, 0.0, 3.0], 4, "b"),
        ];
        let m = Metrics::from_predictions(logits.iter().map(|(l, g, genre)| (*genre, argmax(l), *g)));
        assert_eq!((m.n, m.correct), (3, 2));
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.per_genre["a"].correct, 1);
        assert_eq!(m.per_genre["b"].accuracy, 1.0);
    }

    #[test]
    fn metrics_json_round_trip() {
        let m = Metrics::from_predictions([("x", 0, 0), ("y", 1, 2)]);
        let back: Metrics = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }
}
