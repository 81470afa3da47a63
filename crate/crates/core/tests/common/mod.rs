//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use aopath::classifier::PreparedQuestion;
use aopath::extractor::PathwayFeatureSet;
use aopath::lexicon::{EmbeddingTable, LabelDictionary, LabelKind};
use aopath::network::{ModelParams, Variant};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn naive_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn naive_cos(a: &[f64], b: &[f64]) -> f64 {
    let na = naive_dot(a, a).sqrt();
    let nb = naive_dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        naive_dot(a, b) / (na * nb)
    }
}

/// Full sort of every dictionary row: descending cosine, ascending index.
pub fn brute_top_k(feature: &[f64], dict: &LabelDictionary, k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = dict
        .embeddings()
        .iter()
        .enumerate()
        .map(|(i, e)| (naive_cos(feature, e), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// Random dictionary of `n` labels. With `ties`, about a quarter of the rows
/// are exact or power-of-two-scaled copies of earlier rows, so their cosines
/// to any query are bitwise equal.
pub fn random_dictionary(rng: &mut ChaCha8Rng, n: usize, dim: usize, ties: bool) -> LabelDictionary {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        if ties && i > 0 && rng.random_bool(0.25) {
            let src = rows[rng.random_range(0..i)].clone();
            let scale = [1.0, 2.0, 0.5, 4.0][rng.random_range(0..4)];
            rows.push(src.iter().map(|x| x * scale).collect());
        } else {
            rows.push((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
    }
    let labels: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let table = EmbeddingTable::new(dim, labels.iter().cloned().zip(rows).collect()).unwrap();
    LabelDictionary::from_labels(LabelKind::Action, &labels, &table).unwrap()
}

/// A query for the oracle: mostly random, sometimes zero, a copy of a row or
/// one-hot.
pub fn random_query(rng: &mut ChaCha8Rng, dict: &LabelDictionary) -> Vec<f64> {
    let dim = dict.dim();
    match rng.random_range(0..10) {
        0 => vec![0.0; dim],
        1 => dict.embedding(rng.random_range(0..dict.len())).to_vec(),
        2 => {
            let mut v = vec![0.0; dim];
            v[rng.random_range(0..dim)] = 1.0;
            v
        }
        _ => (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// Scalar re-implementation of the classifier forward pass, reading weights
/// by name. Shares no code with the tape.
pub struct ScalarModel<'a> {
    pub params: &'a ModelParams,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl<'a> ScalarModel<'a> {
    fn t(&self, name: &str) -> &'a [f64] {
        self.params.get(name).unwrap_or_else(|| panic!("missing {name}")).data()
    }

    fn has(&self, layer: &str) -> bool {
        self.params.get(&format!("{layer}.weight")).is_some()
    }

    pub fn affine(&self, layer: &str, x: &[f64]) -> Vec<f64> {
        let w = self.t(&format!("{layer}.weight"));
        let b = self.t(&format!("{layer}.bias"));
        let n_in = x.len();
        b.iter()
            .enumerate()
            .map(|(r, bias)| bias + naive_dot(&w[r * n_in..(r + 1) * n_in], x))
            .collect()
    }

    fn lstm_dir(&self, layer: &str, suffix: &str, seq: &[Vec<f64>]) -> Vec<f64> {
        let w_ih = self.t(&format!("{layer}.weight_ih_{suffix}"));
        let w_hh = self.t(&format!("{layer}.weight_hh_{suffix}"));
        let b_ih = self.t(&format!("{layer}.bias_ih_{suffix}"));
        let b_hh = self.t(&format!("{layer}.bias_hh_{suffix}"));
        let hid = b_ih.len() / 4;
        let n_in = seq[0].len();
        let mut h = vec![0.0; hid];
        let mut c = vec![0.0; hid];
        for x in seq {
            let gate = |r: usize| {
                b_ih[r] + b_hh[r] + naive_dot(&w_ih[r * n_in..(r + 1) * n_in], x) + naive_dot(&w_hh[r * hid..(r + 1) * hid], &h)
            };
            let mut nh = vec![0.0; hid];
            for j in 0..hid {
                let i = sigmoid(gate(j));
                let f = sigmoid(gate(hid + j));
                let g = gate(2 * hid + j).tanh();
                let o = sigmoid(gate(3 * hid + j));
                c[j] = f * c[j] + i * g;
                nh[j] = o * c[j].tanh();
            }
            h = nh;
        }
        h
    }

    pub fn bilstm(&self, layer: &str, seq: &[Vec<f64>]) -> Vec<f64> {
        let rev: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
        let mut out = self.lstm_dir(layer, "l0", seq);
        out.extend(self.lstm_dir(layer, "l0_reverse", &rev));
        out
    }

    fn rep(&self, set: &PathwayFeatureSet, fc: &str, lstm: &str) -> Vec<f64> {
        let hid = self.t(&format!("{lstm}.bias_ih_l0")).len() / 4;
        if set.sentinel {
            return vec![0.0; 2 * hid];
        }
        let seq: Vec<Vec<f64>> = set.vectors.iter().map(|v| self.affine(fc, v)).collect();
        self.bilstm(lstm, &seq)
    }

    /// Per-candidate logits.
    pub fn logits(&self, q: &PreparedQuestion) -> Vec<f64> {
        let cfg = self.params.config();
        q.candidates
            .iter()
            .map(|c| match cfg.variant {
                Variant::AtClassifier => {
                    let mut s = self.affine("fc_t", &c.t)[0];
                    if cfg.use_audio_head {
                        s += self.affine("fc_t", &c.d)[0];
                    }
                    s
                }
                Variant::NoPaths => {
                    let rd = self.bilstm("lstm_raw", &[self.affine("fc_d_raw", &c.d)]);
                    let rt = self.bilstm("lstm_raw", &[self.affine("fc_t_raw", &c.t)]);
                    let mut s = self.affine("fc_att", &rd)[0] + self.affine("fc_att", &rt)[0];
                    if cfg.use_text_head {
                        s += self.affine("fc_t", &c.t)[0];
                    }
                    s
                }
                Variant::AopathB | Variant::AopathS => {
                    let mut s = 0.0;
                    if let (Some(p), Some(sub)) = (&c.pathways, &q.subtitle) {
                        let slots = [
                            (cfg.use_actions, &p.audio_actions, "fc_da", "lstm_a", &sub.actions, "fc_a"),
                            (cfg.use_objects, &p.audio_objects, "fc_do", "lstm_o", &sub.objects, "fc_o"),
                            (cfg.use_actions, &p.text_actions, "fc_a", "lstm_a", &sub.actions, "fc_a"),
                            (cfg.use_objects, &p.text_objects, "fc_o", "lstm_o", &sub.objects, "fc_o"),
                        ];
                        for (on, set, fc, lstm, sub_set, sub_fc) in slots {
                            if !on {
                                continue;
                            }
                            let rep = self.rep(set, fc, lstm);
                            let sub_rep = self.rep(sub_set, sub_fc, lstm);
                            let alpha = if cfg.use_attention && self.has("fc_att") {
                                self.affine("fc_att", &rep)[0]
                            } else {
                                1.0
                            };
                            s += naive_cos(&rep, &sub_rep) * alpha;
                        }
                    }
                    if cfg.use_text_head {
                        s += self.affine("fc_t", &c.t)[0];
                    }
                    if cfg.use_audio_head {
                        s += self.affine("fc_d", &c.d)[0];
                    }
                    s
                }
            })
            .collect()
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub const ORACLE_KS: [usize; 4] = [1, 2, 15, 30];

/// Runs `n` random retrieval instances against [`brute_top_k`]. Returns the
/// number of instances that contained at least one tie inside the top K.
pub fn extractor_oracle(n: usize, seed: u64) -> Result<usize, String> {
    use aopath::extractor::{top_k_labels, FeatureSource};
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut with_ties = 0;
    for inst in 0..n {
        let size = if inst % 10 == 0 { 1374 } else { rng.random_range(16..=1374) };
        let k = ORACLE_KS[inst % 4].min(size);
        let dim = rng.random_range(3..=24);
        let dict = random_dictionary(&mut rng, size, dim, inst % 2 == 0);
        let q = random_query(&mut rng, &dict);
        let got = top_k_labels(&q, &dict, k, FeatureSource::Text).map_err(|e| e.to_string())?;
        let ids = got.label_ids.clone().unwrap_or_default();
        let expect = brute_top_k(&q, &dict, k);
        if ids != expect {
            return Err(format!("instance {inst} (size {size}, K {k}): got {ids:?}, expected {expect:?}"));
        }
        let sims = got.similarities.unwrap_or_default();
        if sims.windows(2).any(|w| w[0] == w[1]) {
            with_ties += 1;
        }
    }
    Ok(with_ties)
}

/// Top-K label sets of random features against the same features scaled by
/// each of `alphas`.
pub fn scale_invariance(lexicon: &aopath::lexicon::Lexicon, n: usize, alphas: &[f64], seed: u64) -> Result<(), String> {
    use aopath::extractor::{top_k_labels_many, FeatureSource};
    use rand::SeedableRng;
    use std::collections::BTreeSet;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = lexicon.table.dim();
    let base: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    for dict in [&lexicon.actions, &lexicon.objects] {
        for k in ORACLE_KS {
            let sets = |feats: &[Vec<f64>]| -> Result<Vec<BTreeSet<usize>>, String> {
                let q: Vec<(&[f64], FeatureSource)> = feats.iter().map(|f| (f.as_slice(), FeatureSource::Audio)).collect();
                Ok(top_k_labels_many(&q, dict, k)
                    .map_err(|e| e.to_string())?
                    .into_iter()
                    .map(|s| s.label_ids.unwrap_or_default().into_iter().collect())
                    .collect())
            };
            let reference = sets(&base)?;
            for &a in alphas {
                let scaled: Vec<Vec<f64>> = base.iter().map(|f| f.iter().map(|x| x * a).collect()).collect();
                let got = sets(&scaled)?;
                if let Some(i) = (0..n).find(|&i| got[i] != reference[i]) {
                    return Err(format!("{} dictionary, K {k}, alpha {a}: feature {i} changed its label set", dict.kind()));
                }
            }
        }
    }
    Ok(())
}

/// Sum of the enabled pathway terms and head logits of every candidate must
/// equal its total; attention off gives unit weights; all pathways off gives
/// the text head alone, bit-identical to a text-only ATClassifier with the
/// same weights.
pub fn additivity_and_wiring(
    records: &[aopath::harness::QARecord],
    lexicon: &aopath::lexicon::Lexicon,
) -> Result<String, String> {
    use aopath::classifier::score_question;
    use aopath::network::PathwayConfig;
    let err = |e: aopath::Error| e.to_string();
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;

    let base = PathwayConfig::preset(Variant::AopathS);
    let configs = [
        base.clone(),
        PathwayConfig { use_audio_head: true, ..base.clone() },
        PathwayConfig { use_objects: false, ..base.clone() },
        PathwayConfig { use_actions: false, use_text_head: false, ..base },
        PathwayConfig::preset(Variant::AopathB),
    ];
    for (i, cfg) in configs.iter().enumerate() {
        let params = ModelParams::init(cfg, 40 + i as u64).map_err(err)?;
        // the base model is slow; one record is enough there
        let take = if cfg.variant == Variant::AopathB { 1 } else { records.len() };
        for rec in &records[..take] {
            let q = PreparedQuestion::new(rec, cfg, lexicon).map_err(err)?;
            let (logits, scores) = score_question(&q, &params).map_err(err)?;
            for (s, l) in scores.iter().zip(&logits) {
                let parts: f64 = s.pathway_terms.iter().sum::<f64>() + s.text_logit + s.audio_logit.unwrap_or(0.0);
                let e = (s.total - parts).abs();
                worst = worst.max(e);
                if e > 1e-12 || s.total != *l {
                    return Err(format!("{}: total {} vs parts {parts}", cfg.variant, s.total));
                }
                checked += 1;
            }
        }

        let flat = PathwayConfig { use_attention: false, ..cfg.clone() };
        let params = ModelParams::init(&flat, 60 + i as u64).map_err(err)?;
        let q = PreparedQuestion::new(&records[0], &flat, lexicon).map_err(err)?;
        let (_, scores) = score_question(&q, &params).map_err(err)?;
        let on = [flat.use_actions, flat.use_objects, flat.use_actions, flat.use_objects];
        for s in &scores {
            for slot in 0..4 {
                if on[slot] && (s.attention_weights[slot] != 1.0 || s.pathway_terms[slot] != s.cosines[slot]) {
                    return Err(format!("attention off: slot {slot} has weight {}", s.attention_weights[slot]));
                }
            }
        }
    }

    for variant in [Variant::AopathS, Variant::AopathB] {
        let cfg = PathwayConfig {
            use_actions: false,
            use_objects: false,
            use_attention: false,
            use_audio_head: false,
            ..PathwayConfig::preset(variant)
        };
        let params = ModelParams::init(&cfg, 7).map_err(err)?;
        let at_cfg = PathwayConfig { use_audio_head: false, ..PathwayConfig::preset(Variant::AtClassifier) };
        let mut at = ModelParams::init(&at_cfg, 8).map_err(err)?;
        for name in ["fc_t.weight", "fc_t.bias"] {
            *at.get_mut(name).unwrap() = params.get(name).unwrap().clone();
        }
        for rec in records {
            let q = PreparedQuestion::new(rec, &cfg, lexicon).map_err(err)?;
            let (logits, _) = score_question(&q, &params).map_err(err)?;
            let q_at = PreparedQuestion::new(rec, &at_cfg, lexicon).map_err(err)?;
            let (at_logits, _) = score_question(&q_at, &at).map_err(err)?;
            if logits != at_logits {
                return Err(format!("{variant} without pathways: {logits:?} vs ATClassifier {at_logits:?}"));
            }
            let scalar = ScalarModel { params: &params };
            for (c, l) in q.candidates.iter().zip(&logits) {
                if !close(scalar.affine("fc_t", &c.t)[0], *l, 1e-12) {
                    return Err(format!("{variant} without pathways: logit {l} is not FC_T(T)"));
                }
            }
        }
    }
    Ok(format!("{checked} candidate totals, worst residual {worst:.1e}"))
}

/// Central-difference check of the full question loss. Samples up to
/// `max_coords` coordinates of every parameter tensor and returns the worst
/// relative error per layer, in layout order.
pub fn question_fd(
    params: &ModelParams,
    q: &PreparedQuestion,
    max_coords: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(String, f64)>, String> {
    use aopath::classifier::{build_question_graph, question_gradients};
    use aopath::numerics::{Tape, Tensor};
    const H: f64 = 1e-5;
    let err = |e: aopath::Error| e.to_string();
    let analytic = question_gradients(q, params).map_err(err)?.grads;
    let loss = |tensors: &[Tensor]| -> Result<f64, String> {
        let mut tape = Tape::new(tensors);
        let g = build_question_graph(&mut tape, q, params).map_err(err)?;
        let l = tape.softmax_cross_entropy(g.logits, q.gold).map_err(err)?;
        Ok(tape.scalar(l))
    };
    let mut tensors = params.tensors().to_vec();
    let mut out: Vec<(String, f64)> = Vec::new();
    for (p, name) in params.names().iter().enumerate() {
        let len = tensors[p].len();
        let coords: Vec<usize> = if len <= max_coords {
            (0..len).collect()
        } else {
            (0..max_coords).map(|_| rng.random_range(0..len)).collect()
        };
        let mut worst: f64 = 0.0;
        for k in coords {
            let orig = tensors[p].data()[k];
            tensors[p].data_mut()[k] = orig + H;
            let up = loss(&tensors)?;
            tensors[p].data_mut()[k] = orig - H;
            let down = loss(&tensors)?;
            tensors[p].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * H);
            let a = analytic.get(p).map_or(0.0, |g| g[k]);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        let layer = name.split('.').next().unwrap_or(name).to_string();
        match out.last_mut() {
            Some((l, w)) if *l == layer => *w = w.max(worst),
            _ => out.push((layer, worst)),
        }
    }
    Ok(out)
}
