use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PathwayConfig, Variant};
use crate::error::{Error, Result};
use crate::numerics::{read_checkpoint, write_checkpoint, LstmWeights, ParamGrads, Tensor, Var};

/// One named parameter tensor of the layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Input width of the owning layer; sets the init range `±1/√fan_in`.
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    /// Layer name: the part before the first dot.
    pub fn layer(&self) -> &str {
        self.name.split('.').next().unwrap_or(&self.name)
    }
}

fn affine_specs(out: &mut Vec<ParamSpec>, layer: &str, n_in: usize, n_out: usize) {
    out.push(ParamSpec {
        name: format!("{layer}.weight"),
        shape: vec![n_out, n_in],
        fan_in: n_in,
    });
    out.push(ParamSpec {
        name: format!("{layer}.bias"),
        shape: vec![n_out],
        fan_in: n_in,
    });
}

fn bilstm_specs(out: &mut Vec<ParamSpec>, layer: &str, n_in: usize, hid: usize) {
    for suffix in ["l0", "l0_reverse"] {
        for (kind, shape) in [
            ("weight_ih", vec![4 * hid, n_in]),
            ("weight_hh", vec![4 * hid, hid]),
            ("bias_ih", vec![4 * hid]),
            ("bias_hh", vec![4 * hid]),
        ] {
            out.push(ParamSpec {
                name: format!("{layer}.{kind}_{suffix}"),
                shape,
                fan_in: hid,
            });
        }
    }
}

/// Ordered parameter layout for a configuration.
///
/// Names follow the `layer.tensor` convention; LSTM gate rows are
/// `[input, forget, cell, output]`. For the AOPath variants:
///
/// | layer | tensors |
/// |---|---|
/// | `fc_da`, `fc_do` | audio action/object projection `[p, 768]`, `[p]` |
/// | `fc_a`, `fc_o` | text and subtitle action/object projection (shared) |
/// | `lstm_a`, `lstm_o` | bidirectional LSTM, per direction `W_ih [4h, p]`, `W_hh [4h, h]`, `b_ih`, `b_hh` |
/// | `fc_att` | attention head `[1, 2h]`, `[1]`, shared by all four pathway terms |
/// | `fc_t` | text head `[1, 768]`, `[1]` |
/// | `fc_d` | audio head, only with `use_audio_head` |
pub fn param_layout(cfg: &PathwayConfig) -> Vec<ParamSpec> {
    let (f, p, h) = (cfg.feature_dim, cfg.proj_dim, cfg.lstm_hidden);
    let mut specs = Vec::new();
    match cfg.variant {
        Variant::AopathB | Variant::AopathS => {
            if cfg.use_actions {
                affine_specs(&mut specs, "fc_da", f, p);
            }
            if cfg.use_objects {
                affine_specs(&mut specs, "fc_do", f, p);
            }
            if cfg.use_actions {
                affine_specs(&mut specs, "fc_a", f, p);
            }
            if cfg.use_objects {
                affine_specs(&mut specs, "fc_o", f, p);
            }
            if cfg.use_actions {
                bilstm_specs(&mut specs, "lstm_a", p, h);
            }
            if cfg.use_objects {
                bilstm_specs(&mut specs, "lstm_o", p, h);
            }
            if cfg.use_attention && cfg.uses_pathways() {
                affine_specs(&mut specs, "fc_att", 2 * h, 1);
            }
            if cfg.use_text_head {
                affine_specs(&mut specs, "fc_t", f, 1);
            }
            if cfg.use_audio_head {
                affine_specs(&mut specs, "fc_d", f, 1);
            }
        }
        Variant::AtClassifier => affine_specs(&mut specs, "fc_t", f, 1),
        Variant::NoPaths => {
            affine_specs(&mut specs, "fc_d_raw", f, p);
            affine_specs(&mut specs, "fc_t_raw", f, p);
            bilstm_specs(&mut specs, "lstm_raw", p, h);
            affine_specs(&mut specs, "fc_att", 2 * h, 1);
            if cfg.use_text_head {
                affine_specs(&mut specs, "fc_t", f, 1);
            }
        }
    }
    specs
}

/// Total trainable parameter count.
pub fn count_params(cfg: &PathwayConfig) -> usize {
    param_layout(cfg).iter().map(ParamSpec::numel).sum()
}

/// Per-layer totals, in layout order.
pub fn census(cfg: &PathwayConfig) -> Vec<(String, usize)> {
    let mut rows: Vec<(String, usize)> = Vec::new();
    for spec in param_layout(cfg) {
        match rows.last_mut() {
            Some((layer, n)) if layer == spec.layer() => *n += spec.numel(),
            _ => rows.push((spec.layer().to_string(), spec.numel())),
        }
    }
    rows
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Affine {
    pub w: Var,
    pub b: Var,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BiLstm {
    pub fwd: LstmWeights,
    pub bwd: LstmWeights,
}

/// Tape handles for every layer present in a configuration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Layers {
    pub fc_da: Option<Affine>,
    pub fc_do: Option<Affine>,
    pub fc_a: Option<Affine>,
    pub fc_o: Option<Affine>,
    pub lstm_a: Option<BiLstm>,
    pub lstm_o: Option<BiLstm>,
    pub fc_att: Option<Affine>,
    pub fc_t: Option<Affine>,
    pub fc_d: Option<Affine>,
    pub fc_d_raw: Option<Affine>,
    pub fc_t_raw: Option<Affine>,
    pub lstm_raw: Option<BiLstm>,
}

impl Layers {
    fn resolve(names: &[String]) -> Self {
        let find = |n: String| names.iter().position(|x| *x == n).map(Var::Param);
        let affine = |layer: &str| {
            Some(Affine {
                w: find(format!("{layer}.weight"))?,
                b: find(format!("{layer}.bias"))?,
            })
        };
        let dir = |layer: &str, suffix: &str| {
            Some(LstmWeights {
                w_ih: find(format!("{layer}.weight_ih_{suffix}"))?,
                w_hh: find(format!("{layer}.weight_hh_{suffix}"))?,
                b_ih: find(format!("{layer}.bias_ih_{suffix}"))?,
                b_hh: find(format!("{layer}.bias_hh_{suffix}"))?,
            })
        };
        let bilstm = |layer: &str| {
            Some(BiLstm {
                fwd: dir(layer, "l0")?,
                bwd: dir(layer, "l0_reverse")?,
            })
        };
        Self {
            fc_da: affine("fc_da"),
            fc_do: affine("fc_do"),
            fc_a: affine("fc_a"),
            fc_o: affine("fc_o"),
            lstm_a: bilstm("lstm_a"),
            lstm_o: bilstm("lstm_o"),
            fc_att: affine("fc_att"),
            fc_t: affine("fc_t"),
            fc_d: affine("fc_d"),
            fc_d_raw: affine("fc_d_raw"),
            fc_t_raw: affine("fc_t_raw"),
            lstm_raw: bilstm("lstm_raw"),
        }
    }
}

/// Every trainable weight of a model, in layout order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: PathwayConfig,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    layers: Layers,
}

impl ModelParams {
    fn from_parts(config: PathwayConfig, names: Vec<String>, tensors: Vec<Tensor>) -> Self {
        let layers = Layers::resolve(&names);
        Self {
            config,
            names,
            tensors,
            layers,
        }
    }

    /// Draws every weight and bias i.i.d. from `U(−1/√fan_in, 1/√fan_in)`.
    pub fn init(cfg: &PathwayConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for spec in param_layout(cfg) {
            let bound = 1.0 / (spec.fan_in as f64).sqrt();
            let data = (0..spec.numel()).map(|_| rng.random_range(-bound..bound)).collect();
            tensors.push(Tensor::new(spec.shape.clone(), data)?.requiring_grad());
            names.push(spec.name);
        }
        Ok(Self::from_parts(cfg.clone(), names, tensors))
    }

    pub fn config(&self) -> &PathwayConfig {
        &self.config
    }

    pub fn layers(&self) -> &Layers {
        &self.layers
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.position(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.position(name).map(move |i| &mut self.tensors[i])
    }

    pub fn new_grads(&self) -> ParamGrads {
        ParamGrads::new(self.tensors.len())
    }

    /// Accumulates `scale * grads` into the tensors' gradient buffers.
    pub fn accumulate(&mut self, grads: &ParamGrads, scale: f64) -> Result<()> {
        for (i, g) in grads.iter() {
            let scaled: Vec<f64> = g.iter().map(|v| v * scale).collect();
            self.tensors[i].accumulate_grad(&scaled)?;
        }
        Ok(())
    }

    /// Gives every trainable tensor without a gradient an explicit zero one.
    pub fn fill_missing_grads(&mut self) {
        for t in &mut self.tensors {
            if t.requires_grad() && t.grad().is_none() {
                let zeros = vec![0.0; t.len()];
                t.accumulate_grad(&zeros).expect("trainable tensor");
            }
        }
    }

    pub fn clear_grads(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::clear_grad);
    }

    pub fn config_json(&self) -> String {
        serde_json::to_string(&self.config).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        write_checkpoint(
            w,
            &self.config_json(),
            self.names.iter().map(String::as_str).zip(&self.tensors),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let load_err = |reason: String| Error::Load {
            path: path.to_path_buf(),
            reason,
        };
        let f = File::open(path).map_err(|e| load_err(e.to_string()))?;
        let ck = read_checkpoint(BufReader::new(f)).map_err(|e| load_err(e.to_string()))?;
        let config: PathwayConfig =
            serde_json::from_str(&ck.config_json).map_err(|e| load_err(format!("bad config: {e}")))?;
        let layout = param_layout(&config);
        if layout.len() != ck.tensors.len() {
            return Err(load_err(format!(
                "expected {} tensors, found {}",
                layout.len(),
                ck.tensors.len()
            )));
        }
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (spec, (name, t)) in layout.into_iter().zip(ck.tensors) {
            if spec.name != name || spec.shape != t.shape() {
                return Err(load_err(format!(
                    "tensor {name} {:?} does not match layout entry {} {:?}",
                    t.shape(),
                    spec.name,
                    spec.shape
                )));
            }
            names.push(name);
            tensors.push(t.requiring_grad());
        }
        Ok(Self::from_parts(config, names, tensors))
    }
}
