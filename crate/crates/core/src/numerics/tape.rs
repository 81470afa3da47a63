use super::kernels::{axpy, matvec_add, matvec_t_add, norm, outer_add, sigmoid};
use super::Tensor;
use crate::error::{dim_err, Error, Result};

/// Handle to a value: either a node recorded on the tape or an external parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    Node(usize),
    Param(usize),
}

#[derive(Debug)]
enum Op {
    Leaf,
    Affine {
        x: Var,
        w: Var,
        b: Var,
    },
    /// Output is `[h'; c']`. `acts` holds the activated gates `[i, f, g, o]`.
    LstmCell {
        x: Var,
        h: Var,
        c: Var,
        w: LstmWeights,
        acts: Vec<f64>,
        tanh_c: Vec<f64>,
    },
    Slice {
        src: Var,
        start: usize,
    },
    Concat(Vec<Var>),
    Cosine {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Sum(Vec<Var>),
    SoftmaxCrossEntropy {
        logits: Var,
        gold: usize,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

/// LSTM weights for one direction, gate rows ordered `[input, forget, cell, output]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmWeights {
    pub w_ih: Var,
    pub w_hh: Var,
    pub b_ih: Var,
    pub b_hh: Var,
}

/// Per-parameter gradient buffers, indexed like the parameter slice.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamGrads {
    grads: Vec<Option<Vec<f64>>>,
}

impl ParamGrads {
    pub fn new(num_params: usize) -> Self {
        Self {
            grads: vec![None; num_params],
        }
    }

    pub fn get(&self, id: usize) -> Option<&[f64]> {
        self.grads.get(id).and_then(|g| g.as_deref())
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Adds every buffer of `other` into `self`.
    pub fn merge(&mut self, other: &ParamGrads) {
        for (dst, src) in self.grads.iter_mut().zip(&other.grads) {
            if let Some(src) = src {
                match dst {
                    Some(d) => d.iter_mut().zip(src).for_each(|(a, b)| *a += b),
                    None => *dst = Some(src.clone()),
                }
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_deref().map(|g| (i, g)))
    }

    fn slot(&mut self, id: usize, len: usize) -> &mut [f64] {
        self.grads[id].get_or_insert_with(|| vec![0.0; len])
    }
}

/// Gradients of recorded nodes after a backward pass.
#[derive(Debug)]
pub struct TapeGrads {
    nodes: Vec<Option<Vec<f64>>>,
}

impl TapeGrads {
    /// Gradient w.r.t. a node; `None` for parameters or nodes the loss does not reach.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        match var {
            Var::Node(i) => self.nodes.get(i).and_then(|g| g.as_deref()),
            Var::Param(_) => None,
        }
    }
}

/// A dynamic reverse-mode tape over borrowed parameters.
pub struct Tape<'p> {
    params: &'p [Tensor],
    nodes: Vec<Node>,
    first_non_finite: Option<usize>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Tensor]) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            first_non_finite: None,
        }
    }

    pub fn params(&self) -> &'p [Tensor] {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &[f64] {
        match var {
            Var::Node(i) => &self.nodes[i].value,
            Var::Param(p) => self.params[p].data(),
        }
    }

    /// The value, or an error if anything non-finite has been recorded so far.
    pub fn checked_value(&self, var: Var) -> Result<&[f64]> {
        self.check_finite()?;
        Ok(self.value(var))
    }

    pub fn scalar(&self, var: Var) -> f64 {
        self.value(var)[0]
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        match var {
            Var::Node(i) => &self.nodes[i].shape,
            Var::Param(p) => self.params[p].shape(),
        }
    }

    fn requires_grad(&self, var: Var) -> bool {
        match var {
            Var::Node(i) => self.nodes[i].requires_grad,
            Var::Param(p) => self.params[p].requires_grad(),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.first_non_finite {
            Some(i) => Err(Error::NonFinite(format!("tape node {i} ({})", op_name(&self.nodes[i].op)))),
            None => Ok(()),
        }
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        let idx = self.nodes.len();
        if self.first_non_finite.is_none() && value.iter().any(|v| !v.is_finite()) {
            self.first_non_finite = Some(idx);
        }
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var::Node(idx)
    }

    /// Records a constant (no gradient) vector.
    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        let shape = vec![value.len()];
        self.push(shape, value, Op::Leaf, false)
    }

    pub fn zeros(&mut self, len: usize) -> Var {
        self.constant(vec![0.0; len])
    }

    /// Records a copy of `t` as a leaf. The gradient w.r.t. it is reported in
    /// [`TapeGrads`] when `t.requires_grad()` is set.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, t.requires_grad())
    }

    fn vec_len(&self, var: Var, op: &'static str) -> Result<usize> {
        match self.shape(var) {
            [n] => Ok(*n),
            s => Err(dim_err(op, "a vector", format!("shape {s:?}"))),
        }
    }

    fn scalar_check(&self, var: Var, op: &'static str) -> Result<()> {
        match self.shape(var) {
            [1] => Ok(()),
            s => Err(dim_err(op, "a scalar", format!("shape {s:?}"))),
        }
    }

    /// `W x + b` with `W: [out, in]`, `x: [in]`, `b: [out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let n_in = self.vec_len(x, "affine")?;
        let n_out = self.vec_len(b, "affine")?;
        if self.shape(w) != [n_out, n_in] {
            return Err(dim_err("affine", format!("weight [{n_out}, {n_in}]"), format!("{:?}", self.shape(w))));
        }
        let mut y = self.value(b).to_vec();
        matvec_add(self.value(w), self.value(x), &mut y);
        let rg = self.requires_grad(x) || self.requires_grad(w) || self.requires_grad(b);
        Ok(self.push(vec![n_out], y, Op::Affine { x, w, b }, rg))
    }

    /// One LSTM step. Returns `(h', c')`.
    pub fn lstm_cell(&mut self, x: Var, h: Var, c: Var, w: LstmWeights) -> Result<(Var, Var)> {
        let n_in = self.vec_len(x, "lstm_cell")?;
        let hid = self.vec_len(h, "lstm_cell")?;
        if self.vec_len(c, "lstm_cell")? != hid {
            return Err(dim_err("lstm_cell", format!("cell state of {hid}"), self.vec_len(c, "lstm_cell")?));
        }
        let g4 = 4 * hid;
        let expect = |got: &[usize], want: &[usize], what: &str| -> Result<()> {
            if got != want {
                return Err(dim_err("lstm_cell", format!("{what} {want:?}"), format!("{got:?}")));
            }
            Ok(())
        };
        expect(self.shape(w.w_ih), &[g4, n_in], "w_ih")?;
        expect(self.shape(w.w_hh), &[g4, hid], "w_hh")?;
        expect(self.shape(w.b_ih), &[g4], "b_ih")?;
        expect(self.shape(w.b_hh), &[g4], "b_hh")?;

        let mut pre: Vec<f64> = self.value(w.b_ih).iter().zip(self.value(w.b_hh)).map(|(a, b)| a + b).collect();
        matvec_add(self.value(w.w_ih), self.value(x), &mut pre);
        matvec_add(self.value(w.w_hh), self.value(h), &mut pre);

        let mut acts = pre;
        for (k, a) in acts.iter_mut().enumerate() {
            *a = if (2 * hid..3 * hid).contains(&k) { a.tanh() } else { sigmoid(*a) };
        }
        let c_prev = self.value(c);
        let mut out = vec![0.0; 2 * hid];
        let mut tanh_c = vec![0.0; hid];
        for j in 0..hid {
            let (i, f, g, o) = (acts[j], acts[hid + j], acts[2 * hid + j], acts[3 * hid + j]);
            let c_new = f * c_prev[j] + i * g;
            tanh_c[j] = c_new.tanh();
            out[j] = o * tanh_c[j];
            out[hid + j] = c_new;
        }
        let rg = [x, h, c, w.w_ih, w.w_hh, w.b_ih, w.b_hh].iter().any(|v| self.requires_grad(*v));
        let both = self.push(
            vec![2 * hid],
            out,
            Op::LstmCell {
                x,
                h,
                c,
                w,
                acts,
                tanh_c,
            },
            rg,
        );
        let h_new = self.slice(both, 0, hid)?;
        let c_new = self.slice(both, hid, hid)?;
        Ok((h_new, c_new))
    }

    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.vec_len(src, "slice")?;
        if start + len > n {
            return Err(Error::Index {
                what: "slice",
                index: start + len,
                len: n,
            });
        }
        let v = self.value(src)[start..start + len].to_vec();
        let rg = self.requires_grad(src);
        Ok(self.push(vec![len], v, Op::Slice { src, start }, rg))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("concat"));
        }
        let mut v = Vec::new();
        for p in parts {
            self.vec_len(*p, "concat")?;
            v.extend_from_slice(self.value(*p));
        }
        let rg = parts.iter().any(|p| self.requires_grad(*p));
        Ok(self.push(vec![v.len()], v, Op::Concat(parts.to_vec()), rg))
    }

    /// Cosine similarity; zero-norm inputs give `0` and no gradient.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        let n = self.vec_len(a, "cosine")?;
        let m = self.vec_len(b, "cosine")?;
        if n != m {
            return Err(dim_err("cosine", n, m));
        }
        let cos = super::cosine_similarity(self.value(a), self.value(b));
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(vec![1], vec![cos], Op::Cosine { a, b }, rg))
    }

    /// Product of two scalars.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.scalar_check(a, "mul")?;
        self.scalar_check(b, "mul")?;
        let v = self.scalar(a) * self.scalar(b);
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(vec![1], vec![v], Op::Mul { a, b }, rg))
    }

    /// Elementwise sum of same-shaped values.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let first = *terms.first().ok_or(Error::EmptyInput("sum"))?;
        let shape = self.shape(first).to_vec();
        let mut acc = vec![0.0; self.value(first).len()];
        for t in terms {
            if self.shape(*t) != shape.as_slice() {
                return Err(dim_err("sum", format!("{shape:?}"), format!("{:?}", self.shape(*t))));
            }
            axpy(1.0, self.value(*t), &mut acc);
        }
        let rg = terms.iter().any(|t| self.requires_grad(*t));
        Ok(self.push(shape, acc, Op::Sum(terms.to_vec()), rg))
    }

    /// `-log softmax(logits)[gold]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, gold: usize) -> Result<Var> {
        let n = self.vec_len(logits, "softmax_cross_entropy")?;
        if gold >= n {
            return Err(Error::Index {
                what: "gold answer",
                index: gold,
                len: n,
            });
        }
        let z = self.value(logits);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let loss = total.ln() + max - z[gold];
        let rg = self.requires_grad(logits);
        Ok(self.push(vec![1], vec![loss], Op::SoftmaxCrossEntropy { logits, gold, probs }, rg))
    }

    /// Back-propagates from a scalar `loss`, adding parameter gradients into `grads`.
    pub fn backward(&self, loss: Var, grads: &mut ParamGrads) -> Result<TapeGrads> {
        self.check_finite()?;
        let Var::Node(root) = loss else {
            return Err(Error::Invariant("backward from a parameter".into()));
        };
        self.scalar_check(loss, "backward")?;
        if grads.len() != self.params.len() {
            return Err(dim_err("backward", format!("{} parameter slots", self.params.len()), grads.len()));
        }
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        node_grads[root] = Some(vec![1.0]);
        let mut sink = Sink {
            tape: self,
            node_grads: &mut node_grads,
            params: grads,
        };

        for i in (0..=root).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = sink.node_grads[i].take() else { continue };
            sink.backprop(node, &g);
            sink.node_grads[i] = Some(g);
        }

        for (i, g) in grads.iter() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of parameter {i}")));
            }
        }
        Ok(TapeGrads { nodes: node_grads })
    }
}

struct Sink<'a, 'p> {
    tape: &'a Tape<'p>,
    node_grads: &'a mut Vec<Option<Vec<f64>>>,
    params: &'a mut ParamGrads,
}

impl Sink<'_, '_> {
    /// Mutable gradient buffer for `var`, or `None` when it needs no gradient.
    fn slot(&mut self, var: Var) -> Option<&mut [f64]> {
        if !self.tape.requires_grad(var) {
            return None;
        }
        let len = self.tape.value(var).len();
        Some(match var {
            Var::Node(i) => self.node_grads[i].get_or_insert_with(|| vec![0.0; len]),
            Var::Param(p) => self.params.slot(p, len),
        })
    }

    fn add(&mut self, var: Var, alpha: f64, contrib: &[f64]) {
        if let Some(s) = self.slot(var) {
            axpy(alpha, contrib, s);
        }
    }

    fn backprop(&mut self, node: &Node, g: &[f64]) {
        let tape = self.tape;
        match &node.op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                self.add(*b, 1.0, g);
                let xv = tape.value(*x);
                if let Some(dw) = self.slot(*w) {
                    outer_add(g, xv, dw);
                }
                let wv = tape.value(*w);
                if let Some(dx) = self.slot(*x) {
                    matvec_t_add(wv, g, dx);
                }
            }
            Op::LstmCell {
                x,
                h,
                c,
                w,
                acts,
                tanh_c,
            } => {
                let hid = tanh_c.len();
                let (dh_out, dc_out) = g.split_at(hid);
                let c_prev = tape.value(*c);
                let mut da = vec![0.0; 4 * hid];
                let mut dc_prev = vec![0.0; hid];
                for j in 0..hid {
                    let (i, f, gg, o) = (acts[j], acts[hid + j], acts[2 * hid + j], acts[3 * hid + j]);
                    let dc = dc_out[j] + dh_out[j] * o * (1.0 - tanh_c[j] * tanh_c[j]);
                    let d_o = dh_out[j] * tanh_c[j];
                    da[j] = dc * gg * i * (1.0 - i);
                    da[hid + j] = dc * c_prev[j] * f * (1.0 - f);
                    da[2 * hid + j] = dc * i * (1.0 - gg * gg);
                    da[3 * hid + j] = d_o * o * (1.0 - o);
                    dc_prev[j] = dc * f;
                }
                self.add(*c, 1.0, &dc_prev);
                self.add(w.b_ih, 1.0, &da);
                self.add(w.b_hh, 1.0, &da);
                let (xv, hv) = (tape.value(*x), tape.value(*h));
                if let Some(dw) = self.slot(w.w_ih) {
                    outer_add(&da, xv, dw);
                }
                if let Some(dw) = self.slot(w.w_hh) {
                    outer_add(&da, hv, dw);
                }
                let (wih, whh) = (tape.value(w.w_ih), tape.value(w.w_hh));
                if let Some(dx) = self.slot(*x) {
                    matvec_t_add(wih, &da, dx);
                }
                if let Some(dh) = self.slot(*h) {
                    matvec_t_add(whh, &da, dh);
                }
            }
            Op::Slice { src, start } => {
                let start = *start;
                if let Some(s) = self.slot(*src) {
                    axpy(1.0, g, &mut s[start..start + g.len()]);
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = tape.value(*p).len();
                    self.add(*p, 1.0, &g[off..off + n]);
                    off += n;
                }
            }
            Op::Cosine { a, b } => {
                let (av, bv) = (tape.value(*a), tape.value(*b));
                let (na, nb) = (norm(av), norm(bv));
                if na == 0.0 || nb == 0.0 {
                    return;
                }
                let cos = node.value[0];
                let s = g[0] / (na * nb);
                let ca = g[0] * cos / (na * na);
                let cb = g[0] * cos / (nb * nb);
                if let Some(da) = self.slot(*a) {
                    for k in 0..da.len() {
                        da[k] += s * bv[k] - ca * av[k];
                    }
                }
                if let Some(db) = self.slot(*b) {
                    for k in 0..db.len() {
                        db[k] += s * av[k] - cb * bv[k];
                    }
                }
            }
            Op::Mul { a, b } => {
                let (av, bv) = (tape.scalar(*a), tape.scalar(*b));
                self.add(*a, g[0] * bv, &[1.0]);
                self.add(*b, g[0] * av, &[1.0]);
            }
            Op::Sum(terms) => {
                for t in terms {
                    self.add(*t, 1.0, g);
                }
            }
            Op::SoftmaxCrossEntropy { logits, gold, probs } => {
                let mut d = probs.clone();
                d[*gold] -= 1.0;
                self.add(*logits, g[0], &d);
            }
        }
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Affine { .. } => "affine",
        Op::LstmCell { .. } => "lstm_cell",
        Op::Slice { .. } => "slice",
        Op::Concat(_) => "concat",
        Op::Cosine { .. } => "cosine",
        Op::Mul { .. } => "mul",
        Op::Sum(_) => "sum",
        Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
    }
}
