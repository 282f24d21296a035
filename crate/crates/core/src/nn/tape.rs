//! Reverse-mode automatic differentiation on a linear tape.
//!
//! Every operation appends a node holding its forward value and the indices
//! of its inputs; since inputs always precede outputs, a single reverse
//! sweep over the tape propagates gradients. Tapes are built per step and
//! dropped afterwards; parameters live outside (see
//! [`ParamSet`](super::ParamSet)) and enter a tape as leaves.

use rand::Rng;

use super::kernels::{layer_norm_rows, mm_nn, mm_nt, mm_tn, softmax_rows};
use super::tensor::Tensor;
use crate::{Error, Result};

/// Handle to a tape node. Only valid for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul { a: usize, b: usize },
    BmmNn { a: usize, b: usize },
    BmmNt { a: usize, b: usize },
    Add { a: usize, b: usize },
    AddCond { x: usize, cond: usize, group: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: f64 },
    AddConst { a: usize },
    Relu { a: usize },
    Softmax { a: usize, row: usize },
    Log { a: usize },
    MaskedFillCausal { a: usize, l: usize },
    Embedding { table: usize, ids: Vec<usize> },
    LayerNorm { x: usize, gain: usize, bias: usize, cache: Vec<(f64, f64)> },
    Dropout { a: usize, mask: Vec<f64> },
    Reshape { a: usize },
    Gather { a: usize, idx: Vec<usize> },
    ConcatRows { parts: Vec<usize> },
    Mean { a: usize },
    LogSoftmaxNll { logits: usize, targets: Vec<usize>, log_probs: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// The autodiff tape: a growing arena of operation nodes plus, after
/// [`backward`](Tape::backward), a gradient buffer per node.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn shape_err(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Incompatible(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` loss w.r.t. node `v`, if it was
    /// reached.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.grads.get(v.0)?.as_ref().map(|g| {
            Tensor::new(self.nodes[v.0].value.shape().to_vec(), g.clone())
                .expect("gradient shape matches value shape")
        })
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Introduces an input or parameter value.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// 2-D matrix product `[m,k]·[k,n] → [m,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        mm_nn(self.value(a).data(), self.value(b).data(), m, k, n, &mut out);
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.push(value, Op::MatMul { a: a.0, b: b.0 }))
    }

    /// Batched product `[B,m,k]·[B,k,n] → [B,m,n]`.
    pub fn bmm_nn(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
            return Err(shape_err("bmm_nn", sa, sb));
        }
        let (bs, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
        let mut out = vec![0.0; bs * m * n];
        for t in 0..bs {
            mm_nn(
                &self.value(a).data()[t * m * k..(t + 1) * m * k],
                &self.value(b).data()[t * k * n..(t + 1) * k * n],
                m,
                k,
                n,
                &mut out[t * m * n..(t + 1) * m * n],
            );
        }
        let value = Tensor::new(vec![bs, m, n], out)?;
        Ok(self.push(value, Op::BmmNn { a: a.0, b: b.0 }))
    }

    /// Batched product against the transpose: `[B,m,k]·[B,n,k]ᵀ → [B,m,n]`.
    pub fn bmm_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[2] {
            return Err(shape_err("bmm_nt", sa, sb));
        }
        let (bs, m, k, n) = (sa[0], sa[1], sa[2], sb[1]);
        let mut out = vec![0.0; bs * m * n];
        for t in 0..bs {
            mm_nt(
                &self.value(a).data()[t * m * k..(t + 1) * m * k],
                &self.value(b).data()[t * n * k..(t + 1) * n * k],
                m,
                k,
                n,
                &mut out[t * m * n..(t + 1) * m * n],
            );
        }
        let value = Tensor::new(vec![bs, m, n], out)?;
        Ok(self.push(value, Op::BmmNt { a: a.0, b: b.0 }))
    }

    /// Elementwise sum; `b`'s shape must equal a trailing suffix of `a`'s
    /// shape and is broadcast over the leading dimensions (bias add).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sb.len() > sa.len() || &sa[sa.len() - sb.len()..] != sb {
            return Err(shape_err("add", sa, sb));
        }
        let bn = self.value(b).numel().max(1);
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + self.value(b).data()[i % bn])
            .collect();
        let value = Tensor::new(sa.to_vec(), data)?;
        Ok(self.push(value, Op::Add { a: a.0, b: b.0 }))
    }

    /// Adds one row of `cond` (shape `[B, D]`) to each of the `l` rows of
    /// the corresponding group in `x` (shape `[B·l, D]`): the conditioning
    /// injection.
    pub fn add_cond(&mut self, x: Var, cond: Var, l: usize) -> Result<Var> {
        let (sx, sc) = (self.value(x).shape(), self.value(cond).shape());
        if sx.len() != 2 || sc.len() != 2 || sx[1] != sc[1] || sx[0] != sc[0] * l {
            return Err(shape_err("add_cond", sx, sc));
        }
        let d = sx[1];
        let group = l * d;
        let data: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + self.value(cond).data()[(i / group) * d + i % d])
            .collect();
        let value = Tensor::new(sx.to_vec(), data)?;
        Ok(self.push(value, Op::AddCond { x: x.0, cond: cond.0, group }))
    }

    /// Elementwise difference of same-shape tensors.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(shape_err("sub", sa, sb));
        }
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x - y)
            .collect();
        let value = Tensor::new(sa.to_vec(), data)?;
        Ok(self.push(value, Op::Sub { a: a.0, b: b.0 }))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(shape_err("mul", sa, sb));
        }
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(sa.to_vec(), data)?;
        Ok(self.push(value, Op::Mul { a: a.0, b: b.0 }))
    }

    /// Multiplication by a compile-time constant.
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let data: Vec<f64> = self.value(a).data().iter().map(|x| x * c).collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Scale { a: a.0, c })
    }

    /// Adds a non-trainable constant tensor (positional encodings etc.).
    pub fn add_const(&mut self, a: Var, c: &Tensor) -> Result<Var> {
        if self.value(a).shape() != c.shape() {
            return Err(shape_err("add_const", self.value(a).shape(), c.shape()));
        }
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(c.data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(c.shape().to_vec(), data)?;
        Ok(self.push(value, Op::AddConst { a: a.0 }))
    }

    /// Rectified linear unit.
    pub fn relu(&mut self, a: Var) -> Var {
        let data: Vec<f64> = self.value(a).data().iter().map(|x| x.max(0.0)).collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Relu { a: a.0 })
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        let row = *shape.last().ok_or_else(|| {
            Error::Incompatible("softmax: scalar input has no last axis".into())
        })?;
        let mut out = vec![0.0; self.value(a).numel()];
        softmax_rows(self.value(a).data(), row, false, &mut out);
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Softmax { a: a.0, row }))
    }

    /// Elementwise natural logarithm (inputs must stay positive for a
    /// finite result; prefer [`log_softmax_nll`](Tape::log_softmax_nll) for
    /// likelihoods).
    pub fn log(&mut self, a: Var) -> Var {
        let data: Vec<f64> = self.value(a).data().iter().map(|x| x.ln()).collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Log { a: a.0 })
    }

    /// Fills the strictly-upper triangle of the trailing `[L, L]` blocks
    /// with a large negative constant, so a following softmax never attends
    /// to future positions.
    pub fn masked_fill_causal(&mut self, a: Var, fill: f64) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        if shape.len() < 2 || shape[shape.len() - 1] != shape[shape.len() - 2] {
            return Err(Error::Incompatible(format!(
                "masked_fill_causal: shape {shape:?} does not end in a square [L, L]"
            )));
        }
        let l = shape[shape.len() - 1];
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let j = i % l;
                let r = (i / l) % l;
                if j > r {
                    fill
                } else {
                    x
                }
            })
            .collect();
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::MaskedFillCausal { a: a.0, l }))
    }

    /// Row lookup: `table` is `[V, D]`, output stacks `table[ids[i]]` into
    /// `[len(ids), D]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let st = self.value(table).shape();
        if st.len() != 2 {
            return Err(Error::Incompatible(format!(
                "embedding: table shape {st:?} is not 2-D"
            )));
        }
        let (v, d) = (st[0], st[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Incompatible(format!(
                "embedding: id {bad} out of vocabulary {v}"
            )));
        }
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(&self.value(table).data()[i * d..(i + 1) * d]);
        }
        let value = Tensor::new(vec![ids.len(), d], data)?;
        Ok(self.push(value, Op::Embedding { table: table.0, ids: ids.to_vec() }))
    }

    /// Layer normalization over the last axis with trainable gain and bias
    /// (both of shape `[D]`).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (sx, sg, sb) = (
            self.value(x).shape(),
            self.value(gain).shape(),
            self.value(bias).shape(),
        );
        let d = *sx.last().unwrap_or(&0);
        if d == 0 || sg != [d] || sb != [d] {
            return Err(shape_err("layer_norm", sx, sg));
        }
        let mut out = vec![0.0; self.value(x).numel()];
        let cache = layer_norm_rows(
            self.value(x).data(),
            d,
            eps,
            self.value(gain).data(),
            self.value(bias).data(),
            &mut out,
        );
        let value = Tensor::new(sx.to_vec(), out)?;
        Ok(self.push(
            value,
            Op::LayerNorm { x: x.0, gain: gain.0, bias: bias.0, cache },
        ))
    }

    /// Inverted dropout: at train time each entry is zeroed with
    /// probability `p` and survivors are scaled by `1/(1−p)`; outside
    /// training (or at `p = 0`) the op is an exact identity and adds no
    /// node.
    pub fn dropout<R: Rng>(
        &mut self,
        a: Var,
        p: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!(
                "dropout probability must be in [0, 1), got {p}"
            )));
        }
        if !train || p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.value(a).numel())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(&mask)
            .map(|(x, m)| x * m)
            .collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(value, Op::Dropout { a: a.0, mask }))
    }

    /// Shape change preserving the element count.
    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(a).reshaped(shape)?;
        Ok(self.push(value, Op::Reshape { a: a.0 }))
    }

    /// Flat index gather: `out[i] = a[idx[i]]` with an explicit output
    /// shape. Covers transposes, head split/merge, and row selection.
    pub fn gather(&mut self, a: Var, idx: Vec<usize>, shape: Vec<usize>) -> Result<Var> {
        let n = self.value(a).numel();
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Incompatible(format!(
                "gather: index {bad} out of bounds for {n} elements"
            )));
        }
        let data: Vec<f64> = idx.iter().map(|&i| self.value(a).data()[i]).collect();
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Gather { a: a.0, idx }))
    }

    /// Concatenates 2-D tensors along axis 0 (they must agree on axis 1).
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Incompatible("concat_rows: no inputs".into()));
        }
        let cols = match self.value(parts[0]).shape() {
            [_, c] => *c,
            s => return Err(Error::Incompatible(format!("concat_rows: {s:?} is not 2-D"))),
        };
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != 2 || s[1] != cols {
                return Err(shape_err("concat_rows", &[rows, cols], s));
            }
            rows += s[0];
            data.extend_from_slice(self.value(p).data());
        }
        let value = Tensor::new(vec![rows, cols], data)?;
        Ok(self.push(value, Op::ConcatRows { parts: parts.iter().map(|v| v.0).collect() }))
    }

    /// Mean of all entries (scalar output).
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).numel().max(1) as f64;
        let m = self.value(a).data().iter().sum::<f64>() / n;
        self.push(Tensor::scalar(m), Op::Mean { a: a.0 })
    }

    /// Fused log-softmax + negative log-likelihood: `logits` is `[N, V]`,
    /// `targets` has length `N`, and the scalar output is
    /// `−(1/N)·Σ_i log softmax(logits)[i, targets[i]]`, computed through a
    /// log-sum-exp so underflow cannot produce NaN.
    pub fn log_softmax_nll(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let s = self.value(logits).shape();
        if s.len() != 2 || s[0] != targets.len() {
            return Err(Error::Incompatible(format!(
                "log_softmax_nll: logits {s:?} vs {} targets",
                targets.len()
            )));
        }
        let (n, v) = (s[0], s[1]);
        if let Some(&bad) = targets.iter().find(|&&t| t >= v) {
            return Err(Error::Incompatible(format!(
                "log_softmax_nll: target {bad} out of vocabulary {v}"
            )));
        }
        let x = self.value(logits).data();
        let mut log_probs = vec![0.0; n * v];
        let mut loss = 0.0;
        for i in 0..n {
            let row = &x[i * v..(i + 1) * v];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            for j in 0..v {
                log_probs[i * v + j] = row[j] - lse;
            }
            loss -= log_probs[i * v + targets[i]];
        }
        loss /= n as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::LogSoftmaxNll { logits: logits.0, targets: targets.to_vec(), log_probs },
        ))
    }

    /// Reverse sweep from a scalar loss; gradients are then available via
    /// [`grad`](Tape::grad). Fails if the loss value is not finite.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = &self.nodes[loss.0].value;
        if lv.numel() != 1 {
            return Err(Error::Incompatible(format!(
                "backward: loss must be scalar, got shape {:?}",
                lv.shape()
            )));
        }
        if !lv.is_finite() {
            return Err(Error::NonFinite { context: "loss value".into() });
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let Some(g) = self.grads[id].take() else {
                continue;
            };
            self.dispatch_backward(id, &g);
            self.grads[id] = Some(g);
        }
        Ok(())
    }

    fn dispatch_backward(&mut self, id: usize, g: &[f64]) {
        // `g` is the upstream gradient for node `id`; accumulate into the
        // parents' gradient buffers. `nodes` stays immutable during the
        // sweep, so it can be read while `grads` is written.
        let Self { nodes, grads } = self;
        fn acc<'a>(grads: &'a mut [Option<Vec<f64>>], nodes: &[Node], id: usize) -> &'a mut Vec<f64> {
            let numel = nodes[id].value.numel();
            grads[id].get_or_insert_with(|| vec![0.0; numel])
        }
        match &nodes[id].op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (a, b) = (*a, *b);
                let sa = nodes[a].value.shape();
                let sb = nodes[b].value.shape();
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                mm_nt(g, nodes[b].value.data(), m, n, k, acc(grads, nodes, a));
                mm_tn(nodes[a].value.data(), g, k, m, n, acc(grads, nodes, b));
            }
            Op::BmmNn { a, b } => {
                let (a, b) = (*a, *b);
                let sa = nodes[a].value.shape();
                let sb = nodes[b].value.shape();
                let (bs, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
                {
                    let ga = acc(grads, nodes, a);
                    let bval = nodes[b].value.data();
                    for t in 0..bs {
                        mm_nt(
                            &g[t * m * n..(t + 1) * m * n],
                            &bval[t * k * n..(t + 1) * k * n],
                            m,
                            n,
                            k,
                            &mut ga[t * m * k..(t + 1) * m * k],
                        );
                    }
                }
                let gb = acc(grads, nodes, b);
                let aval = nodes[a].value.data();
                for t in 0..bs {
                    mm_tn(
                        &aval[t * m * k..(t + 1) * m * k],
                        &g[t * m * n..(t + 1) * m * n],
                        k,
                        m,
                        n,
                        &mut gb[t * k * n..(t + 1) * k * n],
                    );
                }
            }
            Op::BmmNt { a, b } => {
                let (a, b) = (*a, *b);
                let sa = nodes[a].value.shape();
                let sb = nodes[b].value.shape();
                let (bs, m, k, n) = (sa[0], sa[1], sa[2], sb[1]);
                {
                    let ga = acc(grads, nodes, a);
                    let bval = nodes[b].value.data();
                    for t in 0..bs {
                        mm_nn(
                            &g[t * m * n..(t + 1) * m * n],
                            &bval[t * n * k..(t + 1) * n * k],
                            m,
                            n,
                            k,
                            &mut ga[t * m * k..(t + 1) * m * k],
                        );
                    }
                }
                let gb = acc(grads, nodes, b);
                let aval = nodes[a].value.data();
                for t in 0..bs {
                    mm_tn(
                        &g[t * m * n..(t + 1) * m * n],
                        &aval[t * m * k..(t + 1) * m * k],
                        n,
                        m,
                        k,
                        &mut gb[t * n * k..(t + 1) * n * k],
                    );
                }
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                let bn = nodes[b].value.numel().max(1);
                {
                    let ga = acc(grads, nodes, a);
                    for (x, y) in ga.iter_mut().zip(g) {
                        *x += y;
                    }
                }
                let gb = acc(grads, nodes, b);
                for (i, y) in g.iter().enumerate() {
                    gb[i % bn] += y;
                }
            }
            Op::AddCond { x, cond, group } => {
                let (x, cond, group) = (*x, *cond, *group);
                let d = nodes[cond].value.shape()[1];
                {
                    let gx = acc(grads, nodes, x);
                    for (u, y) in gx.iter_mut().zip(g) {
                        *u += y;
                    }
                }
                let gc = acc(grads, nodes, cond);
                for (i, y) in g.iter().enumerate() {
                    gc[(i / group) * d + i % d] += y;
                }
            }
            Op::Sub { a, b } => {
                let (a, b) = (*a, *b);
                {
                    let ga = acc(grads, nodes, a);
                    for (x, y) in ga.iter_mut().zip(g) {
                        *x += y;
                    }
                }
                let gb = acc(grads, nodes, b);
                for (x, y) in gb.iter_mut().zip(g) {
                    *x -= y;
                }
            }
            Op::Mul { a, b } => {
                let (a, b) = (*a, *b);
                {
                    let bv = nodes[b].value.data();
                    let ga = acc(grads, nodes, a);
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                }
                let av = nodes[a].value.data();
                let gb = acc(grads, nodes, b);
                for i in 0..g.len() {
                    gb[i] += g[i] * av[i];
                }
            }
            Op::Scale { a, c } => {
                let (a, c) = (*a, *c);
                let ga = acc(grads, nodes, a);
                for (x, y) in ga.iter_mut().zip(g) {
                    *x += c * y;
                }
            }
            Op::AddConst { a } => {
                let ga = acc(grads, nodes, *a);
                for (x, y) in ga.iter_mut().zip(g) {
                    *x += y;
                }
            }
            Op::Relu { a } => {
                let out = nodes[id].value.data();
                let ga = acc(grads, nodes, *a);
                for i in 0..g.len() {
                    if out[i] > 0.0 {
                        ga[i] += g[i];
                    }
                }
            }
            Op::Softmax { a, row } => {
                let row = *row;
                let p = nodes[id].value.data();
                let ga = acc(grads, nodes, *a);
                for r in 0..p.len() / row {
                    let pr = &p[r * row..(r + 1) * row];
                    let gr = &g[r * row..(r + 1) * row];
                    let dot: f64 = pr.iter().zip(gr).map(|(x, y)| x * y).sum();
                    let gar = &mut ga[r * row..(r + 1) * row];
                    for j in 0..row {
                        gar[j] += pr[j] * (gr[j] - dot);
                    }
                }
            }
            Op::Log { a } => {
                let av = nodes[*a].value.data();
                let ga = acc(grads, nodes, *a);
                for i in 0..g.len() {
                    ga[i] += g[i] / av[i];
                }
            }
            Op::MaskedFillCausal { a, l } => {
                let l = *l;
                let ga = acc(grads, nodes, *a);
                for (i, y) in g.iter().enumerate() {
                    let j = i % l;
                    let r = (i / l) % l;
                    if j <= r {
                        ga[i] += y;
                    }
                }
            }
            Op::Embedding { table, ids } => {
                let d = nodes[*table].value.shape()[1];
                let gt = acc(grads, nodes, *table);
                for (n, &i) in ids.iter().enumerate() {
                    for j in 0..d {
                        gt[i * d + j] += g[n * d + j];
                    }
                }
            }
            Op::LayerNorm { x, gain, bias, cache } => {
                let (x, gain, bias) = (*x, *gain, *bias);
                let d = nodes[gain].value.numel();
                let xv = nodes[x].value.data();
                let gv = nodes[gain].value.data();
                let n_rows = xv.len() / d;
                let mut dgain = vec![0.0; d];
                let mut dbias = vec![0.0; d];
                {
                    let gx = acc(grads, nodes, x);
                    for r in 0..n_rows {
                        let (mean, inv) = cache[r];
                        let xr = &xv[r * d..(r + 1) * d];
                        let gr = &g[r * d..(r + 1) * d];
                        let mut m1 = 0.0; // mean of dxhat
                        let mut m2 = 0.0; // mean of dxhat ⊙ xhat
                        for j in 0..d {
                            let xhat = (xr[j] - mean) * inv;
                            let dxhat = gr[j] * gv[j];
                            dgain[j] += gr[j] * xhat;
                            dbias[j] += gr[j];
                            m1 += dxhat;
                            m2 += dxhat * xhat;
                        }
                        m1 /= d as f64;
                        m2 /= d as f64;
                        let gxr = &mut gx[r * d..(r + 1) * d];
                        for j in 0..d {
                            let xhat = (xr[j] - mean) * inv;
                            let dxhat = gr[j] * gv[j];
                            gxr[j] += inv * (dxhat - m1 - xhat * m2);
                        }
                    }
                }
                {
                    let gg = acc(grads, nodes, gain);
                    for (x, y) in gg.iter_mut().zip(&dgain) {
                        *x += y;
                    }
                }
                let gb = acc(grads, nodes, bias);
                for (x, y) in gb.iter_mut().zip(&dbias) {
                    *x += y;
                }
            }
            Op::Dropout { a, mask } => {
                let ga = acc(grads, nodes, *a);
                for i in 0..g.len() {
                    ga[i] += g[i] * mask[i];
                }
            }
            Op::Reshape { a } => {
                let ga = acc(grads, nodes, *a);
                for (x, y) in ga.iter_mut().zip(g) {
                    *x += y;
                }
            }
            Op::Gather { a, idx } => {
                let ga = acc(grads, nodes, *a);
                for (i, &src) in idx.iter().enumerate() {
                    ga[src] += g[i];
                }
            }
            Op::ConcatRows { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let n = nodes[p].value.numel();
                    let gp = acc(grads, nodes, p);
                    for (x, y) in gp.iter_mut().zip(&g[offset..offset + n]) {
                        *x += y;
                    }
                    offset += n;
                }
            }
            Op::Mean { a } => {
                let n = nodes[*a].value.numel().max(1) as f64;
                let gy = g[0] / n;
                let ga = acc(grads, nodes, *a);
                for x in ga.iter_mut() {
                    *x += gy;
                }
            }
            Op::LogSoftmaxNll { logits, targets, log_probs } => {
                let n = targets.len();
                let v = log_probs.len() / n;
                let scale = g[0] / n as f64;
                let gl = acc(grads, nodes, *logits);
                for i in 0..n {
                    for j in 0..v {
                        let p = log_probs[i * v + j].exp();
                        let delta = if j == targets[i] { 1.0 } else { 0.0 };
                        gl[i * v + j] += scale * (p - delta);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    /// Central finite differences of `f` w.r.t. `x`, h = 1e-5.
    fn fd_grad(x: &Tensor, f: &mut dyn FnMut(&Tensor) -> f64) -> Vec<f64> {
        let h = 1e-5;
        (0..x.numel())
            .map(|i| {
                let mut plus = x.clone();
                plus.data_mut()[i] += h;
                let mut minus = x.clone();
                minus.data_mut()[i] -= h;
                (f(&plus) - f(&minus)) / (2.0 * h)
            })
            .collect()
    }

    fn assert_close(analytic: &[f64], numeric: &[f64], tol: f64, what: &str) {
        assert_eq!(analytic.len(), numeric.len());
        for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
            let denom = a.abs().max(n.abs()).max(1e-3);
            let rel = (a - n).abs() / denom;
            assert!(rel <= tol, "{what}[{i}]: analytic {a} vs numeric {n} (rel {rel})");
        }
    }

    fn rand_tensor(rng: &mut StdRng, shape: Vec<usize>) -> Tensor {
        use rand::Rng;
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Checks the gradient of `build` (a tape program returning a scalar)
    /// w.r.t. its single differentiable input.
    fn check_op(
        x: Tensor,
        build: &mut dyn FnMut(&mut Tape, Var) -> Var,
        tol: f64,
        what: &str,
    ) {
        let mut f = |t: &Tensor| {
            let mut tape = Tape::new();
            let v = tape.leaf(t.clone());
            let out = build(&mut tape, v);
            tape.value(out).item()
        };
        let numeric = fd_grad(&x, &mut f);
        let mut tape = Tape::new();
        let v = tape.leaf(x);
        let out = build(&mut tape, v);
        tape.backward(out).unwrap();
        let analytic = tape.grad(v).unwrap();
        assert_close(analytic.data(), &numeric, tol, what);
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = rand_tensor(&mut rng, vec![4, 5]);
        let b = rand_tensor(&mut rng, vec![5, 3]);
        // Gradient w.r.t. a.
        let b2 = b.clone();
        check_op(
            a.clone(),
            &mut move |t, v| {
                let bv = t.leaf(b2.clone());
                let c = t.matmul(v, bv).unwrap();
                let sq = t.mul(c, c).unwrap();
                t.mean(sq)
            },
            1e-6,
            "matmul dA",
        );
        // Gradient w.r.t. b.
        check_op(
            b,
            &mut move |t, v| {
                let av = t.leaf(a.clone());
                let c = t.matmul(av, v).unwrap();
                let sq = t.mul(c, c).unwrap();
                t.mean(sq)
            },
            1e-6,
            "matmul dB",
        );
    }

    #[test]
    fn batched_matmul_gradients() {
        let mut rng = StdRng::seed_from_u64(8);
        let a = rand_tensor(&mut rng, vec![3, 2, 4]);
        let b = rand_tensor(&mut rng, vec![3, 4, 2]);
        let bt = rand_tensor(&mut rng, vec![3, 2, 4]);
        let (b1, bt1) = (b.clone(), bt.clone());
        check_op(
            a.clone(),
            &mut move |t, v| {
                let bv = t.leaf(b1.clone());
                let c = t.bmm_nn(v, bv).unwrap();
                let sq = t.mul(c, c).unwrap();
                t.mean(sq)
            },
            1e-6,
            "bmm_nn dA",
        );
        let a1 = a.clone();
        check_op(
            b,
            &mut move |t, v| {
                let av = t.leaf(a1.clone());
                let c = t.bmm_nn(av, v).unwrap();
                let sq = t.mul(c, c).unwrap();
                t.mean(sq)
            },
            1e-6,
            "bmm_nn dB",
        );
        let a2 = a.clone();
        check_op(
            bt,
            &mut move |t, v| {
                let av = t.leaf(a2.clone());
                let c = t.bmm_nt(av, v).unwrap();
                let sq = t.mul(c, c).unwrap();
                t.mean(sq)
            },
            1e-6,
            "bmm_nt dB",
        );
        check_op(
            a,
            &mut move |t, v| {
                let bv = t.leaf(bt1.clone());
                let c = t.bmm_nt(v, bv).unwrap();
                let sq = t.mul(c, c).unwrap();
                t.mean(sq)
            },
            1e-6,
            "bmm_nt dA",
        );
    }

    #[test]
    fn elementwise_and_broadcast_gradients() {
        let mut rng = StdRng::seed_from_u64(9);
        let x = rand_tensor(&mut rng, vec![4, 3]);
        let bias = rand_tensor(&mut rng, vec![3]);
        let b1 = bias.clone();
        check_op(
            x.clone(),
            &mut move |t, v| {
                let b = t.leaf(b1.clone());
                let s = t.add(v, b).unwrap();
                let sq = t.mul(s, s).unwrap();
                t.mean(sq)
            },
            1e-6,
            "add dX",
        );
        let x1 = x.clone();
        check_op(
            bias,
            &mut move |t, v| {
                let xv = t.leaf(x1.clone());
                let s = t.add(xv, v).unwrap();
                let sq = t.mul(s, s).unwrap();
                t.mean(sq)
            },
            1e-6,
            "add dBias",
        );
        let y = rand_tensor(&mut rng, vec![4, 3]);
        let y1 = y.clone();
        check_op(
            x.clone(),
            &mut move |t, v| {
                let yv = t.leaf(y1.clone());
                let d = t.sub(v, yv).unwrap();
                let sq = t.mul(d, d).unwrap();
                t.mean(sq)
            },
            1e-6,
            "sub",
        );
        check_op(
            x.clone(),
            &mut move |t, v| {
                let yv = t.leaf(y.clone());
                let m = t.mul(v, yv).unwrap();
                t.mean(m)
            },
            1e-6,
            "mul",
        );
        check_op(
            x,
            &mut |t, v| {
                let s = t.scale(v, -2.5);
                let sq = t.mul(s, s).unwrap();
                t.mean(sq)
            },
            1e-6,
            "scale",
        );
    }

    #[test]
    fn add_cond_gradients() {
        let mut rng = StdRng::seed_from_u64(10);
        let x = rand_tensor(&mut rng, vec![6, 3]); // B=2, L=3
        let cond = rand_tensor(&mut rng, vec![2, 3]);
        let c1 = cond.clone();
        check_op(
            x.clone(),
            &mut move |t, v| {
                let c = t.leaf(c1.clone());
                let s = t.add_cond(v, c, 3).unwrap();
                let sq = t.mul(s, s).unwrap();
                t.mean(sq)
            },
            1e-6,
            "add_cond dX",
        );
        check_op(
            cond,
            &mut move |t, v| {
                let xv = t.leaf(x.clone());
                let s = t.add_cond(xv, v, 3).unwrap();
                let sq = t.mul(s, s).unwrap();
                t.mean(sq)
            },
            1e-6,
            "add_cond dCond",
        );
    }

    #[test]
    fn activation_and_norm_gradients() {
        let mut rng = StdRng::seed_from_u64(11);
        // Keep ReLU inputs away from the kink.
        let mut x = rand_tensor(&mut rng, vec![5, 4]);
        for v in x.data_mut() {
            if v.abs() < 0.05 {
                *v += 0.1;
            }
        }
        check_op(
            x.clone(),
            &mut |t, v| {
                let r = t.relu(v);
                let sq = t.mul(r, r).unwrap();
                t.mean(sq)
            },
            1e-6,
            "relu",
        );
        check_op(
            x.clone(),
            &mut |t, v| {
                let s = t.softmax(v).unwrap();
                let sq = t.mul(s, s).unwrap();
                t.mean(sq)
            },
            1e-6,
            "softmax",
        );
        let pos = Tensor::new(
            vec![3, 3],
            (1..=9).map(|i| i as f64 * 0.37).collect(),
        )
        .unwrap();
        check_op(
            pos,
            &mut |t, v| {
                let l = t.log(v);
                t.mean(l)
            },
            1e-6,
            "log",
        );
        let gain = rand_tensor(&mut rng, vec![4]);
        let bias = rand_tensor(&mut rng, vec![4]);
        let (g1, b1) = (gain.clone(), bias.clone());
        check_op(
            x.clone(),
            &mut move |t, v| {
                let g = t.leaf(g1.clone());
                let b = t.leaf(b1.clone());
                let y = t.layer_norm(v, g, b, 1e-5).unwrap();
                let sq = t.mul(y, y).unwrap();
                t.mean(sq)
            },
            1e-5,
            "layer_norm dX",
        );
        let (x1, b2) = (x.clone(), bias.clone());
        check_op(
            gain.clone(),
            &mut move |t, v| {
                let xv = t.leaf(x1.clone());
                let b = t.leaf(b2.clone());
                let y = t.layer_norm(xv, v, b, 1e-5).unwrap();
                let sq = t.mul(y, y).unwrap();
                t.mean(sq)
            },
            1e-6,
            "layer_norm dGain",
        );
        check_op(
            bias,
            &mut move |t, v| {
                let xv = t.leaf(x.clone());
                let g = t.leaf(gain.clone());
                let y = t.layer_norm(xv, g, v, 1e-5).unwrap();
                let sq = t.mul(y, y).unwrap();
                t.mean(sq)
            },
            1e-6,
            "layer_norm dBias",
        );
    }

    #[test]
    fn structural_op_gradients() {
        let mut rng = StdRng::seed_from_u64(12);
        let x = rand_tensor(&mut rng, vec![2, 3, 3]);
        check_op(
            x.clone(),
            &mut |t, v| {
                let m = t.masked_fill_causal(v, -1e30).unwrap();
                let s = t.softmax(m).unwrap();
                let sq = t.mul(s, s).unwrap();
                t.mean(sq)
            },
            1e-6,
            "masked softmax",
        );
        let table = rand_tensor(&mut rng, vec![5, 4]);
        check_op(
            table,
            &mut |t, v| {
                let e = t.embedding(v, &[4, 0, 0, 2]).unwrap();
                let sq = t.mul(e, e).unwrap();
                t.mean(sq)
            },
            1e-6,
            "embedding",
        );
        let x2 = rand_tensor(&mut rng, vec![3, 4]);
        check_op(
            x2.clone(),
            &mut |t, v| {
                let r = t.reshape(v, vec![2, 6]).unwrap();
                let sq = t.mul(r, r).unwrap();
                t.mean(sq)
            },
            1e-6,
            "reshape",
        );
        check_op(
            x2.clone(),
            &mut |t, v| {
                // Transpose via gather, duplicate one element.
                let idx = vec![0, 4, 8, 1, 5, 9, 2, 6, 10, 3, 7, 11, 0];
                let gth = t.gather(v, idx, vec![13]).unwrap();
                let sq = t.mul(gth, gth).unwrap();
                t.mean(sq)
            },
            1e-6,
            "gather",
        );
        check_op(
            x2,
            &mut |t, v| {
                let other = t.leaf(Tensor::full(vec![2, 4], 0.3));
                let cat = t.concat_rows(&[v, other, v]).unwrap();
                let sq = t.mul(cat, cat).unwrap();
                t.mean(sq)
            },
            1e-6,
            "concat_rows",
        );
    }

    #[test]
    fn nll_gradient_and_stability() {
        let mut rng = StdRng::seed_from_u64(13);
        let logits = rand_tensor(&mut rng, vec![4, 6]);
        check_op(
            logits,
            &mut |t, v| t.log_softmax_nll(v, &[3, 0, 5, 1]).unwrap(),
            1e-6,
            "log_softmax_nll",
        );
        // Extreme logits: log-sum-exp must stay finite.
        let extreme = Tensor::new(vec![1, 3], vec![1e4, -1e4, 0.0]).unwrap();
        let mut tape = Tape::new();
        let v = tape.leaf(extreme);
        let loss = tape.log_softmax_nll(v, &[1]).unwrap();
        assert!(tape.value(loss).item().is_finite());
        tape.backward(loss).unwrap();
        assert!(tape.grad(v).unwrap().is_finite());
    }

    #[test]
    fn relu_point_values_and_gradients() {
        let x = Tensor::new(vec![2], vec![-1.0, 2.0]).unwrap();
        let mut tape = Tape::new();
        let v = tape.leaf(x);
        let r = tape.relu(v);
        assert_eq!(tape.value(r).data(), &[0.0, 2.0]);
        let m = tape.mean(r);
        tape.backward(m).unwrap();
        let g = tape.grad(v).unwrap();
        assert_eq!(g.data(), &[0.0, 0.5]); // d mean/dx_i = 1/2 where active
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = StdRng::seed_from_u64(14);
        let x = rand_tensor(&mut rng, vec![7, 5]);
        let mut tape = Tape::new();
        let v = tape.leaf(x);
        let s = tape.softmax(v).unwrap();
        for r in 0..7 {
            let sum: f64 = tape.value(s).data()[r * 5..(r + 1) * 5].iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        // Uniform logits → uniform distribution.
        let u = tape.leaf(Tensor::full(vec![2, 4], 3.3));
        let su = tape.softmax(u).unwrap();
        for &p in tape.value(su).data() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn dropout_modes() {
        let mut rng = StdRng::seed_from_u64(15);
        let x = Tensor::full(vec![100], 1.0);
        let mut tape = Tape::new();
        let v = tape.leaf(x.clone());
        // Identity cases add no node.
        let same = tape.dropout(v, 0.0, true, &mut rng).unwrap();
        assert_eq!(same, v);
        let same = tape.dropout(v, 0.5, false, &mut rng).unwrap();
        assert_eq!(same, v);
        // Training: entries are 0 or 1/(1-p) and gradients follow the mask.
        let d = tape.dropout(v, 0.25, true, &mut rng).unwrap();
        let vals = tape.value(d).data().to_vec();
        let kept = vals.iter().filter(|&&v| v != 0.0).count();
        for &val in &vals {
            assert!(val == 0.0 || (val - 4.0 / 3.0).abs() < 1e-15);
        }
        assert!(kept > 50 && kept < 95, "kept {kept} of 100 at p=0.25");
        let m = tape.mean(d);
        tape.backward(m).unwrap();
        let g = tape.grad(v).unwrap();
        for (gv, dv) in g.data().iter().zip(&vals) {
            if *dv == 0.0 {
                assert_eq!(*gv, 0.0);
            } else {
                assert!((gv - 4.0 / 3.0 / 100.0).abs() < 1e-15);
            }
        }
        assert!(tape.dropout(v, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(vec![2, 3]));
        let b = tape.leaf(Tensor::zeros(vec![2, 3]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
        let c = tape.leaf(Tensor::zeros(vec![4]));
        assert!(tape.add(a, c).is_err());
        assert!(tape.sub(a, c).is_err());
        let loss_not_scalar = tape.relu(a);
        assert!(tape.backward(loss_not_scalar).is_err());
    }

    #[test]
    fn backward_rejects_non_finite_loss() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![1], vec![-1.0]).unwrap());
        let l = tape.log(x); // ln(-1) = NaN
        let m = tape.mean(l);
        let err = tape.backward(m).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn gradient_accumulates_over_reused_nodes() {
        // y = x·x (via mul with itself) — gradient must be 2x.
        let x = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let mut tape = Tape::new();
        let v = tape.leaf(x);
        let sq = tape.mul(v, v).unwrap();
        let s = tape.mean(sq);
        tape.backward(s).unwrap();
        let g = tape.grad(v).unwrap();
        let want = [2.0 / 3.0, -4.0 / 3.0, 1.0 / 3.0];
        for (a, b) in g.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
