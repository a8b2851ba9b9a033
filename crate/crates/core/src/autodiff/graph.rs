//! Define-by-run computation graph.
//!
//! Every operation appends a node holding its output tensor and enough
//! metadata to replay the chain rule. The tape is rebuilt for each training
//! step; `backward` walks it once in reverse and leaves a gradient buffer on
//! every node, so unreachable parameters end up with zero gradient.

use super::kernels;
use super::tensor::Tensor;
use crate::error::{CoreError, Result};

/// Handle to a node in a [`Graph`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { x: Var, factor: f64 },
    Silu { x: Var },
    AddChannelBias { x: Var, bias: Var },
    ConcatChannels { a: Var, b: Var },
    Conv1d { x: Var, w: Var, b: Var, stride: usize, padding: usize },
    GroupNorm { x: Var, gamma: Var, beta: Var, groups: usize, stats: Vec<(f64, f64)> },
    Linear { x: Var, w: Var, b: Var },
    UpsampleNearest2 { x: Var },
    MseLoss { pred: Var, target: Var },
    Sum { x: Var },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// A recorded forward computation.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Shape of a `[batch, channels, length]` activation.
fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [b, c, l] => Ok((*b, *c, *l)),
        s => Err(CoreError::shape(format!("{what} must be [B,C,L], got {s:?}"))),
    }
}

fn dims2(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match t.shape() {
        [a, b] => Ok((*a, *b)),
        s => Err(CoreError::shape(format!("{what} must be rank 2, got {s:?}"))),
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Register an input or parameter tensor.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the given node; present after a backward pass.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(CoreError::shape(format!(
                "add: {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add { a, b }))
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(CoreError::shape(format!(
                "mul: {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mul { a, b }))
    }

    /// Multiply by a constant.
    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.value(x).map(|v| v * factor);
        self.push(value, Op::Scale { x, factor })
    }

    /// `x * sigmoid(x)`, elementwise.
    pub fn silu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v * sigmoid(v));
        self.push(value, Op::Silu { x })
    }

    /// Broadcast-add a per-(batch, channel) bias over the length axis.
    pub fn add_channel_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (b, c, l) = dims3(self.value(x), "add_channel_bias input")?;
        let (bb, bc) = dims2(self.value(bias), "add_channel_bias bias")?;
        if (bb, bc) != (b, c) {
            return Err(CoreError::shape(format!(
                "add_channel_bias: input [{b},{c},{l}] vs bias [{bb},{bc}]"
            )));
        }
        let xs = self.value(x).data();
        let bs = self.value(bias).data();
        let mut data = xs.to_vec();
        for bi in 0..b {
            for ci in 0..c {
                let add = bs[bi * c + ci];
                for v in &mut data[(bi * c + ci) * l..][..l] {
                    *v += add;
                }
            }
        }
        let value = Tensor::new(vec![b, c, l], data)?;
        Ok(self.push(value, Op::AddChannelBias { x, bias }))
    }

    /// Concatenate along the channel axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ba, ca, la) = dims3(self.value(a), "concat lhs")?;
        let (bb, cb, lb) = dims3(self.value(b), "concat rhs")?;
        if ba != bb || la != lb {
            return Err(CoreError::shape(format!(
                "concat_channels: [{ba},{ca},{la}] vs [{bb},{cb},{lb}]"
            )));
        }
        let mut data = Vec::with_capacity(ba * (ca + cb) * la);
        let da = self.value(a).data();
        let db = self.value(b).data();
        for bi in 0..ba {
            data.extend_from_slice(&da[bi * ca * la..][..ca * la]);
            data.extend_from_slice(&db[bi * cb * la..][..cb * la]);
        }
        let value = Tensor::new(vec![ba, ca + cb, la], data)?;
        Ok(self.push(value, Op::ConcatChannels { a, b }))
    }

    /// 1D cross-correlation with bias.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, stride: usize, padding: usize) -> Result<Var> {
        let (batch, c_in, l_in) = dims3(self.value(x), "conv1d input")?;
        let (c_out, w_cin, k) = dims3(self.value(w), "conv1d weight")?;
        if w_cin != c_in {
            return Err(CoreError::shape(format!(
                "conv1d: input has {c_in} channels but weight expects {w_cin}"
            )));
        }
        if self.value(b).shape() != [c_out] {
            return Err(CoreError::shape(format!(
                "conv1d: bias shape {:?} does not match {c_out} output channels",
                self.value(b).shape()
            )));
        }
        let l_out = kernels::conv1d_out_len(l_in, k, stride, padding).ok_or_else(|| {
            CoreError::shape(format!(
                "conv1d: no valid output positions for L={l_in}, K={k}, stride={stride}, padding={padding}"
            ))
        })?;
        let mut out = vec![0.0; batch * c_out * l_out];
        kernels::conv1d_forward(
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            &mut out,
            batch,
            c_in,
            l_in,
            c_out,
            k,
            stride,
            padding,
            l_out,
        );
        let value = Tensor::new(vec![batch, c_out, l_out], out)?;
        Ok(self.push(value, Op::Conv1d { x, w, b, stride, padding }))
    }

    /// Group normalization with per-channel affine.
    pub fn group_norm(&mut self, x: Var, gamma: Var, beta: Var, groups: usize, eps: f64) -> Result<Var> {
        let (batch, channels, length) = dims3(self.value(x), "group_norm input")?;
        if groups == 0 || channels % groups != 0 {
            return Err(CoreError::config(format!(
                "group_norm: {channels} channels not divisible by {groups} groups"
            )));
        }
        if eps <= 0.0 {
            return Err(CoreError::config("group_norm: eps must be positive".to_string()));
        }
        if self.value(gamma).shape() != [channels] || self.value(beta).shape() != [channels] {
            return Err(CoreError::shape(format!(
                "group_norm: affine parameters must have shape [{channels}]"
            )));
        }
        let mut out = vec![0.0; batch * channels * length];
        let stats = kernels::group_norm_forward(
            self.value(x).data(),
            self.value(gamma).data(),
            self.value(beta).data(),
            &mut out,
            batch,
            channels,
            length,
            groups,
            eps,
        );
        let value = Tensor::new(vec![batch, channels, length], out)?;
        Ok(self.push(value, Op::GroupNorm { x, gamma, beta, groups, stats }))
    }

    /// Affine map `x W^T + b` over a batch of rows.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (batch, n_in) = dims2(self.value(x), "linear input")?;
        let (n_out, w_in) = dims2(self.value(w), "linear weight")?;
        if w_in != n_in {
            return Err(CoreError::shape(format!(
                "linear: input width {n_in} vs weight width {w_in}"
            )));
        }
        if self.value(b).shape() != [n_out] {
            return Err(CoreError::shape(format!(
                "linear: bias shape {:?} does not match {n_out} outputs",
                self.value(b).shape()
            )));
        }
        let mut out = vec![0.0; batch * n_out];
        kernels::linear_forward(
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            &mut out,
            batch,
            n_in,
            n_out,
        );
        let value = Tensor::new(vec![batch, n_out], out)?;
        Ok(self.push(value, Op::Linear { x, w, b }))
    }

    /// Duplicate every sample along the length axis.
    pub fn upsample_nearest2(&mut self, x: Var) -> Result<Var> {
        let (b, c, l) = dims3(self.value(x), "upsample input")?;
        let xs = self.value(x).data();
        let mut data = Vec::with_capacity(b * c * 2 * l);
        for row in 0..b * c {
            for &v in &xs[row * l..][..l] {
                data.push(v);
                data.push(v);
            }
        }
        let value = Tensor::new(vec![b, c, 2 * l], data)?;
        Ok(self.push(value, Op::UpsampleNearest2 { x }))
    }

    /// Mean squared error over all elements; returns a scalar node.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (tp, tt) = (self.value(pred), self.value(target));
        if tp.shape() != tt.shape() {
            return Err(CoreError::shape(format!(
                "mse_loss: {:?} vs {:?}",
                tp.shape(),
                tt.shape()
            )));
        }
        let n = tp.numel() as f64;
        let mut acc = 0.0;
        for (p, t) in tp.data().iter().zip(tt.data()) {
            let d = p - t;
            acc += d * d;
        }
        let value = Tensor::scalar(acc / n);
        Ok(self.push(value, Op::MseLoss { pred, target }))
    }

    /// Sum of all elements; returns a scalar node.
    pub fn sum(&mut self, x: Var) -> Var {
        let mut acc = 0.0;
        for &v in self.value(x).data() {
            acc += v;
        }
        let value = Tensor::scalar(acc);
        self.push(value, Op::Sum { x })
    }

    /// Reverse pass from a scalar loss.
    ///
    /// Populates the gradient buffer of every node, visiting each node
    /// exactly once in reverse recording order.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(CoreError::shape(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|node| vec![0.0; node.value.numel()])
            .collect();
        grads[loss.0][0] = 1.0;

        for i in (0..n).rev() {
            // Detach this node's gradient so input accumulation can borrow freely.
            let gout = std::mem::take(&mut grads[i]);
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Add { a, b } => {
                    accumulate(&mut grads[a.0], &gout, 1.0);
                    accumulate(&mut grads[b.0], &gout, 1.0);
                }
                Op::Mul { a, b } => {
                    let (va, vb) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
                    for (i, &g) in gout.iter().enumerate() {
                        grads[a.0][i] += g * vb[i];
                    }
                    for (i, &g) in gout.iter().enumerate() {
                        grads[b.0][i] += g * va[i];
                    }
                }
                Op::Scale { x, factor } => {
                    accumulate(&mut grads[x.0], &gout, *factor);
                }
                Op::Silu { x } => {
                    let vx = self.nodes[x.0].value.data();
                    let gx = &mut grads[x.0];
                    for (i, &g) in gout.iter().enumerate() {
                        let s = sigmoid(vx[i]);
                        gx[i] += g * s * (1.0 + vx[i] * (1.0 - s));
                    }
                }
                Op::AddChannelBias { x, bias } => {
                    accumulate(&mut grads[x.0], &gout, 1.0);
                    let [b, c, l] = shape3(&self.nodes[x.0].value);
                    let gb = &mut grads[bias.0];
                    for bi in 0..b {
                        for ci in 0..c {
                            let mut s = 0.0;
                            for &g in &gout[(bi * c + ci) * l..][..l] {
                                s += g;
                            }
                            gb[bi * c + ci] += s;
                        }
                    }
                }
                Op::ConcatChannels { a, b } => {
                    let [ba, ca, la] = shape3(&self.nodes[a.0].value);
                    let [_, cb, _] = shape3(&self.nodes[b.0].value);
                    for bi in 0..ba {
                        let src = &gout[bi * (ca + cb) * la..][..(ca + cb) * la];
                        accumulate(&mut grads[a.0][bi * ca * la..][..ca * la], &src[..ca * la], 1.0);
                        accumulate(&mut grads[b.0][bi * cb * la..][..cb * la], &src[ca * la..], 1.0);
                    }
                }
                Op::Conv1d { x, w, b, stride, padding } => {
                    let [batch, c_in, l_in] = shape3(&self.nodes[x.0].value);
                    let [c_out, _, k] = shape3(&self.nodes[w.0].value);
                    let l_out = self.nodes[i].value.shape()[2];
                    // The three inputs of a conv are always distinct nodes.
                    let (gx, gw, gb) = three_mut(&mut grads, x.0, w.0, b.0);
                    kernels::conv1d_backward(
                        self.nodes[x.0].value.data(),
                        self.nodes[w.0].value.data(),
                        &gout,
                        gx,
                        gw,
                        gb,
                        batch,
                        c_in,
                        l_in,
                        c_out,
                        k,
                        *stride,
                        *padding,
                        l_out,
                    );
                }
                Op::GroupNorm { x, gamma, beta, groups, stats } => {
                    let [batch, channels, length] = shape3(&self.nodes[x.0].value);
                    let (gx, gg, gb) = three_mut(&mut grads, x.0, gamma.0, beta.0);
                    kernels::group_norm_backward(
                        self.nodes[x.0].value.data(),
                        self.nodes[gamma.0].value.data(),
                        stats,
                        &gout,
                        gx,
                        gg,
                        gb,
                        batch,
                        channels,
                        length,
                        *groups,
                    );
                }
                Op::Linear { x, w, b } => {
                    let [batch, n_in] = shape2(&self.nodes[x.0].value);
                    let n_out = self.nodes[w.0].value.shape()[0];
                    let (gx, gw, gb) = three_mut(&mut grads, x.0, w.0, b.0);
                    kernels::linear_backward(
                        self.nodes[x.0].value.data(),
                        self.nodes[w.0].value.data(),
                        &gout,
                        gx,
                        gw,
                        gb,
                        batch,
                        n_in,
                        n_out,
                    );
                }
                Op::UpsampleNearest2 { x } => {
                    let [b, c, l] = shape3(&self.nodes[x.0].value);
                    let gx = &mut grads[x.0];
                    for row in 0..b * c {
                        let src = &gout[row * 2 * l..][..2 * l];
                        let dst = &mut gx[row * l..][..l];
                        for (j, d) in dst.iter_mut().enumerate() {
                            *d += src[2 * j] + src[2 * j + 1];
                        }
                    }
                }
                Op::MseLoss { pred, target } => {
                    let g = gout[0];
                    let vp = self.nodes[pred.0].value.data();
                    let vt = self.nodes[target.0].value.data();
                    let scale = 2.0 * g / vp.len() as f64;
                    for (i, (p, t)) in vp.iter().zip(vt).enumerate() {
                        grads[pred.0][i] += scale * (p - t);
                    }
                    for (i, (p, t)) in vp.iter().zip(vt).enumerate() {
                        grads[target.0][i] -= scale * (p - t);
                    }
                }
                Op::Sum { x } => {
                    let g = gout[0];
                    for d in grads[x.0].iter_mut() {
                        *d += g;
                    }
                }
            }
            grads[i] = gout;
        }

        for (node, g) in self.nodes.iter_mut().zip(grads) {
            *node.value.grad_mut() = g;
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn accumulate(dst: &mut [f64], src: &[f64], factor: f64) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += factor * s;
    }
}

fn shape3(t: &Tensor) -> [usize; 3] {
    [t.shape()[0], t.shape()[1], t.shape()[2]]
}

fn shape2(t: &Tensor) -> [usize; 2] {
    [t.shape()[0], t.shape()[1]]
}

/// Disjoint mutable borrows of three gradient buffers.
fn three_mut(grads: &mut [Vec<f64>], a: usize, b: usize, c: usize) -> (&mut [f64], &mut [f64], &mut [f64]) {
    assert!(a != b && b != c && a != c, "conv/linear inputs must be distinct nodes");
    let ptr = grads.as_mut_ptr();
    // Safety: indices are pairwise distinct and in bounds.
    unsafe {
        (
            (*ptr.add(a)).as_mut_slice(),
            (*ptr.add(b)).as_mut_slice(),
            (*ptr.add(c)).as_mut_slice(),
        )
    }
}
