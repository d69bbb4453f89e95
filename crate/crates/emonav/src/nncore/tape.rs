use crate::{Error, Result};

use super::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorId(pub(crate) usize);

/// Padding mode for convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Output spatial size equals input size (odd kernels only).
    Same,
    /// No padding.
    Valid,
}

struct NodeData {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

enum Op {
    Leaf,
    Affine { x: usize, w: usize, b: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    MulScalar { a: usize, c: f64 },
    Relu { a: usize },
    Concat { parts: Vec<usize>, axis: usize },
    Reshape { a: usize },
    SoftmaxRows { a: usize },
    LogSoftmaxRows { a: usize },
    Select { a: usize, index: usize },
    SumAll { a: usize },
    MeanAll { a: usize },
    Mse { pred: usize, target: usize },
    LayerNorm { x: usize, gamma: usize, beta: usize, inv_std: Vec<f64>, mean: Vec<f64> },
    Attention { q: usize, k: usize, v: usize, heads: usize, weights: Vec<f64> },
    Conv2d { x: usize, kernels: usize, groups: usize, stride: usize, pad: (usize, usize) },
    ChannelBias { x: usize, b: usize },
    MaxPool2 { x: usize, argmax: Vec<usize> },
    BatchNorm2d { x: usize, gamma: usize, beta: usize, inv_std: Vec<f64>, mean: Vec<f64> },
    GlobalAvgPool { x: usize },
}

/// A forward-recording tape. Operations append nodes; [`Tape::backward`]
/// walks them in reverse accumulating exact gradients.
///
/// Every operation validates shapes and rejects non-finite outputs.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<NodeData>,
    ops: Vec<Op>,
}

pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * m..(i + 1) * m];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Numerically stable softmax of a non-empty slice.
pub fn softmax_vec(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::shape("softmax of empty input"));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("softmax input ({bad})")));
    }
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, id: TensorId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].data.len(), 1);
        self.nodes[id.0].data[0]
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, what: &str) -> Result<TensorId> {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{what} output ({bad})")));
        }
        self.nodes.push(NodeData { shape, data, grad: None });
        self.ops.push(op);
        Ok(TensorId(self.nodes.len() - 1))
    }

    /// Injects a tensor as a leaf node.
    pub fn leaf(&mut self, t: &Tensor) -> Result<TensorId> {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, "leaf")
    }

    /// Injects raw values as a leaf node.
    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape("constant shape/data mismatch"));
        }
        self.push(shape, data, Op::Leaf, "constant")
    }

    /// `y = xW + b` for `x:[n,i]`, `W:[i,o]`, `b:[o]`.
    pub fn affine(&mut self, x: TensorId, w: TensorId, b: TensorId) -> Result<TensorId> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 {
            return Err(Error::shape(format!(
                "affine expects x:[n,i] W:[i,o] b:[o], got {xs:?} {ws:?} {bs:?}"
            )));
        }
        let (n, i) = (xs[0], xs[1]);
        let (wi, o) = (ws[0], ws[1]);
        if i != wi || bs[0] != o {
            return Err(Error::shape(format!(
                "affine inner extents mismatch: x:[{n},{i}] W:[{wi},{o}] b:[{}]",
                bs[0]
            )));
        }
        let mut out = matmul(&self.nodes[x.0].data, &self.nodes[w.0].data, n, i, o);
        let bref = &self.nodes[b.0].data;
        for row in out.chunks_mut(o) {
            for (y, bv) in row.iter_mut().zip(bref) {
                *y += bv;
            }
        }
        self.push(vec![n, o], out, Op::Affine { x: x.0, w: w.0, b: b.0 }, "affine")
    }

    fn same_shape_binary(&self, a: TensorId, b: TensorId, what: &str) -> Result<(Vec<usize>, usize)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(format!("{what} shape mismatch: {sa:?} vs {sb:?}")));
        }
        Ok((sa.to_vec(), self.nodes[a.0].data.len()))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (shape, _) = self.same_shape_binary(a, b, "add")?;
        let data: Vec<f64> =
            self.nodes[a.0].data.iter().zip(&self.nodes[b.0].data).map(|(x, y)| x + y).collect();
        self.push(shape, data, Op::Add { a: a.0, b: b.0 }, "add")
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (shape, _) = self.same_shape_binary(a, b, "sub")?;
        let data: Vec<f64> =
            self.nodes[a.0].data.iter().zip(&self.nodes[b.0].data).map(|(x, y)| x - y).collect();
        self.push(shape, data, Op::Sub { a: a.0, b: b.0 }, "sub")
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (shape, _) = self.same_shape_binary(a, b, "mul")?;
        let data: Vec<f64> =
            self.nodes[a.0].data.iter().zip(&self.nodes[b.0].data).map(|(x, y)| x * y).collect();
        self.push(shape, data, Op::Mul { a: a.0, b: b.0 }, "mul")
    }

    pub fn mul_scalar(&mut self, a: TensorId, c: f64) -> Result<TensorId> {
        let shape = self.shape(a).to_vec();
        let data: Vec<f64> = self.nodes[a.0].data.iter().map(|x| x * c).collect();
        self.push(shape, data, Op::MulScalar { a: a.0, c }, "mul_scalar")
    }

    pub fn relu(&mut self, a: TensorId) -> Result<TensorId> {
        let shape = self.shape(a).to_vec();
        let data: Vec<f64> = self.nodes[a.0].data.iter().map(|&x| x.max(0.0)).collect();
        self.push(shape, data, Op::Relu { a: a.0 }, "relu")
    }

    /// Concatenates 2-D nodes along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[TensorId], axis: usize) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(Error::shape("concat of zero parts"));
        }
        if axis > 1 {
            return Err(Error::shape("concat axis must be 0 or 1"));
        }
        for &p in parts {
            if self.shape(p).len() != 2 {
                return Err(Error::shape("concat expects 2-D nodes"));
            }
        }
        let first = self.shape(parts[0]).to_vec();
        let fixed = 1 - axis;
        for &p in parts {
            if self.shape(p)[fixed] != first[fixed] {
                return Err(Error::shape(format!(
                    "concat mismatch on axis {fixed}: {:?} vs {:?}",
                    self.shape(p),
                    first
                )));
            }
        }
        let total: usize = parts.iter().map(|&p| self.shape(p)[axis]).sum();
        let (rows, cols) = if axis == 0 { (total, first[1]) } else { (first[0], total) };
        let mut data = vec![0.0; rows * cols];
        if axis == 0 {
            let mut at = 0;
            for &p in parts {
                let n = self.nodes[p.0].data.len();
                data[at..at + n].copy_from_slice(&self.nodes[p.0].data);
                at += n;
            }
        } else {
            let mut col_at = 0;
            for &p in parts {
                let pc = self.shape(p)[1];
                for r in 0..rows {
                    let src = &self.nodes[p.0].data[r * pc..(r + 1) * pc];
                    data[r * cols + col_at..r * cols + col_at + pc].copy_from_slice(src);
                }
                col_at += pc;
            }
        }
        let op = Op::Concat { parts: parts.iter().map(|p| p.0).collect(), axis };
        self.push(vec![rows, cols], data, op, "concat")
    }

    pub fn reshape(&mut self, a: TensorId, shape: Vec<usize>) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if numel != self.nodes[a.0].data.len() {
            return Err(Error::shape(format!(
                "reshape to {shape:?} from {:?}",
                self.shape(a)
            )));
        }
        let data = self.nodes[a.0].data.clone();
        self.push(shape, data, Op::Reshape { a: a.0 }, "reshape")
    }

    /// Row-wise numerically stable softmax of a 2-D node.
    pub fn softmax_rows(&mut self, a: TensorId) -> Result<TensorId> {
        let shape = self.shape(a).to_vec();
        if shape.len() != 2 {
            return Err(Error::shape("softmax_rows expects a 2-D node"));
        }
        let cols = shape[1];
        let mut data = Vec::with_capacity(self.nodes[a.0].data.len());
        for row in self.nodes[a.0].data.chunks(cols) {
            data.extend(softmax_vec(row)?);
        }
        self.push(shape, data, Op::SoftmaxRows { a: a.0 }, "softmax_rows")
    }

    /// Row-wise log-softmax of a 2-D node.
    pub fn log_softmax_rows(&mut self, a: TensorId) -> Result<TensorId> {
        let shape = self.shape(a).to_vec();
        if shape.len() != 2 {
            return Err(Error::shape("log_softmax_rows expects a 2-D node"));
        }
        let cols = shape[1];
        let mut data = Vec::with_capacity(self.nodes[a.0].data.len());
        for row in self.nodes[a.0].data.chunks(cols) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
            data.extend(row.iter().map(|&v| v - lse));
        }
        self.push(shape, data, Op::LogSoftmaxRows { a: a.0 }, "log_softmax_rows")
    }

    /// Extracts one element (by flat index) as a scalar node.
    pub fn select(&mut self, a: TensorId, index: usize) -> Result<TensorId> {
        if index >= self.nodes[a.0].data.len() {
            return Err(Error::shape(format!(
                "select index {index} out of range ({} elements)",
                self.nodes[a.0].data.len()
            )));
        }
        let v = self.nodes[a.0].data[index];
        self.push(vec![1], vec![v], Op::Select { a: a.0, index }, "select")
    }

    pub fn sum_all(&mut self, a: TensorId) -> Result<TensorId> {
        let s: f64 = self.nodes[a.0].data.iter().sum();
        self.push(vec![1], vec![s], Op::SumAll { a: a.0 }, "sum_all")
    }

    pub fn mean_all(&mut self, a: TensorId) -> Result<TensorId> {
        let n = self.nodes[a.0].data.len() as f64;
        let s: f64 = self.nodes[a.0].data.iter().sum::<f64>() / n;
        self.push(vec![1], vec![s], Op::MeanAll { a: a.0 }, "mean_all")
    }

    /// Mean squared error between two same-shape nodes.
    pub fn mse(&mut self, pred: TensorId, target: TensorId) -> Result<TensorId> {
        let (_, n) = self.same_shape_binary(pred, target, "mse")?;
        let s: f64 = self.nodes[pred.0]
            .data
            .iter()
            .zip(&self.nodes[target.0].data)
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        self.push(vec![1], vec![s / n as f64], Op::Mse { pred: pred.0, target: target.0 }, "mse")
    }

    /// Row-wise layer normalization with learnable scale and shift.
    pub fn layer_norm(&mut self, x: TensorId, gamma: TensorId, beta: TensorId, eps: f64) -> Result<TensorId> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 2 {
            return Err(Error::shape("layer_norm expects a 2-D node"));
        }
        let d = shape[1];
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(Error::shape("layer_norm gamma/beta must be [d]"));
        }
        let rows = shape[0];
        let mut data = vec![0.0; rows * d];
        let mut means = vec![0.0; rows];
        let mut inv_stds = vec![0.0; rows];
        for r in 0..rows {
            let row = &self.nodes[x.0].data[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            means[r] = mean;
            inv_stds[r] = inv_std;
            for j in 0..d {
                let xh = (row[j] - mean) * inv_std;
                data[r * d + j] = xh * self.nodes[gamma.0].data[j] + self.nodes[beta.0].data[j];
            }
        }
        let op = Op::LayerNorm { x: x.0, gamma: gamma.0, beta: beta.0, inv_std: inv_stds, mean: means };
        self.push(shape, data, op, "layer_norm")
    }

    /// Multi-head scaled dot-product attention.
    ///
    /// `q:[nq,d]`, `k,v:[nk,d]`; `heads` must divide `d`. Per head:
    /// `softmax(QKᵀ/√dh)·V`, heads concatenated. With `causal` set, query
    /// `i` attends only to keys `j ≤ i` (self-attention layouts).
    pub fn scaled_dot_attention(
        &mut self,
        q: TensorId,
        k: TensorId,
        v: TensorId,
        heads: usize,
        causal: bool,
    ) -> Result<TensorId> {
        let (qs, ks, vs) = (self.shape(q).to_vec(), self.shape(k).to_vec(), self.shape(v).to_vec());
        if qs.len() != 2 || ks.len() != 2 || vs.len() != 2 {
            return Err(Error::shape("attention expects 2-D q/k/v"));
        }
        let d = qs[1];
        if ks[1] != d || vs[1] != d {
            return Err(Error::shape(format!(
                "attention dim mismatch: q:[..,{d}] k:[..,{}] v:[..,{}]",
                ks[1], vs[1]
            )));
        }
        if ks[0] != vs[0] {
            return Err(Error::shape("attention key/value row counts differ"));
        }
        if heads == 0 || d % heads != 0 {
            return Err(Error::shape(format!("heads {heads} must divide model dim {d}")));
        }
        if causal && qs[0] != ks[0] {
            return Err(Error::shape("causal attention requires nq == nk"));
        }
        let (nq, nk, dh) = (qs[0], ks[0], d / heads);
        let scale = 1.0 / (dh as f64).sqrt();
        let qd = &self.nodes[q.0].data;
        let kd = &self.nodes[k.0].data;
        let vd = &self.nodes[v.0].data;
        let mut weights = vec![0.0; heads * nq * nk];
        let mut out = vec![0.0; nq * d];
        for h in 0..heads {
            let off = h * dh;
            for i in 0..nq {
                let limit = if causal { i + 1 } else { nk };
                let qrow = &qd[i * d + off..i * d + off + dh];
                let mut logits = vec![0.0; limit];
                for (j, lg) in logits.iter_mut().enumerate() {
                    let krow = &kd[j * d + off..j * d + off + dh];
                    *lg = scale * qrow.iter().zip(krow).map(|(a, b)| a * b).sum::<f64>();
                }
                let w = softmax_vec(&logits)?;
                let wrow = &mut weights[(h * nq + i) * nk..(h * nq + i) * nk + nk];
                wrow[..limit].copy_from_slice(&w);
                let orow = &mut out[i * d + off..i * d + off + dh];
                for (j, &wij) in w.iter().enumerate() {
                    let vrow = &vd[j * d + off..j * d + off + dh];
                    for (o, &vv) in orow.iter_mut().zip(vrow) {
                        *o += wij * vv;
                    }
                }
            }
        }
        let op = Op::Attention { q: q.0, k: k.0, v: v.0, heads, weights };
        self.push(vec![nq, d], out, op, "attention")
    }

    /// Grouped 2-D cross-correlation.
    ///
    /// `x:[c_in,h,w]`, `kernels:[c_out, c_in/groups, kh, kw]`; odd kernel
    /// extents when `Same` padding is requested.
    pub fn grouped_conv2d(
        &mut self,
        x: TensorId,
        kernels: TensorId,
        groups: usize,
        stride: usize,
        padding: Padding,
    ) -> Result<TensorId> {
        let xs = self.shape(x).to_vec();
        let ks = self.shape(kernels).to_vec();
        if xs.len() != 3 || ks.len() != 4 {
            return Err(Error::shape(format!(
                "conv2d expects x:[c,h,w] kernels:[co,cig,kh,kw], got {xs:?} {ks:?}"
            )));
        }
        let (ci, h, w) = (xs[0], xs[1], xs[2]);
        let (co, cig, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
        if groups == 0 || ci % groups != 0 || co % groups != 0 {
            return Err(Error::config(format!(
                "conv2d channels must be divisible by groups: c_in={ci} c_out={co} groups={groups}"
            )));
        }
        if cig != ci / groups {
            return Err(Error::shape(format!(
                "conv2d kernel input channels {cig} != c_in/groups = {}",
                ci / groups
            )));
        }
        if stride == 0 {
            return Err(Error::config("conv2d stride must be positive"));
        }
        let pad = match padding {
            Padding::Valid => (0, 0),
            Padding::Same => {
                if kh % 2 == 0 || kw % 2 == 0 {
                    return Err(Error::config("same padding requires odd kernel extents"));
                }
                ((kh - 1) / 2, (kw - 1) / 2)
            }
        };
        if h + 2 * pad.0 < kh || w + 2 * pad.1 < kw {
            return Err(Error::shape("conv2d kernel larger than padded input"));
        }
        let oh = (h + 2 * pad.0 - kh) / stride + 1;
        let ow = (w + 2 * pad.1 - kw) / stride + 1;
        let cog = co / groups;
        let xd = &self.nodes[x.0].data;
        let kd = &self.nodes[kernels.0].data;
        let mut out = vec![0.0; co * oh * ow];
        for g in 0..groups {
            for ocg in 0..cog {
                let oc = g * cog + ocg;
                for icg in 0..cig {
                    let ic = g * cig + icg;
                    let kbase = ((oc * cig) + icg) * kh * kw;
                    for oy in 0..oh {
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - pad.0 as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = (ic * h + iy as usize) * w;
                            let krow = kbase + ky * kw;
                            let orow = (oc * oh + oy) * ow;
                            for ox in 0..ow {
                                let mut acc = 0.0;
                                for kx in 0..kw {
                                    let ix = (ox * stride + kx) as isize - pad.1 as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    acc += xd[xrow + ix as usize] * kd[krow + kx];
                                }
                                out[orow + ox] += acc;
                            }
                        }
                    }
                }
            }
        }
        let op = Op::Conv2d { x: x.0, kernels: kernels.0, groups, stride, pad };
        self.push(vec![co, oh, ow], out, op, "conv2d")
    }

    /// Adds a per-channel bias to a `[c,h,w]` node.
    pub fn channel_bias(&mut self, x: TensorId, b: TensorId) -> Result<TensorId> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || self.shape(b) != [xs[0]] {
            return Err(Error::shape("channel_bias expects x:[c,h,w], b:[c]"));
        }
        let hw = xs[1] * xs[2];
        let mut data = self.nodes[x.0].data.clone();
        for c in 0..xs[0] {
            let bv = self.nodes[b.0].data[c];
            for v in &mut data[c * hw..(c + 1) * hw] {
                *v += bv;
            }
        }
        self.push(xs, data, Op::ChannelBias { x: x.0, b: b.0 }, "channel_bias")
    }

    /// 2×2 max pooling with stride 2 (trailing odd row/column dropped).
    pub fn max_pool2(&mut self, x: TensorId) -> Result<TensorId> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 {
            return Err(Error::shape("max_pool2 expects [c,h,w]"));
        }
        let (c, h, w) = (xs[0], xs[1], xs[2]);
        let (oh, ow) = (h / 2, w / 2);
        if oh == 0 || ow == 0 {
            return Err(Error::shape("max_pool2 input smaller than window"));
        }
        let xd = &self.nodes[x.0].data;
        let mut out = vec![0.0; c * oh * ow];
        let mut argmax = vec![0usize; c * oh * ow];
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let idx = (ch * h + oy * 2 + dy) * w + ox * 2 + dx;
                            if xd[idx] > best {
                                best = xd[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = (ch * oh + oy) * ow + ox;
                    out[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
        self.push(vec![c, oh, ow], out, Op::MaxPool2 { x: x.0, argmax }, "max_pool2")
    }

    /// Per-channel normalization over the spatial extent of a `[c,h,w]`
    /// node with learnable scale/shift. Statistics always come from the
    /// current input (single-sample batches), so evaluation is
    /// deterministic and stateless.
    pub fn batch_norm2d(&mut self, x: TensorId, gamma: TensorId, beta: TensorId, eps: f64) -> Result<TensorId> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 {
            return Err(Error::shape("batch_norm2d expects [c,h,w]"));
        }
        let (c, h, w) = (xs[0], xs[1], xs[2]);
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(Error::shape("batch_norm2d gamma/beta must be [c]"));
        }
        let hw = h * w;
        let xd = &self.nodes[x.0].data;
        let mut data = vec![0.0; c * hw];
        let mut means = vec![0.0; c];
        let mut inv_stds = vec![0.0; c];
        for ch in 0..c {
            let slice = &xd[ch * hw..(ch + 1) * hw];
            let mean = slice.iter().sum::<f64>() / hw as f64;
            let var = slice.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / hw as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            means[ch] = mean;
            inv_stds[ch] = inv_std;
            let (g, b) = (self.nodes[gamma.0].data[ch], self.nodes[beta.0].data[ch]);
            for (o, &v) in data[ch * hw..(ch + 1) * hw].iter_mut().zip(slice) {
                *o = (v - mean) * inv_std * g + b;
            }
        }
        let op = Op::BatchNorm2d { x: x.0, gamma: gamma.0, beta: beta.0, inv_std: inv_stds, mean: means };
        self.push(xs, data, op, "batch_norm2d")
    }

    /// Mean over the spatial extent of each channel: `[c,h,w] → [1,c]`.
    pub fn global_avg_pool(&mut self, x: TensorId) -> Result<TensorId> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 {
            return Err(Error::shape("global_avg_pool expects [c,h,w]"));
        }
        let (c, hw) = (xs[0], xs[1] * xs[2]);
        let xd = &self.nodes[x.0].data;
        let data: Vec<f64> =
            (0..c).map(|ch| xd[ch * hw..(ch + 1) * hw].iter().sum::<f64>() / hw as f64).collect();
        self.push(vec![1, c], data, Op::GlobalAvgPool { x: x.0 }, "global_avg_pool")
    }

    /// Reverse-mode sweep from a scalar loss node.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.nodes[loss.0].data.len() != 1 {
            return Err(Error::shape("backward requires a scalar loss node"));
        }
        let Tape { nodes, ops } = self;
        nodes[loss.0].grad = Some(vec![1.0]);
        for i in (0..nodes.len()).rev() {
            if nodes[i].grad.is_none() {
                continue;
            }
            let grad = nodes[i].grad.clone().unwrap();
            match &ops[i] {
                Op::Leaf => {}
                Op::Affine { x, w, b } => {
                    let (n, ncols) = (nodes[*x].shape[0], nodes[*x].shape[1]);
                    let o = nodes[*w].shape[1];
                    // dx = dy Wᵀ
                    let wd = &nodes[*w].data;
                    let mut dx = vec![0.0; n * ncols];
                    for r in 0..n {
                        for j in 0..o {
                            let g = grad[r * o + j];
                            if g == 0.0 {
                                continue;
                            }
                            for p in 0..ncols {
                                dx[r * ncols + p] += g * wd[p * o + j];
                            }
                        }
                    }
                    // dW = xᵀ dy
                    let xd = &nodes[*x].data;
                    let mut dw = vec![0.0; ncols * o];
                    for r in 0..n {
                        for p in 0..ncols {
                            let xv = xd[r * ncols + p];
                            if xv == 0.0 {
                                continue;
                            }
                            for j in 0..o {
                                dw[p * o + j] += xv * grad[r * o + j];
                            }
                        }
                    }
                    // db = column sums of dy
                    let mut db = vec![0.0; o];
                    for r in 0..n {
                        for j in 0..o {
                            db[j] += grad[r * o + j];
                        }
                    }
                    acc(nodes, *x, &dx);
                    acc(nodes, *w, &dw);
                    acc(nodes, *b, &db);
                }
                Op::Add { a, b } => {
                    acc(nodes, *a, &grad);
                    acc(nodes, *b, &grad);
                }
                Op::Sub { a, b } => {
                    acc(nodes, *a, &grad);
                    let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
                    acc(nodes, *b, &neg);
                }
                Op::Mul { a, b } => {
                    let da: Vec<f64> = grad.iter().zip(&nodes[*b].data).map(|(g, v)| g * v).collect();
                    let db: Vec<f64> = grad.iter().zip(&nodes[*a].data).map(|(g, v)| g * v).collect();
                    acc(nodes, *a, &da);
                    acc(nodes, *b, &db);
                }
                Op::MulScalar { a, c } => {
                    let da: Vec<f64> = grad.iter().map(|g| g * c).collect();
                    acc(nodes, *a, &da);
                }
                Op::Relu { a } => {
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(&nodes[*a].data)
                        .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                        .collect();
                    acc(nodes, *a, &da);
                }
                Op::Concat { parts, axis } => {
                    let parts = parts.clone();
                    if *axis == 0 {
                        let mut at = 0;
                        for p in parts {
                            let n = nodes[p].data.len();
                            let slice = grad[at..at + n].to_vec();
                            acc(nodes, p, &slice);
                            at += n;
                        }
                    } else {
                        let cols = nodes[i].shape[1];
                        let rows = nodes[i].shape[0];
                        let mut col_at = 0;
                        for p in parts {
                            let pc = nodes[p].shape[1];
                            let mut dp = vec![0.0; rows * pc];
                            for r in 0..rows {
                                dp[r * pc..(r + 1) * pc]
                                    .copy_from_slice(&grad[r * cols + col_at..r * cols + col_at + pc]);
                            }
                            acc(nodes, p, &dp);
                            col_at += pc;
                        }
                    }
                }
                Op::Reshape { a } => {
                    acc(nodes, *a, &grad);
                }
                Op::SoftmaxRows { a } => {
                    let cols = nodes[i].shape[1];
                    let s = &nodes[i].data;
                    let mut da = vec![0.0; s.len()];
                    for (r, (srow, grow)) in s.chunks(cols).zip(grad.chunks(cols)).enumerate() {
                        let dot: f64 = srow.iter().zip(grow).map(|(sv, gv)| sv * gv).sum();
                        for j in 0..cols {
                            da[r * cols + j] = srow[j] * (grow[j] - dot);
                        }
                    }
                    acc(nodes, *a, &da);
                }
                Op::LogSoftmaxRows { a } => {
                    let cols = nodes[i].shape[1];
                    let y = &nodes[i].data;
                    let mut da = vec![0.0; y.len()];
                    for (r, (yrow, grow)) in y.chunks(cols).zip(grad.chunks(cols)).enumerate() {
                        let gsum: f64 = grow.iter().sum();
                        for j in 0..cols {
                            da[r * cols + j] = grow[j] - yrow[j].exp() * gsum;
                        }
                    }
                    acc(nodes, *a, &da);
                }
                Op::Select { a, index } => {
                    let mut da = vec![0.0; nodes[*a].data.len()];
                    da[*index] = grad[0];
                    acc(nodes, *a, &da);
                }
                Op::SumAll { a } => {
                    let da = vec![grad[0]; nodes[*a].data.len()];
                    acc(nodes, *a, &da);
                }
                Op::MeanAll { a } => {
                    let n = nodes[*a].data.len();
                    let da = vec![grad[0] / n as f64; n];
                    acc(nodes, *a, &da);
                }
                Op::Mse { pred, target } => {
                    let n = nodes[*pred].data.len() as f64;
                    let coef = 2.0 * grad[0] / n;
                    let dp: Vec<f64> = nodes[*pred]
                        .data
                        .iter()
                        .zip(&nodes[*target].data)
                        .map(|(p, t)| coef * (p - t))
                        .collect();
                    let dt: Vec<f64> = dp.iter().map(|v| -v).collect();
                    acc(nodes, *pred, &dp);
                    acc(nodes, *target, &dt);
                }
                Op::LayerNorm { x, gamma, beta, inv_std, mean } => {
                    let (x, gamma, beta) = (*x, *gamma, *beta);
                    let d = nodes[x].shape[1];
                    let rows = nodes[x].shape[0];
                    let mut dx = vec![0.0; rows * d];
                    let mut dg = vec![0.0; d];
                    let mut db = vec![0.0; d];
                    for r in 0..rows {
                        let xrow = &nodes[x].data[r * d..(r + 1) * d];
                        let grow = &grad[r * d..(r + 1) * d];
                        let istd = inv_std[r];
                        let m = mean[r];
                        let xh: Vec<f64> = xrow.iter().map(|&v| (v - m) * istd).collect();
                        let mut dxh = vec![0.0; d];
                        for j in 0..d {
                            dg[j] += grow[j] * xh[j];
                            db[j] += grow[j];
                            dxh[j] = grow[j] * nodes[gamma].data[j];
                        }
                        let mean_dxh: f64 = dxh.iter().sum::<f64>() / d as f64;
                        let mean_dxh_xh: f64 =
                            dxh.iter().zip(&xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                        for j in 0..d {
                            dx[r * d + j] = istd * (dxh[j] - mean_dxh - xh[j] * mean_dxh_xh);
                        }
                    }
                    acc(nodes, x, &dx);
                    acc(nodes, gamma, &dg);
                    acc(nodes, beta, &db);
                }
                Op::Attention { q, k, v, heads, weights } => {
                    let (q, k, v, heads) = (*q, *k, *v, *heads);
                    let d = nodes[q].shape[1];
                    let nq = nodes[q].shape[0];
                    let nk = nodes[k].shape[0];
                    let dh = d / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut dq = vec![0.0; nq * d];
                    let mut dk = vec![0.0; nk * d];
                    let mut dv = vec![0.0; nk * d];
                    for h in 0..heads {
                        let off = h * dh;
                        for iq in 0..nq {
                            let wrow = &weights[(h * nq + iq) * nk..(h * nq + iq + 1) * nk];
                            let grow = &grad[iq * d + off..iq * d + off + dh];
                            // dV and dW
                            let mut dw = vec![0.0; nk];
                            for j in 0..nk {
                                let wij = wrow[j];
                                let vrow = &nodes[v].data[j * d + off..j * d + off + dh];
                                let mut dot = 0.0;
                                for t in 0..dh {
                                    dv[j * d + off + t] += wij * grow[t];
                                    dot += grow[t] * vrow[t];
                                }
                                dw[j] = dot;
                            }
                            // softmax backward over the row
                            let dot: f64 = dw.iter().zip(wrow).map(|(a, b)| a * b).sum();
                            for j in 0..nk {
                                let dl = wrow[j] * (dw[j] - dot);
                                if dl == 0.0 {
                                    continue;
                                }
                                let krow = &nodes[k].data[j * d + off..j * d + off + dh];
                                let qrow = &nodes[q].data[iq * d + off..iq * d + off + dh];
                                for t in 0..dh {
                                    dq[iq * d + off + t] += scale * dl * krow[t];
                                    dk[j * d + off + t] += scale * dl * qrow[t];
                                }
                            }
                        }
                    }
                    acc(nodes, q, &dq);
                    acc(nodes, k, &dk);
                    acc(nodes, v, &dv);
                }
                Op::Conv2d { x, kernels, groups, stride, pad } => {
                    let (x, kernels, groups, stride, pad) = (*x, *kernels, *groups, *stride, *pad);
                    let (ci, h, w) = (nodes[x].shape[0], nodes[x].shape[1], nodes[x].shape[2]);
                    let ks = nodes[kernels].shape.clone();
                    let (co, cig, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
                    let (oh, ow) = (nodes[i].shape[1], nodes[i].shape[2]);
                    let cog = co / groups;
                    let mut dx = vec![0.0; ci * h * w];
                    let mut dkern = vec![0.0; co * cig * kh * kw];
                    for g in 0..groups {
                        for ocg in 0..cog {
                            let oc = g * cog + ocg;
                            for icg in 0..cig {
                                let ic = g * cig + icg;
                                let kbase = ((oc * cig) + icg) * kh * kw;
                                for oy in 0..oh {
                                    for ky in 0..kh {
                                        let iy = (oy * stride + ky) as isize - pad.0 as isize;
                                        if iy < 0 || iy >= h as isize {
                                            continue;
                                        }
                                        let xrow = (ic * h + iy as usize) * w;
                                        let krow = kbase + ky * kw;
                                        let orow = (oc * oh + oy) * ow;
                                        for ox in 0..ow {
                                            let g_out = grad[orow + ox];
                                            if g_out == 0.0 {
                                                continue;
                                            }
                                            for kx in 0..kw {
                                                let ix = (ox * stride + kx) as isize - pad.1 as isize;
                                                if ix < 0 || ix >= w as isize {
                                                    continue;
                                                }
                                                dx[xrow + ix as usize] +=
                                                    nodes[kernels].data[krow + kx] * g_out;
                                                dkern[krow + kx] +=
                                                    nodes[x].data[xrow + ix as usize] * g_out;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    acc(nodes, x, &dx);
                    acc(nodes, kernels, &dkern);
                }
                Op::ChannelBias { x, b } => {
                    let (c, hw) = (nodes[*x].shape[0], nodes[*x].shape[1] * nodes[*x].shape[2]);
                    let mut db = vec![0.0; c];
                    for ch in 0..c {
                        db[ch] = grad[ch * hw..(ch + 1) * hw].iter().sum();
                    }
                    acc(nodes, *x, &grad);
                    acc(nodes, *b, &db);
                }
                Op::MaxPool2 { x, argmax } => {
                    let mut dx = vec![0.0; nodes[*x].data.len()];
                    for (o, &src) in argmax.iter().enumerate() {
                        dx[src] += grad[o];
                    }
                    acc(nodes, *x, &dx);
                }
                Op::BatchNorm2d { x, gamma, beta, inv_std, mean } => {
                    let (x, gamma, beta) = (*x, *gamma, *beta);
                    let (c, hw) = (nodes[x].shape[0], nodes[x].shape[1] * nodes[x].shape[2]);
                    let mut dx = vec![0.0; c * hw];
                    let mut dg = vec![0.0; c];
                    let mut db = vec![0.0; c];
                    for ch in 0..c {
                        let xs = &nodes[x].data[ch * hw..(ch + 1) * hw];
                        let gs = &grad[ch * hw..(ch + 1) * hw];
                        let istd = inv_std[ch];
                        let m = mean[ch];
                        let gm = nodes[gamma].data[ch];
                        let xh: Vec<f64> = xs.iter().map(|&v| (v - m) * istd).collect();
                        let mut sum_g = 0.0;
                        let mut sum_gxh = 0.0;
                        for j in 0..hw {
                            sum_g += gs[j];
                            sum_gxh += gs[j] * xh[j];
                        }
                        dg[ch] = sum_gxh;
                        db[ch] = sum_g;
                        let n = hw as f64;
                        for j in 0..hw {
                            dx[ch * hw + j] = gm * istd * (gs[j] - sum_g / n - xh[j] * sum_gxh / n);
                        }
                    }
                    acc(nodes, x, &dx);
                    acc(nodes, gamma, &dg);
                    acc(nodes, beta, &db);
                }
                Op::GlobalAvgPool { x } => {
                    let (c, hw) = (nodes[*x].shape[0], nodes[*x].shape[1] * nodes[*x].shape[2]);
                    let mut dx = vec![0.0; c * hw];
                    for ch in 0..c {
                        let g = grad[ch] / hw as f64;
                        for v in &mut dx[ch * hw..(ch + 1) * hw] {
                            *v = g;
                        }
                    }
                    acc(nodes, *x, &dx);
                }
            }
        }
        Ok(())
    }
}

fn acc(nodes: &mut [NodeData], id: usize, src: &[f64]) {
    let g = nodes[id].grad.get_or_insert_with(|| vec![0.0; src.len()]);
    for (a, b) in g.iter_mut().zip(src) {
        *a += b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn leaf2(tape: &mut Tape, rows: usize, cols: usize, data: Vec<f64>) -> TensorId {
        tape.constant(vec![rows, cols], data).unwrap()
    }

    #[test]
    fn affine_identity() {
        let mut t = Tape::new();
        let x = leaf2(&mut t, 1, 2, vec![1.0, 2.0]);
        let w = leaf2(&mut t, 2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let b = t.constant(vec![2], vec![0.0, 0.0]).unwrap();
        let y = t.affine(x, w, b).unwrap();
        assert_eq!(t.value(y), &[1.0, 2.0]);
    }

    #[test]
    fn affine_hand_case() {
        let mut t = Tape::new();
        let x = leaf2(&mut t, 1, 2, vec![1.0, 0.0]);
        let w = leaf2(&mut t, 2, 2, vec![2.0, 0.0, 0.0, 3.0]);
        let b = t.constant(vec![2], vec![1.0, 1.0]).unwrap();
        let y = t.affine(x, w, b).unwrap();
        assert_eq!(t.value(y), &[3.0, 1.0]);
    }

    #[test]
    fn affine_shape_mismatch_is_error() {
        let mut t = Tape::new();
        let x = leaf2(&mut t, 1, 3, vec![1.0; 3]);
        let w = leaf2(&mut t, 2, 2, vec![1.0; 4]);
        let b = t.constant(vec![2], vec![0.0; 2]).unwrap();
        assert!(matches!(t.affine(x, w, b), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn softmax_symmetry_and_hand_case() {
        let s = softmax_vec(&[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(s[0], 0.5, epsilon = 1e-15);
        let s = softmax_vec(&[1f64.ln(), 2f64.ln(), 7f64.ln()]).unwrap();
        assert_abs_diff_eq!(s[0], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(s[2], 0.7, epsilon = 1e-12);
        assert!(softmax_vec(&[]).is_err());
    }

    #[test]
    fn softmax_shift_invariance_and_normalization() {
        let x = [0.3, -1.2, 4.5, 2.0, -0.7];
        let a = softmax_vec(&x).unwrap();
        let b = softmax_vec(&x.iter().map(|v| v + 123.456).collect::<Vec<_>>()).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(a.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(a.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn mse_hand_cases() {
        let mut t = Tape::new();
        let p = leaf2(&mut t, 1, 2, vec![1.0, 1.0]);
        let q = leaf2(&mut t, 1, 2, vec![0.0, 3.0]);
        let l = t.mse(p, q).unwrap();
        assert_abs_diff_eq!(t.scalar(l), 2.5, epsilon = 1e-15);

        let a = leaf2(&mut t, 1, 1, vec![0.0]);
        let b = leaf2(&mut t, 1, 1, vec![2.0]);
        let l2 = t.mse(a, b).unwrap();
        assert_abs_diff_eq!(t.scalar(l2), 4.0, epsilon = 1e-15);

        let same = t.mse(p, p).unwrap();
        assert_eq!(t.scalar(same), 0.0);
    }

    #[test]
    fn mse_backward_formula() {
        let mut t = Tape::new();
        let p = leaf2(&mut t, 1, 2, vec![1.0, 1.0]);
        let q = leaf2(&mut t, 1, 2, vec![0.0, 3.0]);
        let l = t.mse(p, q).unwrap();
        t.backward(l).unwrap();
        // d/dp = 2(p - t)/N
        assert_eq!(t.grad(p).unwrap(), &[1.0, -2.0]);
    }

    #[test]
    fn attention_uniform_when_keys_identical() {
        let mut t = Tape::new();
        let q = leaf2(&mut t, 1, 2, vec![0.3, -0.4]);
        let k = leaf2(&mut t, 3, 2, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let v = leaf2(&mut t, 3, 2, vec![0.0, 0.0, 3.0, 6.0, 6.0, 0.0]);
        let o = t.scaled_dot_attention(q, k, v, 1, false).unwrap();
        assert_abs_diff_eq!(t.value(o)[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.value(o)[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn attention_single_key_returns_value() {
        let mut t = Tape::new();
        let q = leaf2(&mut t, 1, 2, vec![5.0, -2.0]);
        let k = leaf2(&mut t, 1, 2, vec![0.1, 0.2]);
        let v = leaf2(&mut t, 1, 2, vec![7.0, -3.0]);
        let o = t.scaled_dot_attention(q, k, v, 1, false).unwrap();
        assert_abs_diff_eq!(t.value(o)[0], 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.value(o)[1], -3.0, epsilon = 1e-12);
    }

    #[test]
    fn attention_two_key_softmax_weights() {
        // One head, dh = 1, scale = 1. Keys chosen so logits are (0, ln 3):
        // weights must be (0.25, 0.75).
        let mut t = Tape::new();
        let q = t.constant(vec![1, 1], vec![1.0]).unwrap();
        let k = t.constant(vec![2, 1], vec![0.0, 3f64.ln()]).unwrap();
        let v = t.constant(vec![2, 1], vec![10.0, 20.0]).unwrap();
        let o = t.scaled_dot_attention(q, k, v, 1, false).unwrap();
        assert_abs_diff_eq!(t.value(o)[0], 0.25 * 10.0 + 0.75 * 20.0, epsilon = 1e-12);
    }

    #[test]
    fn attention_rejects_bad_heads() {
        let mut t = Tape::new();
        let q = leaf2(&mut t, 1, 3, vec![0.0; 3]);
        let k = leaf2(&mut t, 2, 3, vec![0.0; 6]);
        let v = leaf2(&mut t, 2, 3, vec![0.0; 6]);
        assert!(t.scaled_dot_attention(q, k, v, 2, false).is_err());
    }

    #[test]
    fn causal_attention_ignores_future() {
        let mut t = Tape::new();
        let q = leaf2(&mut t, 2, 1, vec![1.0, 1.0]);
        let k = leaf2(&mut t, 2, 1, vec![1.0, 100.0]);
        let v = leaf2(&mut t, 2, 1, vec![5.0, 9.0]);
        let o = t.scaled_dot_attention(q, k, v, 1, true).unwrap();
        // Row 0 can only see key 0.
        assert_abs_diff_eq!(t.value(o)[0], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn conv_identity_kernel() {
        let mut t = Tape::new();
        let x = t.constant(vec![1, 3, 3], (1..=9).map(|v| v as f64).collect()).unwrap();
        let k = t.constant(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        let y = t.grouped_conv2d(x, k, 1, 1, Padding::Same).unwrap();
        assert_eq!(t.value(y), t.value(x));
    }

    #[test]
    fn conv_all_ones_valid() {
        let mut t = Tape::new();
        let x = t.constant(vec![1, 3, 3], vec![1.0; 9]).unwrap();
        let k = t.constant(vec![1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let y = t.grouped_conv2d(x, k, 1, 1, Padding::Valid).unwrap();
        assert_eq!(t.shape(y), &[1, 1, 1]);
        assert_abs_diff_eq!(t.value(y)[0], 9.0, epsilon = 1e-12);
    }

    #[test]
    fn grouped_conv_equals_stacked_independent_convs() {
        let mut rng_vals = vec![0.0; 2 * 4 * 4];
        for (i, v) in rng_vals.iter_mut().enumerate() {
            *v = ((i * 37 % 11) as f64 - 5.0) / 3.0;
        }
        let kvals: Vec<f64> = (0..2 * 1 * 3 * 3).map(|i| ((i * 13 % 7) as f64 - 3.0) / 4.0).collect();

        // groups = 2 over stacked channels
        let mut t = Tape::new();
        let x = t.constant(vec![2, 4, 4], rng_vals.clone()).unwrap();
        let k = t.constant(vec![2, 1, 3, 3], kvals.clone()).unwrap();
        let y = t.grouped_conv2d(x, k, 2, 1, Padding::Same).unwrap();

        // two independent groups=1 convs on each channel
        let mut t2 = Tape::new();
        let x0 = t2.constant(vec![1, 4, 4], rng_vals[..16].to_vec()).unwrap();
        let x1 = t2.constant(vec![1, 4, 4], rng_vals[16..].to_vec()).unwrap();
        let k0 = t2.constant(vec![1, 1, 3, 3], kvals[..9].to_vec()).unwrap();
        let k1 = t2.constant(vec![1, 1, 3, 3], kvals[9..].to_vec()).unwrap();
        let y0 = t2.grouped_conv2d(x0, k0, 1, 1, Padding::Same).unwrap();
        let y1 = t2.grouped_conv2d(x1, k1, 1, 1, Padding::Same).unwrap();

        let got = t.value(y);
        let want: Vec<f64> = t2.value(y0).iter().chain(t2.value(y1)).copied().collect();
        for (a, b) in got.iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn conv_group_divisibility_error() {
        let mut t = Tape::new();
        let x = t.constant(vec![3, 4, 4], vec![0.0; 48]).unwrap();
        let k = t.constant(vec![4, 1, 3, 3], vec![0.0; 36]).unwrap();
        assert!(matches!(t.grouped_conv2d(x, k, 2, 1, Padding::Same), Err(crate::Error::Config(_))));
    }

    #[test]
    fn non_finite_output_is_rejected() {
        let mut t = Tape::new();
        let a = t.constant(vec![1, 1], vec![1e308]).unwrap();
        let b = t.constant(vec![1, 1], vec![1e308]).unwrap();
        assert!(matches!(t.add(a, b), Err(crate::Error::NonFinite(_))));
    }

    #[test]
    fn max_pool_routes_gradient_to_argmax() {
        let mut t = Tape::new();
        let x = t.constant(vec![1, 2, 2], vec![1.0, 5.0, 2.0, 3.0]).unwrap();
        let y = t.max_pool2(x).unwrap();
        assert_eq!(t.value(y), &[5.0]);
        t.backward(y).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn log_softmax_matches_softmax_log() {
        let mut t = Tape::new();
        let x = leaf2(&mut t, 1, 3, vec![0.5, -1.0, 2.0]);
        let ls = t.log_softmax_rows(x).unwrap();
        let s = t.softmax_rows(x).unwrap();
        for (a, b) in t.value(ls).iter().zip(t.value(s)) {
            assert_abs_diff_eq!(a.exp(), b, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let run = || {
            let mut t = Tape::new();
            let x = t.constant(vec![2, 3], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
            let w = t.constant(vec![3, 2], vec![0.5, -0.25, 1.5, 0.75, -0.1, 0.2]).unwrap();
            let b = t.constant(vec![2], vec![0.01, -0.02]).unwrap();
            let y = t.affine(x, w, b).unwrap();
            let r = t.relu(y).unwrap();
            let s = t.softmax_rows(r).unwrap();
            t.value(s).to_vec()
        };
        assert_eq!(run(), run());
    }
}
