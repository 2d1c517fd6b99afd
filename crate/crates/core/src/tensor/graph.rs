use std::collections::HashMap;

use super::{split_axis, Result, Tensor, TensorError};

/// Fill value used for masked attention logits.
pub const MASK_FILL: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul { a: Var, b: Var, batch: usize, m: usize, k: usize, n: usize, shared_b: bool },
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    Take(Var, Vec<usize>),
    Softmax(Var, usize),
    LogSoftmax(Var, usize),
    Sigmoid(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    LayerNorm { x: Var, normed: Vec<f64>, inv_std: Vec<f64> },
    Dropout(Var, Vec<f64>),
    SumAxis(Var, usize),
    MeanAxis(Var, usize),
    MaxAxis(Var, Vec<usize>),
    SumAll(Var),
    Concat(Vec<Var>, usize),
    MaskedFill(Var, Vec<bool>),
    Reshape(Var),
    Permute(Var, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Tape of tensor operations. Every op records its inputs so that
/// [`Graph::backward`] can accumulate gradients in reverse order.
#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    params: HashMap<usize, Var>,
    training: bool,
    seed: u64,
    dropout_calls: u64,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) determined by `(seed, call, index)` alone.
fn counter_uniform(seed: u64, call: u64, index: u64) -> f64 {
    let h = splitmix64(splitmix64(seed ^ splitmix64(call)) ^ index);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i + a.len() >= n { a[i + a.len() - n] } else { 1 };
        let db = if i + b.len() >= n { b[i + b.len() - n] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return Err(TensorError::Shape { op, lhs: a.to_vec(), rhs: b.to_vec() }),
        };
    }
    Ok(out)
}

/// Flat offsets into `a` and `b` for every element of the broadcast output.
fn broadcast_offsets(out: &[usize], a: &[usize], b: &[usize]) -> Vec<(usize, usize)> {
    let total: usize = out.iter().product();
    if a == out && b == out {
        return (0..total).map(|i| (i, i)).collect();
    }
    let strides = |s: &[usize]| -> Vec<usize> {
        let pad = out.len() - s.len();
        let mut st = vec![0; out.len()];
        let mut acc = 1;
        for i in (0..s.len()).rev() {
            st[pad + i] = if s[i] == 1 { 0 } else { acc };
            acc *= s[i];
        }
        st
    };
    let (sa, sb) = (strides(a), strides(b));
    let mut idx = vec![0usize; out.len()];
    let (mut oa, mut ob) = (0usize, 0usize);
    let mut res = Vec::with_capacity(total);
    for _ in 0..total {
        res.push((oa, ob));
        for d in (0..out.len()).rev() {
            idx[d] += 1;
            oa += sa[d];
            ob += sb[d];
            if idx[d] < out[d] {
                break;
            }
            oa -= sa[d] * idx[d];
            ob -= sb[d] * idx[d];
            idx[d] = 0;
        }
    }
    res
}

fn check_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(TensorError::Axis { op, axis, shape: shape.to_vec() });
    }
    Ok(())
}

/// `c[m,n] += a[m,k] * b[k,n]`, skipping zero entries of `a`.
fn mm_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m,k] += g[m,n] * b[k,n]^T`
fn mm_nt_acc(g: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            c[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `c[k,n] += a[m,k]^T * g[m,n]`
fn mm_tn_acc(a: &[f64], g: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, gv) in crow.iter_mut().zip(grow) {
                *cv += av * gv;
            }
        }
    }
}

fn permute_data(data: &[f64], shape: &[usize], perm: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let nd = shape.len();
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let mut in_strides = vec![1; nd];
    for i in (0..nd.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * shape[i + 1];
    }
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let total = data.len();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; nd];
    let mut off = 0usize;
    for _ in 0..total {
        out.push(data[off]);
        for d in (0..nd).rev() {
            idx[d] += 1;
            off += src_strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            off -= src_strides[d] * idx[d];
            idx[d] = 0;
        }
    }
    (out_shape, out)
}

impl Graph {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            params: HashMap::new(),
            training: false,
            seed: 0,
            dropout_calls: 0,
        }
    }

    /// A graph in training mode; dropout masks derive from `seed`.
    pub fn training(seed: u64) -> Self {
        Self { training: true, seed, ..Self::new() }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn leaf(&mut self, t: Tensor, requires_grad: bool) -> Var {
        self.push(t, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t, false)
    }

    /// Leaf for an externally owned parameter; repeated binds reuse one node.
    pub fn bind_param(&mut self, key: usize, t: &Tensor) -> Var {
        if let Some(&v) = self.params.get(&key) {
            return v;
        }
        let v = self.leaf(t.clone(), true);
        self.params.insert(key, v);
        v
    }

    pub fn bound_params(&self) -> impl Iterator<Item = (usize, Var)> + '_ {
        self.params.iter().map(|(&k, &v)| (k, v))
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<(Tensor, bool)> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let out = broadcast_shape(op, &sa, &sb)?;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let data = broadcast_offsets(&out, &sa, &sb).into_iter().map(|(i, j)| f(da[i], db[j])).collect();
        Ok((Tensor { shape: out, data }, self.ng(a) || self.ng(b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, ng) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, ng) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, ng) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let t = self.map(a, |x| x * s);
        let ng = self.ng(a);
        self.push(t, Op::Scale(a, s), ng)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let t = self.map(a, |x| x + s);
        let ng = self.ng(a);
        self.push(t, Op::AddScalar(a), ng)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let v = self.value(a);
        Tensor { shape: v.shape.clone(), data: v.data.iter().map(|&x| f(x)).collect() }
    }

    /// `[m,k]x[k,n]`, `[b,m,k]x[b,k,n]`, or `[b,m,k]x[k,n]` with a shared right operand.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let err = || TensorError::Shape { op: "matmul", lhs: sa.clone(), rhs: sb.clone() };
        let (batch, m, k, n, shared_b) = match (sa.len(), sb.len()) {
            (2, 2) if sa[1] == sb[0] => (1, sa[0], sa[1], sb[1], true),
            (3, 3) if sa[0] == sb[0] && sa[2] == sb[1] => (sa[0], sa[1], sa[2], sb[2], false),
            (3, 2) if sa[2] == sb[0] => (sa[0], sa[1], sa[2], sb[1], true),
            _ => return Err(err()),
        };
        let mut c = vec![0.0; batch * m * n];
        {
            let (da, db) = (self.value(a).data(), self.value(b).data());
            for bi in 0..batch {
                let bo = if shared_b { 0 } else { bi * k * n };
                mm_acc(&da[bi * m * k..(bi + 1) * m * k], &db[bo..bo + k * n], &mut c[bi * m * n..(bi + 1) * m * n], m, k, n);
            }
        }
        let shape = if sa.len() == 2 { vec![m, n] } else { vec![batch, m, n] };
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor { shape, data: c }, Op::MatMul { a, b, batch, m, k, n, shared_b }, ng))
    }

    /// Rows `idx` of `a` along axis 0.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let rows = *shape.first().ok_or(TensorError::Axis { op: "gather_rows", axis: 0, shape: shape.clone() })?;
        let w: usize = shape[1..].iter().product();
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(idx.len() * w);
        for &r in idx {
            if r >= rows {
                return Err(TensorError::Index { op: "gather_rows", index: r, bound: rows });
            }
            data.extend_from_slice(&src[r * w..(r + 1) * w]);
        }
        let mut out_shape = shape;
        out_shape[0] = idx.len();
        let ng = self.ng(a);
        Ok(self.push(Tensor { shape: out_shape, data }, Op::GatherRows(a, idx.to_vec()), ng))
    }

    /// Sums row `r` of `a` into row `idx[r]` of an output with `rows` rows.
    pub fn scatter_add_rows(&mut self, a: Var, idx: &[usize], rows: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if shape.first() != Some(&idx.len()) {
            return Err(TensorError::Shape { op: "scatter_add_rows", lhs: shape, rhs: vec![idx.len()] });
        }
        let w: usize = shape[1..].iter().product();
        let src = self.value(a).data();
        let mut data = vec![0.0; rows * w];
        for (r, &t) in idx.iter().enumerate() {
            if t >= rows {
                return Err(TensorError::Index { op: "scatter_add_rows", index: t, bound: rows });
            }
            for (o, s) in data[t * w..(t + 1) * w].iter_mut().zip(&src[r * w..(r + 1) * w]) {
                *o += s;
            }
        }
        let mut out_shape = shape;
        out_shape[0] = rows;
        let ng = self.ng(a);
        Ok(self.push(Tensor { shape: out_shape, data }, Op::ScatterAddRows(a, idx.to_vec()), ng))
    }

    /// Flat element selection; output is 1-D.
    pub fn take(&mut self, a: Var, flat: &[usize]) -> Result<Var> {
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(flat.len());
        for &i in flat {
            data.push(*src.get(i).ok_or(TensorError::Index { op: "take", index: i, bound: src.len() })?);
        }
        let ng = self.ng(a);
        Ok(self.push(Tensor { shape: vec![flat.len()], data }, Op::Take(a, flat.to_vec()), ng))
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        check_axis("softmax", &shape, axis)?;
        let (outer, len, inner) = split_axis(&shape, axis);
        let mut data = self.value(a).data().to_vec();
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| (o * len + l) * inner + i;
                let mx = (0..len).map(|l| data[at(l)]).fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for l in 0..len {
                    let e = (data[at(l)] - mx).exp();
                    data[at(l)] = e;
                    z += e;
                }
                for l in 0..len {
                    data[at(l)] /= z;
                }
            }
        }
        let ng = self.ng(a);
        Ok(self.push(Tensor { shape, data }, Op::Softmax(a, axis), ng))
    }

    pub fn log_softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        check_axis("log_softmax", &shape, axis)?;
        let (outer, len, inner) = split_axis(&shape, axis);
        let mut data = self.value(a).data().to_vec();
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| (o * len + l) * inner + i;
                let mx = (0..len).map(|l| data[at(l)]).fold(f64::NEG_INFINITY, f64::max);
                let lse = mx + (0..len).map(|l| (data[at(l)] - mx).exp()).sum::<f64>().ln();
                for l in 0..len {
                    data[at(l)] -= lse;
                }
            }
        }
        let ng = self.ng(a);
        Ok(self.push(Tensor { shape, data }, Op::LogSoftmax(a, axis), ng))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.map(a, |x| 1.0 / (1.0 + (-x).exp()));
        let ng = self.ng(a);
        self.push(t, Op::Sigmoid(a), ng)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let t = self.map(a, |x| if x > 0.0 { x } else { slope * x });
        let ng = self.ng(a);
        self.push(t, Op::LeakyRelu(a, slope), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, 0.0)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let t = self.map(a, f64::exp);
        let ng = self.ng(a);
        self.push(t, Op::Exp(a), ng)
    }

    /// Normalizes over the last axis without affine parameters.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let w = *shape.last().ok_or(TensorError::Axis { op: "layer_norm", axis: 0, shape: shape.clone() })?;
        let src = self.value(a).data();
        let rows = src.len() / w.max(1);
        let mut normed = vec![0.0; src.len()];
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            let x = &src[r * w..(r + 1) * w];
            let mean = x.iter().sum::<f64>() / w as f64;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for (o, v) in normed[r * w..(r + 1) * w].iter_mut().zip(x) {
                *o = (v - mean) * is;
            }
        }
        let ng = self.ng(a);
        let t = Tensor { shape, data: normed.clone() };
        Ok(self.push(t, Op::LayerNorm { x: a, normed, inv_std }, ng))
    }

    /// Inverted dropout. Identity outside training mode or when `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64) -> Var {
        if !self.training || p <= 0.0 {
            return a;
        }
        let call = self.dropout_calls;
        self.dropout_calls += 1;
        let keep = 1.0 / (1.0 - p);
        let n = self.value(a).numel();
        let mask: Vec<f64> =
            (0..n).map(|i| if counter_uniform(self.seed, call, i as u64) < p { 0.0 } else { keep }).collect();
        let v = self.value(a);
        let t = Tensor { shape: v.shape.clone(), data: v.data.iter().zip(&mask).map(|(x, m)| x * m).collect() };
        let ng = self.ng(a);
        self.push(t, Op::Dropout(a, mask), ng)
    }

    fn reduce(&self, op: &'static str, a: Var, axis: usize) -> Result<(Vec<usize>, usize, usize, usize)> {
        let shape = self.shape(a).to_vec();
        check_axis(op, &shape, axis)?;
        let (outer, len, inner) = split_axis(&shape, axis);
        let mut out = shape;
        out.remove(axis);
        Ok((out, outer, len, inner))
    }

    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let (shape, outer, len, inner) = self.reduce("sum_axis", a, axis)?;
        let src = self.value(a).data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                for i in 0..inner {
                    data[o * inner + i] += src[(o * len + l) * inner + i];
                }
            }
        }
        let ng = self.ng(a);
        Ok(self.push(Tensor { shape, data }, Op::SumAxis(a, axis), ng))
    }

    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let (shape, outer, len, inner) = self.reduce("mean_axis", a, axis)?;
        let src = self.value(a).data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                for i in 0..inner {
                    data[o * inner + i] += src[(o * len + l) * inner + i] / len as f64;
                }
            }
        }
        let ng = self.ng(a);
        Ok(self.push(Tensor { shape, data }, Op::MeanAxis(a, axis), ng))
    }

    /// Max along `axis`; the gradient flows to the first maximal entry.
    pub fn max_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let (shape, outer, len, inner) = self.reduce("max_axis", a, axis)?;
        if len == 0 {
            return Err(TensorError::Axis { op: "max_axis", axis, shape: self.shape(a).to_vec() });
        }
        let src = self.value(a).data();
        let mut data = vec![f64::NEG_INFINITY; outer * inner];
        let mut arg = vec![0usize; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                for i in 0..inner {
                    let s = (o * len + l) * inner + i;
                    if src[s] > data[o * inner + i] {
                        data[o * inner + i] = src[s];
                        arg[o * inner + i] = s;
                    }
                }
            }
        }
        let ng = self.ng(a);
        Ok(self.push(Tensor { shape, data }, Op::MaxAxis(a, arg), ng))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let ng = self.ng(a);
        self.push(Tensor::scalar(s), Op::SumAll(a), ng)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self.shape(*parts.first().ok_or(TensorError::Shape { op: "concat", lhs: vec![], rhs: vec![] })?).to_vec();
        check_axis("concat", &first, axis)?;
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let ok = s.len() == first.len()
                && s.iter().zip(&first).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !ok {
                return Err(TensorError::Shape { op: "concat", lhs: first.clone(), rhs: s.to_vec() });
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&first, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let len = self.shape(p)[axis];
                let src = self.value(p).data();
                data.extend_from_slice(&src[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor { shape, data }, Op::Concat(parts.to_vec(), axis), ng))
    }

    /// Replaces entries where `keep` is false with [`MASK_FILL`].
    pub fn masked_fill(&mut self, a: Var, keep: &[bool]) -> Result<Var> {
        let v = self.value(a);
        if keep.len() != v.numel() {
            return Err(TensorError::Shape { op: "masked_fill", lhs: v.shape.clone(), rhs: vec![keep.len()] });
        }
        let t = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().zip(keep).map(|(&x, &k)| if k { x } else { MASK_FILL }).collect(),
        };
        let ng = self.ng(a);
        Ok(self.push(t, Op::MaskedFill(a, keep.to_vec()), ng))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshaped(shape)?;
        let ng = self.ng(a);
        Ok(self.push(t, Op::Reshape(a), ng))
    }

    pub fn permute(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let mut seen = vec![false; shape.len()];
        if perm.len() != shape.len() || perm.iter().any(|&p| p >= shape.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(TensorError::Shape { op: "permute", lhs: shape, rhs: perm.to_vec() });
        }
        let (out_shape, data) = permute_data(self.value(a).data(), &shape, perm);
        let ng = self.ng(a);
        Ok(self.push(Tensor { shape: out_shape, data }, Op::Permute(a, perm.to_vec()), ng))
    }

    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.grads
            .get(v.0)
            .and_then(|g| g.as_ref())
            .map(|g| Tensor { shape: self.nodes[v.0].value.shape.clone(), data: g.clone() })
    }

    /// Reverse pass from a scalar `loss`; gradients accumulate on every node
    /// that depends on a gradient-requiring leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(TensorError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(g) = self.grads[id].take() else { continue };
            if !self.nodes[id].needs_grad {
                continue;
            }
            self.backprop_node(id, &g);
            self.grads[id] = Some(g);
        }
        Ok(())
    }

    fn acc(&mut self, v: Var) -> Option<&mut Vec<f64>> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        let n = self.nodes[v.0].value.numel();
        Some(self.grads[v.0].get_or_insert_with(|| vec![0.0; n]))
    }

    fn backprop_node(&mut self, id: usize, g: &[f64]) {
        // Temporarily move the op out so input values can be borrowed freely.
        let op = std::mem::replace(&mut self.nodes[id].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(op, Op::Sub(..)) { -1.0 } else { 1.0 };
                let offs = broadcast_offsets(self.nodes[id].value.shape(), self.shape(*a), self.shape(*b));
                if let Some(ga) = self.acc(*a) {
                    for (o, &(i, _)) in offs.iter().enumerate() {
                        ga[i] += g[o];
                    }
                }
                if let Some(gb) = self.acc(*b) {
                    for (o, &(_, j)) in offs.iter().enumerate() {
                        gb[j] += sign * g[o];
                    }
                }
            }
            Op::Mul(a, b) => {
                let offs = broadcast_offsets(self.nodes[id].value.shape(), self.shape(*a), self.shape(*b));
                let (va, vb) = (self.value(*a).data.clone(), self.value(*b).data.clone());
                if let Some(ga) = self.acc(*a) {
                    for (o, &(i, j)) in offs.iter().enumerate() {
                        ga[i] += g[o] * vb[j];
                    }
                }
                if let Some(gb) = self.acc(*b) {
                    for (o, &(i, j)) in offs.iter().enumerate() {
                        gb[j] += g[o] * va[i];
                    }
                }
            }
            Op::Scale(a, s) => {
                if let Some(ga) = self.acc(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += s * y);
                }
            }
            Op::AddScalar(a) | Op::Reshape(a) => {
                if let Some(ga) = self.acc(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
            }
            &Op::MatMul { a, b, batch, m, k, n, shared_b } => {
                if self.ng(a) {
                    let vb = self.value(b).data.clone();
                    let ga = self.acc(a).expect("needs grad");
                    for bi in 0..batch {
                        let bo = if shared_b { 0 } else { bi * k * n };
                        mm_nt_acc(&g[bi * m * n..(bi + 1) * m * n], &vb[bo..bo + k * n], &mut ga[bi * m * k..(bi + 1) * m * k], m, k, n);
                    }
                }
                if self.ng(b) {
                    let va = self.value(a).data.clone();
                    let gb = self.acc(b).expect("needs grad");
                    for bi in 0..batch {
                        let bo = if shared_b { 0 } else { bi * k * n };
                        mm_tn_acc(&va[bi * m * k..(bi + 1) * m * k], &g[bi * m * n..(bi + 1) * m * n], &mut gb[bo..bo + k * n], m, k, n);
                    }
                }
            }
            Op::GatherRows(a, idx) => {
                let w = g.len() / idx.len().max(1);
                if let Some(ga) = self.acc(*a) {
                    for (r, &s) in idx.iter().enumerate() {
                        for c in 0..w {
                            ga[s * w + c] += g[r * w + c];
                        }
                    }
                }
            }
            Op::ScatterAddRows(a, idx) => {
                let w: usize = self.shape(*a)[1..].iter().product();
                if let Some(ga) = self.acc(*a) {
                    for (r, &t) in idx.iter().enumerate() {
                        for c in 0..w {
                            ga[r * w + c] += g[t * w + c];
                        }
                    }
                }
            }
            Op::Take(a, flat) => {
                if let Some(ga) = self.acc(*a) {
                    for (o, &i) in flat.iter().enumerate() {
                        ga[i] += g[o];
                    }
                }
            }
            &Op::Softmax(a, axis) => {
                let y = self.nodes[id].value.data.clone();
                let (outer, len, inner) = split_axis(self.shape(a), axis);
                if let Some(ga) = self.acc(a) {
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |l: usize| (o * len + l) * inner + i;
                            let dot: f64 = (0..len).map(|l| g[at(l)] * y[at(l)]).sum();
                            for l in 0..len {
                                ga[at(l)] += y[at(l)] * (g[at(l)] - dot);
                            }
                        }
                    }
                }
            }
            &Op::LogSoftmax(a, axis) => {
                let y = self.nodes[id].value.data.clone();
                let (outer, len, inner) = split_axis(self.shape(a), axis);
                if let Some(ga) = self.acc(a) {
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |l: usize| (o * len + l) * inner + i;
                            let total: f64 = (0..len).map(|l| g[at(l)]).sum();
                            for l in 0..len {
                                ga[at(l)] += g[at(l)] - y[at(l)].exp() * total;
                            }
                        }
                    }
                }
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[id].value.data.clone();
                if let Some(ga) = self.acc(*a) {
                    for ((x, gy), yv) in ga.iter_mut().zip(g).zip(&y) {
                        *x += gy * yv * (1.0 - yv);
                    }
                }
            }
            &Op::LeakyRelu(a, slope) => {
                let xs = self.value(a).data.clone();
                if let Some(ga) = self.acc(a) {
                    for ((x, gy), xv) in ga.iter_mut().zip(g).zip(&xs) {
                        *x += if *xv > 0.0 { *gy } else { slope * gy };
                    }
                }
            }
            Op::Exp(a) => {
                let y = self.nodes[id].value.data.clone();
                if let Some(ga) = self.acc(*a) {
                    for ((x, gy), yv) in ga.iter_mut().zip(g).zip(&y) {
                        *x += gy * yv;
                    }
                }
            }
            Op::LayerNorm { x, normed, inv_std } => {
                let w = *self.shape(*x).last().unwrap_or(&1);
                if let Some(ga) = self.acc(*x) {
                    for (r, is) in inv_std.iter().enumerate() {
                        let gy = &g[r * w..(r + 1) * w];
                        let yh = &normed[r * w..(r + 1) * w];
                        let mg = gy.iter().sum::<f64>() / w as f64;
                        let mgy = gy.iter().zip(yh).map(|(a, b)| a * b).sum::<f64>() / w as f64;
                        for c in 0..w {
                            ga[r * w + c] += is * (gy[c] - mg - yh[c] * mgy);
                        }
                    }
                }
            }
            Op::Dropout(a, mask) => {
                if let Some(ga) = self.acc(*a) {
                    for ((x, gy), m) in ga.iter_mut().zip(g).zip(mask) {
                        *x += gy * m;
                    }
                }
            }
            &Op::SumAxis(a, axis) | &Op::MeanAxis(a, axis) => {
                let (outer, len, inner) = split_axis(self.shape(a), axis);
                let f = if matches!(op, Op::MeanAxis(..)) { 1.0 / len as f64 } else { 1.0 };
                if let Some(ga) = self.acc(a) {
                    for o in 0..outer {
                        for l in 0..len {
                            for i in 0..inner {
                                ga[(o * len + l) * inner + i] += f * g[o * inner + i];
                            }
                        }
                    }
                }
            }
            Op::MaxAxis(a, arg) => {
                if let Some(ga) = self.acc(*a) {
                    for (o, &s) in arg.iter().enumerate() {
                        ga[s] += g[o];
                    }
                }
            }
            Op::SumAll(a) => {
                if let Some(ga) = self.acc(*a) {
                    ga.iter_mut().for_each(|x| *x += g[0]);
                }
            }
            Op::Concat(parts, axis) => {
                let out_shape = self.nodes[id].value.shape.clone();
                let (outer, total, inner) = split_axis(&out_shape, *axis);
                let mut start = 0;
                for &p in parts {
                    let len = self.shape(p)[*axis];
                    if let Some(gp) = self.acc(p) {
                        for o in 0..outer {
                            let src = &g[(o * total + start) * inner..(o * total + start + len) * inner];
                            for (x, y) in gp[o * len * inner..(o + 1) * len * inner].iter_mut().zip(src) {
                                *x += y;
                            }
                        }
                    }
                    start += len;
                }
            }
            Op::MaskedFill(a, keep) => {
                if let Some(ga) = self.acc(*a) {
                    for ((x, gy), &k) in ga.iter_mut().zip(g).zip(keep) {
                        if k {
                            *x += gy;
                        }
                    }
                }
            }
            Op::Permute(a, perm) => {
                let mut inv = vec![0; perm.len()];
                for (i, &p) in perm.iter().enumerate() {
                    inv[p] = i;
                }
                let out_shape = self.nodes[id].value.shape.clone();
                let (_, back) = permute_data(g, &out_shape, &inv);
                if let Some(ga) = self.acc(*a) {
                    ga.iter_mut().zip(&back).for_each(|(x, y)| *x += y);
                }
            }
        }
        self.nodes[id].op = op;
    }
}
