use serde::{Deserialize, Serialize};

use super::kernels::{self, broadcast_maps, matmul_raw, transpose_raw, Normalizer};
use super::tensor::Tensor;
use crate::error::{GcaError, Result};

/// Handle to a tensor recorded in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolMode {
    Max,
    Mean,
}

impl PoolMode {
    pub fn name(self) -> &'static str {
        match self {
            PoolMode::Max => "max",
            PoolMode::Mean => "mean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "max" => Some(PoolMode::Max),
            "mean" => Some(PoolMode::Mean),
            _ => None,
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add {
        a: Var,
        b: Var,
        amap: Vec<usize>,
        bmap: Vec<usize>,
    },
    Mul {
        a: Var,
        b: Var,
        amap: Vec<usize>,
        bmap: Vec<usize>,
    },
    Relu(Var),
    Tanh(Var),
    Scale(Var, f64),
    NormalizeRows {
        x: Var,
        kind: Normalizer,
        valid: usize,
    },
    Conv1d {
        x: Var,
        kernels: Var,
        bias: Var,
    },
    Pool {
        x: Var,
        mode: PoolMode,
        valid: usize,
        argmax: Vec<usize>,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    Reshape(Var),
    Sum(Var),
    Mse(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Ordered record of executed operations.
///
/// Nodes are appended as ops run, so every node's inputs precede it and a
/// single reverse sweep in [`Graph::backward`] is a valid topological order.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn dim_err(what: &str, a: &[usize], b: &[usize]) -> GcaError {
    GcaError::Dimension(format!("{what}: shapes {a:?} and {b:?} are incompatible"))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, true, Op::Leaf)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient accumulated by the last [`Graph::backward`] call, if any reached `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let (m, k, n) = match (sa, sb) {
            ([m, k], [k2, n]) if k == k2 => (*m, *k, *n),
            _ => return Err(dim_err("matmul", sa, sb)),
        };
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, rg, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.value(x).dims2()?;
        let out = transpose_raw(self.value(x).data(), r, c);
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::new(vec![c, r], out)?, rg, Op::Transpose(x)))
    }

    /// Elementwise sum with numpy broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, amap, bmap) = broadcast_maps(self.shape(a), self.shape(b))
            .ok_or_else(|| dim_err("add", self.shape(a), self.shape(b)))?;
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let out = amap.iter().zip(&bmap).map(|(&i, &j)| av[i] + bv[j]).collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(shape, out)?, rg, Op::Add { a, b, amap, bmap }))
    }

    /// Elementwise product with numpy broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, amap, bmap) = broadcast_maps(self.shape(a), self.shape(b))
            .ok_or_else(|| dim_err("mul", self.shape(a), self.shape(b)))?;
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let out = amap.iter().zip(&bmap).map(|(&i, &j)| av[i] * bv[j]).collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(shape, out)?, rg, Op::Mul { a, b, amap, bmap }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = t.data().iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor::new(t.shape().to_vec(), out).unwrap();
        let rg = self.rg(&[x]);
        self.push(value, rg, Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = t.data().iter().map(|&v| v.tanh()).collect();
        let value = Tensor::new(t.shape().to_vec(), out).unwrap();
        let rg = self.rg(&[x]);
        self.push(value, rg, Op::Tanh(x))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let t = self.value(x);
        let out = t.data().iter().map(|&v| v * c).collect();
        let value = Tensor::new(t.shape().to_vec(), out).unwrap();
        let rg = self.rg(&[x]);
        self.push(value, rg, Op::Scale(x, c))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let cols = self.value(x).dims2()?.1;
        self.normalize_rows(x, Normalizer::Softmax, cols)
    }

    pub fn sparsemax_rows(&mut self, x: Var) -> Result<Var> {
        let cols = self.value(x).dims2()?.1;
        self.normalize_rows(x, Normalizer::Sparsemax, cols)
    }

    /// Normalizes each row over its first `valid` columns. The remaining
    /// columns are treated as masked keys: they come out exactly 0 and
    /// receive no gradient.
    pub fn normalize_rows(&mut self, x: Var, kind: Normalizer, valid: usize) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        if valid == 0 || valid > cols {
            return Err(GcaError::Dimension(format!(
                "{} over {valid} valid columns of a {rows}x{cols} matrix",
                kind.name()
            )));
        }
        let t = self.value(x);
        if t.data().iter().any(|v| v.is_nan()) {
            return Err(GcaError::Numeric(format!("NaN input to {}", kind.name())));
        }
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            let y = kind.apply(&t.row(r)[..valid]);
            out[r * cols..r * cols + valid].copy_from_slice(&y);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(
            Tensor::new(vec![rows, cols], out)?,
            rg,
            Op::NormalizeRows { x, kind, valid },
        ))
    }

    /// Same-length 1-D convolution along the sequence axis with zero padding.
    /// `x: [len, c_in]`, `kernels: [w, c_in, c_out]`, `bias: [c_out]`, `w` odd.
    pub fn conv1d(&mut self, x: Var, kernels: Var, bias: Var) -> Result<Var> {
        let (xs, ks, bs) = (self.shape(x), self.shape(kernels), self.shape(bias));
        let (len, c_in) = match xs {
            [l, c] => (*l, *c),
            _ => return Err(dim_err("conv1d input", xs, ks)),
        };
        let (w, c_out) = match ks {
            [w, ci, co] if *ci == c_in => (*w, *co),
            _ => return Err(dim_err("conv1d", xs, ks)),
        };
        if w % 2 == 0 {
            return Err(GcaError::Config(format!("conv1d kernel width {w} must be odd")));
        }
        if bs != [c_out] {
            return Err(dim_err("conv1d bias", ks, bs));
        }
        let (xv, kv, bv) = (
            self.value(x).data(),
            self.value(kernels).data(),
            self.value(bias).data(),
        );
        let half = w / 2;
        let mut out = vec![0.0; len * c_out];
        for t in 0..len {
            let orow = &mut out[t * c_out..(t + 1) * c_out];
            orow.copy_from_slice(bv);
            for s in 0..w {
                let src = t as isize + s as isize - half as isize;
                if src < 0 || src >= len as isize {
                    continue;
                }
                let xrow = &xv[src as usize * c_in..(src as usize + 1) * c_in];
                for (c, &xc) in xrow.iter().enumerate() {
                    let krow = &kv[(s * c_in + c) * c_out..(s * c_in + c + 1) * c_out];
                    for (o, &kw) in orow.iter_mut().zip(krow) {
                        *o += xc * kw;
                    }
                }
            }
        }
        let rg = self.rg(&[x, kernels, bias]);
        Ok(self.push(
            Tensor::new(vec![len, c_out], out)?,
            rg,
            Op::Conv1d { x, kernels, bias },
        ))
    }

    /// Pools the first `valid` rows of `x: [len, f]` into `[f]`. Max pooling
    /// routes the gradient to the first argmax row.
    pub fn pool(&mut self, x: Var, mode: PoolMode, valid: usize) -> Result<Var> {
        let (len, f) = self.value(x).dims2()?;
        if valid == 0 || valid > len {
            return Err(GcaError::Dimension(format!(
                "pooling {valid} rows of a sequence of length {len}"
            )));
        }
        let t = self.value(x);
        let mut out = vec![0.0; f];
        let mut argmax = vec![0usize; f];
        match mode {
            PoolMode::Max => {
                for (j, (o, am)) in out.iter_mut().zip(argmax.iter_mut()).enumerate() {
                    let mut best = t.data()[j];
                    for r in 1..valid {
                        let v = t.data()[r * f + j];
                        if v > best {
                            best = v;
                            *am = r;
                        }
                    }
                    *o = best;
                }
            }
            PoolMode::Mean => {
                for r in 0..valid {
                    for (o, &v) in out.iter_mut().zip(t.row(r)) {
                        *o += v;
                    }
                }
                out.iter_mut().for_each(|o| *o /= valid as f64);
            }
        }
        let rg = self.rg(&[x]);
        Ok(self.push(
            Tensor::new(vec![f], out)?,
            rg,
            Op::Pool {
                x,
                mode,
                valid,
                argmax,
            },
        ))
    }

    /// Per-row standardization over features followed by an affine map.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (rows, f) = self.value(x).dims2()?;
        if f < 2 {
            return Err(GcaError::Config(format!(
                "layer norm needs at least 2 features, got {f}"
            )));
        }
        if self.shape(gain) != [f] || self.shape(bias) != [f] {
            return Err(dim_err("layer_norm affine", self.shape(gain), self.shape(bias)));
        }
        let t = self.value(x);
        let (gv, bv) = (self.value(gain).data(), self.value(bias).data());
        let mut xhat = vec![0.0; rows * f];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; rows * f];
        for r in 0..rows {
            let row = t.row(r);
            let mean = row.iter().sum::<f64>() / f as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / f as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std[r] = is;
            for j in 0..f {
                let h = (row[j] - mean) * is;
                xhat[r * f + j] = h;
                out[r * f + j] = h * gv[j] + bv[j];
            }
        }
        let rg = self.rg(&[x, gain, bias]);
        Ok(self.push(
            Tensor::new(vec![rows, f], out)?,
            rg,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        ))
    }

    /// Gathers rows of `table: [V, f]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (vocab, f) = self.value(table).dims2()?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(GcaError::Index(format!(
                "token id {bad} out of range for a vocabulary of {vocab}"
            )));
        }
        if ids.is_empty() {
            return Err(GcaError::Dimension("embedding lookup of zero ids".into()));
        }
        let t = self.value(table);
        let out: Vec<f64> = ids.iter().flat_map(|&i| t.row(i).iter().copied()).collect();
        let rg = self.rg(&[table]);
        Ok(self.push(
            Tensor::new(vec![ids.len(), f], out)?,
            rg,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Concatenates along the last axis; leading dimensions must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| GcaError::Dimension("concat of nothing".into()))?;
        let lead = self.shape(*first)[..self.shape(*first).len() - 1].to_vec();
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            if s[..s.len() - 1] != lead[..] {
                return Err(dim_err("concat", self.shape(*first), s));
            }
            total += s[s.len() - 1];
        }
        let outer: usize = lead.iter().product();
        let mut out = Vec::with_capacity(outer * total);
        for r in 0..outer {
            for &p in parts {
                let w = *self.shape(p).last().unwrap();
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let rg = self.rg(parts);
        Ok(self.push(Tensor::new(shape, out)?, rg, Op::Concat(parts.to_vec())))
    }

    /// Columns `start..end` of the last axis.
    pub fn slice(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let w = *s.last().unwrap();
        if start >= end || end > w {
            return Err(GcaError::Dimension(format!(
                "slice {start}..{end} of last axis in shape {s:?}"
            )));
        }
        let outer: usize = s[..s.len() - 1].iter().product();
        let v = self.value(x).data();
        let out: Vec<f64> = (0..outer)
            .flat_map(|r| v[r * w + start..r * w + end].iter().copied())
            .collect();
        let mut shape = s[..s.len() - 1].to_vec();
        shape.push(end - start);
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::new(shape, out)?, rg, Op::Slice { x, start }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshaped(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, rg, Op::Reshape(x)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), rg, Op::Sum(x))
    }

    /// Mean squared error between two same-sized tensors, as a scalar.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.len() != t.len() {
            return Err(dim_err("mse_loss", p.shape(), t.shape()));
        }
        let n = p.len() as f64;
        let loss = p
            .data()
            .iter()
            .zip(t.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / n;
        let rg = self.rg(&[pred, target]);
        Ok(self.push(Tensor::scalar(loss), rg, Op::Mse(pred, target)))
    }

    /// Reverse sweep from a scalar `loss`. Gradients of every node reachable
    /// from the loss are accumulated (summed over all uses).
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(GcaError::Dimension(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].requires_grad {
                self.propagate(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        for (i, g) in grads.iter_mut().enumerate() {
            if !self.nodes[i].requires_grad {
                *g = None;
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let val = |v: Var| nodes[v.0].value.data();
        let mut acc = |v: Var, contrib: Vec<f64>| {
            if !nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.iter_mut().zip(&contrib).for_each(|(e, c)| *e += c),
                slot => *slot = Some(contrib),
            }
        };
        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = nodes[a.0].value.dims2().unwrap();
                let n = nodes[b.0].value.dims2().unwrap().1;
                // grad_a = g b^T, grad_b = a^T g
                let bt = transpose_raw(val(*b), k, n);
                acc(*a, matmul_raw(g, &bt, m, n, k));
                let at = transpose_raw(val(*a), m, k);
                acc(*b, matmul_raw(&at, g, k, m, n));
            }
            Op::Transpose(x) => {
                let (r, c) = nodes[x.0].value.dims2().unwrap();
                acc(*x, transpose_raw(g, c, r));
            }
            Op::Add { a, b, amap, bmap } => {
                let mut ga = vec![0.0; nodes[a.0].value.len()];
                let mut gb = vec![0.0; nodes[b.0].value.len()];
                for ((&ia, &ib), &gi) in amap.iter().zip(bmap).zip(g) {
                    ga[ia] += gi;
                    gb[ib] += gi;
                }
                acc(*a, ga);
                acc(*b, gb);
            }
            Op::Mul { a, b, amap, bmap } => {
                let (av, bv) = (val(*a), val(*b));
                let mut ga = vec![0.0; av.len()];
                let mut gb = vec![0.0; bv.len()];
                for ((&ia, &ib), &gi) in amap.iter().zip(bmap).zip(g) {
                    ga[ia] += gi * bv[ib];
                    gb[ib] += gi * av[ia];
                }
                acc(*a, ga);
                acc(*b, gb);
            }
            Op::Relu(x) => {
                let gx = val(*x)
                    .iter()
                    .zip(g)
                    .map(|(&v, &gi)| if v > 0.0 { gi } else { 0.0 })
                    .collect();
                acc(*x, gx);
            }
            Op::Tanh(x) => {
                let y = nodes[i].value.data();
                acc(*x, y.iter().zip(g).map(|(&t, &gi)| gi * (1.0 - t * t)).collect());
            }
            Op::Scale(x, c) => acc(*x, g.iter().map(|v| v * c).collect()),
            Op::NormalizeRows { x, kind, valid } => {
                let y = &nodes[i].value;
                let (rows, cols) = y.dims2().unwrap();
                let mut gx = vec![0.0; rows * cols];
                for r in 0..rows {
                    let yr = &y.row(r)[..*valid];
                    let gr = &g[r * cols..r * cols + valid];
                    let d = kernels::normalizer_vjp(*kind, yr, gr);
                    gx[r * cols..r * cols + valid].copy_from_slice(&d);
                }
                acc(*x, gx);
            }
            Op::Conv1d { x, kernels, bias } => {
                let (len, c_in) = nodes[x.0].value.dims2().unwrap();
                let ks = nodes[kernels.0].value.shape();
                let (w, c_out) = (ks[0], ks[2]);
                let half = w / 2;
                let (xv, kv) = (val(*x), val(*kernels));
                let mut gx = vec![0.0; xv.len()];
                let mut gk = vec![0.0; kv.len()];
                let mut gb = vec![0.0; c_out];
                for t in 0..len {
                    let grow = &g[t * c_out..(t + 1) * c_out];
                    gb.iter_mut().zip(grow).for_each(|(b, gi)| *b += gi);
                    for s in 0..w {
                        let src = t as isize + s as isize - half as isize;
                        if src < 0 || src >= len as isize {
                            continue;
                        }
                        let src = src as usize;
                        for c in 0..c_in {
                            let base = (s * c_in + c) * c_out;
                            let xc = xv[src * c_in + c];
                            let mut gxc = 0.0;
                            for o in 0..c_out {
                                gk[base + o] += xc * grow[o];
                                gxc += kv[base + o] * grow[o];
                            }
                            gx[src * c_in + c] += gxc;
                        }
                    }
                }
                acc(*x, gx);
                acc(*kernels, gk);
                acc(*bias, gb);
            }
            Op::Pool {
                x,
                mode,
                valid,
                argmax,
            } => {
                let (len, f) = nodes[x.0].value.dims2().unwrap();
                let mut gx = vec![0.0; len * f];
                match mode {
                    PoolMode::Max => {
                        for j in 0..f {
                            gx[argmax[j] * f + j] += g[j];
                        }
                    }
                    PoolMode::Mean => {
                        for r in 0..*valid {
                            for j in 0..f {
                                gx[r * f + j] = g[j] / *valid as f64;
                            }
                        }
                    }
                }
                acc(*x, gx);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let (rows, f) = nodes[x.0].value.dims2().unwrap();
                let gv = val(*gain);
                let mut gx = vec![0.0; rows * f];
                let mut gg = vec![0.0; f];
                let mut gb = vec![0.0; f];
                for r in 0..rows {
                    let gr = &g[r * f..(r + 1) * f];
                    let hr = &xhat[r * f..(r + 1) * f];
                    let dh: Vec<f64> = gr.iter().zip(gv).map(|(a, b)| a * b).collect();
                    let mean_dh = dh.iter().sum::<f64>() / f as f64;
                    let mean_dh_h =
                        dh.iter().zip(hr).map(|(a, b)| a * b).sum::<f64>() / f as f64;
                    for j in 0..f {
                        gx[r * f + j] = inv_std[r] * (dh[j] - mean_dh - hr[j] * mean_dh_h);
                        gg[j] += gr[j] * hr[j];
                        gb[j] += gr[j];
                    }
                }
                acc(*x, gx);
                acc(*gain, gg);
                acc(*bias, gb);
            }
            Op::Embedding { table, ids } => {
                let (vocab, f) = nodes[table.0].value.dims2().unwrap();
                let mut gt = vec![0.0; vocab * f];
                for (r, &id) in ids.iter().enumerate() {
                    for j in 0..f {
                        gt[id * f + j] += g[r * f + j];
                    }
                }
                acc(*table, gt);
            }
            Op::Concat(parts) => {
                let total = *nodes[i].value.shape().last().unwrap();
                let outer = nodes[i].value.len() / total;
                let mut offset = 0;
                for &p in parts {
                    let w = *nodes[p.0].value.shape().last().unwrap();
                    let gp = (0..outer)
                        .flat_map(|r| g[r * total + offset..r * total + offset + w].iter().copied())
                        .collect();
                    acc(p, gp);
                    offset += w;
                }
            }
            Op::Slice { x, start } => {
                let full = *nodes[x.0].value.shape().last().unwrap();
                let w = *nodes[i].value.shape().last().unwrap();
                let outer = nodes[i].value.len() / w;
                let mut gx = vec![0.0; nodes[x.0].value.len()];
                for r in 0..outer {
                    gx[r * full + start..r * full + start + w]
                        .copy_from_slice(&g[r * w..(r + 1) * w]);
                }
                acc(*x, gx);
            }
            Op::Reshape(x) => acc(*x, g.to_vec()),
            Op::Sum(x) => acc(*x, vec![g[0]; nodes[x.0].value.len()]),
            Op::Mse(p, t) => {
                let (pv, tv) = (val(*p), val(*t));
                let n = pv.len() as f64;
                let gp: Vec<f64> = pv
                    .iter()
                    .zip(tv)
                    .map(|(a, b)| 2.0 * (a - b) / n * g[0])
                    .collect();
                acc(*t, gp.iter().map(|v| -v).collect());
                acc(*p, gp);
            }
        }
    }
}
