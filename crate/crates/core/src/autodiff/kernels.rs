//! Pure numeric kernels shared by the graph ops and the analysis code.

use serde::{Deserialize, Serialize};

/// Row normalizer used by the attention layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalizer {
    Softmax,
    Sparsemax,
}

impl Normalizer {
    pub fn name(self) -> &'static str {
        match self {
            Normalizer::Softmax => "softmax",
            Normalizer::Sparsemax => "sparsemax",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "softmax" => Some(Normalizer::Softmax),
            "sparsemax" => Some(Normalizer::Sparsemax),
            _ => None,
        }
    }

    pub fn apply(self, z: &[f64]) -> Vec<f64> {
        match self {
            Normalizer::Softmax => softmax(z),
            Normalizer::Sparsemax => sparsemax(z),
        }
    }
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// Euclidean projection of `z` onto the probability simplex.
///
/// Sort-threshold algorithm: with `z` sorted in descending order, the support
/// size is the largest `k` with `1 + k * z_(k) > sum_{j<=k} z_(j)`, and the
/// threshold is `tau = (sum_{j<=k} z_(j) - 1) / k`.
pub fn sparsemax(z: &[f64]) -> Vec<f64> {
    let tau = sparsemax_threshold(z);
    z.iter().map(|&v| (v - tau).max(0.0)).collect()
}

pub fn sparsemax_threshold(z: &[f64]) -> f64 {
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut support_sum = sorted[0];
    let mut support = 1usize;
    for (i, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let k = (i + 1) as f64;
        if 1.0 + k * v > cumsum {
            support = i + 1;
            support_sum = cumsum;
        }
    }
    (support_sum - 1.0) / support as f64
}

/// Vector-Jacobian product of a row normalizer given its output `y`.
pub(crate) fn normalizer_vjp(kind: Normalizer, y: &[f64], grad: &[f64]) -> Vec<f64> {
    match kind {
        Normalizer::Softmax => {
            let dot: f64 = y.iter().zip(grad).map(|(a, b)| a * b).sum();
            y.iter().zip(grad).map(|(&yi, &gi)| yi * (gi - dot)).collect()
        }
        Normalizer::Sparsemax => {
            // Support taken from the forward output; at boundary points this is
            // the right-limit Jacobian.
            let (sum, count) = y
                .iter()
                .zip(grad)
                .filter(|(&yi, _)| yi > 0.0)
                .fold((0.0, 0usize), |(s, c), (_, &gi)| (s + gi, c + 1));
            let mean = sum / count.max(1) as f64;
            y.iter()
                .zip(grad)
                .map(|(&yi, &gi)| if yi > 0.0 { gi - mean } else { 0.0 })
                .collect()
        }
    }
}

/// Numpy-style broadcast of two shapes. Returns the output shape and, for each
/// output element, the flat index into each operand.
pub(crate) fn broadcast_maps(
    a: &[usize],
    b: &[usize],
) -> Option<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let rank = a.len().max(b.len());
    let pad = |s: &[usize]| -> Vec<usize> {
        let mut v = vec![1; rank - s.len()];
        v.extend_from_slice(s);
        v
    };
    let (pa, pb) = (pad(a), pad(b));
    let mut out = Vec::with_capacity(rank);
    for (&x, &y) in pa.iter().zip(&pb) {
        match (x, y) {
            _ if x == y => out.push(x),
            (1, _) => out.push(y),
            (_, 1) => out.push(x),
            _ => return None,
        }
    }
    let strides = |s: &[usize]| -> Vec<usize> {
        let mut st = vec![0; rank];
        let mut acc = 1;
        for d in (0..rank).rev() {
            st[d] = if s[d] == 1 { 0 } else { acc };
            acc *= s[d];
        }
        st
    };
    let (sa, sb) = (strides(&pa), strides(&pb));
    let n: usize = out.iter().product();
    let mut amap = Vec::with_capacity(n);
    let mut bmap = Vec::with_capacity(n);
    let mut idx = vec![0usize; rank];
    for _ in 0..n {
        amap.push(idx.iter().zip(&sa).map(|(i, s)| i * s).sum());
        bmap.push(idx.iter().zip(&sb).map(|(i, s)| i * s).sum());
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < out[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Some((out, amap, bmap))
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

pub(crate) fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparsemax_threshold_examples() {
        assert_eq!(sparsemax(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(sparsemax(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = sparsemax(&[0.5, 0.2, -3.0]);
        assert!((p[0] - 0.65).abs() < 1e-12 && (p[1] - 0.35).abs() < 1e-12);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn broadcast_trailing_and_leading() {
        let (out, a, b) = broadcast_maps(&[2, 3], &[3]).unwrap();
        assert_eq!(out, vec![2, 3]);
        assert_eq!(a, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(b, vec![0, 1, 2, 0, 1, 2]);
        let (out, _, b) = broadcast_maps(&[2, 3], &[2, 1]).unwrap();
        assert_eq!(out, vec![2, 3]);
        assert_eq!(b, vec![0, 0, 0, 1, 1, 1]);
        assert!(broadcast_maps(&[2, 3], &[2]).is_none());
    }

    #[test]
    fn softmax_vjp_sums_to_zero() {
        let y = softmax(&[0.3, -1.0, 2.0]);
        let g = normalizer_vjp(Normalizer::Softmax, &y, &[1.0, 2.0, -0.5]);
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
    }
}
