//! Finite-difference checks for every graph op on seeded random inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{finite_diff_check, GradCheckReport};
use super::graph::{Graph, PoolMode, Var};
use super::kernels::Normalizer;
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct OpCheck {
    pub op: &'static str,
    pub report: GradCheckReport,
}

/// Reduces `out` to a scalar through fixed, non-uniform weights so that
/// ops whose plain sum is constant (the normalizers) still get a
/// meaningful gradient.
fn probe(g: &mut Graph, out: Var) -> Result<Var> {
    let shape = g.shape(out).to_vec();
    let n: usize = shape.iter().product();
    let w: Vec<f64> = (0..n).map(|i| (0.731 * i as f64 + 0.3).sin()).collect();
    let w = g.constant(Tensor::new(shape, w)?);
    let y = g.mul(out, w)?;
    Ok(g.sum(y))
}

type Body = fn(&mut Graph, &[Var]) -> Result<Var>;

fn cases() -> Vec<(&'static str, Vec<Vec<usize>>, Body)> {
    vec![
        ("matmul", vec![vec![3, 4], vec![4, 2]], |g, v| g.matmul(v[0], v[1])),
        ("transpose", vec![vec![3, 4]], |g, v| g.transpose(v[0])),
        ("add", vec![vec![3, 4], vec![4]], |g, v| g.add(v[0], v[1])),
        ("mul", vec![vec![3, 4], vec![1, 4]], |g, v| g.mul(v[0], v[1])),
        ("relu", vec![vec![3, 5]], |g, v| Ok(g.relu(v[0]))),
        ("tanh", vec![vec![3, 5]], |g, v| Ok(g.tanh(v[0]))),
        ("scale", vec![vec![3, 5]], |g, v| Ok(g.scale(v[0], -1.7))),
        ("softmax_rows", vec![vec![3, 6]], |g, v| g.softmax_rows(v[0])),
        ("sparsemax_rows", vec![vec![3, 6]], |g, v| g.sparsemax_rows(v[0])),
        ("softmax_masked", vec![vec![3, 6]], |g, v| {
            g.normalize_rows(v[0], Normalizer::Softmax, 4)
        }),
        ("sparsemax_masked", vec![vec![3, 6]], |g, v| {
            g.normalize_rows(v[0], Normalizer::Sparsemax, 4)
        }),
        ("conv1d", vec![vec![7, 3], vec![3, 3, 2], vec![2]], |g, v| {
            g.conv1d(v[0], v[1], v[2])
        }),
        ("pool_max", vec![vec![7, 3]], |g, v| g.pool(v[0], PoolMode::Max, 5)),
        ("pool_mean", vec![vec![7, 3]], |g, v| g.pool(v[0], PoolMode::Mean, 5)),
        ("layer_norm", vec![vec![4, 5], vec![5], vec![5]], |g, v| {
            g.layer_norm(v[0], v[1], v[2])
        }),
        ("embedding", vec![vec![6, 3]], |g, v| g.embedding(v[0], &[1, 4, 4, 0])),
        ("concat", vec![vec![3, 2], vec![3, 3]], |g, v| g.concat(&[v[0], v[1]])),
        ("slice", vec![vec![3, 6]], |g, v| g.slice(v[0], 1, 4)),
        ("reshape", vec![vec![3, 4]], |g, v| g.reshape(v[0], &[4, 3])),
        ("sum", vec![vec![3, 4]], |g, v| Ok(g.sum(v[0]))),
        ("mse_loss", vec![vec![5], vec![5]], |g, v| g.mse_loss(v[0], v[1])),
    ]
}

/// Names of the checked ops, in report order.
pub fn op_names() -> Vec<&'static str> {
    cases().into_iter().map(|c| c.0).collect()
}

/// Checks every op once on standard-normal inputs drawn from `seed`.
pub fn op_suite(seed: u64, h: f64, tol: f64) -> Result<Vec<OpCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cases()
        .into_iter()
        .map(|(op, shapes, body)| {
            let inputs: Vec<Tensor> = shapes.iter().map(|s| Tensor::randn(s, 1.0, &mut rng)).collect();
            let report = finite_diff_check(
                |g, v| {
                    let out = body(g, v)?;
                    probe(g, out)
                },
                &inputs,
                h,
                tol,
            )?;
            Ok(OpCheck { op, report })
        })
        .collect()
}
