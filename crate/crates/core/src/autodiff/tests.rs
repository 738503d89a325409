use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::GcaError;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Projection onto the simplex by bisection on the threshold; independent of
/// the sort-based kernel.
fn simplex_projection_bisect(z: &[f64]) -> Vec<f64> {
    let mass = |tau: f64| z.iter().map(|&v| (v - tau).max(0.0)).sum::<f64>();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (max - 1.0, max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    z.iter().map(|&v| (v - tau).max(0.0)).collect()
}

#[test]
fn matmul_examples() {
    let mut g = Graph::new();
    let i = g.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
    let b = g.constant(Tensor::from_rows(&[vec![3.0], vec![4.0]]));
    let out = g.matmul(i, b).unwrap();
    assert_eq!(g.value(out).data(), &[3.0, 4.0]);

    let a = g.constant(Tensor::from_rows(&[vec![1.0, 2.0]]));
    let out = g.matmul(a, b).unwrap();
    assert_eq!(g.value(out).data(), &[11.0]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[2, 3]));
    match g.matmul(a, b) {
        Err(GcaError::Dimension(msg)) => assert!(msg.contains("[2, 3]"), "{msg}"),
        other => panic!("expected dimension error, got {other:?}"),
    }
}

#[test]
fn matmul_gradient() {
    let mut r = rng(1);
    let a = Tensor::randn(&[4, 3], 1.0, &mut r);
    let b = Tensor::randn(&[3, 5], 1.0, &mut r);
    let w = Tensor::randn(&[4, 5], 1.0, &mut r);
    let report = finite_diff_check(
        |g, v| {
            let p = g.matmul(v[0], v[1])?;
            let w = g.constant(w.clone());
            let s = g.mul(p, w)?;
            Ok(g.sum(s))
        },
        &[a, b],
        H,
        TOL,
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn softmax_examples() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::from_rows(&[vec![0.0, 0.0]]));
    let y = g.softmax_rows(x).unwrap();
    assert_eq!(g.value(y).data(), &[0.5, 0.5]);

    let x = g.constant(Tensor::from_rows(&[vec![1f64.ln(), 3f64.ln()]]));
    let y = g.softmax_rows(x).unwrap();
    assert!((g.value(y).data()[0] - 0.25).abs() < 1e-12);
    assert!((g.value(y).data()[1] - 0.75).abs() < 1e-12);

    let x = g.constant(Tensor::from_rows(&[vec![1000.0, 0.0]]));
    let y = g.softmax_rows(x).unwrap();
    assert!(g.value(y).all_finite());
    assert!((g.value(y).data()[0] - 1.0).abs() < 1e-12);
    assert!(g.value(y).data()[1] < 1e-300);
}

#[test]
fn normalizers_reject_nan() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::from_rows(&[vec![f64::NAN, 0.0]]));
    assert!(matches!(g.softmax_rows(x), Err(GcaError::Numeric(_))));
    assert!(matches!(g.sparsemax_rows(x), Err(GcaError::Numeric(_))));
}

#[test]
fn sparsemax_examples() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]));
    let y = g.sparsemax_rows(x).unwrap();
    assert_eq!(g.value(y).data(), &[0.5, 0.5, 1.0, 0.0]);
}

#[test]
fn sparsemax_matches_bisection_oracle() {
    let mut r = rng(7);
    for _ in 0..200 {
        let z = Tensor::randn(&[5], 1.5, &mut r);
        let p = sparsemax(z.data());
        let q = simplex_projection_bisect(z.data());
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-8, "{p:?} vs {q:?}");
        }
    }
}

#[test]
fn masked_columns_are_exactly_zero() {
    let mut g = Graph::new();
    let x = g.param(Tensor::from_rows(&[vec![0.3, 1.0, 9.0], vec![-1.0, 2.0, 5.0]]));
    for kind in [Normalizer::Softmax, Normalizer::Sparsemax] {
        let y = g.normalize_rows(x, kind, 2).unwrap();
        let v = g.value(y);
        assert_eq!(v.data()[2], 0.0);
        assert_eq!(v.data()[5], 0.0);
        assert!((v.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn normalizer_gradients() {
    let mut r = rng(3);
    let x = Tensor::randn(&[3, 6], 1.0, &mut r);
    let w = Tensor::randn(&[3, 6], 1.0, &mut r);
    for kind in [Normalizer::Softmax, Normalizer::Sparsemax] {
        let w = w.clone();
        let report = finite_diff_check(
            |g, v| {
                let y = g.normalize_rows(v[0], kind, 5)?;
                let w = g.constant(w.clone());
                let s = g.mul(y, w)?;
                Ok(g.sum(s))
            },
            std::slice::from_ref(&x),
            H,
            TOL,
        )
        .unwrap();
        assert!(report.passed, "{kind:?}: {report:?}");
    }
}

#[test]
fn conv1d_identity_and_averaging() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::new(vec![4, 1], vec![1.0, -2.0, 3.0, 0.5]).unwrap());
    let k = g.constant(Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap());
    let b = g.constant(Tensor::vector(vec![0.0]));
    let y = g.conv1d(x, k, b).unwrap();
    assert_eq!(g.value(y).data(), g.value(x).data());

    let ones = g.constant(Tensor::filled(&[5, 1], 1.0));
    let avg = g.constant(Tensor::filled(&[3, 1, 1], 1.0 / 3.0));
    let y = g.conv1d(ones, avg, b).unwrap();
    let v = g.value(y).data();
    for &interior in &v[1..4] {
        assert!((interior - 1.0).abs() < 1e-12);
    }
    assert!((v[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((v[4] - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn conv1d_rejects_even_width() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::zeros(&[4, 2]));
    let k = g.constant(Tensor::zeros(&[2, 2, 3]));
    let b = g.constant(Tensor::zeros(&[3]));
    assert!(matches!(g.conv1d(x, k, b), Err(GcaError::Config(_))));
}

#[test]
fn conv1d_gradient() {
    let mut r = rng(11);
    let x = Tensor::randn(&[6, 3], 1.0, &mut r);
    let k = Tensor::randn(&[3, 3, 4], 0.5, &mut r);
    let b = Tensor::randn(&[4], 0.5, &mut r);
    let w = Tensor::randn(&[6, 4], 1.0, &mut r);
    let report = finite_diff_check(
        |g, v| {
            let y = g.conv1d(v[0], v[1], v[2])?;
            let w = g.constant(w.clone());
            let s = g.mul(y, w)?;
            Ok(g.sum(s))
        },
        &[x, k, b],
        H,
        TOL,
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn elementwise_examples() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
    let b = g.constant(Tensor::vector(vec![2.0]));
    let y = g.mul(a, b).unwrap();
    assert_eq!(g.value(y).data(), &[2.0, 4.0, 6.0]);

    let x = g.constant(Tensor::vector(vec![-1.0, 0.0, 2.0]));
    let y = g.relu(x);
    assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);

    let m = g.constant(Tensor::zeros(&[2, 3]));
    let bad = g.constant(Tensor::zeros(&[2]));
    assert!(matches!(g.add(m, bad), Err(GcaError::Dimension(_))));
}

#[test]
fn broadcast_mul_gradient() {
    let mut r = rng(5);
    let col = Tensor::randn(&[4, 1], 1.0, &mut r);
    let mat = Tensor::randn(&[4, 3], 1.0, &mut r);
    let row = Tensor::randn(&[3], 1.0, &mut r);
    let report = finite_diff_check(
        |g, v| {
            let a = g.mul(v[0], v[1])?;
            let b = g.add(a, v[2])?;
            let c = g.mul(b, b)?;
            Ok(g.sum(c))
        },
        &[col, mat, row],
        H,
        TOL,
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn pool_examples() {
    let mut g = Graph::new();
    let one = g.constant(Tensor::from_rows(&[vec![4.0, -1.0]]));
    for mode in [PoolMode::Max, PoolMode::Mean] {
        let y = g.pool(one, mode, 1).unwrap();
        assert_eq!(g.value(y).data(), &[4.0, -1.0]);
    }
    let x = g.constant(Tensor::from_rows(&[vec![1.0, 5.0], vec![3.0, 2.0]]));
    let y = g.pool(x, PoolMode::Max, 2).unwrap();
    assert_eq!(g.value(y).data(), &[3.0, 5.0]);
    let y = g.pool(x, PoolMode::Mean, 2).unwrap();
    assert_eq!(g.value(y).data(), &[2.0, 3.5]);
    assert!(matches!(g.pool(x, PoolMode::Max, 0), Err(GcaError::Dimension(_))));
}

#[test]
fn pool_max_routes_to_first_argmax() {
    let mut g = Graph::new();
    let x = g.param(Tensor::from_rows(&[vec![2.0], vec![2.0], vec![1.0]]));
    let y = g.pool(x, PoolMode::Max, 3).unwrap();
    let s = g.sum(y);
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[1.0, 0.0, 0.0]);
}

#[test]
fn pool_gradients() {
    let mut r = rng(9);
    let x = Tensor::randn(&[5, 3], 1.0, &mut r);
    let w = Tensor::randn(&[3], 1.0, &mut r);
    for mode in [PoolMode::Max, PoolMode::Mean] {
        let w = w.clone();
        let report = finite_diff_check(
            |g, v| {
                let p = g.pool(v[0], mode, 4)?;
                let w = g.constant(w.clone());
                let s = g.mul(p, w)?;
                Ok(g.sum(s))
            },
            std::slice::from_ref(&x),
            H,
            TOL,
        )
        .unwrap();
        assert!(report.passed, "{mode:?}: {report:?}");
    }
}

#[test]
fn layer_norm_examples() {
    let mut g = Graph::new();
    let gain = g.constant(Tensor::filled(&[2], 1.0));
    let bias = g.constant(Tensor::zeros(&[2]));
    let x = g.constant(Tensor::from_rows(&[vec![4.0, 4.0], vec![1.0, 3.0]]));
    let y = g.layer_norm(x, gain, bias).unwrap();
    let v = g.value(y).data();
    assert_eq!(&v[..2], &[0.0, 0.0]);
    assert!((v[2] + 1.0).abs() < 1e-4 && (v[3] - 1.0).abs() < 1e-4);

    let narrow = g.constant(Tensor::zeros(&[3, 1]));
    let g1 = g.constant(Tensor::zeros(&[1]));
    assert!(matches!(g.layer_norm(narrow, g1, g1), Err(GcaError::Config(_))));
}

#[test]
fn layer_norm_gradient() {
    let mut r = rng(13);
    let x = Tensor::randn(&[3, 5], 1.0, &mut r);
    let gain = Tensor::randn(&[5], 1.0, &mut r);
    let bias = Tensor::randn(&[5], 1.0, &mut r);
    let w = Tensor::randn(&[3, 5], 1.0, &mut r);
    let report = finite_diff_check(
        |g, v| {
            let y = g.layer_norm(v[0], v[1], v[2])?;
            let w = g.constant(w.clone());
            let s = g.mul(y, w)?;
            Ok(g.sum(s))
        },
        &[x, gain, bias],
        H,
        TOL,
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn mse_examples() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![1.0, 2.0]));
    let l = g.mse_loss(x, x).unwrap();
    assert_eq!(g.value(l).item(), 0.0);
    let z = g.constant(Tensor::vector(vec![0.0, 0.0]));
    let l = g.mse_loss(x, z).unwrap();
    assert_eq!(g.value(l).item(), 2.5);
}

#[test]
fn embedding_rejects_out_of_range_id() {
    let mut g = Graph::new();
    let t = g.param(Tensor::zeros(&[4, 2]));
    assert!(matches!(g.embedding(t, &[0, 4]), Err(GcaError::Index(_))));
}

#[test]
fn embedding_concat_slice_gradient() {
    let mut r = rng(17);
    let table = Tensor::randn(&[5, 4], 1.0, &mut r);
    let target = Tensor::randn(&[3, 6], 1.0, &mut r);
    let report = finite_diff_check(
        |g, v| {
            let e = g.embedding(v[0], &[2, 0, 2])?;
            let left = g.slice(e, 1, 3)?;
            let both = g.concat(&[e, left])?;
            let t = g.constant(target.clone());
            g.mse_loss(both, t)
        },
        &[table],
        H,
        TOL,
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn shared_input_accumulates_gradient() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![3.0]));
    let a = g.scale(x, 2.0);
    let b = g.mul(x, x).unwrap();
    let c = g.add(a, b).unwrap();
    let s = g.sum(c);
    g.backward(s).unwrap();
    // d/dx (2x + x^2) = 2 + 2x
    assert_eq!(g.grad(x).unwrap(), &[8.0]);
}

#[test]
fn constants_get_no_gradient() {
    let mut g = Graph::new();
    let c = g.constant(Tensor::vector(vec![1.0]));
    let p = g.param(Tensor::vector(vec![2.0]));
    let y = g.mul(c, p).unwrap();
    g.backward(y).unwrap();
    assert!(g.grad(c).is_none());
    assert_eq!(g.grad(p).unwrap(), &[1.0]);
}

#[test]
fn softmax_composite_loss_gradient() {
    let mut r = rng(21);
    let q = Tensor::randn(&[4, 3], 1.0, &mut r);
    let k = Tensor::randn(&[5, 3], 1.0, &mut r);
    let report = finite_diff_check(
        |g, v| {
            let kt = g.transpose(v[1])?;
            let s = g.matmul(v[0], kt)?;
            let a = g.softmax_rows(s)?;
            let sq = g.mul(a, a)?;
            Ok(g.sum(sq))
        },
        &[q, k],
        H,
        TOL,
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn sparsemax_composite_loss_gradient() {
    // Inputs with well separated entries keep the support fixed under +-h.
    let x = Tensor::from_rows(&[vec![0.9, 0.1, -1.0, 0.45], vec![0.2, 0.5, 0.0, -0.7]]);
    let w = Tensor::from_rows(&[vec![1.0, -2.0, 0.5, 3.0], vec![0.3, 0.7, -1.1, 2.0]]);
    let report = finite_diff_check(
        |g, v| {
            let y = g.sparsemax_rows(v[0])?;
            let w = g.constant(w.clone());
            let s = g.mul(y, w)?;
            let t = g.tanh(s);
            Ok(g.sum(t))
        },
        &[x],
        H,
        TOL,
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn forward_is_deterministic() {
    let run = || {
        let mut r = rng(99);
        let mut g = Graph::new();
        let x = g.param(Tensor::randn(&[6, 4], 1.0, &mut r));
        let k = g.param(Tensor::randn(&[3, 4, 4], 1.0, &mut r));
        let b = g.param(Tensor::randn(&[4], 1.0, &mut r));
        let y = g.conv1d(x, k, b).unwrap();
        let y = g.softmax_rows(y).unwrap();
        g.value(y).clone()
    };
    assert_eq!(run(), run());
}

mod properties {
    use proptest::prelude::*;

    use super::*;

    fn kind() -> impl Strategy<Value = Normalizer> {
        prop_oneof![Just(Normalizer::Softmax), Just(Normalizer::Sparsemax)]
    }

    proptest! {
        #[test]
        fn normalizers_map_onto_the_simplex(
            kind in kind(),
            z in prop::collection::vec(-50.0f64..50.0, 1..40),
            shift in -100.0f64..100.0,
        ) {
            let y = kind.apply(&z);
            prop_assert!(y.iter().all(|&v| v >= 0.0));
            prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
            for (a, b) in y.iter().zip(kind.apply(&shifted)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            for i in 0..z.len() {
                for j in 0..z.len() {
                    if z[i] > z[j] {
                        prop_assert!(y[i] >= y[j]);
                    }
                }
            }
        }

        #[test]
        fn sparsemax_is_the_simplex_projection(z in prop::collection::vec(-5.0f64..5.0, 1..64)) {
            for (a, b) in sparsemax(&z).iter().zip(simplex_projection_bisect(&z)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn masked_rows_ignore_padding(
            kind in kind(),
            seed in 0u64..10_000,
            rows in 1usize..5,
            (cols, valid) in (1usize..10).prop_flat_map(|c| (Just(c), 1..=c)),
        ) {
            let mut g = Graph::new();
            let x = g.constant(Tensor::randn(&[rows, cols], 3.0, &mut rng(seed)));
            let y = g.normalize_rows(x, kind, valid).unwrap();
            for i in 0..rows {
                let row = g.value(y).row(i);
                prop_assert!((row[..valid].iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(row[valid..].iter().all(|&v| v == 0.0));
            }
        }
    }
}
