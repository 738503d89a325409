//! Softmax versus sparsemax: the same scores normalized both ways, and the
//! gate a gated cross-attention head puts on a short sequence under each.
//!
//! cargo run --example sparsemax_attention

use gca_dti::attention::{gated_attention_vector, AttentionConfig, Projections};
use gca_dti::autodiff::{softmax, sparsemax, Graph, Normalizer, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(label: &str, v: &[f64]) {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    println!("{label:<10} [{}]", cells.join(", "));
}

fn main() -> gca_dti::Result<()> {
    let z = [2.0, 1.4, 0.3, -0.5, 1.9, -1.2];
    show("scores", &z);
    show("softmax", &softmax(&z));
    show("sparsemax", &sparsemax(&z));

    // one head gating 8 attended positions (the last 2 padding) with 5
    // counterpart queries
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = 4;
    let x = Tensor::randn(&[8, f], 1.0, &mut rng);
    let c = Tensor::randn(&[5, f], 1.0, &mut rng);
    let w: Vec<Tensor> = (0..3).map(|_| Tensor::randn(&[f, f], 1.5, &mut rng)).collect();
    println!();
    for norm in [Normalizer::Softmax, Normalizer::Sparsemax] {
        let mut cfg = AttentionConfig::new(f, 1);
        cfg.inner_normalizer = norm;
        let mut g = Graph::new();
        let (xv, cv) = (g.constant(x.clone()), g.constant(c.clone()));
        let proj = Projections {
            w_q: g.constant(w[0].clone()),
            w_k: g.constant(w[1].clone()),
            w_v: g.constant(w[2].clone()),
        };
        let a = gated_attention_vector(&mut g, xv, 6, cv, 5, &proj, &cfg)?;
        let gate = g.normalize_rows(a[0], norm, 6)?;
        show(&format!("{} gate", norm.name()), g.value(gate).data());
    }
    Ok(())
}
