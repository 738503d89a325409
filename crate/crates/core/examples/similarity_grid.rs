//! Pooled-feature cosine similarity between d, d', p and p' after every
//! epoch, for plain decoder attention and for gated cross-attention.
//! Decoder attention rebuilds each protein position from drug values, so p'
//! can drift toward d; gating only rescales a side's own values.
//!
//! cargo run --release --example similarity_grid -- [epochs]

mod common;

use gca_dti::data::{gen_synthetic, split, vocabularies};
use gca_dti::metrics::{pooled_populations, similarity_grid};
use gca_dti::model::{train_with, DtiModel, InteractionMode, ModelConfig, TrainConfig};

fn main() -> gca_dti::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let synth = common::small_synthetic(0);
    let data = gen_synthetic(&synth)?;
    let (train_recs, test_recs) = split(&data.records, 1.0 / 6.0, 0)?;
    let (dv, pv) = vocabularies(&data.records)?;
    for mode in [InteractionMode::Decoder, InteractionMode::Gca] {
        let mut spec = common::small_spec(&synth);
        spec.interaction = mode;
        if mode == InteractionMode::Decoder {
            spec.use_residual = false;
            spec.use_prenorm = false;
        }
        let mut model = DtiModel::new(ModelConfig::new(spec, dv.clone(), pv.clone())?, 0)?;
        let tr = model.examples(&train_recs)?;
        let te = model.examples(&test_recs)?;
        let cfg = TrainConfig {
            lr: 2e-3,
            epochs,
            ..Default::default()
        };
        println!("{}: epoch  sim(p',d)  sim(p',p)", mode.name());
        train_with(&mut model, &tr, None, &cfg, |rec, m| {
            let pops = pooled_populations(m, &te)?;
            let grid = similarity_grid([&pops[0], &pops[1], &pops[2], &pops[3]], rec.epoch)?;
            println!(
                "{:>12}  {:>9.4}  {:>9.4}{}",
                rec.epoch,
                grid.values[3][0],
                grid.values[3][2],
                if grid.protein_mixed() { "  p' closer to d" } else { "" }
            );
            Ok(())
        })?;
    }
    Ok(())
}
