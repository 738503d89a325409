//! Train a GCA model on a small planted-motif dataset and print the learning
//! curve and the held-out metrics.
//!
//! cargo run --release --example train_synthetic -- [epochs]

mod common;

use gca_dti::metrics::evaluate_model;

fn main() -> gca_dti::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(15);
    let synth = common::small_synthetic(0);
    let t = common::train_on(&synth, common::small_spec(&synth), epochs)?;
    println!("{} train / {} test records", t.train.len(), t.test.len());
    println!("epoch  train_mse  test_mse  test_ci");
    for e in &t.log.epochs {
        println!(
            "{:>5}  {:>9.4}  {:>8.4}  {:>7.4}",
            e.epoch,
            e.train_mse,
            e.val_mse.unwrap_or(f64::NAN),
            e.val_c_index.unwrap_or(f64::NAN)
        );
    }
    let report = evaluate_model(&t.model, &t.model.examples(&t.test)?)?;
    println!("held out: mse {:.4}, c-index {:.4} over {} pairs", report.mse, report.c_index, report.n_pairs_evaluated);
    println!("noise floor (sigma^2): {:.4}", synth.sigma * synth.sigma);
    Ok(())
}
