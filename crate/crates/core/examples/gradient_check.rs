//! Finite-difference check of every graph op and of the full model in each
//! interaction mode.
//!
//! cargo run --release --example gradient_check -- [seeds]

use gca_dti::autodiff::op_suite;
use gca_dti::model::{end_to_end_check, InteractionMode, ModelSpec};

fn main() -> gca_dti::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let (h, tol) = (1e-5, 1e-4);
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut note = |name: String, rel: f64| match worst.iter_mut().find(|w| w.0 == name) {
        Some(w) => w.1 = w.1.max(rel),
        None => worst.push((name, rel)),
    };
    for seed in 0..seeds {
        for c in op_suite(seed, h, tol)? {
            note(c.op.to_string(), c.report.max_rel_error);
        }
        for mode in [InteractionMode::Gca, InteractionMode::Decoder, InteractionMode::Ap, InteractionMode::None] {
            let spec = ModelSpec {
                interaction: mode,
                ..Default::default()
            };
            let r = end_to_end_check(&spec, seed, h, tol)?;
            note(format!("model/{}", mode.name()), r.max_rel_error);
        }
    }
    println!("{:<18} {:>12}  status (tol {tol:e}, {seeds} seeds)", "check", "max rel err");
    for (name, rel) in &worst {
        println!("{name:<18} {rel:>12.3e}  {}", if *rel < tol { "pass" } else { "FAIL" });
    }
    Ok(())
}
