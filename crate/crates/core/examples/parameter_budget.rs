//! Interaction-scope parameter counts of each mode and the head width that
//! gives a no-interaction model the same budget as GCA.
//!
//! cargo run --example parameter_budget

use gca_dti::encoders::EncoderConfig;
use gca_dti::model::{interaction_parameter_count, matched_baseline, InteractionMode, ModelSpec};

fn main() {
    for f in [16, 64, 128] {
        let gca = ModelSpec {
            encoder: EncoderConfig {
                embed_dim: f,
                ..Default::default()
            },
            ..Default::default()
        };
        println!("feature dim {f}, head width {}", gca.head_hidden);
        for mode in [InteractionMode::Gca, InteractionMode::Decoder, InteractionMode::Ap, InteractionMode::None] {
            let spec = ModelSpec {
                interaction: mode,
                ..gca.clone()
            };
            println!("  {:<8} {:>9}", mode.name(), interaction_parameter_count(&spec));
        }
        let base = matched_baseline(&gca);
        println!(
            "  matched none: head width {} -> {} parameters",
            base.head_hidden,
            interaction_parameter_count(&base)
        );
    }
}
