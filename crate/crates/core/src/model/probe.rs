//! End-to-end gradient check of the full model at a size where every
//! parameter coordinate can be perturbed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DtiModel, Example, ModelConfig, ModelSpec};
use crate::autodiff::{finite_diff_check, GradCheckReport, Tensor};
use crate::encoders::{ConvLayer, EncoderKind, SequenceKind, Vocabulary};
use crate::error::Result;

const PROBE_DRUG_SYMBOLS: &str = "CNOc1()=";
const PROBE_PROTEIN_SYMBOLS: &str = "ACDEFGHIKLMNPQRSTVWY";

/// Keeps every architectural switch of `spec` but shrinks widths and lengths:
/// feature dimension `2 * num_heads`, sequence lengths 8 and 12, head width 8,
/// and conv stacks that keep their kernel widths.
pub fn probe_spec(spec: &ModelSpec) -> ModelSpec {
    let f = 2 * spec.num_heads.max(1);
    let mut s = spec.clone();
    let enc = &mut s.encoder;
    enc.max_len_drug = 8;
    enc.max_len_protein = 12;
    if enc.kind == EncoderKind::Cnn {
        enc.embed_dim = 3;
        for layers in [&mut enc.drug_layers, &mut enc.protein_layers] {
            *layers = layers
                .iter()
                .map(|l| ConvLayer { width: l.width, channels: f })
                .collect();
        }
    } else {
        enc.embed_dim = f;
    }
    s.head_hidden = 8;
    s
}

fn random_string<R: Rng>(symbols: &str, len: usize, rng: &mut R) -> String {
    let chars: Vec<char> = symbols.chars().collect();
    (0..len).map(|_| chars[rng.random_range(0..chars.len())]).collect()
}

/// Checks the batch-mean loss of a [`probe_spec`] model against central
/// differences over every parameter. Parameters keep their seeded
/// initialization, except that zero-initialized tensors (output projections,
/// biases) are redrawn from N(0, 1/fan) so that no path is trivially inactive.
/// Drawing every tensor at a fixed large scale instead blows activations up
/// through the conv stack and central differences drown in round-off. The
/// batch holds two random examples of random valid length.
pub fn end_to_end_check(spec: &ModelSpec, seed: u64, h: f64, tol: f64) -> Result<GradCheckReport> {
    let config = ModelConfig::new(
        probe_spec(spec),
        Vocabulary::from_symbols(SequenceKind::Drug, PROBE_DRUG_SYMBOLS.chars().collect()),
        Vocabulary::from_symbols(SequenceKind::Protein, PROBE_PROTEIN_SYMBOLS.chars().collect()),
    )?;
    let mut model = DtiModel::new(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in model.params_mut() {
        if p.data().iter().all(|&v| v == 0.0) {
            let fan = *p.shape().last().unwrap_or(&1);
            *p = Tensor::randn(p.shape(), 1.0 / (fan.max(1) as f64).sqrt(), &mut rng);
        }
    }
    let batch: Vec<Example> = (0..2)
        .map(|_| {
            let smiles = random_string(PROBE_DRUG_SYMBOLS, rng.random_range(2..=8), &mut rng);
            let fasta = random_string(PROBE_PROTEIN_SYMBOLS, rng.random_range(3..=12), &mut rng);
            model.example(&smiles, &fasta, rng.random_range(4.0..8.0))
        })
        .collect::<Result<_>>()?;
    finite_diff_check(|g, vars| model.batch_loss_graph(g, vars, &batch), model.params(), h, tol)
}
