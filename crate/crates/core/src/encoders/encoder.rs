use serde::{Deserialize, Serialize};

use super::vocab::{SequenceKind, TokenSequence};
use crate::autodiff::{Graph, Var};
use crate::error::{GcaError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderKind {
    /// Embedding lookup only.
    Embed,
    /// Embedding followed by conv1d + relu layers.
    Cnn,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Embed => "embed",
            EncoderKind::Cnn => "cnn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "embed" => Some(EncoderKind::Embed),
            "cnn" => Some(EncoderKind::Cnn),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub width: usize,
    pub channels: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub embed_dim: usize,
    pub drug_layers: Vec<ConvLayer>,
    pub protein_layers: Vec<ConvLayer>,
    pub max_len_drug: usize,
    pub max_len_protein: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        let layers = |widths: [usize; 3]| {
            widths
                .iter()
                .zip([32, 64, 96])
                .map(|(&width, channels)| ConvLayer { width, channels })
                .collect()
        };
        EncoderConfig {
            kind: EncoderKind::Embed,
            embed_dim: 128,
            drug_layers: layers([5, 7, 9]),
            protein_layers: layers([7, 9, 11]),
            max_len_drug: 100,
            max_len_protein: 1000,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.max_len_drug == 0 || self.max_len_protein == 0 {
            return Err(GcaError::Config(
                "embed_dim and max lengths must be positive".into(),
            ));
        }
        if self.kind == EncoderKind::Cnn {
            for l in self.drug_layers.iter().chain(&self.protein_layers) {
                if l.channels == 0 {
                    return Err(GcaError::Config("conv channel counts must be positive".into()));
                }
                if l.width % 2 == 0 {
                    return Err(GcaError::Config(format!(
                        "conv kernel width {} must be odd",
                        l.width
                    )));
                }
            }
        }
        if self.feature_dim(SequenceKind::Drug) != self.feature_dim(SequenceKind::Protein) {
            return Err(GcaError::Config(format!(
                "drug and protein encoders must output the same feature dimension ({} vs {})",
                self.feature_dim(SequenceKind::Drug),
                self.feature_dim(SequenceKind::Protein)
            )));
        }
        Ok(())
    }

    pub fn layers(&self, side: SequenceKind) -> &[ConvLayer] {
        match (self.kind, side) {
            (EncoderKind::Embed, _) => &[],
            (EncoderKind::Cnn, SequenceKind::Drug) => &self.drug_layers,
            (EncoderKind::Cnn, SequenceKind::Protein) => &self.protein_layers,
        }
    }

    pub fn max_len(&self, side: SequenceKind) -> usize {
        match side {
            SequenceKind::Drug => self.max_len_drug,
            SequenceKind::Protein => self.max_len_protein,
        }
    }

    /// Width of the per-position features the encoder emits.
    pub fn feature_dim(&self, side: SequenceKind) -> usize {
        self.layers(side)
            .last()
            .map_or(self.embed_dim, |l| l.channels)
    }

    /// Parameter shapes in declaration order: embedding table, then
    /// (kernels, bias) per conv layer.
    pub fn param_shapes(&self, side: SequenceKind, vocab_size: usize) -> Vec<Vec<usize>> {
        let mut shapes = vec![vec![vocab_size, self.embed_dim]];
        let mut c_in = self.embed_dim;
        for l in self.layers(side) {
            shapes.push(vec![l.width, c_in, l.channels]);
            shapes.push(vec![l.channels]);
            c_in = l.channels;
        }
        shapes
    }
}

/// Graph handles for one encoder's parameters.
#[derive(Clone, Debug)]
pub struct EncoderVars {
    pub embedding: Var,
    pub convs: Vec<(Var, Var)>,
}

/// Per-position features `[max_len, f]` for a token sequence. Padding rows are
/// carried through and masked downstream.
pub fn encode(g: &mut Graph, seq: &TokenSequence, vars: &EncoderVars) -> Result<Var> {
    let table_shape = g.shape(vars.embedding).to_vec();
    if table_shape.len() != 2 {
        return Err(GcaError::Config(format!(
            "embedding table must be a matrix, got {table_shape:?}"
        )));
    }
    let mut x = g.embedding(vars.embedding, &seq.ids)?;
    for (i, &(k, b)) in vars.convs.iter().enumerate() {
        let c_in = g.shape(x)[1];
        let ks = g.shape(k).to_vec();
        if ks.len() != 3 || ks[1] != c_in {
            return Err(GcaError::Config(format!(
                "conv layer {i}: kernel shape {ks:?} does not accept {c_in} input channels"
            )));
        }
        let y = g.conv1d(x, k, b)?;
        x = g.relu(y);
    }
    Ok(x)
}
