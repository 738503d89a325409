use serde::{Deserialize, Serialize};

use crate::attention::{AttentionConfig, GcaSwitches};
use crate::autodiff::{Normalizer, PoolMode};
use crate::config::{self, Entry};
use crate::encoders::{ConvLayer, EncoderConfig, EncoderKind, SequenceKind, Vocabulary};
use crate::error::{GcaError, Result};

/// How drug and protein features interact before the prediction head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InteractionMode {
    /// Pool each side independently.
    None,
    /// Gated cross-attention.
    Gca,
    /// Transformer decoder attention in both directions.
    Decoder,
    /// Attentive pooling.
    Ap,
}

impl InteractionMode {
    pub fn name(self) -> &'static str {
        match self {
            InteractionMode::None => "none",
            InteractionMode::Gca => "gca",
            InteractionMode::Decoder => "decoder",
            InteractionMode::Ap => "ap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(InteractionMode::None),
            "gca" => Some(InteractionMode::Gca),
            "decoder" => Some(InteractionMode::Decoder),
            "ap" => Some(InteractionMode::Ap),
            _ => None,
        }
    }
}

/// Architecture hyperparameters, independent of the data vocabularies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub encoder: EncoderConfig,
    pub interaction: InteractionMode,
    pub num_heads: usize,
    pub inner_normalizer: Normalizer,
    pub outer_normalizer: Normalizer,
    pub use_residual: bool,
    pub use_prenorm: bool,
    pub switches: GcaSwitches,
    pub pooling: PoolMode,
    pub head_hidden: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            encoder: EncoderConfig::default(),
            interaction: InteractionMode::Gca,
            num_heads: 2,
            inner_normalizer: Normalizer::Softmax,
            outer_normalizer: Normalizer::Softmax,
            use_residual: true,
            use_prenorm: true,
            switches: GcaSwitches::default(),
            pooling: PoolMode::Max,
            head_hidden: 256,
        }
    }
}

fn layers_from(kernels: &[usize], channels: &[usize]) -> Result<Vec<ConvLayer>> {
    if kernels.len() != channels.len() {
        return Err(GcaError::Config(format!(
            "{} kernel widths but {} channel counts",
            kernels.len(),
            channels.len()
        )));
    }
    Ok(kernels
        .iter()
        .zip(channels)
        .map(|(&width, &channels)| ConvLayer { width, channels })
        .collect())
}

impl ModelSpec {
    pub fn feature_dim(&self) -> usize {
        self.encoder.feature_dim(SequenceKind::Drug)
    }

    pub fn attention(&self) -> AttentionConfig {
        AttentionConfig {
            num_heads: self.num_heads,
            feature_dim: self.feature_dim(),
            inner_normalizer: self.inner_normalizer,
            outer_normalizer: self.outer_normalizer,
            use_residual: self.use_residual,
            use_prenorm: self.use_prenorm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.head_hidden == 0 {
            return Err(GcaError::Config("head_hidden must be positive".into()));
        }
        if matches!(self.interaction, InteractionMode::Gca | InteractionMode::Decoder) {
            self.attention().validate()?;
            if self.use_prenorm && self.feature_dim() < 2 {
                return Err(GcaError::Config(
                    "pre-normalization needs a feature dimension of at least 2".into(),
                ));
            }
        }
        Ok(())
    }

    /// Applies one setting; returns `false` when the key is not an
    /// architecture key.
    pub fn apply(&mut self, e: &Entry) -> Result<bool> {
        let enc = &mut self.encoder;
        match e.key.as_str() {
            "encoder" => enc.kind = config::enum_value(e, EncoderKind::parse, "embed|cnn")?,
            "embed_dim" => enc.embed_dim = config::usize_value(e)?,
            "drug_kernels" | "drug_channels" | "protein_kernels" | "protein_channels" => {
                let list = config::list_value(e)?;
                let drug = e.key.starts_with("drug");
                let layers = if drug { &mut enc.drug_layers } else { &mut enc.protein_layers };
                let (mut kernels, mut channels): (Vec<usize>, Vec<usize>) =
                    layers.iter().map(|l| (l.width, l.channels)).unzip();
                if e.key.ends_with("kernels") {
                    kernels = list;
                } else {
                    channels = list;
                }
                // lengths are reconciled in validate once both lists are known
                let n = kernels.len().max(channels.len());
                kernels.resize(n, 1);
                channels.resize(n, 1);
                *layers = layers_from(&kernels, &channels)?;
            }
            "max_len_drug" => enc.max_len_drug = config::usize_value(e)?,
            "max_len_protein" => enc.max_len_protein = config::usize_value(e)?,
            "interaction" => {
                self.interaction =
                    config::enum_value(e, InteractionMode::parse, "none|gca|decoder|ap")?
            }
            "num_heads" => self.num_heads = config::usize_value(e)?,
            "inner_normalizer" => {
                self.inner_normalizer =
                    config::enum_value(e, Normalizer::parse, "softmax|sparsemax")?
            }
            "outer_normalizer" => {
                self.outer_normalizer =
                    config::enum_value(e, Normalizer::parse, "softmax|sparsemax")?
            }
            "use_residual" => self.use_residual = config::bool_value(e)?,
            "use_prenorm" => self.use_prenorm = config::bool_value(e)?,
            "drug_attention" => self.switches.drug_attention = config::bool_value(e)?,
            "target_attention" => self.switches.target_attention = config::bool_value(e)?,
            "pooling" => self.pooling = config::enum_value(e, PoolMode::parse, "max|mean")?,
            "head_hidden" => self.head_hidden = config::usize_value(e)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let enc = &self.encoder;
        let widths = |l: &[ConvLayer]| config::join_list(&l.iter().map(|c| c.width).collect::<Vec<_>>());
        let chans = |l: &[ConvLayer]| config::join_list(&l.iter().map(|c| c.channels).collect::<Vec<_>>());
        vec![
            ("encoder", enc.kind.name().into()),
            ("embed_dim", enc.embed_dim.to_string()),
            ("drug_kernels", widths(&enc.drug_layers)),
            ("drug_channels", chans(&enc.drug_layers)),
            ("protein_kernels", widths(&enc.protein_layers)),
            ("protein_channels", chans(&enc.protein_layers)),
            ("max_len_drug", enc.max_len_drug.to_string()),
            ("max_len_protein", enc.max_len_protein.to_string()),
            ("interaction", self.interaction.name().into()),
            ("num_heads", self.num_heads.to_string()),
            ("inner_normalizer", self.inner_normalizer.name().into()),
            ("outer_normalizer", self.outer_normalizer.name().into()),
            ("use_residual", self.use_residual.to_string()),
            ("use_prenorm", self.use_prenorm.to_string()),
            ("drug_attention", self.switches.drug_attention.to_string()),
            ("target_attention", self.switches.target_attention.to_string()),
            ("pooling", self.pooling.name().into()),
            ("head_hidden", self.head_hidden.to_string()),
        ]
    }
}

/// Full model description: architecture plus the vocabularies that fix the
/// embedding table sizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub spec: ModelSpec,
    pub drug_vocab: Vocabulary,
    pub protein_vocab: Vocabulary,
}

impl ModelConfig {
    pub fn new(spec: ModelSpec, drug_vocab: Vocabulary, protein_vocab: Vocabulary) -> Result<Self> {
        spec.validate()?;
        if drug_vocab.kind() != SequenceKind::Drug || protein_vocab.kind() != SequenceKind::Protein {
            return Err(GcaError::Config("vocabulary kinds are swapped".into()));
        }
        Ok(ModelConfig {
            spec,
            drug_vocab,
            protein_vocab,
        })
    }

    pub fn vocab(&self, side: SequenceKind) -> &Vocabulary {
        match side {
            SequenceKind::Drug => &self.drug_vocab,
            SequenceKind::Protein => &self.protein_vocab,
        }
    }

    /// Canonical `key=value` text, one pair per line in a fixed order.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.spec.to_pairs() {
            out.push_str(&format!("{k}={v}\n"));
        }
        let syms = |v: &Vocabulary| v.symbols().iter().collect::<String>();
        out.push_str(&format!("drug_vocab={}\n", syms(&self.drug_vocab)));
        out.push_str(&format!("protein_vocab={}\n", syms(&self.protein_vocab)));
        out
    }

    pub fn from_canonical_text(text: &str) -> Result<Self> {
        let mut spec = ModelSpec::default();
        let (mut drug, mut protein) = (None, None);
        for e in config::parse_pairs(text)? {
            match e.key.as_str() {
                "drug_vocab" => drug = Some(e.value.chars().collect::<Vec<_>>()),
                "protein_vocab" => protein = Some(e.value.chars().collect::<Vec<_>>()),
                _ => {
                    if !spec.apply(&e)? {
                        return Err(config::unknown_key(&e));
                    }
                }
            }
        }
        let missing = || GcaError::Config("model config text lacks a vocabulary".into());
        ModelConfig::new(
            spec,
            Vocabulary::from_symbols(SequenceKind::Drug, drug.ok_or_else(missing)?),
            Vocabulary::from_symbols(SequenceKind::Protein, protein.ok_or_else(missing)?),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub test_fraction: f64,
    /// Start the output bias at the mean training affinity.
    pub init_bias_to_mean: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-4,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            test_fraction: 1.0 / 6.0,
            init_bias_to_mean: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr < 0.0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(GcaError::Config(
                "lr must be non-negative, batch_size and epochs positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(GcaError::Config("test_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn apply(&mut self, e: &Entry) -> Result<bool> {
        match e.key.as_str() {
            "lr" => self.lr = config::f64_value(e)?,
            "batch_size" => self.batch_size = config::usize_value(e)?,
            "epochs" => self.epochs = config::usize_value(e)?,
            "seed" => self.seed = config::u64_value(e)?,
            "test_fraction" => self.test_fraction = config::f64_value(e)?,
            "init_bias_to_mean" => self.init_bias_to_mean = config::bool_value(e)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("lr", self.lr.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("test_fraction", self.test_fraction.to_string()),
            ("init_bias_to_mean", self.init_bias_to_mean.to_string()),
        ]
    }
}
