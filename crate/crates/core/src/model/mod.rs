//! Encoders + interaction block + pooling + feed-forward head, assembled into
//! an affinity regressor with training, checkpoints and attention export.

mod checkpoint;
mod config;
mod probe;
mod train;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
};
pub use config::{InteractionMode, ModelConfig, ModelSpec, TrainConfig};
pub use probe::{end_to_end_check, probe_spec};
pub use train::{train, train_with, EpochRecord, TrainingLog};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attention::{
    attentive_pooling, cross_block, CrossKind, Direction, DirectionVars, GcaVars, HeadAttention,
    Projections,
};
use crate::autodiff::{Graph, Tensor, Var};
use crate::data::AffinityRecord;
use crate::encoders::{encode, tokenize, EncoderVars, SequenceKind, TokenSequence};
use crate::error::{GcaError, Result};

/// One tokenized (drug, protein, affinity) training or evaluation example.
#[derive(Clone, Debug)]
pub struct Example {
    pub drug: TokenSequence,
    pub protein: TokenSequence,
    pub affinity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Total,
    /// Attention (or attentive pooling) plus the prediction head.
    Interaction,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Init {
    Normal,
    /// Uniform in `±1/sqrt(fan_in)`.
    FanIn(usize),
    Xavier,
    Zeros,
    Ones,
}

#[derive(Clone, Debug)]
struct ParamDecl {
    name: String,
    shape: Vec<usize>,
    init: Init,
    scope: Scope,
}

fn decl(name: impl Into<String>, shape: Vec<usize>, init: Init, scope: Scope) -> ParamDecl {
    ParamDecl {
        name: name.into(),
        shape,
        init,
        scope,
    }
}

const DIRECTION_PREFIXES: [&str; 2] = ["p2d", "d2p"];

/// Parameter declarations in checkpoint order. `forward_graph` consumes the
/// graph variables in exactly this order.
fn declarations(cfg: &ModelConfig) -> Vec<ParamDecl> {
    let spec = &cfg.spec;
    let enc = &spec.encoder;
    let mut out = Vec::new();
    for (side, prefix) in [(SequenceKind::Drug, "drug"), (SequenceKind::Protein, "protein")] {
        let shapes = enc.param_shapes(side, cfg.vocab(side).size());
        out.push(decl(format!("{prefix}.embedding"), shapes[0].clone(), Init::Normal, Scope::Total));
        for (i, pair) in shapes[1..].chunks(2).enumerate() {
            let fan_in = pair[0][0] * pair[0][1];
            out.push(decl(format!("{prefix}.conv{i}.kernel"), pair[0].clone(), Init::FanIn(fan_in), Scope::Total));
            out.push(decl(format!("{prefix}.conv{i}.bias"), pair[1].clone(), Init::FanIn(fan_in), Scope::Total));
        }
    }
    let f = spec.feature_dim();
    let ia = Scope::Interaction;
    match spec.interaction {
        InteractionMode::None => {}
        InteractionMode::Gca | InteractionMode::Decoder => {
            for p in DIRECTION_PREFIXES {
                if spec.use_prenorm {
                    out.push(decl(format!("{p}.norm_self.gain"), vec![f], Init::Ones, ia));
                    out.push(decl(format!("{p}.norm_self.bias"), vec![f], Init::Zeros, ia));
                    out.push(decl(format!("{p}.norm_ctx.gain"), vec![f], Init::Ones, ia));
                    out.push(decl(format!("{p}.norm_ctx.bias"), vec![f], Init::Zeros, ia));
                }
                for w in ["w_q", "w_k", "w_v"] {
                    out.push(decl(format!("{p}.{w}"), vec![f, f], Init::Xavier, ia));
                }
                out.push(decl(format!("{p}.w_o"), vec![f, f], Init::Zeros, ia));
            }
        }
        InteractionMode::Ap => out.push(decl("ap.u", vec![f, f], Init::Xavier, ia)),
    }
    let h = spec.head_hidden;
    out.push(decl("head.w1", vec![2 * f, h], Init::FanIn(2 * f), ia));
    out.push(decl("head.b1", vec![h], Init::FanIn(2 * f), ia));
    out.push(decl("head.w2", vec![h, 1], Init::FanIn(h), ia));
    out.push(decl("head.b2", vec![1], Init::FanIn(h), ia));
    out
}

fn init_tensor(d: &ParamDecl, rng: &mut ChaCha8Rng) -> Tensor {
    match d.init {
        Init::Normal => Tensor::randn(&d.shape, 1.0, rng),
        Init::FanIn(n) => Tensor::uniform(&d.shape, 1.0 / (n as f64).sqrt(), rng),
        Init::Xavier => {
            let bound = (6.0 / (d.shape[0] + d.shape[1]) as f64).sqrt();
            Tensor::uniform(&d.shape, bound, rng)
        }
        Init::Zeros => Tensor::zeros(&d.shape),
        Init::Ones => Tensor::filled(&d.shape, 1.0),
    }
}

/// Interaction-scope parameter count implied by an architecture, independent
/// of vocabularies.
pub fn interaction_parameter_count(spec: &ModelSpec) -> usize {
    let f = spec.feature_dim();
    let attention = match spec.interaction {
        InteractionMode::None => 0,
        InteractionMode::Gca | InteractionMode::Decoder => {
            let norms = if spec.use_prenorm { 4 * f } else { 0 };
            2 * (norms + 4 * f * f)
        }
        InteractionMode::Ap => f * f,
    };
    let h = spec.head_hidden;
    attention + 2 * f * h + h + h + 1
}

/// A `mode=none` variant of `spec` whose head is widened so its
/// interaction-scope parameter count matches `spec`'s as closely as possible.
pub fn matched_baseline(spec: &ModelSpec) -> ModelSpec {
    let target = interaction_parameter_count(spec) as f64;
    let f = spec.feature_dim() as f64;
    let h = ((target - 1.0) / (2.0 * f + 2.0)).round().max(1.0) as usize;
    ModelSpec {
        interaction: InteractionMode::None,
        head_hidden: h,
        ..spec.clone()
    }
}

/// Per-head attention maps for one direction, detached from any graph.
#[derive(Clone, Debug)]
pub struct AttentionMaps {
    pub direction: Direction,
    pub heads: Vec<HeadAttention>,
}

/// Max/mean pooled feature vectors before (`d`, `p`) and after (`d_prime`,
/// `p_prime`) the interaction block.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledFeatures {
    pub d: Vec<f64>,
    pub p: Vec<f64>,
    pub d_prime: Vec<f64>,
    pub p_prime: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Forward {
    pub affinity: f64,
    pub pooled: PooledFeatures,
    pub drug_attention: Option<AttentionMaps>,
    pub protein_attention: Option<AttentionMaps>,
}

struct Trace {
    y: Var,
    pooled: [Var; 4],
    drug_attention: Option<AttentionMaps>,
    protein_attention: Option<AttentionMaps>,
}

/// Ranked positions for one head: `(position, gate weight)` by descending
/// weight, ties broken by position index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeadRanking {
    pub head: usize,
    pub positions: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttentionRanking {
    /// Drug positions gated by protein queries, one entry per head.
    pub drug: Vec<HeadRanking>,
    /// Protein positions gated by drug queries.
    pub protein: Vec<HeadRanking>,
}

/// Valid positions sorted by descending weight; equal weights keep position
/// order.
pub fn rank_positions(weights: &[f64], valid: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = weights[..valid].iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

#[derive(Clone, Debug, PartialEq)]
pub struct DtiModel {
    config: ModelConfig,
    names: Vec<String>,
    scopes: Vec<Scope>,
    params: Vec<Tensor>,
}

impl DtiModel {
    /// Freshly initialized model; the same seed gives identical parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let decls = declarations(&config);
        let params = decls.iter().map(|d| init_tensor(d, &mut rng)).collect();
        Ok(DtiModel {
            names: decls.iter().map(|d| d.name.clone()).collect(),
            scopes: decls.iter().map(|d| d.scope).collect(),
            config,
            params,
        })
    }

    /// Rebuilds a model from a config and parameters in declaration order.
    pub fn from_parts(config: ModelConfig, params: Vec<Tensor>) -> Result<Self> {
        let decls = declarations(&config);
        if decls.len() != params.len() {
            return Err(GcaError::Config(format!(
                "config declares {} parameter tensors, got {}",
                decls.len(),
                params.len()
            )));
        }
        for (d, t) in decls.iter().zip(&params) {
            if d.shape != t.shape() {
                return Err(GcaError::Config(format!(
                    "{} has shape {:?}, config expects {:?}",
                    d.name,
                    t.shape(),
                    d.shape
                )));
            }
        }
        Ok(DtiModel {
            names: decls.iter().map(|d| d.name.clone()).collect(),
            scopes: decls.iter().map(|d| d.scope).collect(),
            config,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&mut self.params[i])
    }

    pub fn parameter_count(&self, scope: Scope) -> usize {
        self.params
            .iter()
            .zip(&self.scopes)
            .filter(|(_, &s)| scope == Scope::Total || s == scope)
            .map(|(t, _)| t.len())
            .sum()
    }

    /// Tokenizes a raw SMILES / FASTA pair with this model's vocabularies and
    /// lengths.
    pub fn tokenize_pair(&self, smiles: &str, fasta: &str) -> Result<(TokenSequence, TokenSequence)> {
        let enc = &self.config.spec.encoder;
        Ok((
            tokenize(smiles, &self.config.drug_vocab, enc.max_len_drug)?,
            tokenize(fasta, &self.config.protein_vocab, enc.max_len_protein)?,
        ))
    }

    pub fn example(&self, smiles: &str, fasta: &str, affinity: f64) -> Result<Example> {
        let (drug, protein) = self.tokenize_pair(smiles, fasta)?;
        Ok(Example {
            drug,
            protein,
            affinity,
        })
    }

    /// Tokenizes records into examples, in order.
    pub fn examples(&self, records: &[AffinityRecord]) -> Result<Vec<Example>> {
        records
            .iter()
            .map(|r| self.example(&r.smiles, &r.fasta, r.affinity))
            .collect()
    }

    fn check_inputs(&self, drug: &TokenSequence, protein: &TokenSequence) -> Result<()> {
        let enc = &self.config.spec.encoder;
        for (seq, side, name) in [
            (drug, SequenceKind::Drug, "drug"),
            (protein, SequenceKind::Protein, "protein"),
        ] {
            if seq.kind != side {
                return Err(GcaError::Dimension(format!("{name} input has the wrong sequence kind")));
            }
            if seq.max_len() != enc.max_len(side) {
                return Err(GcaError::Dimension(format!(
                    "{name} sequence length {} does not match configured {}",
                    seq.max_len(),
                    enc.max_len(side)
                )));
            }
            if seq.valid_len == 0 {
                return Err(GcaError::Data(format!("{name} sequence is entirely padding")));
            }
        }
        Ok(())
    }

    /// Registers every parameter in `g`, in declaration order.
    pub fn register(&self, g: &mut Graph) -> Vec<Var> {
        self.params.iter().map(|t| g.param(t.clone())).collect()
    }

    /// Builds the forward computation on `g` using previously registered
    /// parameter variables (see [`DtiModel::register`]).
    fn forward_graph(
        &self,
        g: &mut Graph,
        vars: &[Var],
        drug: &TokenSequence,
        protein: &TokenSequence,
    ) -> Result<Trace> {
        self.check_inputs(drug, protein)?;
        let spec = &self.config.spec;
        let mut next = vars.iter().copied();
        let mut take = || next.next().expect("parameter variables match declarations");
        let mut encoded = Vec::with_capacity(2);
        for (seq, side) in [(drug, SequenceKind::Drug), (protein, SequenceKind::Protein)] {
            let embedding = take();
            let convs = (0..spec.encoder.layers(side).len())
                .map(|_| (take(), take()))
                .collect();
            encoded.push(encode(g, seq, &EncoderVars { embedding, convs })?);
        }
        let (d, p) = (encoded[0], encoded[1]);
        let (dv, pv) = (drug.valid_len, protein.valid_len);
        let pool = spec.pooling;
        let r_d0 = g.pool(d, pool, dv)?;
        let r_p0 = g.pool(p, pool, pv)?;
        let mut maps = (None, None);
        let (r_d, r_p) = match spec.interaction {
            InteractionMode::None => (r_d0, r_p0),
            InteractionMode::Gca | InteractionMode::Decoder => {
                let mut dir = || {
                    let norms = spec
                        .use_prenorm
                        .then(|| ((take(), take()), (take(), take())));
                    let proj = Projections {
                        w_q: take(),
                        w_k: take(),
                        w_v: take(),
                    };
                    // without pre-normalization the norm slots are never read
                    let norms = norms.unwrap_or(((proj.w_q, proj.w_q), (proj.w_q, proj.w_q)));
                    DirectionVars {
                        norm_self: norms.0,
                        norm_ctx: norms.1,
                        proj,
                        w_o: take(),
                    }
                };
                let gv = GcaVars {
                    protein_to_drug: dir(),
                    drug_to_protein: dir(),
                };
                let kind = if spec.interaction == InteractionMode::Gca {
                    CrossKind::Gated
                } else {
                    CrossKind::Decoder
                };
                let out = cross_block(g, d, dv, p, pv, &gv, &spec.attention(), spec.switches, kind)?;
                let detach = |o: Option<crate::attention::AttentionOutput>| {
                    o.map(|o| AttentionMaps {
                        direction: o.direction.expect("cross attention has a direction"),
                        heads: o.heads,
                    })
                };
                maps = (detach(out.drug_attention), detach(out.protein_attention));
                (g.pool(out.drug, pool, dv)?, g.pool(out.protein, pool, pv)?)
            }
            InteractionMode::Ap => {
                let pooled = attentive_pooling(g, d, dv, p, pv, take())?;
                let r_d = g.reshape(pooled.drug, &[spec.feature_dim()])?;
                let r_p = g.reshape(pooled.protein, &[spec.feature_dim()])?;
                maps = (
                    Some(AttentionMaps {
                        direction: Direction::ProteinToDrug,
                        heads: vec![HeadAttention {
                            pre: pooled.drug_weights.clone(),
                            post: pooled.drug_weights,
                        }],
                    }),
                    Some(AttentionMaps {
                        direction: Direction::DrugToProtein,
                        heads: vec![HeadAttention {
                            pre: pooled.protein_weights.clone(),
                            post: pooled.protein_weights,
                        }],
                    }),
                );
                (r_d, r_p)
            }
        };
        let (w1, b1, w2, b2) = (take(), take(), take(), take());
        let r = g.concat(&[r_d, r_p])?;
        let f2 = g.shape(r)[0];
        let r = g.reshape(r, &[1, f2])?;
        let hidden = g.matmul(r, w1)?;
        let hidden = g.add(hidden, b1)?;
        let hidden = g.relu(hidden);
        let y = g.matmul(hidden, w2)?;
        let y = g.add(y, b2)?;
        let y = g.reshape(y, &[1])?;
        Ok(Trace {
            y,
            pooled: [r_d0, r_p0, r_d, r_p],
            drug_attention: maps.0,
            protein_attention: maps.1,
        })
    }

    /// Predicted affinity together with pooled features and attention maps.
    pub fn forward(&self, drug: &TokenSequence, protein: &TokenSequence) -> Result<Forward> {
        let mut g = Graph::new();
        let vars = self.register(&mut g);
        let t = self.forward_graph(&mut g, &vars, drug, protein)?;
        let v = |x: Var| g.value(x).data().to_vec();
        let affinity = g.value(t.y).item();
        if !affinity.is_finite() {
            return Err(GcaError::Numeric("prediction is not finite".into()));
        }
        Ok(Forward {
            affinity,
            pooled: PooledFeatures {
                d: v(t.pooled[0]),
                p: v(t.pooled[1]),
                d_prime: v(t.pooled[2]),
                p_prime: v(t.pooled[3]),
            },
            drug_attention: t.drug_attention,
            protein_attention: t.protein_attention,
        })
    }

    pub fn predict(&self, drug: &TokenSequence, protein: &TokenSequence) -> Result<f64> {
        Ok(self.forward(drug, protein)?.affinity)
    }

    /// Squared error of one example and its gradient for every parameter, in
    /// declaration order.
    pub fn example_gradient(&self, ex: &Example) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut g = Graph::new();
        let vars = self.register(&mut g);
        let t = self.forward_graph(&mut g, &vars, &ex.drug, &ex.protein)?;
        let target = g.constant(Tensor::vector(vec![ex.affinity]));
        let loss = g.mse_loss(t.y, target)?;
        g.backward(loss)?;
        let grads = vars
            .iter()
            .zip(&self.params)
            .map(|(&v, p)| g.grad(v).map_or_else(|| vec![0.0; p.len()], <[f64]>::to_vec))
            .collect();
        Ok((g.value(loss).item(), grads))
    }

    /// Builds the mean squared error of a batch on `g`, with parameters given
    /// as graph variables. Used for end-to-end finite-difference checks.
    pub fn batch_loss_graph(&self, g: &mut Graph, vars: &[Var], batch: &[Example]) -> Result<Var> {
        let mut total = None;
        for ex in batch {
            let t = self.forward_graph(g, vars, &ex.drug, &ex.protein)?;
            let target = g.constant(Tensor::vector(vec![ex.affinity]));
            let l = g.mse_loss(t.y, target)?;
            total = Some(match total {
                None => l,
                Some(acc) => g.add(acc, l)?,
            });
        }
        let total = total.ok_or_else(|| GcaError::Data("empty batch".into()))?;
        Ok(g.scale(total, 1.0 / batch.len() as f64))
    }

    /// Per-head ranked valid positions for both sides from the gated
    /// cross-attention post-normalization gates.
    pub fn extract_attention(&self, drug: &TokenSequence, protein: &TokenSequence) -> Result<AttentionRanking> {
        if self.config.spec.interaction != InteractionMode::Gca {
            return Err(GcaError::Capability(format!(
                "attention extraction needs interaction=gca, model uses {}",
                self.config.spec.interaction.name()
            )));
        }
        let fw = self.forward(drug, protein)?;
        let rank = |maps: Option<AttentionMaps>, valid: usize| {
            maps.map(|m| {
                m.heads
                    .iter()
                    .enumerate()
                    .map(|(head, h)| HeadRanking {
                        head,
                        positions: rank_positions(h.post.data(), valid),
                    })
                    .collect()
            })
            .unwrap_or_default()
        };
        Ok(AttentionRanking {
            drug: rank(fw.drug_attention, drug.valid_len),
            protein: rank(fw.protein_attention, protein.valid_len),
        })
    }
}

#[cfg(test)]
mod tests;
