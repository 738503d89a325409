//! Attention mechanisms over encoded drug / protein feature sequences.
//!
//! All functions take a [`Graph`] plus the variables of the inputs and
//! parameters, and record their computation so it can be differentiated.
//! Sequences are right-padded: only the first `valid` rows of a feature
//! matrix are real positions. Padding keys are masked out of every
//! normalizer, so padding never receives attention weight.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Normalizer, PoolMode, Tensor, Var};
use crate::error::{GcaError, Result};


#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub num_heads: usize,
    pub feature_dim: usize,
    /// Normalizer over keys inside the gate (sparsemax gives sparse gates).
    pub inner_normalizer: Normalizer,
    /// Normalizer applied to the aggregated gate vector before scaling values.
    pub outer_normalizer: Normalizer,
    pub use_residual: bool,
    pub use_prenorm: bool,
}

impl AttentionConfig {
    pub fn new(feature_dim: usize, num_heads: usize) -> Self {
        AttentionConfig {
            num_heads,
            feature_dim,
            inner_normalizer: Normalizer::Softmax,
            outer_normalizer: Normalizer::Softmax,
            use_residual: true,
            use_prenorm: true,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.feature_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_heads == 0 || self.feature_dim == 0 {
            return Err(GcaError::Config("num_heads and feature_dim must be positive".into()));
        }
        if !self.feature_dim.is_multiple_of(self.num_heads) {
            return Err(GcaError::Config(format!(
                "feature dim {} is not divisible by {} heads",
                self.feature_dim, self.num_heads
            )));
        }
        Ok(())
    }

    fn temperature(&self) -> f64 {
        (self.head_dim() as f64).sqrt()
    }
}

/// Which side is being attended. `ProteinToDrug` gates drug positions using
/// protein queries and produces the drug-side attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    ProteinToDrug,
    DrugToProtein,
}

/// Attention weights for one head.
///
/// For gated attention both tensors are vectors over the attended side's
/// positions: `pre` is the averaged inner distribution, `post` the outer
/// normalized gate. For token-level attention (self / decoder) `pre` holds the
/// scaled scores and `post` the row-normalized attention matrix.
#[derive(Clone, Debug)]
pub struct HeadAttention {
    pub pre: Tensor,
    pub post: Tensor,
}

#[derive(Clone, Debug)]
pub struct AttentionOutput {
    pub attended: Var,
    pub heads: Vec<HeadAttention>,
    pub direction: Option<Direction>,
}

#[derive(Clone, Copy, Debug)]
pub struct Projections {
    pub w_q: Var,
    pub w_k: Var,
    pub w_v: Var,
}

/// Parameters of one attention direction (gated or decoder).
#[derive(Clone, Copy, Debug)]
pub struct DirectionVars {
    /// Pre-normalization of the attended side.
    pub norm_self: (Var, Var),
    /// Pre-normalization of the counterpart.
    pub norm_ctx: (Var, Var),
    pub proj: Projections,
    pub w_o: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct GcaVars {
    pub protein_to_drug: DirectionVars,
    pub drug_to_protein: DirectionVars,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GcaSwitches {
    pub drug_attention: bool,
    pub target_attention: bool,
}

impl Default for GcaSwitches {
    fn default() -> Self {
        GcaSwitches {
            drug_attention: true,
            target_attention: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GcaOutput {
    pub drug: Var,
    pub protein: Var,
    pub drug_attention: Option<AttentionOutput>,
    pub protein_attention: Option<AttentionOutput>,
}

fn check_weight(g: &Graph, w: Var, f: usize, name: &str) -> Result<()> {
    if g.shape(w) != [f, f] {
        return Err(GcaError::Config(format!(
            "{name} has shape {:?}, expected [{f}, {f}]",
            g.shape(w)
        )));
    }
    Ok(())
}

fn feature_width(g: &Graph, x: Var) -> Result<usize> {
    match g.shape(x) {
        [_, f] => Ok(*f),
        s => Err(GcaError::Dimension(format!("expected [len, f] features, got {s:?}"))),
    }
}

fn check_valid(g: &Graph, x: Var, valid: usize, what: &str) -> Result<()> {
    let len = g.shape(x)[0];
    if valid == 0 {
        return Err(GcaError::Data(format!("{what} sequence is entirely padding")));
    }
    if valid > len {
        return Err(GcaError::Dimension(format!(
            "{what} valid length {valid} exceeds sequence length {len}"
        )));
    }
    Ok(())
}

fn project(g: &mut Graph, x: Var, w: Var, name: &str) -> Result<Var> {
    let f = feature_width(g, x)?;
    check_weight(g, w, f, name)?;
    g.matmul(x, w)
}

/// `Q = x W_Q`, `K = x W_K`, `V = x W_V`, each `[len, f]`.
pub fn project_qkv(g: &mut Graph, x: Var, proj: &Projections) -> Result<(Var, Var, Var)> {
    Ok((
        project(g, x, proj.w_q, "W_Q")?,
        project(g, x, proj.w_k, "W_K")?,
        project(g, x, proj.w_v, "W_V")?,
    ))
}

fn split_heads(g: &mut Graph, x: Var, cfg: &AttentionConfig) -> Result<Vec<Var>> {
    let b = cfg.head_dim();
    (0..cfg.num_heads)
        .map(|h| g.slice(x, h * b, (h + 1) * b))
        .collect()
}

/// Token-level attention `norm(Q K^T / sqrt(b)) V` per head, masked to the
/// first `key_valid` keys.
fn token_attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    key_valid: usize,
    cfg: &AttentionConfig,
) -> Result<AttentionOutput> {
    let (qs, ks, vs) = (
        split_heads(g, q, cfg)?,
        split_heads(g, k, cfg)?,
        split_heads(g, v, cfg)?,
    );
    let mut outs = Vec::with_capacity(cfg.num_heads);
    let mut heads = Vec::with_capacity(cfg.num_heads);
    for h in 0..cfg.num_heads {
        let kt = g.transpose(ks[h])?;
        let raw = g.matmul(qs[h], kt)?;
        let scores = g.scale(raw, 1.0 / cfg.temperature());
        let a = g.normalize_rows(scores, cfg.inner_normalizer, key_valid)?;
        outs.push(g.matmul(a, vs[h])?);
        heads.push(HeadAttention {
            pre: g.value(scores).clone(),
            post: g.value(a).clone(),
        });
    }
    Ok(AttentionOutput {
        attended: g.concat(&outs)?,
        heads,
        direction: None,
    })
}

/// Encoder self-attention: queries, keys and values all come from `x`.
pub fn self_attention(
    g: &mut Graph,
    x: Var,
    valid: usize,
    proj: &Projections,
    cfg: &AttentionConfig,
) -> Result<AttentionOutput> {
    cfg.validate()?;
    check_valid(g, x, valid, "input")?;
    let (q, k, v) = project_qkv(g, x, proj)?;
    token_attention(g, q, k, v, valid, cfg)
}

/// Decoder attention: queries from `x`, keys and values from the counterpart.
/// The output has `x`'s length but is a mixture of counterpart value rows.
pub fn decoder_attention(
    g: &mut Graph,
    x: Var,
    x_valid: usize,
    counterpart: Var,
    counterpart_valid: usize,
    proj: &Projections,
    cfg: &AttentionConfig,
) -> Result<AttentionOutput> {
    cfg.validate()?;
    let (fx, fc) = (feature_width(g, x)?, feature_width(g, counterpart)?);
    if fx != fc {
        return Err(GcaError::Config(format!(
            "decoder attention needs equal feature dims, got {fx} and {fc}"
        )));
    }
    check_valid(g, x, x_valid, "query")?;
    check_valid(g, counterpart, counterpart_valid, "counterpart")?;
    let q = project(g, x, proj.w_q, "W_Q")?;
    let k = project(g, counterpart, proj.w_k, "W_K")?;
    let v = project(g, counterpart, proj.w_v, "W_V")?;
    token_attention(g, q, k, v, counterpart_valid, cfg)
}

/// Context-level gate for one head.
///
/// Scores `Q_c K_x^T / sqrt(b)` are `[L_c, L_x]`; each counterpart query's row
/// is normalized over the valid `x` positions and the rows of the valid
/// counterpart positions are averaged, giving a `[1, L_x]` distribution.
pub fn gate_vector_head(
    g: &mut Graph,
    q_counterpart: Var,
    k_x: Var,
    counterpart_valid: usize,
    x_valid: usize,
    cfg: &AttentionConfig,
) -> Result<Var> {
    check_valid(g, q_counterpart, counterpart_valid, "counterpart")?;
    check_valid(g, k_x, x_valid, "attended")?;
    let lc = g.shape(q_counterpart)[0];
    let kt = g.transpose(k_x)?;
    let raw = g.matmul(q_counterpart, kt)?;
    let scores = g.scale(raw, 1.0 / cfg.temperature());
    let dist = g.normalize_rows(scores, cfg.inner_normalizer, x_valid)?;
    let mut w = vec![0.0; lc];
    w[..counterpart_valid].fill(1.0 / counterpart_valid as f64);
    let avg = g.constant(Tensor::new(vec![1, lc], w)?);
    g.matmul(avg, dist)
}

/// Per-head gate vectors `a` over the positions of `x`, with the counterpart
/// supplying the queries.
pub fn gated_attention_vector(
    g: &mut Graph,
    x: Var,
    x_valid: usize,
    counterpart: Var,
    counterpart_valid: usize,
    proj: &Projections,
    cfg: &AttentionConfig,
) -> Result<Vec<Var>> {
    cfg.validate()?;
    let q = project(g, counterpart, proj.w_q, "W_Q")?;
    let k = project(g, x, proj.w_k, "W_K")?;
    let (qs, ks) = (split_heads(g, q, cfg)?, split_heads(g, k, cfg)?);
    qs.into_iter()
        .zip(ks)
        .map(|(qh, kh)| gate_vector_head(g, qh, kh, counterpart_valid, x_valid, cfg))
        .collect()
}

/// Normalizes the gate `a: [1, L]` over the valid positions and scales each
/// row of `v: [L, f_head]` by its gate weight. Returns `(gated values, gate)`.
/// Rows are only rescaled, never mixed.
pub fn gated_attention_apply(
    g: &mut Graph,
    a: Var,
    v: Var,
    valid: usize,
    cfg: &AttentionConfig,
) -> Result<(Var, Var)> {
    let len = g.shape(v)[0];
    if g.shape(a) != [1, len] {
        return Err(GcaError::Dimension(format!(
            "gate shape {:?} does not match {len} value rows",
            g.shape(a)
        )));
    }
    let gate = g.normalize_rows(a, cfg.outer_normalizer, valid)?;
    let column = g.reshape(gate, &[len, 1])?;
    Ok((g.mul(column, v)?, gate))
}

fn prenorm(g: &mut Graph, x: Var, norm: (Var, Var), cfg: &AttentionConfig) -> Result<Var> {
    if cfg.use_prenorm {
        g.layer_norm(x, norm.0, norm.1)
    } else {
        Ok(x)
    }
}

fn output_projection(
    g: &mut Graph,
    x: Var,
    heads_out: &[Var],
    w_o: Var,
    cfg: &AttentionConfig,
) -> Result<Var> {
    let cat = g.concat(heads_out)?;
    let out = project(g, cat, w_o, "W_O")?;
    if cfg.use_residual {
        g.add(x, out)
    } else {
        Ok(out)
    }
}

/// One gated cross-attention direction: pre-norm both inputs, gate the
/// attended side's values per head, concatenate, project, add the residual.
pub fn gated_direction(
    g: &mut Graph,
    x: Var,
    x_valid: usize,
    counterpart: Var,
    counterpart_valid: usize,
    vars: &DirectionVars,
    cfg: &AttentionConfig,
    direction: Direction,
) -> Result<AttentionOutput> {
    cfg.validate()?;
    let xn = prenorm(g, x, vars.norm_self, cfg)?;
    let cn = prenorm(g, counterpart, vars.norm_ctx, cfg)?;
    let q = project(g, cn, vars.proj.w_q, "W_Q")?;
    let k = project(g, xn, vars.proj.w_k, "W_K")?;
    let v = project(g, xn, vars.proj.w_v, "W_V")?;
    let (qs, ks, vs) = (
        split_heads(g, q, cfg)?,
        split_heads(g, k, cfg)?,
        split_heads(g, v, cfg)?,
    );
    let mut outs = Vec::with_capacity(cfg.num_heads);
    let mut heads = Vec::with_capacity(cfg.num_heads);
    for h in 0..cfg.num_heads {
        let a = gate_vector_head(g, qs[h], ks[h], counterpart_valid, x_valid, cfg)?;
        let (gated, gate) = gated_attention_apply(g, a, vs[h], x_valid, cfg)?;
        heads.push(HeadAttention {
            pre: g.value(a).reshaped(&[g.shape(a)[1]])?,
            post: g.value(gate).reshaped(&[g.shape(gate)[1]])?,
        });
        outs.push(gated);
    }
    Ok(AttentionOutput {
        attended: output_projection(g, x, &outs, vars.w_o, cfg)?,
        heads,
        direction: Some(direction),
    })
}

/// Decoder attention wrapped the same way as [`gated_direction`] (pre-norm,
/// output projection, residual), used as the non-gated interaction baseline.
pub fn decoder_direction(
    g: &mut Graph,
    x: Var,
    x_valid: usize,
    counterpart: Var,
    counterpart_valid: usize,
    vars: &DirectionVars,
    cfg: &AttentionConfig,
    direction: Direction,
) -> Result<AttentionOutput> {
    let xn = prenorm(g, x, vars.norm_self, cfg)?;
    let cn = prenorm(g, counterpart, vars.norm_ctx, cfg)?;
    let inner = decoder_attention(g, xn, x_valid, cn, counterpart_valid, &vars.proj, cfg)?;
    let b = cfg.head_dim();
    let outs: Vec<Var> = (0..cfg.num_heads)
        .map(|h| g.slice(inner.attended, h * b, (h + 1) * b))
        .collect::<Result<_>>()?;
    Ok(AttentionOutput {
        attended: output_projection(g, x, &outs, vars.w_o, cfg)?,
        heads: inner.heads,
        direction: Some(direction),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossKind {
    Gated,
    Decoder,
}

/// Bidirectional cross-attention block. Both directions read the original
/// `d` and `p`; a disabled direction passes its side through unchanged.
#[allow(clippy::too_many_arguments)]
pub fn cross_block(
    g: &mut Graph,
    d: Var,
    d_valid: usize,
    p: Var,
    p_valid: usize,
    vars: &GcaVars,
    cfg: &AttentionConfig,
    switches: GcaSwitches,
    kind: CrossKind,
) -> Result<GcaOutput> {
    check_valid(g, d, d_valid, "drug")?;
    check_valid(g, p, p_valid, "protein")?;
    let run = match kind {
        CrossKind::Gated => gated_direction,
        CrossKind::Decoder => decoder_direction,
    };
    let drug_attention = if switches.drug_attention {
        Some(run(
            g,
            d,
            d_valid,
            p,
            p_valid,
            &vars.protein_to_drug,
            cfg,
            Direction::ProteinToDrug,
        )?)
    } else {
        None
    };
    let protein_attention = if switches.target_attention {
        Some(run(
            g,
            p,
            p_valid,
            d,
            d_valid,
            &vars.drug_to_protein,
            cfg,
            Direction::DrugToProtein,
        )?)
    } else {
        None
    };
    Ok(GcaOutput {
        drug: drug_attention.as_ref().map_or(d, |a| a.attended),
        protein: protein_attention.as_ref().map_or(p, |a| a.attended),
        drug_attention,
        protein_attention,
    })
}

/// Gated cross-attention block (`g_{p->d}` and `g_{d->p}`).
pub fn gca_block(
    g: &mut Graph,
    d: Var,
    d_valid: usize,
    p: Var,
    p_valid: usize,
    vars: &GcaVars,
    cfg: &AttentionConfig,
    switches: GcaSwitches,
) -> Result<GcaOutput> {
    cross_block(g, d, d_valid, p, p_valid, vars, cfg, switches, CrossKind::Gated)
}

#[derive(Clone, Debug)]
pub struct PooledPair {
    /// `[1, f]` pooled drug representation.
    pub drug: Var,
    /// `[1, f]` pooled protein representation.
    pub protein: Var,
    pub drug_weights: Tensor,
    pub protein_weights: Tensor,
}

/// Attentive pooling baseline: `G = tanh(d U p^T)`; row maxima of `G` score
/// drug positions, column maxima score protein positions; softmax over valid
/// positions gives the pooling weights.
pub fn attentive_pooling(
    g: &mut Graph,
    d: Var,
    d_valid: usize,
    p: Var,
    p_valid: usize,
    u: Var,
) -> Result<PooledPair> {
    let (fd, fp) = (feature_width(g, d)?, feature_width(g, p)?);
    if fd != fp {
        return Err(GcaError::Config(format!(
            "attentive pooling needs equal feature dims, got {fd} and {fp}"
        )));
    }
    check_weight(g, u, fd, "U")?;
    check_valid(g, d, d_valid, "drug")?;
    check_valid(g, p, p_valid, "protein")?;
    let (ld, lp) = (g.shape(d)[0], g.shape(p)[0]);
    let du = g.matmul(d, u)?;
    let pt = g.transpose(p)?;
    let raw = g.matmul(du, pt)?;
    let grid = g.tanh(raw);
    let grid_t = g.transpose(grid)?;
    let drug_scores = g.pool(grid_t, PoolMode::Max, p_valid)?;
    let protein_scores = g.pool(grid, PoolMode::Max, d_valid)?;
    let drug_scores = g.reshape(drug_scores, &[1, ld])?;
    let protein_scores = g.reshape(protein_scores, &[1, lp])?;
    let wd = g.normalize_rows(drug_scores, Normalizer::Softmax, d_valid)?;
    let wp = g.normalize_rows(protein_scores, Normalizer::Softmax, p_valid)?;
    Ok(PooledPair {
        drug: g.matmul(wd, d)?,
        protein: g.matmul(wp, p)?,
        drug_weights: g.value(wd).reshaped(&[ld])?,
        protein_weights: g.value(wp).reshaped(&[lp])?,
    })
}
