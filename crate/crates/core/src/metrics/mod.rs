//! Regression metrics and the interpretability analyses: feature similarity
//! grids, binding-site hit rates and mutation rank shifts.

use rayon::prelude::*;
use serde::Serialize;

use crate::encoders::TokenSequence;
use crate::error::{GcaError, Result};
use crate::model::{rank_positions, DtiModel, Example, InteractionMode};

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(GcaError::Dimension(format!(
            "{} predictions for {} targets",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Err(GcaError::Data("mse of an empty set".into()));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Concordance credit summed over orderable pairs, and the pair count.
fn concordance(pred: &[f64], truth: &[f64]) -> (f64, usize) {
    let mut credit = 0.0;
    let mut pairs = 0;
    for i in 0..truth.len() {
        for j in 0..truth.len() {
            if truth[i] > truth[j] {
                pairs += 1;
                if pred[i] > pred[j] {
                    credit += 1.0;
                } else if pred[i] == pred[j] {
                    credit += 0.5;
                }
            }
        }
    }
    (credit, pairs)
}

/// Fraction of pairs with `truth_i > truth_j` that the predictions order the
/// same way; tied predictions earn half credit.
pub fn c_index(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.len() < 2 {
        return Err(GcaError::Data("c-index needs at least two examples".into()));
    }
    let (credit, pairs) = concordance(pred, truth);
    if pairs == 0 {
        return Err(GcaError::Data("c-index undefined: all targets are equal".into()));
    }
    Ok(credit / pairs as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub mse: f64,
    pub c_index: f64,
    pub n_pairs_evaluated: usize,
}

pub fn evaluate(pred: &[f64], truth: &[f64]) -> Result<EvalReport> {
    let c = c_index(pred, truth)?;
    Ok(EvalReport {
        mse: mse(pred, truth)?,
        c_index: c,
        n_pairs_evaluated: concordance(pred, truth).1,
    })
}

pub fn predict_all(model: &DtiModel, set: &[Example]) -> Result<Vec<f64>> {
    set.par_iter()
        .map(|e| model.predict(&e.drug, &e.protein))
        .collect()
}

pub fn evaluate_model(model: &DtiModel, set: &[Example]) -> Result<EvalReport> {
    let pred = predict_all(model, set)?;
    let truth: Vec<f64> = set.iter().map(|e| e.affinity).collect();
    evaluate(&pred, &truth)
}

/// Cosine similarity, `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (na > 0.0 && nb > 0.0).then(|| (dot / (na * nb)).clamp(-1.0, 1.0))
}

pub const POPULATIONS: [&str; 4] = ["d", "d_prime", "p", "p_prime"];

/// Mean pairwise cosine similarity among the pooled populations
/// `[d, d′, p, p′]`. Off-diagonal entries average over every cross pair,
/// diagonal entries over pairs of distinct members.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityGrid {
    pub values: [[f64; 4]; 4],
    pub step: usize,
    /// Vectors left out because their norm is zero.
    pub excluded: usize,
}

impl SimilarityGrid {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a][b]
    }

    /// The mixing diagnostic: attended protein features closer to the raw
    /// drug features than to the raw protein features.
    pub fn protein_mixed(&self) -> bool {
        self.values[3][0] > self.values[3][2]
    }
}

pub fn similarity_grid(populations: [&[Vec<f64>]; 4], step: usize) -> Result<SimilarityGrid> {
    let n = populations[0].len();
    if n < 2 || populations.iter().any(|p| p.len() != n) {
        return Err(GcaError::Dimension(format!(
            "similarity grid needs four equal batches of at least 2, got {:?}",
            populations.map(|p| p.len())
        )));
    }
    let mut excluded = 0;
    let kept: Vec<Vec<&[f64]>> = populations
        .iter()
        .map(|pop| {
            pop.iter()
                .filter(|v| {
                    let zero = v.iter().all(|&x| x == 0.0);
                    excluded += zero as usize;
                    !zero
                })
                .map(Vec::as_slice)
                .collect()
        })
        .collect();
    if excluded > 0 {
        log::warn!("similarity grid: excluded {excluded} zero-norm feature vectors");
    }
    let mut values = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in a..4 {
            let (mut sum, mut count) = (0.0, 0usize);
            for (i, x) in kept[a].iter().enumerate() {
                for (j, y) in kept[b].iter().enumerate() {
                    if a == b && i == j {
                        continue;
                    }
                    sum += cosine(x, y).expect("zero vectors were excluded");
                    count += 1;
                }
            }
            let mean = if count > 0 { sum / count as f64 } else { f64::NAN };
            values[a][b] = mean;
            values[b][a] = mean;
        }
    }
    Ok(SimilarityGrid {
        values,
        step,
        excluded,
    })
}

/// Pooled `[d, d′, p, p′]` features of a model over a batch, ready for
/// [`similarity_grid`].
pub fn pooled_populations(model: &DtiModel, set: &[Example]) -> Result<[Vec<Vec<f64>>; 4]> {
    let pooled: Vec<_> = set
        .par_iter()
        .map(|e| model.forward(&e.drug, &e.protein).map(|f| f.pooled))
        .collect::<Result<_>>()?;
    Ok([
        pooled.iter().map(|p| p.d.clone()).collect(),
        pooled.iter().map(|p| p.d_prime.clone()).collect(),
        pooled.iter().map(|p| p.p.clone()).collect(),
        pooled.iter().map(|p| p.p_prime.clone()).collect(),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiteHitReport {
    pub rate: f64,
    pub evaluated: usize,
    /// Examples without any true site.
    pub skipped: usize,
}

/// Number of top-ranked positions considered at `k_percent` of `len`.
pub fn top_count(len: usize, k_percent: f64) -> usize {
    // the epsilon keeps e.g. 10% of 50 at exactly 5
    (((k_percent / 100.0) * len as f64) - 1e-9).ceil().max(1.0) as usize
}

fn check_k(k_percent: f64) -> Result<()> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(GcaError::Config(format!("k_percent {k_percent} outside (0, 100]")));
    }
    Ok(())
}

/// Per example: does the top `k%` of the ranking, widened by `neighborhood`
/// positions on each side, touch a true site? Averaged over examples with at
/// least one site.
pub fn site_hit_rate(
    rankings: &[Vec<usize>],
    true_sites: &[Vec<usize>],
    k_percent: f64,
    neighborhood: usize,
) -> Result<SiteHitReport> {
    check_k(k_percent)?;
    if rankings.len() != true_sites.len() {
        return Err(GcaError::Dimension(format!(
            "{} rankings for {} site lists",
            rankings.len(),
            true_sites.len()
        )));
    }
    let (mut hits, mut evaluated, mut skipped) = (0usize, 0usize, 0usize);
    for (ranking, sites) in rankings.iter().zip(true_sites) {
        if sites.is_empty() {
            skipped += 1;
            continue;
        }
        evaluated += 1;
        let m = top_count(ranking.len(), k_percent);
        let hit = ranking[..m.min(ranking.len())]
            .iter()
            .any(|&r| sites.iter().any(|&s| r.abs_diff(s) <= neighborhood));
        hits += hit as usize;
    }
    if skipped > 0 {
        log::info!("site hit rate: skipped {skipped} examples without true sites");
    }
    if evaluated == 0 {
        return Err(GcaError::Data("no example has a true site".into()));
    }
    Ok(SiteHitReport {
        rate: hits as f64 / evaluated as f64,
        evaluated,
        skipped,
    })
}

/// Probability that a uniform random `m`-subset of `len` positions avoids
/// `covered` fixed positions: `C(len - covered, m) / C(len, m)`.
fn miss_probability(len: usize, covered: usize, m: usize) -> f64 {
    if m > len - covered {
        return 0.0;
    }
    (0..m).fold(1.0, |p, i| p * (len - covered - i) as f64 / (len - i) as f64)
}

/// Expected hit rate of a uniformly random ranking of each example's valid
/// positions, under the same top-`k%` / neighborhood rule.
pub fn chance_hit_rate(
    valid_lens: &[usize],
    true_sites: &[Vec<usize>],
    k_percent: f64,
    neighborhood: usize,
) -> Result<f64> {
    check_k(k_percent)?;
    let mut total = 0.0;
    let mut evaluated = 0;
    for (&len, sites) in valid_lens.iter().zip(true_sites) {
        if sites.is_empty() || len == 0 {
            continue;
        }
        let covered = (0..len)
            .filter(|&i| sites.iter().any(|&s| i.abs_diff(s) <= neighborhood))
            .count();
        total += 1.0 - miss_probability(len, covered, top_count(len, k_percent));
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(GcaError::Data("no example has a true site".into()));
    }
    Ok(total / evaluated as f64)
}

/// Which gate a rank is computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HeadSelect {
    Head(usize),
    /// Gates averaged over heads.
    Mean,
}

impl std::fmt::Display for HeadSelect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HeadSelect::Head(h) => write!(f, "{h}"),
            HeadSelect::Mean => f.write_str("mean"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankShift {
    pub head: HeadSelect,
    pub position: usize,
    /// 1 is the highest gate weight.
    pub old_rank: usize,
    pub new_rank: usize,
    /// `old_rank - new_rank`; positive means the position moved up.
    pub delta: i64,
}

/// 1-based rank of every valid position, per head and head-averaged.
fn protein_ranks(model: &DtiModel, drug: &TokenSequence, protein: &TokenSequence) -> Result<Vec<(HeadSelect, Vec<usize>)>> {
    let maps = model
        .forward(drug, protein)?
        .protein_attention
        .ok_or_else(|| GcaError::Capability("protein-side attention is disabled".into()))?;
    let valid = protein.valid_len;
    let to_ranks = |weights: &[f64]| {
        let mut ranks = vec![0; valid];
        for (r, (pos, _)) in rank_positions(weights, valid).into_iter().enumerate() {
            ranks[pos] = r + 1;
        }
        ranks
    };
    let mut out: Vec<(HeadSelect, Vec<usize>)> = maps
        .heads
        .iter()
        .enumerate()
        .map(|(h, m)| (HeadSelect::Head(h), to_ranks(m.post.data())))
        .collect();
    let n = maps.heads.len() as f64;
    let mean: Vec<f64> = (0..valid)
        .map(|i| maps.heads.iter().map(|m| m.post.data()[i]).sum::<f64>() / n)
        .collect();
    out.push((HeadSelect::Mean, to_ranks(&mean)));
    Ok(out)
}

/// Protein positions of every example ranked by gate weight: one block per
/// head, then one for the head-averaged gates.
pub fn protein_site_rankings(model: &DtiModel, set: &[Example]) -> Result<Vec<(HeadSelect, Vec<Vec<usize>>)>> {
    let per_example: Vec<_> = set
        .par_iter()
        .map(|e| model.extract_attention(&e.drug, &e.protein).map(|r| (r.protein, e.protein.valid_len)))
        .collect::<Result<_>>()?;
    let n_heads = model.config().spec.num_heads;
    let mut out: Vec<(HeadSelect, Vec<Vec<usize>>)> =
        (0..n_heads).map(|h| (HeadSelect::Head(h), Vec::new())).collect();
    out.push((HeadSelect::Mean, Vec::new()));
    for (heads, valid) in per_example {
        if heads.len() != n_heads {
            return Err(GcaError::Capability("protein-side attention is disabled".into()));
        }
        let mut mean = vec![0.0; valid];
        for (h, hr) in heads.iter().enumerate() {
            out[h].1.push(hr.positions.iter().map(|p| p.0).collect());
            for &(pos, w) in &hr.positions {
                mean[pos] += w / n_heads as f64;
            }
        }
        out[n_heads].1.push(rank_positions(&mean, valid).into_iter().map(|p| p.0).collect());
    }
    Ok(out)
}

/// Rank changes of `position` and its ±2 neighbors in the protein gates when
/// the residue at `position` is replaced by `new_residue`.
pub fn mutation_rank_shift(
    model: &DtiModel,
    drug: &TokenSequence,
    protein: &TokenSequence,
    position: usize,
    new_residue: char,
) -> Result<Vec<RankShift>> {
    if model.config().spec.interaction != InteractionMode::Gca {
        return Err(GcaError::Capability(
            "mutation rank shift needs interaction=gca".into(),
        ));
    }
    if position >= protein.valid_len {
        return Err(GcaError::Index(format!(
            "position {position} outside the {} valid residues",
            protein.valid_len
        )));
    }
    let vocab = &model.config().protein_vocab;
    if !vocab.contains(new_residue) {
        return Err(GcaError::Data(format!("residue {new_residue:?} is not in the protein vocabulary")));
    }
    let mut mutated = protein.clone();
    mutated.ids[position] = vocab.id(new_residue);
    let before = protein_ranks(model, drug, protein)?;
    let after = protein_ranks(model, drug, &mutated)?;
    let lo = position.saturating_sub(2);
    let hi = (position + 2).min(protein.valid_len - 1);
    let mut rows = Vec::new();
    for ((head, old), (_, new)) in before.iter().zip(&after) {
        for pos in lo..=hi {
            rows.push(RankShift {
                head: *head,
                position: pos,
                old_rank: old[pos],
                new_rank: new[pos],
                delta: old[pos] as i64 - new[pos] as i64,
            });
        }
    }
    Ok(rows)
}
