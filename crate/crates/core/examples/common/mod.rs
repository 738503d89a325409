//! Shared setup for the examples: a small planted-motif dataset and a GCA
//! model trained on it.

#![allow(dead_code)]

use gca_dti::data::{gen_synthetic, split, vocabularies, AffinityRecord, SyntheticData, SyntheticSpec};
use gca_dti::encoders::EncoderConfig;
use gca_dti::model::{train, DtiModel, ModelConfig, ModelSpec, TrainConfig, TrainingLog};
use gca_dti::Result;

pub struct Trained {
    pub data: SyntheticData,
    pub train: Vec<AffinityRecord>,
    pub test: Vec<AffinityRecord>,
    pub model: DtiModel,
    pub log: TrainingLog,
}

/// 80 drugs x 20 targets with two planted motif pairs.
pub fn small_synthetic(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_drugs: 80,
        n_targets: 20,
        seed,
        ..Default::default()
    }
}

/// Embedding-only encoders sized for `synth`, gated cross-attention and a
/// 32-unit head.
pub fn small_spec(synth: &SyntheticSpec) -> ModelSpec {
    ModelSpec {
        encoder: EncoderConfig {
            embed_dim: 16,
            max_len_drug: synth.drug_len_max,
            max_len_protein: synth.protein_len_max,
            ..Default::default()
        },
        head_hidden: 32,
        ..Default::default()
    }
}

pub fn train_on(synth: &SyntheticSpec, spec: ModelSpec, epochs: usize) -> Result<Trained> {
    let data = gen_synthetic(synth)?;
    let (train_recs, test_recs) = split(&data.records, 1.0 / 6.0, synth.seed)?;
    let (dv, pv) = vocabularies(&data.records)?;
    let mut model = DtiModel::new(ModelConfig::new(spec, dv, pv)?, synth.seed)?;
    let tr = model.examples(&train_recs)?;
    let te = model.examples(&test_recs)?;
    let cfg = TrainConfig {
        lr: 2e-3,
        epochs,
        seed: synth.seed,
        ..Default::default()
    };
    let log = train(&mut model, &tr, Some(&te), &cfg)?;
    Ok(Trained {
        data,
        train: train_recs,
        test: test_recs,
        model,
        log,
    })
}

/// Planted site positions for each record, empty where none apply.
pub fn sites_for(data: &SyntheticData, recs: &[AffinityRecord]) -> Vec<Vec<usize>> {
    recs.iter()
        .map(|r| data.sites.get(&(r.drug_id.clone(), r.target_id.clone())).cloned().unwrap_or_default())
        .collect()
}
