use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{DtiModel, Example, TrainConfig};
use crate::autodiff::Adam;
use crate::error::{GcaError, Result};
use crate::metrics;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean squared error over the training set, each example evaluated with
    /// the parameters in effect when its batch was processed.
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub val_c_index: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn final_train_mse(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_mse)
    }
}

pub fn train(
    model: &mut DtiModel,
    train_set: &[Example],
    val_set: Option<&[Example]>,
    cfg: &TrainConfig,
) -> Result<TrainingLog> {
    train_with(model, train_set, val_set, cfg, |_, _| Ok(()))
}

/// Mini-batch Adam on the mean squared error. `on_epoch` runs after every
/// epoch with the updated model.
///
/// Per-example gradients within a batch are computed in parallel and summed in
/// example order, so results do not depend on the thread count.
pub fn train_with<F>(
    model: &mut DtiModel,
    train_set: &[Example],
    val_set: Option<&[Example]>,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainingLog>
where
    F: FnMut(&EpochRecord, &DtiModel) -> Result<()>,
{
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(GcaError::Data("training set is empty".into()));
    }
    if cfg.init_bias_to_mean {
        let mean = train_set.iter().map(|e| e.affinity).sum::<f64>() / train_set.len() as f64;
        model
            .param_mut("head.b2")
            .expect("every model has an output bias")
            .data_mut()[0] = mean;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = TrainingLog::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut losses = vec![0.0; train_set.len()];
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, Vec<Vec<f64>>)> = batch
                .par_iter()
                .map(|&i| model.example_gradient(&train_set[i]))
                .collect::<Result<_>>()?;
            let mut total: Vec<Vec<f64>> = model.params().iter().map(|p| vec![0.0; p.len()]).collect();
            for (&i, (loss, grads)) in batch.iter().zip(&results) {
                if !loss.is_finite() {
                    return Err(GcaError::Numeric(format!(
                        "loss became {loss} at epoch {epoch}; lower the learning rate \
                         (currently {}) or check for exploding gradients",
                        cfg.lr
                    )));
                }
                losses[i] = *loss;
                for (acc, g) in total.iter_mut().zip(grads) {
                    for (a, x) in acc.iter_mut().zip(g) {
                        *a += x;
                    }
                }
            }
            let n = batch.len() as f64;
            for acc in &mut total {
                acc.iter_mut().for_each(|a| *a /= n);
            }
            opt.step(model.params_mut(), &total)?;
        }
        let train_mse = losses.iter().sum::<f64>() / losses.len() as f64;
        let (val_mse, val_c_index) = match val_set {
            Some(val) if !val.is_empty() => {
                let (mse, c) = validation_scores(model, val)?;
                (Some(mse), c)
            }
            _ => (None, None),
        };
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            val_c_index,
        };
        log::info!(
            "epoch {epoch}: train mse {train_mse:.5}{}{}",
            val_mse.map_or(String::new(), |m| format!(", val mse {m:.5}")),
            val_c_index.map_or(String::new(), |c| format!(", val c-index {c:.4}"))
        );
        on_epoch(&record, model)?;
        log.epochs.push(record);
    }
    Ok(log)
}

/// MSE and, when the targets are orderable, C-index on a held-out set.
fn validation_scores(model: &DtiModel, set: &[Example]) -> Result<(f64, Option<f64>)> {
    let pred = metrics::predict_all(model, set)?;
    let truth: Vec<f64> = set.iter().map(|e| e.affinity).collect();
    Ok((metrics::mse(&pred, &truth)?, metrics::c_index(&pred, &truth).ok()))
}
