//! Desk-scale trainer for the cleave/re-connection model.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embed::Embedding;
use crate::error::Error;
use crate::learn::adam::{AdamConfig, AdamState};
use crate::learn::backprop::{flatten_grads, flatten_model, grad_total_loss, load_model};
use crate::learn::losses::{LossWeights, TrainPair};
use crate::seqnet::SeqModel;
use crate::Result;

/// One labelled embedding sequence.
#[derive(Debug, Clone)]
pub struct LabeledSequence {
    pub seq: Vec<Embedding>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub pairs_per_epoch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 50, lr: 1e-3, pairs_per_epoch: 64, seed: 0 }
    }
}

/// Trains the model in place on balanced positive/negative pairs, one Adam
/// step per pair. Returns the mean loss per epoch; everything is
/// deterministic in the seed.
pub fn train_toy(
    dataset: &[LabeledSequence],
    model: &mut SeqModel,
    w: &LossWeights,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    w.validate()?;
    for s in dataset {
        if s.label >= model.head.classes() {
            return Err(Error::ClassOutOfRange { class: s.label, classes: model.head.classes() });
        }
    }

    // Group by label for balanced sampling.
    let mut by_label: Vec<Vec<usize>> = Vec::new();
    for (i, s) in dataset.iter().enumerate() {
        if s.label >= by_label.len() {
            by_label.resize(s.label + 1, Vec::new());
        }
        by_label[s.label].push(i);
    }
    let positive_labels: Vec<usize> =
        (0..by_label.len()).filter(|&l| by_label[l].len() >= 2).collect();
    let labels_present: Vec<usize> =
        (0..by_label.len()).filter(|&l| !by_label[l].is_empty()).collect();
    if positive_labels.is_empty() && labels_present.len() < 2 {
        return Err(Error::Invalid("dataset supports neither positive nor negative pairs".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(
        flatten_model(model).len(),
        AdamConfig { lr: cfg.lr, ..AdamConfig::default() },
    );
    let mut curve = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for k in 0..cfg.pairs_per_epoch {
            let want_positive = k % 2 == 0;
            let (i, j) = if want_positive && !positive_labels.is_empty() {
                let l = *positive_labels.choose(&mut rng).expect("non-empty");
                let pick = by_label[l].choose_multiple(&mut rng, 2).copied().collect::<Vec<_>>();
                (pick[0], pick[1])
            } else if labels_present.len() >= 2 {
                let ls = labels_present.choose_multiple(&mut rng, 2).copied().collect::<Vec<_>>();
                (
                    *by_label[ls[0]].choose(&mut rng).expect("non-empty"),
                    *by_label[ls[1]].choose(&mut rng).expect("non-empty"),
                )
            } else {
                let l = *positive_labels.choose(&mut rng).expect("non-empty");
                let pick = by_label[l].choose_multiple(&mut rng, 2).copied().collect::<Vec<_>>();
                (pick[0], pick[1])
            };

            let pair = TrainPair {
                seq1: dataset[i].seq.clone(),
                seq2: dataset[j].seq.clone(),
                label1: dataset[i].label,
                label2: dataset[j].label,
            };
            let (loss, grads) = grad_total_loss(&pair, model, w)?;
            epoch_loss += loss;

            let mut params = flatten_model(model);
            adam.step(&mut params, &flatten_grads(&grads))?;
            load_model(model, &params);
        }
        curve.push(epoch_loss / cfg.pairs_per_epoch as f64);
    }
    Ok(curve)
}
