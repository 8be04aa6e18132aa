//! The Siamese loss stack: verification and identification terms at the
//! pooled (global) and per-position (local) level.

use alloc::vec::Vec;

use crate::error::Error;
use crate::math::{exp, ln, sq_dist};
use crate::seqnet::{temporal_pool, SeqModel, SeqOutputs};
use crate::Result;

/// Scalar hyperparameters of the loss stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_v: f64,
    pub lambda_id: f64,
    pub lambda_loc_v: f64,
    pub lambda_loc_id: f64,
    /// Contrastive margin for different-identity pairs.
    pub eta: f64,
    /// Margin of the local triplet-style term.
    pub delta: f64,
    /// Identity class count for the classifier head.
    pub classes: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_v: 1.0,
            lambda_id: 1.0,
            lambda_loc_v: 0.1,
            lambda_loc_id: 0.1,
            eta: 1.0,
            delta: 0.5,
            classes: 2,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let lambdas =
            [self.lambda_v, self.lambda_id, self.lambda_loc_v, self.lambda_loc_id];
        if lambdas.iter().any(|l| *l < 0.0) {
            return Err(Error::Invalid("loss weights must be nonnegative".into()));
        }
        if self.eta <= 0.0 {
            return Err(Error::Invalid("contrastive margin must be positive".into()));
        }
        if self.delta < 0.0 {
            return Err(Error::Invalid("local margin must be nonnegative".into()));
        }
        Ok(())
    }

    /// Keeps a single term, zeroing the other weights.
    pub fn only(term: LossTerm) -> Self {
        let mut w = LossWeights {
            lambda_v: 0.0,
            lambda_id: 0.0,
            lambda_loc_v: 0.0,
            lambda_loc_id: 0.0,
            ..LossWeights::default()
        };
        match term {
            LossTerm::Verification => w.lambda_v = 1.0,
            LossTerm::Identification => w.lambda_id = 1.0,
            LossTerm::LocalVerification => w.lambda_loc_v = 1.0,
            LossTerm::LocalIdentification => w.lambda_loc_id = 1.0,
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerm {
    Verification,
    Identification,
    LocalVerification,
    LocalIdentification,
}

/// A training pair: two embedding sequences with identity labels. The pair
/// label is positive exactly when the identities agree.
#[derive(Debug, Clone)]
pub struct TrainPair {
    pub seq1: Vec<crate::embed::Embedding>,
    pub seq2: Vec<crate::embed::Embedding>,
    pub label1: usize,
    pub label2: usize,
}

impl TrainPair {
    pub fn same_identity(&self) -> bool {
        self.label1 == self.label2
    }
}

/// Contrastive verification loss on a feature pair: squared distance for
/// positives, hinge on the margin for negatives.
pub fn contrastive(f1: &[f64], f2: &[f64], same: bool, eta: f64) -> Result<f64> {
    if f1.len() != f2.len() {
        return Err(Error::DimensionMismatch { expected: f1.len(), got: f2.len() });
    }
    let d = sq_dist(f1, f2);
    Ok(if same { d } else { (eta - d).max(0.0) })
}

/// Numerically stable softmax (max shift).
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| exp(l - m)).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Multi-class cross-entropy of a logit vector against the true class.
pub fn cross_entropy(logits: &[f64], true_class: usize) -> Result<f64> {
    if true_class >= logits.len() {
        return Err(Error::ClassOutOfRange { class: true_class, classes: logits.len() });
    }
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|&l| exp(l - m)).sum();
    Ok(ln(z) + m - logits[true_class])
}

/// Pooled-feature loss: weighted contrastive plus the identity terms of
/// both tracklets.
pub fn global_loss(
    pool1: &[f64],
    pool2: &[f64],
    same: bool,
    labels: (usize, usize),
    model: &SeqModel,
    w: &LossWeights,
) -> Result<f64> {
    let mut loss = w.lambda_v * contrastive(pool1, pool2, same, w.eta)?;
    if w.lambda_id != 0.0 {
        loss += w.lambda_id
            * (cross_entropy(&model.head.logits(pool1), labels.0)?
                + cross_entropy(&model.head.logits(pool2), labels.1)?);
    }
    Ok(loss)
}

/// Triplet-style margin over the head and tail features of both tracklets:
/// within-tracklet spread minus cross-tracklet separations, hinged at zero.
pub fn local_verif(h1: &[f64], t1: &[f64], h2: &[f64], t2: &[f64], delta: f64) -> f64 {
    let raw =
        sq_dist(h1, t1) + sq_dist(h2, t2) - sq_dist(h1, h2) - sq_dist(t1, t2) + delta;
    raw.max(0.0)
}

/// Cross-entropy at every forward and backward position of both tracklets,
/// each against its own tracklet's identity.
pub fn local_id(
    o1: &SeqOutputs,
    o2: &SeqOutputs,
    labels: (usize, usize),
    model: &SeqModel,
) -> Result<f64> {
    let mut loss = 0.0;
    for (o, label) in [(o1, labels.0), (o2, labels.1)] {
        for f in o.headed_forward.iter().chain(&o.headed_backward) {
            loss += cross_entropy(&model.head.logits(f), label)?;
        }
    }
    Ok(loss)
}

/// Full objective over a pair: global plus weighted local terms.
pub fn total_loss(pair: &TrainPair, model: &SeqModel, w: &LossWeights) -> Result<f64> {
    let o1 = model.encode(&pair.seq1)?;
    let o2 = model.encode(&pair.seq2)?;
    total_loss_from_outputs(&o1, &o2, pair, model, w)
}

pub(crate) fn total_loss_from_outputs(
    o1: &SeqOutputs,
    o2: &SeqOutputs,
    pair: &TrainPair,
    model: &SeqModel,
    w: &LossWeights,
) -> Result<f64> {
    let p1 = temporal_pool(o1);
    let p2 = temporal_pool(o2);
    let labels = (pair.label1, pair.label2);
    let mut loss = global_loss(&p1, &p2, pair.same_identity(), labels, model, w)?;

    if w.lambda_loc_v != 0.0 {
        let (l1, l2) = (o1.len(), o2.len());
        loss += w.lambda_loc_v
            * local_verif(
                &o1.headed_forward[0],
                &o1.headed_forward[l1 - 1],
                &o2.headed_forward[0],
                &o2.headed_forward[l2 - 1],
                w.delta,
            );
    }
    if w.lambda_loc_id != 0.0 {
        loss += w.lambda_loc_id * local_id(o1, o2, labels, model)?;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::Embedding;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn contrastive_hand_values() {
        assert_eq!(contrastive(&[1.0, 2.0], &[1.0, 2.0], true, 1.0).unwrap(), 0.0);
        assert_eq!(contrastive(&[0.5, 0.0], &[0.0, 0.0], true, 1.0).unwrap(), 0.25);
        // Different identities inside the margin: eta - distance.
        let v = contrastive(&[0.0, 0.0], &[0.5, 0.5], false, 1.0).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        // Outside the margin the hinge is flat at zero.
        assert_eq!(contrastive(&[0.0, 0.0], &[2.0, 0.0], false, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn contrastive_checks_dimensions() {
        assert!(contrastive(&[1.0], &[1.0, 2.0], true, 1.0).is_err());
    }

    #[test]
    fn cross_entropy_hand_values() {
        let v = cross_entropy(&[0.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert!((v - 4.0f64.ln()).abs() < 1e-12);

        let v = cross_entropy(&[1.0, 0.0], 0).unwrap();
        let expect = -((1.0f64.exp()) / (1.0f64.exp() + 1.0)).ln();
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 0.313262).abs() < 1e-6);

        let v = cross_entropy(&[30.0, 0.0], 0).unwrap();
        assert!(v < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_bad_classes() {
        assert_eq!(
            cross_entropy(&[0.0, 0.0], 2),
            Err(Error::ClassOutOfRange { class: 2, classes: 2 })
        );
    }

    #[test]
    fn stable_cross_entropy_agrees_with_the_naive_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let k = rng.gen_range(2..6);
            let logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let class = rng.gen_range(0..k);
            let naive = {
                let z: f64 = logits.iter().map(|l| l.exp()).sum();
                -(logits[class].exp() / z).ln()
            };
            let stable = cross_entropy(&logits, class).unwrap();
            assert!((stable - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn local_verif_hand_values() {
        let a = [1.0, 0.0];
        // All four features identical: only the margin remains.
        assert_eq!(local_verif(&a, &a, &a, &a, 0.5), 0.5);
        assert_eq!(local_verif(&a, &a, &a, &a, 0.0), 0.0);
        // Within-distance 0, cross distances 1 each: hinge clamps at zero.
        let b = [0.0, 0.0];
        assert_eq!(local_verif(&a, &a, &b, &b, 0.5), 0.0);
    }

    fn toy_model_and_pair(seed: u64) -> (SeqModel, TrainPair) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = SeqModel::init(2, 3, 4, 4, 3, seed);
        let mk = |rng: &mut ChaCha8Rng, len: usize| -> Vec<Embedding> {
            (0..len)
                .map(|_| Embedding::new((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()))
                .collect()
        };
        let pair = TrainPair {
            seq1: mk(&mut rng, 4),
            seq2: mk(&mut rng, 5),
            label1: 1,
            label2: 2,
        };
        (model, pair)
    }

    #[test]
    fn all_zero_weights_give_zero_loss() {
        let (model, pair) = toy_model_and_pair(5);
        let w = LossWeights {
            lambda_v: 0.0,
            lambda_id: 0.0,
            lambda_loc_v: 0.0,
            lambda_loc_id: 0.0,
            ..LossWeights::default()
        };
        assert_eq!(total_loss(&pair, &model, &w).unwrap(), 0.0);
    }

    #[test]
    fn total_is_the_weighted_sum_of_its_parts() {
        for seed in 0..8 {
            let (model, pair) = toy_model_and_pair(seed);
            let total =
                total_loss(&pair, &model, &LossWeights { classes: 3, ..Default::default() })
                    .unwrap();
            let mut parts = 0.0;
            for term in [
                LossTerm::Verification,
                LossTerm::Identification,
                LossTerm::LocalVerification,
                LossTerm::LocalIdentification,
            ] {
                let mut w = LossWeights::only(term);
                w.classes = 3;
                let coeff = match term {
                    LossTerm::Verification | LossTerm::Identification => 1.0,
                    _ => 0.1,
                };
                parts += coeff * total_loss(&pair, &model, &w).unwrap();
            }
            assert!((total - parts).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn total_is_linear_in_each_lambda() {
        let (model, pair) = toy_model_and_pair(11);
        let base = LossWeights { classes: 3, ..Default::default() };
        let at = |w: &LossWeights| total_loss(&pair, &model, w).unwrap();

        let mut w2 = base;
        w2.lambda_v *= 3.0;
        let only_v = at(&LossWeights { classes: 3, ..LossWeights::only(LossTerm::Verification) });
        assert!((at(&w2) - at(&base) - 2.0 * only_v).abs() < 1e-12);
    }

    #[test]
    fn losses_are_nonnegative_and_finite() {
        for seed in 0..20 {
            let (model, pair) = toy_model_and_pair(seed);
            let l = total_loss(&pair, &model, &LossWeights { classes: 3, ..Default::default() })
                .unwrap();
            assert!(l.is_finite() && l >= 0.0);
        }
    }

    #[test]
    fn worked_example_composition() {
        // Components 1.886294, 0, 2.772589 with local weights 1 and 0.1.
        let glo = 0.5 + 2.0 * 2.0f64.ln();
        let loc_id = 4.0 * 2.0f64.ln();
        let total = glo + 0.1 * loc_id;
        assert!((total - 2.163553).abs() < 1e-6);
    }
}
