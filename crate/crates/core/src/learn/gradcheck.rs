//! Central finite-difference verification of the analytic gradients.
//!
//! The finite-difference side only ever calls the forward loss, so it is
//! independent of the backpropagation it checks.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embed::Embedding;
use crate::learn::backprop::{flatten_grads, flatten_model, grad_total_loss, load_model};
use crate::learn::losses::{total_loss, LossTerm, LossWeights, TrainPair};
use crate::math::{sq_dist, sqrt};
use crate::seqnet::SeqModel;
use crate::Result;

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct TermReport {
    pub name: &'static str,
    pub points: usize,
    pub max_rel: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub terms: Vec<TermReport>,
}

impl GradCheckReport {
    pub fn max_rel(&self) -> f64 {
        self.terms.iter().map(|t| t.max_rel).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel() < tol
    }
}

fn random_pair(rng: &mut ChaCha8Rng, d_in: usize, classes: usize) -> TrainPair {
    let mut seq = |rng: &mut ChaCha8Rng| -> Vec<Embedding> {
        let len = rng.gen_range(2..=6);
        (0..len)
            .map(|_| Embedding::new((0..d_in).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect()
    };
    TrainPair {
        seq1: seq(rng),
        seq2: seq(rng),
        label1: rng.gen_range(0..classes),
        label2: rng.gen_range(0..classes),
    }
}

/// Rejects configurations whose loss sits within finite-difference reach of
/// a hinge or ReLU kink, where central differences straddle two slopes.
fn near_kink(model: &SeqModel, pair: &TrainPair, w: &LossWeights) -> Result<bool> {
    let margin = 50.0 * FD_STEP;
    let o1 = model.encode(&pair.seq1)?;
    let o2 = model.encode(&pair.seq2)?;
    let pre = |g: &[f64]| {
        let mut a = model.head.w_f.matvec(g);
        crate::seqnet::add_assign(&mut a, &model.head.b_f);
        a
    };
    for o in [&o1, &o2] {
        for g in o.forward.iter().chain(&o.backward) {
            if pre(g).iter().any(|a| a.abs() < margin) {
                return Ok(true);
            }
        }
    }
    if w.lambda_v != 0.0 && !pair.same_identity() {
        let p1 = crate::seqnet::temporal_pool(&o1);
        let p2 = crate::seqnet::temporal_pool(&o2);
        if (sq_dist(&p1, &p2) - w.eta).abs() < margin {
            return Ok(true);
        }
    }
    if w.lambda_loc_v != 0.0 {
        let (l1, l2) = (o1.len(), o2.len());
        let h1 = &o1.headed_forward[0];
        let t1 = &o1.headed_forward[l1 - 1];
        let h2 = &o2.headed_forward[0];
        let t2 = &o2.headed_forward[l2 - 1];
        let raw = sq_dist(h1, t1) + sq_dist(h2, t2) - sq_dist(h1, h2) - sq_dist(t1, t2)
            + w.delta;
        if raw.abs() < margin {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Relative error between the analytic and central finite-difference
/// gradient at one random parameter point.
pub fn check_point(model: &SeqModel, pair: &TrainPair, w: &LossWeights) -> Result<f64> {
    let (_, grads) = grad_total_loss(pair, model, w)?;
    let analytic = flatten_grads(&grads);

    let mut probe = model.clone();
    let base = flatten_model(model);
    let mut fd = Vec::with_capacity(base.len());
    let mut theta = base.clone();
    for i in 0..base.len() {
        theta[i] = base[i] + FD_STEP;
        load_model(&mut probe, &theta);
        let up = total_loss(pair, &probe, w)?;
        theta[i] = base[i] - FD_STEP;
        load_model(&mut probe, &theta);
        let down = total_loss(pair, &probe, w)?;
        theta[i] = base[i];
        fd.push((up - down) / (2.0 * FD_STEP));
    }

    let diff: f64 = sqrt(analytic.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum());
    let na = sqrt(analytic.iter().map(|a| a * a).sum());
    let nf = sqrt(fd.iter().map(|a| a * a).sum());
    Ok(diff / na.max(nf).max(1e-12))
}

/// Checks every loss term separately and the weighted total, at
/// `points_per_term` random parameter points each, on a four-layer
/// bidirectional encoder of small width.
pub fn gradient_check(points_per_term: usize, seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d_in, d_h, d_f, classes) = (3, 4, 4, 3);

    let configs: [(&'static str, LossWeights); 5] = [
        ("verification", LossWeights { classes, ..LossWeights::only(LossTerm::Verification) }),
        ("identification", LossWeights { classes, ..LossWeights::only(LossTerm::Identification) }),
        (
            "local-verification",
            LossWeights { classes, ..LossWeights::only(LossTerm::LocalVerification) },
        ),
        (
            "local-identification",
            LossWeights { classes, ..LossWeights::only(LossTerm::LocalIdentification) },
        ),
        ("total", LossWeights { classes, ..LossWeights::default() }),
    ];

    let mut terms = Vec::new();
    for (name, w) in configs {
        let mut max_rel: f64 = 0.0;
        let mut done = 0;
        while done < points_per_term {
            let model = SeqModel::init(4, d_in, d_h, d_f, classes, rng.gen());
            let pair = random_pair(&mut rng, d_in, classes);
            if near_kink(&model, &pair, &w)? {
                continue;
            }
            let rel = check_point(&model, &pair, &w)?;
            max_rel = max_rel.max(rel);
            done += 1;
        }
        terms.push(TermReport { name, points: points_per_term, max_rel });
    }
    Ok(GradCheckReport { terms })
}
