//! Frame-by-frame tracklet generation: fused appearance and motion costs,
//! Hungarian assignment over live candidates versus detections, and the
//! lifecycle bookkeeping that turns matches into tracklets.

use alloc::vec::Vec;

use crate::assign::{hungarian, CostMatrix};
use crate::bbox::BBox;
use crate::detect::{nms, Detection};
use crate::embed::{Embedding, EmbeddingProvider};
use crate::error::Error;
use crate::math::sq_dist;
use crate::motion::{predict_const_velocity, predict_recurrent, MotionHistory};
use crate::seqnet::LstmWeights;
use crate::track::{IdGen, NodeState, TrackNode, Tracklet};
use crate::Result;

/// Generation-stage parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    /// Appearance weight in the fused cost.
    pub alpha: f64,
    /// Motion weight in the fused cost.
    pub beta: f64,
    /// Fused costs above this are forbidden edges (birth/death gate).
    pub match_cost_max: f64,
    pub nms_thresh: f64,
    pub image_width: f64,
    pub image_height: f64,
    /// Frames a candidate may stay lost before it quits.
    pub max_lost_age: u32,
    /// History window for the motion predictor.
    pub motion_history: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            alpha: 1.0,
            beta: 1.0,
            match_cost_max: 1.5,
            nms_thresh: 0.6,
            image_width: 1920.0,
            image_height: 1080.0,
            max_lost_age: 30,
            motion_history: 8,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha + self.beta <= 0.0 || self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::Invalid("cost weights must be nonnegative with a positive sum".into()));
        }
        if !(0.0 < self.nms_thresh && self.nms_thresh < 1.0) {
            return Err(Error::Invalid("nms threshold must lie in (0,1)".into()));
        }
        if self.image_width <= 0.0 || self.image_height <= 0.0 {
            return Err(Error::Invalid("image dimensions must be positive".into()));
        }
        Ok(())
    }

    fn in_bounds(&self, b: &BBox) -> bool {
        b.cx >= 0.0 && b.cx <= self.image_width && b.cy >= 0.0 && b.cy <= self.image_height
    }
}

/// Squared Euclidean distance between two (unit-normalized) appearance
/// vectors.
pub fn appearance_cost(f1: &Embedding, f2: &Embedding) -> Result<f64> {
    if f1.dim() != f2.dim() {
        return Err(Error::DimensionMismatch { expected: f1.dim(), got: f2.dim() });
    }
    Ok(sq_dist(f1.as_slice(), f2.as_slice()))
}

/// Squared distance between the predicted and observed `[x, y, w, h]`
/// vectors, divided by `norm` squared so pixel distances sit on the same
/// scale as normalized appearance distances.
pub fn motion_cost(pred: &BBox, det: &BBox, norm: f64) -> f64 {
    debug_assert!(norm > 0.0);
    let p = pred.as_vec4();
    let d = det.as_vec4();
    sq_dist(&p, &d) / (norm * norm)
}

/// Fused pair cost `alpha * appearance + beta * motion`.
pub fn pair_cost(appearance: f64, motion: f64, cfg: &GenConfig) -> f64 {
    cfg.alpha * appearance + cfg.beta * motion
}

/// How candidates predict their next position.
pub enum MotionModel<'a> {
    ConstVelocity,
    /// Recurrent predictor; falls back to constant velocity while the
    /// history is shorter than the cell needs.
    Recurrent(&'a LstmWeights),
}

impl MotionModel<'_> {
    fn predict(&self, hist: &MotionHistory, target_frame: u32, cfg: &GenConfig) -> BBox {
        match self {
            MotionModel::ConstVelocity => predict_const_velocity(hist, target_frame),
            MotionModel::Recurrent(w) => {
                match predict_recurrent(hist, w, cfg.image_width, cfg.image_height) {
                    Ok(b) => b,
                    Err(_) => predict_const_velocity(hist, target_frame),
                }
            }
        }
    }
}

struct Candidate {
    tracklet: Tracklet,
    /// Embedding of the most recent matched detection.
    last_embedding: Embedding,
}

/// Runs the whole generation stage over per-frame detections.
///
/// Frames are processed in ascending order. Each frame is suppressed with
/// NMS, live candidates are matched against the survivors by Hungarian
/// assignment on the fused cost, matched candidates extend their
/// tracklets, unmatched candidates advance the state machine, and
/// unmatched detections are born as new tracklets.
pub fn generate_tracklets(
    detections_by_frame: &[(u32, Vec<Detection>)],
    embeddings: &dyn EmbeddingProvider,
    motion: &MotionModel<'_>,
    cfg: &GenConfig,
    ids: &mut IdGen,
) -> Result<Vec<Tracklet>> {
    cfg.validate()?;
    let mut live: Vec<Candidate> = Vec::new();
    let mut done: Vec<Tracklet> = Vec::new();

    let mut frames: Vec<&(u32, Vec<Detection>)> = detections_by_frame.iter().collect();
    frames.sort_by_key(|(f, _)| *f);

    for (frame, dets) in frames {
        let frame = *frame;
        let kept = nms(dets, cfg.nms_thresh);
        let mut kept_embeddings = Vec::with_capacity(kept.len());
        for d in &kept {
            let e = embeddings
                .embedding(frame, d.det_index)
                .ok_or(Error::MissingEmbedding { frame, det_index: d.det_index })?;
            kept_embeddings.push(e.clone());
        }

        // Predicted positions of every live candidate at this frame.
        let predictions: Vec<BBox> = live
            .iter()
            .map(|c| {
                let hist = MotionHistory::from_tracklet(&c.tracklet, cfg.motion_history);
                motion.predict(&hist, frame, cfg)
            })
            .collect();

        let mut matrix = CostMatrix::new(live.len(), kept.len());
        for (r, cand) in live.iter().enumerate() {
            let norm = cand.tracklet.last().bbox.diagonal();
            for (c, det) in kept.iter().enumerate() {
                let fa = appearance_cost(&cand.last_embedding, &kept_embeddings[c])?;
                let fm = motion_cost(&predictions[r], &det.bbox, norm);
                let cost = pair_cost(fa, fm, cfg);
                if cost <= cfg.match_cost_max {
                    matrix.set(r, c, cost);
                }
            }
        }
        let assignment = hungarian(&matrix);

        let mut matched_rows = alloc::vec![false; live.len()];
        let mut matched_cols = alloc::vec![false; kept.len()];
        for &(r, c) in &assignment.pairs {
            matched_rows[r] = true;
            matched_cols[c] = true;
            let cand = &mut live[r];
            let node = TrackNode::new(frame, cand.tracklet.tracklet_id, kept[c].bbox)
                .with_det_index(kept[c].det_index);
            cand.tracklet.push(node)?;
            cand.last_embedding = kept_embeddings[c].clone();
        }

        // Advance every candidate's state; the boundary test looks one
        // frame ahead from the freshest history.
        for (r, cand) in live.iter_mut().enumerate() {
            let hist = MotionHistory::from_tracklet(&cand.tracklet, cfg.motion_history);
            let ahead = motion.predict(&hist, frame + 1, cfg);
            let exits = !cfg.in_bounds(&ahead);
            cand.tracklet.advance_state(matched_rows[r], exits, cfg.max_lost_age)?;
        }

        // Births from unmatched detections.
        for (c, det) in kept.iter().enumerate() {
            if matched_cols[c] {
                continue;
            }
            let id = ids.next_id();
            let node = TrackNode::new(frame, id, det.bbox).with_det_index(det.det_index);
            live.push(Candidate {
                tracklet: Tracklet::new(id, node),
                last_embedding: kept_embeddings[c].clone(),
            });
        }

        // Retire quitted candidates.
        let mut still_live = Vec::with_capacity(live.len());
        for cand in live {
            if cand.tracklet.state() == NodeState::Quitted {
                done.push(cand.tracklet);
            } else {
                still_live.push(cand);
            }
        }
        live = still_live;
    }

    done.extend(live.into_iter().map(|c| c.tracklet));
    done.sort_by_key(|t| t.tracklet_id);
    Ok(done)
}
