//! Temporal-spatial gating, Siamese-feature tracklet association, and the
//! trajectory finishing passes (gap filling and smoothing).

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::assign::{hungarian, CostMatrix};
use crate::bbox::{iou, BBox};
use crate::embed::{Embedding, EmbeddingProvider};
use crate::error::Error;
use crate::math::{l2_normalize, sq_dist};
use crate::motion::mean_velocity;
use crate::seqnet::{temporal_pool, SeqModel};
use crate::track::{QuitReason, TrackNode, Tracklet, Trajectory};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    /// Velocity slack: the predicted box grows by `mu * dt` pixels per side.
    pub mu: f64,
    /// Longest temporal gap a merge may bridge.
    pub max_gap: u32,
    pub image_width: f64,
    pub image_height: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { mu: 2.0, max_gap: 120, image_width: 1920.0, image_height: 1080.0 }
    }
}

/// Temporal-spatial feasibility of appending `tau_j` after `tau_i`.
///
/// Requires strict time ordering, a gap within `max_gap`, and positive IOU
/// between `tau_j`'s head box and `tau_i`'s tail box extrapolated by its
/// mean velocity and inflated by the slack. Tracklets that left the image
/// (boundary quits, or a prediction outside the bounds) never gate in.
pub fn gate(tau_i: &Tracklet, tau_j: &Tracklet, cfg: &GateConfig) -> bool {
    if tau_i.quit_reason() == Some(QuitReason::OutOfBounds)
        || tau_j.quit_reason() == Some(QuitReason::OutOfBounds)
    {
        return false;
    }
    let tail = tau_i.last();
    let head = tau_j.first();
    if head.frame <= tail.frame {
        return false;
    }
    let dt = (head.frame - tail.frame) as f64;
    if head.frame - tail.frame > cfg.max_gap {
        return false;
    }

    let v = mean_velocity(tau_i);
    let cx = tail.bbox.cx + v.vx * dt;
    let cy = tail.bbox.cy + v.vy * dt;
    if cx < 0.0 || cx > cfg.image_width || cy < 0.0 || cy > cfg.image_height {
        return false;
    }
    let predicted = BBox::new(cx, cy, tail.bbox.w, tail.bbox.h).inflated(cfg.mu * dt);
    iou(&predicted, &head.bbox) > 0.0
}

/// Pooled sequence feature of a tracklet under the given model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackletFeature {
    pub vec: Vec<f64>,
}

pub fn tracklet_feature(
    tau: &Tracklet,
    provider: &dyn EmbeddingProvider,
    model: &SeqModel,
) -> Result<TrackletFeature> {
    let seq = node_embeddings(tau, provider)?;
    let outputs = model.encode(&seq)?;
    Ok(TrackletFeature { vec: temporal_pool(&outputs) })
}

fn node_embeddings(tau: &Tracklet, provider: &dyn EmbeddingProvider) -> Result<Vec<Embedding>> {
    tau.nodes
        .iter()
        .filter(|n| !n.interpolated)
        .map(|n| {
            let det_index = n
                .det_index
                .ok_or(Error::MissingEmbedding { frame: n.frame, det_index: u32::MAX })?;
            provider
                .embedding(n.frame, det_index)
                .cloned()
                .ok_or(Error::MissingEmbedding { frame: n.frame, det_index })
        })
        .collect()
}

/// Re-connects same-identity tracklets: gated pairs are scored by the
/// squared distance of their unit-normalized pooled features, matched
/// one-to-one by Hungarian assignment, merged tail-to-head, and the round
/// repeats until nothing merges. Merged tracklets keep the earlier id.
pub fn associate(
    tracklets: Vec<Tracklet>,
    provider: &dyn EmbeddingProvider,
    model: &SeqModel,
    gate_cfg: &GateConfig,
    sim_thresh: f64,
) -> Result<Vec<Tracklet>> {
    let mut items = tracklets;
    items.sort_by_key(|t| t.tracklet_id);
    // Feature cache keyed by id, invalidated when the node count changes.
    let mut cache: BTreeMap<i64, (usize, Vec<f64>)> = BTreeMap::new();

    loop {
        let n = items.len();
        if n < 2 {
            break;
        }
        for t in &items {
            let stale = match cache.get(&t.tracklet_id) {
                Some((len, _)) => *len != t.len(),
                None => true,
            };
            if stale {
                let mut f = tracklet_feature(t, provider, model)?.vec;
                l2_normalize(&mut f);
                cache.insert(t.tracklet_id, (t.len(), f));
            }
        }

        let mut matrix = CostMatrix::new(n, n);
        let mut any = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || !gate(&items[i], &items[j], gate_cfg) {
                    continue;
                }
                let fi = &cache[&items[i].tracklet_id].1;
                let fj = &cache[&items[j].tracklet_id].1;
                let d = sq_dist(fi, fj);
                if d <= sim_thresh {
                    matrix.set(i, j, d);
                    any = true;
                }
            }
        }
        if !any {
            break;
        }
        let pairs = hungarian(&matrix).pairs;
        if pairs.is_empty() {
            break;
        }

        // Collapse predecessor/successor chains in one pass.
        let mut successor = vec![usize::MAX; n];
        let mut has_pred = vec![false; n];
        for &(i, j) in &pairs {
            successor[i] = j;
            has_pred[j] = true;
        }
        let mut next_items = Vec::with_capacity(n - pairs.len());
        for start in 0..n {
            if has_pred[start] {
                continue; // consumed by its predecessor's chain
            }
            if successor[start] == usize::MAX {
                next_items.push(items[start].clone());
                continue;
            }
            let mut chain = items[start].clone();
            let mut cur = successor[start];
            loop {
                for node in &items[cur].nodes {
                    chain.push(node.clone())?;
                }
                chain = chain.with_quit_reason(items[cur].quit_reason());
                if successor[cur] == usize::MAX {
                    break;
                }
                cur = successor[cur];
            }
            let id = chain.tracklet_id;
            chain.restamp(id);
            next_items.push(chain);
        }
        items = next_items;
    }
    Ok(items)
}

/// Least-squares polynomial through `(t, y)` points, evaluated at `at`.
/// The degree is capped by the number of points.
fn polyfit_eval(points: &[(f64, f64)], max_degree: usize, at: f64) -> f64 {
    let degree = max_degree.min(points.len() - 1);
    let t0 = points.iter().map(|(t, _)| t).sum::<f64>() / points.len() as f64;
    let n = degree + 1;

    // Normal equations on the centered abscissa.
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for &(t, y) in points {
        let dt = t - t0;
        let mut powers = vec![1.0; 2 * n - 1];
        for k in 1..2 * n - 1 {
            powers[k] = powers[k - 1] * dt;
        }
        for i in 0..n {
            for j in 0..n {
                a[i][j] += powers[i + j];
            }
            b[i] += powers[i] * y;
        }
    }

    // Gaussian elimination with partial pivoting.
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        if a[col][col].abs() < 1e-12 {
            continue;
        }
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut coeff = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= a[i][j] * coeff[j];
        }
        coeff[i] = if a[i][i].abs() < 1e-12 { 0.0 } else { acc / a[i][i] };
    }

    let dt = at - t0;
    let mut value = 0.0;
    let mut p = 1.0;
    for c in coeff {
        value += c * p;
        p *= dt;
    }
    value
}

/// Window of up to five known nodes on each side of the gap boundary.
const FIT_WINDOW: usize = 5;

/// Fills every internal frame gap with nodes from per-coordinate
/// least-squares polynomial fits of degree at most two. Original nodes are
/// untouched; inserted ones are flagged interpolated.
pub fn gap_fill(tau: &Tracklet) -> Trajectory {
    let mut nodes: Vec<TrackNode> = Vec::with_capacity(tau.len());
    for (k, node) in tau.nodes.iter().enumerate() {
        if k > 0 {
            let prev = &tau.nodes[k - 1];
            if node.frame - prev.frame > 1 {
                let left_start = (k as isize - FIT_WINDOW as isize).max(0) as usize;
                let right_end = (k + FIT_WINDOW).min(tau.len());
                let window: Vec<&TrackNode> = tau.nodes[left_start..right_end].iter().collect();
                let pts = |f: fn(&BBox) -> f64| -> Vec<(f64, f64)> {
                    window.iter().map(|n| (n.frame as f64, f(&n.bbox))).collect()
                };
                let xs = pts(|b| b.cx);
                let ys = pts(|b| b.cy);
                let ws = pts(|b| b.w);
                let hs = pts(|b| b.h);
                for frame in prev.frame + 1..node.frame {
                    let t = frame as f64;
                    let bbox = BBox::new(
                        polyfit_eval(&xs, 2, t),
                        polyfit_eval(&ys, 2, t),
                        polyfit_eval(&ws, 2, t).max(1e-3),
                        polyfit_eval(&hs, 2, t).max(1e-3),
                    );
                    let mut filler = TrackNode::new(frame, tau.tracklet_id, bbox);
                    filler.interpolated = true;
                    nodes.push(filler);
                }
            }
        }
        nodes.push(node.clone());
    }
    Tracklet::from_nodes(tau.tracklet_id, nodes)
        .expect("filled nodes preserve frame order")
        .with_quit_reason(tau.quit_reason())
}

/// Centered moving average of every box coordinate; windows truncate at
/// the ends. The window must be odd, and a window of one is the identity.
pub fn smooth(tau: &Tracklet, window: usize) -> Result<Trajectory> {
    if window % 2 == 0 {
        return Err(Error::EvenWindow(window));
    }
    let half = window / 2;
    let n = tau.len();
    let mut nodes = tau.nodes.clone();
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let count = (hi - lo) as f64;
        let mut acc = [0.0; 4];
        for node in &tau.nodes[lo..hi] {
            let v = node.bbox.as_vec4();
            for k in 0..4 {
                acc[k] += v[k];
            }
        }
        nodes[i].bbox =
            BBox::new(acc[0] / count, acc[1] / count, acc[2] / count, acc[3] / count);
    }
    Ok(Tracklet::from_nodes(tau.tracklet_id, nodes)
        .expect("smoothing preserves frames")
        .with_quit_reason(tau.quit_reason()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingTable;

    fn tracklet_at(id: i64, frames: core::ops::RangeInclusive<u32>, x0: f64, vx: f64) -> Tracklet {
        let nodes: Vec<TrackNode> = frames
            .clone()
            .map(|f| {
                let dx = (f - *frames.start()) as f64 * vx;
                TrackNode::new(f, id, BBox::new(x0 + dx, 50.0, 4.0, 8.0))
                    .with_det_index(id as u32)
            })
            .collect();
        Tracklet::from_nodes(id, nodes).unwrap()
    }

    fn small_gate() -> GateConfig {
        GateConfig { mu: 0.0, max_gap: 30, image_width: 200.0, image_height: 200.0 }
    }

    #[test]
    fn time_ordering_is_required() {
        let a = tracklet_at(1, 1..=10, 10.0, 1.0);
        let b = tracklet_at(2, 5..=12, 30.0, 1.0);
        assert!(!gate(&b, &a, &small_gate()));
        // Overlapping in time fails both ways.
        assert!(!gate(&a, &b, &small_gate()));
    }

    #[test]
    fn extrapolated_overlap_gates_in() {
        // Tail at frame 10 center (20,50), velocity 1 px/frame; head at
        // frame 12 center (22,50) coincides with the prediction.
        let a = tracklet_at(1, 1..=10, 11.0, 1.0);
        let b = tracklet_at(2, 12..=20, 22.0, 1.0);
        assert!(gate(&a, &b, &small_gate()));
    }

    #[test]
    fn distant_heads_fail_the_overlap_test() {
        let a = tracklet_at(1, 1..=10, 11.0, 1.0);
        let mut b = tracklet_at(2, 12..=20, 22.0, 1.0);
        for n in &mut b.nodes {
            n.bbox = BBox::new(150.0, 150.0, 4.0, 8.0);
        }
        assert!(!gate(&a, &b, &small_gate()));
    }

    #[test]
    fn gate_is_antisymmetric_in_time() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let cfg = small_gate();
        for _ in 0..100 {
            let s1 = rng.gen_range(1..40u32);
            let l1 = rng.gen_range(1..10u32);
            let s2 = rng.gen_range(1..40u32);
            let l2 = rng.gen_range(1..10u32);
            let a = tracklet_at(1, s1..=s1 + l1, rng.gen_range(10.0..190.0), 0.5);
            let b = tracklet_at(2, s2..=s2 + l2, rng.gen_range(10.0..190.0), 0.5);
            assert!(!(gate(&a, &b, &cfg) && gate(&b, &a, &cfg)));
        }
    }

    #[test]
    fn boundary_quit_tracklets_never_gate() {
        let mut a = tracklet_at(1, 1..=10, 11.0, 1.0);
        let b = tracklet_at(2, 12..=20, 22.0, 1.0);
        assert!(gate(&a, &b, &small_gate()));
        a.advance_state(false, true, 30).unwrap();
        assert!(!gate(&a, &b, &small_gate()));
    }

    #[test]
    fn beyond_the_gap_horizon_fails() {
        let a = tracklet_at(1, 1..=10, 11.0, 0.0);
        let b = tracklet_at(2, 80..=90, 11.0, 0.0);
        let cfg = GateConfig { max_gap: 30, ..small_gate() };
        assert!(!gate(&a, &b, &cfg));
        let wide = GateConfig { max_gap: 120, ..small_gate() };
        assert!(gate(&a, &b, &wide));
    }

    fn provider_for(tracklets: &[&Tracklet], dim: usize, anchor: &[Option<usize>]) -> EmbeddingTable {
        // anchor[k] selects a basis vector per tracklet.
        let mut table = EmbeddingTable::new_normalized(dim);
        for (t, a) in tracklets.iter().zip(anchor) {
            for n in &t.nodes {
                let mut v = alloc::vec![0.0; dim];
                v[a.unwrap_or(0)] = 1.0;
                table.insert(n.frame, n.det_index.unwrap(), Embedding::new(v)).unwrap();
            }
        }
        table
    }

    #[test]
    fn split_identity_is_reassembled() {
        let a = tracklet_at(1, 1..=10, 11.0, 1.0);
        let b = tracklet_at(2, 12..=20, 22.0, 1.0);
        let table = provider_for(&[&a, &b], 4, &[Some(0), Some(0)]);
        let model = SeqModel::init(2, 4, 6, 6, 2, 3);
        let merged =
            associate(alloc::vec![a, b], &table, &model, &small_gate(), 1e-9).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].tracklet_id, 1);
        assert_eq!(merged[0].len(), 19);
        assert!(merged[0].nodes.iter().all(|n| n.id == 1));
    }

    #[test]
    fn different_appearances_stay_apart() {
        let a = tracklet_at(1, 1..=10, 11.0, 1.0);
        let b = tracklet_at(2, 12..=20, 22.0, 1.0);
        let table = provider_for(&[&a, &b], 4, &[Some(0), Some(1)]);
        let model = SeqModel::init(2, 4, 6, 6, 2, 3);
        let merged =
            associate(alloc::vec![a, b], &table, &model, &small_gate(), 1e-9).unwrap();
        assert_eq!(merged.len(), 2);
    }

    #[test]
    fn chains_collapse_in_one_round() {
        let a = tracklet_at(1, 1..=5, 11.0, 1.0);
        let b = tracklet_at(2, 7..=11, 17.0, 1.0);
        let c = tracklet_at(3, 13..=17, 23.0, 1.0);
        let table = provider_for(&[&a, &b, &c], 4, &[Some(0), Some(0), Some(0)]);
        let model = SeqModel::init(2, 4, 6, 6, 2, 3);
        let merged =
            associate(alloc::vec![c, a, b], &table, &model, &small_gate(), 1e-9).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].tracklet_id, 1);
        let frames: Vec<u32> = merged[0].nodes.iter().map(|n| n.frame).collect();
        assert!(frames.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn quitted_tracklets_are_left_out_of_merging() {
        let mut a = tracklet_at(1, 1..=10, 11.0, 1.0);
        a.advance_state(false, true, 30).unwrap();
        let b = tracklet_at(2, 12..=20, 22.0, 1.0);
        let table = provider_for(&[&a, &b], 4, &[Some(0), Some(0)]);
        let model = SeqModel::init(2, 4, 6, 6, 2, 3);
        let merged =
            associate(alloc::vec![a, b], &table, &model, &small_gate(), 1e-9).unwrap();
        assert_eq!(merged.len(), 2);
    }

    #[test]
    fn positive_head_scaling_with_matching_threshold_keeps_the_merge_set() {
        let a = tracklet_at(1, 1..=6, 11.0, 1.0);
        let b = tracklet_at(2, 8..=13, 18.0, 1.0);
        let c = tracklet_at(3, 8..=13, 18.0, 1.0);
        // c shares b's frames; only one can follow a.
        let mut table = EmbeddingTable::new_normalized(4);
        for (t, basis) in [(&a, 0usize), (&b, 0), (&c, 1)] {
            for n in &t.nodes {
                let mut v = alloc::vec![0.0; 4];
                v[basis] = 1.0;
                let _ = table.insert(n.frame, n.det_index.unwrap(), Embedding::new(v));
            }
        }
        let mut model = SeqModel::init(2, 4, 6, 6, 2, 3);
        let run = |m: &SeqModel, thresh: f64| {
            associate(
                alloc::vec![a.clone(), b.clone(), c.clone()],
                &table,
                m,
                &small_gate(),
                thresh,
            )
            .unwrap()
            .iter()
            .map(|t| (t.tracklet_id, t.len()))
            .collect::<Vec<_>>()
        };
        let before = run(&model, 0.5);
        // ReLU heads are positively homogeneous, so scaling the head scales
        // every pooled feature by the same constant.
        for v in model.head.w_f.as_mut_slice() {
            *v *= 4.0;
        }
        for v in model.head.b_f.iter_mut() {
            *v *= 4.0;
        }
        let after = run(&model, 0.5 * 16.0);
        assert_eq!(before, after);
    }

    #[test]
    fn same_tracklets_give_identical_features() {
        let a = tracklet_at(1, 1..=6, 11.0, 1.0);
        let table = provider_for(&[&a], 4, &[Some(0)]);
        let model = SeqModel::init(2, 4, 6, 6, 2, 3);
        let f1 = tracklet_feature(&a, &table, &model).unwrap();
        let f2 = tracklet_feature(&a, &table, &model).unwrap();
        assert_eq!(f1, f2);
    }

    #[test]
    fn zero_model_feature_is_relu_of_head_bias() {
        let a = tracklet_at(1, 1..=5, 11.0, 1.0);
        let table = provider_for(&[&a], 4, &[Some(0)]);
        let mut model = SeqModel::zeros(2, 4, 3, 3, 2);
        model.head.b_f = alloc::vec![0.75, -0.5, 0.0];
        let f = tracklet_feature(&a, &table, &model).unwrap();
        assert_eq!(f.vec, alloc::vec![0.75, 0.0, 0.0]);
    }

    #[test]
    fn two_point_gap_is_linear() {
        let nodes = alloc::vec![
            TrackNode::new(10, 1, BBox::new(0.0, 5.0, 2.0, 2.0)),
            TrackNode::new(13, 1, BBox::new(3.0, 5.0, 2.0, 2.0)),
        ];
        let tau = Tracklet::from_nodes(1, nodes).unwrap();
        let filled = gap_fill(&tau);
        assert_eq!(filled.len(), 4);
        assert!((filled.nodes[1].bbox.cx - 1.0).abs() < 1e-9);
        assert!((filled.nodes[2].bbox.cx - 2.0).abs() < 1e-9);
        assert!(filled.nodes[1].interpolated && filled.nodes[2].interpolated);
    }

    #[test]
    fn no_gaps_means_identity() {
        let tau = tracklet_at(1, 1..=6, 10.0, 1.5);
        assert_eq!(gap_fill(&tau), tau);
    }

    #[test]
    fn quadratic_motion_is_reconstructed_exactly() {
        // x = t^2 sampled at t = 1, 2, 4, 5; the missing t = 3 must come
        // back as exactly 9.
        let nodes: Vec<TrackNode> = [1u32, 2, 4, 5]
            .iter()
            .map(|&t| {
                TrackNode::new(t, 1, BBox::new((t * t) as f64, 5.0, 2.0, 2.0))
            })
            .collect();
        let tau = Tracklet::from_nodes(1, nodes).unwrap();
        let filled = gap_fill(&tau);
        assert_eq!(filled.len(), 5);
        let inserted = &filled.nodes[2];
        assert_eq!(inserted.frame, 3);
        assert!((inserted.bbox.cx - 9.0).abs() < 1e-9, "got {}", inserted.bbox.cx);
    }

    #[test]
    fn gap_fill_keeps_original_nodes_bit_identical() {
        let mut tau = tracklet_at(1, 1..=4, 10.0, 2.0);
        let mut tail = tracklet_at(1, 9..=12, 30.0, 2.0);
        for n in tail.nodes.drain(..) {
            tau.push(n).unwrap();
        }
        let filled = gap_fill(&tau);
        let originals: Vec<&TrackNode> = filled.nodes.iter().filter(|n| !n.interpolated).collect();
        assert_eq!(originals.len(), tau.len());
        for (a, b) in originals.iter().zip(&tau.nodes) {
            assert_eq!(*a, b);
        }
        // And no internal gaps remain.
        assert!(filled.nodes.windows(2).all(|w| w[1].frame == w[0].frame + 1));
    }

    #[test]
    fn smoothing_window_one_is_identity() {
        let tau = tracklet_at(1, 1..=7, 10.0, 3.0);
        assert_eq!(smooth(&tau, 1).unwrap(), tau);
    }

    #[test]
    fn smoothing_leaves_constants_alone() {
        let tau = tracklet_at(1, 1..=7, 10.0, 0.0);
        assert_eq!(smooth(&tau, 5).unwrap(), tau);
    }

    #[test]
    fn smoothing_truncates_at_the_ends() {
        let nodes: Vec<TrackNode> = [(1u32, 0.0), (2, 3.0), (3, 0.0)]
            .iter()
            .map(|&(t, x)| TrackNode::new(t, 1, BBox::new(x, 5.0, 2.0, 2.0)))
            .collect();
        let tau = Tracklet::from_nodes(1, nodes).unwrap();
        let s = smooth(&tau, 3).unwrap();
        let xs: Vec<f64> = s.nodes.iter().map(|n| n.bbox.cx).collect();
        assert_eq!(xs, alloc::vec![1.5, 1.0, 1.5]);
    }

    #[test]
    fn even_windows_are_rejected() {
        let tau = tracklet_at(1, 1..=3, 0.0, 0.0);
        assert_eq!(smooth(&tau, 4).unwrap_err(), Error::EvenWindow(4));
    }

    #[test]
    fn smoothing_preserves_frames_and_mean() {
        let tau = tracklet_at(1, 1..=30, 5.0, 1.0);
        let s = smooth(&tau, 5).unwrap();
        assert_eq!(s.len(), tau.len());
        let mean = |t: &Tracklet| t.nodes.iter().map(|n| n.bbox.cx).sum::<f64>() / t.len() as f64;
        assert!((mean(&s) - mean(&tau)).abs() < 0.5);
        for (a, b) in s.nodes.iter().zip(&tau.nodes) {
            assert_eq!(a.frame, b.frame);
            assert_eq!(a.id, b.id);
        }
    }
}
