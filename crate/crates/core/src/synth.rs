//! Synthetic scenes and embedding oracles backing the desk-scale tests.
//!
//! Identities follow piecewise-linear walks with reflective bounds.
//! Crossing events steer a pair of identities through a common meeting
//! point; while their boxes overlap, the trailing identity's detections
//! are dropped (full occlusion) or its embeddings blended toward the
//! occluder (partial occlusion).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bbox::{iou, BBox};
use crate::detect::Detection;
use crate::embed::{Embedding, EmbeddingTable};
use crate::error::Error;
use crate::learn::LabeledSequence;
use crate::math::l2_normalize;
use crate::track::{TrackNode, Tracklet};
use crate::Result;

/// A forced encounter between two identities inside a frame window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    pub a: usize,
    pub b: usize,
    pub start: u32,
    pub end: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub n_identities: usize,
    pub n_frames: u32,
    pub image_width: f64,
    pub image_height: f64,
    /// Chance per frame of re-drawing the walk direction.
    pub turn_prob: f64,
    pub speed_range: (f64, f64),
    pub box_width_range: (f64, f64),
    /// Height over width of every box.
    pub aspect: f64,
    /// Chance of dropping a detection outright.
    pub miss_rate: f64,
    /// Standard deviation of the center jitter in pixels; sizes jitter at
    /// half of it.
    pub jitter_sigma: f64,
    pub crossings: Vec<CrossingEvent>,
    /// Overlap beyond which the occluded identity's detection is dropped.
    pub occlusion_iou: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            n_identities: 5,
            n_frames: 100,
            image_width: 640.0,
            image_height: 480.0,
            turn_prob: 0.03,
            speed_range: (1.0, 3.0),
            box_width_range: (24.0, 40.0),
            aspect: 2.2,
            miss_rate: 0.0,
            jitter_sigma: 0.0,
            crossings: Vec::new(),
            occlusion_iou: 0.55,
            seed: 0,
        }
    }
}

impl SceneSpec {
    /// Evenly spaced crossing windows over disjoint identity pairs.
    pub fn with_scheduled_crossings(mut self, n_crossings: usize, window: u32) -> Self {
        self.crossings.clear();
        if n_crossings == 0 || self.n_identities < 2 {
            return self;
        }
        let usable = self.n_frames.saturating_sub(2 * window);
        for k in 0..n_crossings {
            let start = window + (usable * k as u32) / n_crossings as u32;
            let a = (2 * k) % self.n_identities;
            let mut b = (2 * k + 1) % self.n_identities;
            if b == a {
                b = (a + 1) % self.n_identities;
            }
            self.crossings.push(CrossingEvent { a, b, start, end: start + window });
        }
        self
    }
}

/// Ground truth plus detector output for one synthetic sequence.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    /// One full-length track per identity; ids run from 1.
    pub gt: Vec<Tracklet>,
    /// Per frame (1-based), the surviving jittered detections.
    pub dets_by_frame: Vec<(u32, Vec<Detection>)>,
    /// Ground-truth identity of each detection.
    pub det_identity: BTreeMap<(u32, u32), i64>,
    /// Detections observed during a partial occlusion, with the occluder.
    pub occluded: BTreeMap<(u32, u32), i64>,
}

impl Scene {
    pub fn total_gt_boxes(&self) -> usize {
        self.gt.iter().map(|t| t.len()).sum()
    }
}

struct Walker {
    pos: (f64, f64),
    vel: (f64, f64),
    size: (f64, f64),
    speed: f64,
    /// Steering toward a crossing point overrides the random walk.
    steer_until: u32,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    if spec.n_identities == 0 || spec.n_frames == 0 {
        return Err(Error::InfeasibleScene("need at least one identity and one frame".into()));
    }
    for ev in &spec.crossings {
        if ev.a >= spec.n_identities || ev.b >= spec.n_identities || ev.a == ev.b {
            return Err(Error::InfeasibleScene("crossing event names a bad identity".into()));
        }
        if ev.end <= ev.start || ev.end > spec.n_frames {
            return Err(Error::InfeasibleScene("crossing window out of range".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Spawn with pairwise separation so early frames are unambiguous.
    let max_w = spec.box_width_range.1;
    let margin = max_w;
    let min_sep = 2.0 * max_w;
    let mut walkers: Vec<Walker> = Vec::with_capacity(spec.n_identities);
    for _ in 0..spec.n_identities {
        let mut placed = false;
        for _attempt in 0..200 {
            let x = rng.gen_range(margin..spec.image_width - margin);
            let y = rng.gen_range(margin..spec.image_height - margin);
            if walkers.iter().all(|w| {
                let (dx, dy) = (w.pos.0 - x, w.pos.1 - y);
                dx * dx + dy * dy > min_sep * min_sep
            }) {
                let speed = rng.gen_range(spec.speed_range.0..=spec.speed_range.1);
                let theta = rng.gen_range(0.0..core::f64::consts::TAU);
                let bw = rng.gen_range(spec.box_width_range.0..=spec.box_width_range.1);
                walkers.push(Walker {
                    pos: (x, y),
                    vel: (speed * cos(theta), speed * sin(theta)),
                    size: (bw, (spec.aspect * bw).min(spec.image_height / 2.0)),
                    speed,
                    steer_until: 0,
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InfeasibleScene(alloc::format!(
                "could not place {} identities in a {}x{} image",
                spec.n_identities,
                spec.image_width,
                spec.image_height
            )));
        }
    }

    let mut gt_nodes: Vec<Vec<TrackNode>> = vec![Vec::new(); spec.n_identities];
    let mut dets_by_frame = Vec::with_capacity(spec.n_frames as usize);
    let mut det_identity = BTreeMap::new();
    let mut occluded = BTreeMap::new();
    let jitter = Normal::new(0.0, spec.jitter_sigma.max(1e-12)).map_err(|_| {
        Error::InfeasibleScene("bad jitter sigma".to_string())
    })?;

    for frame in 1..=spec.n_frames {
        // Kick off crossings scheduled for this frame: both walkers steer
        // to meet midway through the window.
        for ev in &spec.crossings {
            if ev.start == frame {
                let meet_frame = (ev.start + ev.end) / 2;
                let steps = (meet_frame - frame).max(1) as f64;
                let (pa, pb) = (walkers[ev.a].pos, walkers[ev.b].pos);
                let meet = ((pa.0 + pb.0) / 2.0, (pa.1 + pb.1) / 2.0);
                for &idx in &[ev.a, ev.b] {
                    let w = &mut walkers[idx];
                    w.vel = ((meet.0 - w.pos.0) / steps, (meet.1 - w.pos.1) / steps);
                    w.steer_until = ev.end;
                }
            }
        }

        // Record ground truth at the current positions.
        for (i, w) in walkers.iter().enumerate() {
            let bbox = BBox::new(w.pos.0, w.pos.1, w.size.0, w.size.1);
            gt_nodes[i].push(TrackNode::new(frame, i as i64 + 1, bbox));
        }

        // Emit detections in a shuffled order so detection indices carry
        // no identity hints.
        let mut order: Vec<usize> = (0..spec.n_identities).collect();
        order.shuffle(&mut rng);
        let mut dets = Vec::new();
        for &i in &order {
            let miss = rng.gen_bool(spec.miss_rate.clamp(0.0, 1.0));
            // Occlusion by an active crossing partner.
            let mut occluder: Option<usize> = None;
            let mut fully_occluded = false;
            for ev in &spec.crossings {
                let partner = if ev.a == i {
                    Some(ev.b)
                } else if ev.b == i {
                    Some(ev.a)
                } else {
                    None
                };
                if let Some(p) = partner {
                    if frame >= ev.start && frame <= ev.end {
                        let me = &gt_nodes[i].last().expect("just pushed").bbox;
                        let other = &gt_nodes[p].last().expect("just pushed").bbox;
                        let overlap = iou(me, other);
                        // The second identity of the pair yields.
                        if overlap > 0.0 && ev.b == i {
                            occluder = Some(p);
                            fully_occluded = overlap > spec.occlusion_iou;
                        }
                    }
                }
            }
            if miss || fully_occluded {
                continue;
            }
            let det_index = dets.len() as u32;
            let gt_box = gt_nodes[i].last().expect("just pushed").bbox;
            let j = |rng: &mut ChaCha8Rng, s: f64| -> f64 {
                if spec.jitter_sigma > 0.0 {
                    s * jitter.sample(rng)
                } else {
                    0.0
                }
            };
            let bbox = BBox::new(
                (gt_box.cx + j(&mut rng, 1.0)).clamp(0.0, spec.image_width),
                (gt_box.cy + j(&mut rng, 1.0)).clamp(0.0, spec.image_height),
                (gt_box.w + j(&mut rng, 0.5)).max(2.0),
                (gt_box.h + j(&mut rng, 0.5)).max(2.0),
            );
            let confidence = rng.gen_range(0.8..1.0);
            dets.push(Detection { frame, bbox, confidence, det_index });
            det_identity.insert((frame, det_index), i as i64 + 1);
            if let Some(p) = occluder {
                occluded.insert((frame, det_index), p as i64 + 1);
            }
        }
        dets_by_frame.push((frame, dets));

        // Advance the walk.
        for w in walkers.iter_mut() {
            if w.steer_until < frame && rng.gen_bool(spec.turn_prob.clamp(0.0, 1.0)) {
                let theta = rng.gen_range(0.0..core::f64::consts::TAU);
                w.vel = (w.speed * cos(theta), w.speed * sin(theta));
            }
            w.pos.0 += w.vel.0;
            w.pos.1 += w.vel.1;
            // Reflect off the walls, keeping the whole box inside.
            let (hw, hh) = (w.size.0 / 2.0, w.size.1 / 2.0);
            if w.pos.0 < hw {
                w.pos.0 = 2.0 * hw - w.pos.0;
                w.vel.0 = -w.vel.0;
            }
            if w.pos.0 > spec.image_width - hw {
                w.pos.0 = 2.0 * (spec.image_width - hw) - w.pos.0;
                w.vel.0 = -w.vel.0;
            }
            if w.pos.1 < hh {
                w.pos.1 = 2.0 * hh - w.pos.1;
                w.vel.1 = -w.vel.1;
            }
            if w.pos.1 > spec.image_height - hh {
                w.pos.1 = 2.0 * (spec.image_height - hh) - w.pos.1;
                w.vel.1 = -w.vel.1;
            }
        }
    }

    let gt = gt_nodes
        .into_iter()
        .enumerate()
        .map(|(i, nodes)| Tracklet::from_nodes(i as i64 + 1, nodes))
        .collect::<Result<Vec<_>>>()?;

    Ok(Scene { spec: spec.clone(), gt, dets_by_frame, det_identity, occluded })
}

/// Unit anchors per identity plus Gaussian observation noise;
/// re-normalized per observation. Occluded observations are blended
/// halfway toward the occluder's anchor before the noise.
#[derive(Debug, Clone)]
pub struct EmbeddingOracle {
    pub anchors: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl EmbeddingOracle {
    pub fn new(n_identities: usize, dim: usize, sigma: f64, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Invalid("oracle embeddings need dimension >= 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let anchors = (0..n_identities)
            .map(|_| {
                let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
                l2_normalize(&mut v);
                v
            })
            .collect();
        Ok(EmbeddingOracle { anchors, sigma })
    }

    pub fn dim(&self) -> usize {
        self.anchors.first().map_or(0, |a| a.len())
    }

    /// One observation of `identity` (1-based id).
    pub fn observe<R: Rng>(&self, identity: i64, rng: &mut R) -> Embedding {
        self.sample(identity, None, rng)
    }

    pub fn observe_occluded<R: Rng>(&self, identity: i64, occluder: i64, rng: &mut R) -> Embedding {
        self.sample(identity, Some(occluder), rng)
    }

    fn sample<R: Rng>(&self, identity: i64, occluder: Option<i64>, rng: &mut R) -> Embedding {
        let a = &self.anchors[(identity - 1) as usize];
        let mut v: Vec<f64> = match occluder {
            Some(o) => {
                let b = &self.anchors[(o - 1) as usize];
                a.iter().zip(b).map(|(x, y)| 0.5 * x + 0.5 * y).collect()
            }
            None => a.clone(),
        };
        if self.sigma > 0.0 {
            let normal = Normal::new(0.0, self.sigma).expect("positive sigma");
            for x in v.iter_mut() {
                *x += normal.sample(rng);
            }
        }
        l2_normalize(&mut v);
        Embedding::new(v)
    }
}

/// Builds the embedding table for every detection of a scene.
pub fn oracle_embeddings(scene: &Scene, dim: usize, sigma: f64, seed: u64) -> Result<EmbeddingTable> {
    let oracle = EmbeddingOracle::new(scene.gt.len(), dim, sigma, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut table = EmbeddingTable::new_normalized(dim);
    for (frame, dets) in &scene.dets_by_frame {
        for d in dets {
            let key = (*frame, d.det_index);
            let identity = scene.det_identity[&key];
            let e = match scene.occluded.get(&key) {
                Some(&occ) => oracle.observe_occluded(identity, occ, &mut rng),
                None => oracle.observe(identity, &mut rng),
            };
            table.insert(*frame, d.det_index, e)?;
        }
    }
    Ok(table)
}

/// A deliberately impure tracklet: two identities concatenated at a known
/// switch point, with matching oracle embeddings.
#[derive(Debug, Clone)]
pub struct SwitchTracklet {
    pub tracklet: Tracklet,
    pub embeddings: Vec<Embedding>,
    /// Nodes before this index belong to the first identity.
    pub switch_index: usize,
}

/// Samples `n` unreliable tracklets from a scene's ground truth. Each
/// concatenates a run of one identity with a run of another at a recorded
/// switch index; node ids keep the ground-truth identities.
pub fn make_unreliable_tracklets(
    scene: &Scene,
    oracle: &EmbeddingOracle,
    n: usize,
    length_range: (usize, usize),
    seed: u64,
) -> Result<Vec<SwitchTracklet>> {
    if scene.gt.len() < 2 {
        return Err(Error::InfeasibleScene("need at least two identities".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let horizon = scene.spec.n_frames as usize;
    for sample in 0..n {
        let len = rng.gen_range(length_range.0..=length_range.1.min(horizon));
        let switch = rng.gen_range(2..=len - 2);
        let ids = rand::seq::index::sample(&mut rng, scene.gt.len(), 2);
        let (ia, ib) = (ids.index(0), ids.index(1));
        let start = rng.gen_range(0..=horizon - len);

        let mut nodes = Vec::with_capacity(len);
        let mut embeddings = Vec::with_capacity(len);
        for k in 0..len {
            let src = if k < switch { &scene.gt[ia] } else { &scene.gt[ib] };
            let mut node = src.nodes[start + k].clone();
            // Own the detection slot `sample` on the node's frame.
            node.det_index = Some(sample as u32);
            embeddings.push(oracle.observe(node.id, &mut rng));
            nodes.push(node);
        }
        out.push(SwitchTracklet {
            tracklet: Tracklet::from_nodes(-1, nodes)?,
            embeddings,
            switch_index: switch,
        });
    }
    Ok(out)
}

/// Single-identity companions to `make_unreliable_tracklets`.
pub fn make_pure_tracklets(
    scene: &Scene,
    oracle: &EmbeddingOracle,
    n: usize,
    length_range: (usize, usize),
    seed: u64,
) -> Result<Vec<SwitchTracklet>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let horizon = scene.spec.n_frames as usize;
    for sample in 0..n {
        let len = rng.gen_range(length_range.0..=length_range.1.min(horizon));
        let id = rng.gen_range(0..scene.gt.len());
        let start = rng.gen_range(0..=horizon - len);
        let mut nodes = Vec::with_capacity(len);
        let mut embeddings = Vec::with_capacity(len);
        for k in 0..len {
            let mut node = scene.gt[id].nodes[start + k].clone();
            node.det_index = Some(sample as u32);
            embeddings.push(oracle.observe(node.id, &mut rng));
            nodes.push(node);
        }
        out.push(SwitchTracklet {
            tracklet: Tracklet::from_nodes(-1, nodes)?,
            embeddings,
            switch_index: 0,
        });
    }
    Ok(out)
}

/// Labelled embedding sequences for the toy trainer: `per_identity`
/// sequences per class, lengths drawn from `length_range`.
pub fn make_labeled_sequences(
    oracle: &EmbeddingOracle,
    per_identity: usize,
    length_range: (usize, usize),
    seed: u64,
) -> Vec<LabeledSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for label in 0..oracle.anchors.len() {
        for _ in 0..per_identity {
            let len = rng.gen_range(length_range.0..=length_range.1);
            let seq =
                (0..len).map(|_| oracle.observe(label as i64 + 1, &mut rng)).collect();
            out.push(LabeledSequence { seq, label });
        }
    }
    out
}

#[cfg(feature = "std")]
fn cos(x: f64) -> f64 {
    x.cos()
}
#[cfg(feature = "std")]
fn sin(x: f64) -> f64 {
    x.sin()
}
#[cfg(not(feature = "std"))]
fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[cfg(not(feature = "std"))]
fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cleave::{label_reliability, Reliability};
    use crate::math::sq_dist;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> SceneSpec {
        SceneSpec { n_identities: 4, n_frames: 80, seed: 7, ..SceneSpec::default() }
    }

    #[test]
    fn noiseless_detections_equal_ground_truth() {
        let scene = generate_scene(&spec()).unwrap();
        for (frame, dets) in &scene.dets_by_frame {
            assert_eq!(dets.len(), scene.gt.len());
            for d in dets {
                let id = scene.det_identity[&(*frame, d.det_index)];
                let gt_box = scene.gt[(id - 1) as usize].nodes[(*frame - 1) as usize].bbox;
                assert_eq!(d.bbox, gt_box);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let a = generate_scene(&spec()).unwrap();
        let b = generate_scene(&spec()).unwrap();
        assert_eq!(a.dets_by_frame, b.dets_by_frame);
        for (x, y) in a.gt.iter().zip(&b.gt) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn boxes_stay_inside_the_image() {
        let s = SceneSpec { n_frames: 300, turn_prob: 0.1, ..spec() };
        let scene = generate_scene(&s).unwrap();
        for t in &scene.gt {
            for n in &t.nodes {
                assert!(n.bbox.left() >= -1e-9 && n.bbox.right() <= s.image_width + 1e-9);
                assert!(n.bbox.top() >= -1e-9 && n.bbox.bottom() <= s.image_height + 1e-9);
            }
        }
    }

    #[test]
    fn crossing_events_actually_overlap() {
        let s = SceneSpec { n_frames: 120, ..spec() }
            .with_scheduled_crossings(2, 20);
        let scene = generate_scene(&s).unwrap();
        for ev in &s.crossings {
            let mut best = 0.0f64;
            for f in ev.start..=ev.end {
                let a = &scene.gt[ev.a].nodes[(f - 1) as usize].bbox;
                let b = &scene.gt[ev.b].nodes[(f - 1) as usize].bbox;
                best = best.max(iou(a, b));
            }
            assert!(best > 0.0, "event {ev:?} never overlapped");
        }
    }

    #[test]
    fn every_detection_maps_to_one_identity() {
        let s = SceneSpec { miss_rate: 0.1, jitter_sigma: 1.0, ..spec() };
        let scene = generate_scene(&s).unwrap();
        for (frame, dets) in &scene.dets_by_frame {
            for d in dets {
                assert!(scene.det_identity.contains_key(&(*frame, d.det_index)));
            }
        }
    }

    #[test]
    fn infeasible_scenes_are_rejected() {
        let s = SceneSpec {
            n_identities: 500,
            image_width: 100.0,
            image_height: 100.0,
            ..SceneSpec::default()
        };
        assert!(matches!(generate_scene(&s), Err(Error::InfeasibleScene(_))));
    }

    #[test]
    fn zero_noise_oracle_embeddings_are_the_anchors() {
        let oracle = EmbeddingOracle::new(3, 8, 0.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = oracle.observe(1, &mut rng);
        let b = oracle.observe(1, &mut rng);
        assert_eq!(a, b);
        let c = oracle.observe(2, &mut rng);
        let expect = sq_dist(&oracle.anchors[0], &oracle.anchors[1]);
        assert!((sq_dist(a.as_slice(), c.as_slice()) - expect).abs() < 1e-12);
    }

    #[test]
    fn noisy_within_identity_distance_matches_the_estimate() {
        // Monte-Carlo check of the expected within-identity squared
        // distance of re-normalized noisy anchors.
        let dim = 16;
        let sigma = 0.1f64;
        let oracle = EmbeddingOracle::new(1, dim, sigma, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 4000;
        let mut mean = 0.0;
        for _ in 0..n {
            let a = oracle.observe(1, &mut rng);
            let b = oracle.observe(1, &mut rng);
            mean += sq_dist(a.as_slice(), b.as_slice());
        }
        mean /= n as f64;
        let predicted = 2.0 * sigma * sigma * (dim as f64 - 1.0) / dim as f64;
        assert!(
            (mean - predicted).abs() < 0.2 * predicted,
            "measured {mean}, predicted {predicted}"
        );
    }

    #[test]
    fn orthogonal_anchors_sit_at_squared_distance_two() {
        let mut oracle = EmbeddingOracle::new(2, 4, 0.0, 0).unwrap();
        oracle.anchors[0] = alloc::vec![1.0, 0.0, 0.0, 0.0];
        oracle.anchors[1] = alloc::vec![0.0, 1.0, 0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = oracle.observe(1, &mut rng);
        let b = oracle.observe(2, &mut rng);
        assert!((sq_dist(a.as_slice(), b.as_slice()) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unreliable_tracklets_are_unreliable_by_construction() {
        let scene = generate_scene(&spec()).unwrap();
        let oracle = EmbeddingOracle::new(scene.gt.len(), 8, 0.05, 11).unwrap();
        let batch = make_unreliable_tracklets(&scene, &oracle, 20, (10, 40), 13).unwrap();
        assert_eq!(batch.len(), 20);
        for s in &batch {
            assert_eq!(label_reliability(&s.tracklet).unwrap(), Reliability::Unreliable);
            assert!(s.switch_index >= 2 && s.switch_index <= s.tracklet.len() - 2);
            assert_eq!(s.embeddings.len(), s.tracklet.len());
        }
    }

    #[test]
    fn pure_tracklets_are_reliable_by_construction() {
        let scene = generate_scene(&spec()).unwrap();
        let oracle = EmbeddingOracle::new(scene.gt.len(), 8, 0.05, 11).unwrap();
        let batch = make_pure_tracklets(&scene, &oracle, 10, (10, 40), 17).unwrap();
        for s in &batch {
            assert_eq!(label_reliability(&s.tracklet).unwrap(), Reliability::Reliable);
        }
    }

    #[test]
    fn empty_request_gives_empty_batch() {
        let scene = generate_scene(&spec()).unwrap();
        let oracle = EmbeddingOracle::new(scene.gt.len(), 8, 0.05, 11).unwrap();
        assert!(make_unreliable_tracklets(&scene, &oracle, 0, (10, 20), 1).unwrap().is_empty());
    }

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
}
