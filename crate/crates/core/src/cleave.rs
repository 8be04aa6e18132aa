//! Purity estimation and splitting of identity-impure tracklets at the
//! forward/backward feature-distance peak.

use alloc::vec::Vec;

use crate::embed::{Embedding, EmbeddingProvider};
use crate::error::Error;
use crate::math::{l2_normalize, sq_dist};
use crate::seqnet::{SeqModel, SeqOutputs};
use crate::track::{IdGen, NodeState, Tracklet};
use crate::Result;

/// Squared distances between prefix and suffix summaries at each interior
/// boundary; `values[i]` belongs to the boundary after element `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceVector {
    pub values: Vec<f64>,
}

impl DistanceVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleaveConfig {
    /// A split needs a peak above this; calibrated for unit-normalized
    /// summaries, where squared distances live in `[0, 4]`.
    pub split_thresh: f64,
    /// Shortest segment either side of a split may have.
    pub min_segment: usize,
    /// Re-apply to both halves after a split.
    pub recursive: bool,
}

impl Default for CleaveConfig {
    fn default() -> Self {
        CleaveConfig { split_thresh: 0.5, min_segment: 2, recursive: true }
    }
}

/// Adjacent prefix/suffix squared distances over the encoder outputs.
pub fn distance_vector(o: &SeqOutputs) -> DistanceVector {
    let l = o.len();
    if l < 2 {
        return DistanceVector { values: Vec::new() };
    }
    let values = (1..l)
        .map(|b| {
            let (prefix, suffix) = o.boundary_pair(b);
            sq_dist(prefix, suffix)
        })
        .collect();
    DistanceVector { values }
}

/// Boundary of the peak distance, if it clears the threshold and leaves
/// both segments at least `min_segment` long. Returns the length of the
/// first segment; ties break toward the lower index.
pub fn find_split(dv: &DistanceVector, cfg: &CleaveConfig) -> Option<usize> {
    let l = dv.len() + 1; // element count
    if l < 2 * cfg.min_segment {
        return None;
    }
    let lo = cfg.min_segment; // first feasible boundary
    let hi = l - cfg.min_segment; // last feasible boundary
    let mut best: Option<(usize, f64)> = None;
    for b in lo..=hi {
        let v = dv.values[b - 1];
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((b, v)),
        }
    }
    match best {
        Some((b, v)) if v > cfg.split_thresh => Some(b),
        _ => None,
    }
}

/// Whether every node of a ground-truth-labelled tracklet carries the same
/// identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reliability {
    Reliable,
    Unreliable,
}

/// Labels a tracklet by node-identity agreement. Nodes must carry
/// ground-truth identities (nonnegative ids).
pub fn label_reliability(tau: &Tracklet) -> Result<Reliability> {
    for n in &tau.nodes {
        if n.id < 0 {
            return Err(Error::MissingIdentity { frame: n.frame });
        }
    }
    let first = tau.first().id;
    if tau.nodes.iter().all(|n| n.id == first) {
        Ok(Reliability::Reliable)
    } else {
        Ok(Reliability::Unreliable)
    }
}

fn gather_embeddings(tau: &Tracklet, provider: &dyn EmbeddingProvider) -> Result<Vec<Embedding>> {
    tau.nodes
        .iter()
        .map(|n| {
            let det_index = n.det_index.ok_or(Error::MissingEmbedding {
                frame: n.frame,
                det_index: u32::MAX,
            })?;
            provider
                .embedding(n.frame, det_index)
                .cloned()
                .ok_or(Error::MissingEmbedding { frame: n.frame, det_index })
        })
        .collect()
}

/// Encoder outputs with every summary scaled to unit norm, so distances
/// compare across models and sequence lengths.
fn encode_normalized(model: &SeqModel, seq: &[Embedding]) -> Result<SeqOutputs> {
    let mut o = model.encode(seq)?;
    for v in o.forward.iter_mut().chain(o.backward.iter_mut()) {
        l2_normalize(v);
    }
    Ok(o)
}

/// Splits a tracklet wherever the forward/backward summaries disagree the
/// most, recursively when configured. Sub-tracklets receive fresh ids and
/// cover the original nodes exactly; an unsplit tracklet is returned
/// unchanged.
pub fn cleave_tracklet(
    tau: &Tracklet,
    provider: &dyn EmbeddingProvider,
    model: &SeqModel,
    cfg: &CleaveConfig,
    ids: &mut IdGen,
) -> Result<Vec<Tracklet>> {
    let embeddings = gather_embeddings(tau, provider)?;
    let mut segments: Vec<(usize, usize)> = Vec::new();
    split_range(tau, &embeddings, model, cfg, 0, tau.len(), &mut segments)?;

    if segments.len() == 1 {
        return Ok(alloc::vec![tau.clone()]);
    }
    let mut out = Vec::with_capacity(segments.len());
    let last_index = segments.len() - 1;
    for (k, &(start, end)) in segments.iter().enumerate() {
        let mut sub = Tracklet::from_nodes(0, tau.nodes[start..end].to_vec())?;
        // Interior cut points were mid-track, hence tracked; the final
        // segment keeps the original fate.
        if k == last_index {
            sub = sub.with_quit_reason(tau.quit_reason());
        } else if let Some(last) = sub.nodes.last_mut() {
            last.state = NodeState::Tracked;
        }
        sub.restamp(ids.next_id());
        out.push(sub);
    }
    Ok(out)
}

fn split_range(
    tau: &Tracklet,
    embeddings: &[Embedding],
    model: &SeqModel,
    cfg: &CleaveConfig,
    start: usize,
    end: usize,
    out: &mut Vec<(usize, usize)>,
) -> Result<()> {
    let len = end - start;
    if len < 2 * cfg.min_segment {
        out.push((start, end));
        return Ok(());
    }
    let o = encode_normalized(model, &embeddings[start..end])?;
    // Long inputs are encoded over their most recent window; boundaries
    // found there are offset back into the full range.
    let offset = len - o.len();
    let dv = distance_vector(&o);
    let found = find_split(&dv, cfg).map(|b| start + offset + b);

    match found {
        Some(cut) if cut - start >= cfg.min_segment && end - cut >= cfg.min_segment => {
            if cfg.recursive {
                split_range(tau, embeddings, model, cfg, start, cut, out)?;
                split_range(tau, embeddings, model, cfg, cut, end, out)?;
            } else {
                out.push((start, cut));
                out.push((cut, end));
            }
        }
        _ => out.push((start, end)),
    }
    Ok(())
}
