//! Stacked shared-weight bidirectional GRU encoder, feature head and
//! temporal pooling.
//!
//! Both directions run the same stacked cells over the sequence, the
//! backward one over the reversed order. `forward[i]` summarises the prefix
//! through element `i`; `backward[j]` summarises the suffix from element
//! `L-1-j` on (it is the backward pass's state after consuming `j+1`
//! elements from the end). The boundary pairing used by cleaving puts
//! `forward[b-1]` against `backward[L-b-1]`, prefix `[0..b)` versus suffix
//! `[b..L)`.

pub mod codec;
mod gru;
mod linalg;
mod lstm;

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embed::Embedding;
use crate::error::Error;
use crate::math::sqrt;
use crate::Result;

pub use gru::{gru_cell_step, GruGates, GruLayer, GruWeights};
pub use linalg::{add_assign, Mat};
pub use lstm::{lstm_cell_step, LstmLayer, LstmWeights};
pub(crate) use gru::gru_gates;
pub(crate) use lstm::{lstm_gates, lstm_step_backward, LstmGates, LstmLayerGrads};

/// Longest sequence the encoder consumes; older elements are dropped.
pub const MAX_SEQ_LEN: usize = 120;

/// Feature head: a fully-connected layer with ReLU producing the sequence
/// features, plus a linear classifier over identity classes used during
/// training.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub w_f: Mat,
    pub b_f: Vec<f64>,
    pub w_c: Mat,
    pub b_c: Vec<f64>,
}

impl HeadWeights {
    pub fn zeros(d_g: usize, d_f: usize, classes: usize) -> Self {
        HeadWeights {
            w_f: Mat::zeros(d_f, d_g),
            b_f: vec![0.0; d_f],
            w_c: Mat::zeros(classes, d_f),
            b_c: vec![0.0; classes],
        }
    }

    pub fn uniform<R: rand::Rng>(d_g: usize, d_f: usize, classes: usize, rng: &mut R) -> Self {
        let bound = sqrt(1.0 / d_g as f64);
        HeadWeights {
            w_f: Mat::uniform(d_f, d_g, bound, rng),
            b_f: vec![0.0; d_f],
            w_c: Mat::uniform(classes, d_f, sqrt(1.0 / d_f as f64), rng),
            b_c: vec![0.0; classes],
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.w_f.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_f.cols()
    }

    pub fn classes(&self) -> usize {
        self.w_c.rows()
    }

    /// ReLU(W_f g + b_f).
    pub fn features(&self, g: &[f64]) -> Vec<f64> {
        let mut a = self.w_f.matvec(g);
        add_assign(&mut a, &self.b_f);
        for v in a.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        a
    }

    /// Identity logits for a feature vector.
    pub fn logits(&self, f: &[f64]) -> Vec<f64> {
        let mut l = self.w_c.matvec(f);
        add_assign(&mut l, &self.b_c);
        l
    }
}

/// Per-position encoder outputs for one sequence, raw and after the head.
#[derive(Debug, Clone)]
pub struct SeqOutputs {
    /// Raw top-layer states after consuming elements `0..=i`.
    pub forward: Vec<Vec<f64>>,
    /// Raw top-layer states of the reversed pass; index `j` has consumed
    /// the last `j + 1` elements.
    pub backward: Vec<Vec<f64>>,
    pub headed_forward: Vec<Vec<f64>>,
    pub headed_backward: Vec<Vec<f64>>,
}

impl SeqOutputs {
    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Prefix/suffix summary pair at boundary `b` (first segment holds `b`
    /// elements, `1 <= b <= L-1`).
    pub fn boundary_pair(&self, b: usize) -> (&[f64], &[f64]) {
        let l = self.len();
        debug_assert!(b >= 1 && b < l);
        (&self.forward[b - 1], &self.backward[l - b - 1])
    }
}

/// Runs the stacked cells over `inputs` in the given order, returning the
/// top-layer state after each step.
fn run_stack(gru: &GruWeights, inputs: &[&[f64]]) -> Vec<Vec<f64>> {
    let d_h = gru.d_h();
    let mut hidden: Vec<Vec<f64>> = (0..gru.n_layers()).map(|_| vec![0.0; d_h]).collect();
    let mut outputs = Vec::with_capacity(inputs.len());
    for &x in inputs {
        let mut layer_input = x.to_vec();
        for (l, layer) in gru.layers.iter().enumerate() {
            layer_input = gru_gates(layer, &hidden[l], &layer_input).h_new;
            hidden[l] = layer_input.clone();
        }
        outputs.push(layer_input);
    }
    outputs
}

/// Encodes a sequence with the shared-weight bidirectional stack and the
/// feature head. Sequences longer than [`MAX_SEQ_LEN`] keep their most
/// recent elements.
pub fn bigru_encode(seq: &[Embedding], gru: &GruWeights, head: &HeadWeights) -> Result<SeqOutputs> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let window = if seq.len() > MAX_SEQ_LEN { &seq[seq.len() - MAX_SEQ_LEN..] } else { seq };
    for e in window {
        if e.dim() != gru.d_in() {
            return Err(Error::DimensionMismatch { expected: gru.d_in(), got: e.dim() });
        }
    }
    if head.input_dim() != gru.d_h() {
        return Err(Error::DimensionMismatch { expected: gru.d_h(), got: head.input_dim() });
    }

    let fwd_in: Vec<&[f64]> = window.iter().map(|e| e.as_slice()).collect();
    let bwd_in: Vec<&[f64]> = window.iter().rev().map(|e| e.as_slice()).collect();
    let forward = run_stack(gru, &fwd_in);
    let backward = run_stack(gru, &bwd_in);

    let headed_forward = forward.iter().map(|g| head.features(g)).collect();
    let headed_backward = backward.iter().map(|g| head.features(g)).collect();
    Ok(SeqOutputs { forward, backward, headed_forward, headed_backward })
}

/// Mean of all `2L` headed outputs, the tracklet-level sequence feature.
pub fn temporal_pool(o: &SeqOutputs) -> Vec<f64> {
    let l = o.len();
    assert!(l > 0, "cannot pool empty outputs");
    let d = o.headed_forward[0].len();
    let mut acc = vec![0.0; d];
    for v in o.headed_forward.iter().chain(&o.headed_backward) {
        add_assign(&mut acc, v);
    }
    let scale = 1.0 / (2 * l) as f64;
    for v in acc.iter_mut() {
        *v *= scale;
    }
    acc
}

/// The trainable cleave/re-connection model: shared bi-GRU plus head.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqModel {
    pub gru: GruWeights,
    pub head: HeadWeights,
}

impl SeqModel {
    pub fn zeros(n_layers: usize, d_in: usize, d_h: usize, d_f: usize, classes: usize) -> Self {
        SeqModel {
            gru: GruWeights::zeros(n_layers, d_in, d_h),
            head: HeadWeights::zeros(d_h, d_f, classes),
        }
    }

    /// Seeded uniform init in `+-sqrt(1/d_h)`.
    pub fn init(
        n_layers: usize,
        d_in: usize,
        d_h: usize,
        d_f: usize,
        classes: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SeqModel {
            gru: GruWeights::uniform(n_layers, d_in, d_h, &mut rng),
            head: HeadWeights::uniform(d_h, d_f, classes, &mut rng),
        }
    }

    pub fn encode(&self, seq: &[Embedding]) -> Result<SeqOutputs> {
        bigru_encode(seq, &self.gru, &self.head)
    }
}
