//! Hand-derived backpropagation of the full objective through the head,
//! the temporal pooling and the stacked shared-weight bidirectional GRU.

use alloc::vec;
use alloc::vec::Vec;

use crate::embed::Embedding;
use crate::error::Error;
use crate::learn::losses::{softmax, total_loss_from_outputs, LossWeights, TrainPair};
use crate::math::sq_dist;
use crate::seqnet::{
    add_assign, gru_gates, temporal_pool, GruGates, GruLayer, GruWeights, HeadWeights, Mat,
    SeqModel, SeqOutputs, MAX_SEQ_LEN,
};
use crate::Result;

/// Gradient buffers mirroring one GRU layer.
#[derive(Debug, Clone)]
pub struct GruLayerGrads {
    pub w_z: Mat,
    pub u_z: Mat,
    pub b_z: Vec<f64>,
    pub w_r: Mat,
    pub u_r: Mat,
    pub b_r: Vec<f64>,
    pub w_h: Mat,
    pub u_h: Mat,
    pub b_h: Vec<f64>,
}

impl GruLayerGrads {
    fn zeros_like(layer: &GruLayer) -> Self {
        let (d_in, d_h) = (layer.d_in(), layer.d_h());
        GruLayerGrads {
            w_z: Mat::zeros(d_h, d_in),
            u_z: Mat::zeros(d_h, d_h),
            b_z: vec![0.0; d_h],
            w_r: Mat::zeros(d_h, d_in),
            u_r: Mat::zeros(d_h, d_h),
            b_r: vec![0.0; d_h],
            w_h: Mat::zeros(d_h, d_in),
            u_h: Mat::zeros(d_h, d_h),
            b_h: vec![0.0; d_h],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub gru: Vec<GruLayerGrads>,
    pub w_f: Mat,
    pub b_f: Vec<f64>,
    pub w_c: Mat,
    pub b_c: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros_like(model: &SeqModel) -> Self {
        ModelGrads {
            gru: model.gru.layers.iter().map(GruLayerGrads::zeros_like).collect(),
            w_f: Mat::zeros(model.head.feature_dim(), model.head.input_dim()),
            b_f: vec![0.0; model.head.feature_dim()],
            w_c: Mat::zeros(model.head.classes(), model.head.feature_dim()),
            b_c: vec![0.0; model.head.classes()],
        }
    }
}

struct StepTrace {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    gates: GruGates,
}

/// Per-direction trace: `layers[l][t]` is the step trace of layer `l` at
/// position `t` in consumption order.
struct DirTrace {
    layers: Vec<Vec<StepTrace>>,
}

impl DirTrace {
    fn top_outputs(&self) -> Vec<Vec<f64>> {
        self.layers.last().expect("layers").iter().map(|s| s.gates.h_new.clone()).collect()
    }
}

fn run_stack_traced(gru: &GruWeights, inputs: &[&[f64]]) -> DirTrace {
    let d_h = gru.d_h();
    let n_layers = gru.n_layers();
    let mut hidden: Vec<Vec<f64>> = (0..n_layers).map(|_| vec![0.0; d_h]).collect();
    let mut layers: Vec<Vec<StepTrace>> = (0..n_layers).map(|_| Vec::new()).collect();
    for &x in inputs {
        let mut layer_input = x.to_vec();
        for l in 0..n_layers {
            let gates = gru_gates(&gru.layers[l], &hidden[l], &layer_input);
            let h_new = gates.h_new.clone();
            layers[l].push(StepTrace {
                x: core::mem::replace(&mut layer_input, h_new.clone()),
                h_prev: core::mem::replace(&mut hidden[l], h_new),
                gates,
            });
        }
    }
    DirTrace { layers }
}

struct HeadTrace {
    /// Pre-ReLU activations per position.
    pre: Vec<Vec<f64>>,
}

struct EncTrace {
    fwd: DirTrace,
    bwd: DirTrace,
    outputs: SeqOutputs,
    head_fwd: HeadTrace,
    head_bwd: HeadTrace,
}

fn encode_traced(model: &SeqModel, seq: &[Embedding]) -> Result<EncTrace> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let window = if seq.len() > MAX_SEQ_LEN { &seq[seq.len() - MAX_SEQ_LEN..] } else { seq };
    for e in window {
        if e.dim() != model.gru.d_in() {
            return Err(Error::DimensionMismatch { expected: model.gru.d_in(), got: e.dim() });
        }
    }
    let fwd_in: Vec<&[f64]> = window.iter().map(|e| e.as_slice()).collect();
    let bwd_in: Vec<&[f64]> = window.iter().rev().map(|e| e.as_slice()).collect();
    let fwd = run_stack_traced(&model.gru, &fwd_in);
    let bwd = run_stack_traced(&model.gru, &bwd_in);

    let head = &model.head;
    let pre_of = |g: &[f64]| {
        let mut a = head.w_f.matvec(g);
        add_assign(&mut a, &head.b_f);
        a
    };
    let relu = |a: &[f64]| a.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect::<Vec<_>>();

    let forward = fwd.top_outputs();
    let backward = bwd.top_outputs();
    let pre_fwd: Vec<Vec<f64>> = forward.iter().map(|g| pre_of(g)).collect();
    let pre_bwd: Vec<Vec<f64>> = backward.iter().map(|g| pre_of(g)).collect();
    let outputs = SeqOutputs {
        headed_forward: pre_fwd.iter().map(|a| relu(a)).collect(),
        headed_backward: pre_bwd.iter().map(|a| relu(a)).collect(),
        forward,
        backward,
    };
    Ok(EncTrace {
        fwd,
        bwd,
        outputs,
        head_fwd: HeadTrace { pre: pre_fwd },
        head_bwd: HeadTrace { pre: pre_bwd },
    })
}

/// Backward through one cell step; accumulates parameter gradients and
/// returns `(dh_prev, dx)`.
fn gru_step_backward(
    layer: &GruLayer,
    grads: &mut GruLayerGrads,
    tr: &StepTrace,
    dh_new: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let d_h = layer.d_h();
    let (z, r, cand) = (&tr.gates.z, &tr.gates.r, &tr.gates.candidate);
    let (h_prev, x) = (&tr.h_prev, &tr.x);

    let mut dh_prev = vec![0.0; d_h];
    let mut da_c = vec![0.0; d_h];
    let mut dz = vec![0.0; d_h];
    for k in 0..d_h {
        dz[k] = dh_new[k] * (cand[k] - h_prev[k]);
        let dcand = dh_new[k] * z[k];
        da_c[k] = dcand * (1.0 - cand[k] * cand[k]);
        dh_prev[k] = dh_new[k] * (1.0 - z[k]);
    }

    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(rv, hv)| rv * hv).collect();
    grads.w_h.add_outer(&da_c, x);
    grads.u_h.add_outer(&da_c, &rh);
    add_assign(&mut grads.b_h, &da_c);

    let mut drh = vec![0.0; d_h];
    layer.u_h.matvec_t_acc(&da_c, &mut drh);
    let mut da_r = vec![0.0; d_h];
    for k in 0..d_h {
        let dr = drh[k] * h_prev[k];
        dh_prev[k] += drh[k] * r[k];
        da_r[k] = dr * r[k] * (1.0 - r[k]);
    }
    grads.w_r.add_outer(&da_r, x);
    grads.u_r.add_outer(&da_r, h_prev);
    add_assign(&mut grads.b_r, &da_r);
    layer.u_r.matvec_t_acc(&da_r, &mut dh_prev);

    let mut da_z = vec![0.0; d_h];
    for k in 0..d_h {
        da_z[k] = dz[k] * z[k] * (1.0 - z[k]);
    }
    grads.w_z.add_outer(&da_z, x);
    grads.u_z.add_outer(&da_z, h_prev);
    add_assign(&mut grads.b_z, &da_z);
    layer.u_z.matvec_t_acc(&da_z, &mut dh_prev);

    let mut dx = vec![0.0; layer.d_in()];
    layer.w_z.matvec_t_acc(&da_z, &mut dx);
    layer.w_r.matvec_t_acc(&da_r, &mut dx);
    layer.w_h.matvec_t_acc(&da_c, &mut dx);

    (dh_prev, dx)
}

/// Backward through one direction of the stack. `d_top[t]` is the gradient
/// on the top layer's output at position `t`; gradients on the raw inputs
/// are discarded (the embeddings are data, not parameters).
fn backprop_direction(
    gru: &GruWeights,
    trace: &DirTrace,
    d_top: Vec<Vec<f64>>,
    grads: &mut [GruLayerGrads],
) {
    let n_layers = gru.n_layers();
    let steps = d_top.len();
    let d_h = gru.d_h();
    // d_out[t] holds the gradient on the current layer's output at t; it
    // starts at the top layer and is rebuilt from dx as we descend.
    let mut d_out = d_top;
    for l in (0..n_layers).rev() {
        let mut d_below = if l > 0 { vec![vec![0.0; d_h]; steps] } else { Vec::new() };
        let mut dh_carry = vec![0.0; d_h];
        for t in (0..steps).rev() {
            let mut dh = core::mem::take(&mut d_out[t]);
            add_assign(&mut dh, &dh_carry);
            let (dh_prev, dx) = gru_step_backward(&gru.layers[l], &mut grads[l], &trace.layers[l][t], &dh);
            dh_carry = dh_prev;
            if l > 0 {
                d_below[t] = dx;
            }
        }
        d_out = d_below;
    }
}

/// Evaluates the objective and its gradient with respect to every model
/// parameter, cell weights shared across directions and across the pair.
pub fn grad_total_loss(
    pair: &TrainPair,
    model: &SeqModel,
    w: &LossWeights,
) -> Result<(f64, ModelGrads)> {
    w.validate()?;
    let enc1 = encode_traced(model, &pair.seq1)?;
    let enc2 = encode_traced(model, &pair.seq2)?;
    let loss = total_loss_from_outputs(&enc1.outputs, &enc2.outputs, pair, model, w)?;

    let mut grads = ModelGrads::zeros_like(model);
    let head = &model.head;
    let d_f = head.feature_dim();

    let p1 = temporal_pool(&enc1.outputs);
    let p2 = temporal_pool(&enc2.outputs);
    let mut dp1 = vec![0.0; d_f];
    let mut dp2 = vec![0.0; d_f];

    // Contrastive on the pooled pair.
    if w.lambda_v != 0.0 {
        let d = sq_dist(&p1, &p2);
        let factor = if pair.same_identity() {
            2.0 * w.lambda_v
        } else if d < w.eta {
            -2.0 * w.lambda_v
        } else {
            0.0
        };
        if factor != 0.0 {
            for k in 0..d_f {
                let diff = p1[k] - p2[k];
                dp1[k] += factor * diff;
                dp2[k] -= factor * diff;
            }
        }
    }

    // Identity terms on the pooled features.
    if w.lambda_id != 0.0 {
        classifier_backward(head, &p1, pair.label1, w.lambda_id, &mut grads, &mut dp1)?;
        classifier_backward(head, &p2, pair.label2, w.lambda_id, &mut grads, &mut dp2)?;
    }

    // Per-position feature gradients, one slot per direction and position.
    let (l1, l2) = (enc1.outputs.len(), enc2.outputs.len());
    let mut d_feat1 = PerPosition::zeros(l1, d_f);
    let mut d_feat2 = PerPosition::zeros(l2, d_f);

    // Pooling spreads the pooled gradient uniformly.
    d_feat1.add_everywhere(&dp1, 1.0 / (2 * l1) as f64);
    d_feat2.add_everywhere(&dp2, 1.0 / (2 * l2) as f64);

    // Local triplet-style term on forward head and tail features.
    if w.lambda_loc_v != 0.0 {
        let h1 = &enc1.outputs.headed_forward[0];
        let t1 = &enc1.outputs.headed_forward[l1 - 1];
        let h2 = &enc2.outputs.headed_forward[0];
        let t2 = &enc2.outputs.headed_forward[l2 - 1];
        let raw = sq_dist(h1, t1) + sq_dist(h2, t2) - sq_dist(h1, h2) - sq_dist(t1, t2)
            + w.delta;
        if raw > 0.0 {
            let s = 2.0 * w.lambda_loc_v;
            for k in 0..d_f {
                let within1 = h1[k] - t1[k];
                let within2 = h2[k] - t2[k];
                let heads = h1[k] - h2[k];
                let tails = t1[k] - t2[k];
                d_feat1.fwd[0][k] += s * (within1 - heads);
                d_feat1.fwd[l1 - 1][k] += s * (-within1 - tails);
                d_feat2.fwd[0][k] += s * (within2 + heads);
                d_feat2.fwd[l2 - 1][k] += s * (-within2 + tails);
            }
        }
    }

    // Per-position identity terms.
    if w.lambda_loc_id != 0.0 {
        for (enc, d_feat, label) in [
            (&enc1, &mut d_feat1, pair.label1),
            (&enc2, &mut d_feat2, pair.label2),
        ] {
            for (t, f) in enc.outputs.headed_forward.iter().enumerate() {
                classifier_backward(head, f, label, w.lambda_loc_id, &mut grads, &mut d_feat.fwd[t])?;
            }
            for (t, f) in enc.outputs.headed_backward.iter().enumerate() {
                classifier_backward(head, f, label, w.lambda_loc_id, &mut grads, &mut d_feat.bwd[t])?;
            }
        }
    }

    // Head backward per position, then BPTT per direction.
    for (enc, d_feat) in [(&enc1, d_feat1), (&enc2, d_feat2)] {
        let steps = enc.outputs.len();
        let mut d_top_fwd = vec![vec![0.0; model.gru.d_h()]; steps];
        let mut d_top_bwd = vec![vec![0.0; model.gru.d_h()]; steps];
        for t in 0..steps {
            head_backward(
                head,
                &enc.head_fwd.pre[t],
                &enc.outputs.forward[t],
                &d_feat.fwd[t],
                &mut grads,
                &mut d_top_fwd[t],
            );
            head_backward(
                head,
                &enc.head_bwd.pre[t],
                &enc.outputs.backward[t],
                &d_feat.bwd[t],
                &mut grads,
                &mut d_top_bwd[t],
            );
        }
        backprop_direction(&model.gru, &enc.fwd, d_top_fwd, &mut grads.gru);
        backprop_direction(&model.gru, &enc.bwd, d_top_bwd, &mut grads.gru);
    }

    Ok((loss, grads))
}

struct PerPosition {
    fwd: Vec<Vec<f64>>,
    bwd: Vec<Vec<f64>>,
}

impl PerPosition {
    fn zeros(len: usize, dim: usize) -> Self {
        PerPosition { fwd: vec![vec![0.0; dim]; len], bwd: vec![vec![0.0; dim]; len] }
    }

    fn add_everywhere(&mut self, v: &[f64], scale: f64) {
        for slot in self.fwd.iter_mut().chain(self.bwd.iter_mut()) {
            for (o, x) in slot.iter_mut().zip(v) {
                *o += scale * x;
            }
        }
    }
}

/// Cross-entropy backward through the classifier: accumulates classifier
/// gradients and adds the feature gradient into `d_feat`.
fn classifier_backward(
    head: &HeadWeights,
    feat: &[f64],
    label: usize,
    scale: f64,
    grads: &mut ModelGrads,
    d_feat: &mut [f64],
) -> Result<()> {
    let logits = head.logits(feat);
    if label >= logits.len() {
        return Err(Error::ClassOutOfRange { class: label, classes: logits.len() });
    }
    let mut d_logits = softmax(&logits);
    d_logits[label] -= 1.0;
    for v in d_logits.iter_mut() {
        *v *= scale;
    }
    grads.w_c.add_outer(&d_logits, feat);
    add_assign(&mut grads.b_c, &d_logits);
    head.w_c.matvec_t_acc(&d_logits, d_feat);
    Ok(())
}

/// ReLU and FC backward for one position: accumulates head gradients and
/// adds the gradient on the raw encoder output into `d_g`.
fn head_backward(
    head: &HeadWeights,
    pre: &[f64],
    g: &[f64],
    d_feat: &[f64],
    grads: &mut ModelGrads,
    d_g: &mut [f64],
) {
    let da: Vec<f64> = d_feat
        .iter()
        .zip(pre)
        .map(|(&d, &a)| if a > 0.0 { d } else { 0.0 })
        .collect();
    grads.w_f.add_outer(&da, g);
    add_assign(&mut grads.b_f, &da);
    head.w_f.matvec_t_acc(&da, d_g);
}

/// Fixed parameter order shared by flattening, gradients and Adam state.
pub fn param_count(model: &SeqModel) -> usize {
    flatten_model(model).len()
}

pub fn flatten_model(model: &SeqModel) -> Vec<f64> {
    let mut flat = Vec::new();
    for layer in &model.gru.layers {
        flat.extend_from_slice(layer.w_z.as_slice());
        flat.extend_from_slice(layer.u_z.as_slice());
        flat.extend_from_slice(&layer.b_z);
        flat.extend_from_slice(layer.w_r.as_slice());
        flat.extend_from_slice(layer.u_r.as_slice());
        flat.extend_from_slice(&layer.b_r);
        flat.extend_from_slice(layer.w_h.as_slice());
        flat.extend_from_slice(layer.u_h.as_slice());
        flat.extend_from_slice(&layer.b_h);
    }
    flat.extend_from_slice(model.head.w_f.as_slice());
    flat.extend_from_slice(&model.head.b_f);
    flat.extend_from_slice(model.head.w_c.as_slice());
    flat.extend_from_slice(&model.head.b_c);
    flat
}

pub fn load_model(model: &mut SeqModel, flat: &[f64]) {
    let mut pos = 0;
    let mut take = |dst: &mut [f64]| {
        dst.copy_from_slice(&flat[pos..pos + dst.len()]);
        pos += dst.len();
    };
    for layer in &mut model.gru.layers {
        take(layer.w_z.as_mut_slice());
        take(layer.u_z.as_mut_slice());
        take(&mut layer.b_z);
        take(layer.w_r.as_mut_slice());
        take(layer.u_r.as_mut_slice());
        take(&mut layer.b_r);
        take(layer.w_h.as_mut_slice());
        take(layer.u_h.as_mut_slice());
        take(&mut layer.b_h);
    }
    take(model.head.w_f.as_mut_slice());
    take(&mut model.head.b_f);
    take(model.head.w_c.as_mut_slice());
    take(&mut model.head.b_c);
    debug_assert_eq!(pos, flat.len());
}

pub fn flatten_grads(grads: &ModelGrads) -> Vec<f64> {
    let mut flat = Vec::new();
    for layer in &grads.gru {
        flat.extend_from_slice(layer.w_z.as_slice());
        flat.extend_from_slice(layer.u_z.as_slice());
        flat.extend_from_slice(&layer.b_z);
        flat.extend_from_slice(layer.w_r.as_slice());
        flat.extend_from_slice(layer.u_r.as_slice());
        flat.extend_from_slice(&layer.b_r);
        flat.extend_from_slice(layer.w_h.as_slice());
        flat.extend_from_slice(layer.u_h.as_slice());
        flat.extend_from_slice(&layer.b_h);
    }
    flat.extend_from_slice(grads.w_f.as_slice());
    flat.extend_from_slice(&grads.b_f);
    flat.extend_from_slice(grads.w_c.as_slice());
    flat.extend_from_slice(&grads.b_c);
    flat
}
