//! Position prediction for the motion cue and tracklet mean velocity.

use alloc::vec;
use alloc::vec::Vec;

use crate::bbox::BBox;
use crate::error::Error;
use crate::learn::{AdamConfig, AdamState};
use crate::seqnet::{lstm_gates, lstm_step_backward, LstmLayerGrads, LstmWeights};
use crate::track::Tracklet;
use crate::Result;

/// Longest history window fed to either predictor.
pub const MAX_HISTORY: usize = 10;
/// Shortest history the recurrent predictor accepts.
pub const MIN_RECURRENT_HISTORY: usize = 3;

/// Recent `(frame, box)` observations with strictly increasing frames.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionHistory {
    entries: Vec<(u32, BBox)>,
}

impl MotionHistory {
    pub fn new(entries: Vec<(u32, BBox)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyHistory);
        }
        if entries.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::NonMonotonicFrames);
        }
        Ok(MotionHistory { entries })
    }

    /// Takes the most recent `max_len` nodes of a tracklet.
    pub fn from_tracklet(tau: &Tracklet, max_len: usize) -> Self {
        let max_len = max_len.clamp(1, MAX_HISTORY);
        let skip = tau.len().saturating_sub(max_len);
        let entries = tau.nodes[skip..].iter().map(|n| (n.frame, n.bbox)).collect();
        MotionHistory { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> (u32, BBox) {
        *self.entries.last().expect("history is never empty")
    }

    pub fn entries(&self) -> &[(u32, BBox)] {
        &self.entries
    }
}

/// Extrapolates the center with the least-squares velocity over the
/// history and holds the last size. A single observation predicts itself.
pub fn predict_const_velocity(h: &MotionHistory, target_frame: u32) -> BBox {
    let (last_frame, last_box) = h.last();
    debug_assert!(target_frame > last_frame);
    if h.len() == 1 {
        return last_box;
    }

    let n = h.len() as f64;
    let t_mean = h.entries.iter().map(|(t, _)| *t as f64).sum::<f64>() / n;
    let cx_mean = h.entries.iter().map(|(_, b)| b.cx).sum::<f64>() / n;
    let cy_mean = h.entries.iter().map(|(_, b)| b.cy).sum::<f64>() / n;

    let mut stt = 0.0;
    let mut stx = 0.0;
    let mut sty = 0.0;
    for (t, b) in &h.entries {
        let dt = *t as f64 - t_mean;
        stt += dt * dt;
        stx += dt * (b.cx - cx_mean);
        sty += dt * (b.cy - cy_mean);
    }
    let (vx, vy) = if stt > 0.0 { (stx / stt, sty / stt) } else { (0.0, 0.0) };

    let dt = target_frame as f64 - t_mean;
    BBox::new(cx_mean + vx * dt, cy_mean + vy * dt, last_box.w, last_box.h)
}

/// Normalises a history against its own per-coordinate mean, scaled by the
/// image size, giving the recurrent predictor a translation-free input.
fn history_mean(h: &MotionHistory) -> [f64; 4] {
    let n = h.len() as f64;
    let mut m = [0.0; 4];
    for (_, b) in &h.entries {
        let v = b.as_vec4();
        for k in 0..4 {
            m[k] += v[k];
        }
    }
    for v in m.iter_mut() {
        *v /= n;
    }
    m
}

fn normalize_history(h: &MotionHistory, image_w: f64, image_h: f64) -> Vec<Vec<f64>> {
    let m = history_mean(h);
    let scale = [image_w, image_h, image_w, image_h];
    h.entries
        .iter()
        .map(|(_, b)| {
            let v = b.as_vec4();
            (0..4).map(|k| (v[k] - m[k]) / scale[k]).collect()
        })
        .collect()
}

fn lstm_final_hidden(w: &LstmWeights, inputs: &[Vec<f64>]) -> Vec<f64> {
    let d_h = w.d_h();
    let mut h: Vec<Vec<f64>> = (0..w.n_layers()).map(|_| vec![0.0; d_h]).collect();
    let mut c: Vec<Vec<f64>> = (0..w.n_layers()).map(|_| vec![0.0; d_h]).collect();
    for x in inputs {
        let mut layer_input = x.clone();
        for (l, layer) in w.layers.iter().enumerate() {
            let gates = lstm_gates(layer, &h[l], &c[l], &layer_input);
            layer_input = gates.h_new.clone();
            h[l] = gates.h_new;
            c[l] = gates.c_new;
        }
    }
    h.pop().expect("at least one layer")
}

/// One-frame-ahead prediction from the recurrent motion model. The head
/// output is a normalized offset from the history mean; predicted sizes
/// are clamped to stay positive. Histories shorter than
/// [`MIN_RECURRENT_HISTORY`] are refused so callers can fall back to the
/// constant-velocity predictor.
pub fn predict_recurrent(
    h: &MotionHistory,
    w: &LstmWeights,
    image_w: f64,
    image_h: f64,
) -> Result<BBox> {
    if h.len() < MIN_RECURRENT_HISTORY {
        return Err(Error::Invalid(alloc::format!(
            "recurrent predictor needs at least {MIN_RECURRENT_HISTORY} observations, got {}",
            h.len()
        )));
    }
    let inputs = normalize_history(h, image_w, image_h);
    let hidden = lstm_final_hidden(w, &inputs);
    let mut out = w.w_out.matvec(&hidden);
    crate::seqnet::add_assign(&mut out, &w.b_out);

    let m = history_mean(h);
    let scale = [image_w, image_h, image_w, image_h];
    let cx = m[0] + out[0] * scale[0];
    let cy = m[1] + out[1] * scale[1];
    let bw = (m[2] + out[2] * scale[2]).max(1e-3);
    let bh = (m[3] + out[3] * scale[3]).max(1e-3);
    Ok(BBox::new(cx, cy, bw, bh))
}

/// Average velocity of a tracklet, endpoint displacement over elapsed
/// frames. Length-one tracklets report zero velocity flagged degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocity {
    pub vx: f64,
    pub vy: f64,
    pub degenerate: bool,
}

pub fn mean_velocity(tau: &Tracklet) -> Velocity {
    if tau.len() < 2 {
        return Velocity { vx: 0.0, vy: 0.0, degenerate: true };
    }
    let first = tau.first();
    let last = tau.last();
    let dt = (last.frame - first.frame) as f64;
    Velocity {
        vx: (last.bbox.cx - first.bbox.cx) / dt,
        vy: (last.bbox.cy - first.bbox.cy) / dt,
        degenerate: false,
    }
}

/// A supervised example for the motion model: a history window and the
/// observed box one frame later.
pub type MotionExample = (MotionHistory, BBox);

/// Desk-scale trainer for the recurrent motion model: squared error on the
/// normalized head output, Adam updates, one example per step.
pub fn train_motion_lstm(
    dataset: &[MotionExample],
    w: &mut LstmWeights,
    image_w: f64,
    image_h: f64,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n_params = lstm_param_count(w);
    let mut adam = AdamState::new(n_params, AdamConfig { lr, ..AdamConfig::default() });
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut curve = Vec::with_capacity(epochs);

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let (hist, target) = &dataset[idx];
            if hist.len() < MIN_RECURRENT_HISTORY {
                continue;
            }
            let (loss, grads) = motion_loss_and_grads(w, hist, target, image_w, image_h);
            epoch_loss += loss;
            let mut params = lstm_flat_params(w);
            adam.step(&mut params, &grads)?;
            lstm_load_flat(w, &params);
        }
        curve.push(epoch_loss / dataset.len() as f64);
    }
    Ok(curve)
}

fn motion_loss_and_grads(
    w: &LstmWeights,
    hist: &MotionHistory,
    target: &BBox,
    image_w: f64,
    image_h: f64,
) -> (f64, Vec<f64>) {
    let inputs = normalize_history(hist, image_w, image_h);
    let m = history_mean(hist);
    let scale = [image_w, image_h, image_w, image_h];
    let tv = target.as_vec4();
    let y: Vec<f64> = (0..4).map(|k| (tv[k] - m[k]) / scale[k]).collect();

    // Forward pass with the traces needed for truncated BPTT.
    let n_layers = w.n_layers();
    let d_h = w.d_h();
    let steps = inputs.len();
    let mut h_hist = vec![vec![vec![0.0; d_h]; steps + 1]; n_layers];
    let mut c_hist = vec![vec![vec![0.0; d_h]; steps + 1]; n_layers];
    let mut gate_hist: Vec<Vec<crate::seqnet::LstmGates>> = Vec::with_capacity(n_layers);
    let mut layer_inputs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        gate_hist.push(Vec::with_capacity(steps));
        layer_inputs.push(Vec::with_capacity(steps));
    }
    for (t, x) in inputs.iter().enumerate() {
        let mut layer_input = x.clone();
        for l in 0..n_layers {
            let gates = lstm_gates(&w.layers[l], &h_hist[l][t], &c_hist[l][t], &layer_input);
            h_hist[l][t + 1] = gates.h_new.clone();
            c_hist[l][t + 1] = gates.c_new.clone();
            layer_inputs[l].push(layer_input.clone());
            layer_input = gates.h_new.clone();
            gate_hist[l].push(gates);
        }
    }
    let final_hidden = &h_hist[n_layers - 1][steps];
    let mut out = w.w_out.matvec(final_hidden);
    crate::seqnet::add_assign(&mut out, &w.b_out);

    let mut loss = 0.0;
    let mut d_out = vec![0.0; 4];
    for k in 0..4 {
        let e = out[k] - y[k];
        loss += e * e;
        d_out[k] = 2.0 * e;
    }

    // Output head gradients and the seed for the recurrent backward pass.
    let mut g_w_out = crate::seqnet::Mat::zeros(4, d_h);
    g_w_out.add_outer(&d_out, final_hidden);
    let g_b_out = d_out.clone();
    let mut dh_top = vec![0.0; d_h];
    w.w_out.matvec_t_acc(&d_out, &mut dh_top);

    let mut layer_grads: Vec<LstmLayerGrads> =
        w.layers.iter().map(LstmLayerGrads::zeros_like).collect();
    // Gradient flowing into each layer's output per step.
    let mut d_outputs = vec![vec![vec![0.0; d_h]; steps]; n_layers];
    d_outputs[n_layers - 1][steps - 1] = dh_top;

    for l in (0..n_layers).rev() {
        let mut dh_carry = vec![0.0; d_h];
        let mut dc_carry = vec![0.0; d_h];
        for t in (0..steps).rev() {
            let mut dh = d_outputs[l][t].clone();
            for (a, b) in dh.iter_mut().zip(&dh_carry) {
                *a += b;
            }
            let (dh_prev, dc_prev, dx) = lstm_step_backward(
                &w.layers[l],
                &mut layer_grads[l],
                &h_hist[l][t],
                &c_hist[l][t],
                &layer_inputs[l][t],
                &gate_hist[l][t],
                &dh,
                &dc_carry,
            );
            dh_carry = dh_prev;
            dc_carry = dc_prev;
            if l > 0 {
                for (a, b) in d_outputs[l - 1][t].iter_mut().zip(&dx) {
                    *a += b;
                }
            }
        }
    }

    // Flatten in the same order as `lstm_flat_params`.
    let mut flat = Vec::new();
    for g in &layer_grads {
        for m in [&g.w_i, &g.u_i] {
            flat.extend_from_slice(m.as_slice());
        }
        flat.extend_from_slice(&g.b_i);
        for m in [&g.w_f, &g.u_f] {
            flat.extend_from_slice(m.as_slice());
        }
        flat.extend_from_slice(&g.b_f);
        for m in [&g.w_o, &g.u_o] {
            flat.extend_from_slice(m.as_slice());
        }
        flat.extend_from_slice(&g.b_o);
        for m in [&g.w_g, &g.u_g] {
            flat.extend_from_slice(m.as_slice());
        }
        flat.extend_from_slice(&g.b_g);
    }
    flat.extend_from_slice(g_w_out.as_slice());
    flat.extend_from_slice(&g_b_out);

    (loss, flat)
}

fn lstm_param_count(w: &LstmWeights) -> usize {
    lstm_flat_params(w).len()
}

fn lstm_flat_params(w: &LstmWeights) -> Vec<f64> {
    let mut flat = Vec::new();
    for layer in &w.layers {
        for m in [&layer.w_i, &layer.u_i] {
            flat.extend_from_slice(m.as_slice());
        }
        flat.extend_from_slice(&layer.b_i);
        for m in [&layer.w_f, &layer.u_f] {
            flat.extend_from_slice(m.as_slice());
        }
        flat.extend_from_slice(&layer.b_f);
        for m in [&layer.w_o, &layer.u_o] {
            flat.extend_from_slice(m.as_slice());
        }
        flat.extend_from_slice(&layer.b_o);
        for m in [&layer.w_g, &layer.u_g] {
            flat.extend_from_slice(m.as_slice());
        }
        flat.extend_from_slice(&layer.b_g);
    }
    flat.extend_from_slice(w.w_out.as_slice());
    flat.extend_from_slice(&w.b_out);
    flat
}

fn lstm_load_flat(w: &mut LstmWeights, flat: &[f64]) {
    let mut pos = 0;
    let mut take = |dst: &mut [f64]| {
        dst.copy_from_slice(&flat[pos..pos + dst.len()]);
        pos += dst.len();
    };
    for layer in &mut w.layers {
        take(layer.w_i.as_mut_slice());
        take(layer.u_i.as_mut_slice());
        take(&mut layer.b_i);
        take(layer.w_f.as_mut_slice());
        take(layer.u_f.as_mut_slice());
        take(&mut layer.b_f);
        take(layer.w_o.as_mut_slice());
        take(layer.u_o.as_mut_slice());
        take(&mut layer.b_o);
        take(layer.w_g.as_mut_slice());
        take(layer.u_g.as_mut_slice());
        take(&mut layer.b_g);
    }
    take(w.w_out.as_mut_slice());
    take(&mut w.b_out);
    debug_assert_eq!(pos, flat.len());
}
