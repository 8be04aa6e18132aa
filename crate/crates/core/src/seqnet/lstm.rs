//! LSTM cell for the motion predictor, with a hand-derived backward pass.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::math::{sigmoid, sqrt, tanh};
use crate::seqnet::linalg::{add_assign, Mat};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub w_i: Mat,
    pub u_i: Mat,
    pub b_i: Vec<f64>,
    pub w_f: Mat,
    pub u_f: Mat,
    pub b_f: Vec<f64>,
    pub w_o: Mat,
    pub u_o: Mat,
    pub b_o: Vec<f64>,
    pub w_g: Mat,
    pub u_g: Mat,
    pub b_g: Vec<f64>,
}

impl LstmLayer {
    pub fn zeros(d_in: usize, d_h: usize) -> Self {
        let m = || Mat::zeros(d_h, d_in);
        let u = || Mat::zeros(d_h, d_h);
        let b = || vec![0.0; d_h];
        LstmLayer {
            w_i: m(),
            u_i: u(),
            b_i: b(),
            w_f: m(),
            u_f: u(),
            b_f: b(),
            w_o: m(),
            u_o: u(),
            b_o: b(),
            w_g: m(),
            u_g: u(),
            b_g: b(),
        }
    }

    pub fn uniform<R: Rng>(d_in: usize, d_h: usize, rng: &mut R) -> Self {
        let bound = sqrt(1.0 / d_h as f64);
        LstmLayer {
            w_i: Mat::uniform(d_h, d_in, bound, rng),
            u_i: Mat::uniform(d_h, d_h, bound, rng),
            b_i: vec![0.0; d_h],
            w_f: Mat::uniform(d_h, d_in, bound, rng),
            u_f: Mat::uniform(d_h, d_h, bound, rng),
            b_f: vec![0.0; d_h],
            w_o: Mat::uniform(d_h, d_in, bound, rng),
            u_o: Mat::uniform(d_h, d_h, bound, rng),
            b_o: vec![0.0; d_h],
            w_g: Mat::uniform(d_h, d_in, bound, rng),
            u_g: Mat::uniform(d_h, d_h, bound, rng),
            b_g: vec![0.0; d_h],
        }
    }

    pub fn d_in(&self) -> usize {
        self.w_i.cols()
    }

    pub fn d_h(&self) -> usize {
        self.w_i.rows()
    }
}

/// Stacked LSTM plus the linear output head mapping the final hidden state
/// to a predicted `[x, y, w, h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub layers: Vec<LstmLayer>,
    pub w_out: Mat,
    pub b_out: Vec<f64>,
}

impl LstmWeights {
    pub fn zeros(n_layers: usize, d_in: usize, d_h: usize) -> Self {
        assert!(n_layers >= 1);
        let mut layers = Vec::with_capacity(n_layers);
        layers.push(LstmLayer::zeros(d_in, d_h));
        for _ in 1..n_layers {
            layers.push(LstmLayer::zeros(d_h, d_h));
        }
        LstmWeights { layers, w_out: Mat::zeros(4, d_h), b_out: vec![0.0; 4] }
    }

    pub fn uniform<R: Rng>(n_layers: usize, d_in: usize, d_h: usize, rng: &mut R) -> Self {
        assert!(n_layers >= 1);
        let mut layers = Vec::with_capacity(n_layers);
        layers.push(LstmLayer::uniform(d_in, d_h, rng));
        for _ in 1..n_layers {
            layers.push(LstmLayer::uniform(d_h, d_h, rng));
        }
        let bound = sqrt(1.0 / d_h as f64);
        LstmWeights { layers, w_out: Mat::uniform(4, d_h, bound, rng), b_out: vec![0.0; 4] }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].d_in()
    }

    pub fn d_h(&self) -> usize {
        self.layers[0].d_h()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LstmGates {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c_new: Vec<f64>,
    pub h_new: Vec<f64>,
}

pub(crate) fn lstm_gates(layer: &LstmLayer, h: &[f64], c: &[f64], x: &[f64]) -> LstmGates {
    let gate = |w: &Mat, u: &Mat, b: &[f64]| -> Vec<f64> {
        let mut a = w.matvec(x);
        u.matvec_acc(h, &mut a);
        add_assign(&mut a, b);
        a
    };
    let i: Vec<f64> = gate(&layer.w_i, &layer.u_i, &layer.b_i).iter().map(|&a| sigmoid(a)).collect();
    let f: Vec<f64> = gate(&layer.w_f, &layer.u_f, &layer.b_f).iter().map(|&a| sigmoid(a)).collect();
    let o: Vec<f64> = gate(&layer.w_o, &layer.u_o, &layer.b_o).iter().map(|&a| sigmoid(a)).collect();
    let g: Vec<f64> = gate(&layer.w_g, &layer.u_g, &layer.b_g).iter().map(|&a| tanh(a)).collect();

    let c_new: Vec<f64> = f
        .iter()
        .zip(c)
        .zip(i.iter().zip(&g))
        .map(|((fv, cv), (iv, gv))| fv * cv + iv * gv)
        .collect();
    let h_new: Vec<f64> = o.iter().zip(&c_new).map(|(ov, cv)| ov * tanh(*cv)).collect();
    LstmGates { i, f, o, g, c_new, h_new }
}

/// One LSTM step; returns `(h', c')`.
pub fn lstm_cell_step(
    layer: &LstmLayer,
    h: &[f64],
    c: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if h.len() != layer.d_h() || c.len() != layer.d_h() {
        return Err(Error::DimensionMismatch { expected: layer.d_h(), got: h.len() });
    }
    if x.len() != layer.d_in() {
        return Err(Error::DimensionMismatch { expected: layer.d_in(), got: x.len() });
    }
    let gates = lstm_gates(layer, h, c, x);
    Ok((gates.h_new, gates.c_new))
}

/// Gradient buffers mirroring `LstmLayer`.
#[derive(Debug, Clone)]
pub(crate) struct LstmLayerGrads {
    pub w_i: Mat,
    pub u_i: Mat,
    pub b_i: Vec<f64>,
    pub w_f: Mat,
    pub u_f: Mat,
    pub b_f: Vec<f64>,
    pub w_o: Mat,
    pub u_o: Mat,
    pub b_o: Vec<f64>,
    pub w_g: Mat,
    pub u_g: Mat,
    pub b_g: Vec<f64>,
}

impl LstmLayerGrads {
    pub fn zeros_like(layer: &LstmLayer) -> Self {
        let (d_in, d_h) = (layer.d_in(), layer.d_h());
        LstmLayerGrads {
            w_i: Mat::zeros(d_h, d_in),
            u_i: Mat::zeros(d_h, d_h),
            b_i: vec![0.0; d_h],
            w_f: Mat::zeros(d_h, d_in),
            u_f: Mat::zeros(d_h, d_h),
            b_f: vec![0.0; d_h],
            w_o: Mat::zeros(d_h, d_in),
            u_o: Mat::zeros(d_h, d_h),
            b_o: vec![0.0; d_h],
            w_g: Mat::zeros(d_h, d_in),
            u_g: Mat::zeros(d_h, d_h),
            b_g: vec![0.0; d_h],
        }
    }
}

/// Backward through one step. `dh_new`/`dc_new` are gradients flowing into
/// the step's outputs; returns `(dh_prev, dc_prev, dx)` and accumulates the
/// parameter gradients.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_step_backward(
    layer: &LstmLayer,
    grads: &mut LstmLayerGrads,
    h_prev: &[f64],
    c_prev: &[f64],
    x: &[f64],
    gates: &LstmGates,
    dh_new: &[f64],
    dc_new: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d_h = layer.d_h();
    let mut dc = vec![0.0; d_h];
    let mut d_o = vec![0.0; d_h];
    for k in 0..d_h {
        let tc = tanh(gates.c_new[k]);
        d_o[k] = dh_new[k] * tc;
        dc[k] = dc_new[k] + dh_new[k] * gates.o[k] * (1.0 - tc * tc);
    }

    let mut da_i = vec![0.0; d_h];
    let mut da_f = vec![0.0; d_h];
    let mut da_o = vec![0.0; d_h];
    let mut da_g = vec![0.0; d_h];
    let mut dc_prev = vec![0.0; d_h];
    for k in 0..d_h {
        let (i, f, o, g) = (gates.i[k], gates.f[k], gates.o[k], gates.g[k]);
        da_i[k] = dc[k] * g * i * (1.0 - i);
        da_f[k] = dc[k] * c_prev[k] * f * (1.0 - f);
        da_o[k] = d_o[k] * o * (1.0 - o);
        da_g[k] = dc[k] * i * (1.0 - g * g);
        dc_prev[k] = dc[k] * f;
    }

    let mut dh_prev = vec![0.0; d_h];
    let mut dx = vec![0.0; layer.d_in()];
    for (da, w, u, gw, gu, gb) in [
        (&da_i, &layer.w_i, &layer.u_i, &mut grads.w_i, &mut grads.u_i, &mut grads.b_i),
        (&da_f, &layer.w_f, &layer.u_f, &mut grads.w_f, &mut grads.u_f, &mut grads.b_f),
        (&da_o, &layer.w_o, &layer.u_o, &mut grads.w_o, &mut grads.u_o, &mut grads.b_o),
        (&da_g, &layer.w_g, &layer.u_g, &mut grads.w_g, &mut grads.u_g, &mut grads.b_g),
    ] {
        gw.add_outer(da, x);
        gu.add_outer(da, h_prev);
        add_assign(gb, da);
        w.matvec_t_acc(da, &mut dx);
        u.matvec_t_acc(da, &mut dh_prev);
    }

    (dh_prev, dc_prev, dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weight_cell_matches_hand_trace() {
        // All gates sit at sigmoid(0) = 0.5 and the candidate at 0, so
        // c' = c/2 and h' = 0.5 * tanh(c/2).
        let layer = LstmLayer::zeros(3, 1);
        let (h, c) = lstm_cell_step(&layer, &[0.7], &[2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-15);
        assert!((h[0] - 0.5 * 1.0f64.tanh()).abs() < 1e-12);
        assert!((h[0] - 0.380797).abs() < 1e-6);
    }

    #[test]
    fn zero_cell_state_stays_zero_under_zero_weights() {
        let layer = LstmLayer::zeros(2, 2);
        let (h, c) = lstm_cell_step(&layer, &[0.0, 0.0], &[0.0, 0.0], &[5.0, -5.0]).unwrap();
        assert_eq!(c, alloc::vec![0.0, 0.0]);
        assert_eq!(h, alloc::vec![0.0, 0.0]);
    }

    #[test]
    fn input_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let layer = LstmLayer::uniform(3, 4, &mut rng);
        let h: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();

        // Scalar objective: sum of h' entries.
        let gates = lstm_gates(&layer, &h, &c, &x);
        let mut grads = LstmLayerGrads::zeros_like(&layer);
        let dh = alloc::vec![1.0; 4];
        let dc = alloc::vec![0.0; 4];
        let (_, _, dx) = lstm_step_backward(&layer, &mut grads, &h, &c, &x, &gates, &dh, &dc);

        let eps = 1e-6;
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp[k] += eps;
            let mut xm = x.clone();
            xm[k] -= eps;
            let fp: f64 = lstm_gates(&layer, &h, &c, &xp).h_new.iter().sum();
            let fm: f64 = lstm_gates(&layer, &h, &c, &xm).h_new.iter().sum();
            let fd = (fp - fm) / (2.0 * eps);
            let rel = (dx[k] - fd).abs() / dx[k].abs().max(fd.abs()).max(1e-9);
            assert!(rel < 1e-6, "coordinate {k}: analytic {} vs fd {fd}", dx[k]);
        }
    }
}
