//! Gated recurrent unit cell, the reset/update convention.
//!
//! The cell computes
//! `z = sigmoid(W_z x + U_z h + b_z)`,
//! `r = sigmoid(W_r x + U_r h + b_r)`,
//! `c = tanh(W_h x + U_h (r*h) + b_h)` and
//! `h' = (1 - z)*h + z*c`,
//! so the update gate interpolates between the previous state and the
//! candidate.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::math::{sigmoid, sqrt, tanh};
use crate::seqnet::linalg::{add_assign, Mat};
use crate::Result;

/// One stacked layer's parameters. Input-to-hidden matrices are
/// `d_h x d_in`, hidden-to-hidden are `d_h x d_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer {
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

impl GruLayer {
    pub fn zeros(d_in: usize, d_h: usize) -> Self {
        GruLayer {
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

    pub fn uniform<R: Rng>(d_in: usize, d_h: usize, rng: &mut R) -> Self {
        let bound = sqrt(1.0 / d_h as f64);
        GruLayer {
            w_z: Mat::uniform(d_h, d_in, bound, rng),
            u_z: Mat::uniform(d_h, d_h, bound, rng),
            b_z: vec![0.0; d_h],
            w_r: Mat::uniform(d_h, d_in, bound, rng),
            u_r: Mat::uniform(d_h, d_h, bound, rng),
            b_r: vec![0.0; d_h],
            w_h: Mat::uniform(d_h, d_in, bound, rng),
            u_h: Mat::uniform(d_h, d_h, bound, rng),
            b_h: vec![0.0; d_h],
        }
    }

    pub fn d_in(&self) -> usize {
        self.w_z.cols()
    }

    pub fn d_h(&self) -> usize {
        self.w_z.rows()
    }
}

/// Stacked cell parameters; one set serves both encoder directions.
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    pub layers: Vec<GruLayer>,
}

impl GruWeights {
    pub fn zeros(n_layers: usize, d_in: usize, d_h: usize) -> Self {
        assert!(n_layers >= 1);
        let mut layers = Vec::with_capacity(n_layers);
        layers.push(GruLayer::zeros(d_in, d_h));
        for _ in 1..n_layers {
            layers.push(GruLayer::zeros(d_h, d_h));
        }
        GruWeights { layers }
    }

    pub fn uniform<R: Rng>(n_layers: usize, d_in: usize, d_h: usize, rng: &mut R) -> Self {
        assert!(n_layers >= 1);
        let mut layers = Vec::with_capacity(n_layers);
        layers.push(GruLayer::uniform(d_in, d_h, rng));
        for _ in 1..n_layers {
            layers.push(GruLayer::uniform(d_h, d_h, rng));
        }
        GruWeights { layers }
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

/// Gate activations of one step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct GruGates {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h_new: Vec<f64>,
}

pub(crate) fn gru_gates(layer: &GruLayer, h: &[f64], x: &[f64]) -> GruGates {
    let mut az = layer.w_z.matvec(x);
    layer.u_z.matvec_acc(h, &mut az);
    add_assign(&mut az, &layer.b_z);
    let z: Vec<f64> = az.iter().map(|&a| sigmoid(a)).collect();

    let mut ar = layer.w_r.matvec(x);
    layer.u_r.matvec_acc(h, &mut ar);
    add_assign(&mut ar, &layer.b_r);
    let r: Vec<f64> = ar.iter().map(|&a| sigmoid(a)).collect();

    let rh: Vec<f64> = r.iter().zip(h).map(|(rv, hv)| rv * hv).collect();
    let mut ac = layer.w_h.matvec(x);
    layer.u_h.matvec_acc(&rh, &mut ac);
    add_assign(&mut ac, &layer.b_h);
    let candidate: Vec<f64> = ac.iter().map(|&a| tanh(a)).collect();

    let h_new: Vec<f64> = h
        .iter()
        .zip(&z)
        .zip(&candidate)
        .map(|((hv, zv), cv)| (1.0 - zv) * hv + zv * cv)
        .collect();

    GruGates { z, r, candidate, h_new }
}

/// Advances one cell step, returning the next hidden state.
pub fn gru_cell_step(layer: &GruLayer, h: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if h.len() != layer.d_h() {
        return Err(Error::DimensionMismatch { expected: layer.d_h(), got: h.len() });
    }
    if x.len() != layer.d_in() {
        return Err(Error::DimensionMismatch { expected: layer.d_in(), got: x.len() });
    }
    Ok(gru_gates(layer, h, x).h_new)
}
