//! Minimal neural-network substrate: a two-layer graph convolution network,
//! a three-layer perceptron with quantile heads, losses, Adam, dropout and
//! per-node radius noise. Gradients are derived by hand for these two fixed
//! architectures and validated against central finite differences in the
//! test suite.

pub mod adam;
pub mod gcn;
pub mod loss;
pub mod mlp;
pub mod noise;

pub use adam::{adam_step, AdamState};
pub use gcn::{gcn_backward, gcn_forward, ForwardTrace, GcnForward, GcnGrads, GcnParams};
pub use loss::{
    cross_entropy_grad, cross_entropy_loss, mse_grad, quantile_loss, quantile_loss_grad,
    softmax_rows,
};
pub use mlp::{mlp_backward, mlp_forward, MlpForward, MlpGrads, MlpParams, MlpTrace};
pub use noise::{dropout_mask, inject_radius_noise};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Forward-pass mode. Train enables dropout and radius noise; eval is a
/// deterministic pure function of the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Glorot-style uniform init scaled by fan-in/fan-out, filled column-major
/// from the given generator.
pub(crate) fn glorot_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = rng.gen_range(-bound..bound);
        }
    }
    m
}

pub(crate) fn relu(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|x| x.max(0.0))
}

/// Elementwise product with the ReLU activation mask of `pre`.
pub(crate) fn relu_backward(grad: &DMatrix<f64>, pre: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = grad.clone();
    for (g, z) in out.iter_mut().zip(pre.iter()) {
        if *z <= 0.0 {
            *g = 0.0;
        }
    }
    out
}
