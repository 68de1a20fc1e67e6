//! Student perceptron: a shared backbone of three hidden layers with three
//! output heads (mean, lower quantile, upper quantile). Dropout sits after
//! the first two hidden layers only.

use nalgebra::DMatrix;

use crate::error::{RegeError, Result};
use crate::nn::{dropout_mask, relu, relu_backward, Mode};
use crate::seeds::{self, stream};

/// Backbone weights plus the three head matrices. No biases.
#[derive(Debug, Clone)]
pub struct MlpParams {
    pub layers: Vec<DMatrix<f64>>,
    /// mean, lower, upper — each `hidden x out_dim`.
    pub heads: [DMatrix<f64>; 3],
}

impl MlpParams {
    pub fn init(num_features: usize, hidden: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = seeds::rng(seed, stream::INIT);
        let layers = vec![
            crate::nn::glorot_uniform(num_features, hidden, &mut rng),
            crate::nn::glorot_uniform(hidden, hidden, &mut rng),
            crate::nn::glorot_uniform(hidden, hidden, &mut rng),
        ];
        let heads = [
            crate::nn::glorot_uniform(hidden, out_dim, &mut rng),
            crate::nn::glorot_uniform(hidden, out_dim, &mut rng),
            crate::nn::glorot_uniform(hidden, out_dim, &mut rng),
        ];
        MlpParams { layers, heads }
    }

    pub fn out_dim(&self) -> usize {
        self.heads[0].ncols()
    }

    pub fn all_shapes(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .chain(self.heads.iter())
            .map(|m| m.shape())
            .collect()
    }
}

/// Per-layer inputs, pre-activations and dropout masks for exact backprop.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    inputs: Vec<DMatrix<f64>>,
    pre_activations: Vec<DMatrix<f64>>,
    masks: Vec<Option<DMatrix<f64>>>,
    backbone_out: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpForward {
    pub mean: DMatrix<f64>,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
    pub trace: MlpTrace,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<DMatrix<f64>>,
    pub heads: [DMatrix<f64>; 3],
}

pub fn mlp_forward(
    params: &MlpParams,
    x: &DMatrix<f64>,
    dropout_p: f64,
    mode: Mode,
    seed: u64,
) -> Result<MlpForward> {
    if params.layers[0].nrows() != x.ncols() {
        return Err(RegeError::dimension(
            "mlp layer 1",
            format!("{} input dims", params.layers[0].nrows()),
            format!("{} input dims", x.ncols()),
        ));
    }
    let train = mode == Mode::Train;
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre_activations = Vec::with_capacity(params.layers.len());
    let mut masks = Vec::with_capacity(params.layers.len());
    let mut current = x.clone();
    for (li, w) in params.layers.iter().enumerate() {
        inputs.push(current.clone());
        let z = &current * w;
        let mut h = relu(&z);
        pre_activations.push(z);
        // dropout after the first two hidden layers only
        if train && li < 2 && dropout_p > 0.0 {
            let mask = dropout_mask(
                h.nrows(),
                h.ncols(),
                dropout_p,
                seeds::derive2(seed, 0xD0, li as u64),
            );
            h.component_mul_assign(&mask);
            masks.push(Some(mask));
        } else {
            masks.push(None);
        }
        current = h;
    }
    let backbone_out = current;
    Ok(MlpForward {
        mean: &backbone_out * &params.heads[0],
        lower: &backbone_out * &params.heads[1],
        upper: &backbone_out * &params.heads[2],
        trace: MlpTrace {
            inputs,
            pre_activations,
            masks,
            backbone_out,
        },
    })
}

/// Backpropagates the three head gradients through the shared backbone.
pub fn mlp_backward(
    params: &MlpParams,
    trace: &MlpTrace,
    grad_mean: &DMatrix<f64>,
    grad_lower: &DMatrix<f64>,
    grad_upper: &DMatrix<f64>,
) -> Result<MlpGrads> {
    let head_grads_in = [grad_mean, grad_lower, grad_upper];
    let mut heads: Vec<DMatrix<f64>> = Vec::with_capacity(3);
    let mut g_backbone = DMatrix::zeros(trace.backbone_out.nrows(), trace.backbone_out.ncols());
    for (head, g) in params.heads.iter().zip(head_grads_in) {
        if g.nrows() != trace.backbone_out.nrows() || g.ncols() != head.ncols() {
            return Err(RegeError::dimension(
                "mlp_backward",
                format!("{}x{}", trace.backbone_out.nrows(), head.ncols()),
                format!("{}x{}", g.nrows(), g.ncols()),
            ));
        }
        heads.push(trace.backbone_out.transpose() * g);
        g_backbone += g * head.transpose();
    }
    let mut layer_grads = vec![DMatrix::zeros(0, 0); params.layers.len()];
    let mut g_h = g_backbone;
    for li in (0..params.layers.len()).rev() {
        if let Some(mask) = &trace.masks[li] {
            g_h.component_mul_assign(mask);
        }
        let g_z = relu_backward(&g_h, &trace.pre_activations[li]);
        layer_grads[li] = trace.inputs[li].transpose() * &g_z;
        if li > 0 {
            g_h = g_z * params.layers[li].transpose();
        }
    }
    let heads: [DMatrix<f64>; 3] = heads.try_into().expect("three heads");
    Ok(MlpGrads {
        layers: layer_grads,
        heads,
    })
}
