//! Two-layer graph convolution network with radius noise.
//!
//! Forward pass (train mode):
//! ```text
//! H1 = relu(A_hat X W1)            hidden representation
//! H1 <- H1 + N(0, r)               per-node radius noise
//! D  = dropout(H1, p)
//! L  = A_hat D W2                  logits
//! L  <- L + N(0, r)
//! ```
//! In eval mode both noise injections and the dropout are disabled and the
//! pass is a pure function of the parameters and inputs.

use nalgebra::DMatrix;

use crate::error::{RegeError, Result};
use crate::graph::NormalizedAdjacency;
use crate::nn::{dropout_mask, inject_radius_noise, relu, relu_backward, Mode};
use crate::radii::RadiusVector;
use crate::seeds::{self, stream};

/// The two weight matrices. No biases.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w1: DMatrix<f64>,
    pub w2: DMatrix<f64>,
}

impl GcnParams {
    /// Seeded Glorot-uniform initialization for `features -> hidden -> classes`.
    pub fn init(num_features: usize, hidden: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = seeds::rng(seed, stream::INIT);
        GcnParams {
            w1: crate::nn::glorot_uniform(num_features, hidden, &mut rng),
            w2: crate::nn::glorot_uniform(hidden, num_classes, &mut rng),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.w2.ncols()
    }
}

/// Everything the backward pass needs to reproduce the recorded forward pass
/// exactly: pre-activations, the post-dropout layer-2 input, the dropout mask
/// and the propagation products.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    ax: DMatrix<f64>,
    z1: DMatrix<f64>,
    layer2_input: DMatrix<f64>,
    dropout_mask: Option<DMatrix<f64>>,
    a_hat: DMatrix<f64>,
}

/// Output of a forward pass: logits, the pre-noise hidden representation and
/// the trace for backprop.
#[derive(Debug, Clone)]
pub struct GcnForward {
    pub logits: DMatrix<f64>,
    pub hidden: DMatrix<f64>,
    pub trace: ForwardTrace,
}

#[derive(Debug, Clone)]
pub struct GcnGrads {
    pub w1: DMatrix<f64>,
    pub w2: DMatrix<f64>,
}

/// Runs the two-layer GCN. `radii` enables noise injection in train mode;
/// dropout probability is fixed by the caller through `dropout_p`.
#[allow(clippy::too_many_arguments)]
pub fn gcn_forward(
    params: &GcnParams,
    a_hat: &NormalizedAdjacency,
    features: &DMatrix<f64>,
    radii: Option<&RadiusVector>,
    dropout_p: f64,
    mode: Mode,
    seed: u64,
) -> Result<GcnForward> {
    let n = a_hat.n();
    if features.nrows() != n {
        return Err(RegeError::dimension(
            "gcn layer 1 input",
            format!("{n} feature rows"),
            format!("{} feature rows", features.nrows()),
        ));
    }
    if params.w1.nrows() != features.ncols() {
        return Err(RegeError::dimension(
            "gcn layer 1 weights",
            format!("{} input dims", features.ncols()),
            format!("{} input dims", params.w1.nrows()),
        ));
    }
    if params.w2.nrows() != params.w1.ncols() {
        return Err(RegeError::dimension(
            "gcn layer 2 weights",
            format!("{} hidden dims", params.w1.ncols()),
            format!("{} hidden dims", params.w2.nrows()),
        ));
    }
    if let Some(r) = radii {
        if r.len() != n {
            return Err(RegeError::dimension(
                "gcn radii",
                format!("{n} radii"),
                format!("{} radii", r.len()),
            ));
        }
    }

    let ax = a_hat.matrix() * features;
    let z1 = &ax * &params.w1;
    let hidden = relu(&z1);

    let train = mode == Mode::Train;
    let mut h = hidden.clone();
    if train {
        if let Some(r) = radii {
            h = inject_radius_noise(&h, r, seeds::derive(seed, 0xA1))?;
        }
    }
    let mask = if train && dropout_p > 0.0 {
        Some(dropout_mask(h.nrows(), h.ncols(), dropout_p, seed))
    } else {
        None
    };
    let layer2_input = match &mask {
        Some(m) => h.component_mul(m),
        None => h,
    };

    let mut logits = a_hat.matrix() * (&layer2_input * &params.w2);
    if train {
        if let Some(r) = radii {
            logits = inject_radius_noise(&logits, r, seeds::derive(seed, 0xA2))?;
        }
    }

    Ok(GcnForward {
        logits,
        hidden,
        trace: ForwardTrace {
            ax,
            z1,
            layer2_input,
            dropout_mask: mask,
            a_hat: a_hat.matrix().clone(),
        },
    })
}

/// Exact gradients of the recorded loss with respect to both weight
/// matrices, treating dropout masks and noise draws as constants.
pub fn gcn_backward(
    params: &GcnParams,
    trace: &ForwardTrace,
    logits_grad: &DMatrix<f64>,
) -> Result<GcnGrads> {
    if logits_grad.nrows() != trace.a_hat.nrows() || logits_grad.ncols() != params.w2.ncols() {
        return Err(RegeError::dimension(
            "gcn_backward",
            format!("{}x{}", trace.a_hat.nrows(), params.w2.ncols()),
            format!("{}x{}", logits_grad.nrows(), logits_grad.ncols()),
        ));
    }
    // logits = A_hat (D W2); A_hat is symmetric.
    let ag = &trace.a_hat * logits_grad;
    let grad_w2 = trace.layer2_input.transpose() * &ag;
    let mut g_hidden = ag * params.w2.transpose();
    if let Some(mask) = &trace.dropout_mask {
        g_hidden.component_mul_assign(mask);
    }
    let g_z1 = relu_backward(&g_hidden, &trace.z1);
    let grad_w1 = trace.ax.transpose() * g_z1;
    Ok(GcnGrads {
        w1: grad_w1,
        w2: grad_w2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{symmetric_normalize, Graph};
    use crate::radii::{RadiusKind, RadiusVector};

    fn tiny_setup() -> (Graph, NormalizedAdjacency) {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let a = symmetric_normalize(&g);
        (g, a)
    }

    #[test]
    fn zero_radii_match_no_radii() {
        let (g, a) = tiny_setup();
        let params = GcnParams::init(4, 8, 2, 3);
        let zeros = RadiusVector::zeros(4, RadiusKind::Ddr);
        let with = gcn_forward(&params, &a, g.features(), Some(&zeros), 0.5, Mode::Train, 7)
            .unwrap();
        let without =
            gcn_forward(&params, &a, g.features(), None, 0.5, Mode::Train, 7).unwrap();
        assert_eq!(with.logits, without.logits);
    }

    #[test]
    fn eval_ignores_seed() {
        let (g, a) = tiny_setup();
        let params = GcnParams::init(4, 8, 2, 3);
        let one = gcn_forward(&params, &a, g.features(), None, 0.5, Mode::Eval, 1).unwrap();
        let two = gcn_forward(&params, &a, g.features(), None, 0.5, Mode::Eval, 999).unwrap();
        assert_eq!(one.logits, two.logits);
    }

    #[test]
    fn single_node_hand_computation() {
        // one node, identity feature, A_hat = [[1]]:
        // logits = relu(W1) W2 row.
        let g = Graph::from_edges(1, &[]).unwrap();
        let a = symmetric_normalize(&g);
        let params = GcnParams::init(1, 16, 2, 5);
        let out = gcn_forward(&params, &a, g.features(), None, 0.5, Mode::Eval, 0).unwrap();
        let relu_w1 = params.w1.map(|x| x.max(0.0));
        let expected = &relu_w1 * &params.w2;
        assert!((out.logits.row(0) - expected.row(0)).abs().max() < 1e-12);
        assert_eq!(out.hidden.ncols(), 16);
    }

    #[test]
    fn hidden_is_pre_noise_pre_dropout() {
        let (g, a) = tiny_setup();
        let params = GcnParams::init(4, 8, 2, 3);
        let radii = RadiusVector::new(vec![1.0; 4], RadiusKind::Ddr).unwrap();
        let train =
            gcn_forward(&params, &a, g.features(), Some(&radii), 0.5, Mode::Train, 7).unwrap();
        let eval = gcn_forward(&params, &a, g.features(), None, 0.5, Mode::Eval, 7).unwrap();
        assert_eq!(train.hidden, eval.hidden);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradients() {
        let (g, a) = tiny_setup();
        let params = GcnParams::init(4, 8, 2, 3);
        let out = gcn_forward(&params, &a, g.features(), None, 0.5, Mode::Train, 7).unwrap();
        let grads = gcn_backward(&params, &out.trace, &DMatrix::zeros(4, 2)).unwrap();
        assert_eq!(grads.w1, DMatrix::zeros(4, 8));
        assert_eq!(grads.w2, DMatrix::zeros(8, 2));
    }

    #[test]
    fn gradient_scales_linearly_with_loss() {
        let (g, a) = tiny_setup();
        let params = GcnParams::init(4, 8, 2, 3);
        let out = gcn_forward(&params, &a, g.features(), None, 0.5, Mode::Train, 7).unwrap();
        let upstream = DMatrix::from_fn(4, 2, |i, j| (i + j) as f64 * 0.1 + 0.05);
        let g1 = gcn_backward(&params, &out.trace, &upstream).unwrap();
        let g3 = gcn_backward(&params, &out.trace, &(&upstream * 3.0)).unwrap();
        assert!((&g3.w1 - &g1.w1 * 3.0).abs().max() < 1e-12);
        assert!((&g3.w2 - &g1.w2 * 3.0).abs().max() < 1e-12);
    }

    #[test]
    fn dimension_errors_name_the_layer() {
        let (g, a) = tiny_setup();
        // w1 expects 3 input dims but features have 4
        let params = GcnParams {
            w1: DMatrix::zeros(3, 8),
            w2: DMatrix::zeros(8, 2),
        };
        let err = gcn_forward(&params, &a, g.features(), None, 0.5, Mode::Eval, 0).unwrap_err();
        assert!(err.to_string().contains("layer 1"));
    }
}
