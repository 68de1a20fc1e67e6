//! Adam with optional decoupled weight decay.

use nalgebra::DMatrix;

use crate::error::{RegeError, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<DMatrix<f64>>,
    v: Vec<DMatrix<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        AdamState {
            m: shapes.iter().map(|&(r, c)| DMatrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| DMatrix::zeros(r, c)).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. `weight_decay[i]` applies decoupled decay
/// (`p -= lr * wd * p`) to parameter slot `i`; pass 0.0 to disable.
pub fn adam_step(
    params: &mut [&mut DMatrix<f64>],
    grads: &[&DMatrix<f64>],
    state: &mut AdamState,
    lr: f64,
    weight_decay: &[f64],
) -> Result<()> {
    if params.len() != grads.len()
        || params.len() != state.m.len()
        || params.len() != weight_decay.len()
    {
        return Err(RegeError::dimension(
            "adam_step",
            format!("{} parameter slots", state.m.len()),
            format!("{}/{}/{}", params.len(), grads.len(), weight_decay.len()),
        ));
    }
    for (i, p) in params.iter().enumerate() {
        if p.shape() != grads[i].shape() || p.shape() != state.m[i].shape() {
            return Err(RegeError::dimension(
                "adam_step",
                format!("{:?}", state.m[i].shape()),
                format!("param {:?} grad {:?}", p.shape(), grads[i].shape()),
            ));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    for i in 0..params.len() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let g = grads[i];
        for ((m_e, v_e), (p_e, g_e)) in m
            .iter_mut()
            .zip(v.iter_mut())
            .zip(params[i].iter_mut().zip(g.iter()))
        {
            *m_e = BETA1 * *m_e + (1.0 - BETA1) * g_e;
            *v_e = BETA2 * *v_e + (1.0 - BETA2) * g_e * g_e;
            let m_hat = *m_e / bc1;
            let v_hat = *v_e / bc2;
            *p_e -= lr * m_hat / (v_hat.sqrt() + EPS);
            if weight_decay[i] != 0.0 {
                *p_e -= lr * weight_decay[i] * *p_e;
            }
        }
    }
    Ok(())
}
