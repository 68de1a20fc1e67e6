//! Losses: masked cross-entropy, pinball (quantile) loss, squared error.

use nalgebra::DMatrix;

use crate::error::{RegeError, Result};

/// Row-wise softmax with the usual max-shift for stability. Rows sum to 1.
pub fn softmax_rows(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = logits.clone();
    for mut row in out.row_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn check_mask(mask: &[bool], n: usize) -> Result<usize> {
    if mask.len() != n {
        return Err(RegeError::dimension(
            "mask",
            format!("{n} entries"),
            format!("{} entries", mask.len()),
        ));
    }
    let count = mask.iter().filter(|&&b| b).count();
    if count == 0 {
        return Err(RegeError::parameter("mask", "mask selects no nodes"));
    }
    Ok(count)
}

/// Mean negative log-likelihood over masked nodes, computed with a
/// log-sum-exp rather than through the softmax.
pub fn cross_entropy_loss(logits: &DMatrix<f64>, labels: &[usize], mask: &[bool]) -> Result<f64> {
    let n = logits.nrows();
    if labels.len() != n {
        return Err(RegeError::dimension(
            "labels",
            format!("{n} entries"),
            format!("{} entries", labels.len()),
        ));
    }
    let count = check_mask(mask, n)?;
    let mut total = 0.0;
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let logsum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        total += logsum - logits[(i, labels[i])];
    }
    Ok(total / count as f64)
}

/// Loss value and its gradient with respect to the logits: rows outside the
/// mask get zero gradient, masked rows get `(softmax - onehot) / |mask|`.
pub fn cross_entropy_grad(
    logits: &DMatrix<f64>,
    labels: &[usize],
    mask: &[bool],
) -> Result<(f64, DMatrix<f64>)> {
    let loss = cross_entropy_loss(logits, labels, mask)?;
    let count = mask.iter().filter(|&&b| b).count() as f64;
    let probs = softmax_rows(logits);
    let mut grad = DMatrix::zeros(logits.nrows(), logits.ncols());
    for i in 0..logits.nrows() {
        if !mask[i] {
            continue;
        }
        for j in 0..logits.ncols() {
            let indicator = if j == labels[i] { 1.0 } else { 0.0 };
            grad[(i, j)] = (probs[(i, j)] - indicator) / count;
        }
    }
    Ok((loss, grad))
}

/// Scalar pinball loss `max{(q-1)(y - y_hat), q(y - y_hat)}`. Zero exactly
/// when the residual is zero; minimized in expectation at the q-quantile.
pub fn quantile_loss(y: f64, y_hat: f64, q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) || q == 0.0 {
        return Err(RegeError::parameter(
            "q",
            format!("quantile must lie in (0, 1), got {q}"),
        ));
    }
    let e = y - y_hat;
    Ok(((q - 1.0) * e).max(q * e))
}

/// Mean pinball loss over matching matrices and its gradient with respect to
/// the predictions: `-q / N` where the target exceeds the prediction and
/// `(1 - q) / N` otherwise.
pub fn quantile_loss_grad(
    y: &DMatrix<f64>,
    y_hat: &DMatrix<f64>,
    q: f64,
) -> Result<(f64, DMatrix<f64>)> {
    if y.shape() != y_hat.shape() {
        return Err(RegeError::dimension(
            "quantile_loss",
            format!("{:?}", y.shape()),
            format!("{:?}", y_hat.shape()),
        ));
    }
    if !(0.0..1.0).contains(&q) || q == 0.0 {
        return Err(RegeError::parameter(
            "q",
            format!("quantile must lie in (0, 1), got {q}"),
        ));
    }
    let count = (y.nrows() * y.ncols()) as f64;
    let mut loss = 0.0;
    let mut grad = DMatrix::zeros(y.nrows(), y.ncols());
    for i in 0..y.nrows() {
        for j in 0..y.ncols() {
            let e = y[(i, j)] - y_hat[(i, j)];
            loss += ((q - 1.0) * e).max(q * e);
            grad[(i, j)] = if e > 0.0 { -q } else { 1.0 - q } / count;
        }
    }
    Ok((loss / count, grad))
}

/// Mean squared error and its gradient with respect to the predictions.
pub fn mse_grad(y: &DMatrix<f64>, y_hat: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    if y.shape() != y_hat.shape() {
        return Err(RegeError::dimension(
            "mse",
            format!("{:?}", y.shape()),
            format!("{:?}", y_hat.shape()),
        ));
    }
    let count = (y.nrows() * y.ncols()) as f64;
    let mut loss = 0.0;
    let mut grad = DMatrix::zeros(y.nrows(), y.ncols());
    for i in 0..y.nrows() {
        for j in 0..y.ncols() {
            let d = y_hat[(i, j)] - y[(i, j)];
            loss += d * d;
            grad[(i, j)] = 2.0 * d / count;
        }
    }
    Ok((loss / count, grad))
}
