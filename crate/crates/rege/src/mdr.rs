//! Model-dependent radii.
//!
//! A GCN (the teacher) is trained for node classification; a feature-only
//! perceptron (the student) learns to reproduce the teacher's hidden
//! embeddings along with per-dimension lower/upper quantile estimates. The
//! quantile intervals are conformalized on the training rows so that they
//! carry finite-sample coverage, and the mean conformalized interval width
//! per node — min-max normalized — is that node's radius.

use nalgebra::DMatrix;

use crate::error::{RegeError, Result};
use crate::graph::{symmetric_normalize, Graph};
use crate::nn::{
    adam_step, cross_entropy_grad, gcn_backward, gcn_forward, mlp_backward, mlp_forward,
    mse_grad, quantile_loss_grad, AdamState, GcnParams, Mode, MlpParams,
};
use crate::radii::{minmax_normalize, RadiusKind, RadiusVector};
use crate::seeds::{self, stream};
use crate::trainer::TrainConfig;

/// Trained teacher parameters and its eval-mode hidden embeddings.
#[derive(Debug, Clone)]
pub struct TeacherArtifacts {
    pub params: GcnParams,
    /// `n x hidden` matrix; row `i` is the teacher's embedding of node `i`.
    pub embeddings: DMatrix<f64>,
}

/// Student backbone plus heads; predictions run in eval mode.
#[derive(Debug, Clone)]
pub struct StudentModel {
    pub params: MlpParams,
}

impl StudentModel {
    /// Eval-mode predictions: (mean, lower, upper), each `n x d`.
    pub fn predict(&self, features: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let out = mlp_forward(&self.params, features, 0.0, Mode::Eval, 0)?;
        Ok((out.mean, out.lower, out.upper))
    }
}

/// Per-dimension conformal scores over the calibration set and the resulting
/// quantile offsets.
#[derive(Debug, Clone)]
pub struct ConformalCalibration {
    pub alpha: f64,
    pub scores: Vec<Vec<f64>>,
    pub q_hat: Vec<f64>,
}

/// Per-node, per-dimension conformalized intervals.
#[derive(Debug, Clone)]
pub struct Intervals {
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

/// Trains the teacher GCN on the given graph (no views, no noise) with
/// cross-entropy on the train mask, for a fixed epoch budget.
pub fn train_teacher(graph: &Graph, config: &TrainConfig) -> Result<TeacherArtifacts> {
    let labels = graph
        .labels()
        .ok_or_else(|| RegeError::Precondition("teacher requires labels".to_string()))?;
    let masks = graph
        .masks()
        .ok_or_else(|| RegeError::Precondition("teacher requires masks".to_string()))?;
    let a_hat = symmetric_normalize(graph);
    let seed = seeds::derive(config.seed, stream::TEACHER);
    let mut params = GcnParams::init(
        graph.features().ncols(),
        config.hidden,
        graph.num_classes(),
        seed,
    );
    let mut adam = AdamState::new(&[params.w1.shape(), params.w2.shape()]);
    for epoch in 0..config.teacher_epochs {
        let fseed = seeds::derive2(seed, stream::EPOCH, epoch as u64);
        let out = gcn_forward(
            &params,
            &a_hat,
            graph.features(),
            None,
            config.dropout,
            Mode::Train,
            fseed,
        )?;
        let (_, grad) = cross_entropy_grad(&out.logits, labels, &masks.train)?;
        let grads = gcn_backward(&params, &out.trace, &grad)?;
        adam_step(
            &mut [&mut params.w1, &mut params.w2],
            &[&grads.w1, &grads.w2],
            &mut adam,
            config.lr,
            &[config.weight_decay, 0.0],
        )?;
    }
    let eval = gcn_forward(
        &params,
        &a_hat,
        graph.features(),
        None,
        config.dropout,
        Mode::Eval,
        0,
    )?;
    Ok(TeacherArtifacts {
        params,
        embeddings: eval.hidden,
    })
}

/// Trains the student on the train-mask rows: the mean head against the
/// teacher embeddings with squared error, the lower/upper heads with pinball
/// loss at `alpha/2` and `1 - alpha/2`.
pub fn train_student(
    features: &DMatrix<f64>,
    embeddings: &DMatrix<f64>,
    train_mask: &[bool],
    config: &TrainConfig,
) -> Result<StudentModel> {
    if features.nrows() != embeddings.nrows() {
        return Err(RegeError::dimension(
            "train_student",
            format!("{} rows", features.nrows()),
            format!("{} rows", embeddings.nrows()),
        ));
    }
    if train_mask.len() != features.nrows() {
        return Err(RegeError::dimension(
            "train_student mask",
            format!("{} entries", features.nrows()),
            format!("{} entries", train_mask.len()),
        ));
    }
    let rows: Vec<usize> = (0..features.nrows()).filter(|&i| train_mask[i]).collect();
    if rows.is_empty() {
        return Err(RegeError::parameter("train_mask", "mask selects no rows"));
    }
    let x = features.select_rows(rows.as_slice());
    let z = embeddings.select_rows(rows.as_slice());

    let seed = seeds::derive(config.seed, stream::STUDENT);
    let q_lo = config.alpha / 2.0;
    let q_hi = 1.0 - config.alpha / 2.0;
    let mut params = MlpParams::init(x.ncols(), config.student_hidden, z.ncols(), seed);
    let mut adam = AdamState::new(&params.all_shapes());
    for epoch in 0..config.student_epochs {
        let fseed = seeds::derive2(seed, stream::EPOCH, epoch as u64);
        let out = mlp_forward(&params, &x, config.dropout, Mode::Train, fseed)?;
        let (_, g_mean) = mse_grad(&z, &out.mean)?;
        let (_, g_lower) = quantile_loss_grad(&z, &out.lower, q_lo)?;
        let (_, g_upper) = quantile_loss_grad(&z, &out.upper, q_hi)?;
        let grads = mlp_backward(&params, &out.trace, &g_mean, &g_lower, &g_upper)?;
        let mut slots: Vec<&mut DMatrix<f64>> = params.layers.iter_mut().collect();
        slots.extend(params.heads.iter_mut());
        let grad_refs: Vec<&DMatrix<f64>> =
            grads.layers.iter().chain(grads.heads.iter()).collect();
        let decay = vec![0.0; grad_refs.len()];
        adam_step(&mut slots, &grad_refs, &mut adam, config.student_lr, &decay)?;
    }
    Ok(StudentModel { params })
}

/// Signed distance of `y` outside the interval `[lower, upper]`; negative
/// when covered, positive when outside. Inverted intervals are permitted.
pub fn conformal_score(lower: f64, upper: f64, y: f64) -> f64 {
    (lower - y).max(y - upper)
}

/// The `ceil((m + 1)(1 - alpha)) / m` empirical quantile of the scores,
/// computed as an order statistic. When the index exceeds `m`, the maximum
/// score is returned.
pub fn compute_qhat(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(RegeError::parameter("scores", "no calibration scores"));
    }
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(RegeError::parameter(
            "alpha",
            format!("miscoverage must lie in (0, 1), got {alpha}"),
        ));
    }
    let m = scores.len();
    let k = (((m as f64) + 1.0) * (1.0 - alpha)).ceil() as usize;
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = k.min(m) - 1;
    Ok(sorted[idx])
}

/// Runs the student on the calibration rows and computes per-dimension
/// conformal scores and offsets.
pub fn calibrate(
    student: &StudentModel,
    features: &DMatrix<f64>,
    embeddings: &DMatrix<f64>,
    calibration_mask: &[bool],
    alpha: f64,
) -> Result<ConformalCalibration> {
    let rows: Vec<usize> = (0..features.nrows())
        .filter(|&i| calibration_mask[i])
        .collect();
    if rows.is_empty() {
        return Err(RegeError::parameter(
            "calibration_mask",
            "mask selects no rows",
        ));
    }
    let (_, lower, upper) = student.predict(&features.select_rows(rows.as_slice()))?;
    let z = embeddings.select_rows(rows.as_slice());
    let d = z.ncols();
    let mut scores = vec![Vec::with_capacity(rows.len()); d];
    for r in 0..rows.len() {
        for j in 0..d {
            scores[j].push(conformal_score(lower[(r, j)], upper[(r, j)], z[(r, j)]));
        }
    }
    let q_hat = scores
        .iter()
        .map(|s| compute_qhat(s, alpha))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConformalCalibration {
        alpha,
        scores,
        q_hat,
    })
}

/// Conformalized intervals for every node: the raw student quantiles widened
/// per dimension by the calibration offsets.
pub fn conformal_intervals(
    student: &StudentModel,
    calibration: &ConformalCalibration,
    features: &DMatrix<f64>,
) -> Result<Intervals> {
    let (_, mut lower, mut upper) = student.predict(features)?;
    if lower.ncols() != calibration.q_hat.len() {
        return Err(RegeError::dimension(
            "conformal_intervals",
            format!("{} dimensions", calibration.q_hat.len()),
            format!("{} dimensions", lower.ncols()),
        ));
    }
    for j in 0..lower.ncols() {
        let q = calibration.q_hat[j];
        for i in 0..lower.nrows() {
            lower[(i, j)] -= q;
            upper[(i, j)] += q;
        }
    }
    Ok(Intervals { lower, upper })
}

/// Mean non-negative interval width per node, min-max normalized.
pub fn mdr_radii(intervals: &Intervals) -> RadiusVector {
    let n = intervals.lower.nrows();
    let d = intervals.lower.ncols();
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            (0..d)
                .map(|j| (intervals.upper[(i, j)] - intervals.lower[(i, j)]).max(0.0))
                .sum::<f64>()
                / d as f64
        })
        .collect();
    RadiusVector::new(minmax_normalize(&raw), RadiusKind::Mdr)
        .expect("min-max normalized values lie in [0, 1]")
}

/// End-to-end model-dependent radii for a labeled, masked graph.
pub fn mdr_pipeline(graph: &Graph, config: &TrainConfig) -> Result<RadiusVector> {
    Ok(mdr_pipeline_full(graph, config)?.0)
}

/// Same pipeline, also returning the calibration for diagnostics export.
pub fn mdr_pipeline_full(
    graph: &Graph,
    config: &TrainConfig,
) -> Result<(RadiusVector, ConformalCalibration)> {
    let teacher = train_teacher(graph, config)?;
    let masks = graph.masks().expect("train_teacher verified masks");
    let student = train_student(graph.features(), &teacher.embeddings, &masks.train, config)?;
    // The training rows double as the calibration set.
    let calibration = calibrate(
        &student,
        graph.features(),
        &teacher.embeddings,
        &masks.train,
        config.alpha,
    )?;
    let intervals = conformal_intervals(&student, &calibration, graph.features())?;
    Ok((mdr_radii(&intervals), calibration))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conformal_score_examples() {
        assert_eq!(conformal_score(0.0, 1.0, 1.5), 0.5);
        assert_eq!(conformal_score(0.0, 1.0, 0.5), -0.5);
        assert!(conformal_score(0.0, 1.0, 0.7) <= 0.0);
        // inverted interval still produces a score
        assert_eq!(conformal_score(1.0, 0.0, 0.5), 0.5);
    }

    #[test]
    fn qhat_order_statistic_examples() {
        // m = 9, alpha = 0.1: k = ceil(10 * 0.9) = 9 -> ninth smallest = 0.9
        let scores: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        assert!((compute_qhat(&scores, 0.1).unwrap() - 0.9).abs() < 1e-15);
        // m = 19, alpha = 0.05: k = ceil(20 * 0.95) = 19 -> max
        let scores: Vec<f64> = (1..=19).map(|i| i as f64).collect();
        assert_eq!(compute_qhat(&scores, 0.05).unwrap(), 19.0);
        // constant scores
        assert_eq!(compute_qhat(&[2.5; 7], 0.3).unwrap(), 2.5);
        assert!(compute_qhat(&[], 0.1).is_err());
    }

    #[test]
    fn qhat_clamps_to_max_when_index_exceeds_m() {
        // m = 3, alpha = 0.05: ceil(4 * 0.95) = 4 > 3 -> max score
        assert_eq!(compute_qhat(&[1.0, 5.0, 3.0], 0.05).unwrap(), 5.0);
    }

    #[test]
    fn qhat_monotone_in_added_scores() {
        let base = vec![0.1, 0.4, 0.2, 0.9, 0.3];
        let q0 = compute_qhat(&base, 0.2).unwrap();
        let mut bigger = base.clone();
        bigger.push(5.0);
        let q1 = compute_qhat(&bigger, 0.2).unwrap();
        assert!(q1 >= q0);
    }

    #[test]
    fn intervals_widen_by_exactly_two_qhat() {
        let student = StudentModel {
            params: MlpParams::init(3, 8, 2, 0),
        };
        let features = DMatrix::from_element(4, 3, 0.5);
        let (_, lo_raw, hi_raw) = student.predict(&features).unwrap();
        let calibration = ConformalCalibration {
            alpha: 0.05,
            scores: vec![vec![], vec![]],
            q_hat: vec![0.25, 0.0],
        };
        let iv = conformal_intervals(&student, &calibration, &features).unwrap();
        for i in 0..4 {
            let w_raw0 = hi_raw[(i, 0)] - lo_raw[(i, 0)];
            let w_new0 = iv.upper[(i, 0)] - iv.lower[(i, 0)];
            assert!((w_new0 - (w_raw0 + 0.5)).abs() < 1e-12);
            // q_hat = 0 leaves dimension 1 untouched
            assert_eq!(iv.lower[(i, 1)], lo_raw[(i, 1)]);
            assert_eq!(iv.upper[(i, 1)], hi_raw[(i, 1)]);
        }
    }

    #[test]
    fn mdr_radii_degenerate_and_argmax() {
        // all intervals identical -> all radii zero
        let iv = Intervals {
            lower: DMatrix::from_element(3, 2, 0.0),
            upper: DMatrix::from_element(3, 2, 1.0),
        };
        assert_eq!(mdr_radii(&iv).values(), &[0.0, 0.0, 0.0]);

        // one node strictly wider in every dimension -> radius 1
        let mut upper = DMatrix::from_element(3, 2, 1.0);
        upper[(1, 0)] = 3.0;
        upper[(1, 1)] = 3.0;
        let iv = Intervals {
            lower: DMatrix::from_element(3, 2, 0.0),
            upper,
        };
        let r = mdr_radii(&iv);
        assert_eq!(r.get(1), 1.0);
        assert_eq!(r.get(0), 0.0);
    }

    #[test]
    fn mdr_radii_rank_invariant_under_uniform_scaling() {
        let lower = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, -1.0, 0.5, 0.2, 0.1]);
        let upper = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 3.0, 0.4, 0.3]);
        let r1 = mdr_radii(&Intervals {
            lower: lower.clone(),
            upper: upper.clone(),
        });
        let r2 = mdr_radii(&Intervals {
            lower: &lower * 7.0,
            upper: &upper * 7.0,
        });
        let rank = |r: &RadiusVector| {
            let mut idx: Vec<usize> = (0..r.len()).collect();
            idx.sort_by(|&a, &b| r.get(a).total_cmp(&r.get(b)));
            idx
        };
        assert_eq!(rank(&r1), rank(&r2));
    }
}
