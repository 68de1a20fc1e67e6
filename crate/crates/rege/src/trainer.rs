//! Curriculum training with radius noise, the no-curriculum ablation, the
//! plain baseline, and evaluation.
//!
//! One parameter set is initialized once and trained sequentially over the
//! view schedule (warm start). After each stage the model is scored on the
//! original graph's validation nodes; the checkpoint with the highest
//! validation accuracy is returned (ties go to the later, more-trained
//! stage), and training stops early once `patience` consecutive stages
//! bring no strict improvement. Optimizer moments reset at stage
//! boundaries; parameters carry over.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{RegeError, Result};
use crate::graph::{symmetric_normalize, Graph, NormalizedAdjacency};
use crate::nn::{
    adam_step, cross_entropy_grad, cross_entropy_loss, gcn_backward, gcn_forward, AdamState,
    GcnParams, Mode,
};
use crate::radii::RadiusVector;
use crate::seeds::{self, stream};
use crate::spectral::{generate_views, ViewSequence};

/// Hyperparameters for the full pipeline. Defaults follow the usual
/// two-layer GCN recipe (16 hidden units, dropout 0.5, Adam at 0.01 with
/// 5e-4 decay on the first layer) with 100 epochs per view and a patience of
/// 25 views.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs_per_view: usize,
    pub patience_views: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub alpha: f64,
    pub q_min: usize,
    pub component_step: usize,
    pub seed: u64,
    /// Epoch budget for the plain baseline (a single stage).
    pub baseline_epochs: usize,
    /// Stage count for the no-curriculum variant; `None` matches the number
    /// of non-degenerate views the curriculum would train on.
    pub nct_stages: Option<usize>,
    pub teacher_epochs: usize,
    pub student_epochs: usize,
    pub student_lr: f64,
    pub student_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs_per_view: 100,
            patience_views: 25,
            hidden: 16,
            dropout: 0.5,
            lr: 0.01,
            weight_decay: 5e-4,
            alpha: 0.05,
            q_min: 5,
            component_step: 5,
            seed: 42,
            baseline_epochs: 200,
            nct_stages: None,
            teacher_epochs: 200,
            student_epochs: 150,
            student_lr: 1e-3,
            student_hidden: 1024,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs_per_view == 0
            || self.patience_views == 0
            || self.hidden == 0
            || self.q_min == 0
            || self.component_step == 0
            || self.baseline_epochs == 0
            || self.teacher_epochs == 0
            || self.student_epochs == 0
            || self.student_hidden == 0
        {
            return Err(RegeError::parameter("config", "counts must be positive"));
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(RegeError::parameter("dropout", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.alpha) || self.alpha == 0.0 {
            return Err(RegeError::parameter("alpha", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// One row of the per-view history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewRecord {
    pub view_index: usize,
    pub components: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Training history plus the outcome. Wall-clock time is kept for console
/// reporting but excluded from serialized output so emitted files stay
/// byte-identical across reruns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<ViewRecord>,
    pub best_view: usize,
    pub stopped_early: bool,
    pub final_test_accuracy: Option<f64>,
    pub config: TrainConfig,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

struct Stage<'a> {
    adjacency: &'a DMatrix<f64>,
    components: usize,
    epochs: usize,
}

/// Shared training engine. Validation is always measured on the original
/// graph in eval mode (no noise, no dropout). The returned parameters are
/// the checkpoint with the highest validation accuracy; on ties the later
/// stage wins, since small validation sets make accuracy a coarse selector
/// and the later checkpoint has seen more training.
fn run_schedule(
    graph: &Graph,
    stages: &[Stage<'_>],
    radii: Option<&RadiusVector>,
    config: &TrainConfig,
) -> Result<(GcnParams, TrainReport)> {
    config.validate()?;
    let labels = graph
        .labels()
        .ok_or_else(|| RegeError::Precondition("training requires labels".to_string()))?;
    let masks = graph
        .masks()
        .ok_or_else(|| RegeError::Precondition("training requires masks".to_string()))?;
    if let Some(r) = radii {
        if r.len() != graph.n() {
            return Err(RegeError::Precondition(format!(
                "radii length {} does not match n = {}",
                r.len(),
                graph.n()
            )));
        }
    }
    if stages.is_empty() {
        return Err(RegeError::parameter("views", "no training stages"));
    }

    let start = std::time::Instant::now();
    let a_hat_orig = symmetric_normalize(graph);
    let mut params = GcnParams::init(
        graph.features().ncols(),
        config.hidden,
        graph.num_classes(),
        config.seed,
    );
    let mut best_params = params.clone();
    let mut best_accuracy = -1.0f64;
    let mut best_view = 0usize;
    let mut stale = 0usize;
    let mut stopped_early = false;
    let mut records = Vec::with_capacity(stages.len());
    let mut global_epoch = 0u64;

    for (stage_idx, stage) in stages.iter().enumerate() {
        let a_hat = NormalizedAdjacency::from_view(stage.adjacency);
        let mut adam = AdamState::new(&[params.w1.shape(), params.w2.shape()]);
        let mut train_loss = f64::NAN;
        for _ in 0..stage.epochs {
            let fseed = seeds::derive2(config.seed, stream::EPOCH, global_epoch);
            global_epoch += 1;
            let out = gcn_forward(
                &params,
                &a_hat,
                graph.features(),
                radii,
                config.dropout,
                Mode::Train,
                fseed,
            )?;
            let (loss, grad) = cross_entropy_grad(&out.logits, labels, &masks.train)?;
            train_loss = loss;
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
            &a_hat_orig,
            graph.features(),
            None,
            config.dropout,
            Mode::Eval,
            0,
        )?;
        let val_loss = cross_entropy_loss(&eval.logits, labels, &masks.val)?;
        let val_accuracy = accuracy_of_logits(&eval.logits, labels, &masks.val)?;
        records.push(ViewRecord {
            view_index: stage_idx,
            components: stage.components,
            train_loss,
            val_loss,
            val_accuracy,
        });

        if val_accuracy >= best_accuracy {
            let improved = val_accuracy > best_accuracy;
            best_accuracy = val_accuracy;
            best_params = params.clone();
            best_view = stage_idx;
            if improved {
                stale = 0;
                continue;
            }
        }
        stale += 1;
        if stale >= config.patience_views {
            stopped_early = true;
            break;
        }
    }

    Ok((
        best_params,
        TrainReport {
            records,
            best_view,
            stopped_early,
            final_test_accuracy: None,
            config: config.clone(),
            wall_clock_secs: start.elapsed().as_secs_f64(),
        },
    ))
}

impl NormalizedAdjacency {
    /// Normalizes a reconstructed view the same way as the original graph.
    pub fn from_view(view: &DMatrix<f64>) -> Self {
        crate::graph::normalized_from_matrix(view)
    }
}

/// A view below this edge count carries no usable training signal: one
/// percent of the graph's edges, at least one.
pub fn informative_view_threshold(graph: &Graph) -> usize {
    (graph.num_edges() / 100).max(1)
}

/// Trains over the view sequence in ascending component order with radius
/// noise. Views are trained as given; callers typically drop degenerate
/// views first (see [`ViewSequence::retain_informative`]).
pub fn curriculum_train(
    graph: &Graph,
    views: &ViewSequence,
    radii: &RadiusVector,
    config: &TrainConfig,
) -> Result<(GcnParams, TrainReport)> {
    let stages: Vec<Stage<'_>> = views
        .iter()
        .map(|(components, adjacency)| Stage {
            adjacency,
            components,
            epochs: config.epochs_per_view,
        })
        .collect();
    run_schedule(graph, &stages, Some(radii), config)
}

/// No-curriculum ablation: radius noise on, but every stage trains on the
/// original graph. The stage count defaults to the number of informative
/// views the curriculum would see, so gradient-step budgets match.
pub fn train_nct(
    graph: &Graph,
    radii: &RadiusVector,
    config: &TrainConfig,
) -> Result<(GcnParams, TrainReport)> {
    let stage_count = match config.nct_stages {
        Some(k) if k > 0 => k,
        Some(_) => return Err(RegeError::parameter("nct_stages", "must be positive")),
        None => {
            let views = generate_views(graph, config.q_min, config.component_step)?;
            views
                .count_informative(informative_view_threshold(graph))
                .max(1)
        }
    };
    let n = graph.n();
    let stages: Vec<Stage<'_>> = (0..stage_count)
        .map(|_| Stage {
            adjacency: graph.adjacency(),
            components: n,
            epochs: config.epochs_per_view,
        })
        .collect();
    run_schedule(graph, &stages, Some(radii), config)
}

/// Plain GCN training on the original graph: dropout only, no noise, one
/// stage of `baseline_epochs` epochs.
pub fn train_baseline(graph: &Graph, config: &TrainConfig) -> Result<(GcnParams, TrainReport)> {
    let stages = [Stage {
        adjacency: graph.adjacency(),
        components: graph.n(),
        epochs: config.baseline_epochs,
    }];
    run_schedule(graph, &stages, None, config)
}

/// Fraction of masked nodes whose argmax logit matches the label. Ties break
/// toward the lowest class index.
pub fn accuracy_of_logits(logits: &DMatrix<f64>, labels: &[usize], mask: &[bool]) -> Result<f64> {
    if labels.len() != logits.nrows() || mask.len() != logits.nrows() {
        return Err(RegeError::dimension(
            "accuracy",
            format!("{} rows", logits.nrows()),
            format!("{} labels, {} mask", labels.len(), mask.len()),
        ));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for i in 0..logits.nrows() {
        if !mask[i] {
            continue;
        }
        total += 1;
        let row = logits.row(i);
        let mut arg = 0usize;
        let mut best = row[0];
        for (j, &v) in row.iter().enumerate().skip(1) {
            if v > best {
                best = v;
                arg = j;
            }
        }
        if arg == labels[i] {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(RegeError::parameter("mask", "mask selects no nodes"));
    }
    Ok(hits as f64 / total as f64)
}

/// Eval-mode accuracy of a parameter set on the given graph.
pub fn evaluate(params: &GcnParams, graph: &Graph, mask: &[bool]) -> Result<f64> {
    let labels = graph
        .labels()
        .ok_or_else(|| RegeError::Precondition("evaluation requires labels".to_string()))?;
    let a_hat = symmetric_normalize(graph);
    let out = gcn_forward(params, &a_hat, graph.features(), None, 0.0, Mode::Eval, 0)?;
    accuracy_of_logits(&out.logits, labels, mask)
}
