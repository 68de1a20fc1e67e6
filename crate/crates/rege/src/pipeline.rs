//! Method orchestration: wiring radii computation into the training
//! variants. This is the layer the CLI and the experiment runner call.

use crate::error::{RegeError, Result};
use crate::graph::Graph;
use crate::mdr;
use crate::nn::GcnParams;
use crate::radii::{
    binary_deviation_radii, consensus_with_graph, entropy_radii, stddev_radii, RadiusKind,
    RadiusVector,
};
use crate::spectral::{eigendecompose, generate_views_from, EigenDecomposition, ViewSequence};
use crate::trainer::{curriculum_train, train_baseline, train_nct, TrainConfig, TrainReport};

/// The training variants exposed by the command line and experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Baseline,
    RegeD,
    RegeM,
    NctD,
    NctM,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::RegeD => "rege-d",
            Method::RegeM => "rege-m",
            Method::NctD => "nct-d",
            Method::NctM => "nct-m",
        }
    }

    pub const ALL: [Method; 5] = [
        Method::Baseline,
        Method::RegeD,
        Method::RegeM,
        Method::NctD,
        Method::NctM,
    ];
}

impl std::str::FromStr for Method {
    type Err = RegeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "rege-d" => Ok(Method::RegeD),
            "rege-m" => Ok(Method::RegeM),
            "nct-d" => Ok(Method::NctD),
            "nct-m" => Ok(Method::NctM),
            other => Err(RegeError::parameter(
                "method",
                format!("unknown method `{other}`"),
            )),
        }
    }
}

/// Decomposition plus the derived view sequence, computed once and shared.
pub struct SpectralArtifacts {
    pub decomposition: EigenDecomposition,
    pub views: ViewSequence,
}

pub fn spectral_artifacts(graph: &Graph, config: &TrainConfig) -> Result<SpectralArtifacts> {
    let decomposition = eigendecompose(graph)?;
    let views = generate_views_from(&decomposition, config.q_min, config.component_step)?;
    Ok(SpectralArtifacts {
        decomposition,
        views,
    })
}

/// Data-dependent radii from precomputed views: consensus over the graph
/// and all of its reconstructions, then binary deviation.
pub fn ddr_from_artifacts(artifacts: &SpectralArtifacts, graph: &Graph) -> Result<RadiusVector> {
    let w = consensus_with_graph(&artifacts.views, graph)?;
    Ok(binary_deviation_radii(&w))
}

/// End-to-end data-dependent radii.
pub fn ddr_radii(graph: &Graph, q_min: usize, step: usize) -> Result<RadiusVector> {
    let mut cfg = TrainConfig::default();
    cfg.q_min = q_min;
    cfg.component_step = step;
    let artifacts = spectral_artifacts(graph, &cfg)?;
    ddr_from_artifacts(&artifacts, graph)
}

/// Radii of any kind, computed end to end. Model-dependent radii require a
/// labeled, masked graph.
pub fn radii_of_kind(graph: &Graph, kind: RadiusKind, config: &TrainConfig) -> Result<RadiusVector> {
    match kind {
        RadiusKind::Ddr => {
            let artifacts = spectral_artifacts(graph, config)?;
            ddr_from_artifacts(&artifacts, graph)
        }
        RadiusKind::Stddev => {
            let artifacts = spectral_artifacts(graph, config)?;
            let w = consensus_with_graph(&artifacts.views, graph)?;
            Ok(stddev_radii(&w))
        }
        RadiusKind::Entropy => {
            let artifacts = spectral_artifacts(graph, config)?;
            let w = consensus_with_graph(&artifacts.views, graph)?;
            Ok(entropy_radii(&w))
        }
        RadiusKind::Mdr => mdr::mdr_pipeline(graph, config),
    }
}

/// Trains a method end to end; computes whatever artifacts it needs.
pub fn train_method(
    graph: &Graph,
    method: Method,
    config: &TrainConfig,
) -> Result<(GcnParams, TrainReport)> {
    let needs_spectral = matches!(method, Method::RegeD | Method::RegeM);
    let artifacts = if needs_spectral {
        Some(spectral_artifacts(graph, config)?)
    } else {
        None
    };
    let ddr = if matches!(method, Method::RegeD | Method::NctD) {
        match &artifacts {
            Some(a) => Some(ddr_from_artifacts(a, graph)?),
            None => {
                let a = spectral_artifacts(graph, config)?;
                Some(ddr_from_artifacts(&a, graph)?)
            }
        }
    } else {
        None
    };
    let mdr = if matches!(method, Method::RegeM | Method::NctM) {
        Some(mdr::mdr_pipeline(graph, config)?)
    } else {
        None
    };
    train_prepared(graph, method, artifacts.as_ref(), ddr.as_ref(), mdr.as_ref(), config)
}

/// Trains a method from precomputed artifacts (used by the experiment
/// runner to share radii across methods). Degenerate edgeless views are
/// dropped from the curriculum; they still participate in the consensus.
pub fn train_prepared(
    graph: &Graph,
    method: Method,
    artifacts: Option<&SpectralArtifacts>,
    ddr: Option<&RadiusVector>,
    mdr: Option<&RadiusVector>,
    config: &TrainConfig,
) -> Result<(GcnParams, TrainReport)> {
    let radii_for = |kind: &str| -> Result<&RadiusVector> {
        match kind {
            "ddr" => ddr.ok_or_else(|| {
                RegeError::Precondition("method needs data-dependent radii".to_string())
            }),
            _ => mdr.ok_or_else(|| {
                RegeError::Precondition("method needs model-dependent radii".to_string())
            }),
        }
    };
    match method {
        Method::Baseline => train_baseline(graph, config),
        Method::RegeD | Method::RegeM => {
            let artifacts = artifacts.ok_or_else(|| {
                RegeError::Precondition("curriculum methods need spectral views".to_string())
            })?;
            let radii = if method == Method::RegeD {
                radii_for("ddr")?
            } else {
                radii_for("mdr")?
            };
            let training_views = artifacts
                .views
                .retain_informative(crate::trainer::informative_view_threshold(graph));
            if training_views.is_empty() {
                return Err(RegeError::Precondition(
                    "every reconstructed view is degenerate".to_string(),
                ));
            }
            curriculum_train(graph, &training_views, radii, config)
        }
        Method::NctD => train_nct(graph, radii_for("ddr")?, config),
        Method::NctM => train_nct(graph, radii_for("mdr")?, config),
    }
}
