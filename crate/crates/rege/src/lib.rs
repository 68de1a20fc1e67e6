//! Radius-enhanced graph embeddings.
//!
//! This crate quantifies per-node uncertainty in a graph two ways and feeds
//! it back into training:
//!
//! - **Data-dependent radii (DDR).** The adjacency matrix is eigendecomposed
//!   and regenerated from an increasing number of leading components. Edges
//!   that flicker across these reconstructions are uncertain; a consensus
//!   matrix aggregates them and a binary-deviation function turns its rows
//!   into per-node radii.
//! - **Model-dependent radii (MDR).** A GCN teacher is distilled into a
//!   feature-only student that also predicts per-dimension quantile ranges;
//!   conformal calibration widens those ranges to guaranteed coverage, and
//!   the mean interval width per node is its radius.
//!
//! Radii enter training as per-node Gaussian noise on the hidden layers
//! while the model walks a curriculum over the reconstructed views, which
//! hardens node classification against structural perturbation. A harness
//! for random and label-aware attacks plus an experiment grid runner round
//! out the pipeline.

pub mod error;
pub mod graph;
pub mod io;
pub mod mdr;
pub mod nn;
pub mod perturb;
pub mod pipeline;
pub mod radii;
pub mod seeds;
pub mod spectral;
pub mod trainer;

pub use error::{RegeError, Result};
pub use graph::{generate_sbm, karate, load_graph, symmetric_normalize, Graph, Masks, NormalizedAdjacency};
pub use pipeline::Method;
pub use radii::{RadiusKind, RadiusVector};
pub use trainer::{evaluate, TrainConfig, TrainReport};
