//! Consensus matrix and node uncertainty radii.
//!
//! The consensus matrix `W` averages binary views: entry `(i, j)` is the
//! fraction of views in which edge `(i, j)` appears. A row whose entries sit
//! near 0 or 1 describes a node whose neighborhood is reconstructed
//! consistently; entries near 0.5 flag maximal uncertainty. Three row
//! aggregations are provided (binary deviation, standard deviation, entropy);
//! every radius vector is min-max normalized to `[0, 1]`.

use nalgebra::DMatrix;

use crate::error::{RegeError, Result};
use crate::graph::Graph;
use crate::spectral::ViewSequence;

/// Aggregation used to turn consensus rows into radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusKind {
    Ddr,
    Mdr,
    Stddev,
    Entropy,
}

impl RadiusKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RadiusKind::Ddr => "ddr",
            RadiusKind::Mdr => "mdr",
            RadiusKind::Stddev => "stddev",
            RadiusKind::Entropy => "entropy",
        }
    }
}

impl std::str::FromStr for RadiusKind {
    type Err = RegeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddr" => Ok(RadiusKind::Ddr),
            "mdr" => Ok(RadiusKind::Mdr),
            "stddev" => Ok(RadiusKind::Stddev),
            "entropy" => Ok(RadiusKind::Entropy),
            other => Err(RegeError::parameter(
                "kind",
                format!("unknown radius kind `{other}`"),
            )),
        }
    }
}

/// Per-node uncertainty values in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct RadiusVector {
    values: Vec<f64>,
    kind: RadiusKind,
}

impl RadiusVector {
    pub fn new(values: Vec<f64>, kind: RadiusKind) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(RegeError::parameter(
                    "radii",
                    format!("radius {v} at node {i} is outside [0, 1]"),
                ));
            }
        }
        Ok(RadiusVector { values, kind })
    }

    pub fn zeros(n: usize, kind: RadiusKind) -> Self {
        RadiusVector {
            values: vec![0.0; n],
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> RadiusKind {
        self.kind
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// Symmetric matrix of edge appearance frequencies, zero diagonal, entries in
/// `[0, 1]`.
#[derive(Debug, Clone)]
pub struct ConsensusMatrix {
    w: DMatrix<f64>,
}

impl ConsensusMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }
}

/// Elementwise mean of the views.
pub fn consensus(views: &ViewSequence) -> Result<ConsensusMatrix> {
    mean_of(views.views().iter())
}

/// Elementwise mean of the views together with the original adjacency. The
/// consensus is taken over the graph and all of its reconstructions, so the
/// observed edges weigh in alongside the spectral evidence.
pub fn consensus_with_graph(views: &ViewSequence, graph: &Graph) -> Result<ConsensusMatrix> {
    mean_of(views.views().iter().chain(std::iter::once(graph.adjacency())))
}

fn mean_of<'a>(views: impl Iterator<Item = &'a DMatrix<f64>>) -> Result<ConsensusMatrix> {
    let mut acc: Option<DMatrix<f64>> = None;
    let mut count = 0usize;
    for v in views {
        match acc.as_mut() {
            Some(a) => *a += v,
            None => acc = Some(v.clone()),
        }
        count += 1;
    }
    let mut w = acc.ok_or_else(|| RegeError::parameter("views", "view sequence is empty"))?;
    w /= count as f64;
    Ok(ConsensusMatrix { w })
}

/// Min-max rescaling to `[0, 1]`; a constant vector maps to all zeros.
pub fn minmax_normalize(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Binary-deviation radii: `r_i = 1 - mean_j |W_ij - (1 - W_ij)|` over the
/// whole row, then min-max normalized. A row of 0.5s gives the raw maximum 1;
/// rows of pure 0s or 1s give 0.
pub fn binary_deviation_radii(w: &ConsensusMatrix) -> RadiusVector {
    let raw = binary_deviation_raw(w);
    RadiusVector {
        values: minmax_normalize(&raw),
        kind: RadiusKind::Ddr,
    }
}

/// Raw binary deviation of a single row: `1 - mean_j |w_j - (1 - w_j)|`.
/// Exactly 1 for a row of 0.5s, exactly 0 for a row of pure 0s or 1s.
pub fn binary_deviation_of_row(row: &[f64]) -> f64 {
    let dev: f64 = row.iter().map(|w| (w - (1.0 - w)).abs()).sum();
    1.0 - dev / row.len() as f64
}

/// Raw (unnormalized) binary deviation per row.
pub fn binary_deviation_raw(w: &ConsensusMatrix) -> Vec<f64> {
    let n = w.n();
    (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..n).map(|j| w.w[(i, j)]).collect();
            binary_deviation_of_row(&row)
        })
        .collect()
}

/// Population standard deviation of each consensus row, min-max normalized.
pub fn stddev_radii(w: &ConsensusMatrix) -> RadiusVector {
    let n = w.n();
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let row = w.w.row(i);
            let mean = row.sum() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            var.sqrt()
        })
        .collect();
    RadiusVector {
        values: minmax_normalize(&raw),
        kind: RadiusKind::Stddev,
    }
}

/// Mean binary entropy of each consensus row (log base 2 so that
/// `H(0.5) = 1`), min-max normalized.
pub fn entropy_radii(w: &ConsensusMatrix) -> RadiusVector {
    let n = w.n();
    let raw: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| binary_entropy(w.w[(i, j)])).sum::<f64>() / n as f64)
        .collect();
    RadiusVector {
        values: minmax_normalize(&raw),
        kind: RadiusKind::Entropy,
    }
}

fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Variant that averages binary deviation only over cells incident to actual
/// edges of the reference graph, exposed for experimentation.
pub fn binary_deviation_radii_incident(w: &ConsensusMatrix, graph: &Graph) -> RadiusVector {
    let n = w.n();
    let adj = graph.adjacency();
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for j in 0..n {
                if adj[(i, j)] > 0.0 {
                    sum += 1.0 - (w.w[(i, j)] - (1.0 - w.w[(i, j)])).abs();
                    count += 1;
                }
            }
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect();
    RadiusVector {
        values: minmax_normalize(&raw),
        kind: RadiusKind::Ddr,
    }
}
