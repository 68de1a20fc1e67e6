//! Graph data model, dataset ingestion and synthetic generation.
//!
//! A [`Graph`] is a dense symmetric binary adjacency matrix with node
//! features, optional labels and optional train/val/test masks. Datasets are
//! ingested from plain-text edge lists (one `u v` pair per line, `#` comments
//! ignored) with optional CSV feature/label/split files keyed by node id.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{RegeError, Result};
use crate::seeds::{self, stream};

/// Train/val/test membership. The three masks are pairwise disjoint.
#[derive(Debug, Clone)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn new(train: Vec<bool>, val: Vec<bool>, test: Vec<bool>) -> Result<Self> {
        let n = train.len();
        if val.len() != n || test.len() != n {
            return Err(RegeError::dimension(
                "masks",
                format!("three vectors of length {n}"),
                format!("{}/{}/{}", train.len(), val.len(), test.len()),
            ));
        }
        for i in 0..n {
            let count = train[i] as u8 + val[i] as u8 + test[i] as u8;
            if count > 1 {
                return Err(RegeError::Precondition(format!(
                    "node {i} belongs to more than one split"
                )));
            }
        }
        Ok(Masks { train, val, test })
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }
}

/// Undirected, unweighted graph over nodes `0..n` with dense adjacency.
///
/// Invariants held by construction: the adjacency is symmetric with entries
/// in `{0, 1}` and a zero diagonal; features have one row per node; labels
/// (when present) have one entry per node.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: DMatrix<f64>,
    features: DMatrix<f64>,
    labels: Option<Vec<usize>>,
    masks: Option<Masks>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Edges are symmetrized,
    /// duplicates collapse, self-loops are dropped. Features default to the
    /// identity matrix.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = DMatrix::zeros(n, n);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(RegeError::parameter(
                    "edges",
                    format!("edge ({u}, {v}) out of range for n = {n}"),
                ));
            }
            if u == v {
                continue;
            }
            adjacency[(u, v)] = 1.0;
            adjacency[(v, u)] = 1.0;
        }
        Ok(Graph {
            adjacency,
            features: DMatrix::identity(n, n),
            labels: None,
            masks: None,
        })
    }

    /// Builds a graph directly from an adjacency matrix, validating the
    /// Graph invariants (symmetry, binary entries, zero diagonal).
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(RegeError::dimension(
                "adjacency",
                format!("{n}x{n}"),
                format!("{}x{}", adjacency.nrows(), adjacency.ncols()),
            ));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(RegeError::Precondition(format!(
                    "adjacency has nonzero diagonal at {i}"
                )));
            }
            for j in 0..n {
                let a = adjacency[(i, j)];
                if a != 0.0 && a != 1.0 {
                    return Err(RegeError::Precondition(format!(
                        "adjacency entry ({i}, {j}) = {a} is not binary"
                    )));
                }
                if a != adjacency[(j, i)] {
                    return Err(RegeError::Precondition(format!(
                        "adjacency is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Graph {
            features: DMatrix::identity(n, n),
            adjacency,
            labels: None,
            masks: None,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn masks(&self) -> Option<&Masks> {
        self.masks.as_ref()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        let mut count = 0;
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                if self.adjacency[(i, j)] > 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency.row(node).iter().filter(|&&a| a > 0.0).count()
    }

    /// Number of distinct classes (0 when unlabeled).
    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |m| m + 1))
            .unwrap_or(0)
    }

    /// Canonical edge list: pairs `(u, v)` with `u < v`, lexicographically
    /// sorted. Exports and round-trips use this ordering.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                if self.adjacency[(i, j)] > 0.0 {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    pub fn with_features(mut self, features: DMatrix<f64>) -> Result<Self> {
        if features.nrows() != self.n() {
            return Err(RegeError::dimension(
                "features",
                format!("{} rows", self.n()),
                format!("{} rows", features.nrows()),
            ));
        }
        self.features = features;
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(RegeError::dimension(
                "labels",
                format!("{} entries", self.n()),
                format!("{} entries", labels.len()),
            ));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_masks(mut self, masks: Masks) -> Result<Self> {
        if masks.len() != self.n() {
            return Err(RegeError::dimension(
                "masks",
                format!("{} entries", self.n()),
                format!("{} entries", masks.len()),
            ));
        }
        self.masks = Some(masks);
        Ok(self)
    }

    /// Replaces the adjacency, keeping features/labels/masks. Used by the
    /// perturbation harness.
    pub(crate) fn replace_adjacency(mut self, adjacency: DMatrix<f64>) -> Result<Self> {
        if adjacency.nrows() != self.n() {
            return Err(RegeError::dimension(
                "adjacency",
                format!("{}x{}", self.n(), self.n()),
                format!("{}x{}", adjacency.nrows(), adjacency.ncols()),
            ));
        }
        self.adjacency = adjacency;
        Ok(self)
    }

    /// Assigns a seeded random split of the labeled nodes. Fractions refer to
    /// the labeled node count; the remainder goes to the test mask.
    pub fn with_random_split(self, frac_train: f64, frac_val: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&frac_train)
            || !(0.0..=1.0).contains(&frac_val)
            || frac_train + frac_val > 1.0
        {
            return Err(RegeError::parameter(
                "split fractions",
                format!("train {frac_train} + val {frac_val} must lie in [0, 1]"),
            ));
        }
        let n = self.n();
        let labeled: Vec<usize> = match &self.labels {
            Some(_) => (0..n).collect(),
            None => {
                return Err(RegeError::Precondition(
                    "cannot split an unlabeled graph".to_string(),
                ))
            }
        };
        let mut order = labeled;
        let mut rng = seeds::rng(seed, stream::SPLIT);
        // Fisher-Yates; ChaCha makes it platform-stable.
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let n_train = ((order.len() as f64) * frac_train).floor().max(1.0) as usize;
        let n_val = ((order.len() as f64) * frac_val).floor().max(1.0) as usize;
        let mut train = vec![false; n];
        let mut val = vec![false; n];
        let mut test = vec![false; n];
        for (rank, &node) in order.iter().enumerate() {
            if rank < n_train {
                train[node] = true;
            } else if rank < n_train + n_val {
                val[node] = true;
            } else {
                test[node] = true;
            }
        }
        self.with_masks(Masks::new(train, val, test)?)
    }
}

/// Symmetrically normalized propagation operator with self-loops.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    matrix: DMatrix<f64>,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Adds self-loops and rescales: `D^{-1/2} (A + I) D^{-1/2}` where `D` is the
/// degree matrix of `A + I`. Every degree is at least 1, so this never
/// divides by zero.
pub fn symmetric_normalize(graph: &Graph) -> NormalizedAdjacency {
    NormalizedAdjacency {
        matrix: symmetric_normalize_matrix(graph.adjacency()),
    }
}

/// Reads an edge-list file whose tokens are already dense indices, as
/// produced by this crate's exports. Used to feed pre-perturbed graphs back
/// into a dataset without re-mapping identifiers.
pub fn load_edge_pairs_indexed(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| RegeError::io(path, e))?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| RegeError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("expected two integer node indices, got `{line}`"),
                })
        };
        let u = parse(parts.next())?;
        let v = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(RegeError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("expected two node indices, got `{line}`"),
            });
        }
        edges.push((u, v));
    }
    Ok(edges)
}

impl Graph {
    /// Rebuilds the adjacency from the given edges, keeping features,
    /// labels and masks.
    pub fn with_replaced_edges(self, edges: &[(usize, usize)]) -> Result<Self> {
        let n = self.n();
        let fresh = Graph::from_edges(n, edges)?;
        self.replace_adjacency(fresh.adjacency.clone())
    }
}

/// Normalizes an arbitrary view matrix into a propagation operator.
pub(crate) fn normalized_from_matrix(view: &DMatrix<f64>) -> NormalizedAdjacency {
    NormalizedAdjacency {
        matrix: symmetric_normalize_matrix(view),
    }
}

/// Matrix-level variant used on reconstructed views.
pub fn symmetric_normalize_matrix(adjacency: &DMatrix<f64>) -> DMatrix<f64> {
    let n = adjacency.nrows();
    let mut with_loops = adjacency.clone();
    for i in 0..n {
        with_loops[(i, i)] += 1.0;
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| 1.0 / with_loops.row(i).sum().sqrt())
        .collect();
    for i in 0..n {
        for j in 0..n {
            with_loops[(i, j)] *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
    }
    with_loops
}

/// Stochastic block model with near-even blocks and block ids as labels.
/// Deterministic for a fixed seed.
pub fn generate_sbm(
    n: usize,
    num_blocks: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<Graph> {
    if n == 0 || num_blocks == 0 || num_blocks > n {
        return Err(RegeError::parameter(
            "num_blocks",
            format!("need 1 <= blocks <= n, got blocks = {num_blocks}, n = {n}"),
        ));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(RegeError::parameter(
            "p_in/p_out",
            "probabilities must lie in [0, 1]",
        ));
    }
    if p_out > p_in {
        return Err(RegeError::parameter(
            "p_out",
            format!("p_out ({p_out}) exceeds p_in ({p_in})"),
        ));
    }
    // Remainder nodes spread across the first blocks.
    let base = n / num_blocks;
    let extra = n % num_blocks;
    let mut labels = Vec::with_capacity(n);
    for b in 0..num_blocks {
        let size = base + usize::from(b < extra);
        labels.extend(std::iter::repeat(b).take(size));
    }
    let mut rng = seeds::rng(seed, stream::SBM);
    let mut adjacency = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                adjacency[(i, j)] = 1.0;
                adjacency[(j, i)] = 1.0;
            }
        }
    }
    Graph::from_adjacency(adjacency)?.with_labels(labels)
}

/// Zachary's karate club: 34 nodes, 78 edges, two-faction labels
/// (instructor's side = 0, president's side = 1).
pub fn karate() -> Graph {
    const EDGES: [(usize, usize); 78] = [
        (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6),
        (0, 7), (0, 8), (0, 10), (0, 11), (0, 12), (0, 13),
        (0, 17), (0, 19), (0, 21), (0, 31), (1, 2), (1, 3),
        (1, 7), (1, 13), (1, 17), (1, 19), (1, 21), (1, 30),
        (2, 3), (2, 7), (2, 8), (2, 9), (2, 13), (2, 27),
        (2, 28), (2, 32), (3, 7), (3, 12), (3, 13), (4, 6),
        (4, 10), (5, 6), (5, 10), (5, 16), (6, 16), (8, 30),
        (8, 32), (8, 33), (9, 33), (13, 33), (14, 32), (14, 33),
        (15, 32), (15, 33), (18, 32), (18, 33), (19, 33), (20, 32),
        (20, 33), (22, 32), (22, 33), (23, 25), (23, 27), (23, 29),
        (23, 32), (23, 33), (24, 25), (24, 27), (24, 31), (25, 31),
        (26, 29), (26, 33), (27, 33), (28, 31), (28, 33), (29, 32),
        (29, 33), (30, 32), (30, 33), (31, 32), (31, 33), (32, 33),
    ];
    const LABELS: [usize; 34] = [
        0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1,
        1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
    ];
    Graph::from_edges(34, &EDGES)
        .and_then(|g| g.with_labels(LABELS.to_vec()))
        .expect("embedded karate club data is valid")
}

/// Loads a graph from an edge-list file plus optional CSV side files.
///
/// Node identifiers may be arbitrary tokens; they are mapped to dense indices
/// in first-appearance order. When `splits_path` is absent and labels are
/// present, a seeded 10/10/80 split is generated from `split_seed`.
pub fn load_graph(
    edge_list_path: &Path,
    features_path: Option<&Path>,
    labels_path: Option<&Path>,
    splits_path: Option<&Path>,
    split_seed: u64,
) -> Result<Graph> {
    let text = fs::read_to_string(edge_list_path)
        .map_err(|e| RegeError::io(edge_list_path, e))?;
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut raw_edges: Vec<(usize, usize)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (u, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(u), Some(v), None) => (u, v),
            _ => {
                return Err(RegeError::Parse {
                    path: edge_list_path.display().to_string(),
                    line: lineno + 1,
                    message: format!("expected two node identifiers, got `{line}`"),
                })
            }
        };
        let mut intern = |token: &str| -> usize {
            *ids.entry(token.to_string()).or_insert_with(|| {
                order.push(token.to_string());
                order.len() - 1
            })
        };
        let ui = intern(u);
        let vi = intern(v);
        raw_edges.push((ui, vi));
    }
    let n = order.len();
    if n == 0 {
        return Err(RegeError::Parse {
            path: edge_list_path.display().to_string(),
            line: 0,
            message: "edge list contains no edges".to_string(),
        });
    }
    let mut graph = Graph::from_edges(n, &raw_edges)?;

    if let Some(path) = features_path {
        let rows = read_keyed_csv(path, &ids)?;
        let width = rows[0].1.len();
        let mut features = DMatrix::zeros(n, width);
        for (node, values) in rows {
            if values.len() != width {
                return Err(RegeError::dimension(
                    "features",
                    format!("{width} columns"),
                    format!("{} columns", values.len()),
                ));
            }
            for (j, v) in values.iter().enumerate() {
                features[(node, j)] = *v;
            }
        }
        graph = graph.with_features(features)?;
    }

    if let Some(path) = labels_path {
        let rows = read_keyed_csv(path, &ids)?;
        let mut labels = vec![usize::MAX; n];
        for (node, values) in rows {
            let value = values.first().copied().ok_or_else(|| RegeError::Parse {
                path: path.display().to_string(),
                line: 0,
                message: "label row has no value column".to_string(),
            })?;
            labels[node] = value as usize;
        }
        if labels.iter().any(|&l| l == usize::MAX) {
            return Err(RegeError::dimension(
                "labels",
                format!("{n} labeled nodes"),
                "missing rows for some nodes".to_string(),
            ));
        }
        graph = graph.with_labels(labels)?;
    }

    if let Some(path) = splits_path {
        let masks = read_splits_csv(path, &ids, n)?;
        graph = graph.with_masks(masks)?;
    } else if graph.labels().is_some() {
        graph = graph.with_random_split(0.1, 0.1, split_seed)?;
    }
    Ok(graph)
}

/// Reads a CSV with a header row whose first column is the node id. Returns
/// `(node_index, numeric_values)` per row. Errors when a row references an
/// unknown node or the row count does not match the node set.
fn read_keyed_csv(path: &Path, ids: &HashMap<String, usize>) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = fs::read_to_string(path).map_err(|e| RegeError::io(path, e))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let key = fields.next().unwrap_or_default().trim();
        let node = *ids.get(key).ok_or_else(|| RegeError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: format!("unknown node id `{key}`"),
        })?;
        let values: Vec<f64> = fields
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| RegeError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("not a number: `{f}`"),
                })
            })
            .collect::<Result<_>>()?;
        rows.push((node, values));
    }
    if rows.len() != ids.len() {
        return Err(RegeError::dimension(
            "csv rows",
            format!("{} rows (one per node)", ids.len()),
            format!("{} rows", rows.len()),
        ));
    }
    Ok(rows)
}

fn read_splits_csv(path: &Path, ids: &HashMap<String, usize>, n: usize) -> Result<Masks> {
    let text = fs::read_to_string(path).map_err(|e| RegeError::io(path, e))?;
    let mut train = vec![false; n];
    let mut val = vec![false; n];
    let mut test = vec![false; n];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.eq_ignore_ascii_case("node_id,split") {
            continue;
        }
        let mut fields = line.split(',');
        let key = fields.next().unwrap_or_default().trim();
        let split = fields.next().unwrap_or_default().trim();
        let node = *ids.get(key).ok_or_else(|| RegeError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: format!("unknown node id `{key}`"),
        })?;
        match split {
            "train" => train[node] = true,
            "val" => val[node] = true,
            "test" => test[node] = true,
            other => {
                return Err(RegeError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("split must be train/val/test, got `{other}`"),
                })
            }
        }
    }
    Masks::new(train, val, test)
}
