//! Interactive browser demo.
//!
//! [`Explorer`] holds a graph (the karate club or a generated block model,
//! optionally perturbed), its eigendecomposition, and a spectral 2-D layout.
//! [`GraphExplorer`] is the thin wasm-bindgen wrapper the page talks to. The
//! page drives three operations: sweeping the component count of the
//! low-rank reconstruction, reading the retained-energy curve, and
//! overlaying per-node uncertainty radii.

use wasm_bindgen::prelude::*;

use rege::error::Result;
use rege::graph::{generate_sbm, karate, Graph};
use rege::perturb::{heuristic_attack, random_flip, PerturbationBudget};
use rege::radii::{
    binary_deviation_radii, consensus_with_graph, entropy_radii, stddev_radii, RadiusVector,
};
use rege::spectral::{
    eigendecompose, generate_views_from, reconstruct_view, retained_energy, EigenDecomposition,
};
use rege::RegeError;

/// Plain-Rust core of the demo; everything here is testable natively.
pub struct Explorer {
    graph: Graph,
    decomposition: EigenDecomposition,
}

impl Explorer {
    pub fn from_graph(graph: Graph) -> Result<Explorer> {
        let decomposition = eigendecompose(&graph)?;
        Ok(Explorer {
            graph,
            decomposition,
        })
    }

    pub fn karate() -> Result<Explorer> {
        Explorer::from_graph(karate())
    }

    pub fn sbm(n: usize, p_in: f64, p_out: f64, seed: u64) -> Result<Explorer> {
        Explorer::from_graph(generate_sbm(n, 2, p_in, p_out, seed)?)
    }

    pub fn perturbed(&self, rate: f64, seed: u64) -> Result<Explorer> {
        let budget = PerturbationBudget::new(rate)?;
        let outcome = if self.graph.labels().is_some() {
            heuristic_attack(&self.graph, budget, seed)?
        } else {
            random_flip(&self.graph, budget, seed)?
        };
        Explorer::from_graph(outcome.graph)
    }

    pub fn node_count(&self) -> usize {
        self.graph.n()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn labels(&self) -> Vec<u8> {
        match self.graph.labels() {
            Some(l) => l.iter().map(|&c| c as u8).collect(),
            None => vec![0; self.graph.n()],
        }
    }

    /// Spectral layout: eigenvector coordinates 2 and 3, min-max scaled per
    /// axis, flattened as x0, y0, x1, y1, ...
    pub fn layout(&self) -> Vec<f64> {
        let n = self.graph.n();
        let vectors = self.decomposition.eigenvectors();
        let col = |j: usize| -> Vec<f64> {
            let raw: Vec<f64> = (0..n).map(|i| vectors[(i, j.min(n - 1))]).collect();
            let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
            } else {
                vec![0.5; n]
            }
        };
        let (xs, ys) = (col(1), col(2));
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            out.push(xs[i]);
            out.push(ys[i]);
        }
        out
    }

    pub fn edges(&self) -> Vec<u32> {
        flatten_edges(self.graph.edge_list())
    }

    pub fn view_edges(&self, k: usize) -> Result<Vec<u32>> {
        let view = reconstruct_view(&self.decomposition, k)?;
        let mut edges = Vec::new();
        for i in 0..view.nrows() {
            for j in (i + 1)..view.ncols() {
                if view[(i, j)] > 0.0 {
                    edges.push((i, j));
                }
            }
        }
        Ok(flatten_edges(edges))
    }

    pub fn energy(&self, k: usize) -> Result<f64> {
        retained_energy(&self.decomposition, k)
    }

    pub fn radii(&self, kind: &str, q_min: usize, step: usize) -> Result<Vec<f64>> {
        let views = generate_views_from(&self.decomposition, q_min, step)?;
        let w = consensus_with_graph(&views, &self.graph)?;
        let radii: RadiusVector = match kind {
            "ddr" => binary_deviation_radii(&w),
            "stddev" => stddev_radii(&w),
            "entropy" => entropy_radii(&w),
            other => {
                return Err(RegeError::parameter(
                    "kind",
                    format!("unknown radius kind `{other}`"),
                ))
            }
        };
        Ok(radii.values().to_vec())
    }
}

fn flatten_edges(edges: Vec<(usize, usize)>) -> Vec<u32> {
    let mut out = Vec::with_capacity(edges.len() * 2);
    for (u, v) in edges {
        out.push(u as u32);
        out.push(v as u32);
    }
    out
}

fn to_js(e: RegeError) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Javascript-facing wrapper.
#[wasm_bindgen]
pub struct GraphExplorer(Explorer);

#[wasm_bindgen]
impl GraphExplorer {
    /// The built-in karate club graph.
    pub fn karate() -> std::result::Result<GraphExplorer, JsValue> {
        Ok(GraphExplorer(Explorer::karate().map_err(to_js)?))
    }

    /// A seeded two-block stochastic block model.
    pub fn sbm(
        n: usize,
        p_in: f64,
        p_out: f64,
        seed: u64,
    ) -> std::result::Result<GraphExplorer, JsValue> {
        Ok(GraphExplorer(
            Explorer::sbm(n, p_in, p_out, seed).map_err(to_js)?,
        ))
    }

    /// Flips a fraction of edges: label-aware when the graph has labels,
    /// uniform otherwise. Returns a new explorer so the clean graph stays
    /// available for comparison.
    pub fn perturbed(&self, rate: f64, seed: u64) -> std::result::Result<GraphExplorer, JsValue> {
        Ok(GraphExplorer(self.0.perturbed(rate, seed).map_err(to_js)?))
    }

    pub fn node_count(&self) -> usize {
        self.0.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.0.edge_count()
    }

    /// Node class labels for coloring (all zeros when unlabeled).
    pub fn labels(&self) -> Vec<u8> {
        self.0.labels()
    }

    /// Layout coordinates in [0, 1], flattened as x0, y0, x1, y1, ...
    pub fn layout(&self) -> Vec<f64> {
        self.0.layout()
    }

    /// Edges of the current graph, flattened as u0, v0, u1, v1, ...
    pub fn edges(&self) -> Vec<u32> {
        self.0.edges()
    }

    /// Edges of the view reconstructed from the leading `k` components.
    pub fn view_edges(&self, k: usize) -> std::result::Result<Vec<u32>, JsValue> {
        self.0.view_edges(k).map_err(to_js)
    }

    /// Fraction of squared-eigenvalue mass retained by `k` components.
    pub fn energy(&self, k: usize) -> std::result::Result<f64, JsValue> {
        self.0.energy(k).map_err(to_js)
    }

    /// Per-node radii (`ddr`, `stddev` or `entropy`) from views scheduled
    /// `q_min, q_min + step, ..., n`.
    pub fn radii(
        &self,
        kind: &str,
        q_min: usize,
        step: usize,
    ) -> std::result::Result<Vec<f64>, JsValue> {
        self.0.radii(kind, q_min, step).map_err(to_js)
    }
}
