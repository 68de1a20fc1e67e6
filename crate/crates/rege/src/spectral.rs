//! Eigendecomposition of the adjacency matrix and low-rank graph views.
//!
//! A view is built by truncating the spectrum to its leading components,
//! rescaling the reconstruction to `[0, 1]` and thresholding at 0.5. Sweeping
//! the component count from a minimum up to `n` yields a sequence of graphs
//! that reveal structure from coarse (high-certainty edges only) to exact.

use nalgebra::{DMatrix, DVector};

use crate::error::{RegeError, Result};
use crate::graph::Graph;

/// Full spectral decomposition of a symmetric adjacency matrix.
///
/// Eigenpairs are sorted by descending eigenvalue (signed order), so the
/// leading components are the ones that dominate edge formation. Column `i`
/// of `eigenvectors` pairs with `eigenvalues[i]`; columns are orthonormal.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Untruncated reconstruction `U diag(lambda) U^T`.
    pub fn reconstruct_full(&self) -> DMatrix<f64> {
        self.reconstruct_raw(self.n())
    }

    /// Truncated reconstruction from the leading `k` components, without any
    /// normalization or thresholding.
    pub(crate) fn reconstruct_raw(&self, k: usize) -> DMatrix<f64> {
        let u = self.eigenvectors.columns(0, k);
        let mut scaled = u.clone_owned();
        for (i, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.eigenvalues[i];
        }
        let product = scaled * u.transpose();
        // Absorb round-off so downstream consumers see an exactly symmetric matrix.
        let n = product.nrows();
        let mut sym = product.clone();
        for i in 0..n {
            for j in 0..n {
                sym[(i, j)] = 0.5 * (product[(i, j)] + product[(j, i)]);
            }
        }
        sym
    }
}

/// Maximum iterations handed to the symmetric eigensolver.
const EIGEN_MAX_ITER: usize = 10_000;

/// Decomposes the raw adjacency matrix (not the normalized operator).
///
/// Any symmetric eigensolver meeting the reconstruction tolerance (1e-8
/// entrywise for the full spectrum) is acceptable; this one reduces to
/// tridiagonal form and applies the implicit QL/QR iteration.
pub fn eigendecompose(graph: &Graph) -> Result<EigenDecomposition> {
    let adjacency = graph.adjacency().clone();
    let eig = nalgebra::SymmetricEigen::try_new(adjacency, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| {
            RegeError::Numerical(format!(
                "symmetric eigensolver did not converge within {EIGEN_MAX_ITER} iterations"
            ))
        })?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Fraction of squared-eigenvalue mass captured by the first `q` components.
/// Returns 1 for an empty spectrum (all eigenvalues zero).
pub fn retained_energy(decomp: &EigenDecomposition, q: usize) -> Result<f64> {
    let n = decomp.n();
    if q == 0 || q > n {
        return Err(RegeError::parameter(
            "q",
            format!("must satisfy 1 <= q <= {n}, got {q}"),
        ));
    }
    let total: f64 = decomp.eigenvalues.iter().map(|l| l * l).sum();
    if total == 0.0 {
        return Ok(1.0);
    }
    let head: f64 = decomp.eigenvalues.iter().take(q).map(|l| l * l).sum();
    Ok(head / total)
}

/// Reconstructs a binary view from the leading `k` components.
///
/// The truncated reconstruction is min-max rescaled over the whole matrix to
/// `[0, 1]`, thresholded at 0.5, and its diagonal forced to zero. A constant
/// reconstruction (max = min) yields the empty view.
pub fn reconstruct_view(decomp: &EigenDecomposition, k: usize) -> Result<DMatrix<f64>> {
    let n = decomp.n();
    if k == 0 || k > n {
        return Err(RegeError::parameter(
            "k",
            format!("must satisfy 1 <= k <= {n}, got {k}"),
        ));
    }
    let raw = decomp.reconstruct_raw(k);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in raw.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let mut view = DMatrix::zeros(n, n);
    if hi > lo {
        let range = hi - lo;
        for i in 0..n {
            for j in 0..n {
                if i != j && (raw[(i, j)] - lo) / range >= 0.5 {
                    view[(i, j)] = 1.0;
                }
            }
        }
    }
    Ok(view)
}

/// Ordered sequence of binary views with strictly increasing component
/// counts; the final view always uses all `n` components.
#[derive(Debug, Clone)]
pub struct ViewSequence {
    views: Vec<DMatrix<f64>>,
    component_counts: Vec<usize>,
}

impl ViewSequence {
    pub fn new(views: Vec<DMatrix<f64>>, component_counts: Vec<usize>) -> Result<Self> {
        if views.len() != component_counts.len() {
            return Err(RegeError::dimension(
                "view sequence",
                format!("{} counts", views.len()),
                format!("{} counts", component_counts.len()),
            ));
        }
        if component_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RegeError::parameter(
                "component_counts",
                "must be strictly increasing",
            ));
        }
        Ok(ViewSequence {
            views,
            component_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn views(&self) -> &[DMatrix<f64>] {
        &self.views
    }

    pub fn component_counts(&self) -> &[usize] {
        &self.component_counts
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &DMatrix<f64>)> {
        self.component_counts.iter().copied().zip(self.views.iter())
    }

    /// Number of views carrying at least `min_edges` edges. Views below the
    /// threshold contribute to the consensus but carry no usable structure
    /// for training.
    pub fn count_informative(&self, min_edges: usize) -> usize {
        self.iter()
            .filter(|(_, v)| (v.sum() / 2.0) as usize >= min_edges)
            .count()
    }

    /// A copy of the sequence keeping only views with at least `min_edges`
    /// edges. The component counts of the survivors stay strictly
    /// increasing.
    pub fn retain_informative(&self, min_edges: usize) -> ViewSequence {
        let kept: Vec<(usize, DMatrix<f64>)> = self
            .iter()
            .filter(|(_, v)| (v.sum() / 2.0) as usize >= min_edges)
            .map(|(c, v)| (c, v.clone()))
            .collect();
        let (component_counts, views) = kept.into_iter().unzip();
        ViewSequence {
            views,
            component_counts,
        }
    }
}

/// The component schedule: `q_min, q_min + step, ...`, with `n` appended when
/// the arithmetic sequence does not land on it.
pub fn component_schedule(n: usize, q_min: usize, step: usize) -> Result<Vec<usize>> {
    if q_min == 0 || q_min > n {
        return Err(RegeError::parameter(
            "q_min",
            format!("must satisfy 1 <= q_min <= {n}, got {q_min}"),
        ));
    }
    if step == 0 {
        return Err(RegeError::parameter("step", "must be at least 1"));
    }
    let mut counts: Vec<usize> = (q_min..n).step_by(step).collect();
    if counts.last() != Some(&n) {
        counts.push(n);
    }
    Ok(counts)
}

/// Generates the full view sequence for a graph.
pub fn generate_views(graph: &Graph, q_min: usize, step: usize) -> Result<ViewSequence> {
    let decomp = eigendecompose(graph)?;
    generate_views_from(&decomp, q_min, step)
}

/// Same as [`generate_views`] but reuses an existing decomposition.
pub fn generate_views_from(
    decomp: &EigenDecomposition,
    q_min: usize,
    step: usize,
) -> Result<ViewSequence> {
    let counts = component_schedule(decomp.n(), q_min, step)?;
    let views = counts
        .iter()
        .map(|&k| reconstruct_view(decomp, k))
        .collect::<Result<Vec<_>>>()?;
    ViewSequence::new(views, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{karate, Graph};

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn two_node_spectrum() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let d = eigendecompose(&g).unwrap();
        assert!((d.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!((d.eigenvalues()[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn path3_spectrum_descending() {
        // P3 spectrum is {sqrt(2), 0, -sqrt(2)}; descending signed order.
        let d = eigendecompose(&path3()).unwrap();
        let r2 = 2.0_f64.sqrt();
        assert!((d.eigenvalues()[0] - r2).abs() < 1e-12);
        assert!(d.eigenvalues()[1].abs() < 1e-12);
        assert!((d.eigenvalues()[2] + r2).abs() < 1e-12);
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let d = eigendecompose(&karate()).unwrap();
        let gram = d.eigenvectors().transpose() * d.eigenvectors();
        let eye = DMatrix::<f64>::identity(34, 34);
        assert!((gram - eye).abs().max() < 1e-8);
    }

    #[test]
    fn full_reconstruction_reproduces_adjacency() {
        let g = karate();
        let d = eigendecompose(&g).unwrap();
        let err = (d.reconstruct_full() - g.adjacency()).abs().max();
        assert!(err < 1e-8, "max reconstruction error {err}");
    }

    #[test]
    fn energy_examples() {
        let d = eigendecompose(&path3()).unwrap();
        // lambda^2 sequence is (2, 0, 2) out of total 4.
        assert!((retained_energy(&d, 1).unwrap() - 0.5).abs() < 1e-12);
        assert!((retained_energy(&d, 3).unwrap() - 1.0).abs() < 1e-12);
        assert!(retained_energy(&d, 0).is_err());
        assert!(retained_energy(&d, 4).is_err());
    }

    #[test]
    fn energy_of_empty_graph_is_one() {
        let g = Graph::from_edges(3, &[]).unwrap();
        let d = eigendecompose(&g).unwrap();
        assert_eq!(retained_energy(&d, 1).unwrap(), 1.0);
    }

    #[test]
    fn view_at_full_rank_is_exact() {
        let g = karate();
        let d = eigendecompose(&g).unwrap();
        let v = reconstruct_view(&d, 34).unwrap();
        assert_eq!(&v, g.adjacency());
    }

    #[test]
    fn path3_single_component_view_is_empty() {
        // sqrt(2) * v1 v1^T with v1 = (1/2, 1/sqrt(2), 1/2) has its largest
        // entry on the diagonal (0.707) and minimum 0.354; after min-max the
        // off-diagonal 0.5 entries fall at 0.414 < 0.5, so no edge survives.
        let d = eigendecompose(&path3()).unwrap();
        let v = reconstruct_view(&d, 1).unwrap();
        assert_eq!(v.sum(), 0.0);
    }

    #[test]
    fn karate_schedule() {
        assert_eq!(
            component_schedule(34, 5, 5).unwrap(),
            vec![5, 10, 15, 20, 25, 30, 34]
        );
        assert_eq!(component_schedule(10, 10, 5).unwrap(), vec![10]);
        assert_eq!(component_schedule(35, 5, 5).unwrap(), vec![5, 10, 15, 20, 25, 30, 35]);
    }

    #[test]
    fn generate_views_final_view_is_adjacency() {
        let g = karate();
        let vs = generate_views(&g, 5, 5).unwrap();
        assert_eq!(vs.len(), 7);
        assert_eq!(vs.views().last().unwrap(), g.adjacency());
        for (_, v) in vs.iter() {
            for i in 0..34 {
                assert_eq!(v[(i, i)], 0.0);
                for j in 0..34 {
                    assert!(v[(i, j)] == 0.0 || v[(i, j)] == 1.0);
                    assert_eq!(v[(i, j)], v[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn energy_non_decreasing() {
        let d = eigendecompose(&karate()).unwrap();
        let mut prev = 0.0;
        for q in 1..=34 {
            let e = retained_energy(&d, q).unwrap();
            assert!(e >= prev - 1e-12);
            prev = e;
        }
        assert!((prev - 1.0).abs() < 1e-12);
    }
}
