//! Graph, feature and label containers plus the renormalized propagation matrix.

mod dataset;
mod labels;
mod sbm;

pub use dataset::{
    load_dataset, write_container, ContainerFiles, Dataset, LoadOptions, Manifest,
    MANIFEST_FORMAT,
};
pub use labels::{make_split, LabelSet, NodeRole, SplitMode};
pub use sbm::{generate_sbm, planted_dataset, PlantedConfig};
pub(crate) use sbm::check_simplex_rows;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::Csr;

/// Undirected simple graph. Edges are stored once as `(a, b)` with `a < b`,
/// sorted; neighbor lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Builds a graph from any orientation of its edges. Duplicates (in either
    /// direction) collapse; self-loops and out-of-range endpoints are errors.
    pub fn from_edges<I>(n_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a node outside 0..{n_nodes}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on node {a}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self::from_canonical(n_nodes, canon))
    }

    pub fn empty(n_nodes: usize) -> Self {
        Self::from_canonical(n_nodes, Vec::new())
    }

    /// `edges` must already be sorted, deduplicated and oriented `a < b`.
    pub(crate) fn from_canonical(n_nodes: usize, edges: Vec<(usize, usize)>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        let mut degree = vec![0usize; n_nodes];
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = vec![0usize; n_nodes + 1];
        for a in 0..n_nodes {
            offsets[a + 1] = offsets[a] + degree[a];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0usize; offsets[n_nodes]];
        for &(a, b) in &edges {
            neighbors[fill[a]] = b;
            fill[a] += 1;
            neighbors[fill[b]] = a;
            fill[b] += 1;
        }
        for a in 0..n_nodes {
            neighbors[offsets[a]..offsets[a + 1]].sort_unstable();
        }
        Self {
            n_nodes,
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.neighbors[self.offsets[a]..self.offsets[a + 1]]
    }

    pub fn degree(&self, a: usize) -> usize {
        self.offsets[a + 1] - self.offsets[a]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Number of unordered node pairs that are not edges.
    pub fn n_non_edges(&self) -> usize {
        n_pairs(self.n_nodes) - self.edges.len()
    }

    pub fn density(&self) -> f64 {
        let pairs = n_pairs(self.n_nodes);
        if pairs == 0 {
            0.0
        } else {
            self.edges.len() as f64 / pairs as f64
        }
    }

    /// Graph with `remove` deleted and `add` inserted.
    pub fn edited(&self, remove: &[(usize, usize)], add: &[(usize, usize)]) -> Result<Self> {
        let mut drop: Vec<(usize, usize)> = remove.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        drop.sort_unstable();
        let kept = self
            .edges
            .iter()
            .copied()
            .filter(|e| drop.binary_search(e).is_err());
        Self::from_edges(self.n_nodes, kept.chain(add.iter().copied()))
    }
}

pub(crate) fn n_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Maps a linear index over the strict upper triangle (row-major) to `(a, b)`, `a < b`.
pub(crate) fn pair_from_index(n: usize, idx: usize) -> (usize, usize) {
    // Row a holds n-1-a pairs; rows before a hold a*(2n-a-1)/2 pairs.
    let nf = n as f64;
    let k = idx as f64;
    let mut a = ((2.0 * nf - 1.0 - ((2.0 * nf - 1.0).powi(2) - 8.0 * k).max(0.0).sqrt()) / 2.0)
        .floor() as usize;
    let start = |a: usize| a * (2 * n - a - 1) / 2;
    while a > 0 && start(a) > idx {
        a -= 1;
    }
    while start(a + 1) <= idx {
        a += 1;
    }
    (a, a + 1 + idx - start(a))
}

/// Node features, stored sparse (bag-of-words rows are mostly zero).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T>(Csr<T>);

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(inner: Csr<T>) -> Self {
        Self(inner)
    }

    pub fn from_dense(dense: &Array2<T>) -> Self {
        Self(Csr::from_dense(dense.view()))
    }

    pub fn n_rows(&self) -> usize {
        self.0.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.0.n_cols()
    }

    pub fn as_csr(&self) -> &Csr<T> {
        &self.0
    }

    /// Each nonzero row rescaled to unit L1 norm; zero rows stay zero.
    pub fn row_normalized(&self) -> Self {
        Self(self.0.map_rows(|_, vals| {
            let s: T = vals.iter().map(|v| v.abs()).sum();
            if s > T::zero() {
                vals.iter_mut().for_each(|v| *v /= s);
            }
        }))
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMatrix<U> {
        let csr = &self.0;
        let mut trip = Vec::with_capacity(csr.nnz());
        for r in 0..csr.n_rows() {
            for (c, v) in csr.row(r) {
                trip.push((r, c, U::of(v.as_f64())));
            }
        }
        FeatureMatrix(Csr::from_triplets(csr.n_rows(), csr.n_cols(), trip).expect("valid pattern"))
    }
}

/// Symmetric, non-negative propagation matrix with the graph's sparsity plus the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix<T>(Csr<T>);

impl<T: Scalar> PropagationMatrix<T> {
    pub fn as_csr(&self) -> &Csr<T> {
        &self.0
    }

    pub fn n_nodes(&self) -> usize {
        self.0.n_rows()
    }

    /// Wraps an arbitrary square matrix; used by tests that need e.g. the identity.
    pub fn from_csr(m: Csr<T>) -> Result<Self> {
        if m.n_rows() != m.n_cols() {
            return Err(Error::Shape(format!(
                "propagation matrix must be square, got {:?}",
                m.shape()
            )));
        }
        Ok(Self(m))
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃ = diag(rowsum(A + I))`.
pub fn normalize_adjacency<T: Scalar>(g: &Graph) -> PropagationMatrix<T> {
    let inv_sqrt: Vec<T> = (0..g.n_nodes())
        .map(|a| T::one() / T::of_usize(g.degree(a) + 1).sqrt())
        .collect();
    let mut trip = Vec::with_capacity(g.n_nodes() + 2 * g.n_edges());
    for a in 0..g.n_nodes() {
        trip.push((a, a, inv_sqrt[a] * inv_sqrt[a]));
    }
    for &(a, b) in g.edges() {
        let w = inv_sqrt[a] * inv_sqrt[b];
        trip.push((a, b, w));
        trip.push((b, a, w));
    }
    PropagationMatrix(Csr::from_triplets(g.n_nodes(), g.n_nodes(), trip).expect("indices in range"))
}
