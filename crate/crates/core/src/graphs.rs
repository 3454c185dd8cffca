//! Undirected interconnection topologies and their Laplacian spectra.
//!
//! Vertices are labelled `1..=N` at the API boundary (the same labels used
//! in JSON configs); matrices are indexed from zero as usual.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::matops::sym_eigen;
use crate::{Error, Mat, Result, Tolerances, Vector};

/// Undirected graph over `N` agents with its Laplacian eigen-decomposition.
///
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    n: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    adjacency: Mat,
    laplacian: Mat,
    eigvals: Vector,
    eigvecs: Mat,
}

/// Serializable graph description used in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum GraphSpec {
    Cyclic { n: usize },
    Edges { n: usize, edges: Vec<[usize; 2]> },
}

impl GraphSpec {
    pub fn build(&self) -> Result<GraphTopology> {
        match self {
            GraphSpec::Cyclic { n } => cyclic_graph(*n),
            GraphSpec::Edges { n, edges } => {
                let pairs: Vec<_> = edges.iter().map(|e| (e[0], e[1])).collect();
                build_graph(*n, &pairs)
            }
        }
    }
}

/// Builds a graph from 1-based vertex pairs. Duplicate and reversed pairs
/// collapse into one edge.
pub fn build_graph(n: usize, edges: &[(usize, usize)]) -> Result<GraphTopology> {
    build_graph_with(n, edges, Tolerances::default().zero_eigenvalue)
}

pub fn build_graph_with(n: usize, edges: &[(usize, usize)], zero_tol: f64) -> Result<GraphTopology> {
    if n < 1 {
        return Err(Error::Graph("a graph needs at least one vertex".into()));
    }
    let mut set = BTreeSet::new();
    for &(i, j) in edges {
        if i < 1 || i > n || j < 1 || j > n {
            return Err(Error::Graph(format!("edge ({i}, {j}) has a vertex outside 1..={n}")));
        }
        if i == j {
            return Err(Error::Graph(format!("self-loop at vertex {i}")));
        }
        set.insert((i.min(j), i.max(j)));
    }
    let edges: Vec<_> = set.into_iter().collect();

    let mut adjacency = Mat::zeros(n, n);
    let mut degrees = vec![0usize; n];
    for &(i, j) in &edges {
        adjacency[(i - 1, j - 1)] = 1.0;
        adjacency[(j - 1, i - 1)] = 1.0;
        degrees[i - 1] += 1;
        degrees[j - 1] += 1;
    }
    let laplacian = Mat::from_fn(n, n, |i, j| if i == j { degrees[i] as f64 } else { 0.0 - adjacency[(i, j)] });

    let (mut vals, vecs) = sym_eigen(&laplacian);
    for v in &mut vals {
        if v.abs() < zero_tol {
            *v = 0.0;
        }
    }
    Ok(GraphTopology { n, edges, degrees, adjacency, laplacian, eigvals: Vector::from_vec(vals), eigvecs: vecs })
}

/// Ring over `n >= 3` agents (nearest-neighbour cyclic interconnection).
pub fn cyclic_graph(n: usize) -> Result<GraphTopology> {
    if n < 3 {
        return Err(Error::Graph(format!("a cycle needs at least 3 vertices, got {n}")));
    }
    let edges: Vec<_> = (1..=n).map(|i| (i, i % n + 1)).collect();
    build_graph(n, &edges)
}

/// Path `1 − 2 − … − n`.
pub fn path_graph(n: usize) -> Result<GraphTopology> {
    let edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
    build_graph(n, &edges)
}

/// Complete graph on `n` vertices.
pub fn complete_graph(n: usize) -> Result<GraphTopology> {
    let edges: Vec<_> = (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i, j))).collect();
    build_graph(n, &edges)
}

/// Star with hub vertex 1.
pub fn star_graph(n: usize) -> Result<GraphTopology> {
    let edges: Vec<_> = (2..=n).map(|j| (1, j)).collect();
    build_graph(n, &edges)
}

/// `N_L = d_max + 1`.
pub fn max_degree_bound(g: &GraphTopology) -> usize {
    g.max_degree() + 1
}

/// Closed-form Laplacian spectrum of the `n`-cycle, ascending.
pub fn cycle_spectrum(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|k| 2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos()).collect();
    v.sort_by(f64::total_cmp);
    v
}

impl GraphTopology {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as sorted 1-based pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn adjacency(&self) -> &Mat {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &Mat {
        &self.laplacian
    }

    /// Laplacian eigenvalues `λ₁ <= … <= λ_N`, with `λ₁ = 0` exactly.
    pub fn eigvals(&self) -> &Vector {
        &self.eigvals
    }

    /// Orthogonal eigenvector matrix `V` with `ℒ = V diag(λ) Vᵀ`.
    pub fn eigvecs(&self) -> &Mat {
        &self.eigvecs
    }

    /// Count of zero Laplacian eigenvalues (`|λ| < tol`).
    pub fn zero_eigenvalue_count(&self, tol: f64) -> usize {
        self.eigvals.iter().filter(|v| v.abs() < tol).count()
    }

    pub fn is_connected(&self) -> bool {
        self.zero_eigenvalue_count(1e-8) == 1
    }

    /// 1-based neighbours of vertex `i`.
    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        (1..=self.n).filter(|&j| j != i && self.adjacency[(i - 1, j - 1)] != 0.0).collect()
    }
}
