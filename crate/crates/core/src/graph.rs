//! Coupling graphs on rectangular lattices.
//!
//! Sites are numbered in row-major order: site `r*cols + c` sits at row `r`,
//! column `c`. Edges are stored canonically — endpoints ordered `a < b`, the
//! list sorted by `(a, b)` — so that a graph's edge-weight vector is a
//! well-defined fixed-length feature vector for conditioning and for kernel
//! baselines.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One weighted, undirected edge `a -- b` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub w: f64,
}

/// A weighted undirected graph on the sites of a `rows x cols` lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingGraph {
    rows: usize,
    cols: usize,
    edges: Vec<Edge>,
}

impl CouplingGraph {
    /// Build a graph from raw edges, canonicalizing and validating.
    ///
    /// Endpoints are swapped into `a < b` order and the list is sorted by
    /// `(a, b)`. Errors on empty lattices, out-of-range endpoints, self
    /// loops, duplicate edges, or non-finite / negative weights.
    pub fn new(rows: usize, cols: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Graph(format!("empty lattice {rows}x{cols}")));
        }
        let n = rows * cols;
        let mut canon: Vec<Edge> = Vec::with_capacity(edges.len());
        for (a, b, w) in edges {
            if a == b {
                return Err(Error::Graph(format!("self loop at site {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Graph(format!(
                    "edge ({a},{b}) out of range for {n} sites"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Graph(format!("bad weight {w} on edge ({a},{b})")));
            }
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            canon.push(Edge { a, b, w });
        }
        canon.sort_by_key(|e| (e.a, e.b));
        for pair in canon.windows(2) {
            if pair[0].a == pair[1].a && pair[0].b == pair[1].b {
                return Err(Error::Graph(format!(
                    "duplicate edge ({},{})",
                    pair[0].a, pair[0].b
                )));
            }
        }
        Ok(CouplingGraph {
            rows,
            cols,
            edges: canon,
        })
    }

    /// Nearest-neighbor grid with every weight set to `w`.
    pub fn grid(rows: usize, cols: usize, w: f64) -> Result<Self> {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    edges.push((i, i + 1, w));
                }
                if r + 1 < rows {
                    edges.push((i, i + cols, w));
                }
            }
        }
        Self::new(rows, cols, edges)
    }

    /// Open chain of `n` sites (a `1 x n` grid) with uniform weight `w`.
    pub fn chain(n: usize, w: f64) -> Result<Self> {
        Self::grid(1, n, w)
    }

    /// Nearest-neighbor grid with i.i.d. weights drawn uniformly from `[lo, hi)`.
    ///
    /// Weights are assigned in canonical edge order, so a fixed RNG stream
    /// always produces the same graph.
    pub fn random_grid<R: Rng>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Self> {
        let mut g = Self::grid(rows, cols, 0.0)?;
        for e in &mut g.edges {
            e.w = rng.gen_range(lo..hi);
        }
        Ok(g)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge weights in canonical edge order — the graph's feature vector.
    pub fn weight_vector(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.w).collect()
    }

    /// Weighted degree of every site: `deg(i) = sum of w over edges at i`.
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n_sites()];
        for e in &self.edges {
            deg[e.a] += e.w;
            deg[e.b] += e.w;
        }
        deg
    }

    /// Dense weighted adjacency matrix, row-major `n x n`.
    pub fn adjacency(&self) -> Vec<f64> {
        let n = self.n_sites();
        let mut a = vec![0.0; n * n];
        for e in &self.edges {
            a[e.a * n + e.b] = e.w;
            a[e.b * n + e.a] = e.w;
        }
        a
    }

    /// Symmetrically normalized adjacency with self loops,
    /// `D^{-1/2} (A + I) D^{-1/2}` with `D = diag(1 + weighted degree)`,
    /// as used by graph convolutions. Row-major `n x n`.
    pub fn normalized_adjacency(&self) -> Vec<f64> {
        let n = self.n_sites();
        let mut a = self.adjacency();
        for i in 0..n {
            a[i * n + i] += 1.0;
        }
        let dinv: Vec<f64> = (0..n)
            .map(|i| {
                let d: f64 = (0..n).map(|j| a[i * n + j]).sum();
                1.0 / d.sqrt()
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] *= dinv[i] * dinv[j];
            }
        }
        a
    }
}
