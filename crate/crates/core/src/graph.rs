//! Undirected interaction graphs with a fixed edge orientation.
//!
//! Vertices are 0-based in this API. Diagnostics and the problem-file
//! format use 1-based ids. Each edge is stored once, oriented from `source`
//! to `sink` in the order it was given; that order fixes the rows of the
//! incidence matrix and the block order of every per-edge quantity.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: usize,
    pub sink: usize,
}

impl Edge {
    pub fn new(source: usize, sink: usize) -> Self {
        Self { source, sink }
    }

    pub fn reversed(self) -> Self {
        Self {
            source: self.sink,
            sink: self.source,
        }
    }

    pub fn touches(&self, v: usize) -> bool {
        self.source == v || self.sink == v
    }

    fn key(&self) -> (usize, usize) {
        (self.source.min(self.sink), self.source.max(self.sink))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Builds a graph from 0-based `(source, sink)` pairs.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut out = Vec::new();
        for (idx, (a, b)) in edges.into_iter().enumerate() {
            let edge_no = idx + 1;
            for v in [a, b] {
                if v >= n {
                    return Err(Error::VertexOutOfRange {
                        edge: edge_no,
                        i: a + 1,
                        j: b + 1,
                        vertex: v + 1,
                        n,
                    });
                }
            }
            if a == b {
                return Err(Error::SelfLoop {
                    edge: edge_no,
                    vertex: a + 1,
                });
            }
            let e = Edge::new(a, b);
            if let Some(&first) = seen.get(&e.key()) {
                return Err(Error::DuplicateEdge {
                    edge: edge_no,
                    i: a + 1,
                    j: b + 1,
                    first,
                });
            }
            seen.insert(e.key(), edge_no);
            out.push(e);
        }
        Ok(Self { n, edges: out })
    }

    /// Builds a graph from 1-based vertex pairs, as written in problem files.
    pub fn from_one_based(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        // map 0 to an out-of-range id so it is reported rather than wrapped
        let shifted: Vec<_> = edges
            .iter()
            .map(|&(a, b)| (a.checked_sub(1).unwrap_or(n), b.checked_sub(1).unwrap_or(n)))
            .collect();
        Self::new(n, shifted).map_err(|e| match e {
            // keep the caller's literal ids in the message
            Error::VertexOutOfRange { edge, n, .. } => {
                let (i, j) = edges[edge - 1];
                let vertex = if i == 0 || i > n { i } else { j };
                Error::VertexOutOfRange {
                    edge,
                    i,
                    j,
                    vertex,
                    n,
                }
            }
            other => other,
        })
    }

    /// Complete graph on `n` vertices with edges `(i, j)`, `i < j`, in
    /// lexicographic order.
    pub fn complete(n: usize) -> Result<Self> {
        let pairs: Vec<_> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        Self::new(n, pairs)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> Edge {
        self.edges[k]
    }

    /// Index of the edge joining `i` and `j` in either orientation.
    pub fn find_edge(&self, i: usize, j: usize) -> Option<usize> {
        self.edges
            .iter()
            .position(|e| (e.source == i && e.sink == j) || (e.source == j && e.sink == i))
    }

    pub fn neighbors(&self, i: usize) -> Result<BTreeSet<usize>> {
        if i >= self.n {
            return Err(Error::InvalidVertex {
                vertex: i + 1,
                n: self.n,
            });
        }
        Ok(self
            .edges
            .iter()
            .filter_map(|e| {
                if e.source == i {
                    Some(e.sink)
                } else if e.sink == i {
                    Some(e.source)
                } else {
                    None
                }
            })
            .collect())
    }

    /// Same graph with the orientation of every edge `k` with `flip[k]` reversed.
    pub fn with_flipped(&self, flip: &[bool]) -> Self {
        let edges = self
            .edges
            .iter()
            .zip(flip.iter().chain(std::iter::repeat(&false)))
            .map(|(e, &f)| if f { e.reversed() } else { *e })
            .collect();
        Self { n: self.n, edges }
    }

    pub fn incidence_matrix(&self) -> IncidenceMatrix {
        let mut h = DMatrix::<i32>::zeros(self.edges.len(), self.n);
        for (k, e) in self.edges.iter().enumerate() {
            h[(k, e.source)] = -1;
            h[(k, e.sink)] = 1;
        }
        IncidenceMatrix(h)
    }

    /// Graph Laplacian `H^T H`, in exact integer arithmetic.
    pub fn laplacian(&self) -> DMatrix<i32> {
        let h = self.incidence_matrix();
        h.0.transpose() * &h.0
    }

    /// Weighted Laplacian `H^T diag(w) H`, accumulated edge by edge.
    pub fn weighted_laplacian(&self, weights: &[f64]) -> DMatrix<f64> {
        assert_eq!(weights.len(), self.edges.len(), "one weight per edge");
        let mut l = DMatrix::zeros(self.n, self.n);
        for (e, &w) in self.edges.iter().zip(weights) {
            l[(e.source, e.source)] += w;
            l[(e.sink, e.sink)] += w;
            l[(e.source, e.sink)] -= w;
            l[(e.sink, e.source)] -= w;
        }
        l
    }
}

/// Oriented incidence matrix: row `k` has `-1` at the source of edge `k`
/// and `+1` at its sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix(DMatrix<i32>);

impl IncidenceMatrix {
    pub fn as_matrix(&self) -> &DMatrix<i32> {
        &self.0
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.0.map(f64::from)
    }

    /// The Kronecker product `H ⊗ I_d`.
    pub fn kron_identity(&self, d: usize) -> DMatrix<f64> {
        self.to_f64().kronecker(&DMatrix::identity(d, d))
    }
}
