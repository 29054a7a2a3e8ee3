//! Immutable sparse undirected graph and the linear operators built on it.
//!
//! The graph is stored in compressed form (per-node sorted neighbor lists).
//! All operators are applied matrix-free: `P^t X` runs as `t` sparse passes,
//! dyadic wavelet powers reuse intermediates, and the complement adjacency
//! is never materialized (see [`Graph::complement_quad_form`]).

use ndarray::Array2;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) references a node >= node count {2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("edge list parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Undirected simple graph with compressed sparse adjacency.
///
/// Immutable after construction and safe to share across threads; every
/// operator application below is a pure function of its inputs.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    degrees: Vec<usize>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("nodes", &self.node_count())
            .field("edges", &self.edge_count())
            .finish()
    }
}

impl Graph {
    /// Build a graph from undirected edge pairs over nodes `0..n`.
    ///
    /// Duplicate and reversed pairs are deduplicated. Self-loops and
    /// out-of-range endpoints are rejected.
    pub fn from_edge_list(pairs: &[(usize, usize)], n: usize) -> Result<Self, GraphError> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in pairs {
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if u >= n || v >= n {
                return Err(GraphError::NodeOutOfRange(u, v, n));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut degrees = Vec::with_capacity(n);
        offsets.push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            degrees.push(list.len());
            offsets.push(neighbors.len());
        }
        Ok(Graph {
            offsets,
            neighbors,
            degrees,
        })
    }

    pub fn node_count(&self) -> usize {
        self.degrees.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        if u == v {
            return false;
        }
        // Search the shorter list.
        let (a, b) = if self.degrees[u] <= self.degrees[v] {
            (u, v)
        } else {
            (v, u)
        };
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count())
            .flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u, v)))
            .filter(|&(u, v)| u < v)
    }

    /// One application of the lazy random walk `P = (I + W D^{-1}) / 2`.
    ///
    /// `P` is column-stochastic, so each column sum of `X` is preserved.
    /// Isolated nodes stay put (`P e_v = e_v`), which keeps the operator
    /// well-defined and mass-conserving without `D^{-1}`.
    fn walk_pass(&self, x: &Array2<f64>) -> Array2<f64> {
        let n = self.node_count();
        assert_eq!(x.nrows(), n, "row count must match node count");
        let c = x.ncols();
        let mut out = Array2::<f64>::zeros((n, c));
        for i in 0..n {
            if self.degrees[i] == 0 {
                for j in 0..c {
                    out[(i, j)] = x[(i, j)];
                }
                continue;
            }
            for j in 0..c {
                out[(i, j)] = 0.5 * x[(i, j)];
            }
            for &nb in self.neighbors(i) {
                let w = 0.5 / self.degrees[nb] as f64;
                for j in 0..c {
                    out[(i, j)] += w * x[(nb, j)];
                }
            }
        }
        out
    }

    /// One application of the transposed walk `P^T = (I + D^{-1} W) / 2`.
    fn walk_pass_transpose(&self, x: &Array2<f64>) -> Array2<f64> {
        let n = self.node_count();
        assert_eq!(x.nrows(), n, "row count must match node count");
        let c = x.ncols();
        let mut out = Array2::<f64>::zeros((n, c));
        for i in 0..n {
            if self.degrees[i] == 0 {
                for j in 0..c {
                    out[(i, j)] = x[(i, j)];
                }
                continue;
            }
            let w = 0.5 / self.degrees[i] as f64;
            for j in 0..c {
                out[(i, j)] = 0.5 * x[(i, j)];
            }
            for &nb in self.neighbors(i) {
                for j in 0..c {
                    out[(i, j)] += w * x[(nb, j)];
                }
            }
        }
        out
    }

    /// `P^t X` as `t` sparse passes.
    pub fn apply_walk(&self, x: &Array2<f64>, t: usize) -> Array2<f64> {
        let mut cur = x.clone();
        for _ in 0..t {
            cur = self.walk_pass(&cur);
        }
        cur
    }

    /// `(P^T)^t X`; the backward rule for [`Graph::apply_walk`].
    pub fn apply_walk_transpose(&self, x: &Array2<f64>, t: usize) -> Array2<f64> {
        let mut cur = x.clone();
        for _ in 0..t {
            cur = self.walk_pass_transpose(&cur);
        }
        cur
    }

    /// Diffusion wavelet `Psi_k X`: `X - P X` for k = 0, otherwise
    /// `P^{2^{k-1}} X - P^{2^k} X`, reusing the half-scale intermediate.
    pub fn apply_wavelet(&self, x: &Array2<f64>, k: usize) -> Array2<f64> {
        if k == 0 {
            return x - &self.apply_walk(x, 1);
        }
        let half = self.apply_walk(x, 1 << (k - 1));
        let full = self.apply_walk(&half, 1 << (k - 1));
        half - full
    }

    /// `Psi_k^T X`, built from transposed walk passes.
    pub fn apply_wavelet_transpose(&self, x: &Array2<f64>, k: usize) -> Array2<f64> {
        if k == 0 {
            return x - &self.apply_walk_transpose(x, 1);
        }
        let half = self.apply_walk_transpose(x, 1 << (k - 1));
        let full = self.apply_walk_transpose(&half, 1 << (k - 1));
        half - full
    }

    /// `A^r X` with the renormalized adjacency
    /// `A = (D+I)^{-1/2} (W+I) (D+I)^{-1/2}`, a symmetric operator.
    pub fn apply_renorm_adj(&self, x: &Array2<f64>, r: usize) -> Array2<f64> {
        assert!(r >= 1, "renormalized adjacency power must be >= 1");
        let n = self.node_count();
        assert_eq!(x.nrows(), n, "row count must match node count");
        let c = x.ncols();
        let inv_sqrt: Vec<f64> = self
            .degrees
            .iter()
            .map(|&d| 1.0 / ((d as f64 + 1.0).sqrt()))
            .collect();
        let mut cur = x.clone();
        for _ in 0..r {
            let mut out = Array2::<f64>::zeros((n, c));
            for i in 0..n {
                for j in 0..c {
                    out[(i, j)] = inv_sqrt[i] * cur[(i, j)];
                }
                for &nb in self.neighbors(i) {
                    let w = inv_sqrt[nb];
                    for j in 0..c {
                        out[(i, j)] += w * cur[(nb, j)];
                    }
                }
                for j in 0..c {
                    out[(i, j)] *= inv_sqrt[i];
                }
            }
            cur = out;
        }
        cur
    }

    /// `p^T W p`, i.e. twice the sum of `p_u p_v` over undirected edges.
    pub fn quad_form(&self, p: &[f64]) -> f64 {
        assert_eq!(p.len(), self.node_count());
        let mut acc = 0.0;
        for i in 0..self.node_count() {
            let mut row = 0.0;
            for &nb in self.neighbors(i) {
                row += p[nb];
            }
            acc += p[i] * row;
        }
        acc
    }

    /// `p^T Wbar p` over the implicit complement graph, evaluated in
    /// `O(|E| + n)` via `(sum p)^2 - p^T W p - sum p^2`.
    pub fn complement_quad_form(&self, p: &[f64]) -> f64 {
        assert_eq!(p.len(), self.node_count());
        let s: f64 = p.iter().sum();
        let sq: f64 = p.iter().map(|v| v * v).sum();
        s * s - self.quad_form(p) - sq
    }

    /// True iff every distinct pair in `nodes` is adjacent.
    ///
    /// Duplicates in the slice are ignored; empty and singleton sets are
    /// cliques vacuously.
    pub fn is_clique(&self, nodes: &[usize]) -> bool {
        let mut set: Vec<usize> = nodes.to_vec();
        set.sort_unstable();
        set.dedup();
        for (i, &u) in set.iter().enumerate() {
            for &v in &set[i + 1..] {
                if !self.has_edge(u, v) {
                    return false;
                }
            }
        }
        true
    }
}

/// A fixed linear operator derived from a graph, applied matrix-free.
///
/// `Walk` and `Wavelet` are not symmetric; their transposes run the same
/// dyadic pass structure over `P^T`. `RenormAdj` is its own transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphOp {
    /// `P^steps`
    Walk { steps: usize },
    /// `Psi_scale`
    Wavelet { scale: usize },
    /// `A^power`
    RenormAdj { power: usize },
}

impl GraphOp {
    pub fn apply(&self, g: &Graph, x: &Array2<f64>) -> Array2<f64> {
        match *self {
            GraphOp::Walk { steps } => g.apply_walk(x, steps),
            GraphOp::Wavelet { scale } => g.apply_wavelet(x, scale),
            GraphOp::RenormAdj { power } => g.apply_renorm_adj(x, power),
        }
    }

    pub fn apply_transpose(&self, g: &Graph, x: &Array2<f64>) -> Array2<f64> {
        match *self {
            GraphOp::Walk { steps } => g.apply_walk_transpose(x, steps),
            GraphOp::Wavelet { scale } => g.apply_wavelet_transpose(x, scale),
            GraphOp::RenormAdj { power } => g.apply_renorm_adj(x, power),
        }
    }
}

/// Parse the edge-list text format: one `u v` pair per line, 0-indexed,
/// `#` comment lines ignored, optional `n <count>` header. Without a
/// header the node count is `max index + 1`.
pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut pairs = Vec::new();
    let mut declared_n: Option<usize> = None;
    let mut max_idx: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let first = it.next().unwrap();
        if first == "n" {
            let count = it
                .next()
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| GraphError::Parse {
                    line: lineno,
                    message: "header must be `n <count>`".into(),
                })?;
            declared_n = Some(count);
            continue;
        }
        let u: usize = first.parse().map_err(|_| GraphError::Parse {
            line: lineno,
            message: format!("invalid node index `{first}`"),
        })?;
        let v: usize = it
            .next()
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| GraphError::Parse {
                line: lineno,
                message: "expected two node indices".into(),
            })?;
        if it.next().is_some() {
            return Err(GraphError::Parse {
                line: lineno,
                message: "expected exactly two node indices".into(),
            });
        }
        if u == v {
            return Err(GraphError::Parse {
                line: lineno,
                message: format!("self-loop on node {u}"),
            });
        }
        max_idx = Some(max_idx.map_or(u.max(v), |m: usize| m.max(u).max(v)));
        pairs.push((u, v));
    }
    let n = declared_n.unwrap_or_else(|| max_idx.map_or(0, |m| m + 1));
    Graph::from_edge_list(&pairs, n)
}

/// Serialize a graph in the edge-list text format, with an `n` header so
/// trailing isolated nodes round-trip.
pub fn write_edge_list(g: &Graph) -> String {
    let mut out = String::new();
    out.push_str(&format!("n {}\n", g.node_count()));
    for (u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}
