//! Dense reference implementations for small graphs (n <= 64).
//!
//! These materialize the operators that the sparse paths in [`crate::graph`]
//! never build, and enumerate cliques by brute force. They exist so the unit
//! and acceptance suites can check the fast paths against an independent
//! route; nothing here is meant for production-size graphs.

use crate::graph::Graph;
use ndarray::Array2;

const MAX_DENSE_NODES: usize = 64;

fn check_size(g: &Graph) {
    assert!(
        g.node_count() <= MAX_DENSE_NODES,
        "dense reference operators are limited to {MAX_DENSE_NODES} nodes"
    );
}

/// Dense adjacency matrix W.
pub fn adjacency_matrix(g: &Graph) -> Array2<f64> {
    check_size(g);
    let n = g.node_count();
    let mut w = Array2::<f64>::zeros((n, n));
    for (u, v) in g.edges() {
        w[(u, v)] = 1.0;
        w[(v, u)] = 1.0;
    }
    w
}

/// Dense complement adjacency `Wbar = 1 - (I + W)`.
pub fn complement_matrix(g: &Graph) -> Array2<f64> {
    check_size(g);
    let n = g.node_count();
    let w = adjacency_matrix(g);
    let mut wbar = Array2::<f64>::ones((n, n)) - &w;
    for i in 0..n {
        wbar[(i, i)] = 0.0;
    }
    wbar
}

/// Dense lazy walk matrix `P = (I + W D^{-1}) / 2`, with isolated nodes
/// fixed in place (column `v` equals `e_v`).
pub fn walk_matrix(g: &Graph) -> Array2<f64> {
    check_size(g);
    let n = g.node_count();
    let mut p = Array2::<f64>::zeros((n, n));
    for v in 0..n {
        if g.degree(v) == 0 {
            p[(v, v)] = 1.0;
            continue;
        }
        p[(v, v)] = 0.5;
        let w = 0.5 / g.degree(v) as f64;
        for &u in g.neighbors(v) {
            p[(u, v)] = w;
        }
    }
    p
}

fn matrix_power(m: &Array2<f64>, t: usize) -> Array2<f64> {
    let n = m.nrows();
    let mut acc = Array2::<f64>::eye(n);
    for _ in 0..t {
        acc = acc.dot(m);
    }
    acc
}

/// Dense wavelet matrix `Psi_k`.
pub fn wavelet_matrix(g: &Graph, k: usize) -> Array2<f64> {
    let p = walk_matrix(g);
    if k == 0 {
        return Array2::eye(g.node_count()) - &p;
    }
    matrix_power(&p, 1 << (k - 1)) - matrix_power(&p, 1 << k)
}

/// Dense renormalized adjacency `A = (D+I)^{-1/2} (W+I) (D+I)^{-1/2}`.
pub fn renorm_adj_matrix(g: &Graph) -> Array2<f64> {
    check_size(g);
    let n = g.node_count();
    let mut a = Array2::<f64>::zeros((n, n));
    let inv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / ((g.degree(v) as f64 + 1.0).sqrt())).collect();
    for i in 0..n {
        a[(i, i)] = inv_sqrt[i] * inv_sqrt[i];
        for &j in g.neighbors(i) {
            a[(i, j)] = inv_sqrt[i] * inv_sqrt[j];
        }
    }
    a
}

/// Maximum clique by exhaustive subset enumeration. Only sensible for
/// n <= ~20; the tests stay well below that.
pub fn brute_force_max_clique(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    assert!(n <= 24, "brute-force enumeration is exponential in n");
    let mut best: Vec<usize> = Vec::new();
    for mask in 0u32..(1u32 << n) {
        if (mask.count_ones() as usize) <= best.len() {
            continue;
        }
        let nodes: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if g.is_clique(&nodes) {
            best = nodes;
        }
    }
    best
}
