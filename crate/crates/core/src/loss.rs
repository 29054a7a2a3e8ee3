//! The unsupervised two-term training objective and its cross-check form.
//!
//! `L(p) = -p^T W p + beta * p^T Wbar p`. The first term rewards mass on
//! highly connected nodes; the second vanishes exactly when the support of
//! `p` sits inside a clique, and is evaluated through the sparse identity
//! `p^T Wbar p = (sum p)^2 - p^T W p - sum p^2` so the complement is never
//! materialized.

use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub beta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { beta: 1.0 }
    }
}

impl LossConfig {
    /// The preset matching the cross-check form at `beta' = 1, gamma = 0`.
    pub fn quarter_beta() -> Self {
        LossConfig { beta: 0.25 }
    }
}

/// `-p^T W p + beta * p^T Wbar p`, in `O(|E| + n)`.
pub fn loss(p: &[f64], g: &Graph, cfg: &LossConfig) -> f64 {
    debug_assert!(cfg.beta >= 0.0, "beta must be non-negative");
    -g.quad_form(p) + cfg.beta * g.complement_quad_form(p)
}

/// True iff the epsilon-thresholded support `{v : p_v > eps}` is a clique,
/// i.e. the second loss term vanishes on it.
pub fn loss_support_certificate(p: &[f64], g: &Graph, eps: f64) -> bool {
    assert!(eps >= 0.0, "threshold must be non-negative");
    let support: Vec<usize> = (0..p.len()).filter(|&v| p[v] > eps).collect();
    g.is_clique(&support)
}

/// The penalty-form objective
/// `gamma - (beta' + 1) * p^T W p + (beta' / 2) * p^T Wbar p`,
/// with both quadratic forms evaluated by explicit pair enumeration
/// (`O(n^2)`), independently of the sparse identity used by [`loss`].
///
/// With `beta' = 1, gamma = 0`, half of this equals [`loss`] at
/// `beta = 1/4`.
pub fn loss_karalias_form(p: &[f64], g: &Graph, beta_prime: f64, gamma: f64) -> f64 {
    let n = g.node_count();
    assert_eq!(p.len(), n);
    let mut edge_sum = 0.0; // p^T W p over ordered adjacent pairs
    let mut non_edge_sum = 0.0; // p^T Wbar p over ordered non-adjacent pairs
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            if g.has_edge(u, v) {
                edge_sum += p[u] * p[v];
            } else {
                non_edge_sum += p[u] * p[v];
            }
        }
    }
    gamma - (beta_prime + 1.0) * edge_sum + (beta_prime / 2.0) * non_edge_sum
}
