//! Greedy multi-sampler clique decoder.
//!
//! Nodes are ranked by the probability vector; sampler `j` seeds a clique
//! at rank `j` and scans ranks `j+1..=tau` in order, accepting a candidate
//! whenever it stays adjacent to everything collected so far. The largest
//! of the `kappa` cliques wins, lowest sampler index on ties. Samplers
//! share the immutable ranking and run in parallel.

use crate::graph::Graph;
use rayon::prelude::*;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("decoder needs at least one node, got an empty graph")]
    EmptyGraph,
    #[error("kappa must be >= 1")]
    KappaZero,
    #[error("kappa ({kappa}) exceeds the effective sample length ({tau})")]
    KappaExceedsTau { kappa: usize, tau: usize },
    #[error("probability vector has {got} entries, graph has {want} nodes")]
    LengthMismatch { got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    /// Number of samplers kappa.
    pub kappa: usize,
    /// Sample length tau (clamped to n at decode time).
    pub tau: usize,
}

impl DecoderConfig {
    pub fn new(kappa: usize, tau: usize) -> Self {
        DecoderConfig { kappa, tau }
    }

    /// Default sample length: `min(n, 4 * expected clique size)` when an
    /// expected size is known, otherwise the whole ranking.
    pub fn auto_tau(n: usize, expected_clique_size: Option<usize>) -> usize {
        match expected_clique_size {
            Some(q) if q > 0 => n.min(4 * q),
            _ => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliqueResult {
    /// Clique members, ascending.
    pub nodes: Vec<usize>,
    pub size: usize,
    /// 1-based index of the winning sampler.
    pub sampler_index: usize,
    /// Decode wall-clock in seconds.
    pub elapsed: f64,
}

/// Node indices in descending probability order, ties broken by ascending
/// node index.
pub fn rank_nodes(p: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    order
}

/// Incremental clique test: can `v` join `clique`?
///
/// Equivalent to `is_clique(clique + v)` for a clique input; membership of
/// `v` itself therefore counts as acceptance.
pub fn candidate_accept(g: &Graph, clique: &[usize], v: usize) -> bool {
    if clique.contains(&v) {
        return true;
    }
    clique.iter().all(|&u| g.has_edge(u, v))
}

fn run_sampler(g: &Graph, ranking: &[usize], j: usize, tau: usize) -> Vec<usize> {
    let mut clique = vec![ranking[j - 1]];
    for &v in &ranking[j..tau] {
        if candidate_accept(g, &clique, v) {
            clique.push(v);
        }
    }
    clique
}

/// Run `kappa` greedy samplers over the top-`tau` ranked nodes and return
/// the largest clique found.
pub fn decode(g: &Graph, p: &[f64], cfg: &DecoderConfig) -> Result<CliqueResult, DecodeError> {
    let n = g.node_count();
    if n == 0 {
        return Err(DecodeError::EmptyGraph);
    }
    if p.len() != n {
        return Err(DecodeError::LengthMismatch { got: p.len(), want: n });
    }
    if cfg.kappa == 0 {
        return Err(DecodeError::KappaZero);
    }
    let tau = if cfg.tau > n {
        log::warn!("tau {} exceeds node count {n}; clamping", cfg.tau);
        n
    } else {
        cfg.tau
    };
    if cfg.kappa > tau {
        return Err(DecodeError::KappaExceedsTau { kappa: cfg.kappa, tau });
    }

    let start = Instant::now();
    let ranking = rank_nodes(p);
    let cliques: Vec<Vec<usize>> = (1..=cfg.kappa)
        .into_par_iter()
        .map(|j| run_sampler(g, &ranking, j, tau))
        .collect();
    let (winner, mut nodes) = cliques
        .into_iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
        .expect("kappa >= 1");
    nodes.sort_unstable();
    assert!(g.is_clique(&nodes), "decoder produced a non-clique");
    Ok(CliqueResult {
        size: nodes.len(),
        nodes,
        sampler_index: winner + 1,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::planted_clique;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_nodes_sorts_descending() {
        assert_eq!(rank_nodes(&[0.1, 0.9, 0.5]), vec![1, 2, 0]);
    }

    #[test]
    fn rank_nodes_breaks_ties_by_index() {
        assert_eq!(rank_nodes(&[0.5, 0.5, 0.5, 0.5]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn rank_nodes_matches_reference_sort_without_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p: Vec<f64> = (0..20).map(|_| rng.gen::<f64>()).collect();
        let ranked = rank_nodes(&p);
        let mut reference: Vec<usize> = (0..20).collect();
        reference.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap());
        assert_eq!(ranked, reference);
    }

    #[test]
    fn decode_saturates_complete_graph() {
        let g = planted_clique(4, 1.0, 4, 0).unwrap().graph;
        let result = decode(&g, &[0.4, 0.1, 0.9, 0.5], &DecoderConfig::new(1, 4)).unwrap();
        assert_eq!(result.nodes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn decode_one_hot_singleton() {
        let g = planted_clique(5, 0.5, 2, 1).unwrap().graph;
        let p = [0.0, 0.0, 1.0, 0.0, 0.0];
        let result = decode(&g, &p, &DecoderConfig::new(1, 1)).unwrap();
        assert_eq!(result.nodes, vec![2]);
        assert_eq!(result.sampler_index, 1);
    }

    #[test]
    fn decode_pendant_trap_needs_second_sampler() {
        // Triangle {0,1,2} plus pendant 3-0; the pendant outranks the
        // triangle, so a single sampler gets stuck at size 2.
        let g = crate::graph::Graph::from_edge_list(&[(0, 1), (1, 2), (0, 2), (3, 0)], 4).unwrap();
        let p = [0.90, 0.80, 0.70, 0.95];
        let one = decode(&g, &p, &DecoderConfig::new(1, 4)).unwrap();
        assert_eq!(one.nodes, vec![0, 3]);
        assert_eq!(one.size, 2);
        let two = decode(&g, &p, &DecoderConfig::new(2, 4)).unwrap();
        assert_eq!(two.nodes, vec![0, 1, 2]);
        assert_eq!(two.sampler_index, 2);
    }

    #[test]
    fn decode_clamps_tau_and_validates_kappa() {
        let g = planted_clique(3, 1.0, 3, 2).unwrap().graph;
        let p = [0.3, 0.2, 0.1];
        let ok = decode(&g, &p, &DecoderConfig::new(1, 10)).unwrap();
        assert_eq!(ok.size, 3);
        assert!(matches!(
            decode(&g, &p, &DecoderConfig::new(5, 10)),
            Err(DecodeError::KappaExceedsTau { kappa: 5, tau: 3 })
        ));
        assert!(matches!(
            decode(&g, &p, &DecoderConfig::new(0, 3)),
            Err(DecodeError::KappaZero)
        ));
    }

    #[test]
    fn candidate_accept_examples() {
        let g = crate::graph::Graph::from_edge_list(&[(0, 1), (1, 2), (0, 2)], 4).unwrap();
        // Node 3 has no neighbors at all.
        assert!(!candidate_accept(&g, &[0, 1], 3));
        assert!(candidate_accept(&g, &[0, 1], 2));
        // Existing member: the union is unchanged, still a clique.
        assert!(candidate_accept(&g, &[0, 1], 0));
    }

    #[test]
    fn candidate_accept_agrees_with_quadratic_form_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        'outer: for seed in 0..200 {
            let n = 5 + (seed as usize % 6);
            let inst = planted_clique(n, 0.5, 3, seed).unwrap();
            let g = &inst.graph;
            let clique = inst.planted.clone().unwrap();
            for _ in 0..8 {
                let v = rng.gen_range(0..n);
                let mut x = vec![0.0; n];
                for &u in &clique {
                    x[u] = 1.0;
                }
                x[v] = 1.0;
                let by_quad = g.complement_quad_form(&x).abs() < 1e-9;
                assert_eq!(candidate_accept(g, &clique, v), by_quad);
                checked += 1;
                if checked >= 1000 {
                    break 'outer;
                }
            }
        }
        assert!(checked >= 1000);
    }

    #[test]
    fn result_is_monotone_in_kappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..50 {
            let n = 12;
            let inst = planted_clique(n, 0.4, 4, seed + 500).unwrap();
            let p: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let k1 = 1 + (seed as usize % 3);
            let k2 = k1 + 1 + (seed as usize % 4);
            let tau = n;
            let r1 = decode(&inst.graph, &p, &DecoderConfig::new(k1, tau)).unwrap();
            let r2 = decode(&inst.graph, &p, &DecoderConfig::new(k2, tau)).unwrap();
            assert!(r2.size >= r1.size);
        }
    }

    #[test]
    fn ranking_is_invariant_under_monotone_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let inst = planted_clique(10, 0.5, 4, 800).unwrap();
        let p: Vec<f64> = (0..10).map(|_| rng.gen()).collect();
        let squashed: Vec<f64> = p.iter().map(|v| 0.3 * v + 0.1).collect();
        let exped: Vec<f64> = p.iter().map(|v| v.exp()).collect();
        assert_eq!(rank_nodes(&p), rank_nodes(&squashed));
        assert_eq!(rank_nodes(&p), rank_nodes(&exped));
        let cfg = DecoderConfig::new(3, 10);
        let base = decode(&inst.graph, &p, &cfg).unwrap();
        let alt = decode(&inst.graph, &exped, &cfg).unwrap();
        assert_eq!(base.nodes, alt.nodes);
    }

    #[test]
    fn indicator_probability_recovers_the_clique() {
        for seed in 0..20 {
            let n = 14;
            let inst = planted_clique(n, 0.3, 5, seed + 40).unwrap();
            let g = &inst.graph;
            let mc = crate::oracles::exact_max_clique(g, None).unwrap();
            let mut p = vec![0.0; n];
            for &v in &mc {
                p[v] = 1.0;
            }
            let result = decode(g, &p, &DecoderConfig::new(1, n)).unwrap();
            assert_eq!(result.size, mc.len(), "seed {seed}");
        }
    }
}
