//! Ground-truth and baseline solvers: exact maximum clique for desk-scale
//! verification, and a simplified random-restart local search.

use crate::graph::Graph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default node cap for the exact solver.
pub const DEFAULT_EXACT_NODE_CAP: usize = 200;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "graph has {n} nodes, above the exact-solver cap of {cap}; \
         pass an explicit larger cap to override"
    )]
    NodeCapExceeded { n: usize, cap: usize },
    #[error("reference clique size must be >= 1")]
    ZeroReference,
}

/// Fixed-capacity bitset over node ids.
#[derive(Clone, PartialEq, Eq, Debug)]
struct NodeSet {
    words: Vec<u64>,
}

impl NodeSet {
    fn empty(n: usize) -> Self {
        NodeSet {
            words: vec![0; n.div_ceil(64)],
        }
    }

    fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        for v in 0..n {
            s.insert(v);
        }
        s
    }

    fn insert(&mut self, v: usize) {
        self.words[v / 64] |= 1 << (v % 64);
    }

    fn remove(&mut self, v: usize) {
        self.words[v / 64] &= !(1 << (v % 64));
    }

    fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn intersection(&self, other: &NodeSet) -> NodeSet {
        NodeSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    fn intersection_count(&self, other: &NodeSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    fn difference(&self, other: &NodeSet) -> NodeSet {
        NodeSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }
}

fn neighbor_sets(g: &Graph) -> Vec<NodeSet> {
    let n = g.node_count();
    (0..n)
        .map(|v| {
            let mut s = NodeSet::empty(n);
            for &u in g.neighbors(v) {
                s.insert(u);
            }
            s
        })
        .collect()
}

struct Frame {
    clique: Vec<usize>,
    p: NodeSet,
    x: NodeSet,
    candidates: Vec<usize>,
    next: usize,
}

fn make_frame(clique: Vec<usize>, p: NodeSet, x: NodeSet, nbr: &[NodeSet]) -> Frame {
    // Pivot on the P-or-X node with the most candidates in P.
    let pivot = p
        .iter()
        .chain(x.iter())
        .max_by_key(|&u| nbr[u].intersection_count(&p));
    let candidates: Vec<usize> = match pivot {
        Some(u) => p.difference(&nbr[u]).iter().collect(),
        None => p.iter().collect(),
    };
    Frame {
        clique,
        p,
        x,
        candidates,
        next: 0,
    }
}

/// Exact maximum clique via Bron-Kerbosch enumeration with pivoting, run
/// iteratively on an explicit stack with a best-size bound.
///
/// The cap (default 200) guards against accidentally feeding the
/// exponential search a huge graph; pass `Some(bigger)` to override.
pub fn exact_max_clique(g: &Graph, node_cap: Option<usize>) -> Result<Vec<usize>, OracleError> {
    let n = g.node_count();
    let cap = node_cap.unwrap_or(DEFAULT_EXACT_NODE_CAP);
    if n > cap {
        return Err(OracleError::NodeCapExceeded { n, cap });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let nbr = neighbor_sets(g);
    let mut best: Vec<usize> = Vec::new();
    let mut stack = vec![make_frame(
        Vec::new(),
        NodeSet::full(n),
        NodeSet::empty(n),
        &nbr,
    )];
    while let Some(frame) = stack.last_mut() {
        if frame.clique.len() + frame.p.count() <= best.len() {
            stack.pop();
            continue;
        }
        let Some(&v) = frame.candidates.get(frame.next) else {
            stack.pop();
            continue;
        };
        frame.next += 1;
        let child_p = frame.p.intersection(&nbr[v]);
        let child_x = frame.x.intersection(&nbr[v]);
        let mut child_clique = frame.clique.clone();
        child_clique.push(v);
        frame.p.remove(v);
        frame.x.insert(v);
        if child_p.is_empty() {
            if child_x.is_empty() && child_clique.len() > best.len() {
                best = child_clique;
            }
            continue;
        }
        if child_clique.len() + child_p.count() > best.len() {
            stack.push(make_frame(child_clique, child_p, child_x, &nbr));
        }
    }
    best.sort_unstable();
    Ok(best)
}

/// Restart and iteration budget for [`local_search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeuristicConfig {
    /// Random restarts (eta_1).
    pub restarts: usize,
    /// Max improvement iterations per restart (eta_2).
    pub max_iters: usize,
    pub seed: u64,
}

impl HeuristicConfig {
    pub fn new(restarts: usize, max_iters: usize, seed: u64) -> Self {
        assert!(restarts >= 1 && max_iters >= 1, "budgets must be >= 1");
        HeuristicConfig {
            restarts,
            max_iters,
            seed,
        }
    }
}

/// Nodes outside `clique` adjacent to every member except `skip`.
fn admissible_excluding(
    n: usize,
    nbr: &[NodeSet],
    clique: &[usize],
    skip: Option<usize>,
) -> NodeSet {
    let mut cand = NodeSet::full(n);
    for &u in clique {
        if Some(u) == skip {
            continue;
        }
        cand = cand.intersection(&nbr[u]);
    }
    for &u in clique {
        cand.remove(u);
    }
    if let Some(s) = skip {
        cand.remove(s);
    }
    cand
}

/// Simplified random-restart local search baseline.
///
/// Per restart: greedy-grow a clique from a random seed node, then iterate
/// up to `max_iters` moves: add an admissible node if one exists, otherwise
/// try swapping one member out for two admissible ones, otherwise make a
/// random same-size plateau swap. The best clique across restarts wins.
/// Deterministic for a fixed seed.
pub fn local_search(g: &Graph, cfg: &HeuristicConfig) -> Vec<usize> {
    let n = g.node_count();
    if n == 0 {
        return Vec::new();
    }
    let nbr = neighbor_sets(g);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Vec<usize> = Vec::new();

    for _ in 0..cfg.restarts.max(1) {
        let seed_node = rng.gen_range(0..n);
        let mut clique = vec![seed_node];
        let mut cand = nbr[seed_node].clone();

        // Greedy growth to a maximal clique.
        loop {
            let options: Vec<usize> = cand.iter().collect();
            if options.is_empty() {
                break;
            }
            let v = options[rng.gen_range(0..options.len())];
            clique.push(v);
            cand = cand.intersection(&nbr[v]);
            cand.remove(v);
        }

        for _ in 0..cfg.max_iters.max(1) {
            // Move 1: plain growth.
            let cand = admissible_excluding(n, &nbr, &clique, None);
            let grow: Vec<usize> = cand.iter().collect();
            if !grow.is_empty() {
                let v = grow[rng.gen_range(0..grow.len())];
                clique.push(v);
                continue;
            }

            // Move 2: (1,2)-swap — drop one member, add an adjacent
            // admissible pair.
            let mut members = clique.clone();
            members.shuffle(&mut rng);
            let mut swapped = false;
            'swap: for &out in &members {
                let pool = admissible_excluding(n, &nbr, &clique, Some(out));
                for u in pool.iter() {
                    let partners = pool.intersection(&nbr[u]);
                    let w = partners.iter().next();
                    if let Some(w) = w {
                        clique.retain(|&m| m != out);
                        clique.push(u);
                        clique.push(w);
                        swapped = true;
                        break 'swap;
                    }
                }
            }
            if swapped {
                continue;
            }

            // Move 3: plateau swap to escape the local optimum.
            let out = clique[rng.gen_range(0..clique.len())];
            let pool = admissible_excluding(n, &nbr, &clique, Some(out));
            let options: Vec<usize> = pool.iter().collect();
            if options.is_empty() {
                break; // fully stuck; next restart
            }
            if clique.len() > best.len() {
                best = clique.clone();
            }
            let v = options[rng.gen_range(0..options.len())];
            clique.retain(|&m| m != out);
            clique.push(v);
        }

        if clique.len() > best.len() {
            best = clique;
        }
    }

    best.sort_unstable();
    debug_assert!(g.is_clique(&best));
    best
}

/// Predicted size over reference size; may exceed 1 when the reference is
/// itself an approximation.
pub fn approximation_score(predicted: usize, reference: usize) -> Result<f64, OracleError> {
    if reference == 0 {
        return Err(OracleError::ZeroReference);
    }
    Ok(predicted as f64 / reference as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{planted_clique, rb_hard};
    use crate::dense::brute_force_max_clique;
    use crate::graph::Graph;

    #[test]
    fn exact_on_complete_graph() {
        let g = planted_clique(5, 1.0, 5, 0).unwrap().graph;
        assert_eq!(exact_max_clique(&g, None).unwrap().len(), 5);
    }

    #[test]
    fn exact_on_five_cycle() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], 5).unwrap();
        let mc = exact_max_clique(&g, None).unwrap();
        assert_eq!(mc.len(), 2);
        assert_eq!(mc.len(), brute_force_max_clique(&g).len());
    }

    #[test]
    fn exact_respects_planted_clique() {
        let inst = planted_clique(30, 0.2, 6, 3).unwrap();
        assert!(inst.graph.is_clique(inst.planted.as_ref().unwrap()));
        let mc = exact_max_clique(&inst.graph, None).unwrap();
        assert!(mc.len() >= 6);
        assert!(inst.graph.is_clique(&mc));
    }

    #[test]
    fn exact_matches_brute_force_on_random_graphs() {
        for seed in 0..40 {
            let n = 6 + (seed as usize % 7);
            let g = planted_clique(n, 0.5, 2, seed + 100).unwrap().graph;
            let fast = exact_max_clique(&g, None).unwrap();
            let slow = brute_force_max_clique(&g);
            assert_eq!(fast.len(), slow.len(), "seed {seed}");
            assert!(g.is_clique(&fast));
        }
    }

    #[test]
    fn exact_rejects_over_cap() {
        let inst = planted_clique(50, 0.1, 3, 5).unwrap();
        match exact_max_clique(&inst.graph, Some(40)) {
            Err(OracleError::NodeCapExceeded { n: 50, cap: 40 }) => {}
            other => panic!("unexpected result {other:?}"),
        }
        assert!(exact_max_clique(&inst.graph, Some(50)).is_ok());
    }

    #[test]
    fn exact_solves_rb_instances() {
        let inst = rb_hard(6, 5, 0.5, 11).unwrap();
        let mc = exact_max_clique(&inst.graph, None).unwrap();
        assert_eq!(mc.len(), 6);
    }

    #[test]
    fn local_search_saturates_complete_graphs() {
        let g = planted_clique(12, 1.0, 12, 7).unwrap().graph;
        let found = local_search(&g, &HeuristicConfig::new(1, 1, 0));
        assert_eq!(found.len(), 12);
    }

    #[test]
    fn local_search_on_five_cycle() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], 5).unwrap();
        let found = local_search(&g, &HeuristicConfig::new(3, 20, 1));
        assert_eq!(found.len(), brute_force_max_clique(&g).len());
    }

    #[test]
    fn local_search_is_deterministic_and_valid() {
        let g = planted_clique(40, 0.3, 7, 9).unwrap().graph;
        let cfg = HeuristicConfig::new(4, 50, 123);
        let a = local_search(&g, &cfg);
        let b = local_search(&g, &cfg);
        assert_eq!(a, b);
        assert!(g.is_clique(&a));
    }

    #[test]
    fn local_search_never_beats_exact() {
        for seed in 0..20 {
            let g = planted_clique(16, 0.45, 4, seed + 300).unwrap().graph;
            let exact = exact_max_clique(&g, None).unwrap();
            let found = local_search(&g, &HeuristicConfig::new(3, 30, seed));
            assert!(found.len() <= exact.len());
        }
    }

    #[test]
    fn bigger_budgets_help_on_average() {
        let mut small_total = 0usize;
        let mut large_total = 0usize;
        for seed in 0..20 {
            let g = planted_clique(50, 0.2, 8, seed + 900).unwrap().graph;
            small_total += local_search(&g, &HeuristicConfig::new(1, 10, seed)).len();
            large_total += local_search(&g, &HeuristicConfig::new(5, 100, seed)).len();
        }
        assert!(
            large_total >= small_total,
            "larger budget found {large_total} vs {small_total}"
        );
    }

    #[test]
    fn approximation_score_examples() {
        assert_eq!(approximation_score(9, 10).unwrap(), 0.9);
        assert_eq!(approximation_score(7, 7).unwrap(), 1.0);
        assert_eq!(approximation_score(11, 10).unwrap(), 1.1);
        assert!(matches!(
            approximation_score(3, 0),
            Err(OracleError::ZeroReference)
        ));
    }
}
