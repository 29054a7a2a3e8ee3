//! Per-node input statistics: eccentricity, clustering coefficient, log-degree.

use crate::graph::Graph;
use ndarray::Array2;
use rayon::prelude::*;
use std::collections::VecDeque;

/// Column order of [`FeatureMatrix::values`].
pub const FEATURE_NAMES: [&str; 3] = ["ecc", "cc", "logdeg"];

/// The n x 3 model input X.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn node_count(&self) -> usize {
        self.values.nrows()
    }

    /// Per-column z-score; columns with zero variance are left centered at 0.
    pub fn zscore(&self) -> FeatureMatrix {
        let n = self.values.nrows() as f64;
        let mut out = self.values.clone();
        for mut col in out.columns_mut() {
            let mean = col.sum() / n.max(1.0);
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n.max(1.0);
            let sd = var.sqrt();
            for v in col.iter_mut() {
                *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
            }
        }
        FeatureMatrix { values: out }
    }

    /// CSV export with the `ecc,cc,logdeg` header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ecc,cc,logdeg\n");
        for row in self.values.rows() {
            out.push_str(&format!("{},{},{}\n", row[0], row[1], row[2]));
        }
        out
    }
}

fn bfs_eccentricity(g: &Graph, source: usize, dist: &mut [i64], queue: &mut VecDeque<usize>) -> f64 {
    dist.fill(-1);
    queue.clear();
    dist[source] = 0;
    queue.push_back(source);
    let mut ecc = 0i64;
    while let Some(u) = queue.pop_front() {
        let du = dist[u];
        ecc = ecc.max(du);
        for &v in g.neighbors(u) {
            if dist[v] < 0 {
                dist[v] = du + 1;
                queue.push_back(v);
            }
        }
    }
    ecc as f64
}

/// Maximum shortest-path distance from each node within its connected
/// component; unreachable nodes are excluded, so values stay finite.
pub fn eccentricity(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    (0..n)
        .into_par_iter()
        .map(|v| {
            let mut dist = vec![-1i64; n];
            let mut queue = VecDeque::new();
            bfs_eccentricity(g, v, &mut dist, &mut queue)
        })
        .collect()
}

fn sorted_intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Local clustering coefficient: edges among neighbors over `d choose 2`.
/// Nodes of degree < 2 get 0.
pub fn clustering_coefficient(g: &Graph) -> Vec<f64> {
    (0..g.node_count())
        .into_par_iter()
        .map(|v| {
            let d = g.degree(v);
            if d < 2 {
                return 0.0;
            }
            let nv = g.neighbors(v);
            // Each neighbor-pair edge is seen from both endpoints.
            let twice_links: usize = nv
                .iter()
                .map(|&u| sorted_intersection_size(nv, g.neighbors(u)))
                .sum();
            twice_links as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

/// Natural log of the degree, with isolated nodes mapped to 0
/// (i.e. `ln(max(d, 1))`) to keep values finite.
pub fn log_degree(g: &Graph) -> Vec<f64> {
    g.degrees()
        .iter()
        .map(|&d| (d.max(1) as f64).ln())
        .collect()
}

/// Assemble the model input X with columns (ecc, cc, logdeg).
pub fn compute_features(g: &Graph) -> FeatureMatrix {
    let n = g.node_count();
    let ecc = eccentricity(g);
    let cc = clustering_coefficient(g);
    let ld = log_degree(g);
    let mut values = Array2::<f64>::zeros((n, 3));
    for v in 0..n {
        values[(v, 0)] = ecc[v];
        values[(v, 1)] = cc[v];
        values[(v, 2)] = ld[v];
    }
    FeatureMatrix { values }
}
