//! Synthetic instance generators and dataset I/O.
//!
//! Two generator families: planted cliques in background noise (exact
//! ground truth stays cheap), and forced-satisfiable group-structured
//! instances where `k` groups of `d` nodes are independent sets, a hidden
//! one-node-per-group assignment is kept fully interconnected, and a
//! hardness-controlled fraction of the remaining cross-group pairs is
//! removed. Any clique picks at most one node per group, so the maximum
//! clique size is exactly `k`.
//!
//! A dataset on disk is a directory of edge-list files plus a
//! `manifest.json` naming each file and its known structure.

use crate::graph::{parse_edge_list, write_edge_list, Graph, GraphError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid generator parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Provenance of a generated instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub generator: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
}

/// One graph plus whatever is known about its maximum clique.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub graph: Graph,
    /// A known clique embedded by the generator, when any.
    pub planted: Option<Vec<usize>>,
    /// Known maximum clique size, when the construction guarantees one.
    pub mc_size: Option<usize>,
    pub meta: InstanceMeta,
}

impl Instance {
    /// Best prior estimate of the clique size, for decoder defaults.
    pub fn expected_clique_size(&self) -> Option<usize> {
        self.mc_size.or_else(|| self.planted.as_ref().map(|p| p.len()))
    }

    /// Wrap an external edge-list file with no generator metadata.
    pub fn from_edge_list_file(path: &Path) -> Result<Instance, DatagenError> {
        let text = std::fs::read_to_string(path)?;
        let graph = parse_edge_list(&text)?;
        Ok(Instance {
            graph,
            planted: None,
            mc_size: None,
            meta: InstanceMeta {
                generator: "external".into(),
                params: BTreeMap::new(),
                seed: 0,
            },
        })
    }
}

/// splitmix64-style mix so each instance gets an independent stream.
fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `q` uniformly chosen nodes fully interconnected; every other unordered
/// pair present independently with `edge_prob`.
pub fn planted_clique(
    n: usize,
    edge_prob: f64,
    q: usize,
    seed: u64,
) -> Result<Instance, DatagenError> {
    if q == 0 || q > n {
        return Err(DatagenError::InvalidParam(format!(
            "planted clique size q={q} must satisfy 1 <= q <= n={n}"
        )));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(DatagenError::InvalidParam(format!(
            "edge probability {edge_prob} must lie in [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planted = rand::seq::index::sample(&mut rng, n, q).into_vec();
    planted.sort_unstable();
    let in_planted = {
        let mut mask = vec![false; n];
        for &v in &planted {
            mask[v] = true;
        }
        mask
    };
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            // Forced pairs short-circuit before consuming a random draw.
            if (in_planted[u] && in_planted[v]) || rng.gen_bool(edge_prob) {
                pairs.push((u, v));
            }
        }
    }
    let graph = Graph::from_edge_list(&pairs, n)?;
    let mut params = BTreeMap::new();
    params.insert("n".into(), n.to_string());
    params.insert("edge_prob".into(), edge_prob.to_string());
    params.insert("q".into(), q.to_string());
    Ok(Instance {
        graph,
        planted: Some(planted),
        mc_size: None,
        meta: InstanceMeta {
            generator: "planted".into(),
            params,
            seed,
        },
    })
}

/// Forced-satisfiable group-structured instance: `k` groups of `d` nodes,
/// no within-group edges, a hidden assignment kept fully interconnected,
/// and each remaining cross-group pair removed with probability
/// `hardness`. The maximum clique size is exactly `k`.
pub fn rb_hard(
    groups: usize,
    domain: usize,
    hardness: f64,
    seed: u64,
) -> Result<Instance, DatagenError> {
    if groups < 2 || domain < 2 {
        return Err(DatagenError::InvalidParam(format!(
            "groups={groups} and domain={domain} must both be >= 2"
        )));
    }
    if !(0.0..=1.0).contains(&hardness) {
        return Err(DatagenError::InvalidParam(format!(
            "hardness {hardness} must lie in [0, 1]"
        )));
    }
    let n = groups * domain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignment: Vec<usize> = (0..groups)
        .map(|g| g * domain + rng.gen_range(0..domain))
        .collect();
    let in_assignment = {
        let mut mask = vec![false; n];
        for &v in &assignment {
            mask[v] = true;
        }
        mask
    };
    let mut pairs = Vec::new();
    for g1 in 0..groups {
        for g2 in (g1 + 1)..groups {
            for u in (g1 * domain)..((g1 + 1) * domain) {
                for v in (g2 * domain)..((g2 + 1) * domain) {
                    // Assignment pairs short-circuit before the removal draw.
                    if (in_assignment[u] && in_assignment[v]) || !rng.gen_bool(hardness) {
                        pairs.push((u, v));
                    }
                }
            }
        }
    }
    let graph = Graph::from_edge_list(&pairs, n)?;
    let mut params = BTreeMap::new();
    params.insert("k".into(), groups.to_string());
    params.insert("d".into(), domain.to_string());
    params.insert("h".into(), hardness.to_string());
    Ok(Instance {
        graph,
        planted: Some(assignment),
        mc_size: Some(groups),
        meta: InstanceMeta {
            generator: "rb".into(),
            params,
            seed,
        },
    })
}

/// A named collection of instances with a decoder hint.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// Decoder sampler count suggested by the generating preset.
    pub suggested_kappa: Option<usize>,
    pub instances: Vec<Instance>,
}

/// Generator presets; hardness classes follow the 0.2 / 0.5 / 0.8 ladder
/// and sizes target roughly 180 and 1300 nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    SmallEasy,
    SmallMedium,
    SmallHard,
    LargeEasy,
    LargeMedium,
    LargeHard,
    Planted,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::SmallEasy,
        Preset::SmallMedium,
        Preset::SmallHard,
        Preset::LargeEasy,
        Preset::LargeMedium,
        Preset::LargeHard,
        Preset::Planted,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::SmallEasy => "small-easy",
            Preset::SmallMedium => "small-medium",
            Preset::SmallHard => "small-hard",
            Preset::LargeEasy => "large-easy",
            Preset::LargeMedium => "large-medium",
            Preset::LargeHard => "large-hard",
            Preset::Planted => "planted",
        }
    }

    fn hardness(&self) -> Option<f64> {
        match self {
            Preset::SmallEasy | Preset::LargeEasy => Some(0.2),
            Preset::SmallMedium | Preset::LargeMedium => Some(0.5),
            Preset::SmallHard | Preset::LargeHard => Some(0.8),
            Preset::Planted => None,
        }
    }

    pub fn suggested_kappa(&self) -> usize {
        match self {
            Preset::SmallHard | Preset::LargeHard | Preset::Planted => 10,
            _ => 1,
        }
    }
}

impl FromStr for Preset {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                DatagenError::InvalidParam(format!(
                    "unknown preset `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Generate `count` instances under a preset, each from an independent
/// seeded stream.
pub fn generate_preset(preset: Preset, count: usize, seed: u64) -> Result<Dataset, DatagenError> {
    if count == 0 {
        return Err(DatagenError::InvalidParam("count must be >= 1".into()));
    }
    let instances: Result<Vec<Instance>, DatagenError> = (0..count)
        .map(|i| {
            let inst_seed = mix_seed(seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(inst_seed ^ 0x5EED);
            match preset {
                Preset::Planted => planted_clique(50, 0.2, 8, inst_seed),
                Preset::SmallEasy | Preset::SmallMedium | Preset::SmallHard => {
                    // Group count fixed, domain jittered for size spread
                    // around ~180 nodes.
                    let domain = rng.gen_range(10..=14);
                    rb_hard(15, domain, preset.hardness().unwrap(), inst_seed)
                }
                Preset::LargeEasy | Preset::LargeMedium | Preset::LargeHard => {
                    let domain = rng.gen_range(40..=60);
                    rb_hard(26, domain, preset.hardness().unwrap(), inst_seed)
                }
            }
        })
        .collect();
    Ok(Dataset {
        name: preset.name().to_string(),
        suggested_kappa: Some(preset.suggested_kappa()),
        instances: instances?,
    })
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    node_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    planted: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc_size: Option<usize>,
    meta: InstanceMeta,
}

#[derive(Serialize, Deserialize)]
struct ManifestDoc {
    version: u32,
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    suggested_kappa: Option<usize>,
    instances: Vec<ManifestEntry>,
}

/// Write a dataset as one edge-list file per instance plus a manifest.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<(), DatagenError> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(dataset.instances.len());
    for (i, inst) in dataset.instances.iter().enumerate() {
        let file = format!("g{i:04}.edges");
        std::fs::write(dir.join(&file), write_edge_list(&inst.graph))?;
        entries.push(ManifestEntry {
            file,
            node_count: inst.graph.node_count(),
            planted: inst.planted.clone(),
            mc_size: inst.mc_size,
            meta: inst.meta.clone(),
        });
    }
    let doc = ManifestDoc {
        version: MANIFEST_VERSION,
        name: dataset.name.clone(),
        suggested_kappa: dataset.suggested_kappa,
        instances: entries,
    };
    let json = serde_json::to_string_pretty(&doc).map_err(|e| DatagenError::Manifest(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(())
}

/// Load a dataset directory written by [`save_dataset`], validating the
/// recorded structure against each graph.
pub fn load_dataset(dir: &Path) -> Result<Dataset, DatagenError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| {
        DatagenError::Manifest(format!("cannot read {}: {e}", manifest_path.display()))
    })?;
    let doc: ManifestDoc =
        serde_json::from_str(&text).map_err(|e| DatagenError::Manifest(e.to_string()))?;
    if doc.version != MANIFEST_VERSION {
        return Err(DatagenError::Manifest(format!(
            "unsupported manifest version {}",
            doc.version
        )));
    }
    let mut instances = Vec::with_capacity(doc.instances.len());
    for entry in doc.instances {
        let path = dir.join(&entry.file);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| DatagenError::Manifest(format!("cannot read {}: {e}", path.display())))?;
        let graph = parse_edge_list(&text).map_err(|e| {
            DatagenError::Manifest(format!("{}: {e}", entry.file))
        })?;
        if graph.node_count() != entry.node_count {
            return Err(DatagenError::Manifest(format!(
                "{}: manifest says {} nodes, file has {}",
                entry.file,
                entry.node_count,
                graph.node_count()
            )));
        }
        if let Some(planted) = &entry.planted {
            if !graph.is_clique(planted) {
                return Err(DatagenError::Manifest(format!(
                    "{}: recorded planted set is not a clique",
                    entry.file
                )));
            }
            if let Some(mc) = entry.mc_size {
                if mc < planted.len() {
                    return Err(DatagenError::Manifest(format!(
                        "{}: mc_size {mc} below planted size {}",
                        entry.file,
                        planted.len()
                    )));
                }
            }
        }
        instances.push(Instance {
            graph,
            planted: entry.planted,
            mc_size: entry.mc_size,
            meta: entry.meta,
        });
    }
    Ok(Dataset {
        name: doc.name,
        suggested_kappa: doc.suggested_kappa,
        instances,
    })
}
