//! Scoring, timing, and benchmark tables.
//!
//! Per instance the harness times the prediction pipeline (feature
//! computation + model forward) and the decode separately, verifies the
//! prediction is a clique, and scores it against a reference size. The
//! reference hierarchy is: explicit manifest size, then the exact solver,
//! then an error — never a silent heuristic fallback.

use crate::datagen::{Dataset, Instance};
use crate::decoder::{decode, DecodeError, DecoderConfig};
use crate::features::compute_features;
use crate::model::{forward, ModelConfig, ModelError, ModelParams};
use crate::oracles::{
    approximation_score, exact_max_clique, local_search, HeuristicConfig, OracleError,
};
use rayon::prelude::*;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation needs a non-empty dataset")]
    EmptyDataset,
    #[error("instance {index} ({file}) has no reference clique size under mode `{mode}`")]
    MissingReference {
        index: usize,
        file: String,
        mode: String,
    },
    #[error("instance {index}: {source}")]
    Exact {
        index: usize,
        #[source]
        source: OracleError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Where reference clique sizes come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceMode {
    /// Manifest size when present, exact solver otherwise.
    #[default]
    Auto,
    /// Always run the exact solver.
    Exact,
    /// Only use sizes recorded in the manifest.
    Provided,
}

impl ReferenceMode {
    pub fn name(&self) -> &'static str {
        match self {
            ReferenceMode::Auto => "auto",
            ReferenceMode::Exact => "exact",
            ReferenceMode::Provided => "provided",
        }
    }
}

impl FromStr for ReferenceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(ReferenceMode::Auto),
            "exact" => Ok(ReferenceMode::Exact),
            "provided" | "manifest" => Ok(ReferenceMode::Provided),
            other => Err(format!("unknown reference mode `{other}` (auto|exact|provided)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Sampler count; falls back to the dataset's suggestion, then 1.
    pub kappa: Option<usize>,
    /// Sample length; per-instance auto default when unset.
    pub tau: Option<usize>,
    pub reference: ReferenceMode,
    /// Node cap override for the exact reference solver.
    pub exact_cap: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            kappa: None,
            tau: None,
            reference: ReferenceMode::Auto,
            exact_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub instance_id: usize,
    pub pred_size: usize,
    pub ref_size: usize,
    pub score: f64,
    pub forward_s: f64,
    pub decode_s: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub method: String,
    pub rows: Vec<EvalRow>,
    pub mean_score: f64,
    /// Population standard deviation across instances.
    pub std_score: f64,
    pub mean_forward_s: f64,
    pub mean_decode_s: f64,
    pub config_snapshot: String,
}

impl EvalReport {
    fn from_rows(method: String, mut rows: Vec<EvalRow>, config_snapshot: String) -> EvalReport {
        rows.sort_by_key(|r| r.instance_id);
        let n = rows.len() as f64;
        let mean_score = rows.iter().map(|r| r.score).sum::<f64>() / n;
        let var = rows
            .iter()
            .map(|r| (r.score - mean_score).powi(2))
            .sum::<f64>()
            / n;
        EvalReport {
            method,
            mean_score,
            std_score: var.sqrt(),
            mean_forward_s: rows.iter().map(|r| r.forward_s).sum::<f64>() / n,
            mean_decode_s: rows.iter().map(|r| r.decode_s).sum::<f64>() / n,
            rows,
            config_snapshot,
        }
    }

    /// Average seconds per graph: prediction plus decode.
    pub fn mean_seconds_per_graph(&self) -> f64 {
        self.mean_forward_s + self.mean_decode_s
    }
}

fn reference_size(
    index: usize,
    inst: &Instance,
    mode: ReferenceMode,
    exact_cap: Option<usize>,
) -> Result<usize, EvalError> {
    let by_exact = |index: usize| -> Result<usize, EvalError> {
        exact_max_clique(&inst.graph, exact_cap)
            .map(|c| c.len())
            .map_err(|source| EvalError::Exact { index, source })
    };
    match mode {
        ReferenceMode::Provided => inst.mc_size.ok_or_else(|| EvalError::MissingReference {
            index,
            file: format!("{}#{index}", inst.meta.generator),
            mode: mode.name().into(),
        }),
        ReferenceMode::Exact => by_exact(index),
        ReferenceMode::Auto => match inst.mc_size {
            Some(size) => Ok(size),
            None => by_exact(index),
        },
    }
}

/// Run the model + decoder over one instance, timing prediction (features
/// plus forward) and decode separately.
pub fn predict(
    inst: &Instance,
    params: &ModelParams,
    mcfg: &ModelConfig,
    kappa: usize,
    tau: Option<usize>,
) -> Result<(crate::decoder::CliqueResult, f64), EvalError> {
    let t0 = Instant::now();
    let x = compute_features(&inst.graph);
    let (p, _) = forward(&inst.graph, &x, params, mcfg)?;
    let forward_s = t0.elapsed().as_secs_f64();
    let n = inst.graph.node_count();
    let tau = tau.unwrap_or_else(|| DecoderConfig::auto_tau(n, inst.expected_clique_size()));
    let result = decode(&inst.graph, &p, &DecoderConfig::new(kappa, tau))?;
    Ok((result, forward_s))
}

/// Evaluate trained parameters over a dataset.
pub fn evaluate(
    dataset: &Dataset,
    params: &ModelParams,
    mcfg: &ModelConfig,
    opts: &EvalOptions,
    method: &str,
) -> Result<EvalReport, EvalError> {
    if dataset.instances.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let kappa = opts.kappa.or(dataset.suggested_kappa).unwrap_or(1);
    let rows: Result<Vec<EvalRow>, EvalError> = dataset
        .instances
        .par_iter()
        .enumerate()
        .map(|(index, inst)| {
            let (result, forward_s) = predict(inst, params, mcfg, kappa, opts.tau)?;
            assert!(
                inst.graph.is_clique(&result.nodes),
                "prediction for instance {index} is not a clique"
            );
            let ref_size = reference_size(index, inst, opts.reference, opts.exact_cap)?;
            let score = approximation_score(result.size, ref_size)
                .map_err(|source| EvalError::Exact { index, source })?;
            Ok(EvalRow {
                instance_id: index,
                pred_size: result.size,
                ref_size,
                score,
                forward_s,
                decode_s: result.elapsed,
            })
        })
        .collect();
    let snapshot = format!(
        "kappa={kappa} tau={} reference={} hidden_dim={} layers={} low_pass_only={}",
        opts.tau.map_or("auto".to_string(), |t| t.to_string()),
        opts.reference.name(),
        mcfg.hidden_dim,
        mcfg.layers,
        mcfg.low_pass_only,
    );
    Ok(EvalReport::from_rows(method.to_string(), rows?, snapshot))
}

/// A method under benchmark comparison. A handful of these exist per run,
/// so the parameter-carrying variant staying unboxed is fine.
#[allow(clippy::large_enum_variant)]
pub enum BenchMethod {
    /// A trained model followed by the decoder.
    Model {
        label: String,
        params: ModelParams,
        config: ModelConfig,
        kappa: Option<usize>,
        tau: Option<usize>,
    },
    /// The random-restart local-search baseline.
    LocalSearch {
        restarts: usize,
        max_iters: usize,
        seed: u64,
    },
    /// The exact solver, timed like any other method.
    Exact,
}

impl BenchMethod {
    pub fn label(&self) -> String {
        match self {
            BenchMethod::Model { label, .. } => label.clone(),
            BenchMethod::LocalSearch {
                restarts,
                max_iters,
                ..
            } => format!("local-search({restarts},{max_iters})"),
            BenchMethod::Exact => "exact".to_string(),
        }
    }
}

/// One line of the comparison table.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub method: String,
    pub mean_score: Option<f64>,
    pub std_score: Option<f64>,
    pub mean_s_per_graph: Option<f64>,
    pub error: Option<String>,
}

fn bench_solver<F>(
    dataset: &Dataset,
    opts: &EvalOptions,
    method: &str,
    solve: F,
) -> Result<EvalReport, EvalError>
where
    F: Fn(usize, &Instance) -> Result<Vec<usize>, EvalError> + Sync,
{
    let rows: Result<Vec<EvalRow>, EvalError> = dataset
        .instances
        .par_iter()
        .enumerate()
        .map(|(index, inst)| {
            let t0 = Instant::now();
            let found = solve(index, inst)?;
            let elapsed = t0.elapsed().as_secs_f64();
            assert!(inst.graph.is_clique(&found), "method {method} returned a non-clique");
            let ref_size = reference_size(index, inst, opts.reference, opts.exact_cap)?;
            let score = approximation_score(found.len(), ref_size)
                .map_err(|source| EvalError::Exact { index, source })?;
            Ok(EvalRow {
                instance_id: index,
                pred_size: found.len(),
                ref_size,
                score,
                forward_s: 0.0,
                decode_s: elapsed,
            })
        })
        .collect();
    Ok(EvalReport::from_rows(
        method.to_string(),
        rows?,
        format!("reference={}", opts.reference.name()),
    ))
}

/// Run every method over the dataset; per-method failures become error
/// rows and the run continues.
pub fn benchmark(
    dataset: &Dataset,
    methods: &[BenchMethod],
    opts: &EvalOptions,
) -> Result<Vec<BenchRow>, EvalError> {
    if dataset.instances.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut rows = Vec::with_capacity(methods.len());
    for method in methods {
        let label = method.label();
        let outcome = match method {
            BenchMethod::Model {
                params,
                config,
                kappa,
                tau,
                ..
            } => {
                let method_opts = EvalOptions {
                    kappa: *kappa,
                    tau: *tau,
                    ..*opts
                };
                evaluate(dataset, params, config, &method_opts, &label)
            }
            BenchMethod::LocalSearch {
                restarts,
                max_iters,
                seed,
            } => bench_solver(dataset, opts, &label, |_, inst| {
                Ok(local_search(
                    &inst.graph,
                    &HeuristicConfig::new(*restarts, *max_iters, *seed),
                ))
            }),
            BenchMethod::Exact => bench_solver(dataset, opts, &label, |index, inst| {
                exact_max_clique(&inst.graph, opts.exact_cap)
                    .map_err(|source| EvalError::Exact { index, source })
            }),
        };
        rows.push(match outcome {
            Ok(report) => BenchRow {
                method: label,
                mean_score: Some(report.mean_score),
                std_score: Some(report.std_score),
                mean_s_per_graph: Some(report.mean_seconds_per_graph()),
                error: None,
            },
            Err(err) => BenchRow {
                method: label,
                mean_score: None,
                std_score: None,
                mean_s_per_graph: None,
                error: Some(err.to_string()),
            },
        });
    }
    Ok(rows)
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Per-instance CSV. Scores and sizes are deterministic for fixed seeds;
/// the timestamp lives in a metadata comment and the timing columns are
/// measurements.
pub fn eval_report_to_csv(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# generated_at_unix={}\n", unix_now()));
    out.push_str(&format!("# config {}\n", report.config_snapshot));
    out.push_str("# timing covers features+forward (forward_s) and decode (decode_s); i/o excluded\n");
    out.push_str(&format!(
        "# aggregate mean_score={:.6} std_score={:.6} mean_s_per_graph={:.6}\n",
        report.mean_score,
        report.std_score,
        report.mean_seconds_per_graph()
    ));
    out.push_str("method,instance_id,pred_size,ref_size,score,forward_s,decode_s\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6}\n",
            report.method,
            row.instance_id,
            row.pred_size,
            row.ref_size,
            row.score,
            row.forward_s,
            row.decode_s
        ));
    }
    out
}

/// Comparison-table CSV; failed methods carry an `error` marker.
pub fn benchmark_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# generated_at_unix={}\n", unix_now()));
    out.push_str("method,mean_score,std_score,mean_s_per_graph\n");
    for row in rows {
        match &row.error {
            None => out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                row.method,
                row.mean_score.unwrap(),
                row.std_score.unwrap(),
                row.mean_s_per_graph.unwrap()
            )),
            Some(msg) => {
                out.push_str(&format!("# error method={} message={msg}\n", row.method));
                out.push_str(&format!("{},error,error,error\n", row.method));
            }
        }
    }
    out
}
