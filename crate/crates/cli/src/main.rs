//! Command-line front end for the clique approximation pipeline.
//!
//! Each pipeline stage is its own subcommand so every step can be run and
//! inspected in isolation: `generate`, `features`, `train`, `evaluate`,
//! `decode`, `oracle`, `benchmark`.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cliquescat::datagen::{
    generate_preset, load_dataset, planted_clique, rb_hard, save_dataset, Dataset, Instance,
    Preset,
};
use cliquescat::eval::{
    benchmark, benchmark_to_csv, eval_report_to_csv, evaluate, predict, BenchMethod, EvalOptions,
};
use cliquescat::features::compute_features;
use cliquescat::model::{load_checkpoint, save_checkpoint, Filter, ModelConfig};
use cliquescat::oracles::{exact_max_clique, local_search, HeuristicConfig};
use cliquescat::train::{train, TrainConfig};
use std::path::{Path, PathBuf};

/// Environment variable supplying the default worker-thread count.
const THREADS_ENV: &str = "CLIQUESCAT_THREADS";

#[derive(Parser)]
#[command(
    name = "cliquescat",
    about = "Approximate maximum cliques with a hybrid scattering graph network",
    version
)]
struct Cli {
    /// Worker threads (default: $CLIQUESCAT_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Generate(GenerateArgs),
    /// Compute node features for one graph and emit CSV.
    Features(FeaturesArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Score a checkpoint over a dataset and write a report CSV.
    Evaluate(EvaluateArgs),
    /// Decode a clique from one graph with a checkpoint.
    Decode(DecodeArgs),
    /// Run a reference solver on one graph.
    Oracle(OracleArgs),
    /// Compare methods over a dataset and write a table CSV.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// Named preset (small-easy .. large-hard, planted).
    #[arg(long, conflicts_with = "generator")]
    preset: Option<String>,
    /// Explicit generator: `planted` or `rb`.
    #[arg(long)]
    generator: Option<String>,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// planted: node count.
    #[arg(long)]
    n: Option<usize>,
    /// planted: background edge probability.
    #[arg(long)]
    edge_prob: Option<f64>,
    /// planted: clique size.
    #[arg(long)]
    q: Option<usize>,
    /// rb: group count (also the known clique size).
    #[arg(long)]
    k: Option<usize>,
    /// rb: nodes per group.
    #[arg(long)]
    d: Option<usize>,
    /// rb: removal fraction in [0, 1).
    #[arg(long)]
    hardness: Option<f64>,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Edge-list file.
    #[arg(long)]
    graph: PathBuf,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory (from `generate`).
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Training report JSON path (default: checkpoint path with
    /// `.report.json`).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Flat key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Global gradient-norm clip.
    #[arg(long)]
    clip: Option<f64>,
    /// Z-score the input features per graph.
    #[arg(long)]
    zscore: bool,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// Train the low-pass-only ablation.
    #[arg(long)]
    low_pass_only: bool,
    /// Filter bank, e.g. `low:1,low:2,low:3,band:1,band:2,band:3`.
    #[arg(long)]
    filters: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    /// Report CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Sampler count (default: the dataset's suggestion, then 1).
    #[arg(long)]
    kappa: Option<usize>,
    /// Sample length (default: per-instance auto).
    #[arg(long)]
    tau: Option<usize>,
    /// Reference sizes: auto | exact | provided.
    #[arg(long, default_value = "auto")]
    reference: String,
    /// Node cap override for the exact reference solver.
    #[arg(long)]
    exact_cap: Option<usize>,
    /// Method label written to the CSV.
    #[arg(long, default_value = "hybrid")]
    label: String,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value_t = 1)]
    kappa: usize,
    #[arg(long)]
    tau: Option<usize>,
    /// Also print the per-node probabilities.
    #[arg(long)]
    probs: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Exact solver (default when no method flag is given).
    #[arg(long, conflicts_with = "local_search")]
    exact: bool,
    /// Node cap override for the exact solver.
    #[arg(long)]
    cap: Option<usize>,
    /// Random-restart local search instead of the exact solver.
    #[arg(long)]
    local_search: bool,
    /// local-search restarts.
    #[arg(long, default_value_t = 5)]
    eta1: usize,
    /// local-search iterations per restart.
    #[arg(long, default_value_t = 100)]
    eta2: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma list: hybrid, low-pass, ls:<restarts>:<iters>, exact.
    #[arg(long, default_value = "hybrid,exact")]
    methods: String,
    /// Checkpoint for the `hybrid` method.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Checkpoint for the `low-pass` method.
    #[arg(long)]
    ckpt_low_pass: Option<PathBuf>,
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long, default_value = "auto")]
    reference: String,
    #[arg(long)]
    exact_cap: Option<usize>,
    /// Seed for local-search methods.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn init_threads(flag: Option<usize>) {
    let from_env = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = flag.or(from_env) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
}

fn parse_filters(spec: &str) -> Result<Vec<Filter>> {
    spec.split(',')
        .map(|tok| {
            let (kind, value) = tok
                .split_once(':')
                .ok_or_else(|| anyhow!("filter `{tok}` must look like low:1 or band:2"))?;
            let value: usize = value
                .parse()
                .with_context(|| format!("bad filter parameter in `{tok}`"))?;
            match kind {
                "low" => Ok(Filter::LowPass { r: value }),
                "band" => Ok(Filter::BandPass { k: value }),
                other => bail!("unknown filter kind `{other}` (low|band)"),
            }
        })
        .collect()
}

fn load_train_config_file(path: &Path, cfg: &mut TrainConfig) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let ctx = || format!("{}:{}: bad value for {key}", path.display(), lineno + 1);
        match key {
            "learning_rate" => cfg.learning_rate = value.parse().with_context(ctx)?,
            "epochs" => cfg.epochs = value.parse().with_context(ctx)?,
            "beta" => cfg.beta = value.parse().with_context(ctx)?,
            "seed" => cfg.seed = value.parse().with_context(ctx)?,
            "beta1" => cfg.beta1 = value.parse().with_context(ctx)?,
            "beta2" => cfg.beta2 = value.parse().with_context(ctx)?,
            "epsilon" => cfg.epsilon = value.parse().with_context(ctx)?,
            "grad_clip" => {
                cfg.grad_clip = if value == "none" {
                    None
                } else {
                    Some(value.parse().with_context(ctx)?)
                }
            }
            "patience" => cfg.patience = value.parse().with_context(ctx)?,
            "val_fraction" => cfg.val_fraction = value.parse().with_context(ctx)?,
            "zscore_features" => cfg.zscore_features = value.parse().with_context(ctx)?,
            other => bail!("{}:{}: unknown config key `{other}`", path.display(), lineno + 1),
        }
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let dataset = match (&args.preset, &args.generator) {
        (Some(name), None) => {
            let preset: Preset = name.parse()?;
            generate_preset(preset, args.count, args.seed)?
        }
        (None, Some(gen)) => {
            let instances: Result<Vec<Instance>> = (0..args.count)
                .map(|i| {
                    let seed = args.seed.wrapping_add(i as u64);
                    match gen.as_str() {
                        "planted" => {
                            let n = args.n.context("--n is required for planted")?;
                            let p = args.edge_prob.context("--edge-prob is required for planted")?;
                            let q = args.q.context("--q is required for planted")?;
                            Ok(planted_clique(n, p, q, seed)?)
                        }
                        "rb" => {
                            let k = args.k.context("--k is required for rb")?;
                            let d = args.d.context("--d is required for rb")?;
                            let h = args.hardness.context("--hardness is required for rb")?;
                            Ok(rb_hard(k, d, h, seed)?)
                        }
                        other => bail!("unknown generator `{other}` (planted|rb)"),
                    }
                })
                .collect();
            Dataset {
                name: gen.clone(),
                suggested_kappa: None,
                instances: instances?,
            }
        }
        _ => bail!("exactly one of --preset or --generator is required"),
    };
    save_dataset(&dataset, &args.out)?;
    println!(
        "wrote {} instances to {}",
        dataset.instances.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_features(args: FeaturesArgs) -> Result<()> {
    let inst = Instance::from_edge_list_file(&args.graph)?;
    let csv = compute_features(&inst.graph).to_csv();
    match args.out {
        Some(path) => std::fs::write(&path, csv)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let mut tcfg = TrainConfig::default();
    if let Some(path) = &args.config {
        load_train_config_file(path, &mut tcfg)?;
    }
    if let Some(v) = args.epochs {
        tcfg.epochs = v;
    }
    if let Some(v) = args.lr {
        tcfg.learning_rate = v;
    }
    if let Some(v) = args.beta {
        tcfg.beta = v;
    }
    if let Some(v) = args.seed {
        tcfg.seed = v;
    }
    if let Some(v) = args.patience {
        tcfg.patience = v;
    }
    if let Some(v) = args.val_fraction {
        tcfg.val_fraction = v;
    }
    if let Some(v) = args.clip {
        tcfg.grad_clip = Some(v);
    }
    if args.zscore {
        tcfg.zscore_features = true;
    }

    let mut mcfg = ModelConfig {
        seed: tcfg.seed,
        ..ModelConfig::default()
    };
    if let Some(v) = args.hidden_dim {
        mcfg.hidden_dim = v;
    }
    if let Some(v) = args.layers {
        mcfg.layers = v;
    }
    if let Some(spec) = &args.filters {
        mcfg.filters = parse_filters(spec)?;
    }
    mcfg.low_pass_only = args.low_pass_only;

    let (params, report) = train(&dataset.instances, &mcfg, &tcfg)?;
    save_checkpoint(&params, &mcfg, &args.out)?;
    let report_path = args
        .report
        .unwrap_or_else(|| args.out.with_extension("report.json"));
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("cannot write {}", report_path.display()))?;
    if let Some(msg) = &report.aborted {
        log::warn!("{msg}");
    }
    println!(
        "trained {} epochs (best {}): val loss {:.4} -> {:.4}; checkpoint {}",
        report.train_losses.len(),
        report.best_epoch,
        report.initial_val_loss,
        report.best_val_loss,
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let (params, mcfg) = load_checkpoint(&args.ckpt)?;
    let opts = EvalOptions {
        kappa: args.kappa,
        tau: args.tau,
        reference: args.reference.parse().map_err(|e: String| anyhow!(e))?,
        exact_cap: args.exact_cap,
    };
    let report = evaluate(&dataset, &params, &mcfg, &opts, &args.label)?;
    std::fs::write(&args.out, eval_report_to_csv(&report))
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    println!(
        "{}: mean score {:.4} +- {:.4} over {} graphs ({:.4} s/G) -> {}",
        report.method,
        report.mean_score,
        report.std_score,
        report.rows.len(),
        report.mean_seconds_per_graph(),
        args.out.display()
    );
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> Result<()> {
    let inst = Instance::from_edge_list_file(&args.graph)?;
    let (params, mcfg) = load_checkpoint(&args.ckpt)?;
    if args.probs {
        let x = compute_features(&inst.graph);
        let (p, _) = cliquescat::model::forward(&inst.graph, &x, &params, &mcfg)?;
        for (v, prob) in p.iter().enumerate() {
            println!("p[{v}] = {prob:.6}");
        }
    }
    let (result, forward_s) = predict(&inst, &params, &mcfg, args.kappa, args.tau)?;
    println!(
        "clique size {} (sampler {}, forward {:.4}s, decode {:.4}s)",
        result.size, result.sampler_index, forward_s, result.elapsed
    );
    println!(
        "{}",
        result
            .nodes
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let inst = Instance::from_edge_list_file(&args.graph)?;
    let (label, nodes) = if args.local_search {
        let cfg = HeuristicConfig::new(args.eta1, args.eta2, args.seed);
        (
            format!("local-search({},{})", args.eta1, args.eta2),
            local_search(&inst.graph, &cfg),
        )
    } else {
        ("exact".to_string(), exact_max_clique(&inst.graph, args.cap)?)
    };
    println!("{label}: clique size {}", nodes.len());
    println!(
        "{}",
        nodes
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let mut methods = Vec::new();
    for token in args.methods.split(',') {
        match token {
            "hybrid" => {
                let path = args.ckpt.as_ref().context("`hybrid` needs --ckpt")?;
                let (params, config) = load_checkpoint(path)?;
                methods.push(BenchMethod::Model {
                    label: "hybrid".into(),
                    params,
                    config,
                    kappa: args.kappa,
                    tau: args.tau,
                });
            }
            "low-pass" => {
                let path = args
                    .ckpt_low_pass
                    .as_ref()
                    .context("`low-pass` needs --ckpt-low-pass")?;
                let (params, config) = load_checkpoint(path)?;
                methods.push(BenchMethod::Model {
                    label: "low-pass".into(),
                    params,
                    config,
                    kappa: args.kappa,
                    tau: args.tau,
                });
            }
            "exact" => methods.push(BenchMethod::Exact),
            other => {
                let mut parts = other.split(':');
                if parts.next() != Some("ls") {
                    bail!("unknown method `{other}` (hybrid|low-pass|ls:<r>:<i>|exact)");
                }
                let restarts = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .with_context(|| format!("bad local-search spec `{other}`"))?;
                let max_iters = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .with_context(|| format!("bad local-search spec `{other}`"))?;
                methods.push(BenchMethod::LocalSearch {
                    restarts,
                    max_iters,
                    seed: args.seed,
                });
            }
        }
    }
    let opts = EvalOptions {
        kappa: args.kappa,
        tau: args.tau,
        reference: args.reference.parse().map_err(|e: String| anyhow!(e))?,
        exact_cap: args.exact_cap,
    };
    let rows = benchmark(&dataset, &methods, &opts)?;
    std::fs::write(&args.out, benchmark_to_csv(&rows))
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    for row in &rows {
        match &row.error {
            None => println!(
                "{}: mean {:.4} +- {:.4} ({:.4} s/G)",
                row.method,
                row.mean_score.unwrap(),
                row.std_score.unwrap(),
                row.mean_s_per_graph.unwrap()
            ),
            Some(msg) => println!("{}: ERROR {msg}", row.method),
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    init_threads(cli.threads);
    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Features(args) => cmd_features(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Benchmark(args) => cmd_benchmark(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
