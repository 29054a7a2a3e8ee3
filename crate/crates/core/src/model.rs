//! The hybrid scattering GNN: embedding MLP, K attention-gated filter-bank
//! layers with readouts, output MLP, min-max normalized probability vector.
//!
//! Each layer offers every node a bank of low-pass (`A^r`) and band-pass
//! (`Psi_k`) filter outputs. A learned attention vector scores each filter
//! per node (nonlinearity applied before the dot product), a softmax across
//! the bank turns scores into weights, and the weighted filter outputs are
//! mixed per node and passed through the layer MLP. All intermediate
//! representations (readouts) are concatenated before the output MLP, so
//! the final head sees every diffusion depth at once.
//!
//! The low-pass-only ablation removes the band-pass entries from the bank
//! and runs the otherwise identical code path.

use crate::autodiff::{Tape, VarId};
use crate::features::FeatureMatrix;
use crate::graph::{Graph, GraphOp};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Slope of the leaky ReLU applied to the concatenated representations
/// before the attention dot product.
pub const ATTENTION_LEAKY_SLOPE: f64 = 0.2;

/// Current checkpoint schema version.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("forward pass needs at least one node")]
    EmptyGraph,
    #[error("feature matrix has {got} columns, model expects {want}")]
    InputDimMismatch { got: usize, want: usize },
    #[error("feature matrix has {got} rows, graph has {want} nodes")]
    NodeCountMismatch { got: usize, want: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One entry of the filter bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Filter {
    /// Low-pass `A^r`.
    LowPass { r: usize },
    /// Band-pass `Psi_k`.
    BandPass { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Input feature count d.
    pub input_dim: usize,
    /// Hidden width d_h.
    pub hidden_dim: usize,
    /// Number of diffusion layers K.
    pub layers: usize,
    /// The filter bank, in attention order.
    pub filters: Vec<Filter>,
    /// Ablation switch: strip band-pass filters, keep everything else.
    pub low_pass_only: bool,
    /// Parameter initialization seed.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 3,
            hidden_dim: 8,
            layers: 2,
            filters: vec![
                Filter::LowPass { r: 1 },
                Filter::LowPass { r: 2 },
                Filter::LowPass { r: 3 },
                Filter::BandPass { k: 1 },
                Filter::BandPass { k: 2 },
                Filter::BandPass { k: 3 },
            ],
            low_pass_only: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.layers == 0 {
            return Err(ModelError::InvalidConfig(
                "input_dim, hidden_dim and layers must all be >= 1".into(),
            ));
        }
        if self.effective_filters().is_empty() {
            return Err(ModelError::InvalidConfig(
                "filter bank is empty (low_pass_only with no low-pass entries?)".into(),
            ));
        }
        for f in &self.filters {
            if let Filter::LowPass { r: 0 } = f {
                return Err(ModelError::InvalidConfig("low-pass power must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// The filter bank after applying the ablation switch.
    pub fn effective_filters(&self) -> Vec<Filter> {
        if self.low_pass_only {
            self.filters
                .iter()
                .copied()
                .filter(|f| matches!(f, Filter::LowPass { .. }))
                .collect()
        } else {
            self.filters.clone()
        }
    }
}

/// A 2-layer perceptron with ReLU after the hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

impl Mlp {
    fn value_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Plain (non-recorded) evaluation.
    pub fn eval(&self, x: &Array2<f64>) -> Array2<f64> {
        let hidden = (x.dot(&self.w1) + &self.b1).mapv(|v| v.max(0.0));
        hidden.dot(&self.w2) + &self.b2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Attention vector in R^{2 d_h}, stored as a (2 d_h) x 1 column.
    pub attention: Array2<f64>,
    pub mlp: Mlp,
}

/// Every trainable tensor of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub embed: Mlp,
    pub layers: Vec<LayerParams>,
    pub output: Mlp,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

fn init_mlp(rng: &mut ChaCha8Rng, d_in: usize, d_hidden: usize, d_out: usize) -> Mlp {
    Mlp {
        w1: glorot(rng, d_in, d_hidden),
        b1: Array2::zeros((1, d_hidden)),
        w2: glorot(rng, d_hidden, d_out),
        b2: Array2::zeros((1, d_out)),
    }
}

/// Deterministic parameter initialization: weights uniform in
/// `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
pub fn init_params(config: &ModelConfig) -> Result<ModelParams, ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.input_dim;
    let dh = config.hidden_dim;
    let embed = init_mlp(&mut rng, d, dh, dh);
    let layers = (0..config.layers)
        .map(|_| LayerParams {
            attention: glorot(&mut rng, 2 * dh, 1),
            mlp: init_mlp(&mut rng, dh, dh, dh),
        })
        .collect();
    let output = init_mlp(&mut rng, dh * (config.layers + 1), dh, 1);
    Ok(ModelParams {
        embed,
        layers,
        output,
    })
}

fn mlp_scalar_count(d_in: usize, d_hidden: usize, d_out: usize) -> usize {
    d_in * d_hidden + d_hidden + d_hidden * d_out + d_out
}

/// Closed-form count of trainable scalars for a config.
pub fn count_params(config: &ModelConfig) -> usize {
    let d = config.input_dim;
    let dh = config.hidden_dim;
    let k = config.layers;
    mlp_scalar_count(d, dh, dh)
        + k * (2 * dh + mlp_scalar_count(dh, dh, dh))
        + mlp_scalar_count(dh * (k + 1), dh, 1)
}

impl ModelParams {
    /// Trainable tensors in canonical (checkpoint) order.
    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut out = vec![&self.embed.w1, &self.embed.b1, &self.embed.w2, &self.embed.b2];
        for layer in &self.layers {
            out.push(&layer.attention);
            out.push(&layer.mlp.w1);
            out.push(&layer.mlp.b1);
            out.push(&layer.mlp.w2);
            out.push(&layer.mlp.b2);
        }
        out.extend([&self.output.w1, &self.output.b1, &self.output.w2, &self.output.b2]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = vec![
            &mut self.embed.w1,
            &mut self.embed.b1,
            &mut self.embed.w2,
            &mut self.embed.b2,
        ];
        for layer in &mut self.layers {
            out.push(&mut layer.attention);
            out.push(&mut layer.mlp.w1);
            out.push(&mut layer.mlp.b1);
            out.push(&mut layer.mlp.w2);
            out.push(&mut layer.mlp.b2);
        }
        out.extend([
            &mut self.output.w1,
            &mut self.output.b1,
            &mut self.output.w2,
            &mut self.output.b2,
        ]);
        out
    }

    /// Tensor names in canonical order, matching [`ModelParams::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = vec![
            "embed.w1".to_string(),
            "embed.b1".to_string(),
            "embed.w2".to_string(),
            "embed.b2".to_string(),
        ];
        for i in 1..=self.layers.len() {
            out.push(format!("layer{i}.attention"));
            out.push(format!("layer{i}.mlp.w1"));
            out.push(format!("layer{i}.mlp.b1"));
            out.push(format!("layer{i}.mlp.w2"));
            out.push(format!("layer{i}.mlp.b2"));
        }
        out.extend([
            "output.w1".to_string(),
            "output.b1".to_string(),
            "output.w2".to_string(),
            "output.b2".to_string(),
        ]);
        out
    }

    pub fn value_count(&self) -> usize {
        self.embed.value_count()
            + self
                .layers
                .iter()
                .map(|l| l.attention.len() + l.mlp.value_count())
                .sum::<usize>()
            + self.output.value_count()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

struct MlpVars {
    w1: VarId,
    b1: VarId,
    w2: VarId,
    b2: VarId,
}

struct LayerVars {
    attention: VarId,
    mlp: MlpVars,
}

struct ParamVars {
    embed: MlpVars,
    layers: Vec<LayerVars>,
    output: MlpVars,
    flat: Vec<VarId>,
}

fn insert_mlp<'g>(tape: &mut Tape<'g>, mlp: &Mlp, flat: &mut Vec<VarId>) -> MlpVars {
    let w1 = tape.input(mlp.w1.clone(), true);
    let b1 = tape.input(mlp.b1.clone(), true);
    let w2 = tape.input(mlp.w2.clone(), true);
    let b2 = tape.input(mlp.b2.clone(), true);
    flat.extend([w1, b1, w2, b2]);
    MlpVars { w1, b1, w2, b2 }
}

fn insert_params<'g>(tape: &mut Tape<'g>, params: &ModelParams) -> ParamVars {
    let mut flat = Vec::new();
    let embed = insert_mlp(tape, &params.embed, &mut flat);
    let layers = params
        .layers
        .iter()
        .map(|layer| {
            let attention = tape.input(layer.attention.clone(), true);
            flat.push(attention);
            let mlp = insert_mlp(tape, &layer.mlp, &mut flat);
            LayerVars { attention, mlp }
        })
        .collect();
    let output = insert_mlp(tape, &params.output, &mut flat);
    ParamVars {
        embed,
        layers,
        output,
        flat,
    }
}

fn mlp_apply<'g>(tape: &mut Tape<'g>, x: VarId, vars: &MlpVars) -> VarId {
    let hidden = tape.affine(x, vars.w1, vars.b1);
    let act = tape.relu(hidden);
    tape.affine(act, vars.w2, vars.b2)
}

/// Record every filter output for one layer, chaining operator powers so
/// each dyadic walk power and each low-pass power is computed once.
fn filter_bank<'g>(
    tape: &mut Tape<'g>,
    graph: &'g Graph,
    h_prev: VarId,
    filters: &[Filter],
) -> Vec<VarId> {
    let max_r = filters
        .iter()
        .filter_map(|f| match f {
            Filter::LowPass { r } => Some(*r),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let max_k = filters
        .iter()
        .filter_map(|f| match f {
            Filter::BandPass { k } => Some(*k),
            _ => None,
        })
        .max();

    // A^1 H, A^2 H, ... chained one power at a time.
    let mut lows: Vec<VarId> = Vec::new();
    let mut cur = h_prev;
    for _ in 0..max_r {
        cur = tape.sparse_apply(graph, GraphOp::RenormAdj { power: 1 }, cur);
        lows.push(cur);
    }

    // P^{2^0} H, P^{2^1} H, ... dyadic powers, each from the previous one.
    let mut walk_powers: Vec<VarId> = Vec::new();
    if let Some(max_k) = max_k {
        walk_powers.push(h_prev);
        let mut cur = tape.sparse_apply(graph, GraphOp::Walk { steps: 1 }, h_prev);
        walk_powers.push(cur);
        for j in 2..=(max_k + 1) {
            cur = tape.sparse_apply(graph, GraphOp::Walk { steps: 1 << (j - 2) }, cur);
            walk_powers.push(cur);
        }
    }

    filters
        .iter()
        .map(|f| match f {
            Filter::LowPass { r } => lows[r - 1],
            Filter::BandPass { k } => tape.sub(walk_powers[*k], walk_powers[*k + 1]),
        })
        .collect()
}

fn layer_apply<'g>(
    tape: &mut Tape<'g>,
    graph: &'g Graph,
    h_prev: VarId,
    vars: &LayerVars,
    filters: &[Filter],
) -> (VarId, Vec<VarId>) {
    let bank = filter_bank(tape, graph, h_prev, filters);
    let scores: Vec<VarId> = bank
        .iter()
        .map(|&h_f| {
            let cat = tape.concat_cols(h_f, h_prev);
            let act = tape.leaky_relu(cat, ATTENTION_LEAKY_SLOPE);
            tape.row_dot(act, vars.attention)
        })
        .collect();
    let alphas = tape.softmax_over_group(&scores);
    let mut agg: Option<VarId> = None;
    for (&h_f, &alpha) in bank.iter().zip(&alphas) {
        let weighted = tape.col_scale(h_f, alpha);
        agg = Some(match agg {
            Some(acc) => tape.add(acc, weighted),
            None => weighted,
        });
    }
    let h = mlp_apply(tape, agg.expect("non-empty filter bank"), &vars.mlp);
    (h, alphas)
}

/// A recorded forward pass, ready for a loss node and a backward sweep.
pub struct ForwardPass<'g> {
    pub tape: Tape<'g>,
    /// The probability vector node (n x 1).
    pub p: VarId,
    /// Readout nodes `H^0 ... H^K`.
    pub readouts: Vec<VarId>,
    /// Parameter nodes in canonical tensor order.
    pub param_ids: Vec<VarId>,
}

/// Run the full pipeline on the tape: embed, K diffusion layers, readout
/// concatenation, output head, min-max normalization.
pub fn forward_recorded<'g>(
    graph: &'g Graph,
    x: &FeatureMatrix,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<ForwardPass<'g>, ModelError> {
    config.validate()?;
    if graph.node_count() == 0 {
        return Err(ModelError::EmptyGraph);
    }
    if x.values.ncols() != config.input_dim {
        return Err(ModelError::InputDimMismatch {
            got: x.values.ncols(),
            want: config.input_dim,
        });
    }
    if x.values.nrows() != graph.node_count() {
        return Err(ModelError::NodeCountMismatch {
            got: x.values.nrows(),
            want: graph.node_count(),
        });
    }
    let filters = config.effective_filters();
    let mut tape = Tape::new();
    let vars = insert_params(&mut tape, params);
    let x_var = tape.constant(x.values.clone());

    let h0 = mlp_apply(&mut tape, x_var, &vars.embed);
    let mut readouts = vec![h0];
    let mut h_prev = h0;
    for layer in &vars.layers {
        let (h, _) = layer_apply(&mut tape, graph, h_prev, layer, &filters);
        readouts.push(h);
        h_prev = h;
    }
    let mut cat = readouts[0];
    for &r in &readouts[1..] {
        cat = tape.concat_cols(cat, r);
    }
    let h_out = mlp_apply(&mut tape, cat, &vars.output);
    let p = tape.min_max_normalize(h_out);
    Ok(ForwardPass {
        tape,
        p,
        readouts,
        param_ids: vars.flat,
    })
}

/// Convenience forward: probability vector plus readout values.
pub fn forward(
    graph: &Graph,
    x: &FeatureMatrix,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<(Vec<f64>, Vec<Array2<f64>>), ModelError> {
    let pass = forward_recorded(graph, x, params, config)?;
    let p = pass.tape.value(pass.p).column(0).to_vec();
    let readouts = pass
        .readouts
        .iter()
        .map(|&r| pass.tape.value(r).clone())
        .collect();
    Ok((p, readouts))
}

/// Node-wise embedding `H^0 = m_emb(X)` without recording.
pub fn embed(x: &FeatureMatrix, params: &ModelParams) -> Array2<f64> {
    params.embed.eval(&x.values)
}

/// One diffusion layer outside a training tape, also exposing the per-node
/// attention weights (one n x 1 column per filter).
pub fn layer_forward_with_attention(
    graph: &Graph,
    h_prev: &Array2<f64>,
    layer: &LayerParams,
    config: &ModelConfig,
) -> (Array2<f64>, Vec<Array2<f64>>) {
    let filters = config.effective_filters();
    let mut tape = Tape::new();
    let mut flat = Vec::new();
    let vars = LayerVars {
        attention: tape.input(layer.attention.clone(), false),
        mlp: insert_mlp(&mut tape, &layer.mlp, &mut flat),
    };
    let h_var = tape.constant(h_prev.clone());
    let (h, alphas) = layer_apply(&mut tape, graph, h_var, &vars, &filters);
    let alpha_values = alphas.iter().map(|&a| tape.value(a).clone()).collect();
    (tape.value(h).clone(), alpha_values)
}

/// One diffusion layer `H^l = m_l(sum_f alpha_f . f(H^{l-1}))`.
pub fn layer_forward(
    graph: &Graph,
    h_prev: &Array2<f64>,
    layer: &LayerParams,
    config: &ModelConfig,
) -> Array2<f64> {
    layer_forward_with_attention(graph, h_prev, layer, config).0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    /// Row-major values.
    pub data: Vec<f64>,
}

/// JSON checkpoint: the config block plus flat named arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_params(params: &ModelParams, config: &ModelConfig) -> Checkpoint {
        let tensors = params
            .tensor_names()
            .into_iter()
            .zip(params.tensors())
            .map(|(name, t)| NamedTensor {
                name,
                shape: vec![t.nrows(), t.ncols()],
                data: t.iter().copied().collect(),
            })
            .collect();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            tensors,
        }
    }

    pub fn into_params(self) -> Result<(ModelParams, ModelConfig), ModelError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let config = self.config.clone();
        let mut params = init_params(&config)?;
        let names = params.tensor_names();
        if names.len() != self.tensors.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} tensors, found {}",
                names.len(),
                self.tensors.len()
            )));
        }
        for (slot, (name, stored)) in params
            .tensors_mut()
            .into_iter()
            .zip(names.iter().zip(&self.tensors))
        {
            if &stored.name != name {
                return Err(ModelError::Checkpoint(format!(
                    "tensor order mismatch: expected `{name}`, found `{}`",
                    stored.name
                )));
            }
            if stored.shape != [slot.nrows(), slot.ncols()] {
                return Err(ModelError::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    stored.shape,
                    [slot.nrows(), slot.ncols()]
                )));
            }
            if stored.data.len() != slot.len() {
                return Err(ModelError::Checkpoint(format!(
                    "tensor `{name}` has {} values, expected {}",
                    stored.data.len(),
                    slot.len()
                )));
            }
            *slot = Array2::from_shape_vec((stored.shape[0], stored.shape[1]), stored.data.clone())
                .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        }
        Ok((params, config))
    }
}

pub fn save_checkpoint(
    params: &ModelParams,
    config: &ModelConfig,
    path: &Path,
) -> Result<(), ModelError> {
    let doc = Checkpoint::from_params(params, config);
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, ModelConfig), ModelError> {
    let text = std::fs::read_to_string(path)?;
    let doc: Checkpoint =
        serde_json::from_str(&text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    doc.into_params()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::planted_clique;
    use crate::dense;
    use crate::features::compute_features;
    use ndarray::array;

    fn small_graph(seed: u64) -> Graph {
        planted_clique(6, 0.5, 3, seed).unwrap().graph
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = ModelConfig::default();
        let a = init_params(&cfg).unwrap();
        let b = init_params(&cfg).unwrap();
        assert_eq!(a, b);
        let cfg2 = ModelConfig {
            seed: 1,
            ..ModelConfig::default()
        };
        assert_ne!(a, init_params(&cfg2).unwrap());
    }

    #[test]
    fn init_biases_are_zero_and_weights_bounded() {
        let cfg = ModelConfig::default();
        let p = init_params(&cfg).unwrap();
        assert!(p.embed.b1.iter().all(|&v| v == 0.0));
        let bound = (6.0 / (3 + 8) as f64).sqrt();
        assert!(p.embed.w1.iter().all(|&v| v.abs() < bound));
    }

    #[test]
    fn count_params_matches_actual_and_hand_counts() {
        let cfg = ModelConfig::default();
        let params = init_params(&cfg).unwrap();
        assert_eq!(count_params(&cfg), params.value_count());
        // d=3, d_h=8, K=2: emb 104 + 2*160 + out 209.
        assert_eq!(count_params(&cfg), 633);
        // Hand count for the tiny config: emb 6 + layer 6 + out 5.
        let tiny = ModelConfig {
            hidden_dim: 1,
            layers: 1,
            ..ModelConfig::default()
        };
        assert_eq!(count_params(&tiny), 17);
        assert_eq!(count_params(&tiny), init_params(&tiny).unwrap().value_count());
    }

    #[test]
    fn count_params_grows_superlinearly_in_hidden_dim() {
        let base = ModelConfig::default();
        let doubled = ModelConfig {
            hidden_dim: 16,
            ..ModelConfig::default()
        };
        assert!(count_params(&doubled) > 2 * count_params(&base));
    }

    #[test]
    fn default_count_is_same_order_as_hundreds_to_thousands() {
        let c = count_params(&ModelConfig::default());
        assert!((100..10_000).contains(&c));
    }

    #[test]
    fn embed_is_node_wise() {
        let cfg = ModelConfig::default();
        let params = init_params(&cfg).unwrap();
        let x = FeatureMatrix {
            values: array![[1.0, 0.5, 0.2], [1.0, 0.5, 0.2], [0.0, 0.1, 0.9]],
        };
        let h = embed(&x, &params);
        for j in 0..8 {
            assert_eq!(h[(0, j)], h[(1, j)]);
        }
    }

    #[test]
    fn embed_with_zero_params_is_zero() {
        let cfg = ModelConfig::default();
        let mut params = init_params(&cfg).unwrap();
        for t in params.tensors_mut() {
            t.fill(0.0);
        }
        let x = FeatureMatrix {
            values: array![[1.0, 2.0, 3.0]],
        };
        assert!(embed(&x, &params).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embed_matches_manual_mlp_and_recorded_h0() {
        let cfg = ModelConfig::default();
        let params = init_params(&cfg).unwrap();
        let g = planted_clique(4, 0.5, 2, 3).unwrap().graph;
        let x = compute_features(&g);
        let manual = {
            let hidden = (x.values.dot(&params.embed.w1) + &params.embed.b1).mapv(|v| v.max(0.0));
            hidden.dot(&params.embed.w2) + &params.embed.b2
        };
        let h = embed(&x, &params);
        assert!((&h - &manual).iter().all(|v| v.abs() < 1e-12));
        let pass = forward_recorded(&g, &x, &params, &cfg).unwrap();
        let h0 = pass.tape.value(pass.readouts[0]);
        assert!((h0 - &manual).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn singleton_filter_bank_passes_filter_output_through() {
        let cfg = ModelConfig {
            filters: vec![Filter::LowPass { r: 1 }],
            ..ModelConfig::default()
        };
        let params = init_params(&cfg).unwrap();
        let g = small_graph(5);
        let h_prev = embed(&compute_features(&g), &params);
        let (h, alphas) = layer_forward_with_attention(&g, &h_prev, &params.layers[0], &cfg);
        assert!(alphas[0].iter().all(|&a| a == 1.0));
        // H_agg equals the filter output exactly, so the layer output is
        // the MLP of A H_prev.
        let expect = params.layers[0].mlp.eval(&g.apply_renorm_adj(&h_prev, 1));
        assert!((&h - &expect).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn attention_weights_sum_to_one_per_node() {
        let cfg = ModelConfig::default();
        let params = init_params(&cfg).unwrap();
        let g = small_graph(6);
        let h_prev = embed(&compute_features(&g), &params);
        let (_, alphas) = layer_forward_with_attention(&g, &h_prev, &params.layers[0], &cfg);
        for v in 0..g.node_count() {
            let total: f64 = alphas.iter().map(|a| a[(v, 0)]).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn layer_forward_matches_dense_reference() {
        let cfg = ModelConfig::default();
        let params = init_params(&ModelConfig {
            seed: 9,
            ..ModelConfig::default()
        })
        .unwrap();
        let g = small_graph(7);
        let h_prev = embed(&compute_features(&g), &params);
        let layer = &params.layers[0];

        // Independent dense route: materialize each filter matrix, compute
        // scores, softmax and the aggregation by hand.
        let a1 = dense::renorm_adj_matrix(&g);
        let a2 = a1.dot(&a1);
        let a3 = a2.dot(&a1);
        let banks = [
            a1.dot(&h_prev),
            a2.dot(&h_prev),
            a3.dot(&h_prev),
            dense::wavelet_matrix(&g, 1).dot(&h_prev),
            dense::wavelet_matrix(&g, 2).dot(&h_prev),
            dense::wavelet_matrix(&g, 3).dot(&h_prev),
        ];
        let n = g.node_count();
        let mut scores = Array2::<f64>::zeros((n, banks.len()));
        for (fi, hf) in banks.iter().enumerate() {
            for v in 0..n {
                let mut s = 0.0;
                for j in 0..8 {
                    let left = hf[(v, j)];
                    let act = if left > 0.0 { left } else { ATTENTION_LEAKY_SLOPE * left };
                    s += act * layer.attention[(j, 0)];
                }
                for j in 0..8 {
                    let right = h_prev[(v, j)];
                    let act = if right > 0.0 { right } else { ATTENTION_LEAKY_SLOPE * right };
                    s += act * layer.attention[(8 + j, 0)];
                }
                scores[(v, fi)] = s;
            }
        }
        let mut agg = Array2::<f64>::zeros((n, 8));
        for v in 0..n {
            let m = scores.row(v).iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let exps: Vec<f64> = scores.row(v).iter().map(|&s| (s - m).exp()).collect();
            let total: f64 = exps.iter().sum();
            for (fi, hf) in banks.iter().enumerate() {
                let alpha = exps[fi] / total;
                for j in 0..8 {
                    agg[(v, j)] += alpha * hf[(v, j)];
                }
            }
        }
        let expect = layer.mlp.eval(&agg);

        let got = layer_forward(&g, &h_prev, layer, &cfg);
        assert!(
            (&got - &expect).iter().all(|v| v.abs() < 1e-10),
            "layer output deviates from dense reference"
        );
    }

    #[test]
    fn forward_on_single_node_is_half() {
        let cfg = ModelConfig::default();
        let params = init_params(&cfg).unwrap();
        let g = Graph::from_edge_list(&[], 1).unwrap();
        let x = compute_features(&g);
        let (p, readouts) = forward(&g, &x, &params, &cfg).unwrap();
        assert_eq!(p, vec![0.5]);
        assert_eq!(readouts.len(), cfg.layers + 1);
    }

    #[test]
    fn forward_hits_unit_range_exactly() {
        let cfg = ModelConfig::default();
        let params = init_params(&cfg).unwrap();
        let g = small_graph(8);
        let x = compute_features(&g);
        let (p, _) = forward(&g, &x, &params, &cfg).unwrap();
        let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(min, 0.0);
        assert_eq!(max, 1.0);
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn forward_rejects_empty_graph() {
        let cfg = ModelConfig::default();
        let params = init_params(&cfg).unwrap();
        let g = Graph::from_edge_list(&[], 0).unwrap();
        let x = compute_features(&g);
        assert!(matches!(
            forward(&g, &x, &params, &cfg),
            Err(ModelError::EmptyGraph)
        ));
    }

    #[test]
    fn forward_rejects_wrong_input_width() {
        let cfg = ModelConfig::default();
        let params = init_params(&cfg).unwrap();
        let g = small_graph(9);
        let x = FeatureMatrix {
            values: Array2::zeros((6, 2)),
        };
        assert!(matches!(
            forward(&g, &x, &params, &cfg),
            Err(ModelError::InputDimMismatch { got: 2, want: 3 })
        ));
    }

    #[test]
    fn forward_is_permutation_equivariant() {
        let cfg = ModelConfig::default();
        let params = init_params(&cfg).unwrap();
        let g = planted_clique(8, 0.4, 3, 13).unwrap().graph;
        let n = 8;
        let perm = |v: usize| (v * 3 + 1) % n; // bijection for gcd(3, 8) = 1
        let relabeled: Vec<(usize, usize)> = g.edges().map(|(u, v)| (perm(u), perm(v))).collect();
        let h = Graph::from_edge_list(&relabeled, n).unwrap();
        let (pg, _) = forward(&g, &compute_features(&g), &params, &cfg).unwrap();
        let (ph, _) = forward(&h, &compute_features(&h), &params, &cfg).unwrap();
        for v in 0..n {
            assert!((pg[v] - ph[perm(v)]).abs() < 1e-9, "node {v}");
        }
    }

    #[test]
    fn low_pass_only_strips_band_pass_entries() {
        let cfg = ModelConfig {
            low_pass_only: true,
            ..ModelConfig::default()
        };
        assert_eq!(
            cfg.effective_filters(),
            vec![
                Filter::LowPass { r: 1 },
                Filter::LowPass { r: 2 },
                Filter::LowPass { r: 3 }
            ]
        );
        cfg.validate().unwrap();
        let bad = ModelConfig {
            low_pass_only: true,
            filters: vec![Filter::BandPass { k: 1 }],
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn checkpoint_roundtrip_preserves_everything() {
        let cfg = ModelConfig {
            seed: 42,
            ..ModelConfig::default()
        };
        let params = init_params(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&params, &cfg, &path).unwrap();
        let (loaded, loaded_cfg) = load_checkpoint(&path).unwrap();
        assert_eq!(params, loaded);
        assert_eq!(cfg, loaded_cfg);
    }

    #[test]
    fn checkpoint_rejects_bad_version() {
        let cfg = ModelConfig::default();
        let params = init_params(&cfg).unwrap();
        let mut doc = Checkpoint::from_params(&params, &cfg);
        doc.version = 99;
        assert!(doc.into_params().is_err());
    }
}
