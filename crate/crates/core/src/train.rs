//! Unsupervised training: per-graph forward, two-term loss, reverse-mode
//! gradients, adaptive-moment updates, best-validation checkpointing.

use crate::datagen::Instance;
use crate::features::{compute_features, FeatureMatrix};
use crate::graph::Graph;
use crate::loss::LossConfig;
use crate::model::{forward_recorded, init_params, ModelConfig, ModelError, ModelParams};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training needs a non-empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Loss balance beta.
    pub beta: f64,
    pub seed: u64,
    /// First-moment decay.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    pub epsilon: f64,
    /// Optional global gradient-norm clip.
    pub grad_clip: Option<f64>,
    /// Early-stop patience in epochs without validation improvement.
    pub patience: usize,
    /// Fraction of instances held out for validation.
    pub val_fraction: f64,
    /// Per-graph z-score of the input features.
    pub zscore_features: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 200,
            beta: 1.0,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            grad_clip: None,
            patience: 20,
            val_fraction: 0.15,
            zscore_features: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig("learning rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(TrainError::InvalidConfig(
                "moment decay rates must lie in [0, 1)".into(),
            ));
        }
        if self.beta < 0.0 {
            return Err(TrainError::InvalidConfig("beta must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(TrainError::InvalidConfig(
                "validation fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig { beta: self.beta }
    }
}

/// First/second moment accumulators for the adaptive update.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step: usize,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Array2<f64>> = params
            .tensors()
            .iter()
            .map(|t| Array2::zeros(t.raw_dim()))
            .collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected adaptive-moment update. Returns `false` (and leaves
/// everything untouched) when any gradient entry is non-finite.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[Array2<f64>],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> bool {
    if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return false;
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    for ((slot, grad), (m, v)) in params
        .tensors_mut()
        .into_iter()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        assert_eq!(slot.raw_dim(), grad.raw_dim(), "gradient shape mismatch");
        *m = &*m * cfg.beta1 + &(grad * (1.0 - cfg.beta1));
        *v = &*v * cfg.beta2 + &(grad.mapv(|g| g * g) * (1.0 - cfg.beta2));
        let m_hat = &*m / bias1;
        let v_hat = &*v / bias2;
        let update = &m_hat / &(v_hat.mapv(f64::sqrt) + cfg.epsilon);
        *slot -= &(update * cfg.learning_rate);
    }
    true
}

fn clip_gradients(grads: &mut [Array2<f64>], max_norm: f64) {
    let norm: f64 = grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
}

/// Training record surfaced for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    /// Mean step loss per epoch.
    pub train_losses: Vec<f64>,
    /// Mean validation loss after each epoch.
    pub val_losses: Vec<f64>,
    /// Validation loss of the untrained initialization.
    pub initial_val_loss: f64,
    /// Epoch (1-based) of the returned checkpoint; 0 means initialization.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub skipped_steps: usize,
    pub aborted: Option<String>,
    pub wall_clock_s: f64,
    pub train_instance_count: usize,
    pub val_instance_count: usize,
}

fn forward_loss(
    graph: &Graph,
    x: &FeatureMatrix,
    params: &ModelParams,
    mcfg: &ModelConfig,
    beta: f64,
) -> Result<f64, ModelError> {
    let mut pass = forward_recorded(graph, x, params, mcfg)?;
    let loss = pass.tape.quad_form_loss(pass.p, graph, beta);
    Ok(pass.tape.value(loss)[(0, 0)])
}

/// Full model + loss value at the given parameters (no recording kept).
pub fn model_loss_value(
    graph: &Graph,
    x: &FeatureMatrix,
    params: &ModelParams,
    mcfg: &ModelConfig,
    beta: f64,
) -> f64 {
    forward_loss(graph, x, params, mcfg, beta).expect("shapes validated by caller")
}

/// Max relative error between recorded model gradients and central finite
/// differences, sampling up to `max_coords` coordinates per tensor when
/// set. The independent route re-evaluates the whole forward pass at
/// perturbed parameters.
#[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
pub fn model_grad_check(
    graph: &Graph,
    x: &FeatureMatrix,
    params: &ModelParams,
    mcfg: &ModelConfig,
    beta: f64,
    h: f64,
    max_coords: Option<usize>,
    seed: u64,
) -> Result<f64, ModelError> {
    let mut pass = forward_recorded(graph, x, params, mcfg)?;
    let loss = pass.tape.quad_form_loss(pass.p, graph, beta);
    pass.tape.backward(loss).expect("scalar loss root");
    let analytic: Vec<Array2<f64>> = pass.param_ids.iter().map(|&id| pass.tape.grad(id)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = params.clone();
    let mut worst = 0.0f64;
    let tensor_count = analytic.len();
    for t_idx in 0..tensor_count {
        let (rows, cols) = {
            let t = work.tensors()[t_idx];
            (t.nrows(), t.ncols())
        };
        let len = rows * cols;
        let coords: Vec<usize> = match max_coords {
            Some(m) if len > m => rand::seq::index::sample(&mut rng, len, m).into_vec(),
            _ => (0..len).collect(),
        };
        for flat in coords {
            let (r, c) = (flat / cols, flat % cols);
            let a = analytic[t_idx][(r, c)];
            let mut fd_err = |step: f64| -> f64 {
                let orig = work.tensors()[t_idx][(r, c)];
                work.tensors_mut()[t_idx][(r, c)] = orig + step;
                let plus = model_loss_value(graph, x, &work, mcfg, beta);
                work.tensors_mut()[t_idx][(r, c)] = orig - step;
                let minus = model_loss_value(graph, x, &work, mcfg, beta);
                work.tensors_mut()[t_idx][(r, c)] = orig;
                let numeric = (plus - minus) / (2.0 * step);
                // Two-tolerance comparison: differences below 1e-6 are
                // cancellation noise (the FD noise floor here is ~1e-8),
                // which would otherwise swamp the ratio on coordinates
                // with tiny or exactly-zero true gradients, e.g. the
                // shift-invariant directions that min-max normalization
                // creates.
                let diff = (a - numeric).abs();
                if diff < 1e-6 {
                    0.0
                } else {
                    diff / a.abs().max(numeric.abs())
                }
            };
            // A step straddling a ReLU or argmin/argmax kink is wrong at
            // that one scale only; a genuine gradient bug is step-size
            // independent. Refine once before believing a mismatch.
            let mut err = fd_err(h);
            if err > 5e-5 {
                err = err.min(fd_err(h / 10.0));
            }
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn mean_val_loss(
    indices: &[usize],
    instances: &[&Instance],
    feats: &[FeatureMatrix],
    params: &ModelParams,
    mcfg: &ModelConfig,
    beta: f64,
) -> f64 {
    let total: f64 = indices
        .par_iter()
        .map(|&i| model_loss_value(&instances[i].graph, &feats[i], params, mcfg, beta))
        .sum();
    total / indices.len() as f64
}

/// Train on the dataset and return the best-validation checkpoint.
///
/// One graph per optimization step, order reshuffled per epoch from the
/// seed. When no instances are left for validation (tiny datasets), the
/// training set doubles as the validation set.
pub fn train(
    dataset: &[Instance],
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<(ModelParams, TrainReport), TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    tcfg.validate()?;
    let start = Instant::now();
    let instances: Vec<&Instance> = dataset.iter().collect();
    let feats: Vec<FeatureMatrix> = instances
        .par_iter()
        .map(|inst| {
            let f = compute_features(&inst.graph);
            if tcfg.zscore_features {
                f.zscore()
            } else {
                f
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut rng);
    let val_count = ((instances.len() as f64) * tcfg.val_fraction).round() as usize;
    let (val_idx, train_idx): (Vec<usize>, Vec<usize>) =
        if val_count == 0 || val_count >= instances.len() {
            (order.clone(), order.clone())
        } else {
            (order[..val_count].to_vec(), order[val_count..].to_vec())
        };

    let mut params = init_params(mcfg)?;
    let mut state = AdamState::new(&params);
    let beta = tcfg.beta;

    let initial_val_loss = mean_val_loss(&val_idx, &instances, &feats, &params, mcfg, beta);
    let mut best_params = params.clone();
    let mut best_val_loss = initial_val_loss;
    let mut best_epoch = 0usize;
    let mut train_losses = Vec::new();
    let mut val_losses = Vec::new();
    let mut skipped_steps = 0usize;
    let mut aborted = None;
    let mut stall = 0usize;

    let mut train_order = train_idx.clone();
    'epochs: for epoch in 1..=tcfg.epochs {
        train_order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &train_order {
            let graph = &instances[i].graph;
            let mut pass = forward_recorded(graph, &feats[i], &params, mcfg)?;
            let loss_id = pass.tape.quad_form_loss(pass.p, graph, beta);
            let loss_value = pass.tape.value(loss_id)[(0, 0)];
            if !loss_value.is_finite() {
                aborted = Some(format!(
                    "non-finite loss at epoch {epoch} on instance {i}; \
                     returning the best checkpoint so far"
                ));
                break 'epochs;
            }
            epoch_loss += loss_value;
            pass.tape.backward(loss_id).expect("scalar loss root");
            let mut grads: Vec<Array2<f64>> =
                pass.param_ids.iter().map(|&id| pass.tape.grad(id)).collect();
            if let Some(clip) = tcfg.grad_clip {
                clip_gradients(&mut grads, clip);
            }
            if !adam_step(&mut params, &grads, &mut state, tcfg) {
                skipped_steps += 1;
            }
        }
        train_losses.push(epoch_loss / train_order.len() as f64);

        let val = mean_val_loss(&val_idx, &instances, &feats, &params, mcfg, beta);
        val_losses.push(val);
        if val.is_finite() && val < best_val_loss {
            best_val_loss = val;
            best_epoch = epoch;
            best_params = params.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= tcfg.patience {
                break;
            }
        }
    }

    debug_assert!(best_params.all_finite());
    let report = TrainReport {
        model_config: mcfg.clone(),
        train_config: *tcfg,
        train_losses,
        val_losses,
        initial_val_loss,
        best_epoch,
        best_val_loss,
        skipped_steps,
        aborted,
        wall_clock_s: start.elapsed().as_secs_f64(),
        train_instance_count: train_idx.len(),
        val_instance_count: val_idx.len(),
    };
    Ok((best_params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::planted_clique;
    use crate::decoder::{decode, DecoderConfig};

    fn k5_instance(seed: u64) -> Instance {
        planted_clique(5, 1.0, 5, seed).unwrap()
    }

    #[test]
    fn adam_with_zero_gradient_is_a_no_op() {
        let mcfg = ModelConfig::default();
        let mut params = init_params(&mcfg).unwrap();
        let before = params.clone();
        let grads: Vec<Array2<f64>> = params
            .tensors()
            .iter()
            .map(|t| Array2::zeros(t.raw_dim()))
            .collect();
        let mut state = AdamState::new(&params);
        assert!(adam_step(&mut params, &grads, &mut state, &TrainConfig::default()));
        assert_eq!(params, before);
    }

    #[test]
    fn adam_first_step_moves_by_signed_learning_rate() {
        let mcfg = ModelConfig::default();
        let mut params = init_params(&mcfg).unwrap();
        let before = params.clone();
        let tcfg = TrainConfig::default();
        let grads: Vec<Array2<f64>> = params
            .tensors()
            .iter()
            .enumerate()
            .map(|(i, t)| Array2::from_elem(t.raw_dim(), if i % 2 == 0 { 0.3 } else { -1.7 }))
            .collect();
        let mut state = AdamState::new(&params);
        assert!(adam_step(&mut params, &grads, &mut state, &tcfg));
        for ((after, before), grad) in params.tensors().iter().zip(before.tensors()).zip(&grads) {
            for ((a, b), g) in after.iter().zip(before.iter()).zip(grad.iter()) {
                let update = a - b;
                // First bias-corrected step is ~ -lr * sign(g).
                assert!(update.abs() <= tcfg.learning_rate * (1.0 + 1e-6));
                assert!(update.signum() == -g.signum());
                assert!(update.abs() >= tcfg.learning_rate * 0.99);
            }
        }
    }

    #[test]
    fn adam_skips_non_finite_gradients() {
        let mcfg = ModelConfig::default();
        let mut params = init_params(&mcfg).unwrap();
        let before = params.clone();
        let mut grads: Vec<Array2<f64>> = params
            .tensors()
            .iter()
            .map(|t| Array2::from_elem(t.raw_dim(), 1.0))
            .collect();
        grads[0][(0, 0)] = f64::NAN;
        let mut state = AdamState::new(&params);
        assert!(!adam_step(&mut params, &grads, &mut state, &TrainConfig::default()));
        assert_eq!(params, before);
    }

    #[test]
    fn training_is_deterministic() {
        let dataset: Vec<Instance> = (0..6).map(|s| planted_clique(12, 0.3, 4, s).unwrap()).collect();
        let mcfg = ModelConfig::default();
        let tcfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        let (a, ra) = train(&dataset, &mcfg, &tcfg).unwrap();
        let (b, rb) = train(&dataset, &mcfg, &tcfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.train_losses, rb.train_losses);
        assert_eq!(ra.val_losses, rb.val_losses);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let dataset = vec![k5_instance(1)];
        let mcfg = ModelConfig::default();
        let tcfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (params, report) = train(&dataset, &mcfg, &tcfg).unwrap();
        assert_eq!(params, init_params(&mcfg).unwrap());
        assert!(report.train_losses.is_empty());
        assert_eq!(report.best_epoch, 0);
    }

    #[test]
    fn training_on_k5_learns_to_decode_it() {
        for seed in [0u64, 1, 2] {
            let dataset = vec![k5_instance(seed)];
            let mcfg = ModelConfig {
                seed,
                ..ModelConfig::default()
            };
            let tcfg = TrainConfig {
                epochs: 200,
                seed,
                patience: 200,
                ..TrainConfig::default()
            };
            let (params, report) = train(&dataset, &mcfg, &tcfg).unwrap();
            let first = report.train_losses.first().unwrap();
            let last = report.train_losses.last().unwrap();
            assert!(last <= first, "seed {seed}: loss went {first} -> {last}");
            assert!(report.best_val_loss <= report.initial_val_loss);

            let inst = &dataset[0];
            let x = compute_features(&inst.graph);
            let (p, _) = crate::model::forward(&inst.graph, &x, &params, &mcfg).unwrap();
            let result = decode(&inst.graph, &p, &DecoderConfig::new(1, 5)).unwrap();
            assert_eq!(result.size, 5, "seed {seed}");
        }
    }

    #[test]
    fn gradient_check_at_initialization() {
        use rand::Rng;
        let inst = planted_clique(8, 0.4, 3, 5).unwrap();
        let mcfg = ModelConfig::default();
        let params = init_params(&mcfg).unwrap();
        let mut x = compute_features(&inst.graph);
        // Zero feature rows (isolated nodes) plus zero biases would pin
        // ReLU pre-activations exactly onto the kink, where central
        // differences measure the average slope instead of either
        // one-sided derivative. Jitter moves the check to a generic point.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        x.values.mapv_inplace(|v| v + rng.gen_range(-0.01..0.01));
        let err = model_grad_check(&inst.graph, &x, &params, &mcfg, 1.0, 1e-6, Some(20), 7)
            .unwrap();
        assert!(err < 1e-4, "rel err {err}");
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(
            train(&[], &ModelConfig::default(), &TrainConfig::default()),
            Err(TrainError::EmptyDataset)
        ));
    }
}
