//! Seeded single-bag training loop: Adam with decoupled weight decay,
//! global-norm gradient clipping and best-on-validation selection.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngCore;

use crate::attention::{self, AttentionError, HeadConfig, HeadKind, HeadParams};
use crate::features::FeatureBag;
use crate::loss::{self, AslConfig};
use crate::math;
use crate::metrics::{self, MetricError};
use crate::rng::{self, Purpose};
use crate::NUM_FACTORS;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("bag {wsi_id} has dimension {actual}, expected {expected}")]
    Dimension { wsi_id: String, expected: usize, actual: usize },
    #[error("non-finite loss on bag {wsi_id} in epoch {epoch}")]
    NonFiniteLoss { wsi_id: String, epoch: usize },
    #[error("parameter and gradient shapes differ")]
    Shape,
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates mirroring the parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: HeadParams,
    pub second: HeadParams,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &HeadParams) -> Self {
        Self { first: params.zeros_like(), second: params.zeros_like(), step: 0 }
    }
}

/// One bias-corrected Adam update of a flat tensor at step `t` (1-based),
/// followed by `θ ← θ − lr·wd·θ`.
#[allow(clippy::too_many_arguments)]
pub fn adam_update(param: &mut [f64], grad: &[f64], first: &mut [f64], second: &mut [f64], t: u64, lr: f64, wd: f64, hyper: &AdamHyper) {
    let bias1 = 1.0 - math::powf(hyper.beta1, t as f64);
    let bias2 = 1.0 - math::powf(hyper.beta2, t as f64);
    for i in 0..param.len() {
        let g = grad[i];
        first[i] = hyper.beta1 * first[i] + (1.0 - hyper.beta1) * g;
        second[i] = hyper.beta2 * second[i] + (1.0 - hyper.beta2) * g * g;
        let m_hat = first[i] / bias1;
        let v_hat = second[i] / bias2;
        param[i] -= lr * m_hat / (math::sqrt(v_hat) + hyper.eps);
        param[i] -= lr * wd * param[i];
    }
}

pub fn adam_step(params: &mut HeadParams, grads: &HeadParams, state: &mut AdamState, lr: f64, wd: f64) -> Result<(), TrainError> {
    if !params.same_shape(grads) || !params.same_shape(&state.first) || !params.same_shape(&state.second) {
        return Err(TrainError::Shape);
    }
    state.step += 1;
    let hyper = AdamHyper::default();
    let grads = grads.tensors();
    let firsts = state.first.tensors_mut();
    let seconds = state.second.tensors_mut();
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads).zip(firsts).zip(seconds) {
        adam_update(p, g, m, v, state.step, lr, wd, &hyper);
    }
    Ok(())
}

/// Global L2 norm over several tensors.
pub fn global_norm(tensors: &[&[f64]]) -> f64 {
    math::sqrt(tensors.iter().flat_map(|t| t.iter()).map(|g| g * g).sum())
}

/// Rescales all tensors by `max_norm / norm` when their joint norm exceeds
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm(tensors: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = math::sqrt(tensors.iter().flat_map(|t| t.iter()).map(|g| g * g).sum());
    if norm > max_norm {
        let scale = max_norm / norm;
        for t in tensors.iter_mut() {
            for g in t.iter_mut() {
                *g *= scale;
            }
        }
    }
    norm
}

pub fn clip_gradients(grads: &mut HeadParams, max_norm: f64) -> f64 {
    clip_global_norm(&mut grads.tensors_mut(), max_norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    /// Global gradient-norm limit; `None` disables clipping.
    pub clip: Option<f64>,
    pub epochs: usize,
    pub hidden: usize,
    pub seed: u64,
    pub head: HeadConfig,
    pub asl: AslConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            weight_decay: 0.001,
            clip: Some(0.08),
            epochs: 25,
            hidden: 128,
            seed: 0,
            head: HeadConfig::new(HeadKind::Mrl),
            asl: AslConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-bag loss over the epoch.
    pub train_loss: f64,
    pub val_map: Option<f64>,
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch, or the initial parameters
    /// when no epoch produced a defined mAP.
    pub best: HeadParams,
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochRecord>,
}

fn check_dims(bags: &[FeatureBag], dim: usize) -> Result<(), TrainError> {
    match bags.iter().find(|b| b.dim() != dim) {
        Some(b) => Err(TrainError::Dimension { wsi_id: b.wsi_id().into(), expected: dim, actual: b.dim() }),
        None => Ok(()),
    }
}

/// Bag visiting order for `epoch`.
pub fn epoch_order(seed: u64, epoch: usize, count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut rng::stream(seed, Purpose::Shuffle, epoch as u64));
    order
}

/// Loss and gradients for one bag.
pub fn bag_gradients(head: &HeadConfig, params: &HeadParams, bag: &FeatureBag, asl: &AslConfig, dropout_seed: Option<u64>) -> Result<(f64, HeadParams), TrainError> {
    let fwd = head.forward(bag.instances(), params, dropout_seed)?;
    let labels: [bool; NUM_FACTORS] = bag.labels().0.map(|v| v != 0);
    let (loss, dlogits) = loss::asl(&fwd.logits, &labels, asl);
    let grads = attention::backward(&fwd.cache, params, &dlogits)?;
    Ok((loss, grads))
}

/// Trains one head with batch size 1 and keeps the parameters with the
/// highest validation mAP (earliest epoch on ties).
pub fn train(train_bags: &[FeatureBag], val_bags: &[FeatureBag], cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    let first = train_bags.first().ok_or(TrainError::EmptySplit("train"))?;
    if val_bags.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    let dim = first.dim();
    check_dims(train_bags, dim)?;
    check_dims(val_bags, dim)?;

    let mut params = HeadParams::init(cfg.hidden, dim, NUM_FACTORS, cfg.seed);
    let mut state = AdamState::new(&params);
    let mut best = params.clone();
    let mut best_map: Option<f64> = None;
    let mut best_epoch = None;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut dropout_seeds = rng::stream(cfg.seed, Purpose::Dropout, epoch as u64);
        let mut loss_sum = 0.0;
        for idx in epoch_order(cfg.seed, epoch, train_bags.len()) {
            let bag = &train_bags[idx];
            let step_seed = dropout_seeds.next_u64();
            let (loss, mut grads) = bag_gradients(&cfg.head, &params, bag, &cfg.asl, Some(step_seed))?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { wsi_id: bag.wsi_id().into(), epoch });
            }
            loss_sum += loss;
            if let Some(max_norm) = cfg.clip {
                clip_gradients(&mut grads, max_norm);
            }
            adam_step(&mut params, &grads, &mut state, cfg.lr, cfg.weight_decay)?;
        }
        let report = metrics::evaluate(&cfg.head, &params, val_bags, 0.5)?;
        if let Some(map) = report.map {
            if best_map.is_none_or(|b| map > b) {
                best_map = Some(map);
                best_epoch = Some(epoch);
                best = params.clone();
            }
        }
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_bags.len() as f64,
            val_map: report.map,
            val_auc: report.auc,
        });
    }
    Ok(TrainOutcome { best, best_epoch, history })
}
