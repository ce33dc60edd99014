use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::checkpoint::{Checkpoint, CheckpointMeta};
use super::config::{config_hash, TrainConfig};
use crate::data::{fit_constants, AugmentPlan, CaseSource, FoldSplit, NormConstants, PreparedSet};
use crate::error::{Error, Result};
use crate::metrics::micro_ovr_auc;
use crate::model::{loss_and_grads_chunked, predict_proba, NetworkConfig, ParamSet};
use crate::ndcore::Tensor;
use crate::rng::{self, tag};

/// Preprocessed training and validation cases of one fold.
#[derive(Clone, Debug)]
pub struct FoldData {
    pub fold: usize,
    pub train: PreparedSet,
    pub val: PreparedSet,
    pub norm: NormConstants,
    pub dataset_hash: String,
}

/// Loads one fold. Normalization constants come from the fold's training
/// cases alone; held-out cases are never read.
pub fn prepare_fold(source: &dyn CaseSource, split: &FoldSplit, fold: usize, hw: usize) -> Result<FoldData> {
    split.validate()?;
    let (train_ids, val_ids) = split.fold_members(fold)?;
    if train_ids.is_empty() || val_ids.is_empty() {
        return Err(Error::Data(format!(
            "fold {fold} has {} training and {} validation cases",
            train_ids.len(),
            val_ids.len()
        )));
    }
    let norm = fit_constants(source, &train_ids)?;
    norm.ensure_excludes(val_ids.iter().chain(&split.holdout).map(String::as_str))?;
    Ok(FoldData {
        fold,
        train: PreparedSet::load(source, &train_ids, &norm, hw)?,
        val: PreparedSet::load(source, &val_ids, &norm, hw)?,
        norm,
        dataset_hash: dataset_hash(split)?,
    })
}

pub fn dataset_hash(split: &FoldSplit) -> Result<String> {
    config_hash(split)
}

/// Real-class probabilities `[N, K]` for every case in `set`.
pub fn evaluate(net: &NetworkConfig, params: &ParamSet<f32>, set: &PreparedSet, chunk: usize) -> Result<Tensor<f64>> {
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut out = Vec::with_capacity(set.len() * net.num_classes);
    for part in idx.chunks(chunk.max(1)) {
        let probs = predict_proba(net, params, &set.batch(part)?)?;
        out.extend(probs.data().iter().map(|&p| p as f64));
    }
    Tensor::from_vec(&[set.len(), net.num_classes], out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
    pub best_val_auc: f64,
}

/// Why a run stopped before its epoch budget for a reason other than patience.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halt {
    pub epoch: usize,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    /// Set when an embedding collapsed to zero norm. Training stops there and
    /// the best checkpoint from the preceding epochs is returned.
    pub halted: Option<Halt>,
}

/// Hash of everything that determines a training run's result.
pub fn run_hash(cfg: &TrainConfig, net: &NetworkConfig) -> Result<String> {
    config_hash(&(cfg, cfg.network(net)))
}

fn training_batch(cfg: &TrainConfig, data: &PreparedSet, idx: &[usize], epoch: usize) -> Result<Tensor<f32>> {
    if !cfg.augment {
        return data.batch(idx);
    }
    let first = &data.volumes[idx[0]];
    let mut shape = vec![idx.len()];
    shape.extend_from_slice(first.shape());
    let mut buf = Vec::with_capacity(idx.len() * first.len());
    for &i in idx {
        let mut r = rng::stream(cfg.seed, &[tag::AUGMENT, epoch as u64, rng::hash_str(&data.ids[i])]);
        buf.extend_from_slice(AugmentPlan::sample(&mut r).apply(&data.volumes[i])?.data());
    }
    Tensor::from_vec(&shape, buf)
}

/// Trains one fold and returns the snapshot with the highest validation
/// micro-OvR AUC (the earliest such epoch on ties).
pub fn train_fold(cfg: &TrainConfig, base: &NetworkConfig, data: &FoldData) -> Result<TrainOutcome> {
    train_fold_with(cfg, base, data, |_| {})
}

/// [`train_fold`] with a per-epoch callback, for progress reporting.
pub fn train_fold_with(
    cfg: &TrainConfig,
    base: &NetworkConfig,
    data: &FoldData,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let net = cfg.network(base);
    net.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Data(format!("fold {} is empty", data.fold)));
    }
    let hash = run_hash(cfg, base)?;
    let mut params: ParamSet<f32> = ParamSet::init(&net, cfg.se_enabled, &mut rng::stream(cfg.seed, &[tag::INIT]))?;
    let mut state = AdamState::new(&params);
    let adam = AdamConfig {
        lr: cfg.lr,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.eps,
    };
    let lambda = cfg.l2_lambda as f32;
    let n = data.train.len();

    let mut best: Option<Checkpoint> = None;
    let mut history = Vec::new();
    let mut since_best = 0usize;
    let mut halted = None;
    'epochs: for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng::stream(cfg.seed, &[tag::SHUFFLE, epoch as u64]));
        let mut loss_sum = 0.0f64;
        for idx in order.chunks(cfg.batch) {
            let batch = training_batch(cfg, &data.train, idx, epoch)?;
            let labels: Vec<usize> = idx.iter().map(|&i| data.train.labels[i]).collect();
            let gp = match loss_and_grads_chunked(&net, &params, &batch, &labels, lambda, cfg.chunk) {
                Err(e @ Error::SingularEmbedding(_)) if best.is_some() => {
                    halted = Some(Halt {
                        epoch,
                        reason: e.to_string(),
                    });
                    break 'epochs;
                }
                r => r?,
            };
            if !gp.value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("loss is {}", gp.value),
                });
            }
            adam_step(&mut params, &gp.grads, &mut state, &adam).map_err(|e| Error::Diverged {
                epoch,
                detail: e.to_string(),
            })?;
            loss_sum += gp.value as f64 * idx.len() as f64;
        }

        let val_auc = micro_ovr_auc(&evaluate(&net, &params, &data.val, cfg.chunk)?, &data.val.labels)?.auc;
        let improved = best.as_ref().is_none_or(|b| val_auc > b.meta.val_auc);
        if improved {
            since_best = 0;
            best = Some(Checkpoint {
                params: params.clone(),
                meta: CheckpointMeta {
                    epoch,
                    val_auc,
                    config_hash: hash.clone(),
                    dataset_hash: data.dataset_hash.clone(),
                    fold: data.fold,
                    network: net.clone(),
                    se_enabled: cfg.se_enabled,
                    norm: data.norm.clone(),
                    tensors: vec![],
                },
            });
        } else {
            since_best += 1;
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            val_auc,
            best_val_auc: best.as_ref().map(|b| b.meta.val_auc).unwrap_or(val_auc),
        };
        on_epoch(&record);
        history.push(record);
        if cfg.patience.is_some_and(|p| since_best >= p) {
            break;
        }
    }
    let mut checkpoint = best.expect("at least one epoch");
    checkpoint.meta.tensors = checkpoint.params.named().iter().map(|(n, _)| n.to_string()).collect();
    Ok(TrainOutcome {
        checkpoint,
        history,
        halted,
    })
}
