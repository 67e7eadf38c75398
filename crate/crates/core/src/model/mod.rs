//! A desk-scale non-autoregressive corrector: a position-wise log-linear
//! model over a symmetric token window, trained with the two-stage schedule
//! (masked epochs, then finetuning without masks).
//!
//! The model predicts each output token from the `2r+1` input tokens around
//! the position (padding beyond the boundaries), so filling a masked token
//! forces it to use context. Inference never sees masks; the mask token is
//! treated as an ordinary input if present.

pub mod experiment;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::AlignedPair;
use crate::corpus::{TokenId, TokenSeq, Vocab};
use crate::perturb::{apply_mask, make_loss_mask, LossMask, MaskPolicy, PerturbError};
use crate::rng::{item_rng, mix};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("position {position} out of range for input of length {len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("pair {index} has unequal source/target lengths ({src} vs {tgt})")]
    UnequalPair {
        index: usize,
        src: usize,
        tgt: usize,
    },
    #[error("model file invalid: {reason}")]
    BadFile { reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

const FILE_VERSION: u32 = 1;

/// Position-wise log-linear corrector over a `±radius` input window.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCorrector {
    radius: usize,
    vocab_len: usize,
    vocab_fingerprint: u64,
    /// Indexed `[offset][input token][output token]`, flattened.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ToyCorrector {
    pub fn new(radius: usize, vocab: &Vocab) -> Self {
        let v = vocab.len();
        ToyCorrector {
            radius,
            vocab_len: v,
            vocab_fingerprint: vocab.fingerprint(),
            weights: vec![0.0; (2 * radius + 1) * v * v],
            bias: vec![0.0; v],
        }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab_len
    }

    pub fn matches_vocab(&self, vocab: &Vocab) -> bool {
        self.vocab_fingerprint == vocab.fingerprint() && self.vocab_len == vocab.len()
    }

    fn window_token(&self, input: &TokenSeq, position: usize, offset: isize) -> TokenId {
        let idx = position as isize + offset;
        if idx < 0 || idx >= input.len() as isize {
            Vocab::PAD
        } else {
            input[idx as usize]
        }
    }

    fn logits_into(&self, input: &TokenSeq, position: usize, out: &mut [f64]) {
        let v = self.vocab_len;
        out.copy_from_slice(&self.bias);
        for (w, offset) in (-(self.radius as isize)..=self.radius as isize).enumerate() {
            let tok = self.window_token(input, position, offset) as usize;
            let row = &self.weights[(w * v + tok) * v..(w * v + tok + 1) * v];
            for (o, r) in out.iter_mut().zip(row) {
                *o += r;
            }
        }
    }

    /// Probability distribution over the vocabulary for one position.
    pub fn forward(&self, input: &TokenSeq, position: usize) -> Result<Vec<f64>, ModelError> {
        if position >= input.len() {
            return Err(ModelError::PositionOutOfRange {
                position,
                len: input.len(),
            });
        }
        let mut logits = vec![0.0; self.vocab_len];
        self.logits_into(input, position, &mut logits);
        softmax_in_place(&mut logits);
        Ok(logits)
    }

    /// Per-position argmax over ordinary tokens; ties break toward the
    /// lowest id, and special tokens are never emitted.
    pub fn predict(&self, input: &TokenSeq) -> TokenSeq {
        let mut logits = vec![0.0; self.vocab_len];
        let reserved = Vocab::RESERVED.len();
        (0..input.len())
            .map(|pos| {
                self.logits_into(input, pos, &mut logits);
                let mut best = reserved;
                for y in reserved + 1..self.vocab_len {
                    if logits[y] > logits[best] {
                        best = y;
                    }
                }
                best as TokenId
            })
            .collect()
    }

    /// Flattened parameters: all window weights, then the bias row.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter length mismatch");
        let split = self.weights.len();
        self.weights.copy_from_slice(&params[..split]);
        self.bias.copy_from_slice(&params[split..]);
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let file = ModelFile {
            version: FILE_VERSION,
            radius: self.radius,
            vocab_len: self.vocab_len,
            vocab_fingerprint: format!("{:016x}", self.vocab_fingerprint),
            bias: self.bias.clone(),
            weights: self.weights.clone(),
        };
        let json = serde_json::to_string(&file).expect("model serializes");
        fs::write(path, json).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| ModelError::BadFile {
            reason: e.to_string(),
        })?;
        if file.version != FILE_VERSION {
            return Err(ModelError::BadFile {
                reason: format!("unsupported version {}", file.version),
            });
        }
        let expect_w = (2 * file.radius + 1) * file.vocab_len * file.vocab_len;
        if file.weights.len() != expect_w || file.bias.len() != file.vocab_len {
            return Err(ModelError::BadFile {
                reason: "weight array sizes inconsistent with radius and vocab".into(),
            });
        }
        let fingerprint = u64::from_str_radix(&file.vocab_fingerprint, 16).map_err(|_| {
            ModelError::BadFile {
                reason: "bad vocab fingerprint".into(),
            }
        })?;
        Ok(ToyCorrector {
            radius: file.radius,
            vocab_len: file.vocab_len,
            vocab_fingerprint: fingerprint,
            weights: file.weights,
            bias: file.bias,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    radius: usize,
    vocab_len: usize,
    vocab_fingerprint: String,
    bias: Vec<f64>,
    weights: Vec<f64>,
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

/// One training example: the (possibly masked) input, the target, and an
/// optional loss mask over target positions.
pub struct BatchItem<'a> {
    pub input: &'a TokenSeq,
    pub target: &'a TokenSeq,
    pub loss_mask: Option<&'a LossMask>,
}

/// Mean cross-entropy over trained positions plus the L2 penalty.
/// Returns the loss and the number of trained positions.
pub fn batch_loss(model: &ToyCorrector, batch: &[BatchItem], l2: f64) -> (f64, usize) {
    let mut logits = vec![0.0; model.vocab_len];
    let mut ce = 0.0;
    let mut positions = 0usize;
    for item in batch {
        for pos in 0..item.target.len() {
            if let Some(mask) = item.loss_mask {
                if !mask.is_trained(pos) {
                    continue;
                }
            }
            model.logits_into(item.input, pos, &mut logits);
            softmax_in_place(&mut logits);
            ce -= logits[item.target[pos] as usize].max(f64::MIN_POSITIVE).ln();
            positions += 1;
        }
    }
    let mean = if positions == 0 { 0.0 } else { ce / positions as f64 };
    let penalty: f64 = if l2 == 0.0 {
        0.0
    } else {
        0.5 * l2
            * (model.weights.iter().map(|w| w * w).sum::<f64>()
                + model.bias.iter().map(|b| b * b).sum::<f64>())
    };
    (mean + penalty, positions)
}

/// Analytic gradient of [`batch_loss`] in the layout of
/// [`ToyCorrector::params`]. `grad` is overwritten.
pub fn batch_loss_and_grad(
    model: &ToyCorrector,
    batch: &[BatchItem],
    l2: f64,
    grad: &mut [f64],
) -> (f64, usize) {
    assert_eq!(grad.len(), model.param_count(), "gradient buffer size");
    grad.fill(0.0);
    let v = model.vocab_len;
    let bias_at = model.weights.len();
    let mut positions = 0usize;
    for item in batch {
        for pos in 0..item.target.len() {
            if let Some(mask) = item.loss_mask {
                if !mask.is_trained(pos) {
                    continue;
                }
            }
            positions += 1;
        }
    }
    if positions == 0 {
        let (loss, _) = batch_loss(model, batch, l2);
        if l2 != 0.0 {
            let params = model.params();
            for (g, p) in grad.iter_mut().zip(&params) {
                *g = l2 * p;
            }
        }
        return (loss, 0);
    }

    let scale = 1.0 / positions as f64;
    let mut probs = vec![0.0; v];
    let mut ce = 0.0;
    for item in batch {
        for pos in 0..item.target.len() {
            if let Some(mask) = item.loss_mask {
                if !mask.is_trained(pos) {
                    continue;
                }
            }
            model.logits_into(item.input, pos, &mut probs);
            softmax_in_place(&mut probs);
            let target = item.target[pos] as usize;
            ce -= probs[target].max(f64::MIN_POSITIVE).ln();
            // d(mean CE)/d(logit_y) = scale * (p_y - 1{y == target})
            for (w, offset) in (-(model.radius as isize)..=model.radius as isize).enumerate() {
                let tok = model.window_token(item.input, pos, offset) as usize;
                let row = &mut grad[(w * v + tok) * v..(w * v + tok + 1) * v];
                for (g, p) in row.iter_mut().zip(&probs) {
                    *g += scale * p;
                }
                row[target] -= scale;
            }
            let bias_row = &mut grad[bias_at..];
            for (g, p) in bias_row.iter_mut().zip(&probs) {
                *g += scale * p;
            }
            bias_row[target] -= scale;
        }
    }
    let mut loss = ce * scale;
    if l2 != 0.0 {
        let params = model.params();
        let mut sq = 0.0;
        for (g, p) in grad.iter_mut().zip(&params) {
            *g += l2 * p;
            sq += p * p;
        }
        loss += 0.5 * l2 * sq;
    }
    (loss, positions)
}

/// Two-stage training configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    pub mask_epochs: usize,
    pub finetune_epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub radius: usize,
    pub seed: u64,
    /// Fraction of match-aligned target positions excluded from the loss,
    /// re-drawn every epoch. Applies to both stages.
    pub loss_mask_fraction: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            mask_epochs: 6,
            finetune_epochs: 3,
            learning_rate: 0.1,
            l2: 1e-5,
            batch_size: 32,
            radius: 2,
            seed: 0,
            loss_mask_fraction: 0.0,
        }
    }
}

/// Per-epoch mean losses for both stages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub mask_epoch_losses: Vec<f64>,
    pub finetune_epoch_losses: Vec<f64>,
}

const MASK_EPOCH_SALT: u64 = 0x4d41_534b;
const LOSS_MASK_SALT: u64 = 0x4c4f_5353;
const ORDER_SALT: u64 = 0x5348_5546;

/// Trains a corrector on equal-length aligned pairs.
///
/// Stage one runs `mask_epochs` epochs with the mask policy, re-drawing the
/// masks each epoch from epoch-salted streams; stage two runs
/// `finetune_epochs` with masking off. Everything is determined by the
/// schedule and policy seeds.
pub fn train(
    pairs: &[AlignedPair],
    vocab: &Vocab,
    policy: &MaskPolicy,
    schedule: &TrainSchedule,
) -> Result<(ToyCorrector, TrainLog), ModelError> {
    for (index, pair) in pairs.iter().enumerate() {
        if pair.source.len() != pair.target.len() {
            return Err(ModelError::UnequalPair {
                index,
                src: pair.source.len(),
                tgt: pair.target.len(),
            });
        }
    }
    let mut model = ToyCorrector::new(schedule.radius, vocab);
    let mut log = TrainLog::default();
    let mut grad = vec![0.0; model.param_count()];
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let batch_size = schedule.batch_size.max(1);

    let mut epoch_tag = 0u64;
    for stage in 0..2 {
        let (epochs, stage_policy) = if stage == 0 {
            (schedule.mask_epochs, *policy)
        } else {
            (schedule.finetune_epochs, policy.without_masking())
        };
        for _ in 0..epochs {
            epoch_tag += 1;
            let inputs: Vec<TokenSeq> = if stage_policy.p > 0.0 {
                let epoch_seed = mix(stage_policy.seed, MASK_EPOCH_SALT ^ (epoch_tag << 16));
                pairs
                    .iter()
                    .enumerate()
                    .map(|(i, pair)| {
                        let mut rng = item_rng(epoch_seed, i as u64);
                        apply_mask(pair, &stage_policy, vocab, &mut rng)
                    })
                    .collect::<Result<_, _>>()?
            } else {
                pairs.iter().map(|p| p.source.clone()).collect()
            };
            let loss_masks: Option<Vec<LossMask>> = if schedule.loss_mask_fraction > 0.0 {
                let epoch_seed = mix(schedule.seed, LOSS_MASK_SALT ^ (epoch_tag << 16));
                Some(
                    pairs
                        .iter()
                        .enumerate()
                        .map(|(i, pair)| {
                            make_loss_mask(
                                pair,
                                schedule.loss_mask_fraction,
                                mix(epoch_seed, i as u64),
                            )
                        })
                        .collect(),
                )
            } else {
                None
            };

            order.shuffle(&mut item_rng(mix(schedule.seed, ORDER_SALT), epoch_tag));
            let mut loss_sum = 0.0;
            let mut pos_sum = 0usize;
            for chunk in order.chunks(batch_size) {
                let batch: Vec<BatchItem> = chunk
                    .iter()
                    .map(|&i| BatchItem {
                        input: &inputs[i],
                        target: &pairs[i].target,
                        loss_mask: loss_masks.as_ref().map(|ms| &ms[i]),
                    })
                    .collect();
                let (loss, positions) = batch_loss_and_grad(&model, &batch, schedule.l2, &mut grad);
                if positions == 0 {
                    continue;
                }
                let lr = schedule.learning_rate;
                let split = model.weights.len();
                for (w, g) in model.weights.iter_mut().zip(&grad[..split]) {
                    *w -= lr * g;
                }
                for (b, g) in model.bias.iter_mut().zip(&grad[split..]) {
                    *b -= lr * g;
                }
                loss_sum += loss * positions as f64;
                pos_sum += positions;
            }
            let epoch_loss = if pos_sum == 0 {
                0.0
            } else {
                loss_sum / pos_sum as f64
            };
            if stage == 0 {
                log.mask_epoch_losses.push(epoch_loss);
            } else {
                log.finetune_epoch_losses.push(epoch_loss);
            }
        }
    }
    Ok((model, log))
}

/// Convenience wrapper matching the inference contract: takes an unmasked
/// source and returns the per-position prediction.
pub fn predict(model: &ToyCorrector, source: &TokenSeq) -> TokenSeq {
    model.predict(source)
}
