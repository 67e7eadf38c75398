//! Training-data perturbations: masking of correct source tokens, copy-pair
//! augmentation, and target-side loss masks.
//!
//! The mask sampler selects an exact count `k = round(p * #correct)` of
//! correct source positions per pair, without replacement. Each selected
//! position becomes the mask token with probability `m`, a random other
//! ordinary token with probability `n`, and stays unchanged otherwise.
//! Targets and error-labeled positions are never modified.

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::align::AlignedPair;
use crate::corpus::{ParallelCorpus, TokenId, TokenSeq, Vocab};
use crate::rng::item_rng;

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("invalid mask policy: {reason}")]
    InvalidPolicy { reason: String },
    #[error("vocabulary has {found} ordinary tokens; random replacement needs at least 2")]
    VocabTooSmall { found: usize },
    #[error("copy augmentation with q > 0 but the corpus has no identity pairs")]
    NoCopyPairs,
}

/// Mask sampling parameters: selection ratio `p`, mask probability `m`,
/// random-replacement probability `n`, and the RNG seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskPolicy {
    pub p: f64,
    pub m: f64,
    pub n: f64,
    pub seed: u64,
}

impl MaskPolicy {
    pub fn new(p: f64, m: f64, n: f64, seed: u64) -> Result<Self, PerturbError> {
        for (name, v) in [("p", p), ("m", m), ("n", n)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(PerturbError::InvalidPolicy {
                    reason: format!("{name} = {v} outside [0, 1]"),
                });
            }
        }
        if m + n > 1.0 {
            return Err(PerturbError::InvalidPolicy {
                reason: format!("m + n = {} exceeds 1", m + n),
            });
        }
        Ok(MaskPolicy { p, m, n, seed })
    }

    /// Defaults for spelling-style tasks: p=0.20, m=0.80, n=0.10.
    pub fn spelling(seed: u64) -> Self {
        MaskPolicy {
            p: 0.20,
            m: 0.80,
            n: 0.10,
            seed,
        }
    }

    /// Defaults for ASR-style tasks: p=0.15, m=0.80, n=0.10.
    pub fn asr(seed: u64) -> Self {
        MaskPolicy {
            p: 0.15,
            m: 0.80,
            n: 0.10,
            seed,
        }
    }

    /// The same policy with masking switched off, as used by finetuning.
    pub fn without_masking(&self) -> Self {
        MaskPolicy { p: 0.0, ..*self }
    }
}

fn round_count(fraction: f64, total: usize) -> usize {
    // Half-up rounding; fraction and total are non-negative.
    (fraction * total as f64).round() as usize
}

/// Draws a uniformly random ordinary token different from `original`.
fn random_other_token<R: Rng>(rng: &mut R, vocab: &Vocab, original: TokenId) -> TokenId {
    let reserved = Vocab::RESERVED.len() as TokenId;
    let ordinary = vocab.len() as TokenId - reserved;
    let excluded = original >= reserved;
    let span = if excluded { ordinary - 1 } else { ordinary };
    let draw = rng.gen_range(0..span) + reserved;
    if excluded && draw >= original {
        draw + 1
    } else {
        draw
    }
}

/// Masks correct tokens of `pair.source` under `policy`, drawing from `rng`.
///
/// The caller provides the RNG; use [`mask_corpus`] for the canonical
/// per-pair stream derived from `(policy.seed, pair index)`.
pub fn apply_mask<R: Rng>(
    pair: &AlignedPair,
    policy: &MaskPolicy,
    vocab: &Vocab,
    rng: &mut R,
) -> Result<TokenSeq, PerturbError> {
    if policy.n > 0.0 && vocab.ordinary_len() < 2 {
        return Err(PerturbError::VocabTooSmall {
            found: vocab.ordinary_len(),
        });
    }
    let correct = pair.correct_token_positions();
    let k = round_count(policy.p, correct.len());
    let mut out: Vec<TokenId> = pair.source.ids().to_vec();
    if k == 0 {
        return Ok(TokenSeq::new(out));
    }
    let mut selected: Vec<usize> = index::sample(rng, correct.len(), k)
        .into_iter()
        .map(|i| correct[i])
        .collect();
    selected.sort_unstable();
    for pos in selected {
        let u: f64 = rng.gen();
        if u < policy.m {
            out[pos] = Vocab::MASK;
        } else if u < policy.m + policy.n {
            out[pos] = random_other_token(rng, vocab, out[pos]);
        }
    }
    Ok(TokenSeq::new(out))
}

/// Masks every pair with its canonical per-index RNG stream.
pub fn mask_corpus(
    pairs: &[AlignedPair],
    policy: &MaskPolicy,
    vocab: &Vocab,
) -> Result<Vec<TokenSeq>, PerturbError> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            let mut rng = item_rng(policy.seed, i as u64);
            apply_mask(pair, policy, vocab, &mut rng)
        })
        .collect()
}

/// Copy-pair augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopyAugmentPolicy {
    pub q: f64,
    pub seed: u64,
}

/// Appends `round(q * |C|)` pairs sampled without replacement from the set C
/// of identity pairs (source == target). The appended pairs duplicate
/// existing ones; error pairs are untouched.
pub fn augment_copy(
    corpus: &ParallelCorpus,
    policy: &CopyAugmentPolicy,
) -> Result<ParallelCorpus, PerturbError> {
    if !(0.0..=1.0).contains(&policy.q) {
        return Err(PerturbError::InvalidPolicy {
            reason: format!("q = {} outside [0, 1]", policy.q),
        });
    }
    let identity: Vec<usize> = corpus
        .pairs()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_identity())
        .map(|(i, _)| i)
        .collect();
    if policy.q > 0.0 && identity.is_empty() {
        return Err(PerturbError::NoCopyPairs);
    }
    let k = round_count(policy.q, identity.len());
    let mut out = corpus.clone();
    if k == 0 {
        return Ok(out);
    }
    let mut rng = item_rng(policy.seed, 0);
    let mut picks: Vec<usize> = index::sample(&mut rng, identity.len(), k)
        .into_iter()
        .map(|i| identity[i])
        .collect();
    picks.sort_unstable();
    for idx in picks {
        let pair = corpus.pairs()[idx].clone();
        out.push(pair).expect("identity pairs have non-empty targets");
    }
    Ok(out)
}

/// Per-target-position training flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossFlag {
    Train,
    Skip,
}

/// Which target positions participate in the training loss. Skip flags occur
/// only at Match-aligned (correct) target positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossMask(Vec<LossFlag>);

impl LossMask {
    pub fn flags(&self) -> &[LossFlag] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_trained(&self, position: usize) -> bool {
        self.0[position] == LossFlag::Train
    }

    pub fn skip_count(&self) -> usize {
        self.0.iter().filter(|f| **f == LossFlag::Skip).count()
    }

    /// T/S string, one char per target position.
    pub fn to_flag_string(&self) -> String {
        self.0
            .iter()
            .map(|f| if *f == LossFlag::Skip { 'S' } else { 'T' })
            .collect()
    }
}

/// Flags `round(skip_fraction * #match-aligned-target-positions)` target
/// positions as Skip, sampled without replacement; all others are Train.
pub fn make_loss_mask(pair: &AlignedPair, skip_fraction: f64, seed: u64) -> LossMask {
    let matched = pair.target_match_positions();
    let k = round_count(skip_fraction.clamp(0.0, 1.0), matched.len());
    let mut flags = vec![LossFlag::Train; pair.target.len()];
    if k > 0 {
        let mut rng = item_rng(seed, 0);
        for i in index::sample(&mut rng, matched.len(), k) {
            flags[matched[i]] = LossFlag::Skip;
        }
    }
    LossMask(flags)
}
