//! corrkit: data engineering and evaluation for token-level text error
//! correction.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`corpus`] — tokenization, vocabularies, parallel TSV and vocab files;
//! - [`align`] — minimal-edit alignment and Correct/Error token labels;
//! - [`perturb`] — masking of correct source tokens, copy-pair augmentation,
//!   and target-loss masks;
//! - [`noise`] — synthetic error generation and a seeded Markov corpus
//!   generator;
//! - [`metrics`] — WER/WERR, sentence-level detection/correction scores, and
//!   the MaxMatch edit-overlap scorer;
//! - [`model`] — a window log-linear corrector with a two-stage training
//!   schedule and the sweep experiment runner.
//!
//! Everything randomized takes an explicit seed and derives per-item streams
//! from it, so all pipelines are reproducible byte for byte.

pub mod align;
pub mod corpus;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod perturb;
pub mod rng;

pub use align::{align, edit_distance, AlignedPair, EditOp, Label, LabeledRecord};
pub use corpus::{
    read_parallel_tsv, tokenize, write_parallel_tsv, ParallelCorpus, SurfacePair, TokenId,
    TokenSeq, TokenizeMode, Vocab,
};
pub use metrics::{f_beta, m2::m2_score, sighan::sighan_eval, wer::wer, wer::werr};
pub use model::{predict, train, ToyCorrector, TrainSchedule};
pub use noise::{estimate_profile, noise_asr, noise_confusion, synth_markov, ErrorRateProfile};
pub use perturb::{apply_mask, augment_copy, make_loss_mask, CopyAugmentPolicy, MaskPolicy};
