//! Sweep experiments on the synthetic benchmark: mask-ratio, copy-ratio, and
//! loss-mask grids, each evaluated by sentence-level F1 and WER on a held-out
//! split.

use std::ops::RangeInclusive;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::align::{align, AlignedPair};
use crate::corpus::{ParallelCorpus, SurfacePair, TokenSeq, TokenizeMode, Vocab};
use crate::metrics::sighan::sighan_eval;
use crate::metrics::wer::wer;
use crate::model::{train, ModelError, TrainSchedule};
use crate::noise::{noise_asr, sentence_seed, synth_markov, ErrorRateProfile, NoiseError};
use crate::perturb::{augment_copy, CopyAugmentPolicy, MaskPolicy};
use crate::rng::mix;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("experiment config invalid: {reason}")]
    BadConfig { reason: String },
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Perturb(#[from] crate::perturb::PerturbError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Align(#[from] crate::align::AlignError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Sweep the masked fraction `p` of correct source tokens.
    MaskRatio,
    /// Sweep the ratio of duplicated identity pairs in the training set.
    CopyRatio,
    /// Sweep the fraction of correct target positions excluded from the loss.
    LossMask,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::MaskRatio => "mask-ratio",
            ExperimentKind::CopyRatio => "copy-ratio",
            ExperimentKind::LossMask => "loss-mask",
        }
    }
}

fn default_vocab_size() -> usize {
    50
}
fn default_order() -> usize {
    2
}
fn default_n_sentences() -> usize {
    10_000
}
fn default_len_min() -> usize {
    8
}
fn default_len_max() -> usize {
    20
}
fn default_sub_rate() -> f64 {
    0.1
}

/// Synthetic corpus parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusParams {
    #[serde(default = "default_vocab_size")]
    pub vocab_size: usize,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_n_sentences")]
    pub n_sentences: usize,
    #[serde(default = "default_len_min")]
    pub len_min: usize,
    #[serde(default = "default_len_max")]
    pub len_max: usize,
    #[serde(default = "default_sub_rate")]
    pub sub_rate: f64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            vocab_size: default_vocab_size(),
            order: default_order(),
            n_sentences: default_n_sentences(),
            len_min: default_len_min(),
            len_max: default_len_max(),
            sub_rate: default_sub_rate(),
        }
    }
}

fn default_mask_epochs() -> usize {
    6
}
fn default_finetune_epochs() -> usize {
    3
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_l2() -> f64 {
    1e-5
}
fn default_batch_size() -> usize {
    32
}
fn default_radius() -> usize {
    2
}

/// Training schedule parameters as they appear in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    #[serde(default = "default_mask_epochs")]
    pub mask_epochs: usize,
    #[serde(default = "default_finetune_epochs")]
    pub finetune_epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_radius")]
    pub radius: usize,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            mask_epochs: default_mask_epochs(),
            finetune_epochs: default_finetune_epochs(),
            learning_rate: default_learning_rate(),
            l2: default_l2(),
            batch_size: default_batch_size(),
            radius: default_radius(),
        }
    }
}

fn default_mask_m() -> f64 {
    0.8
}
fn default_mask_n() -> f64 {
    0.1
}

/// Mask policy parameters. In the mask-ratio sweep `p` comes from the grid;
/// the other sweeps train at this fixed `p` (0 by default, matching the
/// plain-training diagnostics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskParams {
    #[serde(default)]
    pub p: f64,
    #[serde(default = "default_mask_m")]
    pub m: f64,
    #[serde(default = "default_mask_n")]
    pub n: f64,
}

impl Default for MaskParams {
    fn default() -> Self {
        MaskParams {
            p: 0.0,
            m: default_mask_m(),
            n: default_mask_n(),
        }
    }
}

/// A full experiment description, loadable from a JSON config file. Unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    #[serde(default)]
    pub corpus: CorpusParams,
    #[serde(default)]
    pub schedule: ScheduleParams,
    #[serde(default)]
    pub mask: MaskParams,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::BadConfig {
                reason: "seed list is empty".into(),
            });
        }
        if self.grid.is_empty() {
            return Err(ExperimentError::BadConfig {
                reason: "parameter grid is empty".into(),
            });
        }
        for &g in &self.grid {
            if !(0.0..=1.0).contains(&g) {
                return Err(ExperimentError::BadConfig {
                    reason: format!("grid value {g} outside [0, 1]"),
                });
            }
        }
        if self.corpus.len_min > self.corpus.len_max {
            return Err(ExperimentError::BadConfig {
                reason: "len_min exceeds len_max".into(),
            });
        }
        Ok(())
    }
}

/// One CSV row; `seed` is None for the seed-averaged row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub experiment: ExperimentKind,
    pub param: f64,
    pub seed: Option<u64>,
    pub f1_detect: f64,
    pub f1_correct: f64,
    pub wer: f64,
}

pub const CSV_HEADER: &str = "experiment,param,seed,f1_detect,f1_correct,wer";

impl BenchmarkRow {
    pub fn to_csv_line(&self) -> String {
        let seed = match self.seed {
            Some(s) => s.to_string(),
            None => "avg".to_string(),
        };
        format!(
            "{},{},{},{:.2},{:.2},{:.2}",
            self.experiment.as_str(),
            self.param,
            seed,
            self.f1_detect,
            self.f1_correct,
            self.wer
        )
    }
}

pub fn rows_to_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

const CORPUS_SALT: u64 = 0x434f5250;
const NOISE_SALT: u64 = 0x4e4f4953;
const COPY_SALT: u64 = 0x434f5059;
const MASK_SALT: u64 = 0x4d41534b;
const TRAIN_SALT: u64 = 0x54524149;

struct PreparedData {
    train_sources: Vec<Vec<String>>,
    train_targets: Vec<Vec<String>>,
    test_sources: Vec<TokenSeq>,
    test_targets: Vec<TokenSeq>,
}

/// Generates the clean corpus, corrupts it, and splits train/test 9:1.
/// The data depends only on the seed and corpus parameters, so every grid
/// point of a sweep sees the same corpus.
fn prepare_data(params: &CorpusParams, seed: u64) -> Result<PreparedData, ExperimentError> {
    let vocab = Vocab::synthetic(params.vocab_size);
    let len_range: RangeInclusive<usize> = params.len_min..=params.len_max;
    let clean = synth_markov(
        params.vocab_size,
        params.order,
        params.n_sentences,
        len_range,
        mix(seed, CORPUS_SALT),
    )?;
    let profile = ErrorRateProfile::substitution_only(params.sub_rate)?;
    let noise_seed = mix(seed, NOISE_SALT);
    let noisy: Vec<TokenSeq> = clean
        .iter()
        .enumerate()
        .map(|(i, sentence)| noise_asr(sentence, &profile, &vocab, sentence_seed(noise_seed, i)))
        .collect::<Result<_, _>>()?;

    let n_test = (clean.len() / 10).max(1).min(clean.len());
    let n_train = clean.len() - n_test;
    let decode_all = |seqs: &[TokenSeq]| -> Result<Vec<Vec<String>>, ExperimentError> {
        seqs.iter()
            .map(|s| vocab.decode(s).map_err(ExperimentError::from))
            .collect()
    };
    Ok(PreparedData {
        train_sources: decode_all(&noisy[..n_train])?,
        train_targets: decode_all(&clean[..n_train])?,
        test_sources: noisy[n_train..].to_vec(),
        test_targets: clean[n_train..].to_vec(),
    })
}

fn run_point(
    config: &ExperimentConfig,
    data: &PreparedData,
    param: f64,
    seed: u64,
) -> Result<BenchmarkRow, ExperimentError> {
    let vocab = Vocab::synthetic(config.corpus.vocab_size);
    let pairs: Vec<SurfacePair> = data
        .train_sources
        .iter()
        .zip(&data.train_targets)
        .map(|(s, t)| SurfacePair {
            source: s.clone(),
            target: t.clone(),
        })
        .collect();
    let mut corpus = ParallelCorpus::from_pairs(TokenizeMode::Whitespace, pairs)?;

    if config.experiment == ExperimentKind::CopyRatio {
        corpus = augment_copy(
            &corpus,
            &CopyAugmentPolicy {
                q: param,
                seed: mix(seed, COPY_SALT),
            },
        )?;
    }

    let aligned: Vec<AlignedPair> = corpus
        .pairs()
        .iter()
        .map(|p| align(&vocab.encode(&p.source), &vocab.encode(&p.target)))
        .collect::<Result<_, _>>()?;

    let p = if config.experiment == ExperimentKind::MaskRatio {
        param
    } else {
        config.mask.p
    };
    let policy = MaskPolicy::new(p, config.mask.m, config.mask.n, mix(seed, MASK_SALT))?;
    let schedule = TrainSchedule {
        mask_epochs: config.schedule.mask_epochs,
        finetune_epochs: config.schedule.finetune_epochs,
        learning_rate: config.schedule.learning_rate,
        l2: config.schedule.l2,
        batch_size: config.schedule.batch_size,
        radius: config.schedule.radius,
        seed: mix(seed, TRAIN_SALT),
        loss_mask_fraction: if config.experiment == ExperimentKind::LossMask {
            param
        } else {
            0.0
        },
    };
    let (model, _) = train(&aligned, &vocab, &policy, &schedule)?;

    let preds: Vec<TokenSeq> = data.test_sources.iter().map(|s| model.predict(s)).collect();
    let report = sighan_eval(&data.test_sources, &data.test_targets, &preds)?;
    let wer_report = wer(&data.test_targets, &preds)?;

    Ok(BenchmarkRow {
        experiment: config.experiment,
        param,
        seed: Some(seed),
        f1_detect: report.detection.f1,
        f1_correct: report.correction.f1,
        wer: wer_report.wer,
    })
}

/// Runs the configured sweep: one row per (grid point, seed) followed by the
/// seed-averaged row for that grid point.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<Vec<BenchmarkRow>, ExperimentError> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut data_per_seed: Vec<(u64, PreparedData)> = Vec::new();
    for &seed in &config.seeds {
        data_per_seed.push((seed, prepare_data(&config.corpus, seed)?));
    }
    for &param in &config.grid {
        let mut sums = (0.0, 0.0, 0.0);
        for (seed, data) in &data_per_seed {
            let row = run_point(config, data, param, *seed)?;
            sums.0 += row.f1_detect;
            sums.1 += row.f1_correct;
            sums.2 += row.wer;
            rows.push(row);
        }
        let n = config.seeds.len() as f64;
        rows.push(BenchmarkRow {
            experiment: config.experiment,
            param,
            seed: None,
            f1_detect: sums.0 / n,
            f1_correct: sums.1 / n,
            wer: sums.2 / n,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(kind: ExperimentKind, grid: &[f64], seeds: &[u64]) -> ExperimentConfig {
        ExperimentConfig {
            experiment: kind,
            grid: grid.to_vec(),
            seeds: seeds.to_vec(),
            output: PathBuf::from("unused.csv"),
            corpus: CorpusParams {
                vocab_size: 12,
                order: 1,
                n_sentences: 60,
                len_min: 5,
                len_max: 9,
                sub_rate: 0.1,
            },
            schedule: ScheduleParams {
                mask_epochs: 1,
                finetune_epochs: 1,
                batch_size: 16,
                radius: 1,
                ..ScheduleParams::default()
            },
            mask: MaskParams::default(),
        }
    }

    #[test]
    fn mask_grid_produces_one_averaged_row_per_point() {
        let grid = [0.0, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5];
        let config = tiny_config(ExperimentKind::MaskRatio, &grid, &[1]);
        let rows = run_benchmark(&config).unwrap();
        let averaged: Vec<&BenchmarkRow> = rows.iter().filter(|r| r.seed.is_none()).collect();
        assert_eq!(averaged.len(), 8);
        assert_eq!(rows.len(), 16);
    }

    #[test]
    fn copy_grid_produces_six_averaged_rows() {
        let grid = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        let config = tiny_config(ExperimentKind::CopyRatio, &grid, &[1]);
        let rows = run_benchmark(&config).unwrap();
        assert_eq!(rows.iter().filter(|r| r.seed.is_none()).count(), 6);
    }

    #[test]
    fn single_seed_average_equals_row() {
        let config = tiny_config(ExperimentKind::LossMask, &[0.5], &[3]);
        let rows = run_benchmark(&config).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].f1_correct, rows[1].f1_correct);
        assert_eq!(rows[0].wer, rows[1].wer);
        assert_eq!(rows[1].seed, None);
    }

    #[test]
    fn empty_seed_list_rejected() {
        let config = tiny_config(ExperimentKind::MaskRatio, &[0.1], &[]);
        assert!(matches!(
            run_benchmark(&config),
            Err(ExperimentError::BadConfig { .. })
        ));
    }

    #[test]
    fn unknown_experiment_name_rejected() {
        let json = r#"{"experiment":"warp-ratio","grid":[0.1],"seeds":[1],"output":"x.csv"}"#;
        let err = serde_json::from_str::<ExperimentConfig>(json).unwrap_err();
        assert!(err.to_string().contains("warp-ratio"), "{err}");
    }

    #[test]
    fn unknown_config_key_rejected_by_name() {
        let json =
            r#"{"experiment":"mask-ratio","grid":[0.1],"seeds":[1],"output":"x.csv","typo_key":3}"#;
        let err = serde_json::from_str::<ExperimentConfig>(json).unwrap_err();
        assert!(err.to_string().contains("typo_key"), "{err}");
    }

    #[test]
    fn csv_format_is_stable() {
        let rows = vec![BenchmarkRow {
            experiment: ExperimentKind::MaskRatio,
            param: 0.15,
            seed: Some(7),
            f1_detect: 62.3456,
            f1_correct: 58.1,
            wer: 3.219,
        }];
        let csv = rows_to_csv(&rows);
        assert_eq!(
            csv,
            "experiment,param,seed,f1_detect,f1_correct,wer\nmask-ratio,0.15,7,62.35,58.10,3.22\n"
        );
    }

    #[test]
    fn benchmark_rows_are_deterministic() {
        let config = tiny_config(ExperimentKind::MaskRatio, &[0.2], &[5]);
        let a = run_benchmark(&config).unwrap();
        let b = run_benchmark(&config).unwrap();
        assert_eq!(a, b);
    }
}
