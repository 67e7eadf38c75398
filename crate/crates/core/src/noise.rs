//! Synthetic error generation for unpaired text, error-rate estimation from
//! paired data, and a seeded Markov-chain corpus generator.

use std::collections::BTreeMap;
use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{align, EditOp};
use crate::corpus::{ParallelCorpus, TokenId, TokenSeq, Vocab};
use crate::rng::{item_rng, mix};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("confusion dictionary maps {token:?} to itself")]
    SelfMapping { token: String },
    #[error("confusion dictionary entry {token:?} has no candidates")]
    EmptyCandidates { token: String },
    #[error("confusion dictionary line {line}: expected token<TAB>candidates")]
    BadDictLine { line: usize },
    #[error("rate {value} outside [0, 1]")]
    InvalidRate { value: f64 },
    #[error("error rates sum to {sum}, must be < 1")]
    RatesSum { sum: f64 },
    #[error("cannot estimate a profile from a corpus with no target tokens")]
    EmptyCorpus,
    #[error("vocabulary has {found} ordinary tokens; noising needs at least 2")]
    VocabTooSmall { found: usize },
    #[error("invalid parameter: {reason}")]
    BadParam { reason: String },
    #[error("invalid profile file: {reason}")]
    BadProfile { reason: String },
    #[error(transparent)]
    Align(#[from] crate::align::AlignError),
}

fn io_err(path: &Path, source: std::io::Error) -> NoiseError {
    NoiseError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Map from a token surface to the surfaces it is commonly mistaken for.
/// Entries never contain the key itself and are deduplicated and sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionDict {
    map: BTreeMap<String, Vec<String>>,
}

impl ConfusionDict {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Result<Self, NoiseError> {
        let mut map = BTreeMap::new();
        for (token, mut cands) in entries {
            cands.sort();
            cands.dedup();
            if cands.iter().any(|c| *c == token) {
                return Err(NoiseError::SelfMapping { token });
            }
            if cands.is_empty() {
                return Err(NoiseError::EmptyCandidates { token });
            }
            map.insert(token, cands);
        }
        Ok(ConfusionDict { map })
    }

    pub fn empty() -> Self {
        ConfusionDict::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn candidates(&self, token: &str) -> Option<&[String]> {
        self.map.get(token).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<String>)> {
        self.map.iter()
    }

    /// Reads lines of the form `token<TAB>cand1 cand2 …`.
    pub fn read(path: &Path) -> Result<Self, NoiseError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut entries = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (token, cands) = line
                .split_once('\t')
                .ok_or(NoiseError::BadDictLine { line: idx + 1 })?;
            let cands: Vec<String> = cands.split_whitespace().map(String::from).collect();
            if token.is_empty() || cands.is_empty() {
                return Err(NoiseError::BadDictLine { line: idx + 1 });
            }
            entries.insert(token.to_string(), cands);
        }
        Self::new(entries)
    }

    pub fn write(&self, path: &Path) -> Result<(), NoiseError> {
        let mut out = String::new();
        for (token, cands) in &self.map {
            out.push_str(token);
            out.push('\t');
            out.push_str(&cands.join(" "));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| io_err(path, e))
    }
}

/// Whether the replacement count is taken over dictionary-covered positions
/// or over all positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateDenominator {
    #[default]
    Covered,
    All,
}

/// Replaces an exact count of dictionary-covered positions with a random
/// confusable candidate. Positions without usable candidates are never
/// altered; output length equals input length.
pub fn noise_confusion(
    clean: &TokenSeq,
    dict: &ConfusionDict,
    vocab: &Vocab,
    rate: f64,
    denominator: RateDenominator,
    seed: u64,
) -> Result<TokenSeq, NoiseError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(NoiseError::InvalidRate { value: rate });
    }
    // A position is covered when its surface has at least one in-vocab
    // candidate different from the original token.
    let mut covered: Vec<(usize, Vec<TokenId>)> = Vec::new();
    for (pos, id) in clean.iter().enumerate() {
        let Some(surface) = vocab.surface(id) else {
            continue;
        };
        let Some(cands) = dict.candidates(surface) else {
            continue;
        };
        let ids: Vec<TokenId> = cands
            .iter()
            .filter(|c| vocab.contains(c))
            .map(|c| vocab.id(c))
            .filter(|&c| c != id)
            .collect();
        if !ids.is_empty() {
            covered.push((pos, ids));
        }
    }
    let denom = match denominator {
        RateDenominator::Covered => covered.len(),
        RateDenominator::All => clean.len(),
    };
    let k = ((rate * denom as f64).round() as usize).min(covered.len());
    let mut out: Vec<TokenId> = clean.ids().to_vec();
    if k == 0 {
        return Ok(TokenSeq::new(out));
    }
    let mut rng = item_rng(seed, 0);
    let mut picks: Vec<usize> = index::sample(&mut rng, covered.len(), k).into_vec();
    picks.sort_unstable();
    for i in picks {
        let (pos, ref cands) = covered[i];
        out[pos] = cands[rng.gen_range(0..cands.len())];
    }
    Ok(TokenSeq::new(out))
}

/// Per-operation error rates plus the substitution dictionary learned from
/// observed (clean token → error token) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateProfile {
    #[serde(rename = "ins")]
    pub ins_rate: f64,
    #[serde(rename = "del")]
    pub del_rate: f64,
    #[serde(rename = "sub")]
    pub sub_rate: f64,
    pub sub_dict: ConfusionDict,
}

impl ErrorRateProfile {
    pub fn new(
        ins_rate: f64,
        del_rate: f64,
        sub_rate: f64,
        sub_dict: ConfusionDict,
    ) -> Result<Self, NoiseError> {
        for rate in [ins_rate, del_rate, sub_rate] {
            if !(0.0..1.0).contains(&rate) {
                return Err(NoiseError::InvalidRate { value: rate });
            }
        }
        let sum = ins_rate + del_rate + sub_rate;
        if sum >= 1.0 {
            return Err(NoiseError::RatesSum { sum });
        }
        Ok(ErrorRateProfile {
            ins_rate,
            del_rate,
            sub_rate,
            sub_dict,
        })
    }

    /// Substitution-only profile with uniform replacement.
    pub fn substitution_only(sub_rate: f64) -> Result<Self, NoiseError> {
        Self::new(0.0, 0.0, sub_rate, ConfusionDict::empty())
    }

    pub fn read(path: &Path) -> Result<Self, NoiseError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let profile: ErrorRateProfile =
            serde_json::from_str(&text).map_err(|e| NoiseError::BadProfile {
                reason: e.to_string(),
            })?;
        Self::new(
            profile.ins_rate,
            profile.del_rate,
            profile.sub_rate,
            profile.sub_dict,
        )
    }

    pub fn write(&self, path: &Path) -> Result<(), NoiseError> {
        let json = serde_json::to_string_pretty(self).expect("profile serializes");
        fs::write(path, json).map_err(|e| io_err(path, e))
    }
}

/// Estimates insertion/deletion/substitution rates from a paired corpus.
///
/// Rates are normalized by the total target token count. An Insert op in the
/// source→target script means the source lost a token (a deletion error);
/// a Delete op means the source gained one (an insertion error). The learned
/// dictionary maps each clean target token to the error tokens observed
/// substituting it.
pub fn estimate_profile(corpus: &ParallelCorpus) -> Result<ErrorRateProfile, NoiseError> {
    let vocab = Vocab::build(corpus, 1);
    let mut target_tokens = 0usize;
    let mut subs = 0usize;
    let mut source_gained = 0usize;
    let mut source_lost = 0usize;
    let mut observed: BTreeMap<String, Vec<String>> = BTreeMap::new();

    for pair in corpus.pairs() {
        let src = vocab.encode(&pair.source);
        let tgt = vocab.encode(&pair.target);
        target_tokens += tgt.len();
        let aligned = align(&src, &tgt)?;
        for op in &aligned.script {
            match op {
                EditOp::Substitute { src: s, tgt: t } => {
                    subs += 1;
                    let clean = pair.target[*t].clone();
                    let error = pair.source[*s].clone();
                    if clean != error {
                        observed.entry(clean).or_default().push(error);
                    }
                }
                EditOp::Delete { .. } => source_gained += 1,
                EditOp::Insert { .. } => source_lost += 1,
                EditOp::Match { .. } => {}
            }
        }
    }
    if target_tokens == 0 {
        return Err(NoiseError::EmptyCorpus);
    }
    let total = target_tokens as f64;
    ErrorRateProfile::new(
        source_gained as f64 / total,
        source_lost as f64 / total,
        subs as f64 / total,
        ConfusionDict::new(observed)?,
    )
}

/// Counts of the operations actually applied by [`noise_asr_ops`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NoiseOps {
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
}

/// Like [`noise_asr`] but also reports the applied operation counts.
///
/// Draw order per sentence: the insertion slot before position 0, then for
/// each position the delete/substitute/keep draw followed by the trailing
/// insertion slot. Substitutions prefer an in-vocab dictionary candidate and
/// fall back to a uniform ordinary token different from the original.
pub fn noise_asr_ops(
    clean: &TokenSeq,
    profile: &ErrorRateProfile,
    vocab: &Vocab,
    seed: u64,
) -> Result<(TokenSeq, NoiseOps), NoiseError> {
    if (profile.sub_rate > 0.0 || profile.ins_rate > 0.0) && vocab.ordinary_len() < 2 {
        return Err(NoiseError::VocabTooSmall {
            found: vocab.ordinary_len(),
        });
    }
    let mut rng = item_rng(seed, 0);
    let mut out: Vec<TokenId> = Vec::with_capacity(clean.len() + 2);
    let mut ops = NoiseOps::default();
    let reserved = Vocab::RESERVED.len() as TokenId;
    let ordinary = vocab.len() as TokenId - reserved;

    let maybe_insert = |rng: &mut rand_chacha::ChaCha8Rng, out: &mut Vec<TokenId>, ops: &mut NoiseOps| {
        if profile.ins_rate > 0.0 && rng.gen::<f64>() < profile.ins_rate {
            out.push(rng.gen_range(0..ordinary) + reserved);
            ops.insertions += 1;
        }
    };

    maybe_insert(&mut rng, &mut out, &mut ops);
    for id in clean.iter() {
        let u: f64 = rng.gen();
        if u < profile.del_rate {
            ops.deletions += 1;
        } else if u < profile.del_rate + profile.sub_rate {
            let from_dict = vocab
                .surface(id)
                .and_then(|s| profile.sub_dict.candidates(s))
                .map(|cands| {
                    cands
                        .iter()
                        .filter(|c| vocab.contains(c))
                        .map(|c| vocab.id(c))
                        .filter(|&c| c != id)
                        .collect::<Vec<TokenId>>()
                })
                .unwrap_or_default();
            let replacement = if from_dict.is_empty() {
                let excluded = id >= reserved;
                let span = if excluded { ordinary - 1 } else { ordinary };
                let draw = rng.gen_range(0..span) + reserved;
                if excluded && draw >= id {
                    draw + 1
                } else {
                    draw
                }
            } else {
                from_dict[rng.gen_range(0..from_dict.len())]
            };
            out.push(replacement);
            ops.substitutions += 1;
        } else {
            out.push(id);
        }
        maybe_insert(&mut rng, &mut out, &mut ops);
    }
    Ok((TokenSeq::new(out), ops))
}

/// Applies position-wise random insertion, deletion, and substitution at the
/// profile's rates.
pub fn noise_asr(
    clean: &TokenSeq,
    profile: &ErrorRateProfile,
    vocab: &Vocab,
    seed: u64,
) -> Result<TokenSeq, NoiseError> {
    noise_asr_ops(clean, profile, vocab, seed).map(|(seq, _)| seq)
}

/// Samples clean sentences from a seed-deterministic order-`k` Markov chain
/// with Dirichlet(0.3) transition rows over `vocab_size` ordinary tokens.
/// Emitted ids match [`Vocab::synthetic`]`(vocab_size)`.
pub fn synth_markov(
    vocab_size: usize,
    order: usize,
    n_sentences: usize,
    len_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<Vec<TokenSeq>, NoiseError> {
    if vocab_size < 8 {
        return Err(NoiseError::BadParam {
            reason: format!("vocab_size {vocab_size} < 8"),
        });
    }
    if !(1..=2).contains(&order) {
        return Err(NoiseError::BadParam {
            reason: format!("order {order} not in {{1, 2}}"),
        });
    }
    let (lo, hi) = (*len_range.start(), *len_range.end());
    if lo < 3 || hi > 100 || lo > hi {
        return Err(NoiseError::BadParam {
            reason: format!("length range {lo}..={hi} outside [3, 100]"),
        });
    }

    let reserved = Vocab::RESERVED.len() as TokenId;
    let n = vocab_size;
    let mut table_rng = item_rng(seed, u64::MAX);
    let gamma = Gamma::new(0.3, 1.0).expect("valid gamma shape");
    let dirichlet_row = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        let mut row: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            row.iter_mut().for_each(|w| *w = 1.0 / n as f64);
        } else {
            row.iter_mut().for_each(|w| *w /= sum);
        }
        row
    };

    // Cumulative rows for O(log n) sampling.
    let cumulative = |mut row: Vec<f64>| -> Vec<f64> {
        let mut acc = 0.0;
        for w in row.iter_mut() {
            acc += *w;
            *w = acc;
        }
        row
    };

    let start = cumulative(dirichlet_row(&mut table_rng));
    let first_step: Vec<Vec<f64>> = if order == 2 {
        (0..n)
            .map(|_| cumulative(dirichlet_row(&mut table_rng)))
            .collect()
    } else {
        Vec::new()
    };
    let context_rows = if order == 1 { n } else { n * n };
    let transitions: Vec<Vec<f64>> = (0..context_rows)
        .map(|_| cumulative(dirichlet_row(&mut table_rng)))
        .collect();

    let sample_row = |row: &[f64], u: f64| -> usize {
        row.partition_point(|&c| c < u).min(n - 1)
    };

    let mut sentences = Vec::with_capacity(n_sentences);
    for s in 0..n_sentences {
        let mut rng = item_rng(seed, s as u64);
        let len = rng.gen_range(lo..=hi);
        let mut states: Vec<usize> = Vec::with_capacity(len);
        for pos in 0..len {
            let row = match (order, pos) {
                (_, 0) => &start,
                (1, _) => &transitions[states[pos - 1]],
                (2, 1) => &first_step[states[0]],
                (2, _) => &transitions[states[pos - 2] * n + states[pos - 1]],
                _ => unreachable!("order validated above"),
            };
            states.push(sample_row(row, rng.gen::<f64>()));
        }
        sentences.push(states.into_iter().map(|s| s as TokenId + reserved).collect());
    }
    Ok(sentences)
}

/// Derives the per-sentence noising seed used by corpus-level pipelines.
pub fn sentence_seed(seed: u64, sentence_index: usize) -> u64 {
    mix(seed, sentence_index as u64)
}
