//! Word error rate and word error reduction rate.

use serde::Serialize;

use crate::align::{align, EditOp};
use crate::corpus::TokenSeq;
use crate::metrics::MetricsError;

/// Corpus-level WER with per-operation counts. `wer` is a percentage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WerReport {
    pub wer: f64,
    pub edits: usize,
    pub sub: usize,
    pub del: usize,
    pub ins: usize,
    pub ref_tokens: usize,
}

/// Sums per-pair Levenshtein edits over the corpus and normalizes by the
/// reference token count. Deletions are reference tokens the hypothesis
/// lacks; insertions are hypothesis tokens the reference lacks.
pub fn wer(refs: &[TokenSeq], hyps: &[TokenSeq]) -> Result<WerReport, MetricsError> {
    if refs.len() != hyps.len() {
        return Err(MetricsError::LengthMismatch {
            refs: refs.len(),
            hyps: hyps.len(),
        });
    }
    let ref_tokens: usize = refs.iter().map(TokenSeq::len).sum();
    if ref_tokens == 0 {
        return Err(MetricsError::EmptyReference);
    }
    let (mut sub, mut del, mut ins) = (0usize, 0usize, 0usize);
    for (r, h) in refs.iter().zip(hyps) {
        // Aligning reference to hypothesis: a Delete drops a reference token
        // (deletion error), an Insert adds a hypothesis token (insertion).
        let pair = align(r, h)?;
        for op in &pair.script {
            match op {
                EditOp::Substitute { .. } => sub += 1,
                EditOp::Delete { .. } => del += 1,
                EditOp::Insert { .. } => ins += 1,
                EditOp::Match { .. } => {}
            }
        }
    }
    let edits = sub + del + ins;
    Ok(WerReport {
        wer: 100.0 * edits as f64 / ref_tokens as f64,
        edits,
        sub,
        del,
        ins,
        ref_tokens,
    })
}

/// Word error reduction rate: `100 * (base - sys) / base`.
pub fn werr(wer_base: f64, wer_sys: f64) -> Result<f64, MetricsError> {
    if wer_base <= 0.0 {
        return Err(MetricsError::BaselineNotPositive(wer_base));
    }
    Ok(100.0 * (wer_base - wer_sys) / wer_base)
}
