//! Evaluation protocols: WER/WERR, sentence-level detection/correction
//! scores, and the MaxMatch edit-overlap scorer.

pub mod m2;
pub mod sighan;
pub mod wer;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("reference/hypothesis counts differ: {refs} vs {hyps}")]
    LengthMismatch { refs: usize, hyps: usize },
    #[error("references contain no tokens")]
    EmptyReference,
    #[error("baseline WER {0} must be positive")]
    BaselineNotPositive(f64),
    #[error("triple {index}: source/gold/pred lengths differ ({src}/{gold}/{pred})")]
    TripleLengthMismatch {
        index: usize,
        src: usize,
        gold: usize,
        pred: usize,
    },
    #[error("gold edits overlap at annotation {index} (start {start} < previous end {prev_end})")]
    OverlappingEdits {
        index: usize,
        start: usize,
        prev_end: usize,
    },
    #[error("edit span {start}..{end} invalid for source of length {len}")]
    BadSpan { start: usize, end: usize, len: usize },
    #[error("no annotator sets supplied")]
    NoAnnotators,
    #[error("gold file line {line}: {reason}")]
    BadGoldFile { line: usize, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Align(#[from] crate::align::AlignError),
}

/// F-beta on fractional precision and recall; 0 when both are 0.
pub fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * p + r;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / denom
    }
}

/// Rounds to two decimals, the precision used by every printed percentage.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}
