//! Sentence-level detection and correction scores for equal-length
//! (substitution-only) spelling corpora.
//!
//! A sentence's gold error set is the positions where source and gold
//! differ; the predicted set is where source and prediction differ.
//! Detection judges exact position-set equality; correction additionally
//! requires the predicted tokens to equal the gold tokens.

use serde::Serialize;

use crate::corpus::TokenSeq;
use crate::metrics::{f_beta, MetricsError};

/// Per-sentence outcome flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceJudgment {
    pub gold_has_error: bool,
    /// The system flagged at least one position.
    pub detected: bool,
    /// Predicted error-position set equals the gold set.
    pub detection_exact: bool,
    /// Prediction equals gold at every position.
    pub correction_exact: bool,
}

/// Judges one source/gold/prediction triple of equal length.
pub fn judge(source: &TokenSeq, gold: &TokenSeq, pred: &TokenSeq) -> SentenceJudgment {
    let gold_set: Vec<usize> = (0..source.len()).filter(|&i| source[i] != gold[i]).collect();
    let pred_set: Vec<usize> = (0..source.len()).filter(|&i| source[i] != pred[i]).collect();
    SentenceJudgment {
        gold_has_error: !gold_set.is_empty(),
        detected: !pred_set.is_empty(),
        detection_exact: gold_set == pred_set,
        correction_exact: gold == pred,
    }
}

/// Accuracy/precision/recall/F1 as percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrfAcc {
    pub acc: f64,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SighanReport {
    pub detection: PrfAcc,
    pub correction: PrfAcc,
}

fn prf(true_pos: usize, flagged: usize, with_error: usize, exact: usize, total: usize) -> PrfAcc {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let p = ratio(true_pos, flagged);
    let r = ratio(true_pos, with_error);
    PrfAcc {
        acc: 100.0 * ratio(exact, total),
        p: 100.0 * p,
        r: 100.0 * r,
        f1: 100.0 * f_beta(p, r, 1.0),
    }
}

/// Sentence-level detection and correction scores over aligned triples.
pub fn sighan_eval(
    sources: &[TokenSeq],
    golds: &[TokenSeq],
    preds: &[TokenSeq],
) -> Result<SighanReport, MetricsError> {
    if sources.len() != golds.len() || sources.len() != preds.len() {
        return Err(MetricsError::LengthMismatch {
            refs: golds.len(),
            hyps: preds.len(),
        });
    }
    let total = sources.len();
    let mut flagged = 0usize;
    let mut with_error = 0usize;
    let mut det_tp = 0usize;
    let mut det_exact = 0usize;
    let mut cor_tp = 0usize;
    let mut cor_exact = 0usize;

    for (index, ((src, gold), pred)) in sources.iter().zip(golds).zip(preds).enumerate() {
        if src.len() != gold.len() || src.len() != pred.len() {
            return Err(MetricsError::TripleLengthMismatch {
                index,
                src: src.len(),
                gold: gold.len(),
                pred: pred.len(),
            });
        }
        let j = judge(src, gold, pred);
        flagged += usize::from(j.detected);
        with_error += usize::from(j.gold_has_error);
        det_exact += usize::from(j.detection_exact);
        det_tp += usize::from(j.detection_exact && j.gold_has_error);
        cor_exact += usize::from(j.correction_exact);
        cor_tp += usize::from(j.correction_exact && j.gold_has_error);
    }

    Ok(SighanReport {
        detection: prf(det_tp, flagged, with_error, det_exact, total),
        correction: prf(cor_tp, flagged, with_error, cor_exact, total),
    })
}
