//! Independent oracles shared by the integration and acceptance suites.
//!
//! Nothing here reuses the library's DP paths: scripts come from exhaustive
//! enumeration of edit decisions, and segmentation search enumerates every
//! merge mask globally.

use corrkit::align::EditOp;
use corrkit::corpus::{TokenId, TokenSeq};

/// All (cost, script) decision paths with cost at or under `budget`,
/// enumerated recursively.
fn enumerate_scripts(
    a: &[TokenId],
    b: &[TokenId],
    i: usize,
    j: usize,
    budget: isize,
    script: &mut Vec<EditOp>,
    out: &mut Vec<(usize, Vec<EditOp>)>,
) {
    let remaining_min = (a.len() - i).abs_diff(b.len() - j) as isize;
    if budget < remaining_min {
        return;
    }
    if i == a.len() && j == b.len() {
        let cost = script.iter().filter(|op| !op.is_match()).count();
        out.push((cost, script.clone()));
        return;
    }
    if i < a.len() && j < b.len() {
        if a[i] == b[j] {
            script.push(EditOp::Match { src: i, tgt: j });
            enumerate_scripts(a, b, i + 1, j + 1, budget, script, out);
            script.pop();
        } else {
            script.push(EditOp::Substitute { src: i, tgt: j });
            enumerate_scripts(a, b, i + 1, j + 1, budget - 1, script, out);
            script.pop();
        }
    }
    if i < a.len() {
        script.push(EditOp::Delete { src: i });
        enumerate_scripts(a, b, i + 1, j, budget - 1, script, out);
        script.pop();
    }
    if j < b.len() {
        script.push(EditOp::Insert { tgt: j });
        enumerate_scripts(a, b, i, j + 1, budget - 1, script, out);
        script.pop();
    }
}

/// Minimal edit cost and every minimal script, by exhaustive enumeration.
pub fn brute_min_scripts(a: &TokenSeq, b: &TokenSeq) -> (usize, Vec<Vec<EditOp>>) {
    // Substituting the overlap and deleting/inserting the rest always works,
    // so max(|a|, |b|) bounds the minimum.
    let budget = a.len().max(b.len()) as isize;
    let mut out = Vec::new();
    let mut script = Vec::new();
    enumerate_scripts(a.ids(), b.ids(), 0, 0, budget, &mut script, &mut out);
    let min = out.iter().map(|(c, _)| *c).min().expect("at least one script");
    let scripts = out
        .into_iter()
        .filter(|(c, _)| *c == min)
        .map(|(_, s)| s)
        .collect();
    (min, scripts)
}

pub fn brute_distance(a: &TokenSeq, b: &TokenSeq) -> usize {
    brute_min_scripts(a, b).0
}

fn op_rank(op: &EditOp) -> u8 {
    match op {
        EditOp::Match { .. } => 0,
        EditOp::Substitute { .. } => 1,
        EditOp::Delete { .. } => 2,
        EditOp::Insert { .. } => 3,
    }
}

/// The canonical script under the documented tie rule: minimal cost, then
/// most Match ops, then lexicographically smallest op sequence under
/// Match < Substitute < Delete < Insert, read from the sequence start.
pub fn brute_canonical_script(a: &TokenSeq, b: &TokenSeq) -> Vec<EditOp> {
    let (_, scripts) = brute_min_scripts(a, b);
    let most = scripts
        .iter()
        .map(|s| s.iter().filter(|op| op.is_match()).count())
        .max()
        .expect("non-empty");
    scripts
        .into_iter()
        .filter(|s| s.iter().filter(|op| op.is_match()).count() == most)
        .min_by_key(|s| s.iter().map(op_rank).collect::<Vec<u8>>())
        .expect("non-empty")
}

/// Panics unless `script` transforms `a` into `b` with strictly increasing
/// positions and Match/Substitute token semantics.
pub fn assert_script_valid(a: &TokenSeq, b: &TokenSeq, script: &[EditOp]) {
    let mut rebuilt: Vec<TokenId> = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    for op in script {
        match *op {
            EditOp::Match { src, tgt } => {
                assert_eq!(src, i, "match src position");
                assert_eq!(tgt, j, "match tgt position");
                assert_eq!(a[src], b[tgt], "match connects equal tokens");
                rebuilt.push(b[tgt]);
                i += 1;
                j += 1;
            }
            EditOp::Substitute { src, tgt } => {
                assert_eq!(src, i);
                assert_eq!(tgt, j);
                assert_ne!(a[src], b[tgt], "substitute connects unequal tokens");
                rebuilt.push(b[tgt]);
                i += 1;
                j += 1;
            }
            EditOp::Delete { src } => {
                assert_eq!(src, i);
                i += 1;
            }
            EditOp::Insert { tgt } => {
                assert_eq!(tgt, j);
                rebuilt.push(b[tgt]);
                j += 1;
            }
        }
    }
    assert_eq!(i, a.len(), "script consumes the whole source");
    assert_eq!(j, b.len(), "script produces the whole target");
    assert_eq!(rebuilt, b.ids(), "script rebuilds the target");
}

/// Atomic (src span, tgt span) runs of non-Match ops in script order.
fn atomic_spans(script: &[EditOp]) -> Vec<(usize, usize, usize, usize)> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, usize, usize, usize)> = None;
    let (mut s, mut t) = (0usize, 0usize);
    for op in script {
        match op {
            EditOp::Match { .. } => {
                if let Some(span) = open.take() {
                    spans.push(span);
                }
                s += 1;
                t += 1;
            }
            _ => {
                let span = open.get_or_insert((s, s, t, t));
                match op {
                    EditOp::Substitute { .. } => {
                        s += 1;
                        t += 1;
                    }
                    EditOp::Delete { .. } => s += 1,
                    EditOp::Insert { .. } => t += 1,
                    EditOp::Match { .. } => unreachable!(),
                }
                span.1 = s;
                span.3 = t;
            }
        }
    }
    if let Some(span) = open.take() {
        spans.push(span);
    }
    spans
}

/// Brute-force MaxMatch counts for one sentence: the canonical script's
/// atomic edits, every global merge mask enumerated, every annotator tried;
/// returns (matches, sys_edits, gold_edits) after the same annotator rule as
/// the library (most matches, then fewest gold edits, then lowest index).
pub fn brute_m2_counts(
    source: &TokenSeq,
    system: &TokenSeq,
    gold: &[Vec<(usize, usize, Vec<TokenId>)>],
    max_unchanged: usize,
) -> (usize, usize, usize) {
    let script = brute_canonical_script(source, system);
    let atomics = atomic_spans(&script);
    let n_gaps = atomics.len().saturating_sub(1);
    assert!(n_gaps <= 16, "oracle mask enumeration limited to small scripts");

    let mut best: Option<(usize, usize, usize)> = None;
    for set in gold {
        // Best (matches, -edits) over every merge mask.
        let mut set_best: Option<(usize, isize)> = None;
        for mask in 0u32..(1 << n_gaps) {
            // A set gap bit merges atomics k and k+1; only legal across gaps
            // of at most max_unchanged matched tokens.
            let legal = (0..n_gaps).all(|k| {
                mask & (1 << k) == 0 || atomics[k + 1].0 - atomics[k].1 <= max_unchanged
            });
            if !legal {
                continue;
            }
            // Group consecutive atomics joined by set mask bits.
            let mut groups: Vec<(usize, usize)> = Vec::new();
            let mut start = 0usize;
            for k in 0..atomics.len() {
                let merge_next = k < n_gaps && mask & (1 << k) != 0;
                if !merge_next {
                    groups.push((start, k));
                    start = k + 1;
                }
            }
            let edits: Vec<(usize, usize, Vec<TokenId>)> = groups
                .iter()
                .map(|&(first, last)| {
                    (
                        atomics[first].0,
                        atomics[last].1,
                        system.ids()[atomics[first].2..atomics[last].3].to_vec(),
                    )
                })
                .collect();
            let matches = edits.iter().filter(|e| set.contains(e)).count();
            let cand = (matches, -(edits.len() as isize));
            if set_best.is_none() || cand > set_best.unwrap() {
                set_best = Some(cand);
            }
        }
        let (matches, neg_edits) = set_best.expect("at least the empty mask");
        let cand = (matches, set.len(), (-neg_edits) as usize);
        let better = match best {
            None => true,
            Some((bm, bg, _)) => matches > bm || (matches == bm && set.len() < bg),
        };
        if better {
            best = Some(cand);
        }
    }
    let (matches, gold_edits, sys_edits) = best.expect("at least one annotator");
    (matches, sys_edits, gold_edits)
}
