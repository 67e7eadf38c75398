//! MaxMatch edit-overlap scoring for correction systems.
//!
//! System edits are extracted from the minimal alignment of (source, system
//! output). Runs of non-Match ops form atomic edits; adjacent atomic edits
//! separated by at most `max_unchanged` matched tokens may be merged, and the
//! segmentation is chosen to maximize the number of exact (span, replacement)
//! matches against the gold annotations, breaking ties toward fewer edits.
//! Per sentence, the annotator set maximizing (matches, then fewest gold
//! edits) is selected; corpus precision/recall/F0.5 come from the summed
//! counts with the 0/0 -> 1.0 convention.
//!
//! Extraction works on the single canonical alignment rather than the full
//! lattice of minimal alignments, so when a deleted or inserted token equals
//! its neighbor the recovered span may sit one position away from the
//! annotator's; such an edit does not match.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::align::{align, AlignedPair, EditOp};
use crate::corpus::{TokenId, TokenSeq, Vocab};
use crate::metrics::{f_beta, MetricsError};

/// A span edit: replace source tokens `start..end` with `replacement`.
/// `start == end` is an insertion; an empty replacement is a deletion.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EditAnnotation {
    pub start: usize,
    pub end: usize,
    pub replacement: Vec<TokenId>,
}

/// Validates one annotator's edit set: spans in range, sorted, non-overlapping.
fn validate_edits(edits: &[EditAnnotation], source_len: usize) -> Result<(), MetricsError> {
    let mut prev_end = 0usize;
    for (index, edit) in edits.iter().enumerate() {
        if edit.start > edit.end || edit.end > source_len {
            return Err(MetricsError::BadSpan {
                start: edit.start,
                end: edit.end,
                len: source_len,
            });
        }
        if index > 0 && edit.start < prev_end {
            return Err(MetricsError::OverlappingEdits {
                index,
                start: edit.start,
                prev_end,
            });
        }
        prev_end = edit.end;
    }
    Ok(())
}

/// Applies a sorted, non-overlapping edit set to `source`.
pub fn apply_edits(source: &TokenSeq, edits: &[EditAnnotation]) -> Result<TokenSeq, MetricsError> {
    validate_edits(edits, source.len())?;
    let mut out: Vec<TokenId> = Vec::with_capacity(source.len());
    let mut cursor = 0usize;
    for edit in edits {
        out.extend_from_slice(&source.ids()[cursor..edit.start]);
        out.extend_from_slice(&edit.replacement);
        cursor = edit.end;
    }
    out.extend_from_slice(&source.ids()[cursor..]);
    Ok(TokenSeq::new(out))
}

/// A maximal run of non-Match ops, tracked by its source and target spans.
#[derive(Debug, Clone, Copy)]
struct AtomicEdit {
    src_start: usize,
    src_end: usize,
    tgt_start: usize,
    tgt_end: usize,
}

fn extract_atomic_edits(pair: &AlignedPair) -> Vec<AtomicEdit> {
    let mut atomics: Vec<AtomicEdit> = Vec::new();
    let mut open: Option<AtomicEdit> = None;
    let (mut s, mut t) = (0usize, 0usize);
    for op in &pair.script {
        match op {
            EditOp::Match { .. } => {
                if let Some(a) = open.take() {
                    atomics.push(a);
                }
                s += 1;
                t += 1;
            }
            _ => {
                let a = open.get_or_insert(AtomicEdit {
                    src_start: s,
                    src_end: s,
                    tgt_start: t,
                    tgt_end: t,
                });
                match op {
                    EditOp::Substitute { .. } => {
                        s += 1;
                        t += 1;
                    }
                    EditOp::Delete { .. } => s += 1,
                    EditOp::Insert { .. } => t += 1,
                    EditOp::Match { .. } => unreachable!(),
                }
                a.src_end = s;
                a.tgt_end = t;
            }
        }
    }
    if let Some(a) = open.take() {
        atomics.push(a);
    }
    atomics
}

/// Best (matches, edit count) over all segmentations of one region, where a
/// region is a maximal chain of atomic edits with every consecutive gap at
/// most `max_unchanged`. Any partition into consecutive merged groups is a
/// valid segmentation of the region, so a quadratic DP over group ends finds
/// the optimum exactly.
fn best_region_segmentation(
    region: &[AtomicEdit],
    system: &TokenSeq,
    gold: &HashSet<(usize, usize, &[TokenId])>,
) -> (usize, usize) {
    let k = region.len();
    let group_matches = |i: usize, j: usize| -> usize {
        let src_span = (region[i].src_start, region[j].src_end);
        let replacement = &system.ids()[region[i].tgt_start..region[j].tgt_end];
        usize::from(gold.contains(&(src_span.0, src_span.1, replacement)))
    };
    // best[e] = (max matches, min edits) covering region[0..e].
    let mut best: Vec<(usize, isize)> = vec![(0, 0); k + 1];
    for e in 1..=k {
        let mut cell = (0usize, isize::MIN);
        for start in 0..e {
            let (m, neg) = best[start];
            let cand = (m + group_matches(start, e - 1), neg - 1);
            if cand > cell {
                cell = cand;
            }
        }
        best[e] = cell;
    }
    let (matches, neg_edits) = best[k];
    (matches, (-neg_edits) as usize)
}

fn matched_counts(
    atomics: &[AtomicEdit],
    system: &TokenSeq,
    gold: &[EditAnnotation],
    max_unchanged: usize,
) -> (usize, usize) {
    let gold_set: HashSet<(usize, usize, &[TokenId])> = gold
        .iter()
        .map(|e| (e.start, e.end, e.replacement.as_slice()))
        .collect();
    let mut matches = 0usize;
    let mut edits = 0usize;
    let mut region_start = 0usize;
    for i in 1..=atomics.len() {
        let split = i == atomics.len() || {
            let gap = atomics[i].src_start - atomics[i - 1].src_end;
            gap > max_unchanged
        };
        if split {
            let (m, e) = best_region_segmentation(&atomics[region_start..i], system, &gold_set);
            matches += m;
            edits += e;
            region_start = i;
        }
    }
    (matches, edits)
}

/// Precision/recall/F0.5 as percentages plus the raw overlap counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct M2Report {
    pub p: f64,
    pub r: f64,
    pub f_half: f64,
    pub matches: usize,
    pub sys_edits: usize,
    pub gold_edits: usize,
}

fn report_from_counts(matches: usize, sys_edits: usize, gold_edits: usize) -> M2Report {
    let convention = |num: usize, den: usize| {
        if den == 0 {
            1.0
        } else {
            num as f64 / den as f64
        }
    };
    let p = convention(matches, sys_edits);
    let r = convention(matches, gold_edits);
    M2Report {
        p: 100.0 * p,
        r: 100.0 * r,
        f_half: 100.0 * f_beta(p, r, 0.5),
        matches,
        sys_edits,
        gold_edits,
    }
}

fn sentence_counts(
    source: &TokenSeq,
    system: &TokenSeq,
    gold: &[Vec<EditAnnotation>],
    max_unchanged: usize,
) -> Result<(usize, usize, usize), MetricsError> {
    if gold.is_empty() {
        return Err(MetricsError::NoAnnotators);
    }
    for set in gold {
        validate_edits(set, source.len())?;
    }
    let pair = align(source, system)?;
    let atomics = extract_atomic_edits(&pair);
    let mut best: Option<(usize, usize, usize)> = None;
    for set in gold {
        let (matches, sys_edits) = matched_counts(&atomics, system, set, max_unchanged);
        let candidate = (matches, set.len(), sys_edits);
        let better = match &best {
            None => true,
            // More matches first, then fewer gold edits; first annotator
            // wins remaining ties.
            Some((bm, bg, _)) => matches > *bm || (matches == *bm && set.len() < *bg),
        };
        if better {
            best = Some(candidate);
        }
    }
    let (matches, gold_edits, sys_edits) = best.expect("at least one annotator");
    Ok((matches, sys_edits, gold_edits))
}

/// Scores a single sentence against one or more annotator edit sets.
pub fn m2_score(
    source: &TokenSeq,
    system: &TokenSeq,
    gold: &[Vec<EditAnnotation>],
    max_unchanged: usize,
) -> Result<M2Report, MetricsError> {
    let (matches, sys_edits, gold_edits) = sentence_counts(source, system, gold, max_unchanged)?;
    Ok(report_from_counts(matches, sys_edits, gold_edits))
}

/// One corpus sentence for [`m2_score_corpus`].
pub struct M2Item {
    pub source: TokenSeq,
    pub system: TokenSeq,
    pub gold: Vec<Vec<EditAnnotation>>,
}

/// Corpus-level score: per-sentence counts (with per-sentence annotator
/// choice) are summed before computing precision and recall.
pub fn m2_score_corpus(items: &[M2Item], max_unchanged: usize) -> Result<M2Report, MetricsError> {
    let (mut matches, mut sys_edits, mut gold_edits) = (0usize, 0usize, 0usize);
    for item in items {
        let (m, s, g) = sentence_counts(&item.source, &item.system, &item.gold, max_unchanged)?;
        matches += m;
        sys_edits += s;
        gold_edits += g;
    }
    Ok(report_from_counts(matches, sys_edits, gold_edits))
}

/// A surface-level edit as stored in gold annotation files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct M2SurfaceEdit {
    pub start: usize,
    pub end: usize,
    pub kind: String,
    pub replacement: Vec<String>,
}

/// One gold-file sentence: tokens plus per-annotator edit sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct M2GoldSentence {
    pub tokens: Vec<String>,
    pub annotations: BTreeMap<usize, Vec<M2SurfaceEdit>>,
}

fn io_err(path: &Path, source: std::io::Error) -> MetricsError {
    MetricsError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads the standard gold format: blocks of `S <tokens>` followed by
/// `A start end|||type|||replacement|||REQUIRED|||-NONE-|||annotator` lines,
/// blank-line separated. `noop` annotations register the annotator with an
/// empty edit set.
pub fn read_m2_gold(path: &Path) -> Result<Vec<M2GoldSentence>, MetricsError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_m2_gold(&text)
}

pub fn parse_m2_gold(text: &str) -> Result<Vec<M2GoldSentence>, MetricsError> {
    let mut sentences: Vec<M2GoldSentence> = Vec::new();
    let mut current: Option<M2GoldSentence> = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let bad = |reason: &str| MetricsError::BadGoldFile {
            line: lineno,
            reason: reason.to_string(),
        };
        if line.trim().is_empty() {
            if let Some(s) = current.take() {
                sentences.push(s);
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("S ").or(if line == "S" { Some("") } else { None }) {
            if let Some(s) = current.take() {
                sentences.push(s);
            }
            current = Some(M2GoldSentence {
                tokens: rest.split_whitespace().map(String::from).collect(),
                annotations: BTreeMap::new(),
            });
        } else if let Some(rest) = line.strip_prefix("A ") {
            let sentence = current.as_mut().ok_or_else(|| bad("A line before S line"))?;
            let fields: Vec<&str> = rest.split("|||").collect();
            if fields.len() < 6 {
                return Err(bad(&format!("expected 6 |||-fields, found {}", fields.len())));
            }
            let mut span = fields[0].split_whitespace();
            let start: i64 = span
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("bad start offset"))?;
            let end: i64 = span
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("bad end offset"))?;
            let annotator: usize = fields[5]
                .trim()
                .parse()
                .map_err(|_| bad("bad annotator id"))?;
            let kind = fields[1].to_string();
            let entry = sentence.annotations.entry(annotator).or_default();
            if kind == "noop" || (start == -1 && end == -1) {
                continue;
            }
            if start < 0 || end < start {
                return Err(bad("bad span"));
            }
            let replacement = match fields[2] {
                "-NONE-" | "" => Vec::new(),
                text => text.split_whitespace().map(String::from).collect(),
            };
            entry.push(M2SurfaceEdit {
                start: start as usize,
                end: end as usize,
                kind,
                replacement,
            });
        } else {
            return Err(bad("expected S or A line"));
        }
    }
    if let Some(s) = current.take() {
        sentences.push(s);
    }
    Ok(sentences)
}

/// Writes sentences back in the canonical gold format.
pub fn write_m2_gold(path: &Path, sentences: &[M2GoldSentence]) -> Result<(), MetricsError> {
    let mut out = String::new();
    for (i, sentence) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push('S');
        for tok in &sentence.tokens {
            out.push(' ');
            out.push_str(tok);
        }
        out.push('\n');
        for (annotator, edits) in &sentence.annotations {
            if edits.is_empty() {
                out.push_str(&format!(
                    "A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||{annotator}\n"
                ));
                continue;
            }
            for edit in edits {
                let replacement = if edit.replacement.is_empty() {
                    "-NONE-".to_string()
                } else {
                    edit.replacement.join(" ")
                };
                out.push_str(&format!(
                    "A {} {}|||{}|||{}|||REQUIRED|||-NONE-|||{}\n",
                    edit.start, edit.end, edit.kind, replacement, annotator
                ));
            }
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Scores system output lines against parsed gold sentences. Tokens are
/// interned into a joint vocabulary so surface equality and id equality
/// coincide.
pub fn score_m2_gold(
    gold: &[M2GoldSentence],
    system_lines: &[Vec<String>],
    max_unchanged: usize,
) -> Result<M2Report, MetricsError> {
    if gold.len() != system_lines.len() {
        return Err(MetricsError::LengthMismatch {
            refs: gold.len(),
            hyps: system_lines.len(),
        });
    }
    let mut surfaces: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for sentence in gold {
        surfaces.extend(sentence.tokens.iter().cloned());
        for edits in sentence.annotations.values() {
            for edit in edits {
                surfaces.extend(edit.replacement.iter().cloned());
            }
        }
    }
    for line in system_lines {
        surfaces.extend(line.iter().cloned());
    }
    let vocab = Vocab::from_ordinary_tokens(
        surfaces
            .into_iter()
            .filter(|s| !Vocab::RESERVED.contains(&s.as_str())),
    )
    .expect("sorted set has no duplicates");

    let items: Vec<M2Item> = gold
        .iter()
        .zip(system_lines)
        .map(|(sentence, line)| {
            let annotators: Vec<Vec<EditAnnotation>> = if sentence.annotations.is_empty() {
                vec![Vec::new()]
            } else {
                sentence
                    .annotations
                    .values()
                    .map(|edits| {
                        edits
                            .iter()
                            .map(|e| EditAnnotation {
                                start: e.start,
                                end: e.end,
                                replacement: vocab.encode(&e.replacement).into_vec(),
                            })
                            .collect()
                    })
                    .collect()
            };
            M2Item {
                source: vocab.encode(&sentence.tokens),
                system: vocab.encode(line),
                gold: annotators,
            }
        })
        .collect();
    m2_score_corpus(&items, max_unchanged)
}
