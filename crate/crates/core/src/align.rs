//! Minimal-edit alignment between token sequences and the per-source-token
//! Correct/Error labels derived from it.
//!
//! A source token is *correct* when it participates in a Match op of the
//! chosen minimal edit script; everything else is an error token. Among the
//! (generally many) minimal scripts, [`align`] picks a single canonical one:
//! first the scripts with the most Match ops (those feed the most labels to
//! the masking stage), and among those the script found by tracing from the
//! start of both sequences, at every step preferring
//! Match > Substitute > Delete > Insert. Matches therefore sit as early as
//! possible: `align("A A", "A")` yields `[Match(0,0), Delete(1)]`.

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{TokenSeq, Vocab};

/// Sequences longer than this are rejected by [`align`].
pub const MAX_ALIGN_LEN: usize = 10_000;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("sequence of length {len} exceeds alignment limit {max}")]
    TooLong { len: usize, max: usize },
    #[error("invalid labeled record: {reason}")]
    BadRecord { reason: String },
}

/// One step of an edit script. Positions index into the source (`src`) and
/// target (`tgt`) sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match { src: usize, tgt: usize },
    Substitute { src: usize, tgt: usize },
    Delete { src: usize },
    Insert { tgt: usize },
}

impl EditOp {
    pub fn code(&self) -> char {
        match self {
            EditOp::Match { .. } => 'M',
            EditOp::Substitute { .. } => 'S',
            EditOp::Delete { .. } => 'D',
            EditOp::Insert { .. } => 'I',
        }
    }

    pub fn src_pos(&self) -> Option<usize> {
        match self {
            EditOp::Match { src, .. } | EditOp::Substitute { src, .. } | EditOp::Delete { src } => {
                Some(*src)
            }
            EditOp::Insert { .. } => None,
        }
    }

    pub fn tgt_pos(&self) -> Option<usize> {
        match self {
            EditOp::Match { tgt, .. } | EditOp::Substitute { tgt, .. } | EditOp::Insert { tgt } => {
                Some(*tgt)
            }
            EditOp::Delete { .. } => None,
        }
    }

    pub fn is_match(&self) -> bool {
        matches!(self, EditOp::Match { .. })
    }
}

// Wire form: ["M", src, tgt] with -1 for an absent position.
impl Serialize for EditOp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(3))?;
        seq.serialize_element(&self.code().to_string())?;
        seq.serialize_element(&self.src_pos().map_or(-1, |p| p as i64))?;
        seq.serialize_element(&self.tgt_pos().map_or(-1, |p| p as i64))?;
        seq.end()
    }
}

impl<'de> Deserialize<'de> for EditOp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct OpVisitor;

        impl<'de> Visitor<'de> for OpVisitor {
            type Value = EditOp;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an edit op triple [code, src, tgt]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<EditOp, A::Error> {
                let code: String = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let src: i64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let tgt: i64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(2, &self))?;
                let usize_of = |v: i64, what: &str| -> Result<usize, A::Error> {
                    usize::try_from(v).map_err(|_| {
                        de::Error::custom(format!("op {code:?}: {what} position {v} invalid"))
                    })
                };
                match code.as_str() {
                    "M" => Ok(EditOp::Match {
                        src: usize_of(src, "src")?,
                        tgt: usize_of(tgt, "tgt")?,
                    }),
                    "S" => Ok(EditOp::Substitute {
                        src: usize_of(src, "src")?,
                        tgt: usize_of(tgt, "tgt")?,
                    }),
                    "D" => Ok(EditOp::Delete {
                        src: usize_of(src, "src")?,
                    }),
                    "I" => Ok(EditOp::Insert {
                        tgt: usize_of(tgt, "tgt")?,
                    }),
                    other => Err(de::Error::custom(format!("unknown op code {other:?}"))),
                }
            }
        }

        deserializer.deserialize_seq(OpVisitor)
    }
}

/// Per-source-token correctness flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Correct,
    Error,
}

impl Label {
    pub fn code(&self) -> char {
        match self {
            Label::Correct => 'C',
            Label::Error => 'E',
        }
    }
}

/// A source/target pair with its minimal edit script and source-token labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair {
    pub source: TokenSeq,
    pub target: TokenSeq,
    pub script: Vec<EditOp>,
    pub labels: Vec<Label>,
}

impl AlignedPair {
    /// Source indices labeled Correct, ascending.
    pub fn correct_token_positions(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Label::Correct)
            .map(|(i, _)| i)
            .collect()
    }

    /// Target indices participating in Match ops, ascending.
    pub fn target_match_positions(&self) -> Vec<usize> {
        self.script
            .iter()
            .filter_map(|op| match op {
                EditOp::Match { tgt, .. } => Some(*tgt),
                _ => None,
            })
            .collect()
    }

    /// Labels as a C/E string, e.g. `"CCEC"`.
    pub fn labels_string(&self) -> String {
        self.labels.iter().map(Label::code).collect()
    }

    /// Script cost: number of non-Match ops.
    pub fn cost(&self) -> usize {
        self.script.iter().filter(|op| !op.is_match()).count()
    }
}

/// Unit-cost Levenshtein distance. Rolling-row DP, `O(min(|a|,|b|))` memory.
pub fn edit_distance(a: &TokenSeq, b: &TokenSeq) -> usize {
    let (short, long) = if a.len() <= b.len() {
        (a.ids(), b.ids())
    } else {
        (b.ids(), a.ids())
    };
    if short.is_empty() {
        return long.len();
    }
    let m = short.len();
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut curr = vec![0usize; m + 1];
    for (i, &lt) in long.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &st) in short.iter().enumerate() {
            let cost = usize::from(lt != st);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

/// Aligns `a` (source) to `b` (target), returning the canonical minimal
/// script and the Correct/Error labels it induces.
pub fn align(a: &TokenSeq, b: &TokenSeq) -> Result<AlignedPair, AlignError> {
    for len in [a.len(), b.len()] {
        if len > MAX_ALIGN_LEN {
            return Err(AlignError::TooLong {
                len,
                max: MAX_ALIGN_LEN,
            });
        }
    }
    let n = a.len();
    let m = b.len();
    let sa = a.ids();
    let sb = b.ids();

    // Suffix DPs. dist[i][j] is the distance between a[i..] and b[j..];
    // matches[i][j] is the most Match ops on any minimal-cost script for
    // that suffix pair. Values fit u16 because lengths are capped at 10_000.
    let width = m + 1;
    let mut dist = vec![0u16; (n + 1) * width];
    let mut matches = vec![0u16; (n + 1) * width];
    for j in 0..=m {
        dist[n * width + j] = (m - j) as u16;
    }
    for i in (0..n).rev() {
        dist[i * width + m] = (n - i) as u16;
        for j in (0..m).rev() {
            let diag = dist[(i + 1) * width + j + 1] + u16::from(sa[i] != sb[j]);
            let del = dist[(i + 1) * width + j] + 1;
            let ins = dist[i * width + j + 1] + 1;
            let best = diag.min(del).min(ins);
            dist[i * width + j] = best;

            let mut most = 0u16;
            if diag == best {
                most = matches[(i + 1) * width + j + 1] + u16::from(sa[i] == sb[j]);
            }
            if del == best {
                most = most.max(matches[(i + 1) * width + j]);
            }
            if ins == best {
                most = most.max(matches[i * width + j + 1]);
            }
            matches[i * width + j] = most;
        }
    }

    // Greedy forward trace over moves that stay on a minimal-cost,
    // maximal-match path.
    let mut script = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0usize, 0usize);
    while i < n || j < m {
        let here = dist[i * width + j];
        let need = matches[i * width + j];
        if i < n
            && j < m
            && sa[i] == sb[j]
            && dist[(i + 1) * width + j + 1] == here
            && matches[(i + 1) * width + j + 1] + 1 == need
        {
            script.push(EditOp::Match { src: i, tgt: j });
            i += 1;
            j += 1;
        } else if i < n
            && j < m
            && sa[i] != sb[j]
            && dist[(i + 1) * width + j + 1] + 1 == here
            && matches[(i + 1) * width + j + 1] == need
        {
            script.push(EditOp::Substitute { src: i, tgt: j });
            i += 1;
            j += 1;
        } else if i < n
            && dist[(i + 1) * width + j] + 1 == here
            && matches[(i + 1) * width + j] == need
        {
            script.push(EditOp::Delete { src: i });
            i += 1;
        } else {
            script.push(EditOp::Insert { tgt: j });
            j += 1;
        }
    }

    let mut labels = vec![Label::Error; n];
    for op in &script {
        if let EditOp::Match { src, .. } = op {
            labels[*src] = Label::Correct;
        }
    }

    Ok(AlignedPair {
        source: a.clone(),
        target: b.clone(),
        script,
        labels,
    })
}

/// One line of a labeled (and optionally masked) JSON-lines corpus.
///
/// `labels` is a C/E string per source token; `script` serializes ops as
/// `["M",src,tgt]` triples with `-1` for absent positions. The `masked_src`
/// and `loss_mask` fields are filled by the perturbation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
    pub labels: String,
    pub script: Vec<EditOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_src: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_mask: Option<String>,
}

impl LabeledRecord {
    pub fn from_aligned(pair: &AlignedPair, vocab: &Vocab) -> Result<Self, AlignError> {
        let decode = |seq: &TokenSeq| {
            vocab.decode(seq).map_err(|e| AlignError::BadRecord {
                reason: e.to_string(),
            })
        };
        Ok(LabeledRecord {
            src: decode(&pair.source)?,
            tgt: decode(&pair.target)?,
            labels: pair.labels_string(),
            script: pair.script.clone(),
            masked_src: None,
            loss_mask: None,
        })
    }

    /// Reconstructs the aligned pair by encoding surfaces through `vocab`.
    pub fn to_aligned(&self, vocab: &Vocab) -> Result<AlignedPair, AlignError> {
        if self.labels.chars().count() != self.src.len() {
            return Err(AlignError::BadRecord {
                reason: format!(
                    "labels length {} != source length {}",
                    self.labels.chars().count(),
                    self.src.len()
                ),
            });
        }
        let labels = self
            .labels
            .chars()
            .map(|c| match c {
                'C' => Ok(Label::Correct),
                'E' => Ok(Label::Error),
                other => Err(AlignError::BadRecord {
                    reason: format!("invalid label char {other:?}"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AlignedPair {
            source: vocab.encode(&self.src),
            target: vocab.encode(&self.tgt),
            script: self.script.clone(),
            labels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(ids: &[u32]) -> TokenSeq {
        TokenSeq::new(ids.to_vec())
    }

    #[test]
    fn distance_identity_is_zero() {
        let a = seq(&[4, 5, 6]);
        assert_eq!(edit_distance(&a, &a), 0);
    }

    #[test]
    fn distance_single_substitution() {
        assert_eq!(edit_distance(&seq(&[4, 5, 9, 7]), &seq(&[4, 5, 6, 7])), 1);
    }

    #[test]
    fn distance_is_symmetric() {
        let a = seq(&[4, 5, 6, 7, 8]);
        let b = seq(&[5, 6, 9]);
        assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
    }

    #[test]
    fn align_single_substitution_labels() {
        let pair = align(&seq(&[4, 5, 9, 7]), &seq(&[4, 5, 6, 7])).unwrap();
        assert_eq!(
            pair.labels,
            vec![Label::Correct, Label::Correct, Label::Error, Label::Correct]
        );
        assert_eq!(pair.labels_string(), "CCEC");
        assert_eq!(pair.cost(), 1);
    }

    #[test]
    fn align_prefers_leftmost_match() {
        // "A A" vs "A": both [M(0,0), D(1)] and [D(0), M(1,0)] are minimal.
        let pair = align(&seq(&[4, 4]), &seq(&[4])).unwrap();
        assert_eq!(
            pair.script,
            vec![EditOp::Match { src: 0, tgt: 0 }, EditOp::Delete { src: 1 }]
        );
        assert_eq!(pair.labels, vec![Label::Correct, Label::Error]);
    }

    #[test]
    fn align_empty_source_is_all_inserts() {
        let pair = align(&seq(&[]), &seq(&[4, 5])).unwrap();
        assert_eq!(
            pair.script,
            vec![EditOp::Insert { tgt: 0 }, EditOp::Insert { tgt: 1 }]
        );
        assert!(pair.labels.is_empty());
    }

    #[test]
    fn correct_positions_ascending() {
        let pair = align(&seq(&[4, 5, 9, 7]), &seq(&[4, 5, 6, 7])).unwrap();
        assert_eq!(pair.correct_token_positions(), vec![0, 1, 3]);
    }

    #[test]
    fn correct_positions_all_error() {
        let pair = align(&seq(&[4, 5]), &seq(&[6, 7])).unwrap();
        assert!(pair.correct_token_positions().is_empty());
    }

    #[test]
    fn correct_positions_identity() {
        let pair = align(&seq(&[4, 5, 6]), &seq(&[4, 5, 6])).unwrap();
        assert_eq!(pair.correct_token_positions(), vec![0, 1, 2]);
        assert_eq!(pair.target_match_positions(), vec![0, 1, 2]);
    }

    #[test]
    fn match_count_equals_correct_count() {
        let pair = align(&seq(&[4, 5, 6, 7, 8]), &seq(&[4, 9, 6, 8])).unwrap();
        let matches = pair.script.iter().filter(|op| op.is_match()).count();
        assert_eq!(matches, pair.correct_token_positions().len());
    }

    #[test]
    fn equal_length_substitution_only_labels_are_positional() {
        let a = seq(&[4, 5, 6, 7]);
        let b = seq(&[4, 9, 6, 8]);
        let pair = align(&a, &b).unwrap();
        if pair.script.iter().all(|op| op.src_pos().is_some() && op.tgt_pos().is_some()) {
            for i in 0..a.len() {
                let expect = if a[i] == b[i] { Label::Correct } else { Label::Error };
                assert_eq!(pair.labels[i], expect);
            }
        } else {
            panic!("expected substitution-only script");
        }
    }

    #[test]
    fn rejects_overlong_sequences() {
        let a = TokenSeq::new(vec![4; MAX_ALIGN_LEN + 1]);
        assert!(matches!(
            align(&a, &seq(&[4])),
            Err(AlignError::TooLong { .. })
        ));
    }

    #[test]
    fn script_json_matches_wire_format() {
        let pair = align(&seq(&[4, 5, 9, 7]), &seq(&[4, 5, 6, 7])).unwrap();
        let json = serde_json::to_string(&pair.script).unwrap();
        assert_eq!(json, r#"[["M",0,0],["M",1,1],["S",2,2],["M",3,3]]"#);
        let back: Vec<EditOp> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pair.script);
    }

    #[test]
    fn delete_and_insert_wire_positions() {
        let del = serde_json::to_string(&EditOp::Delete { src: 2 }).unwrap();
        assert_eq!(del, r#"["D",2,-1]"#);
        let ins = serde_json::to_string(&EditOp::Insert { tgt: 0 }).unwrap();
        assert_eq!(ins, r#"["I",-1,0]"#);
    }

    #[test]
    fn labeled_record_round_trip() {
        use crate::corpus::{ParallelCorpus, SurfacePair, TokenizeMode, Vocab};
        let corpus = ParallelCorpus::from_pairs(
            TokenizeMode::Whitespace,
            vec![SurfacePair {
                source: vec!["A".into(), "B".into(), "F".into(), "D".into()],
                target: vec!["A".into(), "B".into(), "C".into(), "D".into()],
            }],
        )
        .unwrap();
        let vocab = Vocab::build(&corpus, 1);
        let src = vocab.encode(&corpus.pairs()[0].source);
        let tgt = vocab.encode(&corpus.pairs()[0].target);
        let pair = align(&src, &tgt).unwrap();
        let record = LabeledRecord::from_aligned(&pair, &vocab).unwrap();
        let line = serde_json::to_string(&record).unwrap();
        assert_eq!(
            line,
            r#"{"src":["A","B","F","D"],"tgt":["A","B","C","D"],"labels":"CCEC","script":[["M",0,0],["M",1,1],["S",2,2],["M",3,3]]}"#
        );
        let parsed: LabeledRecord = serde_json::from_str(&line).unwrap();
        let back = parsed.to_aligned(&vocab).unwrap();
        assert_eq!(back, pair);
    }

    #[test]
    fn align_is_deterministic() {
        let a = seq(&[4, 5, 4, 6, 5]);
        let b = seq(&[5, 4, 6, 6]);
        let p1 = align(&a, &b).unwrap();
        let p2 = align(&a, &b).unwrap();
        assert_eq!(
            serde_json::to_string(&p1.script).unwrap(),
            serde_json::to_string(&p2.script).unwrap()
        );
    }
}
