//! Tokenization, vocabulary construction, and corpus file formats.
//!
//! All downstream modules operate on integer-coded [`TokenSeq`]s over a
//! [`Vocab`] whose first four ids are reserved for the special tokens
//! `<pad>`, `<unk>`, `<mask>`, `<bos>`.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// Integer code of a vocabulary entry.
pub type TokenId = u32;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected exactly one tab, found {found}")]
    TabCount { line: usize, found: usize },
    #[error("line {line}: empty target side")]
    EmptyTarget { line: usize },
    #[error("invalid vocabulary file: {reason}")]
    InvalidVocabFile { reason: String },
    #[error("duplicate token in vocabulary: {token:?}")]
    DuplicateToken { token: String },
    #[error("token id {id} out of range for vocabulary of size {len}")]
    IdOutOfRange { id: TokenId, len: usize },
    #[error("unknown tokenize mode {0:?} (expected \"char\" or \"ws\")")]
    UnknownMode(String),
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A sequence of vocabulary ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<TokenId>);

impl TokenSeq {
    pub fn new(ids: Vec<TokenId>) -> Self {
        TokenSeq(ids)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }

    pub fn iter(&self) -> std::iter::Copied<std::slice::Iter<'_, TokenId>> {
        self.0.iter().copied()
    }

    pub fn get(&self, index: usize) -> Option<TokenId> {
        self.0.get(index).copied()
    }

    pub fn into_vec(self) -> Vec<TokenId> {
        self.0
    }
}

impl From<Vec<TokenId>> for TokenSeq {
    fn from(ids: Vec<TokenId>) -> Self {
        TokenSeq(ids)
    }
}

impl FromIterator<TokenId> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = TokenId>>(iter: I) -> Self {
        TokenSeq(iter.into_iter().collect())
    }
}

impl std::ops::Index<usize> for TokenSeq {
    type Output = TokenId;

    fn index(&self, index: usize) -> &TokenId {
        &self.0[index]
    }
}

/// How raw text is split into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizeMode {
    /// One token per Unicode scalar, whitespace dropped. For Mandarin-style data.
    PerChar,
    /// Split on runs of whitespace. For pre-tokenized data.
    Whitespace,
}

impl TokenizeMode {
    /// Joins tokens back into the canonical surface form for this mode.
    pub fn join(&self, tokens: &[String]) -> String {
        match self {
            TokenizeMode::PerChar => tokens.concat(),
            TokenizeMode::Whitespace => tokens.join(" "),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TokenizeMode::PerChar => "char",
            TokenizeMode::Whitespace => "ws",
        }
    }
}

impl FromStr for TokenizeMode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, CorpusError> {
        match s {
            "char" => Ok(TokenizeMode::PerChar),
            "ws" => Ok(TokenizeMode::Whitespace),
            other => Err(CorpusError::UnknownMode(other.to_string())),
        }
    }
}

impl fmt::Display for TokenizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Splits `text` into surface tokens. Empty input yields an empty list.
pub fn tokenize(text: &str, mode: TokenizeMode) -> Vec<String> {
    match mode {
        TokenizeMode::PerChar => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
        TokenizeMode::Whitespace => text.split_whitespace().map(String::from).collect(),
    }
}

/// Token/id bijection with four reserved special tokens at ids 0..=3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    pub const PAD: TokenId = 0;
    pub const UNK: TokenId = 1;
    pub const MASK: TokenId = 2;
    pub const BOS: TokenId = 3;
    pub const RESERVED: [&'static str; 4] = ["<pad>", "<unk>", "<mask>", "<bos>"];

    fn reserved_only() -> Self {
        let tokens: Vec<String> = Self::RESERVED.iter().map(|s| s.to_string()).collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Vocab { tokens, index }
    }

    fn push(&mut self, token: String) -> Result<(), CorpusError> {
        if self.index.contains_key(&token) {
            return Err(CorpusError::DuplicateToken { token });
        }
        self.index.insert(token.clone(), self.tokens.len() as TokenId);
        self.tokens.push(token);
        Ok(())
    }

    /// Builds a vocabulary from explicit ordinary tokens, in the given order.
    pub fn from_ordinary_tokens<I>(tokens: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = String>,
    {
        let mut vocab = Self::reserved_only();
        for t in tokens {
            vocab.push(t)?;
        }
        Ok(vocab)
    }

    /// Builds a vocabulary from all source and target tokens of `corpus` that
    /// occur at least `min_count` times, ordered by descending frequency and
    /// then lexicographically. An identity pair contributes its tokens once,
    /// not once per side. Surfaces that collide with a reserved token keep
    /// their reserved id.
    pub fn build(corpus: &ParallelCorpus, min_count: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for pair in corpus.pairs() {
            let source = if pair.is_identity() { &[][..] } else { &pair.source[..] };
            for tok in source.iter().chain(pair.target.iter()) {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(tok, count)| count >= min_count && !Self::RESERVED.contains(&tok))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut vocab = Self::reserved_only();
        for (tok, _) in ranked {
            vocab.push(tok.to_string()).expect("ranked tokens are distinct");
        }
        vocab
    }

    /// Vocabulary of `n` synthetic tokens `w0..w{n-1}`, for generated corpora.
    pub fn synthetic(n: usize) -> Self {
        Self::from_ordinary_tokens((0..n).map(|i| format!("w{i}")))
            .expect("synthetic tokens are distinct")
    }

    /// Total number of entries, reserved ids included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of non-special entries.
    pub fn ordinary_len(&self) -> usize {
        self.tokens.len() - Self::RESERVED.len()
    }

    /// Looks up a surface form; unknown surfaces map to [`Vocab::UNK`].
    pub fn id(&self, surface: &str) -> TokenId {
        self.index.get(surface).copied().unwrap_or(Self::UNK)
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.index.contains_key(surface)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> TokenSeq {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, seq: &TokenSeq) -> Result<Vec<String>, CorpusError> {
        seq.iter()
            .map(|id| {
                self.surface(id)
                    .map(String::from)
                    .ok_or(CorpusError::IdOutOfRange {
                        id,
                        len: self.len(),
                    })
            })
            .collect()
    }

    /// 64-bit FNV-1a over all surface forms; identifies a vocabulary in
    /// serialized model files.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for tok in &self.tokens {
            for &b in tok.as_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    /// Writes one surface form per line; line number equals id.
    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = String::new();
        for tok in &self.tokens {
            out.push_str(tok);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| io_err(path, e))
    }

    /// Reads a vocabulary file, validating the reserved header lines.
    pub fn read(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < Self::RESERVED.len() {
            return Err(CorpusError::InvalidVocabFile {
                reason: format!("expected at least 4 lines, found {}", lines.len()),
            });
        }
        for (i, reserved) in Self::RESERVED.iter().enumerate() {
            if lines[i] != *reserved {
                return Err(CorpusError::InvalidVocabFile {
                    reason: format!("line {i} must be {reserved:?}, found {:?}", lines[i]),
                });
            }
        }
        let mut vocab = Self::reserved_only();
        for line in &lines[Self::RESERVED.len()..] {
            vocab.push(line.to_string())?;
        }
        Ok(vocab)
    }
}

/// One source/target sentence pair as surface tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfacePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl SurfacePair {
    pub fn is_identity(&self) -> bool {
        self.source == self.target
    }
}

/// A paired corpus of surface-token sentences with a uniform tokenize mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelCorpus {
    mode: TokenizeMode,
    pairs: Vec<SurfacePair>,
}

impl ParallelCorpus {
    pub fn new(mode: TokenizeMode) -> Self {
        ParallelCorpus {
            mode,
            pairs: Vec::new(),
        }
    }

    /// Builds a corpus, rejecting pairs with an empty target.
    pub fn from_pairs(mode: TokenizeMode, pairs: Vec<SurfacePair>) -> Result<Self, CorpusError> {
        for (i, pair) in pairs.iter().enumerate() {
            if pair.target.is_empty() {
                return Err(CorpusError::EmptyTarget { line: i + 1 });
            }
        }
        Ok(ParallelCorpus { mode, pairs })
    }

    pub fn mode(&self) -> TokenizeMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[SurfacePair] {
        &self.pairs
    }

    pub fn push(&mut self, pair: SurfacePair) -> Result<(), CorpusError> {
        if pair.target.is_empty() {
            return Err(CorpusError::EmptyTarget {
                line: self.pairs.len() + 1,
            });
        }
        self.pairs.push(pair);
        Ok(())
    }
}

/// Reads a `source<TAB>target` TSV into a corpus. Lines are numbered from 1
/// in errors.
pub fn read_parallel_tsv(path: &Path, mode: TokenizeMode) -> Result<ParallelCorpus, CorpusError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut corpus = ParallelCorpus::new(mode);
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let lineno = idx + 1;
        let tabs = line.matches('\t').count();
        if tabs != 1 {
            return Err(CorpusError::TabCount {
                line: lineno,
                found: tabs,
            });
        }
        let (src, tgt) = line.split_once('\t').expect("exactly one tab");
        let source = tokenize(src, mode);
        let target = tokenize(tgt, mode);
        if target.is_empty() {
            return Err(CorpusError::EmptyTarget { line: lineno });
        }
        corpus.pairs.push(SurfacePair { source, target });
    }
    Ok(corpus)
}

/// Writes a corpus back to TSV in the canonical surface form of its mode.
pub fn write_parallel_tsv(corpus: &ParallelCorpus, path: &Path) -> Result<(), CorpusError> {
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mode = corpus.mode();
    let mut buf = String::new();
    for pair in corpus.pairs() {
        buf.clear();
        buf.push_str(&mode.join(&pair.source));
        buf.push('\t');
        buf.push_str(&mode.join(&pair.target));
        buf.push('\n');
        file.write_all(buf.as_bytes()).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_per_char_drops_whitespace() {
        assert_eq!(tokenize("ab c", TokenizeMode::PerChar), vec!["a", "b", "c"]);
    }

    #[test]
    fn tokenize_whitespace_splits_runs() {
        assert_eq!(tokenize("ab c", TokenizeMode::Whitespace), vec!["ab", "c"]);
        assert_eq!(
            tokenize("  ab \t c ", TokenizeMode::Whitespace),
            vec!["ab", "c"]
        );
    }

    #[test]
    fn tokenize_empty_is_empty() {
        assert!(tokenize("", TokenizeMode::Whitespace).is_empty());
        assert!(tokenize("", TokenizeMode::PerChar).is_empty());
    }

    fn corpus_of(lines: &[(&str, &str)]) -> ParallelCorpus {
        let pairs = lines
            .iter()
            .map(|(s, t)| SurfacePair {
                source: tokenize(s, TokenizeMode::Whitespace),
                target: tokenize(t, TokenizeMode::Whitespace),
            })
            .collect();
        ParallelCorpus::from_pairs(TokenizeMode::Whitespace, pairs).unwrap()
    }

    #[test]
    fn build_vocab_orders_ties_lexicographically() {
        let vocab = Vocab::build(&corpus_of(&[("a b", "a b")]), 1);
        let surfaces: Vec<&str> = (0..vocab.len() as TokenId)
            .map(|i| vocab.surface(i).unwrap())
            .collect();
        assert_eq!(surfaces, vec!["<pad>", "<unk>", "<mask>", "<bos>", "a", "b"]);
    }

    #[test]
    fn build_vocab_min_count_maps_rare_to_unk() {
        let vocab = Vocab::build(&corpus_of(&[("a a b", "a a b")]), 2);
        assert_eq!(vocab.id("a"), 4);
        assert_eq!(vocab.id("b"), Vocab::UNK);
    }

    #[test]
    fn build_vocab_empty_corpus_is_reserved_only() {
        let vocab = Vocab::build(&ParallelCorpus::new(TokenizeMode::Whitespace), 1);
        assert_eq!(vocab.len(), 4);
    }

    #[test]
    fn build_vocab_is_deterministic() {
        let corpus = corpus_of(&[("c a b", "c a b"), ("b c", "c b")]);
        let v1 = Vocab::build(&corpus, 1);
        let v2 = Vocab::build(&corpus, 1);
        assert_eq!(v1, v2);
    }

    #[test]
    fn reserved_ids_are_stable() {
        let vocab = Vocab::build(&corpus_of(&[("x", "x")]), 1);
        assert_eq!(vocab.id("<mask>"), 2);
        assert_eq!(Vocab::MASK, 2);
        assert_eq!(vocab.surface(Vocab::MASK), Some("<mask>"));
    }

    #[test]
    fn reserved_surface_in_corpus_keeps_reserved_id() {
        let vocab = Vocab::build(&corpus_of(&[("<mask> a", "<mask> a")]), 1);
        assert_eq!(vocab.id("<mask>"), Vocab::MASK);
        // Not duplicated past the reserved block.
        assert_eq!(vocab.len(), 5);
    }

    #[test]
    fn encode_decode_round_trip_in_vocab() {
        let corpus = corpus_of(&[("a b c", "a b d")]);
        let vocab = Vocab::build(&corpus, 1);
        let tokens = vec!["a".to_string(), "d".to_string(), "c".to_string()];
        let seq = vocab.encode(&tokens);
        assert_eq!(vocab.decode(&seq).unwrap(), tokens);
    }

    #[test]
    fn unknown_decodes_to_unk_literal() {
        let vocab = Vocab::build(&corpus_of(&[("a", "a")]), 1);
        let seq = vocab.encode(&["zz".to_string()]);
        assert_eq!(seq.ids(), &[Vocab::UNK]);
        assert_eq!(vocab.decode(&seq).unwrap(), vec!["<unk>".to_string()]);
    }

    #[test]
    fn tsv_identity_pair_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.tsv");
        fs::write(&path, "今 天\t今 天\n").unwrap();
        let corpus = read_parallel_tsv(&path, TokenizeMode::Whitespace).unwrap();
        assert_eq!(corpus.len(), 1);
        assert!(corpus.pairs()[0].is_identity());

        let out = dir.path().join("out.tsv");
        write_parallel_tsv(&corpus, &out).unwrap();
        assert_eq!(fs::read_to_string(&out).unwrap(), "今 天\t今 天\n");
    }

    #[test]
    fn tsv_preserves_line_order_and_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.tsv");
        fs::write(&path, "a\tb\nc\td\ne\tf\n").unwrap();
        let corpus = read_parallel_tsv(&path, TokenizeMode::Whitespace).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.pairs()[1].source, vec!["c"]);
        assert_eq!(corpus.pairs()[2].target, vec!["f"]);
    }

    #[test]
    fn tsv_missing_tab_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        fs::write(&path, "a\tb\nno tab here\nc\td\n").unwrap();
        let err = read_parallel_tsv(&path, TokenizeMode::Whitespace).unwrap_err();
        match err {
            CorpusError::TabCount { line, found } => {
                assert_eq!(line, 2);
                assert_eq!(found, 0);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn tsv_empty_target_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        fs::write(&path, "a\tb\nc\t \n").unwrap();
        let err = read_parallel_tsv(&path, TokenizeMode::Whitespace).unwrap_err();
        match err {
            CorpusError::EmptyTarget { line } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn per_char_tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.tsv");
        fs::write(&path, "今天\t今日\n").unwrap();
        let corpus = read_parallel_tsv(&path, TokenizeMode::PerChar).unwrap();
        assert_eq!(corpus.pairs()[0].source, vec!["今", "天"]);
        let out = dir.path().join("out.tsv");
        write_parallel_tsv(&corpus, &out).unwrap();
        assert_eq!(fs::read_to_string(&out).unwrap(), "今天\t今日\n");
    }

    #[test]
    fn vocab_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let vocab = Vocab::build(&corpus_of(&[("b a a", "b a a")]), 1);
        vocab.write(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<pad>\n<unk>\n<mask>\n<bos>\n"));
        let back = Vocab::read(&path).unwrap();
        assert_eq!(back, vocab);
    }

    #[test]
    fn vocab_file_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        fs::write(&path, "<pad>\n<unk>\n<bos>\n<mask>\na\n").unwrap();
        assert!(matches!(
            Vocab::read(&path),
            Err(CorpusError::InvalidVocabFile { .. })
        ));
    }

    #[test]
    fn synthetic_vocab_layout() {
        let vocab = Vocab::synthetic(8);
        assert_eq!(vocab.len(), 12);
        assert_eq!(vocab.ordinary_len(), 8);
        assert_eq!(vocab.surface(4), Some("w0"));
        assert_eq!(vocab.id("w7"), 11);
    }

    #[test]
    fn mode_parses_and_displays() {
        assert_eq!("char".parse::<TokenizeMode>().unwrap(), TokenizeMode::PerChar);
        assert_eq!("ws".parse::<TokenizeMode>().unwrap(), TokenizeMode::Whitespace);
        assert!("other".parse::<TokenizeMode>().is_err());
        assert_eq!(TokenizeMode::PerChar.to_string(), "char");
    }
}
