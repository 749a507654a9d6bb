//! TF-IDF statistics over a sentence corpus.
//!
//! With `n_t` occurrences of term `t` among the `n` tokens of document `d`,
//! and `N_t` of the `N` documents containing `t`:
//!
//! ```text
//! tf(t, d)     = ln(1 + n_t / n)
//! idf(t)       = -ln(N_t / N)
//! tf-idf(t, d) = tf(t, d) * idf(t)
//! ```
//!
//! The dense `N x m` score matrix is never built. [`TfIdfModel`] keeps the
//! idf vector, each term's maximum score over all documents, and the ordering
//! of terms by that maximum. Sentence vectors are recomputed on demand from
//! token counts and idf.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::corpus::{Corpus, TermId, Vocabulary};

const MAGIC: &str = "UNA-TFIDF";
const VERSION: &str = "v1";

#[derive(Debug, Error, PartialEq)]
pub enum TfIdfError {
    #[error("tf undefined for total_count = 0")]
    ZeroLengthDocument,
    #[error("tf undefined: term count {term_count} exceeds total {total_count}")]
    CountExceedsTotal { term_count: u64, total_count: u64 },
    #[error("idf undefined for docs_with_term = {docs_with_term}, total_docs = {total_docs}")]
    DocumentFrequency { docs_with_term: u64, total_docs: u64 },
    #[error("cannot fit a model on an empty corpus")]
    EmptyCorpus,
    #[error("unknown term id {0}")]
    UnknownTerm(TermId),
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
}

/// `ln(1 + n_t / n)`.
pub fn tf(term_count: u64, total_count: u64) -> Result<f64, TfIdfError> {
    if total_count == 0 {
        return Err(TfIdfError::ZeroLengthDocument);
    }
    if term_count > total_count {
        return Err(TfIdfError::CountExceedsTotal {
            term_count,
            total_count,
        });
    }
    Ok((term_count as f64 / total_count as f64).ln_1p())
}

/// `-ln(N_t / N)`, evaluated as `ln(N / N_t)` so a universal term yields `+0.0`.
pub fn idf(docs_with_term: u64, total_docs: u64) -> Result<f64, TfIdfError> {
    if docs_with_term == 0 || docs_with_term > total_docs {
        return Err(TfIdfError::DocumentFrequency {
            docs_with_term,
            total_docs,
        });
    }
    Ok((total_docs as f64 / docs_with_term as f64).ln())
}

/// Fitted corpus statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    vocabulary: Vocabulary,
    n_docs: u64,
    idf: Vec<f64>,
    max_score: Vec<f64>,
    rank: Vec<TermId>,
    // derived: position of each term in `rank`
    rank_of: Vec<u32>,
}

impl TfIdfModel {
    /// Fits idf and per-term maximum scores with one pass for document
    /// frequencies and one pass for maxima.
    pub fn fit(corpus: &Corpus) -> Result<Self, TfIdfError> {
        if corpus.is_empty() {
            return Err(TfIdfError::EmptyCorpus);
        }
        let vocab = corpus.vocabulary();
        let m = vocab.len();
        let n_docs = corpus.len() as u64;

        let encoded: Vec<Vec<TermId>> = corpus
            .documents()
            .iter()
            .map(|doc| {
                doc.tokens
                    .iter()
                    .map(|t| vocab.id(t).expect("corpus token missing from vocabulary"))
                    .collect()
            })
            .collect();

        let mut doc_freq = vec![0u64; m];
        let mut counts: HashMap<TermId, u64> = HashMap::new();
        for ids in &encoded {
            counts.clear();
            for &id in ids {
                *counts.entry(id).or_insert(0) += 1;
            }
            for &id in counts.keys() {
                doc_freq[id as usize] += 1;
            }
        }

        let idf_values = doc_freq
            .iter()
            .map(|&df| idf(df, n_docs))
            .collect::<Result<Vec<_>, _>>()?;

        let mut max_score = vec![0.0f64; m];
        for ids in &encoded {
            counts.clear();
            for &id in ids {
                *counts.entry(id).or_insert(0) += 1;
            }
            let total = ids.len() as u64;
            for (&id, &count) in &counts {
                let score = tf(count, total)? * idf_values[id as usize];
                let slot = &mut max_score[id as usize];
                if score > *slot {
                    *slot = score;
                }
            }
        }

        Self::from_parts(vocab.clone(), n_docs, idf_values, max_score)
    }

    /// Assembles a model from precomputed statistics and derives the rank order.
    pub fn from_parts(
        vocabulary: Vocabulary,
        n_docs: u64,
        idf: Vec<f64>,
        max_score: Vec<f64>,
    ) -> Result<Self, TfIdfError> {
        if n_docs == 0 {
            return Err(TfIdfError::EmptyCorpus);
        }
        let m = vocabulary.len();
        if idf.len() != m || max_score.len() != m {
            return Err(TfIdfError::Inconsistent(format!(
                "vocabulary has {m} terms but idf has {} and max_score has {}",
                idf.len(),
                max_score.len()
            )));
        }
        if let Some(bad) = idf.iter().chain(&max_score).find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(TfIdfError::Inconsistent(format!(
                "scores must be finite and non-negative, found {bad}"
            )));
        }
        let mut rank: Vec<TermId> = (0..m as TermId).collect();
        rank.sort_by(|&a, &b| {
            max_score[a as usize]
                .total_cmp(&max_score[b as usize])
                .then(a.cmp(&b))
        });
        Ok(Self::with_rank(vocabulary, n_docs, idf, max_score, rank))
    }

    fn with_rank(
        vocabulary: Vocabulary,
        n_docs: u64,
        idf: Vec<f64>,
        max_score: Vec<f64>,
        rank: Vec<TermId>,
    ) -> Self {
        let mut rank_of = vec![0u32; rank.len()];
        for (pos, &id) in rank.iter().enumerate() {
            rank_of[id as usize] = pos as u32;
        }
        TfIdfModel {
            vocabulary,
            n_docs,
            idf,
            max_score,
            rank,
            rank_of,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// Number of documents the model was fitted on.
    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    /// Vocabulary size `m`.
    pub fn n_terms(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// Per-term maximum tf-idf over the corpus.
    pub fn max_score(&self) -> &[f64] {
        &self.max_score
    }

    /// Term ids sorted ascending by `(max_score, id)`.
    pub fn rank_by_score(&self) -> &[TermId] {
        &self.rank
    }

    pub fn rank_of(&self, term: TermId) -> Result<usize, TfIdfError> {
        self.rank_of
            .get(term as usize)
            .map(|&r| r as usize)
            .ok_or(TfIdfError::UnknownTerm(term))
    }

    /// Scores a token sequence against the model. Out-of-vocabulary tokens
    /// are ignored entirely, including in the length `n`.
    pub fn sentence_scores<S: AsRef<str>>(&self, tokens: &[S]) -> SentenceScores {
        let mut counts: HashMap<TermId, u64> = HashMap::new();
        for tok in tokens {
            if let Some(id) = self.vocabulary.id(tok.as_ref()) {
                *counts.entry(id).or_insert(0) += 1;
            }
        }
        let total: u64 = counts.values().sum();
        let mut entries: Vec<(TermId, u64)> = counts.into_iter().collect();
        entries.sort_unstable_by_key(|&(id, _)| id);
        let z = entries
            .iter()
            .map(|&(id, count)| {
                tf(count, total).expect("count bounded by total") * self.idf[id as usize]
            })
            .collect();
        SentenceScores {
            term_ids: entries.iter().map(|&(id, _)| id).collect(),
            counts: entries.iter().map(|&(_, c)| c).collect(),
            z,
        }
    }

    /// Writes the text model format.
    pub fn save<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(
            sink,
            "{MAGIC} {VERSION} N={} m={}",
            self.n_docs,
            self.n_terms()
        )?;
        for (id, term) in self.vocabulary.terms().iter().enumerate() {
            writeln!(sink, "{term}\t{}\t{}", self.idf[id], self.max_score[id])?;
        }
        write!(sink, "ranks:")?;
        for id in &self.rank {
            write!(sink, " {id}")?;
        }
        writeln!(sink)?;
        sink.flush()
    }

    /// Reads a model written by [`TfIdfModel::save`].
    pub fn load<R: BufRead>(source: R) -> Result<Self, ParseError> {
        parse_model(source)
    }
}

/// Distinct in-vocabulary terms of one sentence with their tf-idf scores.
///
/// Terms are listed in ascending id order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SentenceScores {
    pub term_ids: Vec<TermId>,
    pub counts: Vec<u64>,
    pub z: Vec<f64>,
}

impl SentenceScores {
    /// Number of distinct scored terms, `n_z`.
    pub fn len(&self) -> usize {
        self.term_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.term_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Io(String),
    BadHeader,
    Version(String),
    EmptyCorpus,
    Truncated { expected_terms: usize, found: usize },
    BadTermLine,
    BadNumber(String),
    DuplicateTerm(String),
    MissingRanks,
    RankOutOfRange(u64),
    DuplicateRank(TermId),
    RankCount { expected: usize, found: usize },
    NonMonotoneRank,
    TrailingData,
    Invalid(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ParseErrorKind::*;
        match self {
            Io(e) => write!(f, "read error: {e}"),
            BadHeader => write!(f, "expected header `{MAGIC} {VERSION} N=<int> m=<int>`"),
            Version(v) => write!(f, "unsupported model version `{v}` (expected {VERSION})"),
            EmptyCorpus => write!(f, "model declares N=0"),
            Truncated {
                expected_terms,
                found,
            } => write!(f, "truncated: expected {expected_terms} term lines, found {found}"),
            BadTermLine => write!(f, "expected `term<TAB>idf<TAB>max_score`"),
            BadNumber(s) => write!(f, "invalid real `{s}`"),
            DuplicateTerm(t) => write!(f, "duplicate term `{t}`"),
            MissingRanks => write!(f, "missing `ranks:` section"),
            RankOutOfRange(id) => write!(f, "rank entry {id} is not a term id"),
            DuplicateRank(id) => write!(f, "rank section is not a permutation: id {id} repeated"),
            RankCount { expected, found } => {
                write!(f, "rank section lists {found} ids, expected {expected}")
            }
            NonMonotoneRank => write!(f, "rank section is not ordered by (max_score, id)"),
            TrailingData => write!(f, "unexpected data after rank section"),
            Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

fn perr(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn parse_header(line: &str) -> Result<(u64, usize), ParseErrorKind> {
    let mut parts = line.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(ParseErrorKind::BadHeader);
    }
    match parts.next() {
        Some(VERSION) => {}
        Some(other) => return Err(ParseErrorKind::Version(other.to_owned())),
        None => return Err(ParseErrorKind::BadHeader),
    }
    let n = parts
        .next()
        .and_then(|p| p.strip_prefix("N="))
        .and_then(|v| v.parse::<u64>().ok())
        .ok_or(ParseErrorKind::BadHeader)?;
    let m = parts
        .next()
        .and_then(|p| p.strip_prefix("m="))
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or(ParseErrorKind::BadHeader)?;
    if parts.next().is_some() {
        return Err(ParseErrorKind::BadHeader);
    }
    Ok((n, m))
}

fn parse_real(s: &str) -> Result<f64, ParseErrorKind> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(ParseErrorKind::BadNumber(s.to_owned())),
    }
}

fn parse_model<R: BufRead>(source: R) -> Result<TfIdfModel, ParseError> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|s| (i + 1, s)).map_err(|e| perr(i + 1, ParseErrorKind::Io(e.to_string()))));

    let (_, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| perr(1, ParseErrorKind::BadHeader))?;
    let (n_docs, m) = parse_header(&header).map_err(|k| perr(1, k))?;
    if n_docs == 0 {
        return Err(perr(1, ParseErrorKind::EmptyCorpus));
    }

    let mut vocab = Vocabulary::new();
    let mut idf = Vec::with_capacity(m);
    let mut max_score = Vec::with_capacity(m);
    let mut last_line = 1;
    for found in 0..m {
        let Some(item) = lines.next() else {
            return Err(perr(
                last_line + 1,
                ParseErrorKind::Truncated {
                    expected_terms: m,
                    found,
                },
            ));
        };
        let (no, line) = item?;
        last_line = no;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields[0].is_empty() {
            if line.starts_with("ranks:") {
                return Err(perr(
                    no,
                    ParseErrorKind::Truncated {
                        expected_terms: m,
                        found,
                    },
                ));
            }
            return Err(perr(no, ParseErrorKind::BadTermLine));
        }
        if vocab.id(fields[0]).is_some() {
            return Err(perr(no, ParseErrorKind::DuplicateTerm(fields[0].to_owned())));
        }
        vocab
            .intern(fields[0])
            .map_err(|e| perr(no, ParseErrorKind::Invalid(e.to_string())))?;
        idf.push(parse_real(fields[1]).map_err(|k| perr(no, k))?);
        max_score.push(parse_real(fields[2]).map_err(|k| perr(no, k))?);
    }

    let Some(item) = lines.next() else {
        return Err(perr(last_line + 1, ParseErrorKind::MissingRanks));
    };
    let (rank_line, first) = item?;
    let Some(rest) = first.strip_prefix("ranks:") else {
        return Err(perr(rank_line, ParseErrorKind::MissingRanks));
    };
    let mut rank: Vec<TermId> = Vec::with_capacity(m);
    let mut seen = vec![false; m];
    let mut push_ids = |no: usize, text: &str| -> Result<(), ParseError> {
        for tok in text.split_whitespace() {
            let raw: u64 = tok
                .parse()
                .map_err(|_| perr(no, ParseErrorKind::Invalid(format!("invalid term id `{tok}`"))))?;
            if raw >= m as u64 {
                return Err(perr(no, ParseErrorKind::RankOutOfRange(raw)));
            }
            let id = raw as TermId;
            if std::mem::replace(&mut seen[id as usize], true) {
                return Err(perr(no, ParseErrorKind::DuplicateRank(id)));
            }
            rank.push(id);
        }
        Ok(())
    };
    push_ids(rank_line, rest)?;
    let mut end_line = rank_line;
    for item in lines {
        let (no, line) = item?;
        push_ids(no, &line)?;
        end_line = no;
    }
    if rank.len() != m {
        return Err(perr(
            end_line,
            ParseErrorKind::RankCount {
                expected: m,
                found: rank.len(),
            },
        ));
    }
    let ordered = rank.windows(2).all(|w| {
        let (a, b) = (w[0] as usize, w[1] as usize);
        max_score[a].total_cmp(&max_score[b]).then(a.cmp(&b)).is_lt()
    });
    if !ordered {
        return Err(perr(rank_line, ParseErrorKind::NonMonotoneRank));
    }
    Ok(TfIdfModel::with_rank(vocab, n_docs, idf, max_score, rank))
}
