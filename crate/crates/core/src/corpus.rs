//! Sentence corpora: tokenization, loading and the term vocabulary.
//!
//! Every non-empty line of a corpus file is one document. Tokens are produced
//! by [`tokenize`]: split on Unicode whitespace, strip leading and trailing
//! punctuation from each piece, lowercase. Interior punctuation survives, so
//! `"x-45c."` becomes `"x-45c"`.

use std::collections::HashMap;
use std::io::BufRead;

use thiserror::Error;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

/// Dense identifier of a vocabulary term.
pub type TermId = u32;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid UTF-8 on line {line} at byte offset {byte_offset}")]
    Decode { line: usize, byte_offset: u64 },
    #[error("vocabulary overflow: more than {} distinct terms", TermId::MAX)]
    VocabularyOverflow,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn is_punctuation(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

// Simple (1:1) lowercase mapping. U+0130 is the only character whose full
// lowercase mapping expands to more than one code point.
fn simple_lowercase(c: char) -> char {
    if c == '\u{130}' {
        return 'i';
    }
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

/// Splits `text` into lowercase terms, preserving order and duplicates.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|piece| piece.trim_matches(is_punctuation))
        .filter(|piece| !piece.is_empty())
        .map(|piece| piece.chars().map(simple_lowercase).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: usize,
    /// 1-based line number in the source stream.
    pub line: usize,
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: usize, line: usize, raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        Document {
            id,
            line,
            raw,
            tokens,
        }
    }
}

/// Bijection between term strings and dense ids in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    ids: HashMap<String, TermId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `term`, inserting it if unseen.
    pub fn intern(&mut self, term: &str) -> Result<TermId, CorpusError> {
        if let Some(&id) = self.ids.get(term) {
            return Ok(id);
        }
        let id = TermId::try_from(self.terms.len()).map_err(|_| CorpusError::VocabularyOverflow)?;
        self.terms.push(term.to_owned());
        self.ids.insert(term.to_owned(), id);
        Ok(id)
    }

    pub fn id(&self, term: &str) -> Option<TermId> {
        self.ids.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in id order.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

impl FromIterator<String> for Vocabulary {
    /// Builds a vocabulary from terms in id order; duplicates keep their first id.
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut vocab = Vocabulary::new();
        for term in iter {
            vocab.intern(&term).expect("vocabulary overflow");
        }
        vocab
    }
}

/// Collects the distinct terms of `documents` in first-occurrence order.
pub fn build_vocabulary(documents: &[Document]) -> Result<Vocabulary, CorpusError> {
    let mut vocab = Vocabulary::new();
    for token in documents.iter().flat_map(|d| &d.tokens) {
        vocab.intern(token)?;
    }
    Ok(vocab)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: Vocabulary,
    skipped_blank: usize,
}

impl Corpus {
    pub fn from_documents(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let vocabulary = build_vocabulary(&documents)?;
        Ok(Corpus {
            documents,
            vocabulary,
            skipped_blank: 0,
        })
    }

    /// Builds a corpus from in-memory lines, applying the same blank-line rule
    /// as [`load_corpus`].
    pub fn from_lines<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut documents = Vec::new();
        let mut skipped = 0;
        for (idx, line) in lines.into_iter().enumerate() {
            let doc = Document::new(documents.len(), idx + 1, line.as_ref());
            if doc.tokens.is_empty() {
                skipped += 1;
            } else {
                documents.push(doc);
            }
        }
        let mut corpus = Corpus::from_documents(documents).expect("vocabulary overflow");
        corpus.skipped_blank = skipped;
        corpus
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// Number of documents, `N`.
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Lines skipped because they contained no terms.
    pub fn skipped_blank(&self) -> usize {
        self.skipped_blank
    }
}

/// Iterates the lines of a UTF-8 stream as `(line_number, text)`, 1-based,
/// with the line terminator (`\n` or `\r\n`) removed.
pub fn decoded_lines<R: BufRead>(source: R) -> DecodedLines<R> {
    DecodedLines {
        source,
        buf: Vec::new(),
        offset: 0,
        line: 0,
        failed: false,
    }
}

pub struct DecodedLines<R> {
    source: R,
    buf: Vec<u8>,
    offset: u64,
    line: usize,
    failed: bool,
}

impl<R: BufRead> Iterator for DecodedLines<R> {
    type Item = Result<(usize, String), CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        self.buf.clear();
        let read = match self.source.read_until(b'\n', &mut self.buf) {
            Ok(0) => return None,
            Ok(n) => n,
            Err(e) => {
                self.failed = true;
                return Some(Err(e.into()));
            }
        };
        self.line += 1;
        let text = match std::str::from_utf8(&self.buf) {
            Ok(t) => t,
            Err(e) => {
                self.failed = true;
                return Some(Err(CorpusError::Decode {
                    line: self.line,
                    byte_offset: self.offset + e.valid_up_to() as u64,
                }));
            }
        };
        self.offset += read as u64;
        let text = text.strip_suffix('\n').unwrap_or(text);
        let text = text.strip_suffix('\r').unwrap_or(text);
        Some(Ok((self.line, text.to_owned())))
    }
}

/// Reads one document per line. Lines without any term are skipped and
/// counted in [`Corpus::skipped_blank`].
pub fn load_corpus<R: BufRead>(source: R) -> Result<Corpus, CorpusError> {
    let mut documents = Vec::new();
    let mut skipped = 0;
    for item in decoded_lines(source) {
        let (line_no, text) = item?;
        let doc = Document::new(documents.len(), line_no, text);
        if doc.tokens.is_empty() {
            skipped += 1;
        } else {
            documents.push(doc);
        }
    }
    let mut corpus = Corpus::from_documents(documents)?;
    corpus.skipped_blank = skipped;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("Another factor was caffeine."),
            toks(&["another", "factor", "was", "caffeine"])
        );
        assert_eq!(
            tokenize("We should play with legos at camp."),
            toks(&["we", "should", "play", "with", "legos", "at", "camp"])
        );
    }

    #[test]
    fn tokenize_keeps_interior_punctuation() {
        assert_eq!(tokenize("another instrumental was X-45C."), toks(&["another", "instrumental", "was", "x-45c"]));
        assert_eq!(tokenize("\"(don't)\""), toks(&["don't"]));
    }

    #[test]
    fn tokenize_drops_pure_punctuation_and_keeps_duplicates() {
        assert_eq!(tokenize("a -- a ... ¿B?"), toks(&["a", "a", "b"]));
    }

    #[test]
    fn tokenize_unicode() {
        assert_eq!(tokenize("«ΣΟΦΙΑ»\u{3000}İstanbul"), toks(&["σοφια", "istanbul"]));
    }

    #[test]
    fn vocabulary_first_seen_order() {
        let docs = vec![Document::new(0, 1, "b a b")];
        let vocab = build_vocabulary(&docs).unwrap();
        assert_eq!(vocab.terms(), &toks(&["b", "a"])[..]);

        let docs = vec![Document::new(0, 1, "a"), Document::new(1, 2, "b a")];
        let vocab = build_vocabulary(&docs).unwrap();
        assert_eq!(vocab.id("a"), Some(0));
        assert_eq!(vocab.id("b"), Some(1));
        assert!(build_vocabulary(&[]).unwrap().is_empty());
    }

    #[test]
    fn load_empty_stream() {
        let corpus = load_corpus(&b""[..]).unwrap();
        assert_eq!(corpus.len(), 0);
        assert!(corpus.vocabulary().is_empty());
    }

    #[test]
    fn load_two_lines() {
        let corpus = load_corpus(&b"a b\nb c"[..]).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.vocabulary().len(), 3);
    }

    #[test]
    fn load_skips_blank_lines() {
        let corpus = load_corpus(&b"x\n\nx\n"[..]).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.vocabulary().len(), 1);
        assert_eq!(corpus.skipped_blank(), 1);
        assert_eq!(corpus.documents()[1].line, 3);
        assert_eq!(corpus.documents()[1].id, 1);
    }

    #[test]
    fn load_crlf() {
        let corpus = load_corpus(&b"a b\r\nc\r\n"[..]).unwrap();
        assert_eq!(corpus.documents()[0].raw, "a b");
        assert_eq!(corpus.documents()[1].tokens, toks(&["c"]));
    }

    #[test]
    fn load_reports_decode_position() {
        let err = load_corpus(&b"ok line\nbad \xff here\n"[..]).unwrap_err();
        match err {
            CorpusError::Decode { line, byte_offset } => {
                assert_eq!(line, 2);
                assert_eq!(byte_offset, 12);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(text in "\\PC{0,60}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn tokens_are_lowercase_and_non_empty(text in "[a-zA-Z0-9 .,;!?'\"()-]{0,80}") {
            for tok in tokenize(&text) {
                prop_assert!(!tok.is_empty());
                prop_assert!(!tok.chars().any(char::is_uppercase));
            }
        }

        #[test]
        fn reload_round_trip(lines in proptest::collection::vec("[a-zA-Z ,.]{0,30}", 0..20)) {
            let first = load_corpus(lines.join("\n").as_bytes()).unwrap();
            let serialized: Vec<&str> = first.documents().iter().map(|d| d.raw.as_str()).collect();
            let second = load_corpus(serialized.join("\n").as_bytes()).unwrap();
            prop_assert_eq!(first.vocabulary(), second.vocabulary());
            let a: Vec<_> = first.documents().iter().map(|d| (&d.raw, &d.tokens)).collect();
            let b: Vec<_> = second.documents().iter().map(|d| (&d.raw, &d.tokens)).collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn vocabulary_is_dense_bijection(lines in proptest::collection::vec("[a-e ]{0,12}", 0..10)) {
            let corpus = Corpus::from_lines(&lines);
            let vocab = corpus.vocabulary();
            for (id, term) in vocab.terms().iter().enumerate() {
                prop_assert_eq!(vocab.id(term), Some(id as TermId));
            }
            for doc in corpus.documents() {
                for tok in &doc.tokens {
                    prop_assert!(vocab.id(tok).is_some());
                }
            }
        }
    }
}
