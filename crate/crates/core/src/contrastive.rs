//! InfoNCE over embedding batches, plus a deterministic toy encoder and the
//! positive-pair file reader.
//!
//! For anchor `h_i` with positive `h_j` the loss is
//!
//! ```text
//! -log( exp(sim(h_i, h_j) / tau) / sum_{k != i, j} exp(sim(h_i, h_k) / tau) )
//! ```
//!
//! The positive is left out of the denominator unless
//! [`ContrastiveConfig::include_positive_in_denominator`] is set. Since the
//! denominator can then be smaller than the numerator, the loss may be
//! negative.

use std::io::BufRead;

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::corpus::{decoded_lines, tokenize, CorpusError, Vocabulary};
use crate::rng::StreamRng;

pub const DEFAULT_TAU: f64 = 0.05;
pub const DEFAULT_BATCH_SIZE: usize = 64;

#[derive(Debug, Error)]
pub enum ContrastiveError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("no negatives: the denominator is empty")]
    NoNegatives,
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("anchors ({anchors}) and positives ({positives}) differ in length")]
    Misaligned { anchors: usize, positives: usize },
    #[error("pairs line {line}: expected 2 tab-separated columns, found {found}")]
    Columns { line: usize, found: usize },
    #[error("pairs line {line}: {side} sentence has no terms")]
    EmptySide { line: usize, side: &'static str },
    #[error(transparent)]
    Read(#[from] CorpusError),
}

/// Dense sentence embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, ContrastiveError> {
        if values.is_empty() {
            return Err(ContrastiveError::Dimension(0, 1));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ContrastiveError::NonFinite);
        }
        Ok(Embedding(values))
    }

    /// Unit vector along axis `axis`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        let dim = dim.max(1);
        let mut v = vec![0.0; dim];
        v[axis.min(dim - 1)] = 1.0;
        Embedding(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn cosine_similarity(u: &Embedding, v: &Embedding) -> Result<f64, ContrastiveError> {
    if u.dim() != v.dim() {
        return Err(ContrastiveError::Dimension(u.dim(), v.dim()));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(ContrastiveError::ZeroNorm);
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveConfig {
    pub tau: f64,
    pub batch_size: usize,
    /// Use the common variant that also sums the positive in the denominator.
    pub include_positive_in_denominator: bool,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            tau: DEFAULT_TAU,
            batch_size: DEFAULT_BATCH_SIZE,
            include_positive_in_denominator: false,
        }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// InfoNCE from precomputed similarities.
pub fn info_nce_from_similarities(
    positive: f64,
    negatives: &[f64],
    tau: f64,
    include_positive: bool,
) -> Result<f64, ContrastiveError> {
    if !(tau > 0.0) {
        return Err(ContrastiveError::Temperature(tau));
    }
    if negatives.is_empty() {
        return Err(ContrastiveError::NoNegatives);
    }
    if !positive.is_finite() || negatives.iter().any(|s| !s.is_finite()) {
        return Err(ContrastiveError::NonFinite);
    }
    let pos = positive / tau;
    let scaled = negatives.iter().map(|s| s / tau);
    let denom = if include_positive {
        log_sum_exp(scaled.chain(std::iter::once(pos)))
    } else {
        log_sum_exp(scaled)
    };
    Ok(denom - pos)
}

pub fn info_nce(
    anchor: &Embedding,
    positive: &Embedding,
    negatives: &[Embedding],
    tau: f64,
) -> Result<f64, ContrastiveError> {
    let pos = cosine_similarity(anchor, positive)?;
    let negs = negatives
        .iter()
        .map(|n| cosine_similarity(anchor, n))
        .collect::<Result<Vec<_>, _>>()?;
    info_nce_from_similarities(pos, &negs, tau, false)
}

/// Per-anchor losses over a batch. Anchor `i` is contrasted against the
/// positives of every other pair plus all `una_negatives`.
pub fn batch_losses(
    anchors: &[Embedding],
    positives: &[Embedding],
    una_negatives: &[Embedding],
    config: &ContrastiveConfig,
) -> Result<Vec<f64>, ContrastiveError> {
    if anchors.len() != positives.len() {
        return Err(ContrastiveError::Misaligned {
            anchors: anchors.len(),
            positives: positives.len(),
        });
    }
    anchors
        .iter()
        .enumerate()
        .map(|(i, anchor)| {
            let pos = cosine_similarity(anchor, &positives[i])?;
            let negs = positives
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, p)| p)
                .chain(una_negatives)
                .map(|n| cosine_similarity(anchor, n))
                .collect::<Result<Vec<_>, _>>()?;
            info_nce_from_similarities(pos, &negs, config.tau, config.include_positive_in_denominator)
        })
        .collect()
}

/// Mean InfoNCE loss over a batch.
pub fn batch_loss(
    anchors: &[Embedding],
    positives: &[Embedding],
    una_negatives: &[Embedding],
    config: &ContrastiveConfig,
) -> Result<f64, ContrastiveError> {
    let losses = batch_losses(anchors, positives, una_negatives, config)?;
    if losses.is_empty() {
        return Err(ContrastiveError::NoNegatives);
    }
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Maps token sequences to embeddings.
pub trait SentenceEncoder {
    fn dim(&self) -> usize;

    /// Embedding of `tokens`, or `None` when no token is known to the encoder.
    fn encode_known(&self, tokens: &[String]) -> Option<Embedding>;

    /// Like [`SentenceEncoder::encode_known`], with unknown-only input mapped
    /// to the first basis vector.
    fn encode(&self, tokens: &[String]) -> Embedding {
        self.encode_known(tokens)
            .unwrap_or_else(|| Embedding::basis(self.dim(), 0))
    }
}

/// Bag-of-words encoder over fixed pseudo-random unit term vectors.
///
/// The vector of a term depends only on the encoder seed and the term string.
#[derive(Debug, Clone)]
pub struct ToyEncoder<'v> {
    vocabulary: &'v Vocabulary,
    dim: usize,
    seed: u64,
}

impl<'v> ToyEncoder<'v> {
    pub fn new(vocabulary: &'v Vocabulary, dim: usize, seed: u64) -> Self {
        ToyEncoder {
            vocabulary,
            dim: dim.max(1),
            seed,
        }
    }

    pub fn term_vector(&self, term: &str) -> Vec<f64> {
        let mut rng = StreamRng::for_term(self.seed, term);
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}

impl SentenceEncoder for ToyEncoder<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_known(&self, tokens: &[String]) -> Option<Embedding> {
        let mut sum = vec![0.0; self.dim];
        let mut any = false;
        for tok in tokens.iter().filter(|t| self.vocabulary.id(t).is_some()) {
            any = true;
            for (acc, x) in sum.iter_mut().zip(self.term_vector(tok)) {
                *acc += x;
            }
        }
        if !any {
            return None;
        }
        let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Some(Embedding::basis(self.dim, 0));
        }
        Some(Embedding(sum.into_iter().map(|x| x / norm).collect()))
    }
}

/// Embeds `tokens` with a [`ToyEncoder`].
pub fn toy_encode(tokens: &[String], vocabulary: &Vocabulary, dim: usize, seed: u64) -> Embedding {
    ToyEncoder::new(vocabulary, dim, seed).encode(tokens)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositivePair {
    pub line: usize,
    pub anchor: String,
    pub positive: String,
}

/// Anchor sentences with externally produced paraphrases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PositivePairSet {
    pub pairs: Vec<PositivePair>,
}

impl PositivePairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Reads `anchor<TAB>positive` lines. Blank lines are ignored.
pub fn load_pairs<R: BufRead>(source: R) -> Result<PositivePairSet, ContrastiveError> {
    let mut pairs = Vec::new();
    for item in decoded_lines(source) {
        let (line, text) = item?;
        if text.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = text.split('\t').collect();
        if cols.len() != 2 {
            return Err(ContrastiveError::Columns {
                line,
                found: cols.len(),
            });
        }
        for (side, col) in [("anchor", cols[0]), ("positive", cols[1])] {
            if tokenize(col).is_empty() {
                return Err(ContrastiveError::EmptySide { line, side });
            }
        }
        pairs.push(PositivePair {
            line,
            anchor: cols[0].to_owned(),
            positive: cols[1].to_owned(),
        });
    }
    Ok(PositivePairSet { pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use proptest::prelude::*;
    use rand::Rng;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let u = emb(&[0.3, -1.2, 2.0]);
        assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[0.0, 2.0])).unwrap(), 0.0);
        let s = cosine_similarity(&emb(&[1.0, 1.0]), &emb(&[1.0, 0.0])).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(cosine_similarity(&emb(&[0.0, 0.0]), &u), Err(ContrastiveError::Dimension(2, 3))));
        assert!(matches!(cosine_similarity(&emb(&[0.0, 0.0]), &emb(&[1.0, 0.0])), Err(ContrastiveError::ZeroNorm)));
        assert!(Embedding::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn info_nce_hand_values() {
        assert!(info_nce_from_similarities(0.0, &[0.0], 1.0, false).unwrap().abs() < 1e-12);
        let two = info_nce_from_similarities(0.0, &[0.0, 0.0], 1.0, false).unwrap();
        assert!((two - std::f64::consts::LN_2).abs() < 1e-12);
        let neg = info_nce_from_similarities(1.0, &[0.0], 1.0, false).unwrap();
        assert!((neg + 1.0).abs() < 1e-12);
        // common variant: -log(e / (e + 1))
        let with_pos = info_nce_from_similarities(1.0, &[0.0], 1.0, true).unwrap();
        assert!((with_pos - (1.0f64.exp() + 1.0).ln() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn info_nce_errors() {
        assert!(matches!(info_nce_from_similarities(0.0, &[], 1.0, false), Err(ContrastiveError::NoNegatives)));
        assert!(matches!(info_nce_from_similarities(0.0, &[0.0], 0.0, false), Err(ContrastiveError::Temperature(_))));
        assert!(matches!(info_nce_from_similarities(f64::NAN, &[0.0], 1.0, false), Err(ContrastiveError::NonFinite)));
    }

    #[test]
    fn info_nce_on_embeddings() {
        let a = emb(&[1.0, 0.0, 0.0]);
        let loss = info_nce(&a, &a, &[emb(&[0.0, 1.0, 0.0])], 1.0).unwrap();
        assert!((loss + 1.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_temperature_stays_finite() {
        let loss = info_nce_from_similarities(1.0, &[-1.0, 1.0, 0.5], 1e-3, false).unwrap();
        assert!(loss.is_finite());
        let loss = info_nce_from_similarities(-1.0, &[1.0], 1e-3, false).unwrap();
        assert!((loss - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn batch_of_two_orthogonal_pairs() {
        let e = |i| Embedding::basis(4, i);
        let anchors = [e(0), e(1)];
        let positives = [e(0), e(1)];
        let config = ContrastiveConfig { tau: 1.0, ..Default::default() };
        let loss = batch_loss(&anchors, &positives, &[], &config).unwrap();
        assert!((loss + 1.0).abs() < 1e-12);

        let with = batch_loss(&anchors, &positives, &[e(3)], &config).unwrap();
        assert!(with > loss);

        let swapped = batch_loss(&[e(1), e(0)], &[e(1), e(0)], &[], &config).unwrap();
        assert!((swapped - loss).abs() < 1e-15);
    }

    #[test]
    fn batch_of_one_needs_una_negatives() {
        let e = |i| Embedding::basis(3, i);
        let config = ContrastiveConfig::default();
        assert!(matches!(batch_loss(&[e(0)], &[e(0)], &[], &config), Err(ContrastiveError::NoNegatives)));
        assert!(batch_loss(&[e(0)], &[e(0)], &[e(1)], &config).is_ok());
        assert!(matches!(
            batch_loss(&[e(0)], &[], &[], &config),
            Err(ContrastiveError::Misaligned { .. })
        ));
    }

    #[test]
    fn toy_encoder_properties() {
        let vocab: Vocabulary = ["red", "green", "blue", "cat"].iter().map(|s| s.to_string()).collect();
        let t = |s: &str| tokenize(s);
        let a = toy_encode(&t("red green cat"), &vocab, 64, 11);
        assert_eq!(a, toy_encode(&t("red green cat"), &vocab, 64, 11));
        let b = toy_encode(&t("cat red green"), &vocab, 64, 11);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert_ne!(a, toy_encode(&t("red green cat"), &vocab, 64, 12));
        assert_eq!(toy_encode(&[], &vocab, 8, 1), Embedding::basis(8, 0));
        assert_eq!(toy_encode(&t("dog"), &vocab, 8, 1), Embedding::basis(8, 0));
        let enc = ToyEncoder::new(&vocab, 8, 1);
        assert!(enc.encode_known(&t("dog")).is_none());
        // OOV tokens do not move the embedding
        assert_eq!(toy_encode(&t("red dog"), &vocab, 16, 3), toy_encode(&t("red"), &vocab, 16, 3));
    }

    #[test]
    fn pairs_file() {
        assert!(load_pairs(&b""[..]).unwrap().is_empty());
        let set = load_pairs(&b"s1\tp1\n"[..]).unwrap();
        assert_eq!(set.pairs, vec![PositivePair { line: 1, anchor: "s1".into(), positive: "p1".into() }]);
        let err = load_pairs(&b"s1\n"[..]).unwrap_err();
        assert!(matches!(err, ContrastiveError::Columns { line: 1, found: 1 }));
        assert!(err.to_string().contains("line 1"));
        let err = load_pairs(&b"a\tb\nc\t...\n"[..]).unwrap_err();
        assert!(matches!(err, ContrastiveError::EmptySide { line: 2, side: "positive" }));
        assert!(matches!(load_pairs(&b"a\t\xfe\n"[..]), Err(ContrastiveError::Read(_))));
    }

    fn random_sims(seed: u64, n: usize) -> (f64, Vec<f64>) {
        let mut rng = StreamRng::labelled(seed, b"sims");
        let pos = rng.gen_range(-1.0..=1.0);
        (pos, (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
    }

    proptest! {
        #[test]
        fn permutation_invariant(seed in any::<u64>(), n in 1usize..40, tau in 0.01f64..2.0) {
            let (pos, negs) = random_sims(seed, n);
            let mut rev = negs.clone();
            rev.reverse();
            rev.rotate_left(n / 3);
            let a = info_nce_from_similarities(pos, &negs, tau, false).unwrap();
            let b = info_nce_from_similarities(pos, &rev, tau, false).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn monotone_in_similarities(seed in any::<u64>(), n in 1usize..20, tau in 0.05f64..2.0, bump in 0.01f64..0.5) {
            let (pos, negs) = random_sims(seed, n);
            let base = info_nce_from_similarities(pos, &negs, tau, false).unwrap();
            let higher_pos = info_nce_from_similarities(pos + bump, &negs, tau, false).unwrap();
            prop_assert!(higher_pos < base);
            let mut harder = negs.clone();
            harder[0] += bump;
            prop_assert!(info_nce_from_similarities(pos, &harder, tau, false).unwrap() > base);
            let mut more = negs.clone();
            more.push(negs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            prop_assert!(info_nce_from_similarities(pos, &more, tau, false).unwrap() > base);
        }
    }
}
