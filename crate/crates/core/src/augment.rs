//! Hard negative generation by score-guided term replacement.
//!
//! For one sentence with tf-idf vector `z` over its `n_z` distinct terms,
//! term `i` is replaced with probability
//!
//! ```text
//! a_i = z_i - min(z)
//! C   = mean(a)
//! p_i = min(beta * a_i / C, 1)
//! ```
//!
//! and the highest-scoring term is always replaced, so every negative differs
//! from its source sentence. A replaced term draws its substitute from the
//! terms within `radius` rank positions of it in the model's maximum-score
//! ordering, weighted by their maximum scores.
//!
//! Negatives are produced for whole batches on a fixed schedule: only batches
//! whose 1-based index is a multiple of `alpha` are augmented.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Document, TermId};
use crate::rng::StreamRng;
use crate::tfidf::{SentenceScores, TfIdfModel};

pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_RADIUS: usize = 4000;
pub const DEFAULT_ALPHA: u64 = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("beta must lie in (0, 1], got {0}")]
    Beta(f64),
    #[error("radius must be at least 1")]
    Radius,
    #[error("alpha must be at least 1")]
    Alpha,
    #[error("batch index is 1-based, got 0")]
    BatchIndex,
    #[error("sentence has no in-vocabulary terms")]
    EmptySentence,
    #[error("no replacement candidate exists for term {0}")]
    EmptyWindow(TermId),
    #[error("unknown term id {0}")]
    UnknownTerm(TermId),
    #[error("unknown mode `{0}` (expected `tfidf` or `random`)")]
    Mode(String),
}

/// How terms are chosen for replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMode {
    /// Probabilities follow the sentence's tf-idf scores.
    #[default]
    TfIdf,
    /// Every term has probability `beta`; one uniformly chosen term is forced.
    Random,
}

/// How a replacement term is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReplacementMode {
    /// Score-weighted draw from the rank window.
    #[default]
    TfIdf,
    /// Uniform draw from the whole vocabulary.
    Random,
}

macro_rules! mode_text {
    ($ty:ident) => {
        impl FromStr for $ty {
            type Err = AugmentError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    "tfidf" => Ok($ty::TfIdf),
                    "random" => Ok($ty::Random),
                    other => Err(AugmentError::Mode(other.to_owned())),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $ty::TfIdf => "tfidf",
                    $ty::Random => "random",
                })
            }
        }
    };
}

mode_text!(SelectionMode);
mode_text!(ReplacementMode);

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationConfig {
    /// Augmentation magnitude: the mean unclamped replacement probability.
    pub beta: f64,
    /// Rank-window half width.
    pub radius: usize,
    /// Inject negatives every `alpha` batches.
    pub alpha: u64,
    pub seed: u64,
    pub selection_mode: SelectionMode,
    pub replacement_mode: ReplacementMode,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            beta: DEFAULT_BETA,
            radius: DEFAULT_RADIUS,
            alpha: DEFAULT_ALPHA,
            seed: 0,
            selection_mode: SelectionMode::TfIdf,
            replacement_mode: ReplacementMode::TfIdf,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(AugmentError::Beta(self.beta));
        }
        if self.radius == 0 {
            return Err(AugmentError::Radius);
        }
        if self.alpha == 0 {
            return Err(AugmentError::Alpha);
        }
        Ok(())
    }
}

/// Replacement probabilities for one sentence, aligned with its term list.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    pub p: Vec<f64>,
    /// Index of the term whose replacement is forced.
    pub forced: usize,
}

/// The raw ratios `beta * a_i / C` before clamping and forcing.
///
/// Returns `None` when `C = 0`, i.e. all scores are equal (which includes
/// single-term sentences).
pub fn unclamped_probabilities(z: &[f64], beta: f64) -> Option<Vec<f64>> {
    let min = z.iter().copied().fold(f64::INFINITY, f64::min);
    let spread: Vec<f64> = z.iter().map(|v| v - min).collect();
    let c = spread.iter().sum::<f64>() / z.len() as f64;
    if !(c > 0.0) {
        return None;
    }
    Some(spread.into_iter().map(|a| beta * a / c).collect())
}

/// Score-guided probabilities over `z`. Ties for the maximum resolve to the
/// lowest index.
pub fn tfidf_probabilities(z: &[f64], beta: f64) -> Result<Probabilities, AugmentError> {
    if z.is_empty() {
        return Err(AugmentError::EmptySentence);
    }
    let forced = z
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > z[best] { i } else { best });
    let mut p = match unclamped_probabilities(z, beta) {
        Some(q) => q.into_iter().map(|q| q.min(1.0)).collect(),
        None => vec![0.0; z.len()],
    };
    p[forced] = 1.0;
    Ok(Probabilities { p, forced })
}

/// Flat probabilities `beta` with one uniformly drawn forced term.
pub fn random_probabilities<R: Rng + ?Sized>(
    n_terms: usize,
    beta: f64,
    rng: &mut R,
) -> Result<Probabilities, AugmentError> {
    if n_terms == 0 {
        return Err(AugmentError::EmptySentence);
    }
    let forced = rng.gen_range(0..n_terms);
    let mut p = vec![beta; n_terms];
    p[forced] = 1.0;
    Ok(Probabilities { p, forced })
}

/// Probabilities for a scored sentence under `mode`. The random mode draws
/// its forced term from `rng`; the tf-idf mode consumes no randomness.
pub fn replacement_probabilities<R: Rng + ?Sized>(
    scores: &SentenceScores,
    beta: f64,
    mode: SelectionMode,
    rng: &mut R,
) -> Result<Probabilities, AugmentError> {
    match mode {
        SelectionMode::TfIdf => tfidf_probabilities(&scores.z, beta),
        SelectionMode::Random => random_probabilities(scores.len(), beta, rng),
    }
}

/// Candidate replacements for one term: the rank positions `lo..=hi` around
/// `center`, excluding `center` itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankWindow {
    pub term: TermId,
    pub center: usize,
    pub lo: usize,
    pub hi: usize,
}

impl RankWindow {
    /// Number of candidate terms.
    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }

    /// Rank positions of the candidates in ascending order.
    pub fn ranks(&self) -> impl Iterator<Item = usize> + '_ {
        (self.lo..=self.hi).filter(move |&r| r != self.center)
    }

    /// Candidate term ids in rank order.
    pub fn term_ids(&self, model: &TfIdfModel) -> Vec<TermId> {
        let rank = model.rank_by_score();
        self.ranks().map(|r| rank[r]).collect()
    }
}

/// The window of `radius` ranks below and above `term`, clamped to the
/// vocabulary.
pub fn candidate_window(
    model: &TfIdfModel,
    term: TermId,
    radius: usize,
) -> Result<RankWindow, AugmentError> {
    let center = model.rank_of(term).map_err(|_| AugmentError::UnknownTerm(term))?;
    let last = model.n_terms() - 1;
    Ok(RankWindow {
        term,
        center,
        lo: center.saturating_sub(radius),
        hi: center.saturating_add(radius).min(last),
    })
}

/// Draws a substitute for `window.term`.
pub fn sample_replacement<R: Rng + ?Sized>(
    model: &TfIdfModel,
    window: &RankWindow,
    mode: ReplacementMode,
    rng: &mut R,
) -> Result<TermId, AugmentError> {
    let rank = model.rank_by_score();
    match mode {
        ReplacementMode::TfIdf => {
            if window.is_empty() {
                return Err(AugmentError::EmptyWindow(window.term));
            }
            let scores = model.max_score();
            let weight = |r: usize| scores[rank[r] as usize];
            let total: f64 = window.ranks().map(weight).sum();
            if !(total > 0.0) {
                let k = rng.gen_range(0..window.len());
                return Ok(rank[window.ranks().nth(k).expect("index within window")]);
            }
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut last_positive = None;
            for r in window.ranks() {
                let w = weight(r);
                if w > 0.0 {
                    acc += w;
                    last_positive = Some(r);
                    if acc > target {
                        return Ok(rank[r]);
                    }
                }
            }
            // rounding left target at or above the accumulated total
            Ok(rank[last_positive.expect("positive total implies a positive weight")])
        }
        ReplacementMode::Random => {
            let m = model.n_terms();
            if m < 2 {
                return Err(AugmentError::EmptyWindow(window.term));
            }
            let pick = rng.gen_range(0..m as TermId - 1);
            Ok(if pick >= window.term { pick + 1 } else { pick })
        }
    }
}

/// Per-term record of one sentence's augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct TermPlan {
    pub term: TermId,
    pub probability: f64,
    pub forced: bool,
    pub window: RankWindow,
    pub replacement: Option<TermId>,
}

impl TermPlan {
    pub fn replaced(&self) -> bool {
        self.replacement.is_some()
    }
}

/// Replacement decisions for the distinct in-vocabulary terms of a sentence,
/// in ascending term id order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplacementPlan {
    pub terms: Vec<TermPlan>,
}

impl ReplacementPlan {
    pub fn replaced_count(&self) -> usize {
        self.terms.iter().filter(|t| t.replaced()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unaugmentable {
    /// No token of the sentence is in the model vocabulary.
    NoScoredTerms,
    /// The vocabulary has a single term, so nothing can replace it.
    SingleTermVocabulary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSentence {
    pub source_id: usize,
    /// 1-based line of the source sentence.
    pub source_line: usize,
    pub tokens: Vec<String>,
    pub plan: ReplacementPlan,
    pub unaugmentable: Option<Unaugmentable>,
}

impl AugmentedSentence {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Rewrites one document into a hard negative. Every occurrence of a
/// replaced term type receives the same substitute.
pub fn augment_sentence<R: Rng + ?Sized>(
    model: &TfIdfModel,
    document: &Document,
    config: &AugmentationConfig,
    rng: &mut R,
) -> AugmentedSentence {
    let unchanged = |reason| AugmentedSentence {
        source_id: document.id,
        source_line: document.line,
        tokens: document.tokens.clone(),
        plan: ReplacementPlan::default(),
        unaugmentable: Some(reason),
    };

    let scores = model.sentence_scores(&document.tokens);
    if scores.is_empty() {
        return unchanged(Unaugmentable::NoScoredTerms);
    }
    if model.n_terms() < 2 {
        return unchanged(Unaugmentable::SingleTermVocabulary);
    }

    let probs = replacement_probabilities(&scores, config.beta, config.selection_mode, rng)
        .expect("non-empty sentence");
    let mut terms = Vec::with_capacity(scores.len());
    for (idx, (&term, &p)) in scores.term_ids.iter().zip(&probs.p).enumerate() {
        let forced = idx == probs.forced;
        let draw: f64 = rng.gen();
        let window = candidate_window(model, term, config.radius).expect("scored term is in vocabulary");
        let replacement = if forced || draw < p {
            Some(
                sample_replacement(model, &window, config.replacement_mode, rng)
                    .expect("vocabulary has at least two terms"),
            )
        } else {
            None
        };
        terms.push(TermPlan {
            term,
            probability: p,
            forced,
            window,
            replacement,
        });
    }

    let vocab = model.vocabulary();
    let substitutes: HashMap<&str, &str> = terms
        .iter()
        .filter_map(|t| {
            let to = t.replacement?;
            Some((vocab.term(t.term)?, vocab.term(to)?))
        })
        .collect();
    let tokens = document
        .tokens
        .iter()
        .map(|tok| substitutes.get(tok.as_str()).map_or_else(|| tok.clone(), |s| (*s).to_owned()))
        .collect();

    AugmentedSentence {
        source_id: document.id,
        source_line: document.line,
        tokens,
        plan: ReplacementPlan { terms },
        unaugmentable: None,
    }
}

/// Negatives generated for one training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeBatch {
    pub batch_index: u64,
    pub sentences: Vec<AugmentedSentence>,
}

impl NegativeBatch {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn unaugmentable(&self) -> usize {
        self.sentences.iter().filter(|s| s.unaugmentable.is_some()).count()
    }
}

/// Whether batch `batch_index` (1-based) receives negatives.
pub fn is_injection_batch(batch_index: u64, alpha: u64) -> bool {
    alpha > 0 && batch_index > 0 && batch_index % alpha == 0
}

/// Augments every sentence of a batch when the schedule calls for it.
///
/// Sentence `k` draws from the stream `(config.seed, batch_index, k)`, so the
/// result is the same for any thread count.
pub fn augment_batch(
    model: &TfIdfModel,
    batch: &[Document],
    config: &AugmentationConfig,
    batch_index: u64,
) -> Result<Option<NegativeBatch>, AugmentError> {
    config.validate()?;
    if batch_index == 0 {
        return Err(AugmentError::BatchIndex);
    }
    if !is_injection_batch(batch_index, config.alpha) {
        return Ok(None);
    }
    let sentences = batch
        .par_iter()
        .enumerate()
        .map(|(pos, doc)| {
            let mut rng = StreamRng::for_sentence(config.seed, batch_index, pos as u64);
            augment_sentence(model, doc, config, &mut rng)
        })
        .collect();
    Ok(Some(NegativeBatch {
        batch_index,
        sentences,
    }))
}

/// Owns the batch counter for a training run.
#[derive(Debug, Clone)]
pub struct BatchScheduler {
    config: AugmentationConfig,
    batches_seen: u64,
}

impl BatchScheduler {
    pub fn new(config: AugmentationConfig) -> Result<Self, AugmentError> {
        config.validate()?;
        Ok(BatchScheduler {
            config,
            batches_seen: 0,
        })
    }

    pub fn config(&self) -> &AugmentationConfig {
        &self.config
    }

    pub fn batches_seen(&self) -> u64 {
        self.batches_seen
    }

    /// Advances to the next batch and returns its negatives, if scheduled.
    pub fn next_batch(
        &mut self,
        model: &TfIdfModel,
        batch: &[Document],
    ) -> Result<Option<NegativeBatch>, AugmentError> {
        self.batches_seen += 1;
        augment_batch(model, batch, &self.config, self.batches_seen)
    }
}
