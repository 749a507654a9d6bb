//! Hard negative augmentation for contrastive sentence-embedding training.
//!
//! A corpus is fitted into a [`TfIdfModel`] that keeps per-term idf values,
//! the maximum tf-idf score each term reaches in any document, and the rank
//! ordering of terms by that score. Sentences are then rewritten into hard
//! negatives: terms that carry more substance are more likely to be swapped,
//! and each swap draws a replacement of comparable importance from a window
//! of neighbouring ranks.
//!
//! The crate also carries the pieces needed to exercise the procedure end to
//! end without a transformer backbone: the InfoNCE objective, a deterministic
//! bag-of-words encoder, and a Spearman-based similarity evaluation harness.
//!
//! ```
//! use una_core::{corpus::Corpus, tfidf::TfIdfModel, augment::{AugmentationConfig, augment_sentence}};
//! use una_core::rng::StreamRng;
//!
//! let corpus = Corpus::from_lines(["the cat sat", "the dog ran", "a bird flew"]);
//! let model = TfIdfModel::fit(&corpus).unwrap();
//! let config = AugmentationConfig::default();
//! let mut rng = StreamRng::for_sentence(config.seed, 1, 0);
//! let out = augment_sentence(&model, &corpus.documents()[0], &config, &mut rng);
//! assert_ne!(out.tokens, corpus.documents()[0].tokens);
//! ```

pub mod augment;
pub mod contrastive;
pub mod corpus;
pub mod eval;
pub mod rng;
pub mod tfidf;

pub use augment::{AugmentationConfig, AugmentedSentence, NegativeBatch, ReplacementPlan};
pub use corpus::{Corpus, Document, Vocabulary};
pub use tfidf::{SentenceScores, TfIdfModel};
