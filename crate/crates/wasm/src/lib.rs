//! Browser bindings for the augmentation demo page.
//!
//! A [`Demo`] holds a model fitted on text pasted into the page. The page can
//! then inspect replacement probabilities for a sentence, list the rank
//! window around a term and generate a hard negative.

use std::fmt::Write;

use una_core::augment::{
    augment_sentence, candidate_window, replacement_probabilities, AugmentationConfig,
    ReplacementMode, SelectionMode, Unaugmentable,
};
use una_core::corpus::{tokenize, Corpus, Document};
use una_core::rng::StreamRng;
use una_core::tfidf::TfIdfModel;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    model: TfIdfModel,
}

#[wasm_bindgen]
impl Demo {
    /// Fits a model on `corpus`, one sentence per line.
    #[wasm_bindgen(constructor)]
    pub fn new(corpus: &str) -> Result<Demo, JsError> {
        Demo::fit(corpus).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn documents(&self) -> u32 {
        self.model.n_docs() as u32
    }

    #[wasm_bindgen(getter)]
    pub fn terms(&self) -> u32 {
        self.model.n_terms() as u32
    }

    #[wasm_bindgen(js_name = probabilityTable)]
    pub fn probability_table_js(
        &self,
        sentence: &str,
        beta: f64,
        selection: &str,
        seed: u32,
    ) -> Result<String, JsError> {
        self.probability_table(sentence, beta, selection, seed.into())
            .map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = windowTable)]
    pub fn window_table_js(&self, term: &str, radius: usize) -> Result<String, JsError> {
        self.window_table(term, radius).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = augment)]
    pub fn augment_js(
        &self,
        sentence: &str,
        beta: f64,
        radius: usize,
        selection: &str,
        replacement: &str,
        seed: u32,
    ) -> Result<String, JsError> {
        self.augment(sentence, beta, radius, selection, replacement, seed.into())
            .map_err(|e| JsError::new(&e))
    }
}

impl Demo {
    pub fn fit(corpus: &str) -> Result<Demo, String> {
        let corpus = Corpus::from_lines(corpus.lines());
        let model = TfIdfModel::fit(&corpus).map_err(|_| "the corpus has no sentences".to_string())?;
        Ok(Demo { model })
    }

    pub fn model(&self) -> &TfIdfModel {
        &self.model
    }

    fn config(
        beta: f64,
        radius: usize,
        selection: &str,
        replacement: &str,
        seed: u64,
    ) -> Result<AugmentationConfig, String> {
        let config = AugmentationConfig {
            beta,
            radius,
            seed,
            selection_mode: selection.parse::<SelectionMode>().map_err(|e| e.to_string())?,
            replacement_mode: replacement.parse::<ReplacementMode>().map_err(|e| e.to_string())?,
            ..Default::default()
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    /// One row per distinct term: z score, replacement probability, and a
    /// marker on the forced term. Out-of-vocabulary tokens are listed last.
    pub fn probability_table(
        &self,
        sentence: &str,
        beta: f64,
        selection: &str,
        seed: u64,
    ) -> Result<String, String> {
        let config = Self::config(beta, 1, selection, "tfidf", seed)?;
        let tokens = tokenize(sentence);
        let scores = self.model.sentence_scores(&tokens);
        if scores.is_empty() {
            return Err("no term of the sentence is in the vocabulary".into());
        }
        // the same stream augment() starts from, so the forced term agrees
        let mut rng = StreamRng::for_sentence(seed, 1, 0);
        let probs = replacement_probabilities(&scores, config.beta, config.selection_mode, &mut rng)
            .map_err(|e| e.to_string())?;
        let vocab = self.model.vocabulary();
        let mut out = format!("{:<20} {:>10} {:>6}\n", "term", "z", "p");
        for (i, &id) in scores.term_ids.iter().enumerate() {
            let mark = if i == probs.forced { "  forced" } else { "" };
            let _ = writeln!(
                out,
                "{:<20} {:>10.6} {:>6.3}{mark}",
                vocab.term(id).unwrap_or("?"),
                scores.z[i],
                probs.p[i]
            );
        }
        let mut oov: Vec<&str> = tokens
            .iter()
            .filter(|t| vocab.id(t).is_none())
            .map(String::as_str)
            .collect();
        oov.dedup();
        for t in oov {
            let _ = writeln!(out, "{t:<20} {:>10} {:>6}  not in vocabulary", "-", "-");
        }
        Ok(out)
    }

    /// The candidates within `radius` ranks of `term`, in rank order, with
    /// the term itself marked.
    pub fn window_table(&self, term: &str, radius: usize) -> Result<String, String> {
        if radius == 0 {
            return Err("radius must be at least 1".into());
        }
        let key = tokenize(term).into_iter().next().unwrap_or_default();
        let id = self
            .model
            .vocabulary()
            .id(&key)
            .ok_or_else(|| format!("`{term}` is not in the vocabulary"))?;
        let window = candidate_window(&self.model, id, radius).map_err(|e| e.to_string())?;
        let rank = self.model.rank_by_score();
        let vocab = self.model.vocabulary();
        let mut out = format!("{:>6} {:<20} {:>10}\n", "rank", "term", "max score");
        for (r, &t) in rank.iter().enumerate().take(window.hi + 1).skip(window.lo) {
            let mark = if r == window.center { "  <" } else { "" };
            let _ = writeln!(
                out,
                "{r:>6} {:<20} {:>10.6}{mark}",
                vocab.term(t).unwrap_or("?"),
                self.model.max_score()[t as usize]
            );
        }
        Ok(out)
    }

    /// The augmented sentence on the first line, followed by the plan.
    pub fn augment(
        &self,
        sentence: &str,
        beta: f64,
        radius: usize,
        selection: &str,
        replacement: &str,
        seed: u64,
    ) -> Result<String, String> {
        let config = Self::config(beta, radius, selection, replacement, seed)?;
        let doc = Document::new(0, 1, sentence);
        let mut rng = StreamRng::for_sentence(seed, 1, 0);
        let result = augment_sentence(&self.model, &doc, &config, &mut rng);
        match result.unaugmentable {
            Some(Unaugmentable::NoScoredTerms) => {
                return Err("no term of the sentence is in the vocabulary".into())
            }
            Some(Unaugmentable::SingleTermVocabulary) => {
                return Err("the vocabulary has a single term".into())
            }
            None => {}
        }
        let vocab = self.model.vocabulary();
        let mut out = format!("{}\n\n", result.text());
        for t in &result.plan.terms {
            let from = vocab.term(t.term).unwrap_or("?");
            let _ = match t.replacement {
                Some(to) => writeln!(
                    out,
                    "{from} -> {} (p={:.3}{})",
                    vocab.term(to).unwrap_or("?"),
                    t.probability,
                    if t.forced { ", forced" } else { "" }
                ),
                None => writeln!(out, "{from} kept (p={:.3})", t.probability),
            };
        }
        Ok(out)
    }
}
