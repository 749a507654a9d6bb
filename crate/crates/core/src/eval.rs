//! Semantic textual similarity evaluation: cosine similarity of pair
//! embeddings scored against gold labels with Spearman's rank correlation.

use std::io::BufRead;

use thiserror::Error;

use crate::contrastive::{cosine_similarity, ContrastiveError, SentenceEncoder};
use crate::corpus::{decoded_lines, tokenize, CorpusError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFew(usize),
    #[error("correlation undefined: one input is constant")]
    Constant,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("eval line {line}: expected 3 tab-separated columns, found {found}")]
    Columns { line: usize, found: usize },
    #[error("eval line {line}: invalid gold score `{value}`")]
    Gold { line: usize, value: String },
    #[error(transparent)]
    Similarity(#[from] ContrastiveError),
    #[error(transparent)]
    Read(#[from] CorpusError),
}

/// Average (fractional) ranks, 1-based. Tied values share the mean of the
/// positions they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::Constant);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFew(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub line: usize,
    pub sentence_a: String,
    pub sentence_b: String,
    pub gold: f64,
}

/// Reads `sentence_a<TAB>sentence_b<TAB>gold` lines. Blank lines are ignored.
pub fn load_scored_pairs<R: BufRead>(source: R) -> Result<Vec<ScoredPair>, EvalError> {
    let mut pairs = Vec::new();
    for item in decoded_lines(source) {
        let (line, text) = item?;
        if text.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = text.split('\t').collect();
        if cols.len() != 3 {
            return Err(EvalError::Columns {
                line,
                found: cols.len(),
            });
        }
        let gold: f64 = match cols[2].trim().parse() {
            Ok(g) if f64::is_finite(g) => g,
            _ => {
                return Err(EvalError::Gold {
                    line,
                    value: cols[2].to_owned(),
                })
            }
        };
        pairs.push(ScoredPair {
            line,
            sentence_a: cols[0].to_owned(),
            sentence_b: cols[1].to_owned(),
            gold,
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Pairs that entered the correlation.
    pub n_pairs: usize,
    pub rho: f64,
    /// Source lines of pairs skipped because neither side had a known term.
    pub flagged: Vec<usize>,
    pub similarities: Vec<f64>,
}

/// Embeds both sides of every pair, takes cosine similarities and correlates
/// them with the gold scores. Pairs where both sides fall back to the
/// unknown-input embedding are reported in `flagged` instead of scored.
pub fn evaluate_pairs<E: SentenceEncoder>(
    pairs: &[ScoredPair],
    encoder: &E,
) -> Result<EvalReport, EvalError> {
    let mut sims = Vec::with_capacity(pairs.len());
    let mut gold = Vec::with_capacity(pairs.len());
    let mut flagged = Vec::new();
    for pair in pairs {
        let a = encoder.encode_known(&tokenize(&pair.sentence_a));
        let b = encoder.encode_known(&tokenize(&pair.sentence_b));
        if a.is_none() && b.is_none() {
            flagged.push(pair.line);
            continue;
        }
        let fallback = || crate::contrastive::Embedding::basis(encoder.dim(), 0);
        let a = a.unwrap_or_else(fallback);
        let b = b.unwrap_or_else(fallback);
        sims.push(cosine_similarity(&a, &b)?);
        gold.push(pair.gold);
    }
    if sims.len() < 2 {
        return Err(EvalError::TooFew(sims.len()));
    }
    let rho = spearman(&sims, &gold)?;
    Ok(EvalReport {
        n_pairs: sims.len(),
        rho,
        flagged,
        similarities: sims,
    })
}
