use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use una_core::augment::{augment_batch, AugmentationConfig, ReplacementMode, SelectionMode};
use una_core::contrastive::{
    batch_loss, load_pairs, ContrastiveConfig, ContrastiveError, SentenceEncoder, ToyEncoder,
    DEFAULT_BATCH_SIZE,
};
use una_core::corpus::{load_corpus, tokenize, Corpus, CorpusError, Document};
use una_core::eval::{evaluate_pairs, load_scored_pairs, EvalError};
use una_core::tfidf::{TfIdfError, TfIdfModel};

use crate::config::Settings;
use crate::{AugmentFlags, CliError};

pub const DEFAULT_DIM: usize = 256;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn out(e: std::io::Error) -> CliError {
    CliError::Io(format!("writing output: {e}"))
}

fn read_corpus(path: &Path, stderr: &mut dyn Write) -> Result<Corpus, CliError> {
    let corpus = load_corpus(open(path)?).map_err(|e: CorpusError| io_err(path, e))?;
    if corpus.skipped_blank() > 0 {
        let _ = writeln!(
            stderr,
            "warning: {}: skipped {} blank line(s)",
            path.display(),
            corpus.skipped_blank()
        );
    }
    Ok(corpus)
}

fn read_model(path: &Path) -> Result<TfIdfModel, CliError> {
    TfIdfModel::load(open(path)?).map_err(|e| io_err(path, e))
}

pub fn fit(
    corpus_path: &Path,
    output: &Path,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let corpus = read_corpus(corpus_path, stderr)?;
    let model = TfIdfModel::fit(&corpus).map_err(|e| match e {
        TfIdfError::EmptyCorpus => {
            CliError::Usage(format!("{}: corpus has no sentences", corpus_path.display()))
        }
        other => CliError::Io(other.to_string()),
    })?;
    let mut sink = create(output)?;
    model.save(&mut sink).map_err(|e| io_err(output, e))?;
    writeln!(stdout, "N={} m={}", model.n_docs(), model.n_terms()).map_err(out)
}

#[derive(Debug, Clone)]
pub struct AugmentOptions {
    pub config: AugmentationConfig,
    pub batch_size: usize,
}

pub(crate) fn augment_options(settings: &Settings, flags: &AugmentFlags) -> Result<AugmentOptions, CliError> {
    let defaults = AugmentationConfig::default();
    let usage = |e: una_core::augment::AugmentError| CliError::Usage(e.to_string());
    let selection: String = settings.resolve(
        "selection-mode",
        flags.selection_mode.clone(),
        defaults.selection_mode.to_string(),
    )?;
    let replacement: String = settings.resolve(
        "replacement-mode",
        flags.replacement_mode.clone(),
        defaults.replacement_mode.to_string(),
    )?;
    let config = AugmentationConfig {
        beta: settings.resolve("beta", flags.beta, defaults.beta)?,
        radius: settings.resolve("radius", flags.radius, defaults.radius)?,
        alpha: settings.resolve("alpha", flags.alpha, defaults.alpha)?,
        seed: settings.resolve("seed", flags.seed, defaults.seed)?,
        selection_mode: selection.parse::<SelectionMode>().map_err(usage)?,
        replacement_mode: replacement.parse::<ReplacementMode>().map_err(usage)?,
    };
    config.validate().map_err(usage)?;
    let batch_size = settings.resolve("batch-size", flags.batch_size, DEFAULT_BATCH_SIZE)?;
    if batch_size == 0 {
        return Err(CliError::Usage("batch size must be at least 1".into()));
    }
    Ok(AugmentOptions { config, batch_size })
}

pub fn augment(
    pool: &rayon::ThreadPool,
    model_path: &Path,
    input: &Path,
    output: &Path,
    opts: &AugmentOptions,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let model = read_model(model_path)?;
    let corpus = read_corpus(input, stderr)?;
    let mut sink = create(output)?;
    let (mut injected, mut negatives, mut unaugmentable) = (0u64, 0usize, 0usize);
    let mut total_batches = 0u64;
    for (idx, batch) in corpus.documents().chunks(opts.batch_size).enumerate() {
        let batch_index = idx as u64 + 1;
        total_batches = batch_index;
        let Some(negs) = pool
            .install(|| augment_batch(&model, batch, &opts.config, batch_index))
            .map_err(|e| CliError::Usage(e.to_string()))?
        else {
            continue;
        };
        injected += 1;
        negatives += negs.len();
        unaugmentable += negs.unaugmentable();
        for s in &negs.sentences {
            write!(sink, "{}\t{}\t{}", batch_index, s.source_line, s.text()).map_err(out)?;
            if s.unaugmentable.is_some() {
                write!(sink, "\t#unaugmentable").map_err(out)?;
            }
            writeln!(sink).map_err(out)?;
        }
    }
    sink.flush().map_err(|e| io_err(output, e))?;
    if unaugmentable > 0 {
        let _ = writeln!(stderr, "warning: {unaugmentable} sentence(s) could not be augmented");
    }
    let _ = writeln!(stderr, "processed {total_batches} batch(es) of up to {}", opts.batch_size);
    writeln!(stdout, "batches={injected} negatives={negatives} unaugmentable={unaugmentable}").map_err(out)
}

pub fn eval(
    pairs_path: &Path,
    model_path: &Path,
    dim: usize,
    encoder_seed: u64,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    if dim == 0 {
        return Err(CliError::Usage("dimension must be at least 1".into()));
    }
    let pairs = load_scored_pairs(open(pairs_path)?).map_err(|e| io_err(pairs_path, e))?;
    let model = read_model(model_path)?;
    let encoder = ToyEncoder::new(model.vocabulary(), dim, encoder_seed);
    let report = evaluate_pairs(&pairs, &encoder).map_err(|e| match e {
        EvalError::TooFew(n) => CliError::InsufficientData(format!("only {n} scoreable pair(s), need 2")),
        EvalError::Constant => {
            CliError::InsufficientData("correlation undefined: similarities or gold scores are constant".into())
        }
        other => CliError::Io(other.to_string()),
    })?;
    if !report.flagged.is_empty() {
        let lines: Vec<String> = report.flagged.iter().map(usize::to_string).collect();
        let _ = writeln!(
            stderr,
            "warning: skipped {} pair(s) with no known terms on either side (lines {})",
            report.flagged.len(),
            lines.join(", ")
        );
    }
    writeln!(stdout, "rho={} n={}", report.rho, report.n_pairs).map_err(out)
}

#[derive(Debug, Clone)]
pub struct LossDemoOptions {
    pub augment: AugmentOptions,
    pub tau: f64,
    pub dim: usize,
    pub encoder_seed: u64,
    pub show_with: bool,
    pub show_without: bool,
}

pub fn loss_demo(
    pool: &rayon::ThreadPool,
    corpus_path: &Path,
    pairs_path: Option<&Path>,
    opts: &LossDemoOptions,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    if !(opts.tau > 0.0) {
        return Err(CliError::Usage(format!("tau must be positive, got {}", opts.tau)));
    }
    if opts.dim == 0 {
        return Err(CliError::Usage("dimension must be at least 1".into()));
    }
    let corpus = read_corpus(corpus_path, stderr)?;
    let model = TfIdfModel::fit(&corpus)
        .map_err(|_| CliError::Usage(format!("{}: corpus has no sentences", corpus_path.display())))?;
    let b = opts.augment.batch_size;

    let (anchors, positives): (Vec<String>, Vec<String>) = match pairs_path {
        Some(p) => load_pairs(open(p)?)
            .map_err(|e: ContrastiveError| io_err(p, e))?
            .pairs
            .into_iter()
            .take(b)
            .map(|pair| (pair.anchor, pair.positive))
            .unzip(),
        None => corpus
            .documents()
            .iter()
            .take(b)
            .map(|d| (d.raw.clone(), d.raw.clone()))
            .unzip(),
    };
    if anchors.len() < 2 {
        return Err(CliError::InsufficientData(format!(
            "need at least 2 anchors for in-batch negatives, got {}",
            anchors.len()
        )));
    }

    let docs: Vec<Document> = anchors
        .iter()
        .enumerate()
        .map(|(i, text)| Document::new(i, i + 1, text.as_str()))
        .collect();
    // the demo batch is always an injection batch
    let config = AugmentationConfig {
        alpha: 1,
        ..opts.augment.config.clone()
    };
    let negatives = pool
        .install(|| augment_batch(&model, &docs, &config, 1))
        .map_err(|e| CliError::Usage(e.to_string()))?
        .expect("alpha = 1 injects every batch");

    let encoder = ToyEncoder::new(model.vocabulary(), opts.dim, opts.encoder_seed);
    let embed = |text: &str| encoder.encode(&tokenize(text));
    let anchor_emb: Vec<_> = anchors.iter().map(|t| embed(t)).collect();
    let positive_emb: Vec<_> = positives.iter().map(|t| embed(t)).collect();
    let negative_emb: Vec<_> = negatives.sentences.iter().map(|s| encoder.encode(&s.tokens)).collect();

    let cfg = ContrastiveConfig {
        tau: opts.tau,
        batch_size: b,
        ..Default::default()
    };
    let loss_err = |e: ContrastiveError| CliError::Io(format!("loss: {e}"));
    let without = batch_loss(&anchor_emb, &positive_emb, &[], &cfg).map_err(loss_err)?;
    let with = batch_loss(&anchor_emb, &positive_emb, &negative_emb, &cfg).map_err(loss_err)?;
    let _ = writeln!(
        stderr,
        "batch of {} anchors, {} generated negatives ({} unaugmentable)",
        anchors.len(),
        negatives.len(),
        negatives.unaugmentable()
    );
    if opts.show_without {
        writeln!(stdout, "loss_without_una={without}").map_err(out)?;
    }
    if opts.show_with {
        writeln!(stdout, "loss_with_una={with}").map_err(out)?;
    }
    Ok(())
}
