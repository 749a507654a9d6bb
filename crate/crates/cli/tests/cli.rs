use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;
use una_core::tfidf::TfIdfModel;

struct Output {
    code: u8,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Output {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let mut argv = vec!["una"];
    argv.extend_from_slice(args);
    let code = una_cli::run(argv, &mut stdout, &mut stderr);
    Output {
        code,
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sample_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_corpus.txt")
}

#[test]
fn fit_two_line_corpus() {
    let dir = TempDir::new().unwrap();
    let corpus = write(&dir, "c.txt", "a b b\na c\n");
    let model = dir.path().join("m.txt");
    let out = run(&["fit", "--corpus", s(&corpus), "--output", s(&model)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.stdout, "N=2 m=3\n");
    let m = TfIdfModel::load(fs::File::open(&model).map(std::io::BufReader::new).unwrap()).unwrap();
    assert_eq!(m.n_docs(), 2);
    let b = m.vocabulary().id("b").unwrap() as usize;
    assert!((m.max_score()[b] - (5.0f64 / 3.0).ln() * 2f64.ln()).abs() < 1e-15);
}

#[test]
fn fit_missing_file_names_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.txt");
    let out = run(&["fit", "--corpus", s(&missing), "--output", s(&dir.path().join("m"))]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("nope.txt"));
    assert!(out.stdout.is_empty());
}

#[test]
fn fit_empty_corpus_exits_2() {
    let dir = TempDir::new().unwrap();
    let corpus = write(&dir, "c.txt", "");
    let out = run(&["fit", "--corpus", s(&corpus), "--output", s(&dir.path().join("m"))]);
    assert_eq!(out.code, 2);
}

#[test]
fn fit_reports_decode_error() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("c.txt");
    fs::write(&corpus, b"fine\nbro\xc3ken\n").unwrap();
    let out = run(&["fit", "--corpus", s(&corpus), "--output", s(&dir.path().join("m"))]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("line 2"), "{}", out.stderr);
    assert!(out.stderr.contains("byte offset 8"), "{}", out.stderr);
}

fn fitted(dir: &TempDir, corpus: &Path) -> PathBuf {
    let model = dir.path().join("model.txt");
    let out = run(&["fit", "--corpus", s(corpus), "--output", s(&model)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    model
}

#[test]
fn augment_flag_validation() {
    let dir = TempDir::new().unwrap();
    let model = fitted(&dir, &sample_corpus());
    let output = dir.path().join("aug.txt");
    let corpus = sample_corpus();
    let base = ["augment", "--model", s(&model), "--input", s(&corpus), "--output", s(&output)];
    for bad in [
        &["--beta", "1.5"][..],
        &["--beta", "0"],
        &["--radius", "0"],
        &["--alpha", "0"],
        &["--batch-size", "0"],
        &["--selection-mode", "greedy"],
        &["--beta", "lots"],
    ] {
        let mut args = base.to_vec();
        args.extend_from_slice(bad);
        assert_eq!(run(&args).code, 2, "{bad:?}");
    }
    let mut args = base.to_vec();
    args.extend_from_slice(&["--beta", "1"]);
    assert_eq!(run(&args).code, 0);
}

#[test]
fn augment_output_format() {
    let dir = TempDir::new().unwrap();
    let corpus = write(&dir, "c.txt", "red apple pie\ngreen apple tart\nblue berry pie\n");
    let model = fitted(&dir, &corpus);
    let input = write(&dir, "in.txt", "Red apple pie!\n\nzzz qqq\ngreen berry\n");
    let output = dir.path().join("aug.txt");
    let out = run(&[
        "augment", "--model", s(&model), "--input", s(&input), "--output", s(&output),
        "--alpha", "1", "--batch-size", "2",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.stdout, "batches=2 negatives=3 unaugmentable=1\n");
    assert!(out.stderr.contains("skipped 1 blank"));
    let text = fs::read_to_string(&output).unwrap();
    let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(&lines[0][..2], &["1", "1"]);
    assert_ne!(lines[0][2], "red apple pie");
    assert_eq!(lines[1], vec!["1", "3", "zzz qqq", "#unaugmentable"]);
    assert_eq!(&lines[2][..2], &["2", "4"]);
}

#[test]
fn augment_is_reproducible_and_seed_sensitive() {
    let dir = TempDir::new().unwrap();
    let model = fitted(&dir, &sample_corpus());
    let go = |seed: &str, name: &str| {
        let output = dir.path().join(name);
        let out = run(&[
            "augment", "--model", s(&model), "--input", s(&sample_corpus()), "--output", s(&output),
            "--seed", seed,
        ]);
        assert_eq!(out.code, 0);
        fs::read(output).unwrap()
    };
    let a = go("42", "a");
    assert_eq!(a, go("42", "b"));
    assert_ne!(a, go("43", "c"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let model = fitted(&dir, &sample_corpus());
    let cfg = write(&dir, "sweep.conf", "alpha = 1\nbatch_size = 100\nbeta = 0.3\n");
    let output = dir.path().join("aug.txt");
    let out = run(&[
        "--config", s(&cfg), "augment", "--model", s(&model), "--input", s(&sample_corpus()),
        "--output", s(&output),
    ]);
    assert_eq!(out.stdout, "batches=10 negatives=1000 unaugmentable=0\n");
    let out = run(&[
        "augment", "--config", s(&cfg), "--model", s(&model), "--input", s(&sample_corpus()),
        "--output", s(&output), "--alpha", "5",
    ]);
    assert_eq!(out.stdout, "batches=2 negatives=200 unaugmentable=0\n");
    let bad = write(&dir, "bad.conf", "beta = 2\n");
    let out = run(&[
        "--config", s(&bad), "augment", "--model", s(&model), "--input", s(&sample_corpus()),
        "--output", s(&output),
    ]);
    assert_eq!(out.code, 2);
}

#[test]
fn augment_rejects_corrupt_model() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.txt", "UNA-TFIDF v1 N=2 m=2\na\t0\t0\nb\t1\t1\nranks: 1 1\n");
    let input = write(&dir, "in.txt", "a b\n");
    let out = run(&["augment", "--model", s(&model), "--input", s(&input), "--output", s(&dir.path().join("o"))]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("line 4"), "{}", out.stderr);
    assert!(out.stderr.contains("id 1 repeated"), "{}", out.stderr);
}

#[test]
fn eval_identical_versus_disjoint() {
    let dir = TempDir::new().unwrap();
    let corpus = write(
        &dir,
        "c.txt",
        "cats chase mice\ndogs bark loudly\nbirds sing songs\nfish swim deep\nowls hunt rats\n",
    );
    let model = fitted(&dir, &corpus);
    let pairs = write(
        &dir,
        "p.tsv",
        "cats chase mice\tcats chase mice\t1\n\
         dogs bark loudly\tbirds sing songs\t0\n\
         fish swim deep\tfish swim deep\t1\n\
         owls hunt rats\tcats chase mice\t0\n\
         birds sing songs\tbirds sing songs\t1\n\
         fish swim deep\tdogs bark loudly\t0\n",
    );
    let out = run(&["eval", "--pairs", s(&pairs), "--model", s(&model), "--dim", "64"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rho: f64 = out.stdout.trim().strip_prefix("rho=").unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!(rho > 0.0);
    assert!(out.stdout.trim().ends_with(" n=6"));
}

#[test]
fn eval_insufficient_and_malformed() {
    let dir = TempDir::new().unwrap();
    let corpus = write(&dir, "c.txt", "a b\nc d\n");
    let model = fitted(&dir, &corpus);
    let one = write(&dir, "one.tsv", "a b\tc d\t2.5\n");
    assert_eq!(run(&["eval", "--pairs", s(&one), "--model", s(&model)]).code, 3);
    let bad = write(&dir, "bad.tsv", "a b\tc d\t2.5\na b\tc d\n");
    let out = run(&["eval", "--pairs", s(&bad), "--model", s(&model)]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("line 2"), "{}", out.stderr);
}

#[test]
fn loss_demo_defaults_and_selection() {
    let pairs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_pairs.tsv");
    let both = run(&["loss-demo", "--corpus", s(&sample_corpus()), "--pairs", s(&pairs), "--seed", "7"]);
    assert_eq!(both.code, 0, "{}", both.stderr);
    let explicit = run(&[
        "loss-demo", "--corpus", s(&sample_corpus()), "--pairs", s(&pairs), "--seed", "7", "--tau", "0.05",
    ]);
    assert_eq!(both.stdout, explicit.stdout);

    let value = |out: &str, key: &str| -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(value(&both.stdout, "loss_with_una=") >= value(&both.stdout, "loss_without_una="));

    let only_with = run(&["loss-demo", "--corpus", s(&sample_corpus()), "--seed", "7", "--with-una"]);
    assert_eq!(only_with.stdout.lines().count(), 1);
    assert!(only_with.stdout.starts_with("loss_with_una="));
    let only_without = run(&["loss-demo", "--corpus", s(&sample_corpus()), "--seed", "7", "--without-una"]);
    assert!(only_without.stdout.starts_with("loss_without_una="));
    assert_eq!(
        run(&["loss-demo", "--corpus", s(&sample_corpus()), "--with-una", "--without-una"]).code,
        2
    );
}

#[test]
fn loss_demo_needs_two_anchors() {
    let dir = TempDir::new().unwrap();
    let corpus = write(&dir, "c.txt", "only one sentence\n");
    assert_eq!(run(&["loss-demo", "--corpus", s(&corpus)]).code, 3);
}

#[test]
fn bad_thread_env_is_a_flag_error() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_una"))
        .args(["fit", "--corpus", s(&sample_corpus()), "--output", s(&dir.path().join("m"))])
        .env("UNA_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_and_help() {
    assert_eq!(run(&["frobnicate"]).code, 2);
    let help = run(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("loss-demo"));
}
