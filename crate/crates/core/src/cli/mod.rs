//! `code2vuln` command line: `extract`, `train`, `evaluate`, `predict`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

pub mod manifest;
pub mod split;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::corpus::{corpus_stats, load_split, LabelCounts, SplitName};
use crate::harness::{self, extract_split, HarnessError, Metrics, Percentages, Prediction, SkipReport, TrainConfig};
use crate::model::{Checkpoint, ModelError};
use crate::pathmine::{encode_bag, read_c2v, write_c2v, EncodedBag, MiningLimits, Vocabulary};
pub use manifest::RunManifest;
use split::split_functions;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const EPOCH_LOG_FILE: &str = "epochs.log";
pub const EPOCH_JSONL_FILE: &str = "epochs.jsonl";
pub const SKIP_FILE: &str = "skips.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Model(m) => m.into(),
            HarnessError::InvalidConfig(m) => CliError::Usage(m),
            HarnessError::EmptyTrainingSet => CliError::Data(e.to_string()),
            HarnessError::Internal(m) => CliError::Internal(m),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}

#[derive(Debug, Parser)]
#[command(name = "code2vuln", version, about = "Path-context vulnerability classifier for C functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse train/valid/test JSON Lines splits into C2V bags and vocabularies.
    Extract(ExtractArgs),
    /// Train on an extraction directory and keep the best-validation-F1 epoch.
    Train(TrainArgs),
    /// Score a C2V file with a checkpoint.
    Evaluate(EvaluateArgs),
    /// Classify the functions in a C file (or standard input).
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long, default_value_t = 8)]
    pub max_length: usize,
    #[arg(long, default_value_t = 3)]
    pub max_width: usize,
    #[arg(long, default_value_t = 200)]
    pub max_contexts: usize,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory holding train.jsonl, valid.jsonl and test.jsonl.
    pub input: PathBuf,
    /// Directory for C2V files, vocabularies and the skip report.
    #[arg(short, long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub limits: LimitArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Drop values and paths seen fewer times than this in training bags.
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Output directory of `extract`.
    pub data: PathBuf,
    /// Directory for the checkpoint and epoch logs.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1024)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 128)]
    pub embedding_size: usize,
    #[arg(long, default_value_t = 0.25)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint written by `train`.
    pub checkpoint: PathBuf,
    /// C2V file to score.
    pub c2v: PathBuf,
    /// Vocabulary directory; defaults to the directory of the C2V file.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// JSON report path; defaults to report.json next to the checkpoint.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint written by `train`.
    pub checkpoint: PathBuf,
    /// C source file; standard input when absent or `-`.
    pub input: Option<PathBuf>,
    /// Extraction directory holding the vocabulary the checkpoint was trained on.
    #[arg(long)]
    pub vocab: PathBuf,
}

impl TrainArgs {
    pub fn config(&self, limits: MiningLimits, min_count: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            embedding_size: self.embedding_size,
            dropout_rate: self.dropout,
            limits,
            learning_rate: self.lr,
            seed: self.seed,
            min_count,
            workers: self.workers,
        }
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| CliError::Internal(e.to_string()))
}

/// Per-split extraction counts, written into the skip report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, serde::Deserialize)]
pub struct SplitSummary {
    pub input: usize,
    pub input_vuln: usize,
    pub input_safe: usize,
    pub kept_vuln: usize,
    pub kept_safe: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, serde::Deserialize)]
pub struct SkipFile {
    pub splits: BTreeMap<String, SplitSummary>,
    pub by_category: BTreeMap<String, usize>,
    #[serde(flatten)]
    pub report: SkipReport,
}

pub fn cmd_extract(args: &ExtractArgs, out: &mut dyn Write) -> Result<SkipFile, CliError> {
    let limits = MiningLimits {
        max_length: args.limits.max_length,
        max_width: args.limits.max_width,
        max_contexts: args.limits.max_contexts,
        seed: args.seed,
    };
    limits.validate().map_err(CliError::Usage)?;
    if args.min_count == 0 {
        return Err(CliError::Usage("--min-count must be at least 1".into()));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let mut manifest =
        RunManifest::new("extract", serde_json::json!({ "limits": limits, "min_count": args.min_count }));
    let pool = thread_pool(args.workers)?;

    let mut skips = SkipFile::default();
    let mut vocab = None;
    for split in SplitName::ALL {
        let path = args.input.join(format!("{split}.jsonl"));
        let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
        manifest.add_input(split.as_str(), &bytes);
        let samples = load_split(&path, split).map_err(|e| CliError::Data(e.to_string()))?;
        if samples.is_empty() {
            log::warn!("{}: no samples", path.display());
        }
        let (bags, report) = pool.install(|| extract_split(&samples, split, &limits));
        if split == SplitName::Train {
            vocab = Some(Vocabulary::build(&bags, args.min_count));
        }
        let input: LabelCounts = corpus_stats(&samples);
        let mut kept = LabelCounts::default();
        bags.iter().for_each(|b| kept.add(b.label));
        let summary = SplitSummary {
            input: input.total(),
            input_vuln: input.vuln,
            input_safe: input.safe,
            kept_vuln: kept.vuln,
            kept_safe: kept.safe,
            skipped: report.len(),
        };
        writeln!(
            out,
            "{split}: {} functions, kept {} ({} vuln / {} safe), skipped {}",
            summary.input,
            kept.total(),
            kept.vuln,
            kept.safe,
            summary.skipped
        )
        .map_err(|e| CliError::Internal(e.to_string()))?;
        write_file(&args.out.join(format!("{split}.c2v")), write_c2v(&bags))?;
        skips.splits.insert(split.as_str().into(), summary);
        skips.report.extend(report);
    }
    skips.by_category = skips.report.by_category().into_iter().map(|(k, v)| (k.to_string(), v)).collect();

    let vocab = vocab.expect("train split processed");
    vocab.save(&args.out).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&args.out.join(SKIP_FILE), to_json(&skips))?;
    manifest.vocab_digest = Some(vocab.digest());
    manifest.write(&args.out).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(skips)
}

fn load_vocab(dir: &Path) -> Result<Vocabulary, CliError> {
    Vocabulary::load(dir).map_err(|e| io_err(dir, e))
}

fn load_encoded(path: &Path, vocab: &Vocabulary) -> Result<Vec<EncodedBag>, CliError> {
    let bags = read_c2v(&read_file(path)?).map_err(|e| io_err(path, e))?;
    Ok(bags.iter().map(|b| encode_bag(b, vocab)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub validation: Metrics,
    pub validation_percent: Percentages,
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<TrainSummary, CliError> {
    let extract = RunManifest::read(&args.data).map_err(CliError::Data)?;
    let vocab = load_vocab(&args.data)?;
    let digest = vocab.digest();
    if extract.vocab_digest.as_deref() != Some(digest.as_str()) {
        return Err(CliError::Data(format!(
            "vocabulary in {} has digest {digest}, manifest records {}",
            args.data.display(),
            extract.vocab_digest.as_deref().unwrap_or("none")
        )));
    }
    let limits: MiningLimits = serde_json::from_value(extract.config["limits"].clone())
        .map_err(|e| CliError::Data(format!("extraction manifest: {e}")))?;
    let min_count = extract.config["min_count"].as_u64().unwrap_or(1);
    let config = args.config(limits, min_count);

    let train_path = args.data.join("train.c2v");
    let valid_path = args.data.join("valid.c2v");
    let train = load_encoded(&train_path, &vocab)?;
    let valid = load_encoded(&valid_path, &vocab)?;

    let outcome = harness::train(&train, &valid, &vocab, &config)?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    outcome.checkpoint.save(&args.out.join(CHECKPOINT_FILE)).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut text = String::new();
    let mut jsonl = String::new();
    for record in &outcome.log {
        text.push_str(&record.to_text());
        text.push('\n');
        jsonl.push_str(&serde_json::to_string(record).expect("record serializes"));
        jsonl.push('\n');
    }
    write_file(&args.out.join(EPOCH_LOG_FILE), &text)?;
    write_file(&args.out.join(EPOCH_JSONL_FILE), &jsonl)?;

    let mut manifest = RunManifest::new("train", serde_json::to_value(&config).expect("config serializes"));
    for path in [&train_path, &valid_path] {
        let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
        manifest.add_input(&path.display().to_string(), &bytes);
    }
    manifest.vocab_digest = Some(digest);
    manifest.write(&args.out).map_err(|e| CliError::Internal(e.to_string()))?;

    let summary = TrainSummary {
        best_epoch: outcome.best_epoch,
        validation: outcome.best_metrics,
        validation_percent: outcome.best_metrics.percentages(),
    };
    let w = |e: std::io::Error| CliError::Internal(e.to_string());
    out.write_all(text.as_bytes()).map_err(w)?;
    let p = summary.validation_percent;
    writeln!(
        out,
        "best epoch {}: validation accuracy {:.2}  precision {:.2}  recall {:.2}  f1 {:.2}",
        summary.best_epoch, p.accuracy, p.precision, p.recall, p.f1
    )
    .map_err(w)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub samples: u64,
    pub skipped: usize,
    pub metrics: Metrics,
    pub percent: Percentages,
    pub checkpoint_vocab_digest: String,
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<EvaluationReport, CliError> {
    let vocab_dir = match &args.vocab {
        Some(dir) => dir.clone(),
        None => args.c2v.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let vocab = load_vocab(&vocab_dir)?;
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    checkpoint.check_vocab(&vocab.digest())?;
    let bags = load_encoded(&args.c2v, &vocab)?;
    if bags.is_empty() {
        return Err(CliError::Data(format!("EmptyEvaluationSet: {} holds no bags", args.c2v.display())));
    }
    let metrics = thread_pool(args.workers)?.install(|| harness::evaluate(&bags, &checkpoint, &vocab.digest()))?;

    // Skips recorded at extraction time for the split this file came from.
    let skipped = std::fs::read_to_string(vocab_dir.join(SKIP_FILE))
        .ok()
        .and_then(|t| serde_json::from_str::<SkipFile>(&t).ok())
        .and_then(|s| {
            let stem = args.c2v.file_stem()?.to_str()?.to_string();
            s.splits.get(&stem).map(|x| x.skipped)
        })
        .unwrap_or(0);
    let report = EvaluationReport {
        samples: metrics.total(),
        skipped,
        metrics,
        percent: metrics.percentages(),
        checkpoint_vocab_digest: checkpoint.vocab_digest.clone(),
    };
    let path = match &args.report {
        Some(p) => p.clone(),
        None => args.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default().join(REPORT_FILE),
    };
    write_file(&path, to_json(&report))?;

    let p = report.percent;
    writeln!(
        out,
        "accuracy {:.2}  precision {:.2}  recall {:.2}  f1 {:.2}\ntp {}  fp {}  tn {}  fn {}  (skipped {})",
        p.accuracy, p.precision, p.recall, p.f1, metrics.tp, metrics.fp, metrics.tn, metrics.fn_, skipped
    )
    .map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(report)
}

/// Scored and unscorable counts from one `predict` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictCounts {
    pub scored: usize,
    pub unscorable: usize,
}

pub fn cmd_predict(
    args: &PredictArgs,
    stdin: &mut dyn Read,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<PredictCounts, CliError> {
    let vocab = load_vocab(&args.vocab)?;
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    checkpoint.check_vocab(&vocab.digest())?;
    let limits: MiningLimits = serde_json::from_value(checkpoint.meta["config"]["limits"].clone()).unwrap_or_default();

    let source = match args.input.as_deref() {
        Some(p) if p != Path::new("-") => read_file(p)?,
        _ => {
            let mut s = String::new();
            stdin.read_to_string(&mut s).map_err(|e| CliError::Data(format!("stdin: {e}")))?;
            s
        }
    };
    let mut counts = PredictCounts { scored: 0, unscorable: 0 };
    let w = |e: std::io::Error| CliError::Internal(e.to_string());
    for (i, function) in split_functions(&source).into_iter().enumerate() {
        match harness::predict(function, &checkpoint, &vocab, &limits)? {
            Prediction::Scored { label, prob_vuln } => {
                counts.scored += 1;
                writeln!(out, "{label}\t{prob_vuln:.6}").map_err(w)?;
            }
            Prediction::Unscorable { category, reason } => {
                counts.unscorable += 1;
                writeln!(err, "unscorable\tfunction {}\t{category}: {reason}", i + 1).map_err(w)?;
            }
        }
    }
    if counts.scored == 0 && counts.unscorable > 0 {
        return Err(CliError::Data(format!("none of the {} input functions could be scored", counts.unscorable)));
    }
    Ok(counts)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Extract(a) => cmd_extract(a, out).map(drop),
        Command::Train(a) => cmd_train(a, out).map(drop),
        Command::Evaluate(a) => cmd_evaluate(a, out).map(drop),
        Command::Predict(a) => cmd_predict(a, stdin, out, err).map(drop),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
