//! Command-line front end: `prepare`, `train`, `evaluate`, `predict`, `synth`.
//!
//! Settings resolve as flag, then `--config` file, then built-in default.
//! The seed falls back to the `FPNN_SEED` environment variable before the
//! built-in default of 0.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{gen_synthetic_corpus, load_records, write_csv, Format, LabelSet, SyntheticSpec};
use crate::dataset::{prepare, Dataset, PrepConfig};
use crate::error::{Error, Result};
use crate::evaluator::{render_report, ClassReport};
use crate::model::{load_checkpoint, predict, save_checkpoint, ArchSpec, CellStack};
use crate::textprep::{encode_sequence, normalize, Truncate, Vocabulary};
use crate::trainer::{evaluate_pass, fit, write_curves, TrainConfig};

pub const SEED_ENV: &str = "FPNN_SEED";
pub const CONFIG_FILE: &str = "config.json";
pub const VOCAB_FILE: &str = "vocab.tsv";
pub const LABELS_FILE: &str = "labels.txt";

#[derive(Parser, Debug)]
#[command(name = "flightphase", version, about = "Phase-of-flight classification from occurrence narratives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean, split and encode a CSV or JSONL export.
    Prepare(PrepareArgs),
    /// Train a model on a prepared data directory.
    Train(TrainArgs),
    /// Print the classification report of a model on one split.
    Evaluate(EvaluateArgs),
    /// Classify one narrative.
    Predict(PredictArgs),
    /// Write a synthetic labelled corpus as CSV.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct PrepareArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    test_frac: Option<f64>,
    #[arg(long)]
    val_frac: Option<f64>,
    #[arg(long)]
    truncate: Option<Truncate>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Cell stack such as lstm, gru+lstm or gru+bilstm+lstm.
    #[arg(long)]
    arch: Option<CellStack>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    dense: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    curves: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = ["test", "val", "train"], default_value = "test")]
    split: String,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    text: String,
    #[arg(long, default_value = "head")]
    truncate: Truncate,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    vocab_size: usize,
    #[arg(long)]
    signal: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 20)]
    min_len: usize,
    #[arg(long, default_value_t = 50)]
    max_len: usize,
}

/// The resolved settings of a run, as written to `config.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prepare: Option<PrepareConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainRunConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub input: PathBuf,
    pub format: Format,
    #[serde(flatten)]
    pub prep: PrepConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub data: PathBuf,
    pub arch: ArchSpec,
    #[serde(flatten)]
    pub train: TrainConfig,
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Prepare(a) => cmd_prepare(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Argument(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    Ok(env_seed()?.unwrap_or(0))
}

fn base_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    path.as_deref().map_or(Ok(RunConfig::default()), RunConfig::load)
}

fn cmd_prepare(a: PrepareArgs) -> Result<()> {
    let file = base_config(&a.config)?.prepare;
    let base = file.as_ref().map(|f| f.prep).unwrap_or_default();
    let input = a
        .input
        .or_else(|| file.as_ref().map(|f| f.input.clone()))
        .ok_or_else(|| Error::Argument("--input is required".into()))?;
    let format = a
        .format
        .or(file.as_ref().map(|f| f.format))
        .unwrap_or(Format::Csv);
    let mut prep = PrepConfig {
        max_len: a.max_len.unwrap_or(base.max_len),
        vocab_size: a.vocab_size.unwrap_or(base.vocab_size),
        truncate: a.truncate.unwrap_or(base.truncate),
        split: base.split,
    };
    prep.split.test_fraction = a.test_frac.unwrap_or(base.split.test_fraction);
    prep.split.val_fraction_of_train = a.val_frac.unwrap_or(base.split.val_fraction_of_train);
    prep.split.seed = resolve_seed(a.seed, file.as_ref().map(|f| f.prep.split.seed))?;
    let config = RunConfig {
        prepare: Some(PrepareConfig {
            input: input.clone(),
            format,
            prep,
        }),
        train: None,
    };

    let docs = load_records(&input, format)?;
    let prepared = prepare(&docs, &prep)?;
    std::fs::create_dir_all(&a.out)?;
    config.save(&a.out.join(CONFIG_FILE))?;
    let vocab_file = std::fs::File::create(a.out.join(VOCAB_FILE))?;
    prepared.vocab.write_tsv(std::io::BufWriter::new(vocab_file))?;
    write_labels(&prepared.labels, &a.out.join(LABELS_FILE))?;
    for (name, ds) in [
        ("train", &prepared.train),
        ("val", &prepared.val),
        ("test", &prepared.test),
    ] {
        ds.save(&a.out.join(format!("{name}.bin")))?;
    }
    println!("records: {}", docs.len());
    println!("train: {}", prepared.train.len());
    println!("val: {}", prepared.val.len());
    println!("test: {}", prepared.test.len());
    Ok(())
}

fn write_labels(labels: &LabelSet, path: &Path) -> Result<()> {
    let mut text = String::new();
    for l in labels.labels() {
        text.push_str(l);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<LabelSet> {
    let text = std::fs::read_to_string(path)?;
    LabelSet::from_ordered(text.lines().map(str::to_string).collect())
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    Vocabulary::read_tsv(std::io::BufReader::new(std::fs::File::open(path)?))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let file = base_config(&a.config)?.train;
    let data = a
        .data
        .or_else(|| file.as_ref().map(|f| f.data.clone()))
        .ok_or_else(|| Error::Argument("--data is required".into()))?;
    let out = a
        .out
        .or_else(|| file.as_ref().map(|f| f.out.clone()))
        .ok_or_else(|| Error::Argument("--out is required".into()))?;
    let curves = a.curves.or_else(|| file.as_ref().and_then(|f| f.curves.clone()));
    let cells = a
        .arch
        .or_else(|| file.as_ref().map(|f| f.arch.cells.clone()))
        .ok_or_else(|| Error::Argument("--arch is required".into()))?;
    let base_train = file.as_ref().map(|f| f.train.clone()).unwrap_or_default();
    let mut cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(base_train.epochs),
        batch_size: a.batch.unwrap_or(base_train.batch_size),
        seed: resolve_seed(a.seed, file.as_ref().map(|f| f.train.seed))?,
        ..base_train
    };
    cfg.adam.lr = a.lr.unwrap_or(cfg.adam.lr);
    cfg.validate()?;

    let vocab = read_vocab(&data.join(VOCAB_FILE))?;
    let labels = read_labels(&data.join(LABELS_FILE))?;
    let train_set = Dataset::load(&data.join("train.bin"))?;
    let val_set = Dataset::load(&data.join("val.bin"))?;
    let sizes = file.as_ref().map_or(
        (
            ArchSpec::DEFAULT_EMBED_DIM,
            ArchSpec::DEFAULT_HIDDEN,
            ArchSpec::DEFAULT_DENSE,
        ),
        |f| (f.arch.embed_dim, f.arch.hidden, f.arch.dense_hidden),
    );
    let spec = ArchSpec {
        cells,
        embed_dim: a.embed_dim.unwrap_or(sizes.0),
        hidden: a.hidden.unwrap_or(sizes.1),
        dense_hidden: a.dense.unwrap_or(sizes.2),
        num_classes: labels.len(),
        max_len: train_set.max_len,
        vocab_size: vocab.len(),
    };
    spec.validate()?;

    let run = TrainRunConfig {
        data: data.clone(),
        arch: spec.clone(),
        train: cfg.clone(),
        out: out.clone(),
        curves: curves.clone(),
    };
    let epochs = cfg.epochs;
    let (params, records) = fit(&spec, &train_set, &val_set, &cfg, |r| {
        eprintln!("{}", r.progress_line(epochs));
    })?;

    let out_dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&out_dir)?;
    let vocab_ref = relative_ref(&data.join(VOCAB_FILE), &out_dir)?;
    save_checkpoint(&params, &spec, Some(&vocab_ref), &out)?;
    if let Some(path) = &curves {
        write_curves(&records, path)?;
    }
    let config_path = out_dir.join(CONFIG_FILE);
    let mut merged = if config_path.exists() {
        RunConfig::load(&config_path)?
    } else {
        RunConfig::default()
    };
    merged.train = Some(run);
    merged.save(&config_path)?;

    match records.last().and_then(|r| r.val_accuracy) {
        Some(acc) => println!("val_accuracy: {acc:.4}"),
        None => println!("val_accuracy: n/a"),
    }
    Ok(())
}

/// Path of `target` as seen from directory `from`.
fn relative_ref(target: &Path, from: &Path) -> Result<String> {
    let target = std::fs::canonicalize(target)?;
    let from = std::fs::canonicalize(from)?;
    let rel = pathdiff::diff_paths(&target, &from).unwrap_or(target);
    Ok(rel.to_string_lossy().replace('\\', "/"))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.model)?;
    let vocab = read_vocab(&a.data.join(VOCAB_FILE))?;
    let labels = read_labels(&a.data.join(LABELS_FILE))?;
    let data = Dataset::load(&a.data.join(format!("{}.bin", a.split)))?;
    let spec = &ckpt.spec;
    if spec.vocab_size != vocab.len() {
        return Err(Error::Config(format!(
            "vocabulary size mismatch: model has {}, {} has {}",
            spec.vocab_size,
            VOCAB_FILE,
            vocab.len()
        )));
    }
    if spec.num_classes != labels.len() {
        return Err(Error::Config(format!(
            "class count mismatch: model has {}, {} has {}",
            spec.num_classes,
            LABELS_FILE,
            labels.len()
        )));
    }
    let pass = evaluate_pass(&ckpt.params, spec, &data)?;
    let truth: Vec<usize> = data.examples.iter().map(|e| e.label).collect();
    let report = ClassReport::from_predictions(&truth, &pass.predictions, &labels)?;
    let text = render_report(&report);
    print!("{text}");
    if let Some(path) = &a.report {
        std::fs::write(path, &text)?;
    }
    if let Some(path) = &a.json {
        let json = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
        std::fs::write(path, json + "\n")?;
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.model)?;
    let vocab = read_vocab(&a.vocab)?;
    let labels = read_labels(&a.labels)?;
    let spec = &ckpt.spec;
    if spec.vocab_size != vocab.len() || spec.num_classes != labels.len() {
        return Err(Error::Config(format!(
            "model expects {} terms and {} classes, artifacts have {} and {}",
            spec.vocab_size,
            spec.num_classes,
            vocab.len(),
            labels.len()
        )));
    }
    let ids = encode_sequence(&normalize(&a.text), &vocab, spec.max_len, a.truncate);
    let (class, probs) = predict(&ckpt.params, spec, &ids)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{}", labels.name(class))?;
    for (label, p) in labels.labels().iter().zip(round_to_sum(&probs, 4)) {
        writeln!(stdout, "{label}:{p}")?;
    }
    Ok(())
}

/// Formats probabilities with `digits` decimals so that the printed values
/// add up to exactly one. Units are handed out by largest remainder.
pub fn round_to_sum(probs: &[f64], digits: u32) -> Vec<String> {
    let scale = 10f64.powi(digits as i32);
    let total = scale as i64;
    let scaled: Vec<f64> = probs.iter().map(|p| p * scale).collect();
    let mut units: Vec<i64> = scaled.iter().map(|s| s.floor() as i64).collect();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (scaled[i] - scaled[i].floor(), scaled[j] - scaled[j].floor());
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    let missing = total - units.iter().sum::<i64>();
    for &i in order.iter().take(missing.max(0) as usize) {
        units[i] += 1;
    }
    let width = digits as usize;
    units
        .iter()
        .map(|&u| format!("{}.{:0width$}", u / total, u % total))
        .collect()
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n: a.n,
        num_classes: a.classes,
        vocab_size: a.vocab_size,
        len_range: (a.min_len, a.max_len),
        signal: a.signal,
        seed: resolve_seed(a.seed, None)?,
    };
    let docs = gen_synthetic_corpus(&spec)?;
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(&a.out)?;
    write_csv(&docs, std::io::BufWriter::new(file))?;
    println!("wrote {} records to {}", docs.len(), a.out.display());
    Ok(())
}
