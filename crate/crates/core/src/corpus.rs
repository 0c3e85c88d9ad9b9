//! Occurrence records: ingestion, cleaning, label inventory, stratified
//! splitting, and a synthetic generator for desk-scale experiments.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Rng;

/// One occurrence record.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub narrative: String,
    /// Phase-of-flight label.
    pub label: String,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        narrative: impl Into<String>,
        label: impl Into<String>,
    ) -> Self {
        Document {
            id: id.into(),
            narrative: narrative.into(),
            label: label.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(Error::Argument(format!(
                "unknown format {other:?} (expected csv or jsonl)"
            ))),
        }
    }
}

/// Ordered set of distinct class labels; the position of a label is its class index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl LabelSet {
    /// Sorts and deduplicates `labels`.
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut sorted: Vec<String> = labels.into_iter().map(Into::into).collect();
        sorted.sort();
        sorted.dedup();
        let index = sorted
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        LabelSet {
            labels: sorted,
            index,
        }
    }

    /// Keeps the given order; used when reading `labels.txt` back.
    pub fn from_ordered(labels: Vec<String>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Argument(format!("duplicate label {l:?}")));
            }
        }
        Ok(LabelSet { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.labels[index]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub val_fraction_of_train: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            val_fraction_of_train: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "test fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if !(self.val_fraction_of_train >= 0.0 && self.val_fraction_of_train < 1.0) {
            return Err(Error::Argument(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.val_fraction_of_train
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub train: Vec<Document>,
    pub val: Vec<Document>,
    pub test: Vec<Document>,
}

pub fn load_records(path: &Path, format: Format) -> Result<Vec<Document>> {
    let file = File::open(path)?;
    match format {
        Format::Csv => read_csv(file),
        Format::Jsonl => read_jsonl(file),
    }
}

fn synthesized_id(line: u64) -> String {
    format!("{line:06}")
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<Document>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
    };
    let narrative_col = column("Narrative").ok_or_else(|| Error::Schema("Narrative".into()))?;
    let pof_col = column("POF").ok_or_else(|| Error::Schema("POF".into()))?;
    let id_col = column("Id");

    let mut docs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let field = |col: usize, name: &str| {
            record
                .get(col)
                .map(str::to_owned)
                .ok_or_else(|| Error::Schema(name.into()))
        };
        let id = match id_col {
            Some(c) => field(c, "Id")?,
            None => synthesized_id(row as u64 + 1),
        };
        docs.push(Document {
            id,
            narrative: field(narrative_col, "Narrative")?,
            label: field(pof_col, "POF")?,
        });
    }
    Ok(docs)
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

pub fn read_jsonl<R: std::io::Read>(input: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let text = |key: &str| -> Result<Option<String>> {
            match value.get(key) {
                None | Some(serde_json::Value::Null) => Ok(None),
                Some(serde_json::Value::String(s)) => Ok(Some(s.clone())),
                Some(serde_json::Value::Number(n)) if key == "id" => Ok(Some(n.to_string())),
                Some(_) => Err(Error::Schema(key.into())),
            }
        };
        let narrative = text("narrative")?.ok_or_else(|| Error::Schema("narrative".into()))?;
        let label = text("pof")?.ok_or_else(|| Error::Schema("pof".into()))?;
        let id = text("id")?.unwrap_or_else(|| synthesized_id(line_no));
        docs.push(Document {
            id,
            narrative,
            label,
        });
    }
    Ok(docs)
}

/// Drops blank narratives, blank labels and exact (narrative, label)
/// duplicates. Order and first occurrences are preserved.
pub fn clean_records(docs: &[Document]) -> Vec<Document> {
    let mut seen = HashSet::new();
    docs.iter()
        .filter(|d| !d.narrative.trim().is_empty() && !d.label.trim().is_empty())
        .filter(|d| seen.insert((d.narrative.as_str(), d.label.as_str())))
        .cloned()
        .collect()
}

pub fn label_inventory(docs: &[Document]) -> LabelSet {
    LabelSet::new(docs.iter().map(|d| d.label.clone()))
}

/// `floor(n·fraction)`, tolerant of representation error just below an integer.
pub fn fraction_count(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction + 1e-9).floor() as usize
}

/// Per-class proportional split. Each class sends `floor(n_c·test)` to test,
/// then `floor(val·remaining)` to validation, the rest to train. Lists keep
/// the input order.
pub fn stratified_split(docs: &[Document], spec: &SplitSpec) -> Result<Split> {
    if docs.is_empty() {
        return Err(Error::Argument(
            "cannot split an empty document list".into(),
        ));
    }
    spec.validate()?;

    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, d) in docs.iter().enumerate() {
        by_class.entry(d.label.as_str()).or_default().push(i);
    }

    #[derive(Clone, Copy)]
    enum Part {
        Train,
        Val,
        Test,
    }
    let mut assignment = vec![Part::Train; docs.len()];
    let mut rng = Rng::new(spec.seed);
    for members in by_class.values_mut() {
        rng.shuffle(members);
        let n_test = fraction_count(members.len(), spec.test_fraction);
        let n_val = fraction_count(members.len() - n_test, spec.val_fraction_of_train);
        for (k, &i) in members.iter().enumerate() {
            assignment[i] = if k < n_test {
                Part::Test
            } else if k < n_test + n_val {
                Part::Val
            } else {
                Part::Train
            };
        }
    }

    let mut split = Split::default();
    for (d, part) in docs.iter().zip(assignment) {
        match part {
            Part::Train => split.train.push(d.clone()),
            Part::Val => split.val.push(d.clone()),
            Part::Test => split.test.push(d.clone()),
        }
    }
    Ok(split)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub num_classes: usize,
    pub vocab_size: usize,
    /// Inclusive token-count range per narrative.
    pub len_range: (usize, usize),
    /// Probability that a token comes from the class keyword pool.
    pub signal: f64,
    pub seed: u64,
}

/// Number of keyword terms reserved for each class.
pub const KEYWORDS_PER_CLASS: usize = 10;

/// Keyword term `j` of class `c`. Terms survive text normalization unchanged.
pub fn keyword_term(class: usize, j: usize) -> String {
    format!("kw{class}x{j}")
}

pub fn background_term(i: usize) -> String {
    format!("bg{i}")
}

/// Generates labelled narratives whose class is carried by disjoint keyword
/// pools mixed into shared background vocabulary.
///
/// Document `i` belongs to `class_{i mod K}`. When the background pool is
/// empty (`vocab_size == 10·K`) non-signal tokens are drawn from the union of
/// all keyword pools.
pub fn gen_synthetic_corpus(spec: &SyntheticSpec) -> Result<Vec<Document>> {
    let k = spec.num_classes;
    if k < 2 {
        return Err(Error::Argument(
            "synthetic corpus needs at least 2 classes".into(),
        ));
    }
    if spec.vocab_size < KEYWORDS_PER_CLASS * k {
        return Err(Error::Argument(format!(
            "vocab size {} is below {} keyword terms",
            spec.vocab_size,
            KEYWORDS_PER_CLASS * k
        )));
    }
    if !(spec.signal > 0.0 && spec.signal <= 1.0) {
        return Err(Error::Argument(format!(
            "signal must lie in (0, 1], got {}",
            spec.signal
        )));
    }
    let (lo, hi) = spec.len_range;
    if lo == 0 || lo > hi {
        return Err(Error::Argument(format!(
            "length range ({lo}, {hi}) must satisfy 1 <= min <= max"
        )));
    }

    let background_len = spec.vocab_size - KEYWORDS_PER_CLASS * k;
    let mut rng = Rng::new(spec.seed);
    let mut docs = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let class = i % k;
        let len = lo + rng.below(hi - lo + 1);
        let tokens: Vec<String> = (0..len)
            .map(|_| {
                if rng.next_f64() < spec.signal {
                    keyword_term(class, rng.below(KEYWORDS_PER_CLASS))
                } else if background_len > 0 {
                    background_term(rng.below(background_len))
                } else {
                    let t = rng.below(KEYWORDS_PER_CLASS * k);
                    keyword_term(t / KEYWORDS_PER_CLASS, t % KEYWORDS_PER_CLASS)
                }
            })
            .collect();
        docs.push(Document {
            id: format!("syn{i:06}"),
            narrative: tokens.join(" "),
            label: format!("class_{class}"),
        });
    }
    Ok(docs)
}

/// Writes documents in the ingestion schema (`Id,Narrative,POF`).
pub fn write_csv<W: std::io::Write>(docs: &[Document], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        kind => Error::Argument(format!("{kind:?}")),
    };
    writer
        .write_record(["Id", "Narrative", "POF"])
        .map_err(io)?;
    for d in docs {
        writer
            .write_record([&d.id, &d.narrative, &d.label])
            .map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}
