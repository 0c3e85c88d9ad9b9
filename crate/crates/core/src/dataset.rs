//! Encoded examples and the `FPDS` split-file format.
//!
//! Layout, all little-endian: magic `FPDS`, u32 version, u32 max_len,
//! u32 class count, u64 example count, then per example `max_len` u32 ids
//! followed by the u32 class index.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    clean_records, label_inventory, stratified_split, Document, LabelSet, SplitSpec,
};
use crate::error::{Error, Result};
use crate::textprep::{
    build_vocab, encode_sequence, normalize, Truncate, Vocabulary, DEFAULT_MAX_LEN,
    DEFAULT_MAX_TERMS,
};

pub const MAGIC: &[u8; 4] = b"FPDS";
pub const VERSION: u32 = 1;

/// A fixed-length id sequence and its class index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedExample {
    pub ids: Vec<u32>,
    pub label: usize,
}

impl EncodedExample {
    pub fn onehot(&self, num_classes: usize) -> Vec<f64> {
        let mut v = vec![0.0; num_classes];
        v[self.label] = 1.0;
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub max_len: usize,
    pub num_classes: usize,
    pub examples: Vec<EncodedExample>,
}

impl Dataset {
    /// Checks every example against the declared dimensions and an id bound.
    pub fn new(max_len: usize, num_classes: usize, examples: Vec<EncodedExample>) -> Result<Self> {
        let ds = Dataset {
            max_len,
            num_classes,
            examples,
        };
        ds.validate(None)?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// `num_ids` bounds the token ids when given (vocabulary size plus the
    /// two reserved ids).
    pub fn validate(&self, num_ids: Option<usize>) -> Result<()> {
        for (i, ex) in self.examples.iter().enumerate() {
            if ex.ids.len() != self.max_len {
                return Err(Error::Config(format!(
                    "example {i} has {} ids, dataset max_len is {}",
                    ex.ids.len(),
                    self.max_len
                )));
            }
            if ex.label >= self.num_classes {
                return Err(Error::Config(format!(
                    "example {i} has class {} but the dataset has {} classes",
                    ex.label, self.num_classes
                )));
            }
            if let Some(bound) = num_ids {
                if let Some(id) = ex.ids.iter().find(|&&id| id as usize >= bound) {
                    return Err(Error::Config(format!(
                        "example {i} has token id {id} outside a vocabulary of {bound} ids"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&to_u32(self.max_len, "max_len")?.to_le_bytes())?;
        out.write_all(&to_u32(self.num_classes, "num_classes")?.to_le_bytes())?;
        out.write_all(&(self.examples.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(4 * (self.max_len + 1));
        for ex in &self.examples {
            buf.clear();
            for id in &ex.ids {
                buf.extend_from_slice(&id.to_le_bytes());
            }
            buf.extend_from_slice(&(ex.label as u32).to_le_bytes());
            out.write_all(&buf)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 {
            return Err(Error::format(
                "header",
                "file shorter than the 24-byte header",
            ));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::format("magic", "expected FPDS"));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::format(
                "version",
                format!("unsupported version {version}"),
            ));
        }
        let max_len = u32_at(8) as usize;
        let num_classes = u32_at(12) as usize;
        let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let record = 4 * (max_len + 1);
        let expected = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(record))
            .and_then(|n| n.checked_add(24));
        if expected != Some(bytes.len()) {
            return Err(Error::format(
                "count",
                format!(
                    "{count} examples of {record} bytes do not fit a payload of {} bytes",
                    bytes.len() - 24
                ),
            ));
        }
        let examples = bytes[24..]
            .chunks_exact(record)
            .map(|chunk| {
                let mut words = chunk
                    .chunks_exact(4)
                    .map(|w| u32::from_le_bytes(w.try_into().unwrap()));
                let ids: Vec<u32> = words.by_ref().take(max_len).collect();
                let label = words.next().unwrap() as usize;
                EncodedExample { ids, label }
            })
            .collect();
        let ds = Dataset {
            max_len,
            num_classes,
            examples,
        };
        ds.validate(None)
            .map_err(|e| Error::format("examples", e.to_string()))?;
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn to_u32(value: usize, field: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::format(field, format!("{value} does not fit in u32")))
}

/// Normalizes and encodes documents whose labels all belong to `labels`.
pub fn encode_documents(
    docs: &[Document],
    vocab: &Vocabulary,
    labels: &LabelSet,
    max_len: usize,
    truncate: Truncate,
) -> Result<Dataset> {
    let examples = docs
        .iter()
        .map(|doc| {
            let label = labels.index_of(&doc.label).ok_or_else(|| {
                Error::Argument(format!("label {:?} is not in the label set", doc.label))
            })?;
            let tokens = normalize(&doc.narrative);
            Ok(EncodedExample {
                ids: encode_sequence(&tokens, vocab, max_len, truncate),
                label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        max_len,
        num_classes: labels.len(),
        examples,
    })
}

/// Preprocessing settings for turning raw documents into split data sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepConfig {
    pub max_len: usize,
    pub vocab_size: usize,
    pub truncate: Truncate,
    pub split: SplitSpec,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            max_len: DEFAULT_MAX_LEN,
            vocab_size: DEFAULT_MAX_TERMS,
            truncate: Truncate::Head,
            split: SplitSpec::default(),
        }
    }
}

/// Everything `prepare` derives from a corpus.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub vocab: Vocabulary,
    pub labels: LabelSet,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Cleans, splits, and encodes `docs`. The vocabulary is built from the
/// training partition only.
pub fn prepare(docs: &[Document], cfg: &PrepConfig) -> Result<Prepared> {
    if cfg.max_len == 0 {
        return Err(Error::Argument("max_len must be at least 1".into()));
    }
    cfg.split.validate()?;
    let docs = clean_records(docs);
    if docs.is_empty() {
        return Err(Error::Schema("no records left after cleaning".into()));
    }
    let labels = label_inventory(&docs);
    let split = stratified_split(&docs, &cfg.split)?;
    let tokens: Vec<Vec<String>> = split
        .train
        .iter()
        .map(|d| normalize(&d.narrative))
        .collect();
    let vocab = build_vocab(&tokens, cfg.vocab_size)?;
    let encode =
        |part: &[Document]| encode_documents(part, &vocab, &labels, cfg.max_len, cfg.truncate);
    let (train, val, test) = (
        encode(&split.train)?,
        encode(&split.val)?,
        encode(&split.test)?,
    );
    Ok(Prepared {
        vocab,
        labels,
        train,
        val,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        Dataset::new(
            3,
            2,
            vec![
                EncodedExample {
                    ids: vec![0, 2, 3],
                    label: 1,
                },
                EncodedExample {
                    ids: vec![4, 1, 2],
                    label: 0,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn byte_layout() {
        let mut bytes = Vec::new();
        sample().write(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 24 + 2 * 16);
        assert_eq!(&bytes[..4], b"FPDS");
        assert_eq!(bytes[4..8], 1u32.to_le_bytes());
        assert_eq!(bytes[8..12], 3u32.to_le_bytes());
        assert_eq!(bytes[12..16], 2u32.to_le_bytes());
        assert_eq!(bytes[16..24], 2u64.to_le_bytes());
        assert_eq!(bytes[24..28], 0u32.to_le_bytes());
        assert_eq!(bytes[36..40], 1u32.to_le_bytes());
    }

    #[test]
    fn round_trip() {
        let mut bytes = Vec::new();
        sample().write(&mut bytes).unwrap();
        assert_eq!(Dataset::from_bytes(&bytes).unwrap(), sample());
    }

    #[test]
    fn rejects_bad_files() {
        let mut bytes = Vec::new();
        sample().write(&mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(
            matches!(Dataset::from_bytes(&bad), Err(Error::Format { field, .. }) if field == "magic")
        );
        let short = &bytes[..bytes.len() - 1];
        assert!(
            matches!(Dataset::from_bytes(short), Err(Error::Format { field, .. }) if field == "count")
        );
        let mut bad_label = bytes.clone();
        let n = bad_label.len();
        bad_label[n - 4..].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            Dataset::from_bytes(&bad_label),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn validate_checks_dimensions() {
        let ds = sample();
        assert!(ds.validate(Some(5)).is_ok());
        assert!(matches!(ds.validate(Some(4)), Err(Error::Config(_))));
        let bad = Dataset::new(
            2,
            2,
            vec![EncodedExample {
                ids: vec![0, 1, 2],
                label: 0,
            }],
        );
        assert!(matches!(bad, Err(Error::Config(_))));
    }

    #[test]
    fn prepare_partitions_the_cleaned_corpus() {
        let docs = crate::corpus::gen_synthetic_corpus(&crate::corpus::SyntheticSpec {
            n: 100,
            num_classes: 4,
            vocab_size: 60,
            len_range: (5, 9),
            signal: 0.8,
            seed: 3,
        })
        .unwrap();
        let cfg = PrepConfig {
            max_len: 8,
            vocab_size: 30,
            ..PrepConfig::default()
        };
        let p = prepare(&docs, &cfg).unwrap();
        assert_eq!(p.train.len() + p.val.len() + p.test.len(), 100);
        assert_eq!(p.test.len(), 20);
        assert_eq!(p.val.len(), 8);
        assert_eq!(p.labels.len(), 4);
        assert!(p.vocab.len() <= 30);
        for ds in [&p.train, &p.val, &p.test] {
            ds.validate(Some(p.vocab.num_ids())).unwrap();
        }
    }

    #[test]
    fn onehot_has_single_one() {
        let ex = EncodedExample {
            ids: vec![],
            label: 2,
        };
        assert_eq!(ex.onehot(4), vec![0.0, 0.0, 1.0, 0.0]);
    }
}
