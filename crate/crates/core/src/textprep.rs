//! Narrative normalization, the capped vocabulary, and fixed-length encoding.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSet;
use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const OOV_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<PAD>";
pub const OOV_TOKEN: &str = "<OOV>";

pub const DEFAULT_MAX_TERMS: usize = 100_000;
pub const DEFAULT_MAX_LEN: usize = 2000;

const STOPWORD_FILE: &str = include_str!("../data/stopwords.txt");

/// Suffixes tried longest first; one is stripped when at least three characters remain.
const SUFFIXES: [&str; 4] = ["ing", "ed", "es", "s"];
const MIN_STEM: usize = 3;

pub fn stopwords() -> &'static HashSet<&'static str> {
    static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        STOPWORD_FILE
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .collect()
    })
}

pub fn stem(token: &str) -> &str {
    for suffix in SUFFIXES {
        if let Some(base) = token.strip_suffix(suffix) {
            if base.len() >= MIN_STEM {
                return base;
            }
        }
    }
    token
}

/// Lowercase, keep `[a-z0-9]` runs, drop stopwords and pure-digit tokens, stem.
pub fn normalize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| {
            if c.is_ascii_lowercase() || c.is_ascii_digit() {
                c
            } else {
                ' '
            }
        })
        .collect();
    let stop = stopwords();
    cleaned
        .split_whitespace()
        .filter(|t| !stop.contains(t))
        .filter(|t| !t.bytes().all(|b| b.is_ascii_digit()))
        .map(|t| stem(t).to_owned())
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncate {
    /// Keep the first `max_len` tokens.
    #[default]
    Head,
    /// Keep the last `max_len` tokens.
    Tail,
}

impl std::str::FromStr for Truncate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(Truncate::Head),
            "tail" => Ok(Truncate::Tail),
            other => Err(Error::Argument(format!(
                "unknown truncation mode {other:?} (expected head or tail)"
            ))),
        }
    }
}

/// Term ↔ id map. Ids 0 and 1 are PAD and OOV; retained terms occupy 2..V+1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    term_to_id: HashMap<String, u32>,
    id_to_term: Vec<String>,
    max_terms: usize,
}

impl Vocabulary {
    /// Number of retained terms, excluding PAD and OOV.
    pub fn len(&self) -> usize {
        self.id_to_term.len() - 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Size of the id space, `V + 2`.
    pub fn num_ids(&self) -> usize {
        self.id_to_term.len()
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.term_to_id.get(term).copied()
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        self.id_to_term.get(id as usize).map(String::as_str)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (id, term) in self.id_to_term.iter().enumerate() {
            writeln!(out, "{term}\t{id}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: Read>(input: R) -> Result<Self> {
        let mut id_to_term = Vec::new();
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            let parse_err = |message: String| Error::Parse {
                line: i as u64 + 1,
                message,
            };
            let (term, id) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected term<TAB>id".into()))?;
            let id: usize = id
                .parse()
                .map_err(|_| parse_err(format!("bad id {id:?}")))?;
            if id != i {
                return Err(parse_err(format!("id {id} out of sequence, expected {i}")));
            }
            let expected_reserved = match i {
                0 => Some(PAD_TOKEN),
                1 => Some(OOV_TOKEN),
                _ => None,
            };
            if let Some(reserved) = expected_reserved {
                if term != reserved {
                    return Err(parse_err(format!("expected {reserved} at id {i}")));
                }
            }
            id_to_term.push(term.to_owned());
        }
        if id_to_term.len() < 2 {
            return Err(Error::Parse {
                line: id_to_term.len() as u64 + 1,
                message: "vocabulary is missing the reserved PAD/OOV lines".into(),
            });
        }
        let term_to_id: HashMap<String, u32> = id_to_term[2..]
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + 2))
            .collect();
        if term_to_id.len() != id_to_term.len() - 2 {
            return Err(Error::Parse {
                line: 0,
                message: "duplicate term in vocabulary".into(),
            });
        }
        let max_terms = term_to_id.len().max(1);
        Ok(Vocabulary {
            term_to_id,
            id_to_term,
            max_terms,
        })
    }
}

/// Ranks terms by frequency (descending) then lexicographically and keeps the top `max_terms`.
pub fn build_vocab<T: AsRef<[String]>>(token_lists: &[T], max_terms: usize) -> Result<Vocabulary> {
    if max_terms == 0 {
        return Err(Error::Argument("vocabulary cap must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for list in token_lists {
        for tok in list.as_ref() {
            *counts.entry(tok.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_terms);

    let mut id_to_term = vec![PAD_TOKEN.to_owned(), OOV_TOKEN.to_owned()];
    let mut term_to_id = HashMap::with_capacity(ranked.len());
    for (term, _) in ranked {
        term_to_id.insert(term.to_owned(), id_to_term.len() as u32);
        id_to_term.push(term.to_owned());
    }
    Ok(Vocabulary {
        term_to_id,
        id_to_term,
        max_terms,
    })
}

/// Maps tokens to ids and pads with PAD at the front or truncates to exactly `max_len`.
pub fn encode_sequence<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    max_len: usize,
    truncate: Truncate,
) -> Vec<u32> {
    let kept = if tokens.len() > max_len {
        match truncate {
            Truncate::Head => &tokens[..max_len],
            Truncate::Tail => &tokens[tokens.len() - max_len..],
        }
    } else {
        tokens
    };
    let mut ids = vec![PAD_ID; max_len - kept.len()];
    ids.extend(kept.iter().map(|t| vocab.id(t.as_ref()).unwrap_or(OOV_ID)));
    ids
}

pub fn encode_label(label: &str, labels: &LabelSet) -> Result<Vec<f64>> {
    let index = labels
        .index_of(label)
        .ok_or_else(|| Error::Argument(format!("unknown label {label:?}")))?;
    let mut onehot = vec![0.0; labels.len()];
    onehot[index] = 1.0;
    Ok(onehot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn stopword_list_is_the_classic_127() {
        assert_eq!(stopwords().len(), 127);
        assert!(stopwords().contains("the"));
        assert!(stopwords().contains("don"));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize("The aircraft LANDED hard."),
            toks(&["aircraft", "land", "hard"])
        );
        assert!(normalize("").is_empty());
        assert_eq!(normalize("runway 27R"), toks(&["runway", "27r"]));
        assert_eq!(normalize("Flight 1234 on 12/31/2020"), toks(&["flight"]));
        assert_eq!(normalize("didn't"), toks(&["didn"]));
    }

    #[test]
    fn stemmer_rules() {
        assert_eq!(stem("taxiing"), "taxi");
        assert_eq!(stem("landed"), "land");
        assert_eq!(stem("engines"), "engin");
        assert_eq!(stem("wings"), "wing");
        assert_eq!(stem("sing"), "sing");
        assert_eq!(stem("gas"), "gas");
        // "es" would leave two characters; the shorter "s" still applies
        assert_eq!(stem("uses"), "use");
    }

    #[test]
    fn vocab_examples() {
        let v = build_vocab(&[toks(&["c", "a", "b"])], DEFAULT_MAX_TERMS).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(
            (v.id("a"), v.id("b"), v.id("c")),
            (Some(2), Some(3), Some(4))
        );

        let corpus = [
            toks(&["a", "a", "a", "b", "b", "c"]),
            toks(&["b", "b", "b", "a", "a"]),
        ];
        let v = build_vocab(&corpus, 2).unwrap();
        assert_eq!((v.id("a"), v.id("b"), v.id("c")), (Some(2), Some(3), None));

        let v = build_vocab(&corpus, 1).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(
            encode_sequence(&toks(&["b", "c"]), &v, 2, Truncate::Head),
            vec![OOV_ID, OOV_ID]
        );

        assert!(build_vocab(&corpus, 0).is_err());
    }

    #[test]
    fn encode_examples() {
        let v = build_vocab(&[toks(&["t2", "t3"])], 10).unwrap();
        assert_eq!(
            encode_sequence(&toks(&["t2", "t3"]), &v, 5, Truncate::Head),
            vec![0, 0, 0, 2, 3]
        );
        let seven = toks(&["t2", "t3", "t2", "t3", "zz", "t3", "t2"]);
        assert_eq!(
            encode_sequence(&seven, &v, 5, Truncate::Head),
            vec![2, 3, 2, 3, 1]
        );
        assert_eq!(
            encode_sequence(&seven, &v, 5, Truncate::Tail),
            vec![2, 3, 1, 3, 2]
        );
        assert_eq!(
            encode_sequence(&toks(&["nope"]), &v, 1, Truncate::Head),
            vec![OOV_ID]
        );
        assert_eq!(
            encode_sequence::<String>(&[], &v, 3, Truncate::Head),
            vec![0, 0, 0]
        );
    }

    #[test]
    fn label_encoding() {
        let seven = LabelSet::new([
            "Approach", "Enroute", "Landing", "Standing", "Takeoff", "Taxi", "Unknown",
        ]);
        assert_eq!(
            encode_label("Approach", &seven).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(encode_label("x", &LabelSet::new(["x"])).unwrap(), vec![1.0]);
        let err = encode_label("Cruise", &seven).unwrap_err();
        assert!(err.to_string().contains("Cruise"));
    }

    #[test]
    fn tsv_round_trip() {
        let v = build_vocab(&[toks(&["zeta", "alpha", "alpha"])], 10).unwrap();
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("<PAD>\t0\n<OOV>\t1\nalpha\t2\nzeta\t3\n"));
        let back = Vocabulary::read_tsv(buf.as_slice()).unwrap();
        assert_eq!(back.id("zeta"), Some(3));
        assert_eq!(back.num_ids(), 4);
        assert!(Vocabulary::read_tsv("<OOV>\t0\n".as_bytes()).is_err());
        assert!(Vocabulary::read_tsv("<PAD>\t0\n<OOV>\t1\nx\t3\n".as_bytes()).is_err());
    }
}
