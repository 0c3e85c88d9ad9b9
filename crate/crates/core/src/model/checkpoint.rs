//! Checkpoint layout, all integers little-endian:
//!
//! ```text
//! "FPNN" | u32 version = 1 | u32 header_len | header (JSON, header_len bytes) | f64 payload
//! ```
//!
//! The header carries the architecture, the gate packing order, the
//! vocabulary path relative to the checkpoint, and a manifest of
//! `(name, shape, byte offset)` per tensor. Offsets are relative to the start
//! of the payload and tensors are stored contiguously in manifest order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchSpec, ModelParams};
use crate::error::{Error, Result};
use crate::rnn::{GRU_GATE_ORDER, LSTM_GATE_ORDER};

pub const MAGIC: &[u8; 4] = b"FPNN";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct GateOrder {
    lstm: String,
    gru: String,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: ArchSpec,
    gate_order: GateOrder,
    vocab: Option<String>,
    tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub spec: ArchSpec,
    /// Vocabulary file, relative to the checkpoint's directory.
    pub vocab: Option<String>,
}

pub fn write_checkpoint(
    params: &ModelParams,
    spec: &ArchSpec,
    vocab: Option<&str>,
) -> Result<Vec<u8>> {
    params.check_shapes(spec)?;
    let mut offset = 0u64;
    let tensors = params
        .tensors()
        .into_iter()
        .map(|(name, m)| {
            let entry = TensorEntry {
                name,
                shape: [m.rows(), m.cols()],
                offset,
            };
            offset += 8 * m.len() as u64;
            entry
        })
        .collect();
    let header = Header {
        arch: spec.clone(),
        gate_order: GateOrder {
            lstm: LSTM_GATE_ORDER.into(),
            gru: GRU_GATE_ORDER.into(),
        },
        vocab: vocab.map(str::to_owned),
        tensors,
    };
    let header = serde_json::to_vec(&header).map_err(|e| Error::format("header", e.to_string()))?;

    let mut buf = Vec::with_capacity(12 + header.len() + offset as usize);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for (_, m) in params.tensors() {
        for v in m.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

fn read_u32(bytes: &[u8], at: usize, field: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format(field, "file truncated"))
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format("magic", "not an FPNN checkpoint"));
    }
    let version = read_u32(bytes, 4, "version")?;
    if version != VERSION {
        return Err(Error::format(
            "version",
            format!("unsupported version {version}"),
        ));
    }
    let header_len = read_u32(bytes, 8, "header_length")? as usize;
    let header_bytes = bytes
        .get(12..12 + header_len)
        .ok_or_else(|| Error::format("header_length", "header runs past end of file"))?;
    let header: Header =
        serde_json::from_slice(header_bytes).map_err(|e| Error::format("header", e.to_string()))?;
    header
        .arch
        .validate()
        .map_err(|e| Error::format("arch", e.to_string()))?;
    if header.gate_order.lstm != LSTM_GATE_ORDER || header.gate_order.gru != GRU_GATE_ORDER {
        return Err(Error::format(
            "gate_order",
            format!(
                "expected lstm {LSTM_GATE_ORDER} and gru {GRU_GATE_ORDER}, found {} and {}",
                header.gate_order.lstm, header.gate_order.gru
            ),
        ));
    }

    let mut params = ModelParams::zeros(&header.arch);
    let expected: Vec<(String, (usize, usize))> = params
        .tensors()
        .into_iter()
        .map(|(n, m)| (n, m.shape()))
        .collect();
    if header.tensors.len() != expected.len() {
        return Err(Error::format(
            "tensors",
            format!(
                "manifest lists {} tensors, architecture implies {}",
                header.tensors.len(),
                expected.len()
            ),
        ));
    }
    let payload = &bytes[12 + header_len..];
    let mut offset = 0u64;
    for (i, (entry, (name, shape))) in header.tensors.iter().zip(&expected).enumerate() {
        let field = format!("tensors[{i}]");
        if &entry.name != name {
            return Err(Error::format(
                field,
                format!("expected {name}, found {}", entry.name),
            ));
        }
        if (entry.shape[0], entry.shape[1]) != *shape {
            return Err(Error::format(
                format!("{field}.shape"),
                format!(
                    "{name} declared {}x{} but architecture implies {}x{}",
                    entry.shape[0], entry.shape[1], shape.0, shape.1
                ),
            ));
        }
        if entry.offset != offset {
            return Err(Error::format(
                format!("{field}.offset"),
                format!("expected byte offset {offset}, found {}", entry.offset),
            ));
        }
        offset += 8 * (shape.0 * shape.1) as u64;
    }
    if payload.len() as u64 != offset {
        return Err(Error::format(
            "payload",
            format!("expected {offset} bytes, found {}", payload.len()),
        ));
    }

    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for m in params.tensors_mut() {
        for slot in m.as_mut_slice() {
            *slot = values.next().expect("payload length checked");
        }
    }
    Ok(Checkpoint {
        params,
        spec: header.arch,
        vocab: header.vocab,
    })
}

pub fn save_checkpoint(
    params: &ModelParams,
    spec: &ArchSpec,
    vocab: Option<&str>,
    path: &Path,
) -> Result<()> {
    fs::write(path, write_checkpoint(params, spec, vocab)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build, NAMED_VARIANTS};
    use crate::tensor::Rng;

    fn spec(cells: &str) -> ArchSpec {
        ArchSpec {
            cells: cells.parse().unwrap(),
            embed_dim: 2,
            hidden: 3,
            dense_hidden: 2,
            num_classes: 2,
            max_len: 4,
            vocab_size: 5,
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        for name in NAMED_VARIANTS {
            let s = spec(name);
            let m = build(&s, &mut Rng::new(3)).unwrap();
            let bytes = write_checkpoint(&m, &s, Some("data/vocab.tsv")).unwrap();
            let ck = read_checkpoint(&bytes).unwrap();
            assert_eq!(ck.spec, s);
            assert_eq!(ck.vocab.as_deref(), Some("data/vocab.tsv"));
            let bits =
                |p: &ModelParams| p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&ck.params), bits(&m));
            assert_eq!(
                write_checkpoint(&ck.params, &ck.spec, ck.vocab.as_deref()).unwrap(),
                bytes
            );
        }
    }

    #[test]
    fn header_records_cells_in_order() {
        let s = spec("lstm+bilstm");
        let m = build(&s, &mut Rng::new(3)).unwrap();
        let bytes = write_checkpoint(&m, &s, None).unwrap();
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[12..12 + len]).unwrap();
        assert!(header.contains("\"cells\":\"lstm+bilstm\""));
        assert!(header.contains("\"lstm\":\"i,f,g,o\""));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let s = spec("lstm");
        let m = build(&s, &mut Rng::new(3)).unwrap();
        let bytes = write_checkpoint(&m, &s, None).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(
            matches!(read_checkpoint(&bad), Err(Error::Format { field, .. }) if field == "magic")
        );

        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(
            matches!(read_checkpoint(&bad), Err(Error::Format { field, .. }) if field == "version")
        );

        let bad = &bytes[..bytes.len() - 8];
        assert!(
            matches!(read_checkpoint(bad), Err(Error::Format { field, .. }) if field == "payload")
        );

        assert!(matches!(
            read_checkpoint(&bytes[..20]),
            Err(Error::Format { .. })
        ));
        assert!(matches!(read_checkpoint(&[]), Err(Error::Format { .. })));
    }

    #[test]
    fn manifest_shape_must_match_architecture() {
        let s = spec("lstm");
        let m = build(&s, &mut Rng::new(3)).unwrap();
        let bytes = write_checkpoint(&m, &s, None).unwrap();
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[12..12 + len]).unwrap();
        // W of the LSTM is 2x12; claim 11 columns instead
        let tampered = header.replacen("\"shape\":[2,12]", "\"shape\":[2,11]", 1);
        assert_ne!(tampered, header);
        let mut bad = Vec::new();
        bad.extend_from_slice(&bytes[..8]);
        bad.extend_from_slice(&(tampered.len() as u32).to_le_bytes());
        bad.extend_from_slice(tampered.as_bytes());
        bad.extend_from_slice(&bytes[12 + len..]);
        match read_checkpoint(&bad) {
            Err(Error::Format { field, message }) => {
                assert!(field.ends_with(".shape"), "{field}");
                assert!(message.contains("2x11"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
