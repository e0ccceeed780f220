//! `LMLD` binary dataset files.
//!
//! Layout (all integers little-endian):
//!
//! | bytes        | content                                            |
//! |--------------|----------------------------------------------------|
//! | 4            | magic `LMLD`                                       |
//! | 1            | version, currently 1                               |
//! | 4            | `u32` length of the JSON header                    |
//! | header len   | UTF-8 JSON `{"n", "d", "label_sentinel", "name"}`  |
//! | 4 · n · d    | `f32` features, row-major                          |
//! | n            | `i8` labels                                        |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, DEFAULT_UNLABELED};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

const MAGIC: &[u8; 4] = b"LMLD";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmldHeader {
    pub n: usize,
    pub d: usize,
    pub label_sentinel: i8,
    pub name: String,
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<Dataset> {
    load_binary_with_header(path).map(|(ds, _)| ds)
}

pub fn load_binary_with_header(path: impl AsRef<Path>) -> Result<(Dataset, LmldHeader)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Writes `ds` as an `LMLD` file; features are narrowed to `f32`.
pub fn save_binary(ds: &Dataset, label_sentinel: Option<i8>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(ds, label_sentinel.unwrap_or(DEFAULT_UNLABELED))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn encode(ds: &Dataset, label_sentinel: i8) -> Result<Vec<u8>> {
    let header = LmldHeader {
        n: ds.len(),
        d: ds.feature_dim(),
        label_sentinel,
        name: ds.name.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(9 + json.len() + 4 * header.n * header.d + header.n);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for &v in ds.features().as_slice() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::Format(format!("value {v} does not fit in 32 bits")));
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    out.extend(ds.labels().iter().map(|&l| l as u8));
    Ok(out)
}

fn decode(bytes: &[u8]) -> Result<(Dataset, LmldHeader)> {
    if bytes.len() < 9 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing LMLD magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!(
            "unsupported LMLD version {}",
            bytes[4]
        )));
    }
    let hlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let body = &bytes[9..];
    if body.len() < hlen {
        return Err(Error::Format("truncated header".into()));
    }
    let header: LmldHeader = serde_json::from_slice(&body[..hlen])
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let payload = &body[hlen..];
    let cells = header
        .n
        .checked_mul(header.d)
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
    let expected = cells
        .checked_mul(4)
        .and_then(|b| b.checked_add(header.n))
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let (feat, labels) = payload.split_at(cells * 4);
    let values: Vec<f64> = feat
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let features =
        Matrix::new(header.n, header.d, values).map_err(|e| Error::Format(e.to_string()))?;
    let labels = labels.iter().map(|&b| b as i8).collect();
    let ds = Dataset::new(header.name.clone(), features, labels)?;
    Ok((ds, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::RngState;

    fn minimal_bytes() -> Vec<u8> {
        let json = br#"{"n":1,"d":2,"label_sentinel":-1,"name":"one"}"#;
        let mut b = b"LMLD\x01".to_vec();
        b.extend_from_slice(&(json.len() as u32).to_le_bytes());
        b.extend_from_slice(json);
        b.extend_from_slice(&0.5f32.to_le_bytes());
        b.extend_from_slice(&0.25f32.to_le_bytes());
        b.push(1);
        b
    }

    #[test]
    fn minimal_file() {
        let (ds, header) = decode(&minimal_bytes()).unwrap();
        assert_eq!(ds.features().row(0), &[0.5, 0.25]);
        assert_eq!(ds.labels(), &[1]);
        assert_eq!(header.label_sentinel, -1);
        assert_eq!(ds.name, "one");
    }

    #[test]
    fn encoder_is_bit_exact_with_hand_layout() {
        let (ds, _) = decode(&minimal_bytes()).unwrap();
        assert_eq!(encode(&ds, -1).unwrap(), minimal_bytes());
    }

    #[test]
    fn bad_magic_and_version() {
        let mut b = minimal_bytes();
        b[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&b), Err(Error::Format(_))));
        let mut b = minimal_bytes();
        b[4] = 2;
        assert!(matches!(decode(&b), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload() {
        let b = minimal_bytes();
        assert!(matches!(decode(&b[..b.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(decode(&b[..12]), Err(Error::Format(_))));
    }

    #[test]
    fn round_trip_is_exact_at_f32() {
        let mut rng = RngState::new(50);
        let data: Vec<f64> = (0..500).map(|_| rng.normal()).collect();
        let labels = (0..50).map(|_| rng.below(3) as i8 - 1).collect();
        let ds = Dataset::new("r", Matrix::new(50, 10, data).unwrap(), labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.lmld");
        save_binary(&ds, None, &path).unwrap();
        let back = load_binary(&path).unwrap();
        assert_eq!(back.labels(), ds.labels());
        for (a, b) in back
            .features()
            .as_slice()
            .iter()
            .zip(ds.features().as_slice())
        {
            assert_eq!(*a, *b as f32 as f64);
        }
    }
}
