//! Versioned binary container for labeled vector datasets.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "FRDS"
//! version u32      1
//! hlen    u64      header length in bytes
//! header  JSON     {n, d, has_y, y_vocab, g_names, g_vocabs, body_checksum}
//! body:
//!   vectors  n·d f64          row-major
//!   y        n u32            (only when has_y)
//!   g        n u32 per attr   attribute-major
//!   splits   n u8             0 train / 1 dev / 2 test
//! ```
//!
//! `body_checksum` is FNV-1a (64-bit) over the body bytes and is verified on
//! load.

use super::{LabeledDataset, Split};
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"FRDS";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    n: usize,
    d: usize,
    has_y: bool,
    y_vocab: Option<Vec<String>>,
    g_names: Vec<String>,
    g_vocabs: Vec<Vec<String>>,
    body_checksum: u64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

pub fn save_dataset(path: &Path, ds: &LabeledDataset) -> Result<()> {
    let n = ds.len();
    let mut body = Vec::with_capacity(n * ds.dim() * 8 + n * (ds.attribute_count() + 2) * 4);
    for v in ds.vectors().iter() {
        body.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(y) = ds.y() {
        for &l in y {
            body.extend_from_slice(&(l as u32).to_le_bytes());
        }
    }
    for attr in 0..ds.attribute_count() {
        for &l in ds.g(attr) {
            body.extend_from_slice(&(l as u32).to_le_bytes());
        }
    }
    for &s in ds.splits() {
        body.push(s.to_byte());
    }

    let header = Header {
        n,
        d: ds.dim(),
        has_y: ds.y().is_some(),
        y_vocab: ds.y_vocab().map(|v| v.to_vec()),
        g_names: (0..ds.attribute_count())
            .map(|a| ds.g_name(a).to_string())
            .collect(),
        g_vocabs: (0..ds.attribute_count())
            .map(|a| ds.g_vocab(a).to_vec())
            .collect(),
        body_checksum: fnv1a(&body),
    };
    let header_bytes = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;

    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    file.write_all(&header_bytes)?;
    file.write_all(&body)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut file, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a dataset container".into()));
    }
    let mut word = [0u8; 4];
    read_exact(&mut file, &mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Format(format!(
            "container version {version} unsupported (expected {VERSION})"
        )));
    }
    let mut long = [0u8; 8];
    read_exact(&mut file, &mut long)?;
    let hlen = u64::from_le_bytes(long) as usize;
    let mut header_bytes = vec![0u8; hlen];
    read_exact(&mut file, &mut header_bytes)?;
    let header: Header =
        serde_json::from_slice(&header_bytes).map_err(|e| Error::Format(e.to_string()))?;

    let mut body = Vec::new();
    file.read_to_end(&mut body)?;
    let expected = header.n * header.d * 8
        + if header.has_y { header.n * 4 } else { 0 }
        + header.n * header.g_names.len() * 4
        + header.n;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "body is {} bytes, expected {expected}",
            body.len()
        )));
    }
    if fnv1a(&body) != header.body_checksum {
        return Err(Error::Format("body checksum mismatch".into()));
    }

    let mut offset = 0usize;
    let mut values = Vec::with_capacity(header.n * header.d);
    for _ in 0..header.n * header.d {
        values.push(f64::from_le_bytes(body[offset..offset + 8].try_into().unwrap()));
        offset += 8;
    }
    let vectors = Array2::from_shape_vec((header.n, header.d), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    let y = if header.has_y {
        let mut labels = Vec::with_capacity(header.n);
        for _ in 0..header.n {
            labels.push(u32::from_le_bytes(body[offset..offset + 4].try_into().unwrap()) as usize);
            offset += 4;
        }
        Some(labels)
    } else {
        None
    };
    let mut g = Vec::with_capacity(header.g_names.len());
    for _ in 0..header.g_names.len() {
        let mut labels = Vec::with_capacity(header.n);
        for _ in 0..header.n {
            labels.push(u32::from_le_bytes(body[offset..offset + 4].try_into().unwrap()) as usize);
            offset += 4;
        }
        g.push(labels);
    }
    let mut splits = Vec::with_capacity(header.n);
    for _ in 0..header.n {
        splits.push(Split::from_byte(body[offset])?);
        offset += 1;
    }
    LabeledDataset::new(
        vectors,
        y,
        g,
        splits,
        header.y_vocab,
        header.g_vocabs,
        header.g_names,
    )
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format("truncated dataset container".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_mixture, SynthConfig};

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("fairrep-ds-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn roundtrip_is_lossless() {
        let mut cfg = SynthConfig::new(30, 4, vec![2, 3], 2);
        cfg.seed = 9;
        let ds = synth_mixture(&cfg).unwrap();
        let path = tmp("roundtrip");
        save_dataset(&path, &ds).unwrap();
        let back = load_dataset(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(ds.vectors(), back.vectors());
        assert_eq!(ds.y(), back.y());
        assert_eq!(ds.g(0), back.g(0));
        assert_eq!(ds.g(1), back.g(1));
        assert_eq!(ds.splits(), back.splits());
        assert_eq!(ds.y_vocab(), back.y_vocab());
        assert_eq!(ds.g_vocab(1), back.g_vocab(1));
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let mut cfg = SynthConfig::new(20, 3, vec![2], 2);
        cfg.seed = 10;
        let ds = synth_mixture(&cfg).unwrap();
        let path = tmp("trunc");
        save_dataset(&path, &ds).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        let err = load_dataset(&path).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn corrupted_body_fails_checksum() {
        let mut cfg = SynthConfig::new(20, 3, vec![2], 2);
        cfg.seed = 11;
        let ds = synth_mixture(&cfg).unwrap();
        let path = tmp("chk");
        save_dataset(&path, &ds).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 25; // somewhere in the vector block
        bytes[last] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        let err = load_dataset(&path).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn version_mismatch_is_a_format_error() {
        let path = tmp("ver");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FRDS");
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&0u64.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let err = load_dataset(&path).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(matches!(err, Error::Format(_)));
    }
}
