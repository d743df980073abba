//! Binary weight fixtures.
//!
//! File layout, byte-exact:
//!
//! ```text
//! bytes 0..8    header_len: u64, little-endian
//! bytes 8..8+header_len
//!               UTF-8 JSON: {"entries": [{"name": string,
//!                                         "shape": [u64, ...],
//!                                         "offset": u64,   // bytes into payload
//!                                         "len": u64       // element count
//!                                        }, ...]}
//! bytes 8+header_len..
//!               payload: flat f32 values, little-endian
//! ```
//!
//! `offset` is a byte offset relative to the start of the payload and must be
//! 4-aligned; `len * 4` bytes starting there hold the entry's values in the
//! owner's row-major order. Entries may appear in any order but must not
//! overrun the payload; names are unique. All diagnostics carry the absolute
//! byte offset of the offending region.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HeaderEntry {
    name: String,
    shape: Vec<u64>,
    offset: u64,
    len: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    entries: Vec<HeaderEntry>,
}

/// Named f32 arrays with shapes, loaded from or saved to a fixture file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, (Vec<u64>, Vec<f32>)>,
}

const HEADER_PREFIX_LEN: u64 = 8;

fn format_err(offset: u64, msg: impl Into<String>) -> Error {
    Error::WeightFormat {
        offset,
        msg: msg.into(),
    }
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor. The shape product must equal the data length.
    pub fn insert(&mut self, name: &str, shape: &[usize], data: Vec<f32>) -> Result<()> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                name,
                format!("shape {:?} implies {} values, got {}", shape, n, data.len()),
            ));
        }
        if self.tensors.contains_key(name) {
            return Err(Error::InvalidParam(format!("duplicate weight name {name:?}")));
        }
        self.tensors
            .insert(name.to_string(), (shape.iter().map(|&d| d as u64).collect(), data));
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn shape(&self, name: &str) -> Option<&[u64]> {
        self.tensors.get(name).map(|(s, _)| s.as_slice())
    }

    /// Fetches a tensor, checking the stored shape against the caller's
    /// expectation.
    pub fn get(&self, name: &str, shape: &[usize]) -> Result<&[f32]> {
        let (stored, data) = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::InvalidParam(format!("missing weight {name:?}")))?;
        let want: Vec<u64> = shape.iter().map(|&d| d as u64).collect();
        if stored != &want {
            return Err(Error::shape(
                name,
                format!("stored shape {stored:?}, expected {want:?}"),
            ));
        }
        Ok(data)
    }

    /// Serializes to the fixture layout. Entries are written in name order
    /// with a densely packed payload, so equal stores produce identical bytes.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut payload: Vec<u8> = Vec::new();
        for (name, (shape, data)) in &self.tensors {
            entries.push(HeaderEntry {
                name: name.clone(),
                shape: shape.clone(),
                offset: payload.len() as u64,
                len: data.len() as u64,
            });
            for v in data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = serde_json::to_vec(&Header { entries })
            .map_err(|e| Error::InvalidParam(format!("header serialization: {e}")))?;
        let mut out = Vec::with_capacity(8 + header.len() + payload.len());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(format_err(
                0,
                format!("file is {} bytes, need at least 8 for the header length", bytes.len()),
            ));
        }
        let header_len = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
        let body_len = (bytes.len() as u64) - HEADER_PREFIX_LEN;
        if header_len > body_len {
            return Err(format_err(
                0,
                format!("declared header length {header_len} exceeds remaining {body_len} bytes"),
            ));
        }
        let header_end = (HEADER_PREFIX_LEN + header_len) as usize;
        let header: Header = serde_json::from_slice(&bytes[8..header_end]).map_err(|e| {
            format_err(HEADER_PREFIX_LEN, format!("header is not valid JSON: {e}"))
        })?;
        let payload = &bytes[header_end..];
        if !payload.len().is_multiple_of(4) {
            return Err(format_err(
                header_end as u64,
                format!("payload length {} is not a multiple of 4", payload.len()),
            ));
        }
        let mut store = WeightStore::new();
        for entry in &header.entries {
            let abs = header_end as u64 + entry.offset;
            if entry.offset % 4 != 0 {
                return Err(format_err(
                    abs,
                    format!("entry {:?} offset {} is not 4-aligned", entry.name, entry.offset),
                ));
            }
            let product: u64 = entry.shape.iter().product();
            if product != entry.len {
                return Err(format_err(
                    abs,
                    format!(
                        "entry {:?} shape {:?} implies {} values but declares len {}",
                        entry.name, entry.shape, product, entry.len
                    ),
                ));
            }
            let end = entry.offset.checked_add(entry.len * 4).ok_or_else(|| {
                format_err(abs, format!("entry {:?} extent overflows", entry.name))
            })?;
            if end > payload.len() as u64 {
                return Err(format_err(
                    abs,
                    format!(
                        "entry {:?} needs payload bytes {}..{} but payload has {}",
                        entry.name,
                        entry.offset,
                        end,
                        payload.len()
                    ),
                ));
            }
            let start = entry.offset as usize;
            let data: Vec<f32> = payload[start..end as usize]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(format_err(
                    abs,
                    format!("entry {:?} contains non-finite values", entry.name),
                ));
            }
            if store.tensors.contains_key(&entry.name) {
                return Err(format_err(
                    abs,
                    format!("duplicate entry name {:?}", entry.name),
                ));
            }
            store.tensors.insert(entry.name.clone(), (entry.shape.clone(), data));
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_store() -> WeightStore {
        let mut store = WeightStore::new();
        store.insert("a.weight", &[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        store.insert("a.bias", &[2], vec![-0.5, 0.5]).unwrap();
        store.insert("b.weight", &[1, 1, 1, 1], vec![9.0]).unwrap();
        store
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let store = sample_store();
        store.save(&path).unwrap();
        let loaded = WeightStore::load(&path).unwrap();
        assert_eq!(loaded, store);
        assert_eq!(loaded.get("a.weight", &[2, 3]).unwrap()[4], 5.0);
    }

    #[test]
    fn save_is_deterministic() {
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("w1.bin");
        let p2 = dir.path().join("w2.bin");
        sample_store().save(&p1).unwrap();
        sample_store().save(&p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn insert_checks_shape_product() {
        let mut store = WeightStore::new();
        assert!(store.insert("x", &[2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn get_checks_expected_shape() {
        let store = sample_store();
        assert!(store.get("a.weight", &[3, 2]).is_err());
        assert!(store.get("nope", &[1]).is_err());
    }

    #[test]
    fn short_file_names_offset_zero() {
        let err = WeightStore::from_bytes(&[1, 2, 3]).unwrap_err();
        match err {
            Error::WeightFormat { offset, .. } => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corrupted_header_names_offset_eight() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.bin");
        sample_store().save(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[8] = b'!';
        let err = WeightStore::from_bytes(&bytes).unwrap_err();
        match err {
            Error::WeightFormat { offset, msg } => {
                assert_eq!(offset, 8);
                assert!(msg.contains("JSON"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_payload_names_entry_offset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.bin");
        sample_store().save(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        let err = WeightStore::from_bytes(&bytes).unwrap_err();
        match err {
            Error::WeightFormat { offset, msg } => {
                assert!(offset >= 8, "offset {offset}");
                assert!(msg.contains("payload"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_longer_than_file_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&1000u64.to_le_bytes());
        bytes.extend_from_slice(b"{}");
        let err = WeightStore::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::WeightFormat { offset: 0, .. }));
    }

    #[test]
    fn shape_len_disagreement_rejected() {
        // hand-built file: one entry whose shape product is 2 but len says 1
        let header = br#"{"entries":[{"name":"x","shape":[2],"offset":0,"len":1}]}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(header);
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        let err = WeightStore::from_bytes(&bytes).unwrap_err();
        match err {
            Error::WeightFormat { msg, .. } => assert!(msg.contains("shape"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_finite_payload_rejected() {
        let mut store = WeightStore::new();
        store.insert("x", &[1], vec![1.0]).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.bin");
        store.save(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            WeightStore::from_bytes(&bytes),
            Err(Error::WeightFormat { .. })
        ));
    }
}
