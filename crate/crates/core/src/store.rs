//! Durable state file: a versioned header followed by length-prefixed,
//! checksummed records.
//!
//! ```text
//! header : b"FOGLETDB" | version: u32 LE
//! record : len: u32 LE | crc32(kind ++ payload): u32 LE | kind: u8 | payload[len]
//! ```
//!
//! Payloads are JSON. A file is read completely and validated before any
//! record is handed back, so a truncated or corrupt file never yields partial
//! state.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

pub const MAGIC: &[u8; 8] = b"FOGLETDB";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 12;
const RECORD_HEADER_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum RecordKind {
    InventorySnapshot = 1,
    InventoryOp = 2,
    EngineSnapshot = 3,
}

impl RecordKind {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(RecordKind::InventorySnapshot),
            2 => Some(RecordKind::InventoryOp),
            3 => Some(RecordKind::EngineSnapshot),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a foglet state file")]
    BadMagic,
    #[error("state file version {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("state file truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("checksum mismatch in record at byte {offset}")]
    Checksum { offset: usize },
    #[error("unknown record kind {kind} at byte {offset}")]
    UnknownKind { kind: u8, offset: usize },
    #[error("unexpected record layout: {0}")]
    Layout(String),
    #[error("cannot decode record: {0}")]
    Decode(#[from] serde_json::Error),
}

pub fn encode_header(out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
}

pub fn encode_record(out: &mut Vec<u8>, kind: RecordKind, payload: &[u8]) {
    let mut crc = crc32fast::Hasher::new();
    crc.update(&[kind as u8]);
    crc.update(payload);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc.finalize().to_le_bytes());
    out.push(kind as u8);
    out.extend_from_slice(payload);
}

/// Parses a whole file image.
pub fn decode(bytes: &[u8]) -> Result<Vec<(RecordKind, Vec<u8>)>, StoreError> {
    if bytes.len() < HEADER_LEN {
        return Err(if bytes.starts_with(&MAGIC[..bytes.len().min(8)]) {
            StoreError::Truncated {
                offset: bytes.len(),
            }
        } else {
            StoreError::BadMagic
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(StoreError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(StoreError::VersionMismatch { found: version });
    }
    let mut records = Vec::new();
    let mut off = HEADER_LEN;
    while off < bytes.len() {
        if bytes.len() - off < RECORD_HEADER_LEN {
            return Err(StoreError::Truncated { offset: off });
        }
        let len = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap());
        let kind_byte = bytes[off + 8];
        let start = off + RECORD_HEADER_LEN;
        let end = start
            .checked_add(len)
            .filter(|e| *e <= bytes.len())
            .ok_or(StoreError::Truncated { offset: off })?;
        let mut h = crc32fast::Hasher::new();
        h.update(&[kind_byte]);
        h.update(&bytes[start..end]);
        if h.finalize() != crc {
            return Err(StoreError::Checksum { offset: off });
        }
        let kind = RecordKind::from_u8(kind_byte).ok_or(StoreError::UnknownKind {
            kind: kind_byte,
            offset: off,
        })?;
        records.push((kind, bytes[start..end].to_vec()));
        off = end;
    }
    Ok(records)
}

pub fn read_file(path: &Path) -> Result<Vec<(RecordKind, Vec<u8>)>, StoreError> {
    decode(&std::fs::read(path)?)
}

/// Replaces `path` with the given image via write-to-temp and rename.
pub fn write_atomic(path: &Path, image: &[u8]) -> Result<(), StoreError> {
    let tmp = tmp_path(path);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(image)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Append handle for a record log whose header has already been written.
#[derive(Debug)]
pub struct RecordLog {
    path: PathBuf,
    file: File,
}

impl RecordLog {
    /// Writes `image` (header plus initial records) atomically, then opens the
    /// file for appending.
    pub fn create(path: &Path, image: &[u8]) -> Result<RecordLog, StoreError> {
        write_atomic(path, image)?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(RecordLog {
            path: path.to_owned(),
            file,
        })
    }

    pub fn append(&mut self, kind: RecordKind, payload: &[u8]) -> Result<(), StoreError> {
        let mut buf = Vec::with_capacity(payload.len() + RECORD_HEADER_LEN);
        encode_record(&mut buf, kind, payload);
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image() -> Vec<u8> {
        let mut v = Vec::new();
        encode_header(&mut v);
        encode_record(&mut v, RecordKind::InventorySnapshot, b"{\"a\":1}");
        encode_record(&mut v, RecordKind::InventoryOp, b"[]");
        v
    }

    #[test]
    fn decodes_what_it_encodes() {
        let recs = decode(&image()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].0, RecordKind::InventorySnapshot);
        assert_eq!(recs[1].1, b"[]");
    }

    #[test]
    fn every_truncation_is_an_error() {
        let img = image();
        for cut in 0..img.len() {
            if cut == HEADER_LEN || cut == HEADER_LEN + RECORD_HEADER_LEN + 7 {
                // Record boundaries: a shorter but well-formed file.
                assert!(decode(&img[..cut]).is_ok());
                continue;
            }
            assert!(decode(&img[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn corruption_detected() {
        let mut img = image();
        let last = img.len() - 1;
        img[last] ^= 0xff;
        assert!(matches!(decode(&img), Err(StoreError::Checksum { .. })));
        let mut img = image();
        img[8] = 9;
        assert!(matches!(
            decode(&img),
            Err(StoreError::VersionMismatch { found: 9 })
        ));
        assert!(matches!(decode(b"garbage-file"), Err(StoreError::BadMagic)));
    }

    #[test]
    fn append_log() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("state.db");
        let mut head = Vec::new();
        encode_header(&mut head);
        let mut log = RecordLog::create(&p, &head).unwrap();
        log.append(RecordKind::InventoryOp, b"1").unwrap();
        log.append(RecordKind::InventoryOp, b"2").unwrap();
        let recs = read_file(&p).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(log.path(), p);
    }
}
