//! On-disk form of a [`DataSet`].
//!
//! Files ending in `.json` are JSON; anything else uses a little-endian
//! binary layout:
//!
//! ```text
//! "RTWD" | u16 version | u8 n | u8 0 | u64 count | count x (u32 q, u32 x, u64 t) | 32-byte checksum
//! ```
//!
//! The checksum is SHA-256 over `(z: u32, count: u64)` pairs of the folded
//! histogram in increasing `z`, skipping zero counts. Loading recomputes the
//! histogram from the records and rejects the file on mismatch.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{DataSet, Record};
use super::histogram::Histogram;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"RTWD";
const HEADER_LEN: usize = 16;
const RECORD_LEN: usize = 16;

pub fn folded_checksum(h: &Histogram) -> [u8; 32] {
    let mut sha = Sha256::new();
    for (z, c) in h.iter() {
        sha.update(z.to_le_bytes());
        sha.update(c.to_le_bytes());
    }
    sha.finalize().into()
}

#[derive(Serialize, Deserialize)]
struct JsonDoc {
    schema_version: u16,
    n: usize,
    count: u64,
    folded_sha256: String,
    records: Vec<(u32, u32, u64)>,
}

pub fn to_json(d: &DataSet) -> Result<String> {
    let doc = JsonDoc {
        schema_version: SCHEMA_VERSION,
        n: d.n(),
        count: d.len() as u64,
        folded_sha256: hex::encode(folded_checksum(d.folded())),
        records: d.records().map(|r| (r.q, r.x, r.t)).collect(),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn from_json(s: &str) -> Result<DataSet> {
    let doc: JsonDoc = serde_json::from_str(s)?;
    check_version(doc.schema_version)?;
    let stored: [u8; 32] = hex::decode(&doc.folded_sha256)
        .ok()
        .and_then(|v| v.try_into().ok())
        .ok_or_else(|| Error::Format("folded_sha256 is not a 32-byte hex digest".into()))?;
    let records = doc.records.into_iter().map(|(q, x, t)| Record { q, x, t });
    finish(doc.n, doc.count, records, stored)
}

pub fn to_bytes(d: &DataSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * d.len() + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
    out.push(d.n() as u8);
    out.push(0);
    out.extend_from_slice(&(d.len() as u64).to_le_bytes());
    for r in d.records() {
        out.extend_from_slice(&r.q.to_le_bytes());
        out.extend_from_slice(&r.x.to_le_bytes());
        out.extend_from_slice(&r.t.to_le_bytes());
    }
    out.extend_from_slice(&folded_checksum(d.folded()));
    out
}

pub fn from_bytes(b: &[u8]) -> Result<DataSet> {
    if b.len() < HEADER_LEN + 32 || &b[..4] != MAGIC {
        return Err(Error::Format("not a data set file".into()));
    }
    check_version(u16::from_le_bytes([b[4], b[5]]))?;
    let n = b[6] as usize;
    let count = u64::from_le_bytes(b[8..16].try_into().unwrap());
    let body = b.len() - HEADER_LEN - 32;
    if count.checked_mul(RECORD_LEN as u64) != Some(body as u64) {
        return Err(Error::Format(format!("header says {count} records but body holds {body} bytes")));
    }
    let records = b[HEADER_LEN..HEADER_LEN + body].chunks_exact(RECORD_LEN).map(|c| Record {
        q: u32::from_le_bytes(c[0..4].try_into().unwrap()),
        x: u32::from_le_bytes(c[4..8].try_into().unwrap()),
        t: u64::from_le_bytes(c[8..16].try_into().unwrap()),
    });
    let stored: [u8; 32] = b[b.len() - 32..].try_into().unwrap();
    finish(n, count, records, stored)
}

fn check_version(v: u16) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Format(format!("unsupported schema version {v}")));
    }
    Ok(())
}

fn finish(n: usize, count: u64, records: impl Iterator<Item = Record>, stored: [u8; 32]) -> Result<DataSet> {
    let d = DataSet::from_records(n, records)?;
    if d.len() as u64 != count {
        return Err(Error::Format(format!("header says {count} records, found {}", d.len())));
    }
    let computed = folded_checksum(d.folded());
    if computed != stored {
        return Err(Error::Checksum {
            stored: hex::encode(stored),
            computed: hex::encode(computed),
        });
    }
    Ok(d)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn save(d: &DataSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = if is_json(path) { to_json(d)?.into_bytes() } else { to_bytes(d) };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<DataSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if is_json(path) {
        let s = std::str::from_utf8(&bytes).map_err(|e| Error::Format(e.to_string()))?;
        from_json(s)
    } else {
        from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DataSet {
        DataSet::from_records(5, (0..40u32).map(|i| Record { q: (i * 7) % 32, x: (i * 13 + 1) % 32, t: 100 + i as u64 })).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let d = sample();
        assert_eq!(from_bytes(&to_bytes(&d)).unwrap(), d);
    }

    #[test]
    fn json_round_trip() {
        let d = sample();
        assert_eq!(from_json(&to_json(&d).unwrap()).unwrap(), d);
    }

    #[test]
    fn tampered_record_fails_checksum() {
        let d = sample();
        let mut b = to_bytes(&d);
        b[HEADER_LEN + 4] ^= 1;
        assert!(matches!(from_bytes(&b), Err(Error::Checksum { .. })));
        b.pop();
        assert!(matches!(from_bytes(&b), Err(Error::Format(_))));
    }

    #[test]
    fn files_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample();
        for name in ["d0.json", "d0.bin"] {
            let p = dir.path().join(name);
            save(&d, &p).unwrap();
            assert_eq!(load(&p).unwrap(), d);
        }
        let text = fs::read_to_string(dir.path().join("d0.json")).unwrap();
        assert!(text.contains("\"schema_version\":1"));
        assert!(matches!(load(dir.path().join("missing.bin")), Err(Error::Io { .. })));
    }
}
