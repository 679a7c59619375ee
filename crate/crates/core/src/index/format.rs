//! On-disk index format, little-endian throughout:
//!
//! ```text
//! magic "VSIX" | version u8 (0x01) | metric u8 | dim u32 | count u64
//! | model_id (u16 len + bytes)
//! | count entries: id (u16 len + bytes) + dim f32 values
//! | crc32 of all preceding bytes (u32)
//! ```
//!
//! Loading verifies magic, version, and checksum before parsing, so a
//! flipped byte anywhere surfaces as an error instead of a silently
//! different index. Saving writes a sibling temp file and renames it
//! over the target.

use std::path::Path;

use super::{FlatIndex, IndexError, Metric};

const MAGIC: &[u8; 4] = b"VSIX";
const VERSION: u8 = 0x01;
// magic + version + metric + dim + count + model len + crc
const MIN_FILE_LEN: usize = 4 + 1 + 1 + 4 + 8 + 2 + 4;

/// Serialize and atomically write an index.
pub fn save_index(index: &FlatIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    let bytes = to_bytes(index)?;
    let path = path.as_ref();
    let tmp_path = path.with_extension("idx.tmp");
    std::fs::write(&tmp_path, &bytes)?;
    std::fs::rename(&tmp_path, path)?;
    Ok(())
}

/// Read an index back; `load_index(save_index(x))` is bit-identical to `x`.
pub fn load_index(path: impl AsRef<Path>) -> Result<FlatIndex, IndexError> {
    from_bytes(&std::fs::read(path.as_ref())?)
}

pub(crate) fn to_bytes(index: &FlatIndex) -> Result<Vec<u8>, IndexError> {
    let model_bytes = index.model_id.as_bytes();
    if model_bytes.len() > u16::MAX as usize {
        return Err(IndexError::FieldTooLong {
            what: "model id",
            len: model_bytes.len(),
        });
    }

    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.push(VERSION);
    bytes.push(index.metric.code());
    bytes.extend_from_slice(&(index.dim as u32).to_le_bytes());
    bytes.extend_from_slice(&(index.entries.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&(model_bytes.len() as u16).to_le_bytes());
    bytes.extend_from_slice(model_bytes);

    for (id, vector) in &index.entries {
        let id_bytes = id.as_bytes();
        if id_bytes.len() > u16::MAX as usize {
            return Err(IndexError::FieldTooLong {
                what: "record id",
                len: id_bytes.len(),
            });
        }
        bytes.extend_from_slice(&(id_bytes.len() as u16).to_le_bytes());
        bytes.extend_from_slice(id_bytes);
        for value in vector {
            bytes.extend_from_slice(&value.to_le_bytes());
        }
    }

    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    Ok(bytes)
}

pub(crate) fn from_bytes(bytes: &[u8]) -> Result<FlatIndex, IndexError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(IndexError::BadMagic);
    }
    if bytes[4..].is_empty() {
        return Err(IndexError::CorruptPayload("truncated after magic".into()));
    }
    let version = bytes[4];
    if version != VERSION {
        return Err(IndexError::VersionUnsupported { version });
    }
    if bytes.len() < MIN_FILE_LEN {
        return Err(IndexError::CorruptPayload("truncated header".into()));
    }

    let (payload, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32fast::hash(payload) != stored_crc {
        return Err(IndexError::CorruptPayload("checksum mismatch".into()));
    }

    let mut cursor = Cursor::new(&payload[5..]);
    let metric_code = cursor.take_u8()?;
    let metric = Metric::from_code(metric_code)
        .ok_or_else(|| IndexError::CorruptPayload(format!("unknown metric code {metric_code}")))?;
    let dim = cursor.take_u32()? as usize;
    if dim == 0 {
        return Err(IndexError::CorruptPayload("zero dimension".into()));
    }
    let count = cursor.take_u64()? as usize;
    let model_len = cursor.take_u16()? as usize;
    let model_id = String::from_utf8(cursor.take_bytes(model_len)?.to_vec())
        .map_err(|_| IndexError::CorruptPayload("model id is not UTF-8".into()))?;

    let mut entries = Vec::with_capacity(count.min(cursor.remaining() / 4 + 1));
    let mut seen = std::collections::HashSet::with_capacity(entries.capacity());
    for _ in 0..count {
        let id_len = cursor.take_u16()? as usize;
        let id = String::from_utf8(cursor.take_bytes(id_len)?.to_vec())
            .map_err(|_| IndexError::CorruptPayload("record id is not UTF-8".into()))?;
        if !seen.insert(id.clone()) {
            return Err(IndexError::CorruptPayload(format!("duplicate record id {id:?}")));
        }
        let mut vector = Vec::with_capacity(dim);
        for _ in 0..dim {
            let value = f32::from_le_bytes(cursor.take_bytes(4)?.try_into().unwrap());
            if !value.is_finite() {
                return Err(IndexError::CorruptPayload("non-finite vector value".into()));
            }
            vector.push(value);
        }
        entries.push((id, vector));
    }
    if cursor.remaining() != 0 {
        return Err(IndexError::CorruptPayload(format!(
            "{} trailing bytes after entries",
            cursor.remaining()
        )));
    }

    Ok(FlatIndex::from_raw_parts(entries, dim, metric, model_id))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, offset: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.offset
    }

    fn take_bytes(&mut self, len: usize) -> Result<&'a [u8], IndexError> {
        if self.remaining() < len {
            return Err(IndexError::CorruptPayload(format!(
                "truncated: wanted {len} bytes, {} left",
                self.remaining()
            )));
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }

    fn take_u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take_bytes(1)?[0])
    }

    fn take_u16(&mut self) -> Result<u16, IndexError> {
        Ok(u16::from_le_bytes(self.take_bytes(2)?.try_into().unwrap()))
    }

    fn take_u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take_bytes(4)?.try_into().unwrap()))
    }

    fn take_u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take_bytes(8)?.try_into().unwrap()))
    }
}
