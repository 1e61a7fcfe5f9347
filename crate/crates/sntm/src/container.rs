//! Binary weight container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "SNTM"
//! version  u32      1
//! config   u64 byte length, then a UTF-8 JSON record with the
//!          ModelConfig field names (n_layers, d_model, n_heads, d_ffn,
//!          vocab_size, max_seq_len, activation_kind)
//! tensors  in the fixed order of ModelWeights::named_tensors, each:
//!          u64 name length, name bytes, u64 element count,
//!          row-major f32 little-endian values
//! ```
//!
//! Readers reject a wrong magic or version, and name the offending tensor
//! when a file is truncated or shaped inconsistently with its config.
//! Writers emit to `<path>.partial` and rename on success, so a failed
//! write never leaves a plain artifact behind.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelWeights};

const MAGIC: &[u8; 4] = b"SNTM";
const VERSION: u32 = 1;

/// Serializes weights into the container byte layout.
pub fn to_bytes(weights: &ModelWeights) -> Result<Vec<u8>> {
    weights.validate()?;
    let config_json = serde_json::to_vec(&weights.config)
        .map_err(|e| Error::Format(format!("config serialization failed: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(config_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&config_json);
    for (name, values) in weights.named_tensors() {
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "file truncated while reading {what} (need {n} bytes at offset {})",
                self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Deserializes weights from the container byte layout.
pub fn from_bytes(bytes: &[u8]) -> Result<ModelWeights> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:02x?}, expected \"SNTM\"",
            magic
        )));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported container version {version}, expected {VERSION}"
        )));
    }
    let config_len = r.u64("config length")? as usize;
    let config_bytes = r.take(config_len, "config record")?;
    let config_str = std::str::from_utf8(config_bytes)
        .map_err(|e| Error::Format(format!("config record is not UTF-8: {e}")))?;
    let config: ModelConfig = serde_json::from_str(config_str)
        .map_err(|e| Error::Format(format!("config record is not valid: {e}")))?;
    config.validate()?;

    let mut weights = ModelWeights::zeros(config)?;
    for (expected_name, slot) in weights.named_tensors_mut() {
        let name_len = r.u64(&format!("name length of tensor {expected_name}"))? as usize;
        let name_bytes = r.take(name_len, &format!("name of tensor {expected_name}"))?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|_| Error::Format(format!("tensor name for {expected_name} is not UTF-8")))?;
        if name != expected_name {
            return Err(Error::Format(format!(
                "unexpected tensor '{name}' where '{expected_name}' was required"
            )));
        }
        let count = r.u64(&format!("element count of tensor {name}"))? as usize;
        if count != slot.len() {
            return Err(Error::Format(format!(
                "tensor {name} has {count} elements, config requires {}",
                slot.len()
            )));
        }
        let data = r.take(count * 4, &format!("tensor {name}"))?;
        for (i, chunk) in data.chunks_exact(4).enumerate() {
            slot[i] = f32::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    weights.validate()?;
    Ok(weights)
}

/// Writes a file atomically: the data lands at `<path>.partial` first and is
/// renamed into place only when complete.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let partial = partial_path(path);
    let mut file = fs::File::create(&partial).map_err(|e| Error::io(&partial, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&partial, e))?;
    file.sync_all().map_err(|e| Error::io(&partial, e))?;
    drop(file);
    fs::rename(&partial, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn partial_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".partial");
    std::path::PathBuf::from(os)
}

/// Saves weights to the container format.
pub fn save_model(weights: &ModelWeights, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(weights)?)
}

/// Loads weights from the container format.
pub fn load_model(path: &Path) -> Result<ModelWeights> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
