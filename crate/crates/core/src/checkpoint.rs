//! Versioned binary checkpoint: header (magic, format version, JSON model
//! config, probe hash) followed by named parameter records, each stored as
//! (name, shape, little-endian f64 payload). The probe hash is the SHA-256
//! of the model's log-probabilities on a config-derived probe batch, so a
//! loaded checkpoint can prove bit-exact replay.

use crate::error::{RedError, Result};
use crate::model::{ModelConfig, RedModel};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"REDCHKPT";
const FORMAT_VERSION: u32 = 1;

/// SHA-256 over the little-endian bytes of the model's probe-batch
/// log-probabilities.
pub fn probe_hash(model: &RedModel) -> Result<[u8; 32]> {
    let probe = RedModel::probe_batch(&model.config);
    let mut hasher = Sha256::new();
    for row in probe.rows() {
        let lp = model.log_prob(&row.to_owned())?;
        hasher.update(lp.to_le_bytes());
    }
    Ok(hasher.finalize().into())
}

pub fn probe_hash_hex(model: &RedModel) -> Result<String> {
    Ok(to_hex(&probe_hash(model)?))
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_checkpoint(model: &RedModel, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());

    let config_json = serde_json::to_vec(&model.config)
        .map_err(|e| RedError::CheckpointCorrupt(format!("config serialization: {e}")))?;
    buf.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config_json);
    buf.extend_from_slice(&probe_hash(model)?);

    let mut records: u32 = 0;
    model.for_each_param(|_| records += 1);
    buf.extend_from_slice(&records.to_le_bytes());
    model.for_each_param(|p| {
        buf.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        buf.extend_from_slice(p.name.as_bytes());
        buf.push(p.shape.len() as u8);
        for &dim in &p.shape {
            buf.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for &v in p.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    });

    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(RedError::CheckpointCorrupt(format!(
                "unexpected end of file at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

pub fn load_checkpoint(path: &Path) -> Result<RedModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader { buf: &bytes, pos: 0 };

    if r.take(8)? != MAGIC {
        return Err(RedError::CheckpointCorrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(RedError::CheckpointVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let config_len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| RedError::CheckpointCorrupt(format!("config parse: {e}")))?;
    let stored_hash: [u8; 32] = r.take(32)?.try_into().unwrap();

    let records = r.u32()? as usize;
    let mut arrays: HashMap<String, (Vec<usize>, Vec<f64>)> = HashMap::new();
    for _ in 0..records {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| RedError::CheckpointCorrupt("non-utf8 parameter name".into()))?;
        let ndim = r.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = r.take(8 * numel)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        arrays.insert(name, (shape, data));
    }
    if r.pos != bytes.len() {
        return Err(RedError::CheckpointCorrupt(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }

    // Rebuild from config and overwrite every parameter by name.
    let mut model = RedModel::from_config(&config)?;
    let mut missing: Option<String> = None;
    model.for_each_param_mut(|name, data| {
        match arrays.get(name) {
            Some((_, stored)) if stored.len() == data.len() => {
                data.copy_from_slice(stored);
            }
            Some((_, stored)) => {
                if missing.is_none() {
                    missing = Some(format!(
                        "parameter {name}: stored length {} != expected {}",
                        stored.len(),
                        data.len()
                    ));
                }
            }
            None => {
                if missing.is_none() {
                    missing = Some(format!("parameter {name} missing from checkpoint"));
                }
            }
        }
    });
    if let Some(msg) = missing {
        return Err(RedError::shape("checkpoint parameters", msg, "load_checkpoint"));
    }

    let recomputed = probe_hash(&model)?;
    if recomputed != stored_hash {
        return Err(RedError::Integrity(
            "probe-batch hash disagrees with checkpoint header".into(),
        ));
    }
    Ok(model)
}
