//! Binary checkpoint codec.
//!
//! Layout, all integers little-endian `u32`:
//! `"FPFN"`, version, config length, config JSON bytes, then repeated
//! records of name length, name bytes, rank, dims, `f32` data until EOF.

use crate::{NeuralError, ParamSet, Result, Tensor};

pub const MAGIC: &[u8; 4] = b"FPFN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// UTF-8 JSON describing the model the parameters belong to.
    pub config: String,
    pub params: ParamSet<f32>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| NeuralError::invalid(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

impl Checkpoint {
    pub fn new(config: impl Into<String>, params: ParamSet<f32>) -> Self {
        Self {
            config: config.into(),
            params,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        serde_json::from_str::<serde_json::Value>(&self.config)
            .map_err(|e| NeuralError::invalid(format!("checkpoint config is not JSON: {e}")))?;
        let mut out = Vec::with_capacity(16 + self.config.len() + 4 * self.params.numel());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_u32(&mut out, self.config.len())?;
        out.extend_from_slice(self.config.as_bytes());
        for (name, t) in self.params.iter() {
            put_u32(&mut out, name.len())?;
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, 4)?;
            for d in t.shape() {
                put_u32(&mut out, d)?;
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(NeuralError::BadMagic(format!(
                "expected {:?}, found {:?}",
                String::from_utf8_lossy(MAGIC),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = r.u32("version")?;
        if version == 0 || version > FORMAT_VERSION {
            return Err(NeuralError::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let len = r.u32("config length")? as usize;
        let config = std::str::from_utf8(r.take(len, "config")?)
            .map_err(|e| NeuralError::Malformed(format!("config is not UTF-8: {e}")))?
            .to_owned();
        serde_json::from_str::<serde_json::Value>(&config)
            .map_err(|e| NeuralError::Malformed(format!("config is not JSON: {e}")))?;

        let mut params = ParamSet::new();
        while r.pos < bytes.len() {
            let idx = params.len();
            let what = |field: &str| format!("record {idx} {field}");
            let n = r.u32(&what("name length"))? as usize;
            let name = std::str::from_utf8(r.take(n, &what("name"))?)
                .map_err(|e| NeuralError::Malformed(format!("record {idx} name is not UTF-8: {e}")))?
                .to_owned();
            let rank = r.u32(&what("rank"))? as usize;
            if rank == 0 || rank > 4 {
                return Err(NeuralError::Malformed(format!("parameter {name:?} has rank {rank}")));
            }
            let mut shape = [1usize; 4];
            for slot in shape[4 - rank..].iter_mut() {
                *slot = r.u32(&what("dims"))? as usize;
            }
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| NeuralError::Malformed(format!("parameter {name:?} shape {shape:?} overflows")))?;
            let raw = r.take(numel, &format!("data of {name:?}"))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            params.push(name, Tensor::new(shape, data)?);
        }
        Ok(Self { config, params })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            NeuralError::Truncated(format!(
                "{what}: need {n} bytes at offset {}, {} available",
                self.pos,
                self.bytes.len() - self.pos
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
