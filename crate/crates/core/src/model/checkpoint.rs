//! Binary checkpoint format.
//!
//! ```text
//! "RFCK" | version: u32 | config_len: u32 | ModelConfig as JSON (config_len bytes)
//! | n_tensors: u32
//! | per tensor: name_len: u32 | name (UTF-8) | ndim: u32 | dims: u32 * ndim | f32 * prod(dims)
//! ```
//!
//! All integers and floats are little-endian. Values are stored as f32, so a
//! save/load round trip rounds every parameter to single precision.

use std::fs;
use std::path::Path;

use super::{ModelConfig, ModelError, Parameters};

const MAGIC: &[u8; 4] = b"RFCK";
const VERSION: u32 = 1;

pub fn checkpoint_bytes(params: &Parameters) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let config = serde_json::to_vec(&params.config).expect("config serializes");
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    let named = params.named();
    out.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, t) in named {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &dim in &t.shape {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            ModelError::Checkpoint(format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn parameters_from_bytes(bytes: &[u8]) -> Result<Parameters, ModelError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(ModelError::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(len)?)
        .map_err(|e| ModelError::Checkpoint(format!("bad config: {e}")))?;
    config.validate()?;
    let mut params = Parameters::zeros(&config);
    let n = r.u32()? as usize;
    let mut slots = params.named_mut();
    if n != slots.len() {
        return Err(ModelError::Checkpoint(format!(
            "checkpoint holds {n} tensors, config implies {}",
            slots.len()
        )));
    }
    for (expected, tensor) in slots.iter_mut() {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| ModelError::Checkpoint("tensor name is not UTF-8".into()))?;
        if name != expected {
            return Err(ModelError::Checkpoint(format!("expected tensor {expected}, found {name}")));
        }
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
        if shape != tensor.shape {
            return Err(ModelError::Checkpoint(format!(
                "tensor {name}: shape {shape:?} does not match config shape {:?}",
                tensor.shape
            )));
        }
        let raw = r.take(4 * tensor.len())?;
        for (dst, c) in tensor.data.iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(c.try_into().unwrap()) as f64;
        }
    }
    if r.pos != bytes.len() {
        return Err(ModelError::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &Parameters, path: &Path) -> Result<(), ModelError> {
    fs::write(path, checkpoint_bytes(params)).map_err(|e| ModelError::Io { path: path.to_path_buf(), source: e })
}

pub fn load_checkpoint(path: &Path) -> Result<Parameters, ModelError> {
    let bytes = fs::read(path).map_err(|e| ModelError::Io { path: path.to_path_buf(), source: e })?;
    parameters_from_bytes(&bytes).map_err(|e| match e {
        ModelError::Checkpoint(m) => ModelError::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_parameters;

    fn tiny() -> ModelConfig {
        ModelConfig { d_model: 8, n_heads: 2, n_layers: 1, d_ff: 8, max_seq_len: 16, d_img: 4, k_visual: 2, rng_seed: 3, ..Default::default() }
    }

    #[test]
    fn round_trip_rounds_to_f32() {
        let p = init_parameters(&tiny());
        let q = parameters_from_bytes(&checkpoint_bytes(&p)).unwrap();
        assert_eq!(q.config, p.config);
        for ((n, a), (_, b)) in p.named().into_iter().zip(q.named()) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(*x as f32 as f64, *y, "{n}");
            }
        }
        // A second round trip is exact.
        assert_eq!(checkpoint_bytes(&q), checkpoint_bytes(&p));
    }

    #[test]
    fn rejects_corruption() {
        let bytes = checkpoint_bytes(&init_parameters(&tiny()));
        assert!(parameters_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(parameters_from_bytes(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(parameters_from_bytes(&bad).is_err());
    }

    #[test]
    fn rejects_shape_mismatch() {
        let p = init_parameters(&tiny());
        let mut q = p.clone();
        q.config.d_ff = 16;
        // Tensors were sized for d_ff = 8, header now claims 16.
        assert!(parameters_from_bytes(&checkpoint_bytes(&q)).is_err());
    }
}
