//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! magic     8 bytes  "AOGPCKPT"
//! version   u32
//! meta_len  u32, then meta_len bytes of UTF-8 JSON (model configuration)
//! count     u32
//! count × { name_len u32, name bytes, ndim u32, ndim × u64 dims }
//! values    f64 × Σ product(dims), tensors in header order
//! ```

use std::io::{Read, Write};

use super::{Params, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AOGPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint parameters do not match the model architecture")]
    Layout,
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn save_checkpoint<W: Write>(mut w: W, params: &Params, meta: &str) -> Result<(), CheckpointError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    put_u32(&mut w, CHECKPOINT_VERSION)?;
    put_u32(&mut w, meta.len() as u32)?;
    w.write_all(meta.as_bytes())?;
    put_u32(&mut w, params.tensors.len() as u32)?;
    for (name, t) in params.names.iter().zip(&params.tensors) {
        put_u32(&mut w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        put_u32(&mut w, t.shape.len() as u32)?;
        for &d in &t.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
    }
    for t in &params.tensors {
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

const LIMIT: usize = 1 << 28;

/// Reads a checkpoint; returns its tensors (without architecture metadata
/// such as LSTM bias registration) and the meta JSON string.
pub fn load_checkpoint<R: Read>(mut r: R) -> Result<(Params, String), CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::Magic);
    }
    let version = get_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let meta_len = get_u32(&mut r)? as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta)?;
    let meta = String::from_utf8(meta).map_err(|_| CheckpointError::Corrupt("meta is not UTF-8".into()))?;
    let count = get_u32(&mut r)? as usize;
    let mut params = Params::default();
    for _ in 0..count {
        let len = get_u32(&mut r)? as usize;
        if len > 4096 {
            return Err(CheckpointError::Corrupt("tensor name too long".into()));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| CheckpointError::Corrupt("name is not UTF-8".into()))?;
        let ndim = get_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(get_u64(&mut r)? as usize);
        }
        if shape.iter().product::<usize>() > LIMIT {
            return Err(CheckpointError::Corrupt("tensor too large".into()));
        }
        params.names.push(name);
        params.tensors.push(Tensor::zeros(&shape));
    }
    for t in &mut params.tensors {
        for v in &mut t.data {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(CheckpointError::Corrupt(format!("{} trailing bytes", rest.len())));
    }
    Ok((params, meta))
}

impl Params {
    /// Copies values from a loaded checkpoint into this (architecture-built) store.
    pub fn load_values(&mut self, loaded: &Params) -> Result<(), CheckpointError> {
        if !self.same_layout(loaded) {
            return Err(CheckpointError::Layout);
        }
        for (dst, src) in self.tensors.iter_mut().zip(&loaded.tensors) {
            dst.data.copy_from_slice(&src.data);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_params, LstmCell, Linear};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> Params {
        let mut p = Params::default();
        Linear::new(&mut p, "fc", 5, 3);
        LstmCell::new(&mut p, "lstm", 3, 4);
        init_params(&mut p, &mut ChaCha8Rng::seed_from_u64(5));
        p.get_mut(crate::neural::ParamId(1))[0] = f64::MIN_POSITIVE / 3.0;
        p
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let p = model();
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &p, r#"{"kind":"toy"}"#).unwrap();
        let (q, meta) = load_checkpoint(&buf[..]).unwrap();
        assert_eq!(meta, r#"{"kind":"toy"}"#);
        let mut target = p.zeros_like();
        target.load_values(&q).unwrap();
        for (a, b) in p.tensors.iter().zip(&target.tensors) {
            assert_eq!(a.shape, b.shape);
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let p = model();
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &p, "{}").unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(load_checkpoint(&bad[..]), Err(CheckpointError::Magic)));
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(load_checkpoint(&bad[..]), Err(CheckpointError::Version(9))));
        assert!(load_checkpoint(&buf[..buf.len() - 3]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(load_checkpoint(&long[..]), Err(CheckpointError::Corrupt(_))));
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let p = model();
        let mut other = Params::default();
        Linear::new(&mut other, "fc", 5, 2);
        assert!(matches!(other.load_values(&p), Err(CheckpointError::Layout)));
    }
}
