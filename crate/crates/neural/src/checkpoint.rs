//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "D3NC"  u32 version  u32 meta_len  meta (UTF-8, usually JSON)
//! u64 rng_seed  u64 iteration  u32 count
//! count x { u32 name_len  name  u32 rank(=4)  rank x u32 dim  f32 data }
//! u64 adam_step  u8 has_adam
//! if has_adam: count x { f32 m  f32 v }   (same order, same shapes)
//! ```
//!
//! Parameters are written in name order, so equal stores give equal bytes.

use std::fs;
use std::path::Path;

use crate::error::{NeuralError, Result};
use crate::store::{Param, ParamStore};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"D3NC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: String,
    pub store: ParamStore<f32>,
}

impl Checkpoint {
    pub fn new(meta: impl Into<String>, store: ParamStore<f32>) -> Self {
        Checkpoint {
            meta: meta.into(),
            store,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.store;
        let mut out = Vec::with_capacity(64 + s.num_scalars() * 12);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u32(&mut out, self.meta.len() as u32);
        out.extend_from_slice(self.meta.as_bytes());
        out.extend_from_slice(&s.rng_seed.to_le_bytes());
        out.extend_from_slice(&s.iteration.to_le_bytes());
        put_u32(&mut out, s.len() as u32);
        for (name, p) in s.iter() {
            put_u32(&mut out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, 4);
            for d in p.value.shape() {
                put_u32(&mut out, d as u32);
            }
            put_f32s(&mut out, p.value.data());
        }
        out.extend_from_slice(&s.step.to_le_bytes());
        out.push(1);
        for (_, p) in s.iter() {
            put_f32s(&mut out, p.m.data());
            put_f32s(&mut out, p.v.data());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let meta_len = r.u32()? as usize;
        let meta = std::str::from_utf8(r.take(meta_len)?)
            .map_err(|_| corrupt("metadata is not UTF-8"))?
            .to_owned();
        let rng_seed = r.u64()?;
        let iteration = r.u64()?;
        let count = r.u32()? as usize;

        let mut entries = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| corrupt("parameter name is not UTF-8"))?
                .to_owned();
            let rank = r.u32()?;
            if rank != 4 {
                return Err(corrupt(format!("parameter {name:?} has rank {rank}, expected 4")));
            }
            let mut shape = [0usize; 4];
            for d in &mut shape {
                *d = r.u32()? as usize;
            }
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| corrupt("shape overflow"))?;
            let data = r.f32s(n)?;
            entries.push((name, Tensor::new(shape, data)?));
        }
        let step = r.u64()?;
        let has_adam = r.take(1)?[0];
        let mut store = ParamStore::new(rng_seed);
        store.iteration = iteration;
        store.step = step;
        for (name, value) in entries {
            let mut p = Param::new(value);
            if has_adam == 1 {
                let n = p.value.len();
                p.m = Tensor::new(p.value.shape(), r.f32s(n)?)?;
                p.v = Tensor::new(p.value.shape(), r.f32s(n)?)?;
            } else if has_adam != 0 {
                return Err(corrupt("bad optimizer flag"));
            }
            store.insert_param(&name, p).map_err(|_| corrupt(format!("duplicate parameter {name:?}")))?;
        }
        if r.pos != bytes.len() {
            return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { meta, store })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, ckpt.to_bytes()).map_err(|source| NeuralError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|source| NeuralError::Io {
        path: path.to_owned(),
        source,
    })?;
    Checkpoint::from_bytes(&bytes)
}

fn corrupt(msg: impl Into<String>) -> NeuralError {
    NeuralError::Checkpoint(msg.into())
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, data: &[f32]) {
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt("unexpected end of file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n.checked_mul(4).ok_or_else(|| corrupt("length overflow"))?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}
