//! `SPNN` parameter container shared by classical and quantum models.
//!
//! Layout, little-endian:
//!
//! ```text
//! "SPNN" | version u32 | kind_len u32 | kind utf-8
//!        | n_dims u32 | dims (n_dims × u64)
//!        | n_blocks u32 | per block: len u64, len × f64
//!        | has_adam u8 | [step u64 | first moments | second moments]
//! ```
//!
//! Moment blocks repeat the parameter block lengths, so they carry no
//! length prefix of their own.

use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SPNN";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StoredAdam {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub dims: Vec<u64>,
    pub blocks: Vec<Vec<f64>>,
    pub adam: Option<StoredAdam>,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.kind.len() as u32).to_le_bytes());
        out.extend_from_slice(self.kind.as_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for b in &self.blocks {
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            put_f64s(&mut out, b);
        }
        match &self.adam {
            None => out.push(0),
            Some(a) => {
                out.push(1);
                out.extend_from_slice(&a.step.to_le_bytes());
                a.first.iter().for_each(|b| put_f64s(&mut out, b));
                a.second.iter().for_each(|b| put_f64s(&mut out, b));
            }
        }
        out
    }

    pub fn decode(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { path, bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format(path, 0, "not an SPNN checkpoint"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(path, 4, format!("unsupported version {version}")));
        }
        let klen = r.u32()? as usize;
        let kind = String::from_utf8(r.take(klen)?.to_vec())
            .map_err(|_| Error::format(path, 12, "kind is not utf-8"))?;
        let ndims = r.u32()? as usize;
        let dims = (0..ndims).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let nblocks = r.u32()? as usize;
        let mut blocks = Vec::with_capacity(nblocks.min(1 << 16));
        for _ in 0..nblocks {
            let len = r.u64()? as usize;
            blocks.push(r.f64s(len)?);
        }
        let adam = match r.take(1)?[0] {
            0 => None,
            1 => {
                let step = r.u64()?;
                let lens: Vec<usize> = blocks.iter().map(Vec::len).collect();
                let first = lens.iter().map(|&n| r.f64s(n)).collect::<Result<Vec<_>>>()?;
                let second = lens.iter().map(|&n| r.f64s(n)).collect::<Result<Vec<_>>>()?;
                Some(StoredAdam {
                    step,
                    first,
                    second,
                })
            }
            f => return Err(Error::format(path, r.pos as u64 - 1, format!("bad adam flag {f}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::format(path, r.pos as u64, "trailing bytes"));
        }
        Ok(Self {
            kind,
            dims,
            blocks,
            adam,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(path, &bytes)
    }

    pub fn expect_kind(&self, path: &Path, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::format(
                path,
                12,
                format!("checkpoint kind {:?}, expected {kind:?}", self.kind),
            ));
        }
        Ok(())
    }
}

fn put_f64s(out: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.path, self.bytes.len() as u64, "truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let nbytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::format(self.path, self.pos as u64, "implausible block length"))?;
        Ok(self
            .take(nbytes)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}
