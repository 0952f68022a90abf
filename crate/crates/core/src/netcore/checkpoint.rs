//! Binary checkpoint format.
//!
//! ```text
//! "BEEC" | version u32 | count u32 |
//!   { name_len u32 | name utf-8 | rank u32 | dims u32* | f64* }*
//! ```
//!
//! All integers and floats are little-endian, payloads row-major.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{ParamSet, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"BEEC";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(ps: &ParamSet, mut w: impl Write) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(ps.len() as u32).to_le_bytes())?;
    for (name, t) in ps.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn encode_checkpoint(ps: &ParamSet) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(ps, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn save_checkpoint(ps: &ParamSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(ps))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParamSet> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}

/// Little-endian cursor that reports the byte offset of any failure.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    kind: &'static str,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], kind: &'static str) -> Self {
        Self { bytes, pos: 0, kind }
    }

    pub(crate) fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            kind: self.kind,
            pos: self.pos as u64,
            msg: msg.into(),
        })
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return self.fail(format!(
                "truncated while reading {what} ({n} bytes needed, {} left)",
                self.bytes.len() - self.pos
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).unwrap_or(usize::MAX), what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let start = self.pos;
        let got = self.take(4, "magic")?;
        if got != expected {
            self.pos = start;
            return self.fail(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(expected)
            ));
        }
        Ok(())
    }

    pub(crate) fn version(&mut self, supported: u32) -> Result<()> {
        let start = self.pos;
        let v = self.u32("version")?;
        if v != supported {
            self.pos = start;
            return self.fail(format!("unsupported version {v}, expected {supported}"));
        }
        Ok(())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return self.fail(format!("{} trailing bytes", self.bytes.len() - self.pos));
        }
        Ok(())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ParamSet> {
    let mut c = Cursor::new(bytes, "checkpoint");
    c.magic(CHECKPOINT_MAGIC)?;
    c.version(CHECKPOINT_VERSION)?;
    let count = c.u32("tensor count")?;
    let mut ps = ParamSet::new();
    for i in 0..count {
        let len = c.u32("name length")? as usize;
        let raw = c.take(len, "name")?;
        let name = match std::str::from_utf8(raw) {
            Ok(s) => s.to_string(),
            Err(_) => return c.fail(format!("tensor {i} name is not UTF-8")),
        };
        let rank = c.u32("rank")? as usize;
        if rank == 0 {
            return c.fail(format!("tensor {name:?} has rank 0"));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = c.u32("dimension")? as usize;
            if d == 0 {
                return c.fail(format!("tensor {name:?} has a zero dimension"));
            }
            dims.push(d);
        }
        let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let Some(n) = n else {
            return c.fail(format!("tensor {name:?} dimensions overflow"));
        };
        let data = c.f64s(n, "payload")?;
        let t = Tensor::new(dims, data)?;
        if ps.contains(&name) {
            return c.fail(format!("duplicate tensor name {name:?}"));
        }
        ps.insert(name, t)?;
    }
    c.finish()?;
    Ok(ps)
}
