//! Little-endian binary framing shared by the series, AR-model and ISA caches.
//!
//! Every record starts with a four byte tag and a `u16` format version. Matrices are
//! written as `rows: u32, cols: u32` followed by column-major `f64` values.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Default)]
pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(tag: &[u8; 4]) -> Self {
        let mut enc = Encoder { buf: Vec::new() };
        enc.buf.extend_from_slice(tag);
        enc.u16(FORMAT_VERSION);
        enc
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("dimension exceeds u32 range");
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn values(&mut self, vals: &[f64]) {
        self.buf.reserve(vals.len() * 8);
        for v in vals {
            self.f64(*v);
        }
    }

    pub fn matrix(&mut self, m: &DMatrix<f64>) {
        self.u32(m.nrows());
        self.u32(m.ncols());
        self.values(m.as_slice());
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(bytes: &'a [u8], tag: &[u8; 4]) -> Result<Self> {
        if bytes.len() < 6 || &bytes[..4] != tag {
            return Err(Error::Format(format!(
                "missing {:?} tag",
                String::from_utf8_lossy(tag)
            )));
        }
        let mut dec = Decoder { bytes, pos: 4 };
        let version = dec.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        Ok(dec)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated record".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn values(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let rows = self.u32()?;
        let cols = self.u32()?;
        let vals = self.values(rows * cols)?;
        Ok(DMatrix::from_vec(rows, cols, vals))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )))
        }
    }
}
