//! Little-endian binary container shared by the feature, PCA and mixture
//! files: a 4-byte magic, a u32 format version, a fixed number of u32
//! dimensions, then a flat payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4], dims: &[u32]) -> Self {
        let mut buf = Vec::with_capacity(8 + 4 * dims.len());
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        for d in dims {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        Writer { buf }
    }

    pub fn f32s(&mut self, values: impl IntoIterator<Item = f32>) {
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn f64s(&mut self, values: impl IntoIterator<Item = f64>) {
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn write_to(self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.buf).map_err(|e| Error::io(path, e))?;
        f.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) struct Reader<'a> {
    pub dims: Vec<u32>,
    payload: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn parse(bytes: &'a [u8], magic: &[u8; 4], ndims: usize) -> Result<Self> {
        let header = 8 + 4 * ndims;
        if bytes.len() < header {
            return Err(Error::Format(format!(
                "file too short for header ({} bytes)",
                bytes.len()
            )));
        }
        if &bytes[..4] != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[..4]),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = u32_at(bytes, 4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dims = (0..ndims).map(|i| u32_at(bytes, 8 + 4 * i)).collect();
        Ok(Reader { dims, payload: &bytes[header..], pos: 0 })
    }

    /// Fails unless the payload is exactly `len` bytes.
    pub fn expect_len(&self, len: usize) -> Result<()> {
        if self.payload.len() != len {
            return Err(Error::Truncated { expected: len, found: self.payload.len() });
        }
        Ok(())
    }

    pub fn f32s(&mut self, count: usize) -> Vec<f32> {
        let out = self.payload[self.pos..self.pos + 4 * count]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        self.pos += 4 * count;
        out
    }

    pub fn f64s(&mut self, count: usize) -> Vec<f64> {
        let out = self.payload[self.pos..self.pos + 8 * count]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        self.pos += 8 * count;
        out
    }
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
