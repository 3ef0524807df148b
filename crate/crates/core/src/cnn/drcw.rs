//! Little-endian weight container.
//!
//! ```text
//! "DRCW" | u32 version | u32 leaky slope (f32 bits) | u32 tensor count
//! per tensor: u16 name length | name (UTF-8) | u8 rank | u32 dims[rank] | f32 data
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const DRCW_MAGIC: &[u8; 4] = b"DRCW";
pub const DRCW_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> NamedTensor {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        NamedTensor {
            name: name.into(),
            dims,
            data,
        }
    }

    pub fn filled(name: impl Into<String>, dims: Vec<usize>, value: f32) -> NamedTensor {
        let n = dims.iter().product();
        NamedTensor::new(name, dims, vec![value; n])
    }
}

/// Parsed weight file: leaky-ReLU slope plus tensors in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub slope: f32,
    pub tensors: Vec<NamedTensor>,
}

impl WeightFile {
    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

pub fn write_drcw<W: Write>(mut w: W, file: &WeightFile) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(DRCW_MAGIC);
    buf.extend_from_slice(&DRCW_VERSION.to_le_bytes());
    buf.extend_from_slice(&file.slope.to_bits().to_le_bytes());
    buf.extend_from_slice(&(file.tensors.len() as u32).to_le_bytes());
    for t in &file.tensors {
        let name = t.name.as_bytes();
        if name.len() > u16::MAX as usize || t.dims.len() > u8::MAX as usize {
            return Err(Error::Contract(format!("tensor `{}` cannot be encoded", t.name)));
        }
        if t.dims.iter().product::<usize>() != t.data.len() {
            return Err(Error::ShapeMismatch {
                name: t.name.clone(),
                expected: t.dims.clone(),
                found: vec![t.data.len()],
            });
        }
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name);
        buf.push(t.dims.len() as u8);
        for &d in &t.dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Byte cursor that reports the offset of any truncation.
pub(crate) struct Cursor<'a> {
    format: &'static str,
    bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(format: &'static str, bytes: &'a [u8]) -> Cursor<'a> {
        Cursor { format, bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::framing(
                self.format,
                self.pos,
                format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(n.saturating_mul(4), what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::framing(self.format, self.pos, message)
    }
}

pub fn read_drcw<R: Read>(mut r: R) -> Result<WeightFile> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_drcw(&bytes)
}

pub fn parse_drcw(bytes: &[u8]) -> Result<WeightFile> {
    let mut c = Cursor::new("DRCW", bytes);
    if c.take(4, "magic")? != DRCW_MAGIC {
        return Err(Error::framing("DRCW", 0, "bad magic"));
    }
    let version = c.u32("version")?;
    if version != DRCW_VERSION {
        return Err(Error::framing("DRCW", 4, format!("unsupported version {version}")));
    }
    let slope = f32::from_bits(c.u32("slope")?);
    let count = c.u32("tensor count")?;
    let mut tensors = Vec::with_capacity(count.min(1024) as usize);
    for _ in 0..count {
        let start = c.pos;
        let len = c.u16("name length")? as usize;
        let name = std::str::from_utf8(c.take(len, "tensor name")?)
            .map_err(|_| Error::framing("DRCW", start + 2, "tensor name is not UTF-8"))?
            .to_string();
        let rank = c.u8("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(c.u32("dimension")? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| c.error(format!("tensor `{name}` is too large")))?;
        let data = c.f32s(n, &format!("data of `{name}`"))?;
        tensors.push(NamedTensor { name, dims, data });
    }
    if c.remaining() != 0 {
        return Err(c.error(format!("{} trailing bytes", c.remaining())));
    }
    Ok(WeightFile { slope, tensors })
}
