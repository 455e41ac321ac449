//! Little-endian cursor shared by the binary file formats.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("bad magic {0:?}")]
    Magic([u8; 4]),
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("dimensions overflow: {0}")]
    Overflow(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

pub struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, offset: 0 }
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8], DecodeError> {
        let remaining = self.bytes.len() - self.offset;
        if len > remaining {
            return Err(DecodeError::Truncated { offset: self.offset, needed: len - remaining });
        }
        let out = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<(), DecodeError> {
        let got: [u8; 4] = self.take(4)?.try_into().expect("four bytes");
        if &got != expected {
            return Err(DecodeError::Magic(got));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    /// `count` values of `width` bytes, checking the size before reading.
    pub fn array(&mut self, count: usize, width: usize) -> Result<&'a [u8], DecodeError> {
        let len = count.checked_mul(width).ok_or(DecodeError::Overflow("payload size"))?;
        self.take(len)
    }

    pub fn f32s(&mut self, count: usize) -> Result<Vec<f32>, DecodeError> {
        Ok(self.array(count, 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("four bytes"))).collect())
    }

    pub fn f64s(&mut self, count: usize) -> Result<Vec<f64>, DecodeError> {
        Ok(self.array(count, 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))).collect())
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.bytes.len() - self.offset {
            0 => Ok(()),
            extra => Err(DecodeError::Trailing(extra)),
        }
    }
}

pub fn put_u32(out: &mut Vec<u8>, v: usize, what: &'static str) -> Result<(), DecodeError> {
    let v = u32::try_from(v).map_err(|_| DecodeError::Overflow(what))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}
