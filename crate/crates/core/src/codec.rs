//! Shared little-endian container helpers for the `MNN1` and `MLP1` formats.

use crate::{FormatError, Result};

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn with_magic(magic: &[u8; 4], capacity: usize) -> Self {
        let mut buf = Vec::with_capacity(capacity);
        buf.extend_from_slice(magic);
        Self { buf }
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, values: &[f64]) {
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn expect_magic(bytes: &'a [u8], magic: &[u8; 4]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(FormatError::Truncated {
                needed: 4,
                available: bytes.len(),
            }
            .into());
        }
        if &bytes[..4] != magic {
            return Err(FormatError::VersionMismatch {
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
            }
            .into());
        }
        Ok(Self { bytes, pos: 4 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(FormatError::Truncated {
                needed: self.pos.saturating_add(n),
                available: self.bytes.len(),
            }
            .into()),
        }
    }

    pub fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| FormatError::InconsistentHeader("payload size overflows".into()))?;
        let raw = self.take(len)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FormatError::InconsistentHeader("non-finite weight in payload".into()).into());
        }
        Ok(values)
    }

    /// Checks that the bytes available match the size implied by the header.
    pub fn expect_remaining(&self, entries: usize) -> Result<()> {
        let needed = entries
            .checked_mul(8)
            .and_then(|n| n.checked_add(self.pos))
            .ok_or_else(|| FormatError::InconsistentHeader("payload size overflows".into()))?;
        if self.bytes.len() < needed {
            return Err(FormatError::Truncated {
                needed,
                available: self.bytes.len(),
            }
            .into());
        }
        if self.bytes.len() > needed {
            return Err(FormatError::InconsistentHeader(format!(
                "{} trailing bytes after declared payload",
                self.bytes.len() - needed
            ))
            .into());
        }
        Ok(())
    }
}
