//! LSB-first bit packing.

use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub(crate) struct BitWriter {
    bytes: Vec<u8>,
    nbits: usize,
}

impl BitWriter {
    pub fn with_bytes(bytes: Vec<u8>) -> Self {
        let nbits = bytes.len() * 8;
        BitWriter { bytes, nbits }
    }

    pub fn write(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        debug_assert!(width == 64 || value >> width == 0, "{value} does not fit {width} bits");
        for i in 0..width {
            if self.nbits % 8 == 0 {
                self.bytes.push(0);
            }
            if value >> i & 1 == 1 {
                *self.bytes.last_mut().unwrap() |= 1 << (self.nbits % 8);
            }
            self.nbits += 1;
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

pub(crate) struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn read(&mut self, width: u32) -> Result<u64> {
        if self.pos + width as usize > self.bytes.len() * 8 {
            return Err(Error::Malformed("bit stream truncated".into()));
        }
        let mut v = 0u64;
        for i in 0..width {
            let p = self.pos + i as usize;
            if self.bytes[p / 8] >> (p % 8) & 1 == 1 {
                v |= 1 << i;
            }
        }
        self.pos += width as usize;
        Ok(v)
    }

    /// Remaining bits must be byte-alignment padding, all zero.
    pub fn expect_padding_only(&self) -> Result<()> {
        let total = self.bytes.len() * 8;
        if total - self.pos >= 8 {
            return Err(Error::Malformed("trailing bytes after stream".into()));
        }
        for p in self.pos..total {
            if self.bytes[p / 8] >> (p % 8) & 1 == 1 {
                return Err(Error::Malformed("non-zero padding bits".into()));
            }
        }
        Ok(())
    }
}
