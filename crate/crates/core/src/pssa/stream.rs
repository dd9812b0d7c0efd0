//! `PSSA1` byte stream.
//!
//! Layout: magic `PSSA1`, little-endian `u32 rows`, `u32 cols`, `u8 patch
//! size`, `u8 value_bits`, `u16 threshold`, then an LSB-first bit stream:
//! for every patch (band-major) its `size + 1` row pointers followed by its
//! column indices, then all values at `value_bits` each, zero-padded to a
//! byte boundary.

use super::bitio::{BitReader, BitWriter};
use super::{restore_bitmap, CompressedSas, PatchCsr, PatchMode, SasHeader};
use crate::error::{Error, Result};

pub const PSSA_MAGIC: &[u8; 5] = b"PSSA1";
const HEADER_LEN: usize = 5 + 4 + 4 + 1 + 1 + 2;

impl CompressedSas {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut head = Vec::with_capacity(HEADER_LEN);
        head.extend_from_slice(PSSA_MAGIC);
        head.extend_from_slice(&h.rows.to_le_bytes());
        head.extend_from_slice(&h.cols.to_le_bytes());
        head.push(h.mode.size() as u8);
        head.push(h.value_bits);
        head.extend_from_slice(&h.threshold.to_le_bytes());

        let mut w = BitWriter::with_bytes(head);
        let (rp, ci) = (h.mode.row_ptr_bits(), h.mode.col_idx_bits());
        for p in &self.patches {
            for &v in &p.row_ptr {
                w.write(v as u64, rp);
            }
            for &c in &p.col_idx {
                w.write(c as u64, ci);
            }
        }
        for &v in &self.values {
            w.write(v as u64, h.value_bits as u32);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Malformed("stream shorter than header".into()));
        }
        if &bytes[..5] != PSSA_MAGIC {
            return Err(Error::Malformed("bad PSSA1 magic".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
        let header = SasHeader {
            rows: u32_at(5),
            cols: u32_at(9),
            mode: PatchMode::from_size(bytes[13] as usize)
                .map_err(|_| Error::Malformed(format!("bad patch size {}", bytes[13])))?,
            value_bits: bytes[14],
            threshold: u16::from_le_bytes([bytes[15], bytes[16]]),
        };
        if header.value_bits == 0 || header.value_bits > 16 {
            return Err(Error::Malformed(format!("value_bits {} not in 1..=16", header.value_bits)));
        }
        let s = header.mode.size();
        let (rp, ci) = (header.mode.row_ptr_bits(), header.mode.col_idx_bits());
        let n_patches = header.bands().checked_mul(header.patches_per_band());
        let n_patches = n_patches.ok_or_else(|| Error::Malformed("patch count overflows".into()))?;
        let body = &bytes[HEADER_LEN..];
        // every patch carries at least its row pointers
        if (n_patches as u128) * ((s as u128 + 1) * rp as u128) > body.len() as u128 * 8 {
            return Err(Error::Malformed("bit stream truncated".into()));
        }
        let mut r = BitReader::new(body);
        let mut patches = Vec::with_capacity(n_patches);
        for _ in 0..n_patches {
            let row_ptr = (0..=s).map(|_| r.read(rp).map(|v| v as u32)).collect::<Result<Vec<_>>>()?;
            let nnz = *row_ptr.last().unwrap() as usize;
            if nnz > s * s {
                return Err(Error::Malformed(format!("row_ptr end {nnz} exceeds patch area")));
            }
            let col_idx = (0..nnz).map(|_| r.read(ci).map(|v| v as u16)).collect::<Result<Vec<_>>>()?;
            let p = PatchCsr { row_ptr, col_idx };
            p.validate(s)?;
            patches.push(p);
        }
        let mut c = CompressedSas { header, patches, values: Vec::new() };
        let nnz = restore_bitmap(&c)?.count_ones();
        c.values = (0..nnz)
            .map(|_| r.read(header.value_bits as u32).map(|v| v as u16))
            .collect::<Result<Vec<_>>>()?;
        r.expect_padding_only()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::{IntFormat, QTensor};
    use crate::pssa::{encode, index_bits};

    fn sample() -> CompressedSas {
        let data: Vec<i32> = (0..32 * 64).map(|i| ((i * 7919) % 4096) as i32).collect();
        let sas = QTensor::new(vec![32, 64], data, IntFormat::U12, 1.0f64).unwrap();
        encode(&sas, 2500, PatchMode::P16).unwrap()
    }

    #[test]
    fn byte_length_matches_bit_budget() {
        let c = sample();
        let bytes = c.to_bytes();
        let bits = index_bits(&c) + 12 * c.values.len() as u64;
        assert_eq!(bytes.len(), HEADER_LEN + bits.div_ceil(8) as usize);
        assert_eq!(CompressedSas::from_bytes(&bytes).unwrap(), c);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        assert!(CompressedSas::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(CompressedSas::from_bytes(&extra).is_err());
        let mut magic = bytes.clone();
        magic[4] = b'2';
        assert!(CompressedSas::from_bytes(&magic).is_err());
        let mut mode = bytes.clone();
        mode[13] = 8;
        assert!(CompressedSas::from_bytes(&mode).is_err());
        // first row_ptr entry must be zero
        let mut rp = bytes.clone();
        rp[HEADER_LEN] |= 1;
        assert!(CompressedSas::from_bytes(&rp).is_err());
    }
}
