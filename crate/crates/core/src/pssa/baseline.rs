//! Reference encodings used for comparison: run-length coding of the whole
//! bitmap and a single global CSR.

use super::{ceil_log2, BitMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_RLE_RUN_BITS: u32 = 6;

/// Size of a run-length code of the bitmap read row-major.
///
/// Runs alternate between zeros and ones starting with a (possibly empty)
/// zero run. Each token is `run_bits` wide; the all-ones token `2^run_bits - 1`
/// is an escape meaning "that many, same symbol continues", so a run of
/// length `L` costs `⌊L / max⌋ + 1` tokens.
pub fn baseline_rle_bits(bitmap: &BitMatrix, run_bits: u32) -> Result<u64> {
    if run_bits == 0 || run_bits > 32 {
        return Err(Error::InvalidArgument(format!("run_bits {run_bits} not in 1..=32")));
    }
    let max = (1u64 << run_bits) - 1;
    let total = (bitmap.rows() * bitmap.cols()) as u64;
    if total == 0 {
        return Ok(0);
    }
    let mut tokens = 0u64;
    let mut symbol = false;
    let mut run = 0u64;
    for r in 0..bitmap.rows() {
        for c in 0..bitmap.cols() {
            let b = bitmap.get(r, c);
            if b != symbol {
                tokens += run / max + 1;
                symbol = b;
                run = 0;
            }
            run += 1;
        }
    }
    tokens += run / max + 1;
    Ok(tokens * run_bits as u64)
}

/// Index bits of one CSR over the whole matrix: `col_idx` at ⌈log2 cols⌉ and
/// `rows + 1` row pointers at ⌈log2(rows·cols + 1)⌉.
pub fn baseline_global_csr_bits(bitmap: &BitMatrix) -> u64 {
    let (rows, cols) = (bitmap.rows() as u64, bitmap.cols() as u64);
    bitmap.count_ones() as u64 * ceil_log2(cols) as u64 + (rows + 1) * ceil_log2(rows * cols + 1) as u64
}
