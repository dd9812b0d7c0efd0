use super::{AccessStats, IntMatrix};
use crate::error::{Error, Result};
use crate::fixedpoint::QTensor;
use crate::pssa::{decode, CompressedSas};
use crate::scalar::Real;

/// `pruned SAS · V`, issuing MACs only at surviving score positions.
///
/// Counters: one IMEM read per surviving score, one WMEM read per V element
/// touched, each output written once; V and outputs cross global memory once.
pub fn csr_skip_av<S: Real>(c: &CompressedSas, v: &QTensor<S>) -> Result<(IntMatrix, AccessStats)> {
    let (vr, d) = v.dims2()?;
    let (rows, cols) = (c.header.rows as usize, c.header.cols as usize);
    if vr != cols {
        return Err(Error::Shape(format!("SAS has {cols} columns, V has {vr} rows")));
    }
    let pruned = decode(c)?;
    let vd = v.data();
    let mut out = IntMatrix::zeros(rows, d);
    for ((r, col), &s) in pruned.bitmap.iter_ones().zip(&pruned.values) {
        let s = s as i32;
        let vrow = &vd[col * d..(col + 1) * d];
        for (j, &x) in vrow.iter().enumerate() {
            out.acc(r, j, s.checked_mul(x).ok_or(Error::Overflow)?)?;
        }
    }
    let nnz = pruned.nnz() as u64;
    let dense = (rows * cols) as u64;
    let d64 = d as u64;
    let stats = AccessStats {
        imem_reads: nnz,
        wmem_reads: nnz * d64,
        omem_writes: (rows * d) as u64,
        gmem_reads: (cols * d) as u64,
        gmem_writes: (rows * d) as u64,
        mac_count: nnz * d64,
        mac_skipped: (dense - nnz) * d64,
        ..AccessStats::default()
    };
    Ok((out, stats))
}
