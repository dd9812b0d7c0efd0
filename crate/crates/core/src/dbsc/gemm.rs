use super::{bspe_mac, pe_column_combine, ArrayGeometry, IntMatrix};
use crate::error::{Error, Result};
use crate::fixedpoint::{bit_slice_u12, IntFormat, QTensor, SlicePair};
use crate::scalar::Real;
use crate::tips::MixedQTensor;

fn check_weights<S: Real>(w: &QTensor<S>, k: usize) -> Result<usize> {
    if w.format() != IntFormat::S8 {
        return Err(Error::InvalidFormat(format!("weights must be S8, got {}", w.format())));
    }
    let (wk, n) = w.dims2()?;
    if wk != k {
        return Err(Error::Shape(format!("activation K={k} but weight K={wk}")));
    }
    Ok(n)
}

/// `U12[M×K] · S8[K×N]` through the bit slicer and BSPE pairs, default geometry.
pub fn gemm_high<S: Real>(a: &QTensor<S>, w: &QTensor<S>) -> Result<IntMatrix> {
    gemm_high_with(a, w, &ArrayGeometry::default())
}

pub fn gemm_high_with<S: Real>(a: &QTensor<S>, w: &QTensor<S>, geom: &ArrayGeometry) -> Result<IntMatrix> {
    geom.validate()?;
    if a.format() != IntFormat::U12 {
        return Err(Error::InvalidFormat(format!("activations must be U12, got {}", a.format())));
    }
    let (m, k) = a.dims2()?;
    let n = check_weights(w, k)?;
    let slices = a.data().iter().map(|&x| bit_slice_u12(x)).collect::<Result<Vec<_>>>()?;
    let mut out = IntMatrix::zeros(m, n);
    for row in 0..m {
        run_high_row(&slices[row * k..(row + 1) * k], w.data(), n, row, geom, &mut out)?;
    }
    Ok(out)
}

/// Output-tile-major, then K: each `pe_rows × pe_cols` weight tile is pinned
/// and the row's slices stream through it.
fn run_high_row(
    slices: &[SlicePair],
    w: &[i32],
    n: usize,
    row: usize,
    geom: &ArrayGeometry,
    out: &mut IntMatrix,
) -> Result<()> {
    let k = slices.len();
    for n0 in (0..n).step_by(geom.pe_cols) {
        for k0 in (0..k).step_by(geom.pe_rows) {
            let k1 = (k0 + geom.pe_rows).min(k);
            for col in n0..(n0 + geom.pe_cols).min(n) {
                let (mut left, mut right) = (0i32, 0i32);
                for kk in k0..k1 {
                    let wt = w[kk * n + col] as i8;
                    left = bspe_mac(slices[kk].hi, wt, left)?;
                    right = bspe_mac(slices[kk].lo, wt, right)?;
                }
                out.acc(row, col, pe_column_combine(left, right, true)?)?;
            }
        }
    }
    Ok(())
}

/// Low-precision row: the two BSPEs of a PE take adjacent channels `k, k+1`,
/// so one PE column covers `2·pe_rows` channels per tile.
fn run_low_row(x: &[i32], w: &[i32], n: usize, row: usize, geom: &ArrayGeometry, out: &mut IntMatrix) -> Result<()> {
    let k = x.len();
    let span = 2 * geom.pe_rows;
    for n0 in (0..n).step_by(geom.pe_cols) {
        for k0 in (0..k).step_by(span) {
            let k1 = (k0 + span).min(k);
            for col in n0..(n0 + geom.pe_cols).min(n) {
                let (mut left, mut right) = (0i32, 0i32);
                for kk in (k0..k1).step_by(2) {
                    left = bspe_mac(x[kk] as i8, w[kk * n + col] as i8, left)?;
                    if kk + 1 < k1 {
                        right = bspe_mac(x[kk + 1] as i8, w[(kk + 1) * n + col] as i8, right)?;
                    }
                }
                out.acc(row, col, pe_column_combine(left, right, false)?)?;
            }
        }
    }
    Ok(())
}

/// Per-row precision GEMM for TIPS-tagged activations, default geometry.
pub fn gemm_mixed<S: Real>(a: &MixedQTensor<S>, w: &QTensor<S>) -> Result<IntMatrix> {
    gemm_mixed_with(a, w, &ArrayGeometry::default())
}

pub fn gemm_mixed_with<S: Real>(a: &MixedQTensor<S>, w: &QTensor<S>, geom: &ArrayGeometry) -> Result<IntMatrix> {
    geom.validate()?;
    if a.high_format() != IntFormat::U12 {
        return Err(Error::InvalidFormat(format!("high rows must be U12, got {}", a.high_format())));
    }
    let lf = a.low_format();
    if lf.signed() || lf.bits() > 6 {
        return Err(Error::InvalidFormat(format!("low rows must be unsigned ≤ 6 bits, got {lf}")));
    }
    let (m, k) = (a.rows(), a.cols());
    let n = check_weights(w, k)?;
    let mut out = IntMatrix::zeros(m, n);
    for row in 0..m {
        if a.is_high(row) {
            let slices = a.row(row).iter().map(|&x| bit_slice_u12(x)).collect::<Result<Vec<_>>>()?;
            run_high_row(&slices, w.data(), n, row, geom, &mut out)?;
        } else {
            run_low_row(a.row(row), w.data(), n, row, geom, &mut out)?;
        }
    }
    Ok(out)
}
