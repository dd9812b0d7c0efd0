//! Self-attention-score compression: threshold pruning, horizontal XOR of
//! adjacent bitmap patches, and patch-local CSR indexing.
//!
//! The pipeline is
//!
//! ```text
//! SAS (U12) --prune--> bitmap + values --xor_augment--> diff bitmap --CSR per patch--> stream
//! ```
//!
//! Only the bitmap is XORed. The value stream always carries the pruned
//! scores in row-major order of the *original* bitmap, so decoding is a
//! running XOR over each band followed by re-attaching values.

mod baseline;
mod bitio;
mod bitmatrix;
mod stream;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use baseline::{baseline_global_csr_bits, baseline_rle_bits, DEFAULT_RLE_RUN_BITS};
pub use bitmatrix::BitMatrix;

use crate::error::{Error, Result};
use crate::fixedpoint::{IntFormat, QTensor};
use crate::scalar::Real;

/// Bit width of each stored score.
pub const VALUE_BITS: u8 = 12;

/// Square patch side handled by the reconfigurable XOR unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum PatchMode {
    P16,
    P32,
    P64,
}

impl PatchMode {
    pub const ALL: [PatchMode; 3] = [PatchMode::P16, PatchMode::P32, PatchMode::P64];

    pub fn size(self) -> usize {
        match self {
            PatchMode::P16 => 16,
            PatchMode::P32 => 32,
            PatchMode::P64 => 64,
        }
    }

    /// Width of one `col_idx` entry: ⌈log2 size⌉.
    pub fn col_idx_bits(self) -> u32 {
        ceil_log2(self.size() as u64)
    }

    /// Width of one `row_ptr` entry: ⌈log2(size² + 1)⌉.
    pub fn row_ptr_bits(self) -> u32 {
        ceil_log2((self.size() * self.size()) as u64 + 1)
    }

    pub fn from_size(size: usize) -> Result<Self> {
        match size {
            16 => Ok(PatchMode::P16),
            32 => Ok(PatchMode::P32),
            64 => Ok(PatchMode::P64),
            s => Err(Error::InvalidArgument(format!("patch size {s} not in {{16, 32, 64}}"))),
        }
    }
}

impl TryFrom<u32> for PatchMode {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        PatchMode::from_size(v as usize)
    }
}

impl From<PatchMode> for u32 {
    fn from(m: PatchMode) -> u32 {
        m.size() as u32
    }
}

impl fmt::Display for PatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.size())
    }
}

/// ⌈log2 n⌉, with `ceil_log2(0) = ceil_log2(1) = 0`.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Pruned score matrix: occupancy bitmap plus surviving scores in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunedSas {
    pub bitmap: BitMatrix,
    pub values: Vec<u16>,
}

impl PrunedSas {
    pub fn rows(&self) -> usize {
        self.bitmap.rows()
    }

    pub fn cols(&self) -> usize {
        self.bitmap.cols()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Dense U12 tensor with pruned positions zeroed.
    pub fn to_dense<S: Real>(&self, scale: S) -> Result<QTensor<S>> {
        let cols = self.cols();
        let mut data = vec![0i32; self.rows() * cols];
        for ((r, c), &v) in self.bitmap.iter_ones().zip(&self.values) {
            data[r * cols + c] = v as i32;
        }
        QTensor::new(vec![self.rows(), cols], data, IntFormat::U12, scale)
    }
}

/// Keep scores strictly above `threshold`.
pub fn prune_sas<S: Real>(sas: &QTensor<S>, threshold: i64) -> Result<PrunedSas> {
    if threshold < 0 {
        return Err(Error::InvalidArgument(format!("negative threshold {threshold}")));
    }
    if sas.format() != IntFormat::U12 {
        return Err(Error::InvalidFormat(format!("SAS must be U12, got {}", sas.format())));
    }
    let (rows, cols) = sas.dims2()?;
    let mut bitmap = BitMatrix::zeros(rows, cols);
    let mut values = Vec::new();
    for (i, &v) in sas.data().iter().enumerate() {
        if v as i64 > threshold {
            bitmap.set(i / cols, i % cols, true);
            values.push(v as u16);
        }
    }
    Ok(PrunedSas { bitmap, values })
}

fn check_patch_grid(bitmap: &BitMatrix, mode: PatchMode) -> Result<()> {
    let s = mode.size();
    if bitmap.rows() % s != 0 || bitmap.cols() % s != 0 {
        return Err(Error::Shape(format!(
            "{}x{} bitmap not divisible into {s}x{s} patches",
            bitmap.rows(),
            bitmap.cols()
        )));
    }
    Ok(())
}

/// Horizontal patch XOR: patch 0 of each band is kept, patch `k ≥ 1` becomes
/// `P_k ⊕ P_{k-1}` against the original left neighbour.
pub fn xor_augment(bitmap: &BitMatrix, mode: PatchMode) -> Result<BitMatrix> {
    check_patch_grid(bitmap, mode)?;
    let s = mode.size();
    let mut out = bitmap.clone();
    for r in 0..bitmap.rows() {
        for c0 in (s..bitmap.cols()).step_by(s) {
            let d = bitmap.get_bits(r, c0, s) ^ bitmap.get_bits(r, c0 - s, s);
            out.set_bits(r, c0, s, d);
        }
    }
    Ok(out)
}

/// Inverse of [`xor_augment`]: running XOR along each band.
pub fn xor_restore(diff: &BitMatrix, mode: PatchMode) -> Result<BitMatrix> {
    check_patch_grid(diff, mode)?;
    let s = mode.size();
    let mut out = diff.clone();
    for r in 0..diff.rows() {
        for c0 in (s..diff.cols()).step_by(s) {
            let v = diff.get_bits(r, c0, s) ^ out.get_bits(r, c0 - s, s);
            out.set_bits(r, c0, s, v);
        }
    }
    Ok(out)
}

/// CSR indices of one patch.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatchCsr {
    pub row_ptr: Vec<u32>,
    pub col_idx: Vec<u16>,
}

impl PatchCsr {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Checks the CSR invariants for a `side × side` patch.
    pub fn validate(&self, side: usize) -> Result<()> {
        if self.row_ptr.len() != side + 1 {
            return Err(Error::Malformed(format!(
                "row_ptr has {} entries, expected {}",
                self.row_ptr.len(),
                side + 1
            )));
        }
        if self.row_ptr[0] != 0 {
            return Err(Error::Malformed("row_ptr[0] != 0".into()));
        }
        if self.row_ptr.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Malformed("row_ptr decreasing".into()));
        }
        let last = self.row_ptr[side] as usize;
        if last != self.col_idx.len() || last > side * side {
            return Err(Error::Malformed(format!(
                "row_ptr end {last} inconsistent with {} column indices",
                self.col_idx.len()
            )));
        }
        for r in 0..side {
            let row = &self.col_idx[self.row_ptr[r] as usize..self.row_ptr[r + 1] as usize];
            if row.iter().any(|&c| c as usize >= side) || row.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Malformed(format!("bad column indices in patch row {r}")));
            }
        }
        Ok(())
    }
}

fn csr_window(bm: &BitMatrix, r0: usize, c0: usize, h: usize, w: usize) -> PatchCsr {
    let mut row_ptr = Vec::with_capacity(h + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for r in r0..r0 + h {
        for c in 0..w {
            if bm.get(r, c0 + c) {
                col_idx.push(c as u16);
            }
        }
        row_ptr.push(col_idx.len() as u32);
    }
    PatchCsr { row_ptr, col_idx }
}

/// Plain CSR of a patch (any shape; a patch is square in practice).
pub fn csr_encode_patch(patch: &BitMatrix) -> PatchCsr {
    csr_window(patch, 0, 0, patch.rows(), patch.cols())
}

/// Fixed fields of a compressed stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SasHeader {
    /// Unpadded matrix size.
    pub rows: u32,
    pub cols: u32,
    pub mode: PatchMode,
    pub value_bits: u8,
    pub threshold: u16,
}

impl SasHeader {
    /// Matrix size rounded up to whole patches.
    pub fn padded_dims(&self) -> (usize, usize) {
        let s = self.mode.size();
        ((self.rows as usize).div_ceil(s) * s, (self.cols as usize).div_ceil(s) * s)
    }

    pub fn bands(&self) -> usize {
        self.padded_dims().0 / self.mode.size()
    }

    pub fn patches_per_band(&self) -> usize {
        self.padded_dims().1 / self.mode.size()
    }
}

/// Encoded scores: per-patch CSR of the XOR-augmented bitmap (band-major,
/// left to right) and the pruned value stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedSas {
    pub header: SasHeader,
    pub patches: Vec<PatchCsr>,
    pub values: Vec<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    pub threshold: i64,
    pub mode: PatchMode,
    /// Zero-pad dimensions that are not a multiple of the patch size instead
    /// of rejecting them.
    pub pad: bool,
}

impl EncodeOptions {
    pub fn new(threshold: i64, mode: PatchMode) -> Self {
        EncodeOptions { threshold, mode, pad: false }
    }
}

pub fn encode<S: Real>(sas: &QTensor<S>, threshold: i64, mode: PatchMode) -> Result<CompressedSas> {
    encode_with(sas, &EncodeOptions::new(threshold, mode))
}

pub fn encode_with<S: Real>(sas: &QTensor<S>, opts: &EncodeOptions) -> Result<CompressedSas> {
    let threshold = u16::try_from(opts.threshold)
        .map_err(|_| Error::InvalidArgument(format!("threshold {} not in 0..=65535", opts.threshold)))?;
    let pruned = prune_sas(sas, opts.threshold)?;
    encode_pruned(&pruned, threshold, opts.mode, opts.pad)
}

/// Encode an already-pruned matrix.
pub fn encode_pruned(pruned: &PrunedSas, threshold: u16, mode: PatchMode, pad: bool) -> Result<CompressedSas> {
    let (rows, cols) = (pruned.rows(), pruned.cols());
    let header = SasHeader {
        rows: u32::try_from(rows).map_err(|_| Error::Shape("too many rows".into()))?,
        cols: u32::try_from(cols).map_err(|_| Error::Shape("too many columns".into()))?,
        mode,
        value_bits: VALUE_BITS,
        threshold,
    };
    let (prows, pcols) = header.padded_dims();
    if !pad && (prows, pcols) != (rows, cols) {
        return Err(Error::Shape(format!(
            "{rows}x{cols} not divisible by patch size {mode}; enable padding"
        )));
    }
    let bitmap = if (prows, pcols) == (rows, cols) {
        pruned.bitmap.clone()
    } else {
        pruned.bitmap.padded(prows, pcols)
    };
    let diff = xor_augment(&bitmap, mode)?;
    let s = mode.size();
    let mut patches = Vec::with_capacity(header.bands() * header.patches_per_band());
    for b in 0..header.bands() {
        for p in 0..header.patches_per_band() {
            patches.push(csr_window(&diff, b * s, p * s, s, s));
        }
    }
    Ok(CompressedSas { header, patches, values: pruned.values.clone() })
}

/// Rebuild the padded diff bitmap and run the XOR restore.
fn restore_bitmap(c: &CompressedSas) -> Result<BitMatrix> {
    let h = &c.header;
    if h.value_bits == 0 || h.value_bits > 16 {
        return Err(Error::Malformed(format!("value_bits {} not in 1..=16", h.value_bits)));
    }
    let expected = h.bands() * h.patches_per_band();
    if c.patches.len() != expected {
        return Err(Error::Malformed(format!("{} patches, expected {expected}", c.patches.len())));
    }
    let s = h.mode.size();
    let (prows, pcols) = h.padded_dims();
    let mut diff = BitMatrix::zeros(prows, pcols);
    let ppb = h.patches_per_band().max(1);
    for (i, patch) in c.patches.iter().enumerate() {
        patch.validate(s)?;
        let (r0, c0) = ((i / ppb) * s, (i % ppb) * s);
        for r in 0..s {
            for &col in &patch.col_idx[patch.row_ptr[r] as usize..patch.row_ptr[r + 1] as usize] {
                diff.set(r0 + r, c0 + col as usize, true);
            }
        }
    }
    let restored = xor_restore(&diff, h.mode)?;
    let (rows, cols) = (h.rows as usize, h.cols as usize);
    if (prows, pcols) == (rows, cols) {
        return Ok(restored);
    }
    let cropped = restored.cropped(rows, cols);
    if cropped.count_ones() != restored.count_ones() {
        return Err(Error::Malformed("set bits in padding region".into()));
    }
    Ok(cropped)
}

pub fn decode(c: &CompressedSas) -> Result<PrunedSas> {
    let bitmap = restore_bitmap(c)?;
    let nnz = bitmap.count_ones();
    if nnz != c.values.len() {
        return Err(Error::Malformed(format!(
            "value stream holds {} scores, bitmap has {nnz} set bits",
            c.values.len()
        )));
    }
    let max = (1u32 << c.header.value_bits) - 1;
    if c.values.iter().any(|&v| v as u32 > max) {
        return Err(Error::Malformed("value exceeds value_bits".into()));
    }
    Ok(PrunedSas { bitmap, values: c.values.clone() })
}

/// Index overhead of a stream: column indices plus fixed-width row pointers
/// of every patch, excluding values and header.
pub fn index_bits(c: &CompressedSas) -> u64 {
    let m = c.header.mode;
    let rp = (m.size() as u64 + 1) * m.row_ptr_bits() as u64;
    c.patches
        .iter()
        .map(|p| p.col_idx.len() as u64 * m.col_idx_bits() as u64 + rp)
        .sum()
}

/// Index bits of patch-local CSR applied to `bitmap` without the XOR step.
pub fn local_csr_index_bits(bitmap: &BitMatrix, mode: PatchMode) -> Result<u64> {
    check_patch_grid(bitmap, mode)?;
    let s = mode.size();
    let patches = (bitmap.rows() / s) * (bitmap.cols() / s);
    Ok(bitmap.count_ones() as u64 * mode.col_idx_bits() as u64
        + patches as u64 * (s as u64 + 1) * mode.row_ptr_bits() as u64)
}
