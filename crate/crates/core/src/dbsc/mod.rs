//! Dual-mode bit-slice core: bit-exact MAC datapath, tiled GEMM in high and
//! mixed precision, stationary-dataflow access counting, CSR-skipping
//! attention and cluster aggregation.
//!
//! All arithmetic is 32-bit integer with explicit overflow detection, so
//! results do not depend on evaluation order.

mod dataflow;
mod gemm;
mod skip;

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

pub use dataflow::{simulate_dataflow, split_rows};
pub use gemm::{gemm_high, gemm_high_with, gemm_mixed, gemm_mixed_with};
pub use skip::csr_skip_av;

use crate::error::{Error, Result};

/// PE array and memory sizes of one accelerator instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub pe_rows: usize,
    pub pe_cols: usize,
    pub clusters: usize,
    pub cores_per_cluster: usize,
    pub imem_bytes: usize,
    pub wmem_bytes: usize,
    pub omem_bytes: usize,
    pub gmem_bytes: usize,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        ArrayGeometry {
            pe_rows: 16,
            pe_cols: 16,
            clusters: 4,
            cores_per_cluster: 4,
            imem_bytes: 6 * 1024,
            wmem_bytes: 2304,
            omem_bytes: 12 * 1024,
            gmem_bytes: 192 * 1024,
        }
    }
}

impl ArrayGeometry {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.pe_rows,
            self.pe_cols,
            self.clusters,
            self.cores_per_cluster,
            self.imem_bytes,
            self.wmem_bytes,
            self.omem_bytes,
            self.gmem_bytes,
        ];
        if all.contains(&0) {
            return Err(Error::InvalidArgument("geometry fields must be positive".into()));
        }
        Ok(())
    }
}

/// Which operand stays pinned in the PE array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StationaryMode {
    InputStationary,
    WeightStationary,
}

impl StationaryMode {
    /// Convolutions keep inputs resident; transformer layers keep weights.
    pub fn for_layer(is_conv: bool) -> Self {
        if is_conv {
            StationaryMode::InputStationary
        } else {
            StationaryMode::WeightStationary
        }
    }
}

/// Element-granular access counters of one simulated run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessStats {
    pub imem_reads: u64,
    pub imem_writes: u64,
    pub wmem_reads: u64,
    pub wmem_writes: u64,
    pub omem_reads: u64,
    pub omem_writes: u64,
    pub gmem_reads: u64,
    pub gmem_writes: u64,
    /// BSPE-pair operations actually issued; a low-precision pair counts once.
    pub mac_count: u64,
    pub mac_skipped: u64,
}

impl Add for AccessStats {
    type Output = AccessStats;
    fn add(mut self, o: AccessStats) -> AccessStats {
        self += o;
        self
    }
}

impl AddAssign for AccessStats {
    fn add_assign(&mut self, o: AccessStats) {
        self.imem_reads += o.imem_reads;
        self.imem_writes += o.imem_writes;
        self.wmem_reads += o.wmem_reads;
        self.wmem_writes += o.wmem_writes;
        self.omem_reads += o.omem_reads;
        self.omem_writes += o.omem_writes;
        self.gmem_reads += o.gmem_reads;
        self.gmem_writes += o.gmem_writes;
        self.mac_count += o.mac_count;
        self.mac_skipped += o.mac_skipped;
    }
}

/// Row-major 32-bit integer matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i32>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<i32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values for {rows}x{cols}", data.len())));
        }
        Ok(IntMatrix { rows, cols, data })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> i32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    fn acc(&mut self, r: usize, c: usize, v: i32) -> Result<()> {
        let cell = &mut self.data[r * self.cols + c];
        *cell = cell.checked_add(v).ok_or(Error::Overflow)?;
        Ok(())
    }
}

/// One BSPE step: `acc + input_slice · weight`.
#[inline]
pub fn bspe_mac(input_slice: i8, weight: i8, acc: i32) -> Result<i32> {
    if !(-64..=63).contains(&input_slice) {
        return Err(Error::OutOfRange { value: input_slice as i64, format: "S7".into() });
    }
    acc.checked_add(input_slice as i32 * weight as i32).ok_or(Error::Overflow)
}

/// Merge the two adder trees of a PE column.
///
/// High precision: the left tree holds upper-slice products, so the result is
/// `(left << 6) + right`. Low precision: both trees hold same-scale partial
/// sums of different channels and are added directly.
#[inline]
pub fn pe_column_combine(left_sum: i32, right_sum: i32, high_precision: bool) -> Result<i32> {
    let left = if high_precision {
        left_sum.checked_mul(64).ok_or(Error::Overflow)?
    } else {
        left_sum
    };
    left.checked_add(right_sum).ok_or(Error::Overflow)
}

/// Element-wise sum of per-core partial outputs.
pub fn aggregate_partials(partials: &[IntMatrix]) -> Result<IntMatrix> {
    let first = partials
        .first()
        .ok_or_else(|| Error::InvalidArgument("no partials to aggregate".into()))?;
    let mut out = IntMatrix::zeros(first.rows, first.cols);
    for p in partials {
        if (p.rows, p.cols) != (first.rows, first.cols) {
            return Err(Error::Shape(format!(
                "partial {}x{} differs from {}x{}",
                p.rows, p.cols, first.rows, first.cols
            )));
        }
        for (o, &v) in out.data.iter_mut().zip(&p.data) {
            *o = o.checked_add(v).ok_or(Error::Overflow)?;
        }
    }
    Ok(out)
}
