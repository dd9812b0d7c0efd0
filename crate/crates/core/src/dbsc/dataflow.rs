//! Tile-level access counting for the two stationary dataflows.
//!
//! Counts are in elements. For a pass over `rows` activation rows at a given
//! precision, K is tiled in spans of `pe_rows · ch` channels, where `ch` is
//! the number of channels one PE consumes per cycle (1 high, 2 low):
//!
//! * **Weight stationary** loops output-column tiles (`pe_cols` wide), then K
//!   tiles. Each weight tile is written to WMEM once and loaded into the PEs
//!   once; every activation row streams its K slice out of IMEM. Activations
//!   are refilled from global memory once per column tile.
//! * **Input stationary** loops row tiles (`pe_cols` rows), then K tiles. Each
//!   input tile is loaded once; the weight slice for every output column is
//!   streamed out of WMEM, which is refilled once per (row tile, K tile).
//!
//! In both modes every K tile after the first reads back its partial sums
//! from OMEM, and finished outputs are drained from OMEM to global memory.

use super::{AccessStats, ArrayGeometry, StationaryMode};
use crate::error::{Error, Result};

/// `(high_rows, low_rows)` for a workload with `low_ratio` of rows at low precision.
pub fn split_rows(m: usize, low_ratio: f64) -> Result<(usize, usize)> {
    if !(0.0..=1.0).contains(&low_ratio) {
        return Err(Error::InvalidArgument(format!("low_ratio {low_ratio} not in [0, 1]")));
    }
    let low = ((m as f64) * low_ratio).round() as usize;
    Ok((m - low, low))
}

fn tiles(total: usize, span: usize) -> impl Iterator<Item = usize> {
    (0..total).step_by(span).map(move |s| span.min(total - s))
}

fn pass(rows: usize, k: usize, n: usize, ch: usize, mode: StationaryMode, g: &ArrayGeometry) -> AccessStats {
    let mut st = AccessStats::default();
    if rows == 0 || k == 0 || n == 0 {
        return st;
    }
    let (rows64, n64) = (rows as u64, n as u64);
    let k_span = g.pe_rows * ch;
    match mode {
        StationaryMode::WeightStationary => {
            for nt in tiles(n, g.pe_cols).map(|v| v as u64) {
                st.imem_writes += rows64 * k as u64;
                st.gmem_reads += rows64 * k as u64;
                for (ti, kt) in tiles(k, k_span).enumerate() {
                    let kt64 = kt as u64;
                    st.wmem_writes += kt64 * nt;
                    st.gmem_reads += kt64 * nt;
                    st.wmem_reads += kt64 * nt;
                    st.imem_reads += rows64 * kt64;
                    st.mac_count += rows64 * kt.div_ceil(ch) as u64 * nt;
                    st.omem_writes += rows64 * nt;
                    if ti > 0 {
                        st.omem_reads += rows64 * nt;
                    }
                }
                st.omem_reads += rows64 * nt;
                st.gmem_writes += rows64 * nt;
            }
        }
        StationaryMode::InputStationary => {
            for mt in tiles(rows, g.pe_cols).map(|v| v as u64) {
                for (ti, kt) in tiles(k, k_span).enumerate() {
                    let kt64 = kt as u64;
                    st.gmem_reads += mt * kt64;
                    st.imem_writes += mt * kt64;
                    st.imem_reads += mt * kt64;
                    st.wmem_writes += kt64 * n64;
                    st.gmem_reads += kt64 * n64;
                    st.wmem_reads += kt64 * n64;
                    st.mac_count += mt * kt.div_ceil(ch) as u64 * n64;
                    st.omem_writes += mt * n64;
                    if ti > 0 {
                        st.omem_reads += mt * n64;
                    }
                }
                st.omem_reads += mt * n64;
                st.gmem_writes += mt * n64;
            }
        }
    }
    st
}

/// Access counts of an `M×K · K×N` layer, with `round(M · low_ratio)` rows in
/// low precision and the rest in high precision.
pub fn simulate_dataflow(
    m: usize,
    k: usize,
    n: usize,
    mode: StationaryMode,
    geom: &ArrayGeometry,
    low_ratio: f64,
) -> Result<AccessStats> {
    geom.validate()?;
    let (high, low) = split_rows(m, low_ratio)?;
    Ok(pass(high, k, n, 1, mode, geom) + pass(low, k, n, 2, mode, geom))
}
