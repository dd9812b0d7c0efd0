use std::process::ExitCode;

use anyhow::{ensure, Result};
use rayon::prelude::*;
use sdaccel::emamodel::{measure_sas, reduction_pct, SasCodecConfig, REPORT_SCHEMA};
use sdaccel::pssa::PatchMode;
use sdaccel::synth::{synth_sas, SynthSpec};
use serde::Serialize;

use crate::io::{emit, emit_json};
use crate::{BenchArgs, Format};

pub const CSV_COLUMNS: [&str; 8] =
    ["flip_rate", "sparsity", "patch_mode", "raw_bytes", "csr_bits", "rle_bits", "pssa_bits", "reduction_vs_csr_pct"];

/// Totals over all trials of one sweep point; bits include values and index.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub flip_rate: f64,
    pub sparsity: f64,
    pub patch_mode: PatchMode,
    pub raw_bytes: u64,
    pub csr_bits: u64,
    pub rle_bits: u64,
    pub pssa_bits: u64,
    pub reduction_vs_csr_pct: f64,
}

#[derive(Serialize)]
struct BenchReport<'a> {
    schema: &'static str,
    kind: &'static str,
    rows: usize,
    cols: usize,
    trials: usize,
    seed: u64,
    threshold: u16,
    points: &'a [BenchRow],
}

fn point(a: &BenchArgs, flip: f64, sparsity: f64, mode: PatchMode) -> Result<BenchRow> {
    let cfg = SasCodecConfig { threshold: a.threshold as i64, mode, ..SasCodecConfig::default() };
    let (mut raw, mut csr, mut rle, mut pssa) = (0, 0, 0, 0);
    for t in 0..a.trials {
        let spec = SynthSpec {
            threshold: a.threshold,
            ..SynthSpec::new(a.rows, a.cols, mode, sparsity, flip, a.seed.wrapping_add(t as u64))
        };
        let m = measure_sas(&synth_sas::<f64>(&spec)?, &cfg)?;
        raw += m.bytes.raw;
        csr += m.bits.csr;
        rle += m.bits.rle;
        pssa += m.bits.pssa;
    }
    Ok(BenchRow {
        flip_rate: flip,
        sparsity,
        patch_mode: mode,
        raw_bytes: raw,
        csr_bits: csr,
        rle_bits: rle,
        pssa_bits: pssa,
        reduction_vs_csr_pct: reduction_pct(pssa, csr),
    })
}

pub fn run(a: &BenchArgs) -> Result<ExitCode> {
    ensure!(a.trials > 0, "--trials must be positive");
    let mut grid = Vec::new();
    for &f in &a.flip_rate {
        for &s in &a.sparsity {
            for &m in &a.patch {
                grid.push((f, s, m));
            }
        }
    }
    let mut rows = grid.par_iter().map(|&(f, s, m)| point(a, f, s, m)).collect::<Result<Vec<_>>>()?;
    rows.sort_by(|x, y| {
        x.flip_rate
            .total_cmp(&y.flip_rate)
            .then(x.sparsity.total_cmp(&y.sparsity))
            .then(x.patch_mode.size().cmp(&y.patch_mode.size()))
    });
    match a.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(vec![]);
            w.write_record(CSV_COLUMNS)?;
            for r in &rows {
                w.write_record([
                    r.flip_rate.to_string(),
                    r.sparsity.to_string(),
                    r.patch_mode.size().to_string(),
                    r.raw_bytes.to_string(),
                    r.csr_bits.to_string(),
                    r.rle_bits.to_string(),
                    r.pssa_bits.to_string(),
                    format!("{:.1}", r.reduction_vs_csr_pct),
                ])?;
            }
            emit(a.out.as_deref(), &String::from_utf8(w.into_inner()?)?)?;
        }
        Format::Json => emit_json(
            a.out.as_deref(),
            &BenchReport {
                schema: REPORT_SCHEMA,
                kind: "bench",
                rows: a.rows,
                cols: a.cols,
                trials: a.trials,
                seed: a.seed,
                threshold: a.threshold,
                points: &rows,
            },
        )?,
    }
    Ok(ExitCode::SUCCESS)
}
