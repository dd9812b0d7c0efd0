use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use sdaccel::dbsc::{gemm_high, gemm_mixed, simulate_dataflow, AccessStats, ArrayGeometry, StationaryMode};
use sdaccel::emamodel::{
    measure_sas, sd_unet_workload, unet_ema_breakdown, EnergyCoefficients, LayerSpec, PerScheme, SasCodecConfig,
    SyntheticSas, REPORT_SCHEMA,
};
use sdaccel::fixedpoint::{dequantize, IntFormat, QTensor};
use sdaccel::pssa::{decode as pssa_decode, encode_with, EncodeOptions, PatchMode};
use sdaccel::synth::{synth_sas, SynthSpec};
use sdaccel::tips::{
    apply_mixed_quantization, cross_attention_probs, default_low_scale, default_precision_plan, extract_cas, min_cas,
    low_precision_ratio, spot, spot_absolute, PrecisionPlan, DEFAULT_TIPS_ITERATIONS,
};
use serde::Serialize;

use crate::io::{emit, emit_json, read_mask, read_pssa, read_qtf, write_mask, write_qtf};
use crate::{DecodeArgs, EmaArgs, EncodeArgs, Format, GemmArgs, SynthArgs, TipsArgs, Dataflow};

pub fn synth(a: &SynthArgs) -> Result<ExitCode> {
    let spec = SynthSpec {
        threshold: a.threshold,
        ..SynthSpec::new(a.rows, a.cols, a.patch, a.sparsity, a.flip_rate, a.seed)
    };
    let t = synth_sas::<f64>(&spec)?;
    write_qtf(&a.out, &t)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct EncodeReport {
    schema: &'static str,
    kind: &'static str,
    rows: usize,
    cols: usize,
    patch_mode: PatchMode,
    threshold: u16,
    elements: u64,
    nnz: u64,
    index_bits: PerScheme<u64>,
    bits: PerScheme<u64>,
    bytes: PerScheme<u64>,
    /// Size of the PSSA1 file including its header.
    stream_bytes: usize,
}

pub fn encode(a: &EncodeArgs) -> Result<ExitCode> {
    let sas = read_qtf(&a.input)?;
    let (rows, cols) = sas.dims2()?;
    let threshold = a.threshold as i64;
    let stream = encode_with(&sas, &EncodeOptions { threshold, mode: a.patch, pad: a.pad })?;
    let cfg = SasCodecConfig { threshold, mode: a.patch, run_bits: a.run_bits, pad: a.pad };
    let m = measure_sas(&sas, &cfg)?;
    let bytes = stream.to_bytes();
    if let Some(out) = &a.out {
        std::fs::write(out, &bytes).with_context(|| format!("writing {}", out.display()))?;
    }
    let r = EncodeReport {
        schema: REPORT_SCHEMA,
        kind: "encode",
        rows,
        cols,
        patch_mode: a.patch,
        threshold: a.threshold,
        elements: m.elements,
        nnz: m.nnz,
        index_bits: m.index_bits,
        bits: m.bits,
        bytes: m.bytes,
        stream_bytes: bytes.len(),
    };
    match a.format {
        Format::Json => emit_json(None, &r)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(vec![]);
            w.write_record(["scheme", "index_bits", "bits", "bytes"])?;
            for (name, s) in [("raw", 0), ("csr", 1), ("rle", 2), ("pssa", 3)] {
                let pick = |p: &PerScheme<u64>| [p.raw, p.csr, p.rle, p.pssa][s].to_string();
                w.write_record([name.to_string(), pick(&r.index_bits), pick(&r.bits), pick(&r.bytes)])?;
            }
            emit(None, &String::from_utf8(w.into_inner()?)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn decode(a: &DecodeArgs) -> Result<ExitCode> {
    let stream = read_pssa(&a.input)?;
    let dense = pssa_decode(&stream)?.to_dense(a.scale)?;
    write_qtf(&a.out, &dense)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct TipsReport {
    schema: &'static str,
    kind: &'static str,
    n_pixels: usize,
    n_text: usize,
    delta: Option<f64>,
    abs_threshold: Option<f64>,
    iteration: usize,
    tips_active: bool,
    min_cas: f64,
    spotted: usize,
    low_precision_ratio: f64,
    low_precision_pct: f64,
}

pub fn tips(a: &TipsArgs) -> Result<ExitCode> {
    let q = read_qtf(&a.query)?;
    let k = read_qtf(&a.key)?;
    let probs = cross_attention_probs(&q, &k, !a.no_scale)?;
    let cas = extract_cas(&probs);
    let m = min_cas(&cas)?;
    let mask = match a.abs_threshold {
        Some(t) => spot_absolute(&cas, t)?,
        None => spot(&cas, m, a.delta)?,
    };
    let spotted = mask.count();
    let plan = default_precision_plan(mask, a.iteration)?;
    if let Some(out) = &a.out {
        write_mask(out, &plan.mask)?;
    }
    let ratio = low_precision_ratio(&plan);
    emit_json(
        None,
        &TipsReport {
            schema: REPORT_SCHEMA,
            kind: "tips",
            n_pixels: probs.n_pixels(),
            n_text: probs.n_text(),
            delta: a.abs_threshold.is_none().then_some(a.delta),
            abs_threshold: a.abs_threshold,
            iteration: a.iteration,
            tips_active: a.iteration < DEFAULT_TIPS_ITERATIONS,
            min_cas: m,
            spotted,
            low_precision_ratio: ratio,
            low_precision_pct: sdaccel::emamodel::round1(100.0 * ratio),
        },
    )?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct GemmReport {
    schema: &'static str,
    kind: &'static str,
    m: usize,
    k: usize,
    n: usize,
    mode: &'static str,
    low_rows: usize,
    low_ratio: f64,
    stats: AccessStats,
}

pub fn gemm(a: &GemmArgs) -> Result<ExitCode> {
    let act = read_qtf(&a.a)?;
    let w = read_qtf(&a.w)?;
    let (m, k) = act.dims2()?;
    let (kw, n) = w.dims2()?;
    ensure!(k == kw, "inner dimensions differ: {k} vs {kw}");
    let (mut result, low_ratio, low_rows) = match &a.mask {
        None => (gemm_high(&act, &w)?, 0.0, 0),
        Some(p) => {
            let mask = read_mask(p)?;
            ensure!(mask.len() == m, "mask covers {} rows, activation has {m}", mask.len());
            let plan = PrecisionPlan {
                mask,
                high_format: IntFormat::U12,
                low_format: IntFormat::U6,
                apply_iteration_limit: DEFAULT_TIPS_ITERATIONS,
            };
            let scale_hi = act.scale();
            let scale_lo = default_low_scale(scale_hi);
            let mixed = apply_mixed_quantization(&dequantize(&act), k, &plan, scale_hi, scale_lo)?;
            let mut r = gemm_mixed(&mixed, &w)?;
            // bring low rows onto the high-row scale
            let factor = (scale_lo / scale_hi).round() as i32;
            let low_rows = (0..m).filter(|&i| !plan.is_high(i)).count();
            for i in (0..m).filter(|&i| !plan.is_high(i)) {
                for v in &mut r.data[i * n..(i + 1) * n] {
                    *v = v.checked_mul(factor).context("rescaled low row overflows i32")?;
                }
            }
            (r, low_precision_ratio(&plan), low_rows)
        }
    };
    let mode = match a.mode {
        Dataflow::Is => StationaryMode::InputStationary,
        Dataflow::Ws => StationaryMode::WeightStationary,
    };
    let stats = simulate_dataflow(m, k, n, mode, &ArrayGeometry::default(), low_ratio)?;
    if let Some(out) = &a.out {
        let data = std::mem::take(&mut result.data);
        write_qtf(out, &QTensor::new(vec![m, n], data, IntFormat::S32, act.scale() * w.scale())?)?;
    }
    emit_json(
        None,
        &GemmReport {
            schema: REPORT_SCHEMA,
            kind: "gemm",
            m,
            k,
            n,
            mode: match a.mode {
                Dataflow::Is => "is",
                Dataflow::Ws => "ws",
            },
            low_rows,
            low_ratio,
            stats,
        },
    )?;
    Ok(ExitCode::SUCCESS)
}

pub fn ema(a: &EmaArgs) -> Result<ExitCode> {
    let layers: Vec<LayerSpec> = match &a.workload {
        Some(p) => serde_json::from_str(&crate::io::read_text(p)?)
            .with_context(|| format!("parsing workload {}", p.display()))?,
        None => sd_unet_workload(),
    };
    if layers.is_empty() {
        bail!("workload has no layers");
    }
    let cfg = SasCodecConfig { threshold: a.threshold as i64, mode: a.patch, ..SasCodecConfig::default() };
    let mut source = SyntheticSas { sparsity: a.sparsity, flip_rate: a.flip_rate, seed: a.seed, ..SyntheticSas::default() };
    let coeff = EnergyCoefficients {
        ema_pj_per_byte: a.ema_pj,
        onchip_pj_per_byte: a.onchip_pj,
        mac_pj_high: a.mac_pj,
        mac_pj_low: a.mac_pj / 2.0,
    };
    let report = unet_ema_breakdown(&layers, &cfg, &mut source, &coeff)?;
    emit_json(a.out.as_deref(), &report)?;
    Ok(ExitCode::SUCCESS)
}
