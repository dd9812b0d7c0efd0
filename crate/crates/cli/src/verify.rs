use std::process::ExitCode;

use anyhow::Result;
use sdaccel::emamodel::REPORT_SCHEMA;
use sdaccel::pssa::{decode, encode_with, index_bits, prune_sas, BitMatrix, CompressedSas, EncodeOptions, PatchMode};
use sdaccel::synth::{synth_sas, SynthSpec};
use sdaccel::QTensorF64;
use serde::Serialize;

use crate::io::{emit_json, read_pssa, read_qtf};
use crate::VerifyArgs;

const SPARSITIES: [f64; 4] = [0.3, 0.5, 0.7, 0.9];
const FLIPS: [f64; 4] = [0.0, 0.1, 0.3, 0.5];

#[derive(Serialize)]
struct Failure {
    case: usize,
    check: &'static str,
    detail: String,
}

#[derive(Serialize)]
struct VerifyReport {
    schema: &'static str,
    kind: &'static str,
    cases: usize,
    passed: usize,
    failed: usize,
    failures: Vec<Failure>,
}

/// Index cost recounted straight from the bitmap: each patch pays a full
/// row-pointer array plus one column index per bit that differs from the
/// patch to its left (first patch of a band: per set bit).
pub fn recount_index_bits(bitmap: &BitMatrix, mode: PatchMode) -> u64 {
    let s = mode.size();
    let rows = bitmap.rows().div_ceil(s) * s;
    let cols = bitmap.cols().div_ceil(s) * s;
    let at = |r: usize, c: usize| r < bitmap.rows() && c < bitmap.cols() && bitmap.get(r, c);
    let mut rp_bits = 0u64;
    while (1u64 << rp_bits) <= (s * s) as u64 {
        rp_bits += 1;
    }
    let mut ci_bits = 0u64;
    while (1u64 << ci_bits) < s as u64 {
        ci_bits += 1;
    }
    let mut total = 0;
    for r0 in (0..rows).step_by(s) {
        for c0 in (0..cols).step_by(s) {
            let mut ones = 0u64;
            for r in r0..r0 + s {
                for c in c0..c0 + s {
                    let bit = if c0 == 0 { at(r, c) } else { at(r, c) != at(r, c - s) };
                    ones += bit as u64;
                }
            }
            total += (s as u64 + 1) * rp_bits + ones * ci_bits;
        }
    }
    total
}

fn check_case(case: usize, sas: &QTensorF64, opts: &EncodeOptions, given: Option<&CompressedSas>, out: &mut Vec<Failure>) {
    let mut fail = |check: &'static str, detail: String| out.push(Failure { case, check, detail });
    let pruned = match prune_sas(sas, opts.threshold) {
        Ok(p) => p,
        Err(e) => return fail("prune", e.to_string()),
    };
    let c = match encode_with(sas, opts) {
        Ok(c) => c,
        Err(e) => return fail("encode", e.to_string()),
    };
    match decode(&c) {
        Ok(d) if d == pruned => {}
        Ok(_) => fail("roundtrip", "decoded matrix differs from pruned input".into()),
        Err(e) => fail("roundtrip", e.to_string()),
    }
    match CompressedSas::from_bytes(&c.to_bytes()) {
        Ok(back) if back == c => {}
        Ok(_) => fail("bytes", "reparsed stream differs".into()),
        Err(e) => fail("bytes", e.to_string()),
    }
    let want = recount_index_bits(&pruned.bitmap, opts.mode);
    let got = index_bits(&c);
    if got != want {
        fail("index_bits", format!("codec reports {got}, recount gives {want}"));
    }
    if let Some(g) = given {
        if *g != c {
            fail("stream", "stream differs from a fresh encoding of the input".into());
        }
        match decode(g) {
            Ok(d) if d == pruned => {}
            Ok(_) => fail("stream", "stream decodes to a different matrix".into()),
            Err(e) => fail("stream", e.to_string()),
        }
    }
}

pub fn run(a: &VerifyArgs) -> Result<ExitCode> {
    let mut failures = Vec::new();
    let cases;
    if let Some(path) = &a.input {
        let sas = read_qtf(path)?;
        let stream = a.stream.as_deref().map(read_pssa).transpose()?;
        let opts = match &stream {
            Some(s) => {
                let (rows, cols) = sas.dims2()?;
                let s_ = s.header.mode.size();
                EncodeOptions {
                    threshold: s.header.threshold as i64,
                    mode: s.header.mode,
                    pad: rows % s_ != 0 || cols % s_ != 0,
                }
            }
            None => EncodeOptions { threshold: a.threshold as i64, mode: a.patch, pad: true },
        };
        check_case(0, &sas, &opts, stream.as_ref(), &mut failures);
        cases = 1;
    } else {
        cases = a.cases.unwrap_or(100);
        for i in 0..cases {
            let mode = PatchMode::ALL[i % 3];
            let s = mode.size();
            let threshold = ((i * 37) % 512) as u16;
            let spec = SynthSpec {
                threshold,
                ..SynthSpec::new(
                    s * (1 + i % 2),
                    s * (1 + (i / 2) % 3),
                    mode,
                    SPARSITIES[(i / 3) % 4],
                    FLIPS[(i / 12) % 4],
                    a.seed.wrapping_add(i as u64),
                )
            };
            let sas = synth_sas::<f64>(&spec)?;
            check_case(i, &sas, &EncodeOptions { threshold: threshold as i64, mode, pad: false }, None, &mut failures);
        }
    }
    let mut failed: Vec<usize> = failures.iter().map(|f| f.case).collect();
    failed.dedup();
    let report = VerifyReport {
        schema: REPORT_SCHEMA,
        kind: "verify",
        cases,
        passed: cases - failed.len(),
        failed: failed.len(),
        failures,
    };
    emit_json(None, &report)?;
    Ok(if report.failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
