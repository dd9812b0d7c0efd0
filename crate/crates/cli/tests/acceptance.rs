//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Oracles here are written against plain integer/float arithmetic and do not
//! call back into the code they check.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdaccel::dbsc::{
    bspe_mac, csr_skip_av, gemm_high, gemm_mixed, pe_column_combine, simulate_dataflow, AccessStats, ArrayGeometry,
    StationaryMode,
};
use sdaccel::emamodel::{ffn_energy, EnergyCoefficients, FfnDims};
use sdaccel::fixedpoint::{bit_slice_u12, IntFormat, QTensor};
use sdaccel::pssa::{
    baseline_rle_bits, decode, encode, encode_with, index_bits, local_csr_index_bits, prune_sas, CompressedSas,
    EncodeOptions, PatchMode, DEFAULT_RLE_RUN_BITS,
};
use sdaccel::synth::{synth_sas, SynthSpec};
use sdaccel::tips::{
    apply_mixed_quantization, default_precision_plan, min_cas, softmax_rows, spot, PrecisionPlan, SpotMask,
    DEFAULT_TIPS_ITERATIONS, DEFAULT_TOTAL_ITERATIONS,
};
use sdaccel::QTensorF64;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let el = start.elapsed();
    if el > limit {
        return Err(format!("took {el:.2?}, limit {limit:?}"));
    }
    Ok(el)
}

// ---------------------------------------------------------------- 1

fn c1_bit_slice_exhaustive() -> Outcome {
    let start = Instant::now();
    for x in 0..4096i32 {
        let s = bit_slice_u12(x).map_err(|e| e.to_string())?;
        for w in -128i32..=127 {
            let w8 = w as i8;
            let left = bspe_mac(s.hi, w8, 0).map_err(|e| e.to_string())?;
            let right = bspe_mac(s.lo, w8, 0).map_err(|e| e.to_string())?;
            let got = pe_column_combine(left, right, true).map_err(|e| e.to_string())?;
            check!(got == x * w, "x={x} w={w}: {got} != {}", x * w);
        }
    }
    let el = within(Duration::from_secs(1), start)?;
    Ok(format!("4096 x 256 products exact in {el:.2?}"))
}

// ---------------------------------------------------------------- 2

fn prune_oracle(t: &QTensorF64, threshold: i32) -> (Vec<(usize, usize)>, Vec<u16>) {
    let (_, cols) = t.dims2().unwrap();
    let mut pos = Vec::new();
    let mut vals = Vec::new();
    for (i, &v) in t.data().iter().enumerate() {
        if v > threshold {
            pos.push((i / cols, i % cols));
            vals.push(v as u16);
        }
    }
    (pos, vals)
}

fn crop(t: &QTensorF64, rows: usize, cols: usize) -> QTensorF64 {
    let (_, c0) = t.dims2().unwrap();
    let data = (0..rows).flat_map(|r| t.data()[r * c0..r * c0 + cols].to_vec()).collect();
    QTensor::new(vec![rows, cols], data, t.format(), t.scale()).unwrap()
}

fn c2_codec_lossless() -> Outcome {
    let start = Instant::now();
    let sparsities = [0.3, 0.5, 0.7, 0.9];
    let flips = [0.0, 0.1, 0.3, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 10_000;
    for i in 0..n {
        let mode = PatchMode::ALL[i % 3];
        let sp = sparsities[(i / 3) % 4];
        let fl = flips[(i / 12) % 4];
        let s = mode.size();
        let threshold: u16 = rng.gen_range(0..2048);
        let spec = SynthSpec {
            threshold,
            ..SynthSpec::new(s * rng.gen_range(1..=2), s * rng.gen_range(1..=3), mode, sp, fl, i as u64)
        };
        let mut sas = synth_sas::<f64>(&spec).map_err(|e| e.to_string())?;
        let pad = i % 5 == 4;
        if pad {
            let (r, c) = sas.dims2().unwrap();
            sas = crop(&sas, rng.gen_range(1..=r), rng.gen_range(1..=c));
        }
        let opts = EncodeOptions { threshold: threshold as i64, mode, pad };
        let c = encode_with(&sas, &opts).map_err(|e| format!("case {i}: {e}"))?;
        let c = CompressedSas::from_bytes(&c.to_bytes()).map_err(|e| format!("case {i}: {e}"))?;
        let d = decode(&c).map_err(|e| format!("case {i}: {e}"))?;
        let (pos, vals) = prune_oracle(&sas, threshold as i32);
        let got_pos: Vec<(usize, usize)> = d.bitmap.iter_ones().collect();
        check!(got_pos == pos && d.values == vals, "case {i} ({mode}, sp {sp}, flip {fl}) not bit-exact");
        let (r, cc) = sas.dims2().unwrap();
        check!(d.rows() == r && d.cols() == cc, "case {i}: shape {}x{} != {r}x{cc}", d.rows(), d.cols());
    }
    let el = within(Duration::from_secs(60), start)?;
    Ok(format!("{n}/{n} round trips bit-exact in {el:.2?}"))
}

// ---------------------------------------------------------------- 3

fn c3_sparsity_augmentation() -> Outcome {
    let mode = PatchMode::P64;
    let (mut pssa, mut local, mut rle) = (0u64, 0u64, 0u64);
    let seeds = 100u64;
    for seed in 0..seeds {
        let sas = synth_sas::<f64>(&SynthSpec::new(256, 256, mode, 0.7, 0.05, seed)).map_err(|e| e.to_string())?;
        let pruned = prune_sas(&sas, 0).map_err(|e| e.to_string())?;
        let l = local_csr_index_bits(&pruned.bitmap, mode).map_err(|e| e.to_string())?;
        // plain patch CSR: 16 patches of 65 13-bit row pointers plus a 6-bit column per set bit
        let want = 16 * 65 * 13 + pruned.bitmap.count_ones() as u64 * 6;
        check!(l == want, "seed {seed}: local CSR {l} != {want}");
        pssa += index_bits(&encode(&sas, 0, mode).map_err(|e| e.to_string())?);
        local += l;
        rle += baseline_rle_bits(&pruned.bitmap, DEFAULT_RLE_RUN_BITS).map_err(|e| e.to_string())?;
    }
    let (mp, ml, mr) = (pssa as f64 / seeds as f64, local as f64 / seeds as f64, rle as f64 / seeds as f64);
    let ratio = mp / ml;
    let detail = format!(
        "mean index bits pssa {mp:.2}, patch-local csr {ml:.2} (ratio {:.2}%), rle {mr:.2}",
        100.0 * ratio
    );
    check!(ratio <= 0.5, "{detail}: exceeds 50% bound");
    check!(mp <= mr, "{detail}: pssa above rle");
    Ok(detail)
}

// ---------------------------------------------------------------- 4

fn ref_matmul(a: &[i64], w: &[i64], m: usize, k: usize, n: usize) -> Vec<i64> {
    let mut out = vec![0i64; m * n];
    for i in 0..m {
        for kk in 0..k {
            for j in 0..n {
                out[i * n + j] += a[i * k + kk] * w[kk * n + j];
            }
        }
    }
    out
}

fn quantize_ref(v: f64, scale: f64, lo: i64, hi: i64) -> i64 {
    ((v / scale).round() as i64).clamp(lo, hi)
}

fn c4_gemm() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut off16 = 0;
    for t in 0..50 {
        let (m, k, n) = if t < 3 {
            [(128, 128, 128), (16, 32, 48), (1, 1, 1)][t]
        } else {
            (rng.gen_range(1..=128), rng.gen_range(1..=128), rng.gen_range(1..=128))
        };
        if m % 16 != 0 || k % 16 != 0 || n % 16 != 0 {
            off16 += 1;
        }
        let a: Vec<i32> = (0..m * k).map(|_| rng.gen_range(0..4096)).collect();
        let w: Vec<i32> = (0..k * n).map(|_| rng.gen_range(-128..128)).collect();
        let at = QTensor::<f64>::new(vec![m, k], a.clone(), IntFormat::U12, 1.0).unwrap();
        let wt = QTensor::<f64>::new(vec![k, n], w.clone(), IntFormat::S8, 1.0).unwrap();
        let got = gemm_high(&at, &wt).map_err(|e| e.to_string())?;
        let a64: Vec<i64> = a.iter().map(|&x| x as i64).collect();
        let w64: Vec<i64> = w.iter().map(|&x| x as i64).collect();
        let want = ref_matmul(&a64, &w64, m, k, n);
        check!(got.data.iter().map(|&x| x as i64).eq(want.iter().copied()), "gemm_high {m}x{k}x{n} mismatch");

        // mixed: each row at its own precision
        let act: Vec<f64> = (0..m * k).map(|_| rng.gen_range(0.0..4095.0) * 0.01).collect();
        let bits: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
        let plan = PrecisionPlan {
            mask: SpotMask::from_bits(bits.clone()),
            high_format: IntFormat::U12,
            low_format: IntFormat::U6,
            apply_iteration_limit: DEFAULT_TIPS_ITERATIONS,
        };
        let (s_hi, s_lo) = (0.01, 0.64);
        let mixed = apply_mixed_quantization(&act, k, &plan, s_hi, s_lo).map_err(|e| e.to_string())?;
        let got = gemm_mixed(&mixed, &wt).map_err(|e| e.to_string())?;
        let qa: Vec<i64> = (0..m * k)
            .map(|idx| {
                if bits[idx / k] {
                    quantize_ref(act[idx], s_hi, 0, 4095)
                } else {
                    quantize_ref(act[idx], s_lo, 0, 63)
                }
            })
            .collect();
        let want = ref_matmul(&qa, &w64, m, k, n);
        check!(got.data.iter().map(|&x| x as i64).eq(want.iter().copied()), "gemm_mixed {m}x{k}x{n} mismatch");
    }
    let el = within(Duration::from_secs(30), start)?;
    Ok(format!("50 triples ({off16} not multiples of 16) exact, high and mixed, in {el:.2?}"))
}

// ---------------------------------------------------------------- 5

fn c5_csr_skip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in 0..20 {
        let mode = *PatchMode::ALL.choose(&mut rng).unwrap();
        let (rows, cols, d) = (rng.gen_range(1..=150), rng.gen_range(1..=150), rng.gen_range(1..=24));
        let threshold = rng.gen_range(0..4000);
        let sas: Vec<i32> = (0..rows * cols).map(|_| rng.gen_range(0..4096)).collect();
        let v: Vec<i32> = (0..cols * d).map(|_| rng.gen_range(-128..128)).collect();
        let st = QTensor::<f64>::new(vec![rows, cols], sas.clone(), IntFormat::U12, 1.0).unwrap();
        let vt = QTensor::<f64>::new(vec![cols, d], v.clone(), IntFormat::S8, 1.0).unwrap();
        let c = encode_with(&st, &EncodeOptions { threshold, mode, pad: true }).map_err(|e| e.to_string())?;
        let (out, stats) = csr_skip_av(&c, &vt).map_err(|e| e.to_string())?;
        let dense = decode(&c).map_err(|e| e.to_string())?.to_dense(1.0f64).map_err(|e| e.to_string())?;
        let a64: Vec<i64> = dense.data().iter().map(|&x| x as i64).collect();
        let v64: Vec<i64> = v.iter().map(|&x| x as i64).collect();
        let want = ref_matmul(&a64, &v64, rows, cols, d);
        check!(out.data.iter().map(|&x| x as i64).eq(want.iter().copied()), "case {t}: A·V mismatch");
        let nnz = sas.iter().filter(|&&x| x as i64 > threshold).count();
        let skipped = ((rows * cols - nnz) * d) as u64;
        check!(stats.mac_skipped == skipped, "case {t}: mac_skipped {} != {skipped}", stats.mac_skipped);
    }
    Ok("20 cases match dense A·V; mac_skipped exact".into())
}

// ---------------------------------------------------------------- 6

fn c6_tips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for t in 0..1000 {
        let n = rng.gen_range(1..200);
        let cas: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-4..1.0)).collect();
        let m = cas.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut deltas: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..4.0)).collect();
        deltas.sort_by(f64::total_cmp);
        let masks: Vec<SpotMask> = deltas.iter().map(|&d| spot(&cas, m, d).unwrap()).collect();
        for w in masks.windows(2) {
            check!(w[0].is_subset_of(&w[1]), "vector {t}: mask not monotone in delta");
        }
    }
    for t in 0..200 {
        // coarse values so ties are common
        let n = rng.gen_range(1..64);
        let cas: Vec<f64> = (0..n).map(|_| rng.gen_range(1..6) as f64 / 8.0).collect();
        let m = min_cas(&cas).unwrap();
        let mask = spot(&cas, m, 0.0).unwrap();
        let want: Vec<bool> = cas.iter().map(|&c| c == m).collect();
        check!(mask.bits() == want.as_slice(), "tie case {t}: delta=0 mask != argmin ties");
    }
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..80);
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let p = softmax_rows(&row, n);
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    check!(worst <= 1e-9, "softmax row sum off by {worst:e}");
    for t in 0..100 {
        let n = rng.gen_range(2..80);
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let before = softmax_rows(&row, n)[0];
        let j = rng.gen_range(1..n);
        let mut r2 = row.clone();
        r2[j] += rng.gen_range(1e-3..2.0);
        let after = softmax_rows(&r2, n)[0];
        check!(after < before, "row {t}: CAS {before} -> {after} after raising logit {j}");
    }
    Ok(format!("monotone on 1000 vectors, ties exact, max softmax error {worst:.1e}, 100 perturbations"))
}

// ---------------------------------------------------------------- 7

/// Element-by-element walk of the tile loops; `ch` channels per PE.
fn loop_nest(rows: usize, k: usize, n: usize, ch: usize, ws: bool, g: &ArrayGeometry) -> AccessStats {
    let mut s = AccessStats::default();
    if rows == 0 || k == 0 || n == 0 {
        return s;
    }
    let span = g.pe_rows * ch;
    let ktiles: Vec<(usize, usize)> = (0..k).step_by(span).map(|k0| (k0, (k0 + span).min(k))).collect();
    let pairs = |k0: usize, k1: usize| (k0..k1).step_by(ch).count() as u64;
    if ws {
        for n0 in (0..n).step_by(g.pe_cols) {
            let n1 = (n0 + g.pe_cols).min(n);
            for _ in 0..rows * k {
                s.gmem_reads += 1;
                s.imem_writes += 1;
            }
            for &(k0, k1) in &ktiles {
                for _ in 0..(k1 - k0) * (n1 - n0) {
                    s.gmem_reads += 1;
                    s.wmem_writes += 1;
                    s.wmem_reads += 1;
                }
                for _ in 0..rows {
                    s.imem_reads += (k1 - k0) as u64;
                    for _ in n0..n1 {
                        s.mac_count += pairs(k0, k1);
                        s.omem_writes += 1;
                        s.omem_reads += (k0 > 0) as u64;
                    }
                }
            }
            for _ in 0..rows * (n1 - n0) {
                s.omem_reads += 1;
                s.gmem_writes += 1;
            }
        }
    } else {
        for m0 in (0..rows).step_by(g.pe_cols) {
            let m1 = (m0 + g.pe_cols).min(rows);
            for &(k0, k1) in &ktiles {
                for _ in 0..(m1 - m0) * (k1 - k0) {
                    s.gmem_reads += 1;
                    s.imem_writes += 1;
                    s.imem_reads += 1;
                }
                for _ in 0..n {
                    for _ in k0..k1 {
                        s.gmem_reads += 1;
                        s.wmem_writes += 1;
                        s.wmem_reads += 1;
                    }
                    for _ in m0..m1 {
                        s.mac_count += pairs(k0, k1);
                        s.omem_writes += 1;
                        s.omem_reads += (k0 > 0) as u64;
                    }
                }
            }
            for _ in 0..(m1 - m0) * n {
                s.omem_reads += 1;
                s.gmem_writes += 1;
            }
        }
    }
    s
}

fn c7_dataflow() -> Outcome {
    let g = ArrayGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (mode, ws) in [(StationaryMode::InputStationary, false), (StationaryMode::WeightStationary, true)] {
        for t in 0..20 {
            let (m, k, n) = (rng.gen_range(1..=200), rng.gen_range(1..=200), rng.gen_range(1..=200));
            let low_rows = [0, m / 4, m / 2, m][t % 4];
            let ratio = low_rows as f64 / m as f64;
            let mut want = loop_nest(m - low_rows, k, n, 1, ws, &g);
            want += loop_nest(low_rows, k, n, 2, ws, &g);
            let got = simulate_dataflow(m, k, n, mode, &g, ratio).map_err(|e| e.to_string())?;
            check!(got == want, "{mode:?} {m}x{k}x{n} low {low_rows}: {got:?} != {want:?}");
        }
    }
    let ws = simulate_dataflow(1024, 16, 16, StationaryMode::WeightStationary, &g, 0.0).map_err(|e| e.to_string())?;
    check!(ws.wmem_writes == 256 && ws.imem_reads == 1024 * 16, "WS 1024x16x16 example: {ws:?}");
    for &(m, k, n) in &[(64, 64, 64), (100, 320, 48), (7, 32, 3)] {
        for mode in [StationaryMode::InputStationary, StationaryMode::WeightStationary] {
            let hi = simulate_dataflow(m, k, n, mode, &g, 0.0).map_err(|e| e.to_string())?;
            let lo = simulate_dataflow(m, k, n, mode, &g, 1.0).map_err(|e| e.to_string())?;
            check!(hi.mac_count == (m * k * n) as u64, "{mode:?}: high MACs {}", hi.mac_count);
            check!(2 * lo.mac_count == hi.mac_count, "{mode:?} {m}x{k}x{n}: low {} vs high {}", lo.mac_count, hi.mac_count);
        }
    }
    let dims = FfnDims { d_in: 320, d_hidden: 1280, d_out: 320 };
    for coeff in [EnergyCoefficients::default(), EnergyCoefficients { ema_pj_per_byte: 5.0, onchip_pj_per_byte: 2.0, mac_pj_high: 3.0, mac_pj_low: 1.0 }] {
        let g0 = ffn_energy(4096, 0.0, &coeff, &dims).map_err(|e| e.to_string())?.efficiency_gain;
        check!(g0 == 0.0, "gain(0) = {g0}");
        let mut prev = g0;
        for i in 1..=20 {
            let gi = ffn_energy(4096, i as f64 / 20.0, &coeff, &dims).map_err(|e| e.to_string())?.efficiency_gain;
            check!(gi > prev, "gain not increasing at ratio {}", i as f64 / 20.0);
            prev = gi;
        }
    }
    Ok("40 random shapes match loop-nest oracle; all-low issues half the MACs; gain(0)=0 and increasing".into())
}

// ---------------------------------------------------------------- 8

fn c8_config() -> Outcome {
    check!(DEFAULT_TOTAL_ITERATIONS == 25 && DEFAULT_TIPS_ITERATIONS == 20, "iteration schedule");
    let mask = SpotMask::from_bits(vec![true, false, false, true]);
    for it in 0..25 {
        let plan = default_precision_plan(mask.clone(), it).map_err(|e| e.to_string())?;
        let want = if it < 20 { mask.clone() } else { SpotMask::all(4, true) };
        check!(plan.mask == want, "iteration {it}: wrong mask");
        check!(plan.high_format == IntFormat::U12 && plan.low_format == IntFormat::U6, "plan formats");
    }
    check!(default_precision_plan(mask, 25).is_err(), "iteration 25 accepted");
    for s in [1, 8, 15, 17, 48, 63, 65, 128, 256] {
        check!(PatchMode::from_size(s).is_err(), "patch size {s} accepted");
    }
    let sizes: Vec<usize> = PatchMode::ALL.iter().map(|m| m.size()).collect();
    check!(sizes == [16, 32, 64], "patch modes {sizes:?}");
    let g = ArrayGeometry::default();
    check!(g.pe_rows == 16 && g.pe_cols == 16, "PE array");
    check!(g.clusters == 4 && g.cores_per_cluster == 4, "cluster layout");
    check!(g.imem_bytes == 6 * 1024, "imem {}", g.imem_bytes);
    check!(g.wmem_bytes * 4 == 9 * 1024, "wmem {}", g.wmem_bytes);
    check!(g.omem_bytes == 12 * 1024, "omem {}", g.omem_bytes);
    check!(g.gmem_bytes == 192 * 1024, "gmem {}", g.gmem_bytes);
    Ok("schedule 20/25, patch modes {16,32,64}, geometry 16x16 / 6 KB / 2.25 KB / 12 KB / 192 KB".into())
}

// ---------------------------------------------------------------- 9

fn sdaccel(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sdaccel")).args(args).output().expect("spawn sdaccel")
}

fn c9_cli() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    for seed in 0..100u64 {
        let s = [16, 32, 64][seed as usize % 3];
        let (rows, cols) = ((s * (1 + seed as usize % 2)).to_string(), (s * (1 + seed as usize % 3)).to_string());
        let (qtf, pssa) = (p(&format!("s{seed}.qtf")), p(&format!("s{seed}.pssa")));
        let (seed_s, patch) = (seed.to_string(), s.to_string());
        let sp = ["0.3", "0.5", "0.7", "0.9"][seed as usize % 4];
        let fl = ["0", "0.1", "0.3", "0.5"][(seed as usize / 4) % 4];
        let steps: [Vec<&str>; 3] = [
            vec!["synth", "--rows", &rows, "--cols", &cols, "--patch", &patch, "--sparsity", sp, "--flip-rate", fl, "--seed", &seed_s, "--out", &qtf],
            vec!["encode", "--input", &qtf, "--patch", &patch, "--out", &pssa],
            vec!["verify", "--input", &qtf, "--stream", &pssa],
        ];
        for step in &steps {
            let out = sdaccel(step);
            check!(
                out.status.success(),
                "seed {seed}: `{}` exited {:?}: {}",
                step[0],
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            );
        }
    }
    let out = sdaccel(&["bench", "--rows", "64", "--cols", "128", "--trials", "2", "--sparsity", "0.5,0.7", "--flip-rate", "0.3,0"]);
    check!(out.status.success(), "bench failed: {}", String::from_utf8_lossy(&out.stderr));
    check_bench_csv(&out.stdout, 2 * 2 * 3)?;
    Ok("100 synth/encode/verify pipelines exit 0; bench CSV schema valid".into())
}

fn check_bench_csv(bytes: &[u8], expect_rows: usize) -> Result<(), String> {
    let cols = ["flip_rate", "sparsity", "patch_mode", "raw_bytes", "csr_bits", "rle_bits", "pssa_bits", "reduction_vs_csr_pct"];
    let mut rd = csv::Reader::from_reader(bytes);
    let head: Vec<String> = rd.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    check!(head == cols, "header {head:?}");
    let mut keys = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        check!(rec.len() == cols.len(), "row width {}", rec.len());
        let f: f64 = rec[0].parse().map_err(|_| format!("flip_rate {:?}", &rec[0]))?;
        let s: f64 = rec[1].parse().map_err(|_| format!("sparsity {:?}", &rec[1]))?;
        let m: usize = rec[2].parse().map_err(|_| format!("patch_mode {:?}", &rec[2]))?;
        check!((0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&s), "rates out of range");
        check!([16, 32, 64].contains(&m), "patch_mode {m}");
        let ints: Vec<u64> = (3..7).map(|i| rec[i].parse::<u64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let red: f64 = rec[7].parse().map_err(|_| format!("reduction {:?}", &rec[7]))?;
        check!(rec[7].split('.').nth(1).is_some_and(|d| d.len() == 1), "reduction {:?} not one decimal", &rec[7]);
        let want = ((1.0 - ints[3] as f64 / ints[1] as f64) * 1000.0).round() / 10.0;
        check!((red - want).abs() < 1e-9, "reduction {red} != {want}");
        keys.push((f, s, m));
    }
    check!(keys.len() == expect_rows, "{} rows, expected {expect_rows}", keys.len());
    check!(keys.windows(2).all(|w| w[0].0 < w[1].0 || (w[0].0 == w[1].0 && (w[0].1, w[0].2) < (w[1].1, w[1].2))), "rows not sorted");
    Ok(())
}

fn main() -> ExitCode {
    // cargo passes harness flags such as --list; only run on a plain invocation
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 bit-slice exhaustive equivalence", c1_bit_slice_exhaustive),
        ("2 codec losslessness", c2_codec_lossless),
        ("3 sparsity-augmentation benefit", c3_sparsity_augmentation),
        ("4 GEMM equivalence", c4_gemm),
        ("5 CSR input skipping", c5_csr_skip),
        ("6 TIPS properties", c6_tips),
        ("7 dataflow counters", c7_dataflow),
        ("8 configuration fidelity", c8_config),
        ("9 end-to-end CLI", c9_cli),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match res {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
