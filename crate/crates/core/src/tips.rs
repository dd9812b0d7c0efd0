//! Text-guided pixel importance and the INT12/INT6 activation plan.
//!
//! Cross-attention probabilities are computed against a text key set whose
//! first token is CLS. A pixel whose CLS attention (CAS) is close to the
//! minimum over all pixels puts most of its mass on the real text tokens and
//! is treated as important.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fixedpoint::{dequantize, quantize, IntFormat, QTensor};
use crate::scalar::Real;

pub const DEFAULT_TOTAL_ITERATIONS: usize = 25;
pub const DEFAULT_TIPS_ITERATIONS: usize = 20;
pub const DEFAULT_DELTA: f64 = 1.0;

/// Row-stochastic `n_pixels × n_text` probabilities; column 0 is CLS.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionScores<S> {
    n_pixels: usize,
    n_text: usize,
    probs: Vec<S>,
}

impl<S: Real> AttentionScores<S> {
    pub fn from_probs(n_pixels: usize, n_text: usize, probs: Vec<S>) -> Result<Self> {
        if n_text == 0 || probs.len() != n_pixels * n_text {
            return Err(Error::Shape(format!(
                "{} probabilities for {n_pixels}x{n_text}",
                probs.len()
            )));
        }
        Ok(AttentionScores { n_pixels, n_text, probs })
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn n_text(&self) -> usize {
        self.n_text
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.probs[i * self.n_text..(i + 1) * self.n_text]
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }
}

/// Max-subtracted softmax of each row of a `rows × n_cols` logit matrix.
pub fn softmax_rows<S: Real>(logits: &[S], n_cols: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(logits.len());
    if n_cols == 0 {
        return out;
    }
    for row in logits.chunks(n_cols) {
        let m = row.iter().copied().fold(S::neg_infinity(), S::max);
        let start = out.len();
        let mut sum = S::zero();
        for &v in row {
            let e = (v - m).exp();
            sum = sum + e;
            out.push(e);
        }
        for e in &mut out[start..] {
            *e = *e / sum;
        }
    }
    out
}

/// `softmax(q · kᵀ [/ √d])` on dequantized operands.
pub fn cross_attention_probs<S: Real>(
    q: &QTensor<S>,
    k: &QTensor<S>,
    inv_sqrt_d_scaling: bool,
) -> Result<AttentionScores<S>> {
    let (n_pixels, d) = q.dims2()?;
    let (n_text, dk) = k.dims2()?;
    if d != dk {
        return Err(Error::Shape(format!("query dim {d} != key dim {dk}")));
    }
    if n_text < 2 {
        return Err(Error::Shape(format!("need CLS plus at least one text key, got {n_text}")));
    }
    let qf = dequantize(q);
    let kf = dequantize(k);
    let scale = if inv_sqrt_d_scaling && d > 0 {
        S::one() / S::lit(d as f64).sqrt()
    } else {
        S::one()
    };
    let mut logits = Vec::with_capacity(n_pixels * n_text);
    for qi in qf.chunks(d.max(1)).take(n_pixels) {
        for kj in kf.chunks(d.max(1)).take(n_text) {
            let dot = qi.iter().zip(kj).fold(S::zero(), |a, (&x, &y)| a + x * y);
            logits.push(dot * scale);
        }
    }
    if d == 0 {
        logits = vec![S::zero(); n_pixels * n_text];
    }
    AttentionScores::from_probs(n_pixels, n_text, softmax_rows(&logits, n_text))
}

/// CLS column of the probabilities.
pub fn extract_cas<S: Real>(s: &AttentionScores<S>) -> Vec<S> {
    (0..s.n_pixels).map(|i| s.probs[i * s.n_text]).collect()
}

pub fn min_cas<S: Real>(cas: &[S]) -> Result<S> {
    cas.iter()
        .copied()
        .reduce(S::min)
        .ok_or_else(|| Error::InvalidArgument("empty CAS vector".into()))
}

/// Per-pixel importance flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpotMask {
    important: Vec<bool>,
}

const MASK_MAGIC: &[u8; 5] = b"MASK1";

impl SpotMask {
    pub fn from_bits(important: Vec<bool>) -> Self {
        SpotMask { important }
    }

    pub fn all(n: usize, v: bool) -> Self {
        SpotMask { important: vec![v; n] }
    }

    pub fn len(&self) -> usize {
        self.important.len()
    }

    pub fn is_empty(&self) -> bool {
        self.important.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.important
    }

    pub fn is_important(&self, i: usize) -> bool {
        self.important[i]
    }

    pub fn count(&self) -> usize {
        self.important.iter().filter(|&&b| b).count()
    }

    /// Indices of spotted pixels, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.important.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn is_subset_of(&self, other: &SpotMask) -> bool {
        self.len() == other.len() && self.important.iter().zip(&other.important).all(|(&a, &b)| !a || b)
    }

    /// `MASK1`: magic, little-endian `u32` pixel count, LSB-first packed bits.
    pub fn write_mask<W: Write>(&self, mut w: W) -> Result<()> {
        let n = u32::try_from(self.len()).map_err(|_| Error::Shape("mask too long".into()))?;
        w.write_all(MASK_MAGIC)?;
        w.write_all(&n.to_le_bytes())?;
        let mut packed = vec![0u8; self.len().div_ceil(8)];
        for (i, _) in self.important.iter().enumerate().filter(|(_, &b)| b) {
            packed[i / 8] |= 1 << (i % 8);
        }
        w.write_all(&packed)?;
        Ok(())
    }

    pub fn read_mask<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 9];
        r.read_exact(&mut head).map_err(|_| Error::Malformed("truncated MASK1 header".into()))?;
        if &head[..5] != MASK_MAGIC {
            return Err(Error::Malformed("bad MASK1 magic".into()));
        }
        let n = u32::from_le_bytes([head[5], head[6], head[7], head[8]]) as usize;
        let mut packed = Vec::new();
        r.read_to_end(&mut packed)?;
        if packed.len() != n.div_ceil(8) {
            return Err(Error::Malformed(format!("{} mask bytes for {n} pixels", packed.len())));
        }
        if n % 8 != 0 && packed[n / 8] >> (n % 8) != 0 {
            return Err(Error::Malformed("non-zero mask padding".into()));
        }
        Ok(SpotMask { important: (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect() })
    }
}

/// Spot pixels with `cas ≤ m·(1 + delta)` where `m` is the minimum CAS.
pub fn spot<S: Real>(cas: &[S], m: S, delta: S) -> Result<SpotMask> {
    if !(delta >= S::zero()) {
        return Err(Error::InvalidArgument("delta must be non-negative".into()));
    }
    let actual = min_cas(cas)?;
    if (actual - m).abs() > S::lit(1e-12) {
        return Err(Error::InvalidArgument(format!("m = {m} is not min(cas) = {actual}")));
    }
    let threshold = m * (S::one() + delta);
    Ok(SpotMask {
        // the minimum itself always passes, even when delta is infinite
        important: cas.iter().map(|&c| c <= threshold || c <= m).collect(),
    })
}

/// Absolute-threshold spotting, `cas ≤ t_abs`. The argmin pixel is always kept.
pub fn spot_absolute<S: Real>(cas: &[S], t_abs: S) -> Result<SpotMask> {
    let m = min_cas(cas)?;
    Ok(SpotMask { important: cas.iter().map(|&c| c <= t_abs || c <= m).collect() })
}

/// Which rows keep high precision in the FFN of one denoising iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecisionPlan {
    pub mask: SpotMask,
    pub high_format: IntFormat,
    pub low_format: IntFormat,
    /// Iterations below this index use the spotted mask.
    pub apply_iteration_limit: usize,
}

impl PrecisionPlan {
    pub fn is_high(&self, row: usize) -> bool {
        self.mask.is_important(row)
    }
}

pub fn build_precision_plan(
    mask: SpotMask,
    iteration: usize,
    total_iterations: usize,
    tips_iterations: usize,
) -> Result<PrecisionPlan> {
    if tips_iterations > total_iterations {
        return Err(Error::InvalidArgument(format!(
            "tips_iterations {tips_iterations} > total_iterations {total_iterations}"
        )));
    }
    if iteration >= total_iterations {
        return Err(Error::InvalidArgument(format!(
            "iteration {iteration} outside 0..{total_iterations}"
        )));
    }
    let mask = if iteration >= tips_iterations { SpotMask::all(mask.len(), true) } else { mask };
    Ok(PrecisionPlan {
        mask,
        high_format: IntFormat::U12,
        low_format: IntFormat::U6,
        apply_iteration_limit: tips_iterations,
    })
}

/// Plan with the default 25-step schedule, TIPS active for the first 20.
pub fn default_precision_plan(mask: SpotMask, iteration: usize) -> Result<PrecisionPlan> {
    build_precision_plan(mask, iteration, DEFAULT_TOTAL_ITERATIONS, DEFAULT_TIPS_ITERATIONS)
}

/// Fraction of pixels left at low precision.
pub fn low_precision_ratio(plan: &PrecisionPlan) -> f64 {
    if plan.mask.is_empty() {
        return 0.0;
    }
    1.0 - plan.mask.count() as f64 / plan.mask.len() as f64
}

/// Low-precision scale that spans the same real range as the high format.
pub fn default_low_scale<S: Real>(scale_hi: S) -> S {
    scale_hi * S::lit(64.0)
}

/// Row-major integer matrix whose rows carry their own format and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedQTensor<S> {
    rows: usize,
    cols: usize,
    data: Vec<i32>,
    row_high: Vec<bool>,
    high_format: IntFormat,
    low_format: IntFormat,
    scale_hi: S,
    scale_lo: S,
}

impl<S: Real> MixedQTensor<S> {
    /// Assemble from pre-quantized rows; each row is checked against its format.
    pub fn new(
        rows: usize,
        cols: usize,
        data: Vec<i32>,
        row_high: Vec<bool>,
        high_format: IntFormat,
        low_format: IntFormat,
        scale_hi: S,
        scale_lo: S,
    ) -> Result<Self> {
        if data.len() != rows * cols || row_high.len() != rows {
            return Err(Error::Shape("mixed tensor data/tag length mismatch".into()));
        }
        for (r, row) in data.chunks(cols.max(1)).take(rows).enumerate() {
            let f = if row_high[r] { high_format } else { low_format };
            if let Some(&v) = row.iter().find(|&&v| !f.contains(v as i64)) {
                return Err(Error::OutOfRange { value: v as i64, format: f.to_string() });
            }
        }
        Ok(MixedQTensor { rows, cols, data, row_high, high_format, low_format, scale_hi, scale_lo })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[i32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_high(&self, r: usize) -> bool {
        self.row_high[r]
    }

    pub fn row_format(&self, r: usize) -> IntFormat {
        if self.row_high[r] {
            self.high_format
        } else {
            self.low_format
        }
    }

    pub fn row_scale(&self, r: usize) -> S {
        if self.row_high[r] {
            self.scale_hi
        } else {
            self.scale_lo
        }
    }

    pub fn high_format(&self) -> IntFormat {
        self.high_format
    }

    pub fn low_format(&self) -> IntFormat {
        self.low_format
    }
}

/// Quantize each row of an `n_pixels × d` activation with the format chosen by
/// the plan.
pub fn apply_mixed_quantization<S: Real>(
    ffn_activation: &[S],
    d: usize,
    plan: &PrecisionPlan,
    scale_hi: S,
    scale_lo: S,
) -> Result<MixedQTensor<S>> {
    let n = plan.mask.len();
    if ffn_activation.len() != n * d {
        return Err(Error::Shape(format!(
            "activation has {} values, mask expects {n}x{d}",
            ffn_activation.len()
        )));
    }
    let mut data = Vec::with_capacity(n * d);
    for r in 0..n {
        let row = &ffn_activation[r * d..(r + 1) * d];
        let q = if plan.is_high(r) {
            quantize(row, plan.high_format, scale_hi)?
        } else {
            quantize(row, plan.low_format, scale_lo)?
        };
        data.extend_from_slice(q.data());
    }
    MixedQTensor::new(
        n,
        d,
        data,
        plan.mask.bits().to_vec(),
        plan.high_format,
        plan.low_format,
        scale_hi,
        scale_lo,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q2(rows: usize, cols: usize, data: Vec<i32>) -> QTensor<f64> {
        QTensor::new(vec![rows, cols], data, IntFormat::new(8, true).unwrap(), 0.5).unwrap()
    }

    #[test]
    fn uniform_rows_for_constant_logits() {
        let q = q2(3, 2, vec![0, 0, 0, 0, 0, 0]);
        let k = q2(4, 2, vec![1, 2, 3, 4, 5, 6, 7, 8]);
        let s = cross_attention_probs(&q, &k, true).unwrap();
        assert!(s.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert_eq!(extract_cas(&s), vec![0.25; 3]);
    }

    #[test]
    fn softmax_scalar_oracle() {
        // e^0 / (e^0 + 3) = 1/4
        let p = softmax_rows(&[0.0f64, 3f64.ln()], 2);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rows_sum_to_one() {
        let q = q2(5, 3, (0..15).map(|i| (i * 37 % 255) - 127).collect());
        let k = q2(6, 3, (0..18).map(|i| (i * 53 % 255) - 127).collect());
        for scaled in [false, true] {
            let s = cross_attention_probs(&q, &k, scaled).unwrap();
            for i in 0..5 {
                let sum: f64 = s.row(i).iter().sum();
                assert!((sum - 1.0).abs() <= 1e-9);
                assert!(s.row(i).iter().all(|&p| (0.0..=1.0).contains(&p)));
            }
        }
    }

    #[test]
    fn attention_errors() {
        let q = q2(2, 3, vec![0; 6]);
        assert!(cross_attention_probs(&q, &q2(2, 2, vec![0; 4]), false).is_err());
        assert!(cross_attention_probs(&q, &q2(1, 3, vec![0; 3]), false).is_err());
    }

    #[test]
    fn cas_column_read() {
        let s = AttentionScores::from_probs(2, 2, vec![0.1, 0.9, 0.6, 0.4]).unwrap();
        assert_eq!(extract_cas(&s), vec![0.1, 0.6]);
    }

    #[test]
    fn min_examples() {
        assert_eq!(min_cas(&[0.3, 0.1, 0.2]).unwrap(), 0.1);
        assert_eq!(min_cas(&[0.2; 5]).unwrap(), 0.2);
        assert!(min_cas::<f64>(&[]).is_err());
    }

    #[test]
    fn spot_examples() {
        let cas = [0.1, 0.5, 0.2];
        assert_eq!(spot(&cas, 0.1, 0.5).unwrap().bits(), &[true, false, false]);
        assert_eq!(spot(&cas, 0.1, 1.0).unwrap().bits(), &[true, false, true]);
        assert_eq!(spot(&cas, 0.1, f64::INFINITY).unwrap().count(), 3);
        let ties = [0.2, 0.1, 0.1, 0.3];
        assert_eq!(spot(&ties, 0.1, 0.0).unwrap().indices(), vec![1, 2]);
        assert!(spot(&cas, 0.2, 0.0).is_err());
        assert!(spot(&cas, 0.1, -1.0).is_err());
    }

    #[test]
    fn spot_absolute_keeps_argmin() {
        let m = spot_absolute(&[0.4, 0.3, 0.5], 0.1).unwrap();
        assert_eq!(m.indices(), vec![1]);
        let m = spot_absolute(&[0.4, 0.3, 0.5], 0.45).unwrap();
        assert_eq!(m.indices(), vec![0, 1]);
    }

    #[test]
    fn plan_schedule() {
        let mask = SpotMask::from_bits(vec![true, false, false, false]);
        let p = default_precision_plan(mask.clone(), 24).unwrap();
        assert_eq!(p.mask.count(), 4);
        let p = default_precision_plan(mask.clone(), 19).unwrap();
        assert_eq!(p.mask, mask);
        let p = build_precision_plan(mask.clone(), 0, 25, 20).unwrap();
        assert_eq!(p.mask, mask);
        assert_eq!(low_precision_ratio(&p), 0.75);
        for it in 0..25 {
            let p = build_precision_plan(mask.clone(), it, 25, 0).unwrap();
            assert_eq!(low_precision_ratio(&p), 0.0);
        }
        assert!(build_precision_plan(mask.clone(), 0, 25, 26).is_err());
        assert!(build_precision_plan(mask, 25, 25, 20).is_err());
    }

    #[test]
    fn mixed_quantization_dispatch() {
        let act = [1.0, 2.0, 30.0, 40.0];
        let all_hi = PrecisionPlan {
            mask: SpotMask::all(2, true),
            high_format: IntFormat::U12,
            low_format: IntFormat::U6,
            apply_iteration_limit: 20,
        };
        let m = apply_mixed_quantization(&act, 2, &all_hi, 0.1, 6.4).unwrap();
        assert_eq!(m.data(), quantize(&act, IntFormat::U12, 0.1).unwrap().data());

        let all_lo = PrecisionPlan { mask: SpotMask::all(2, false), ..all_hi.clone() };
        let m = apply_mixed_quantization(&act, 2, &all_lo, 0.1, 1.0).unwrap();
        assert_eq!(m.data(), quantize(&act, IntFormat::U6, 1.0).unwrap().data());

        let mixed = PrecisionPlan { mask: SpotMask::from_bits(vec![false, true]), ..all_hi };
        let m = apply_mixed_quantization(&act, 2, &mixed, 0.1, 1.0).unwrap();
        assert_eq!(m.row(0), &[1, 2]);
        assert_eq!(m.row(1), &[300, 400]);
        assert_eq!((m.row_format(0), m.row_format(1)), (IntFormat::U6, IntFormat::U12));
        assert!(apply_mixed_quantization(&act, 3, &mixed, 0.1, 1.0).is_err());
    }

    #[test]
    fn mask_file_roundtrip() {
        let m = SpotMask::from_bits((0..19).map(|i| i % 3 == 0).collect());
        let mut buf = Vec::new();
        m.write_mask(&mut buf).unwrap();
        assert_eq!(buf.len(), 5 + 4 + 3);
        assert_eq!(SpotMask::read_mask(&buf[..]).unwrap(), m);
        let mut bad = buf.clone();
        bad[11] |= 0x80;
        assert!(SpotMask::read_mask(&bad[..]).is_err());
        assert!(SpotMask::read_mask(&buf[..10]).is_err());
    }
}
