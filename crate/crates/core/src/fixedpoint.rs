//! Integer number formats, quantization, the 12-bit bit slicer and the
//! SIMD-core activation / normalization math.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bit width and signedness of an integer container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntFormat {
    bits: u8,
    signed: bool,
}

impl IntFormat {
    /// 12-bit unsigned activation (high precision).
    pub const U12: IntFormat = IntFormat { bits: 12, signed: false };
    /// 6-bit unsigned activation (low precision).
    pub const U6: IntFormat = IntFormat { bits: 6, signed: false };
    /// 8-bit signed weight.
    pub const S8: IntFormat = IntFormat { bits: 8, signed: true };
    /// 7-bit signed slice container fed to a BSPE.
    pub const S7: IntFormat = IntFormat { bits: 7, signed: true };
    /// 32-bit signed accumulator.
    pub const S32: IntFormat = IntFormat { bits: 32, signed: true };

    /// Data is stored as `i32`, so unsigned formats stop at 31 bits.
    pub fn new(bits: u8, signed: bool) -> Result<Self> {
        let max_bits = if signed { 32 } else { 31 };
        if bits == 0 || bits > max_bits {
            return Err(Error::InvalidFormat(format!(
                "{} bits ({})",
                bits,
                if signed { "signed" } else { "unsigned" }
            )));
        }
        Ok(IntFormat { bits, signed })
    }

    pub fn bits(self) -> u8 {
        self.bits
    }

    pub fn signed(self) -> bool {
        self.signed
    }

    pub fn min(self) -> i64 {
        if self.signed {
            -(1i64 << (self.bits - 1))
        } else {
            0
        }
    }

    pub fn max(self) -> i64 {
        if self.signed {
            (1i64 << (self.bits - 1)) - 1
        } else {
            (1i64 << self.bits) - 1
        }
    }

    pub fn contains(self, v: i64) -> bool {
        v >= self.min() && v <= self.max()
    }

    fn check(self, v: i64) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::OutOfRange { value: v, format: self.to_string() })
        }
    }
}

impl fmt::Display for IntFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.signed { "S" } else { "U" }, self.bits)
    }
}

/// Integer tensor with a single per-tensor scale: `real = data · scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTensor<S> {
    shape: Vec<usize>,
    data: Vec<i32>,
    format: IntFormat,
    scale: S,
}

fn check_scale<S: Real>(scale: S) -> Result<()> {
    if scale.is_finite() && scale > S::zero() {
        Ok(())
    } else {
        Err(Error::InvalidScale(scale.as_f64()))
    }
}

impl<S: Real> QTensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<i32>, format: IntFormat, scale: S) -> Result<Self> {
        check_scale(scale)?;
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} holds {} elements, data has {}",
                shape,
                n,
                data.len()
            )));
        }
        for &v in &data {
            format.check(v as i64)?;
        }
        Ok(QTensor { shape, data, format, scale })
    }

    pub fn zeros(shape: Vec<usize>, format: IntFormat, scale: S) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![0; n], format, scale)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn format(&self) -> IntFormat {
        self.format
    }

    pub fn scale(&self) -> S {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_data(self) -> Vec<i32> {
        self.data
    }

    /// Rows and columns of a 2-D tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Shape(format!("expected a 2-D tensor, got shape {:?}", self.shape))),
        }
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {} elements into {:?}",
                self.data.len(),
                shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Serialize as a `QTF1` file.
    pub fn write_qtf<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(QTF_MAGIC)?;
        w.write_all(&(self.shape.len() as u32).to_le_bytes())?;
        for &d in &self.shape {
            let d = u32::try_from(d).map_err(|_| Error::Shape(format!("dimension {d} exceeds u32")))?;
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&[self.format.bits, self.format.signed as u8])?;
        w.write_all(&self.scale.as_f64().to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_qtf<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != QTF_MAGIC {
            return Err(Error::Malformed("bad QTF1 magic".into()));
        }
        let rank = read_u32(&mut r)? as usize;
        if rank > 16 {
            return Err(Error::Malformed(format!("implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r)? as usize);
        }
        let mut fmt = [0u8; 2];
        r.read_exact(&mut fmt).map_err(truncated)?;
        let signed = match fmt[1] {
            0 => false,
            1 => true,
            f => return Err(Error::Malformed(format!("bad signed flag {f}"))),
        };
        let format = IntFormat::new(fmt[0], signed)?;
        let mut sc = [0u8; 8];
        r.read_exact(&mut sc).map_err(truncated)?;
        let scale = S::from_f64(f64::from_le_bytes(sc))
            .ok_or_else(|| Error::Malformed("unrepresentable scale".into()))?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Malformed("element count overflows".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != n * 4 {
            return Err(Error::Malformed(format!(
                "expected {} element bytes, found {}",
                n * 4,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        QTensor::new(shape, data, format, scale)
    }

    pub fn to_qtf_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_qtf(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

const QTF_MAGIC: &[u8; 4] = b"QTF1";

fn truncated(_: std::io::Error) -> Error {
    Error::Malformed("truncated header".into())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

/// Round half away from zero, then clamp into `format`.
fn quantize_one<S: Real>(v: S, format: IntFormat, scale: S) -> i32 {
    let q = (v / scale).round();
    let lo = S::lit(format.min() as f64);
    let hi = S::lit(format.max() as f64);
    let q = if q < lo {
        lo
    } else if q > hi {
        hi
    } else {
        q
    };
    // f32 may round the clamp bound itself past the format range.
    let q = q.to_i64().unwrap_or(0).clamp(format.min(), format.max());
    q as i32
}

/// Quantize a real sequence into a rank-1 tensor.
pub fn quantize<S: Real>(values: &[S], format: IntFormat, scale: S) -> Result<QTensor<S>> {
    check_scale(scale)?;
    let data = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.is_finite() {
                Ok(quantize_one(v, format, scale))
            } else {
                Err(Error::NonFinite(i))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QTensor { shape: vec![values.len()], data, format, scale })
}

pub fn dequantize<S: Real>(t: &QTensor<S>) -> Vec<S> {
    t.data.iter().map(|&q| S::lit(q as f64) * t.scale).collect()
}

/// The two 6-bit magnitude slices of a 12-bit unsigned input, each carried in
/// a 7-bit signed container whose sign bit is always clear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlicePair {
    pub hi: i8,
    pub lo: i8,
}

impl SlicePair {
    pub fn combine(self) -> i32 {
        ((self.hi as i32) << 6) + self.lo as i32
    }
}

pub fn bit_slice_u12(x: i32) -> Result<SlicePair> {
    IntFormat::U12.check(x as i64)?;
    Ok(SlicePair { hi: (x >> 6) as i8, lo: (x & 63) as i8 })
}

/// Exact GELU, `0.5·v·(1 + erf(v/√2))`.
pub fn gelu_scalar<S: Real>(v: S) -> S {
    let half = S::lit(0.5);
    half * v * (S::one() + (v / S::lit(std::f64::consts::SQRT_2)).erf())
}

/// Uniform piecewise-linear GELU table over `[-GELU_LUT_RANGE, GELU_LUT_RANGE]`.
///
/// Below the range the output is 0, above it the identity.
#[derive(Debug, Clone)]
pub struct GeluLut<S> {
    samples: Vec<S>,
    step: S,
}

pub const GELU_LUT_RANGE: f64 = 8.0;

impl<S: Real> GeluLut<S> {
    /// `2^bits` intervals; `bits` in 1..=20.
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 20 {
            return Err(Error::InvalidArgument(format!("lut_bits {bits} not in 1..=20")));
        }
        let n = 1usize << bits;
        let step = 2.0 * GELU_LUT_RANGE / n as f64;
        let samples = (0..=n)
            .map(|i| gelu_scalar(S::lit(-GELU_LUT_RANGE + i as f64 * step)))
            .collect();
        Ok(GeluLut { samples, step: S::lit(step) })
    }

    pub fn eval(&self, v: S) -> S {
        let range = S::lit(GELU_LUT_RANGE);
        if v <= -range {
            return S::zero();
        }
        if v >= range {
            return v;
        }
        let pos = (v + range) / self.step;
        let i = pos.floor().to_usize().unwrap_or(0).min(self.samples.len() - 2);
        let frac = pos - S::lit(i as f64);
        self.samples[i] + (self.samples[i + 1] - self.samples[i]) * frac
    }
}

/// Element-wise GELU, requantized to the input format and scale.
///
/// `lut_bits == 0` evaluates the exact function; otherwise a [`GeluLut`] of
/// that resolution is used.
pub fn gelu<S: Real>(t: &QTensor<S>, lut_bits: u32) -> Result<QTensor<S>> {
    let real = dequantize(t);
    let out: Vec<S> = if lut_bits == 0 {
        real.into_iter().map(gelu_scalar).collect()
    } else {
        let lut = GeluLut::new(lut_bits)?;
        real.into_iter().map(|v| lut.eval(v)).collect()
    };
    quantize(&out, t.format, t.scale)?.reshape(t.shape.clone())
}

pub const DEFAULT_GROUP_NORM_EPS: f64 = 1e-5;

/// Group normalization over a channel-first tensor `[C, spatial...]`.
///
/// Statistics are taken in real arithmetic over the dequantized values of each
/// group of `C / groups` channels (population variance); the affine output is
/// requantized to the input format and scale.
pub fn group_norm<S: Real>(
    t: &QTensor<S>,
    groups: usize,
    eps: S,
    gamma: &[S],
    beta: &[S],
) -> Result<QTensor<S>> {
    let channels = *t
        .shape
        .first()
        .ok_or_else(|| Error::Shape("group_norm needs at least one dimension".into()))?;
    if groups == 0 || channels % groups != 0 {
        return Err(Error::InvalidArgument(format!(
            "{channels} channels not divisible into {groups} groups"
        )));
    }
    if gamma.len() != channels || beta.len() != channels {
        return Err(Error::Shape(format!(
            "gamma/beta lengths {}/{} differ from channel count {channels}",
            gamma.len(),
            beta.len()
        )));
    }
    if !(eps > S::zero()) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let spatial: usize = t.shape[1..].iter().product();
    let per_group = channels / groups * spatial;
    let real = dequantize(t);
    let mut out = vec![S::zero(); real.len()];
    if per_group == 0 {
        return quantize(&out, t.format, t.scale)?.reshape(t.shape.clone());
    }
    let n = S::lit(per_group as f64);
    for (g, chunk) in real.chunks(per_group).enumerate() {
        let mean = chunk.iter().fold(S::zero(), |a, &v| a + v) / n;
        let var = chunk.iter().fold(S::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
        let inv = S::one() / (var + eps).sqrt();
        for (i, &v) in chunk.iter().enumerate() {
            let c = g * (channels / groups) + i / spatial.max(1);
            out[g * per_group + i] = (v - mean) * inv * gamma[c] + beta[c];
        }
    }
    quantize(&out, t.format, t.scale)?.reshape(t.shape.clone())
}
