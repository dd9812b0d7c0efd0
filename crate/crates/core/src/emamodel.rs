//! External-memory traffic and energy accounting.
//!
//! Bytes are the proxy for off-chip energy: every scheme's energy is its byte
//! count times a per-byte coefficient. Self-attention scores are accounted
//! separately so the compression schemes can be compared in isolation and in
//! the context of a whole network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::QTensor;
use crate::pssa::{
    baseline_global_csr_bits, baseline_rle_bits, encode_pruned, index_bits, prune_sas, PatchMode,
    DEFAULT_RLE_RUN_BITS, VALUE_BITS,
};
use crate::scalar::Real;
use crate::synth::{synth_sas, SynthSpec};

pub const REPORT_SCHEMA: &str = "sdaccel-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Dense 12-bit scores, no pruning.
    Raw,
    /// Pruned values plus one global CSR index.
    Csr,
    /// Pruned values plus a run-length coded bitmap.
    Rle,
    /// Pruned values plus patch-XOR + patch-local CSR index.
    Pssa,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Raw, Scheme::Csr, Scheme::Rle, Scheme::Pssa];
}

/// Codec parameters applied to every score matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SasCodecConfig {
    pub threshold: i64,
    pub mode: PatchMode,
    pub run_bits: u32,
    pub pad: bool,
}

impl Default for SasCodecConfig {
    fn default() -> Self {
        SasCodecConfig { threshold: 0, mode: PatchMode::P64, run_bits: DEFAULT_RLE_RUN_BITS, pad: true }
    }
}

/// A value per scheme.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerScheme<T> {
    pub raw: T,
    pub csr: T,
    pub rle: T,
    pub pssa: T,
}

impl<T: Copy> PerScheme<T> {
    pub fn get(&self, s: Scheme) -> T {
        match s {
            Scheme::Raw => self.raw,
            Scheme::Csr => self.csr,
            Scheme::Rle => self.rle,
            Scheme::Pssa => self.pssa,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> PerScheme<U> {
        PerScheme { raw: f(self.raw), csr: f(self.csr), rle: f(self.rle), pssa: f(self.pssa) }
    }
}

impl PerScheme<u64> {
    fn scaled(&self, k: u64) -> Self {
        self.map(|v| v * k)
    }

    fn add(&self, o: &Self) -> Self {
        PerScheme { raw: self.raw + o.raw, csr: self.csr + o.csr, rle: self.rle + o.rle, pssa: self.pssa + o.pssa }
    }
}

/// Bit-level cost of one score matrix under every scheme.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SasMeasurement {
    pub elements: u64,
    pub nnz: u64,
    /// Index overhead; `raw` is always 0.
    pub index_bits: PerScheme<u64>,
    /// Total bits (values + index).
    pub bits: PerScheme<u64>,
    pub bytes: PerScheme<u64>,
}

impl SasMeasurement {
    fn scaled(&self, k: u64) -> Self {
        SasMeasurement {
            elements: self.elements * k,
            nnz: self.nnz * k,
            index_bits: self.index_bits.scaled(k),
            bits: self.bits.scaled(k),
            bytes: self.bytes.scaled(k),
        }
    }
}

/// Prune once and cost the result under every scheme.
pub fn measure_sas<S: Real>(sas: &QTensor<S>, cfg: &SasCodecConfig) -> Result<SasMeasurement> {
    let pruned = prune_sas(sas, cfg.threshold)?;
    let threshold = u16::try_from(cfg.threshold)
        .map_err(|_| Error::InvalidArgument(format!("threshold {} exceeds u16", cfg.threshold)))?;
    let stream = encode_pruned(&pruned, threshold, cfg.mode, cfg.pad)?;
    let elements = (pruned.rows() * pruned.cols()) as u64;
    let nnz = pruned.nnz() as u64;
    let value_bits = VALUE_BITS as u64 * nnz;
    let index = PerScheme {
        raw: 0,
        csr: baseline_global_csr_bits(&pruned.bitmap),
        rle: baseline_rle_bits(&pruned.bitmap, cfg.run_bits)?,
        pssa: index_bits(&stream),
    };
    let bits = PerScheme {
        raw: VALUE_BITS as u64 * elements,
        csr: value_bits + index.csr,
        rle: value_bits + index.rle,
        pssa: value_bits + index.pssa,
    };
    Ok(SasMeasurement { elements, nnz, index_bits: index, bits, bytes: bits.map(|b| b.div_ceil(8)) })
}

/// Off-chip bytes to move one score matrix under `scheme`.
pub fn sas_ema_bytes<S: Real>(scheme: Scheme, sas: &QTensor<S>, threshold: i64, mode: PatchMode) -> Result<u64> {
    let cfg = SasCodecConfig { threshold, mode, run_bits: DEFAULT_RLE_RUN_BITS, pad: false };
    Ok(measure_sas(sas, &cfg)?.bytes.get(scheme))
}

/// Energy per unit of traffic and compute, in picojoules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCoefficients<S> {
    pub ema_pj_per_byte: S,
    pub onchip_pj_per_byte: S,
    pub mac_pj_high: S,
    pub mac_pj_low: S,
}

impl<S: Real> Default for EnergyCoefficients<S> {
    fn default() -> Self {
        EnergyCoefficients {
            ema_pj_per_byte: S::lit(20.0),
            onchip_pj_per_byte: S::lit(1.0),
            mac_pj_high: S::lit(1.0),
            mac_pj_low: S::lit(0.5),
        }
    }
}

impl<S: Real> EnergyCoefficients<S> {
    pub fn validate(&self) -> Result<()> {
        let all = [self.ema_pj_per_byte, self.onchip_pj_per_byte, self.mac_pj_high, self.mac_pj_low];
        if all.iter().any(|&v| !(v > S::zero()) || !v.is_finite()) {
            return Err(Error::InvalidArgument("energy coefficients must be positive".into()));
        }
        if self.ema_pj_per_byte < S::lit(10.0) * self.onchip_pj_per_byte {
            log::warn!(
                "off-chip energy {} pJ/B is not much larger than on-chip {} pJ/B",
                self.ema_pj_per_byte,
                self.onchip_pj_per_byte
            );
        }
        Ok(())
    }
}

/// Two-layer FFN: `d_in → d_hidden → d_out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FfnDims {
    pub d_in: usize,
    pub d_hidden: usize,
    pub d_out: usize,
}

impl FfnDims {
    pub fn macs_per_pixel(&self) -> u64 {
        (self.d_in * self.d_hidden + self.d_hidden * self.d_out) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FfnEnergy<S> {
    pub baseline_energy: S,
    pub mixed_energy: S,
    /// `baseline / mixed - 1`.
    pub efficiency_gain: S,
}

/// FFN energy with every pixel at 12 bits versus a fraction `low_ratio` at 6.
///
/// Per pixel: all FFN MACs at the pixel's precision, plus its input activation
/// crossing external and on-chip memory at the pixel's width.
pub fn ffn_energy<S: Real>(
    n_pixels: usize,
    low_ratio: S,
    coeff: &EnergyCoefficients<S>,
    dims: &FfnDims,
) -> Result<FfnEnergy<S>> {
    if !(low_ratio >= S::zero() && low_ratio <= S::one()) {
        return Err(Error::InvalidArgument(format!("low_ratio {low_ratio} not in [0, 1]")));
    }
    coeff.validate()?;
    let macs = S::lit(dims.macs_per_pixel() as f64);
    let per_byte = coeff.ema_pj_per_byte + coeff.onchip_pj_per_byte;
    let act_bytes = |bits: f64| S::lit(dims.d_in as f64 * bits / 8.0);
    let high_pixel = macs * coeff.mac_pj_high + act_bytes(12.0) * per_byte;
    let low_pixel = macs * coeff.mac_pj_low + act_bytes(6.0) * per_byte;
    let n = S::lit(n_pixels as f64);
    let baseline = n * high_pixel;
    let mixed = n * ((S::one() - low_ratio) * high_pixel + low_ratio * low_pixel);
    let gain = if mixed > S::zero() { baseline / mixed - S::one() } else { S::zero() };
    Ok(FfnEnergy { baseline_energy: baseline, mixed_energy: mixed, efficiency_gain: gain })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Conv { height: usize, width: usize, in_ch: usize, out_ch: usize, kernel: usize },
    SelfAttention { tokens: usize, dim: usize, heads: usize },
    CrossAttention { tokens: usize, dim: usize, text_tokens: usize, text_dim: usize, heads: usize },
    Ffn { tokens: usize, dim: usize, hidden: usize },
}

fn default_act_bits() -> u32 {
    12
}

fn default_weight_bits() -> u32 {
    8
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
    #[serde(default = "default_act_bits")]
    pub act_bits: u32,
    #[serde(default = "default_weight_bits")]
    pub weight_bits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Cnn,
    Transformer,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec { name: name.into(), kind, act_bits: 12, weight_bits: 8 }
    }

    pub fn stage(&self) -> Stage {
        match self.kind {
            LayerKind::Conv { .. } => Stage::Cnn,
            _ => Stage::Transformer,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            LayerKind::Conv { .. } => "conv",
            LayerKind::SelfAttention { .. } => "self_attention",
            LayerKind::CrossAttention { .. } => "cross_attention",
            LayerKind::Ffn { .. } => "ffn",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims: Vec<usize> = match self.kind {
            LayerKind::Conv { height, width, in_ch, out_ch, kernel } => vec![height, width, in_ch, out_ch, kernel],
            LayerKind::SelfAttention { tokens, dim, heads } => vec![tokens, dim, heads],
            LayerKind::CrossAttention { tokens, dim, text_tokens, text_dim, heads } => {
                vec![tokens, dim, text_tokens, text_dim, heads]
            }
            LayerKind::Ffn { tokens, dim, hidden } => vec![tokens, dim, hidden],
        };
        if dims.contains(&0) || self.act_bits == 0 || self.weight_bits == 0 {
            return Err(Error::InvalidArgument(format!("layer {} has a zero dimension", self.name)));
        }
        Ok(())
    }

    fn act(&self, elems: usize) -> u64 {
        (elems as u64 * self.act_bits as u64).div_ceil(8)
    }

    fn weights(&self, elems: usize) -> u64 {
        (elems as u64 * self.weight_bits as u64).div_ceil(8)
    }

    /// Off-chip bytes excluding self-attention scores.
    ///
    /// Inputs, weights and outputs cross once; intermediates produced in one
    /// phase and consumed in a later one (Q/K/V, cross-attention scores, FFN
    /// hidden activations) are written and read back once each.
    pub fn non_sas_bytes(&self) -> u64 {
        match self.kind {
            LayerKind::Conv { height, width, in_ch, out_ch, kernel } => {
                self.act(height * width * in_ch)
                    + self.weights(kernel * kernel * in_ch * out_ch)
                    + self.act(height * width * out_ch)
            }
            LayerKind::SelfAttention { tokens, dim, .. } => {
                self.act(tokens * dim) + self.weights(4 * dim * dim) + 2 * self.act(3 * tokens * dim) + self.act(tokens * dim)
            }
            LayerKind::CrossAttention { tokens, dim, text_tokens, text_dim, heads } => {
                self.act(tokens * dim)
                    + self.act(text_tokens * text_dim)
                    + self.weights(2 * dim * dim + 2 * text_dim * dim)
                    + 2 * self.act(heads * tokens * text_tokens)
                    + self.act(tokens * dim)
            }
            LayerKind::Ffn { tokens, dim, hidden } => {
                self.act(tokens * dim) + self.weights(2 * dim * hidden) + 2 * self.act(tokens * hidden) + self.act(tokens * dim)
            }
        }
    }
}

/// Supplies the score matrix of one attention head for a self-attention layer.
pub trait SasSource {
    /// Measurement of one `tokens × tokens` head of layer `layer_index`.
    fn measure(&mut self, layer_index: usize, tokens: usize, cfg: &SasCodecConfig) -> Result<SasMeasurement>;
}

/// Synthetic scores; large heads are measured on a band sample of at most
/// `max_rows` rows and scaled to the full height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSas {
    pub sparsity: f64,
    pub flip_rate: f64,
    pub seed: u64,
    pub max_rows: usize,
}

impl Default for SyntheticSas {
    fn default() -> Self {
        SyntheticSas { sparsity: 0.7, flip_rate: 0.05, seed: 0, max_rows: 256 }
    }
}

impl SasSource for SyntheticSas {
    fn measure(&mut self, layer_index: usize, tokens: usize, cfg: &SasCodecConfig) -> Result<SasMeasurement> {
        let s = cfg.mode.size();
        if tokens % s != 0 {
            return Err(Error::Shape(format!("{tokens} tokens not a multiple of patch size {s}")));
        }
        let rows = tokens.min(self.max_rows.div_ceil(s).max(1) * s);
        // sample height divides the full height so scaling is exact per band
        let rows = (1..=rows / s).rev().map(|b| b * s).find(|r| tokens % r == 0).unwrap_or(s);
        let spec = SynthSpec {
            threshold: u16::try_from(cfg.threshold).unwrap_or(0),
            ..SynthSpec::new(rows, tokens, cfg.mode, self.sparsity, self.flip_rate, self.seed ^ (layer_index as u64) << 32)
        };
        let sas = synth_sas::<f64>(&spec)?;
        let mut m = measure_sas(&sas, cfg)?;
        let k = (tokens / rows) as u64;
        if k > 1 {
            // bytes are re-derived from scaled bits so rounding matches a full measurement
            m = m.scaled(k);
            m.bytes = m.bits.map(|b| b.div_ceil(8));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SasLayerReport {
    pub heads: u64,
    pub nnz: u64,
    pub index_bits: PerScheme<u64>,
    pub bytes: PerScheme<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub name: String,
    pub kind: String,
    pub stage: Stage,
    pub non_sas_bytes: u64,
    pub sas: Option<SasLayerReport>,
    pub bytes: PerScheme<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reductions {
    pub sas_vs_raw_pct: f64,
    pub sas_vs_rle_pct: f64,
    pub sas_vs_csr_pct: f64,
    pub total_vs_raw_pct: f64,
    pub index_vs_rle_pct: f64,
    pub index_vs_csr_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmaReport {
    pub schema: String,
    pub kind: String,
    pub codec: SasCodecConfig,
    pub layers: Vec<LayerReport>,
    pub totals: PerScheme<u64>,
    pub sas_bytes: PerScheme<u64>,
    pub sas_index_bits: PerScheme<u64>,
    pub cnn_bytes: u64,
    pub transformer_bytes: u64,
    pub self_attention_bytes: u64,
    /// Shares below are of raw-scheme traffic.
    pub transformer_share_pct: f64,
    pub self_attention_share_of_transformer_pct: f64,
    pub sas_share_pct: f64,
    pub energy_pj: PerScheme<f64>,
    pub reductions: Reductions,
}

/// Percentage rounded to one decimal; 0 when the denominator is 0.
pub fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        return 0.0;
    }
    round1(100.0 * num as f64 / den as f64)
}

/// `(1 - new/old)` as a percentage, one decimal.
pub fn reduction_pct(new: u64, old: u64) -> f64 {
    if old == 0 {
        return 0.0;
    }
    round1(100.0 * (1.0 - new as f64 / old as f64))
}

pub fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Per-layer and per-stage traffic of a network under every score scheme.
pub fn unet_ema_breakdown(
    layers: &[LayerSpec],
    cfg: &SasCodecConfig,
    source: &mut dyn SasSource,
    coeff: &EnergyCoefficients<f64>,
) -> Result<EmaReport> {
    if layers.is_empty() {
        return Err(Error::InvalidArgument("empty layer list".into()));
    }
    coeff.validate()?;
    let mut reports = Vec::with_capacity(layers.len());
    let mut sas_bytes = PerScheme::default();
    let mut sas_index = PerScheme::default();
    for (i, layer) in layers.iter().enumerate() {
        layer.validate()?;
        let non_sas = layer.non_sas_bytes();
        let sas = match layer.kind {
            LayerKind::SelfAttention { tokens, heads, .. } => {
                let m = source.measure(i, tokens, cfg)?;
                // scores are written after QKᵀ and read back for softmax·V
                let bytes = m.bytes.scaled(2 * heads as u64);
                let index = m.index_bits.scaled(heads as u64);
                Some(SasLayerReport { heads: heads as u64, nnz: m.nnz * heads as u64, index_bits: index, bytes })
            }
            _ => None,
        };
        let bytes = match &sas {
            Some(s) => s.bytes.map(|b| b + non_sas),
            None => PerScheme { raw: non_sas, csr: non_sas, rle: non_sas, pssa: non_sas },
        };
        if let Some(s) = &sas {
            sas_bytes = sas_bytes.add(&s.bytes);
            sas_index = sas_index.add(&s.index_bits);
        }
        reports.push(LayerReport {
            name: layer.name.clone(),
            kind: layer.kind_name().to_string(),
            stage: layer.stage(),
            non_sas_bytes: non_sas,
            sas,
            bytes,
        });
    }
    let totals = reports.iter().fold(PerScheme::default(), |acc, r| acc.add(&r.bytes));
    let stage_sum = |st: Stage| reports.iter().filter(|r| r.stage == st).map(|r| r.bytes.raw).sum::<u64>();
    let cnn_bytes = stage_sum(Stage::Cnn);
    let transformer_bytes = stage_sum(Stage::Transformer);
    let self_attention_bytes =
        reports.iter().filter(|r| r.kind == "self_attention").map(|r| r.bytes.raw).sum::<u64>();
    Ok(EmaReport {
        schema: REPORT_SCHEMA.to_string(),
        kind: "ema".to_string(),
        codec: *cfg,
        layers: reports,
        totals,
        sas_bytes,
        sas_index_bits: sas_index,
        cnn_bytes,
        transformer_bytes,
        self_attention_bytes,
        transformer_share_pct: pct(transformer_bytes, totals.raw),
        self_attention_share_of_transformer_pct: pct(self_attention_bytes, transformer_bytes),
        sas_share_pct: pct(sas_bytes.raw, totals.raw),
        energy_pj: totals.map(|b| b as f64 * coeff.ema_pj_per_byte),
        reductions: Reductions {
            sas_vs_raw_pct: reduction_pct(sas_bytes.pssa, sas_bytes.raw),
            sas_vs_rle_pct: reduction_pct(sas_bytes.pssa, sas_bytes.rle),
            sas_vs_csr_pct: reduction_pct(sas_bytes.pssa, sas_bytes.csr),
            total_vs_raw_pct: reduction_pct(totals.pssa, totals.raw),
            index_vs_rle_pct: reduction_pct(sas_index.pssa, sas_index.rle),
            index_vs_csr_pct: reduction_pct(sas_index.pssa, sas_index.csr),
        },
    })
}

/// Approximate Stable Diffusion v1 UNet at 512×512 (64×64 latent), one
/// denoising step. Resnet blocks are two 3×3 convolutions at the level width;
/// each transformer block is self-attention, cross-attention on 77 CLIP
/// tokens, and a 4× FFN.
pub fn sd_unet_workload() -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    let resnet = |layers: &mut Vec<LayerSpec>, tag: &str, hw: usize, ch: usize| {
        for j in 0..2 {
            layers.push(LayerSpec::new(
                format!("{tag}.conv{j}"),
                LayerKind::Conv { height: hw, width: hw, in_ch: ch, out_ch: ch, kernel: 3 },
            ));
        }
    };
    let transformer = |layers: &mut Vec<LayerSpec>, tag: &str, hw: usize, ch: usize| {
        let tokens = hw * hw;
        layers.push(LayerSpec::new(format!("{tag}.attn1"), LayerKind::SelfAttention { tokens, dim: ch, heads: 8 }));
        layers.push(LayerSpec::new(
            format!("{tag}.attn2"),
            LayerKind::CrossAttention { tokens, dim: ch, text_tokens: 77, text_dim: 768, heads: 8 },
        ));
        layers.push(LayerSpec::new(format!("{tag}.ffn"), LayerKind::Ffn { tokens, dim: ch, hidden: 4 * ch }));
    };
    let levels = [(64usize, 320usize, true), (32, 640, true), (16, 1280, true), (8, 1280, false)];
    for (li, &(hw, ch, attn)) in levels.iter().enumerate() {
        for b in 0..2 {
            let tag = format!("down{li}.{b}");
            resnet(&mut layers, &tag, hw, ch);
            if attn {
                transformer(&mut layers, &tag, hw, ch);
            }
        }
    }
    resnet(&mut layers, "mid.0", 8, 1280);
    transformer(&mut layers, "mid", 8, 1280);
    resnet(&mut layers, "mid.1", 8, 1280);
    for (li, &(hw, ch, attn)) in levels.iter().enumerate().rev() {
        for b in 0..3 {
            let tag = format!("up{li}.{b}");
            resnet(&mut layers, &tag, hw, ch);
            if attn {
                transformer(&mut layers, &tag, hw, ch);
            }
        }
    }
    layers
}
