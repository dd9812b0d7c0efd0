//! Seeded synthetic self-attention scores with controllable sparsity and
//! adjacent-patch similarity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{IntFormat, QTensor};
use crate::pssa::{BitMatrix, PatchMode};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub rows: usize,
    pub cols: usize,
    pub patch_mode: PatchMode,
    /// Expected fraction of pruned (cleared) positions in each band's first patch.
    pub target_sparsity: f64,
    /// Probability that a bit differs from the same bit of the left neighbour patch.
    pub adjacent_flip_rate: f64,
    pub seed: u64,
    /// Surviving scores are drawn from `(threshold, 4095]`, pruned ones from `[0, threshold]`.
    pub threshold: u16,
}

impl SynthSpec {
    pub fn new(rows: usize, cols: usize, patch_mode: PatchMode, sparsity: f64, flip_rate: f64, seed: u64) -> Self {
        SynthSpec {
            rows,
            cols,
            patch_mode,
            target_sparsity: sparsity,
            adjacent_flip_rate: flip_rate,
            seed,
            threshold: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.patch_mode.size();
        if self.rows % s != 0 || self.cols % s != 0 {
            return Err(Error::Shape(format!(
                "{}x{} not divisible by patch size {s}",
                self.rows, self.cols
            )));
        }
        for (name, v) in [("sparsity", self.target_sparsity), ("flip rate", self.adjacent_flip_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} {v} not in [0, 1]")));
            }
        }
        if self.threshold >= 4095 {
            return Err(Error::InvalidArgument(format!("threshold {} leaves no surviving range", self.threshold)));
        }
        Ok(())
    }
}

/// Occupancy bitmap only: each band's first patch is i.i.d. with density
/// `1 - sparsity`; every later patch copies its left neighbour and flips each
/// bit with probability `adjacent_flip_rate`.
pub fn synth_bitmap(spec: &SynthSpec) -> Result<BitMatrix> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(fill_bitmap(spec, &mut rng))
}

fn fill_bitmap(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> BitMatrix {
    let s = spec.patch_mode.size();
    let density = 1.0 - spec.target_sparsity;
    let mut bm = BitMatrix::zeros(spec.rows, spec.cols);
    for r in 0..spec.rows {
        for c in 0..s.min(spec.cols) {
            if rng.gen_bool(density) {
                bm.set(r, c, true);
            }
        }
        for c0 in (s..spec.cols).step_by(s) {
            let mut bits = bm.get_bits(r, c0 - s, s);
            for i in 0..s {
                if rng.gen_bool(spec.adjacent_flip_rate) {
                    bits ^= 1 << i;
                }
            }
            bm.set_bits(r, c0, s, bits);
        }
    }
    bm
}

/// U12 score matrix with scale `1/4096`.
pub fn synth_sas<S: Real>(spec: &SynthSpec) -> Result<QTensor<S>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bm = fill_bitmap(spec, &mut rng);
    let t = spec.threshold as i32;
    let mut data = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            data.push(if bm.get(r, c) { rng.gen_range(t + 1..=4095) } else { rng.gen_range(0..=t) });
        }
    }
    QTensor::new(vec![spec.rows, spec.cols], data, IntFormat::U12, S::lit(1.0 / 4096.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pssa::{prune_sas, xor_augment};

    #[test]
    fn zero_flip_rate_gives_zero_diffs() {
        let spec = SynthSpec::new(32, 128, PatchMode::P32, 0.5, 0.0, 3);
        let sas = synth_sas::<f64>(&spec).unwrap();
        let p = prune_sas(&sas, 0).unwrap();
        let d = xor_augment(&p.bitmap, PatchMode::P32).unwrap();
        assert_eq!(d.count_ones_in(0, 32, 32, 96), 0);
        assert!(d.count_ones_in(0, 0, 32, 32) > 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec::new(16, 64, PatchMode::P16, 0.7, 0.2, 42);
        assert_eq!(synth_sas::<f64>(&spec).unwrap(), synth_sas::<f64>(&spec).unwrap());
        let other = SynthSpec { seed: 43, ..spec };
        assert_ne!(synth_sas::<f64>(&spec).unwrap(), synth_sas::<f64>(&other).unwrap());
    }

    #[test]
    fn threshold_separates_values() {
        let spec = SynthSpec { threshold: 1000, ..SynthSpec::new(16, 32, PatchMode::P16, 0.5, 0.1, 9) };
        let sas = synth_sas::<f64>(&spec).unwrap();
        let bm = synth_bitmap(&spec).unwrap();
        assert_eq!(prune_sas(&sas, 1000).unwrap().bitmap, bm);
    }

    #[test]
    fn rejects_invalid() {
        assert!(synth_sas::<f64>(&SynthSpec::new(16, 24, PatchMode::P16, 0.5, 0.1, 0)).is_err());
        assert!(synth_sas::<f64>(&SynthSpec::new(16, 16, PatchMode::P16, 1.5, 0.1, 0)).is_err());
        assert!(synth_sas::<f64>(&SynthSpec::new(16, 16, PatchMode::P16, 0.5, -0.1, 0)).is_err());
    }
}
