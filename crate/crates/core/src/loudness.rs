//! Integrated loudness (LUFS) after ITU-R BS.1770 / EBU R128.
//!
//! K-weighting is realised as two cascaded biquads derived from the analog
//! prototype by the bilinear transform, so any supported sample rate gets
//! coefficients consistent with the tabulated 48 kHz ones.

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Sample rates for which K-weighting coefficients are provided.
pub const SUPPORTED_RATES: [u32; 2] = [44100, 48000];

/// Loudness offset of the BS.1770 block loudness formula.
const LOUDNESS_OFFSET: f64 = -0.691;

#[inline]
pub fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

#[inline]
pub fn gain_to_db(gain: f64) -> f64 {
    20.0 * gain.log10()
}

/// Normalised biquad, `a0 == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Stable iff both poles lie strictly inside the unit circle (Jury test).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    /// Complex response `H(e^{jw})` as `(re, im)`.
    pub fn response(&self, w: f64) -> (f64, f64) {
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (self.b0 + self.b1 * c1 + self.b2 * c2, self.b1 * s1 + self.b2 * s2);
        let den = (1.0 + self.a1 * c1 + self.a2 * c2, self.a1 * s1 + self.a2 * s2);
        let d = den.0 * den.0 + den.1 * den.1;
        (
            (num.0 * den.0 + num.1 * den.1) / d,
            (num.1 * den.0 - num.0 * den.1) / d,
        )
    }

    /// Run the filter over `input` (transposed direct form II, zero initial state).
    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        let (mut s1, mut s2) = (0.0, 0.0);
        input
            .iter()
            .map(|&x| {
                let y = self.b0 * x + s1;
                s1 = self.b1 * x - self.a1 * y + s2;
                s2 = self.b2 * x - self.a2 * y;
                y
            })
            .collect()
    }
}

/// The two-stage K-weighting pre-filter for one sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KWeighting {
    /// High-shelf "head" filter.
    pub stage1: Biquad,
    /// RLB high-pass.
    pub stage2: Biquad,
    pub sample_rate: u32,
}

impl KWeighting {
    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        self.stage2.process(&self.stage1.process(input))
    }

    /// Magnitude response of the cascade at `freq` Hz, in dB.
    pub fn gain_db_at(&self, freq: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq / self.sample_rate as f64;
        let mag = |bq: &Biquad| {
            let (re, im) = bq.response(w);
            (re * re + im * im).sqrt()
        };
        gain_to_db(mag(&self.stage1) * mag(&self.stage2))
    }
}

pub fn k_weight_coeffs(sample_rate: u32) -> Result<KWeighting> {
    if !SUPPORTED_RATES.contains(&sample_rate) {
        return Err(Error::Config(format!(
            "no warp-weighting for {sample_rate} Hz (supported: {SUPPORTED_RATES:?})"
        )));
    }
    let fs = sample_rate as f64;
    let pi = std::f64::consts::PI;

    // Analog prototype of the high shelf.
    let corner = 1681.974450955533;
    let gain_db = 3.999843853973347;
    let q = 0.7071752369554196;
    let warp = (pi * corner / fs).tan();
    let shelf_gain = db_to_gain(gain_db);
    let band_gain = shelf_gain.powf(0.4996667741545416);
    let a0 = 1.0 + warp / q + warp * warp;
    let stage1 = Biquad {
        b0: (shelf_gain + band_gain * warp / q + warp * warp) / a0,
        b1: 2.0 * (warp * warp - shelf_gain) / a0,
        b2: (shelf_gain - band_gain * warp / q + warp * warp) / a0,
        a1: 2.0 * (warp * warp - 1.0) / a0,
        a2: (1.0 - warp / q + warp * warp) / a0,
    };

    // Analog prototype of the RLB high-pass; numerator is left unnormalised
    // as in the published table.
    let corner = 38.13547087602444;
    let q = 0.5003270373238773;
    let warp = (pi * corner / fs).tan();
    let a0 = 1.0 + warp / q + warp * warp;
    let stage2 = Biquad {
        b0: 1.0,
        b1: -2.0,
        b2: 1.0,
        a1: 2.0 * (warp * warp - 1.0) / a0,
        a2: (1.0 - warp / q + warp * warp) / a0,
    };

    Ok(KWeighting {
        stage1,
        stage2,
        sample_rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingConfig {
    /// Seconds.
    pub block_length: f64,
    pub overlap: f64,
    /// LUFS.
    pub absolute_gate: f64,
    /// LU relative to the absolutely-gated mean.
    pub relative_gate: f64,
    pub channel_weights: Vec<f64>,
}

impl Default for GatingConfig {
    fn default() -> Self {
        GatingConfig {
            block_length: 0.4,
            overlap: 0.75,
            absolute_gate: -70.0,
            relative_gate: -10.0,
            channel_weights: vec![1.0, 1.0],
        }
    }
}

impl GatingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.block_length > 0.0) {
            return Err(Error::Config("block_length must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Config("overlap must lie in [0, 1)".into()));
        }
        if !(self.relative_gate < 0.0) {
            return Err(Error::Config("relative_gate must be negative".into()));
        }
        Ok(())
    }

    fn block_and_hop(&self, sample_rate: u32) -> (usize, usize) {
        let fs = sample_rate as f64;
        let block = (self.block_length * fs).round() as usize;
        let hop = ((self.block_length * (1.0 - self.overlap) * fs).round() as usize).max(1);
        (block.max(1), hop)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoudnessReading {
    pub lufs: f64,
    pub n_blocks_total: usize,
    pub n_blocks_gated: usize,
}

pub fn integrated_lufs(clip: &AudioClip, gating: &GatingConfig) -> Result<LoudnessReading> {
    gating.validate()?;
    if clip.n_channels() > gating.channel_weights.len() {
        return Err(Error::Config(format!(
            "{} channels but only {} channel weights",
            clip.n_channels(),
            gating.channel_weights.len()
        )));
    }
    let (block, hop) = gating.block_and_hop(clip.sample_rate());
    if clip.n_frames() < block {
        return Err(Error::InsufficientDuration {
            needed: block,
            got: clip.n_frames(),
        });
    }
    let kw = k_weight_coeffs(clip.sample_rate())?;
    let n_blocks = (clip.n_frames() - block) / hop + 1;

    let mut powers = vec![0.0; n_blocks];
    for (c, ch) in clip.channels().iter().enumerate() {
        let w = gating.channel_weights[c];
        let y = kw.process(ch);
        if block % hop == 0 {
            // Blocks tile exactly into hops: sum each hop once.
            let per_block = block / hop;
            let hops: Vec<f64> = y
                .chunks_exact(hop)
                .map(|seg| seg.iter().map(|s| s * s).sum())
                .collect();
            for (j, p) in powers.iter_mut().enumerate() {
                *p += w * hops[j..j + per_block].iter().sum::<f64>() / block as f64;
            }
        } else {
            for (j, p) in powers.iter_mut().enumerate() {
                let start = j * hop;
                let z: f64 = y[start..start + block].iter().map(|s| s * s).sum::<f64>() / block as f64;
                *p += w * z;
            }
        }
    }

    let block_loudness = |p: f64| LOUDNESS_OFFSET + 10.0 * p.log10();
    let above_abs: Vec<f64> = powers
        .iter()
        .copied()
        .filter(|&p| p > 0.0 && block_loudness(p) > gating.absolute_gate)
        .collect();
    if above_abs.is_empty() {
        return Err(Error::Silence);
    }
    let mean_abs = above_abs.iter().sum::<f64>() / above_abs.len() as f64;
    let relative_threshold = block_loudness(mean_abs) + gating.relative_gate;
    let gated: Vec<f64> = above_abs
        .into_iter()
        .filter(|&p| block_loudness(p) > relative_threshold)
        .collect();
    if gated.is_empty() {
        return Err(Error::Silence);
    }
    let mean = gated.iter().sum::<f64>() / gated.len() as f64;
    Ok(LoudnessReading {
        lufs: block_loudness(mean),
        n_blocks_total: n_blocks,
        n_blocks_gated: gated.len(),
    })
}

/// Integrated loudness with the default gating.
pub fn lufs(clip: &AudioClip) -> Result<f64> {
    integrated_lufs(clip, &GatingConfig::default()).map(|r| r.lufs)
}

/// Gain in dB that would bring `clip` to `target` LUFS.
pub fn gain_db_to_target(clip: &AudioClip, target: f64) -> Result<f64> {
    Ok(target - lufs(clip)?)
}

pub fn apply_gain_db(clip: &AudioClip, gain_db: f64) -> AudioClip {
    if gain_db == 0.0 {
        return clip.clone();
    }
    clip.scaled(db_to_gain(gain_db))
}

/// Collection-level loudness summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoudnessStats {
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
    pub n_tracks: usize,
}

pub fn loudness_stats(readings: &[f64]) -> Result<LoudnessStats> {
    if readings.is_empty() {
        return Err(Error::Argument("no loudness readings".into()));
    }
    if readings.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("non-finite loudness reading".into()));
    }
    let mut sorted = readings.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(LoudnessStats {
        min: sorted[0],
        max: sorted[n - 1],
        median: median_sorted(&sorted),
        mean,
        std,
        n_tracks: n,
    })
}

pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
