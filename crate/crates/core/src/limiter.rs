//! Feed-forward lookahead peak limiter with an exact per-frame gain trace.
//!
//! Detector: running maximum of the stereo-linked magnitude over the
//! lookahead window. Target gain `min(1, T / env)` is smoothed by a one-pole
//! filter (attack coefficient while falling, release while rising) and then
//! clamped to the instantaneous ceiling gain, which makes the output ceiling
//! hold exactly. The lookahead delay is compensated, so the trace and the
//! output are time-aligned with the input.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::loudness::{db_to_gain, gain_to_db};

/// Lowest threshold the reduction search may propose, in dBFS.
pub const THRESHOLD_FLOOR_DB: f64 = -40.0;
/// Width of the search bracket below the clip peak, in dB.
pub const SEARCH_SPAN_DB: f64 = 24.0;
pub const SEARCH_MAX_ITERATIONS: usize = 40;
/// Accepted slack around the requested reduction band, in dB.
pub const SEARCH_TOLERANCE_DB: f64 = 0.25;
/// Default silence epsilon for [`sample_ratio`].
pub const RATIO_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimiterParams {
    /// Ceiling in dBFS.
    pub threshold: f64,
    /// Milliseconds.
    pub attack: f64,
    /// Milliseconds.
    pub release: f64,
    /// Milliseconds; must be at least `attack`.
    pub lookahead: f64,
    pub stereo_link: bool,
}

impl Default for LimiterParams {
    fn default() -> Self {
        LimiterParams {
            threshold: 0.0,
            attack: 1.0,
            release: 100.0,
            lookahead: 1.0,
            stereo_link: true,
        }
    }
}

impl LimiterParams {
    pub fn with_threshold(self, threshold: f64) -> Self {
        LimiterParams { threshold, ..self }
    }

    pub fn with_release(self, release: f64) -> Self {
        LimiterParams { release, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::Config("threshold must be finite".into()));
        }
        if !(self.release > 0.0) || !self.release.is_finite() {
            return Err(Error::Config("release must be positive".into()));
        }
        if !(self.attack >= 0.0) {
            return Err(Error::Config("attack must be non-negative".into()));
        }
        if !(self.lookahead >= self.attack) {
            return Err(Error::Config("lookahead must be at least attack".into()));
        }
        Ok(())
    }

    pub fn ceiling(&self) -> f64 {
        db_to_gain(self.threshold)
    }
}

/// Per-frame gain a limiter applied (or a ratio recovered from signals).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTrace {
    pub gain: Vec<f64>,
    pub params: Option<LimiterParams>,
}

impl GainTrace {
    pub fn unity(n: usize) -> Self {
        GainTrace {
            gain: vec![1.0; n],
            params: None,
        }
    }

    pub fn len(&self) -> usize {
        self.gain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gain.is_empty()
    }

    pub fn min_gain(&self) -> f64 {
        self.gain.iter().copied().fold(1.0, f64::min)
    }

    /// `-20 log10(min gain)`.
    pub fn max_reduction_db(&self) -> f64 {
        -gain_to_db(self.min_gain())
    }

    /// The trace as a mono clip, for inspection.
    pub fn to_clip(&self, sample_rate: u32) -> Result<AudioClip> {
        AudioClip::mono(self.gain.clone(), sample_rate)
    }
}

/// One-pole coefficient `exp(-1 / (tau * fs))`; zero for an instantaneous stage.
fn pole(ms: f64, sample_rate: u32) -> f64 {
    if ms <= 0.0 {
        0.0
    } else {
        (-1.0 / (ms * 1e-3 * sample_rate as f64)).exp()
    }
}

pub fn limit(clip: &AudioClip, params: &LimiterParams) -> Result<(AudioClip, GainTrace)> {
    params.validate()?;
    clip.ensure_finite()?;
    if clip.n_channels() > 2 {
        return Err(Error::Config(format!(
            "limiter handles 1 or 2 channels, got {}",
            clip.n_channels()
        )));
    }
    if !params.stereo_link && clip.n_channels() > 1 {
        return Err(Error::Config(
            "unlinked stereo limiting has no single gain trace".into(),
        ));
    }

    let fs = clip.sample_rate();
    let n = clip.n_frames();
    let ceiling = params.ceiling();
    let lookahead = (params.lookahead * 1e-3 * fs as f64).round() as usize;
    let attack = pole(params.attack, fs);
    let release = pole(params.release, fs);

    let peaks: Vec<f64> = (0..n).map(|i| clip.frame_peak(i)).collect();
    let envelope = window_max(&peaks, lookahead);

    let mut gain = Vec::with_capacity(n);
    let mut state = 1.0_f64;
    for (&env, &peak) in envelope.iter().zip(&peaks) {
        let target = if env > ceiling { ceiling / env } else { 1.0 };
        let coeff = if target < state { attack } else { release };
        let smoothed = target + coeff * (state - target);
        let instant = if peak > ceiling { ceiling / peak } else { 1.0 };
        state = smoothed.min(instant);
        gain.push(state);
    }

    let output = clip.multiplied_by_frames(&gain);
    Ok((
        output,
        GainTrace {
            gain,
            params: Some(*params),
        },
    ))
}

/// `out[i] = max(x[i..=i + width])`, truncated at the end.
fn window_max(x: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for (i, o) in out.iter_mut().enumerate() {
        let end = (i + width).min(x.len() - 1);
        while next <= end {
            while deque.back().is_some_and(|&j| x[j] <= x[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        while deque.front().is_some_and(|&j| j < i) {
            deque.pop_front();
        }
        *o = x[*deque.front().expect("window is never empty")];
    }
    out
}

/// Search a threshold whose maximum gain reduction falls in `[lo, hi]` dB.
///
/// Bisects over `[max(peak - 24, floor), peak]` dBFS. The reduction is
/// monotone in the threshold, so the bracket either contains the band or the
/// band is unattainable.
pub fn find_threshold_for_reduction(
    clip: &AudioClip,
    reduction_range: (f64, f64),
    template: &LimiterParams,
) -> Result<f64> {
    let (lo, hi) = reduction_range;
    if !(lo < hi) || lo < 0.0 {
        return Err(Error::Argument(format!(
            "invalid reduction range [{lo}, {hi}]"
        )));
    }
    let peak = clip.peak();
    if !(peak > 0.0) {
        return Err(Error::Search("clip is silent".into()));
    }
    let peak_db = gain_to_db(peak);
    let floor = (peak_db - SEARCH_SPAN_DB).max(THRESHOLD_FLOOR_DB);
    if floor >= peak_db {
        return Err(Error::Search(format!(
            "peak {peak_db:.2} dBFS lies below the threshold floor {THRESHOLD_FLOOR_DB} dBFS"
        )));
    }

    let reduction_at = |threshold: f64| -> Result<f64> {
        let (_, trace) = limit(clip, &template.with_threshold(threshold))?;
        Ok(trace.max_reduction_db())
    };

    let max_reduction = reduction_at(floor)?;
    if max_reduction < lo - SEARCH_TOLERANCE_DB {
        return Err(Error::Search(format!(
            "achievable reduction bracket [0, {max_reduction:.2}] dB misses [{lo}, {hi}]"
        )));
    }

    // Lower threshold, more reduction.
    let (mut low_thr, mut high_thr) = (floor, peak_db);
    let mut best: Option<(f64, f64)> = None;
    for _ in 0..SEARCH_MAX_ITERATIONS {
        let mid = 0.5 * (low_thr + high_thr);
        let r = reduction_at(mid)?;
        if (lo..=hi).contains(&r) {
            return Ok(mid);
        }
        let miss = if r < lo { lo - r } else { r - hi };
        if best.is_none_or(|(_, m)| miss < m) {
            best = Some((mid, miss));
        }
        if r < lo {
            high_thr = mid;
        } else {
            low_thr = mid;
        }
    }
    match best {
        Some((thr, miss)) if miss <= SEARCH_TOLERANCE_DB => Ok(thr),
        Some((_, miss)) => Err(Error::Search(format!(
            "closest reduction missed [{lo}, {hi}] by {miss:.3} dB"
        ))),
        None => Err(Error::Search("no iterations run".into())),
    }
}

/// Per-frame ratio `limited / original` on the stereo-linked magnitude,
/// without clamping. Frames where the original is below `epsilon` get 1.
pub fn sample_ratio_raw(
    original: &AudioClip,
    limited: &AudioClip,
    epsilon: f64,
) -> Result<Vec<f64>> {
    original.ensure_same_shape(limited, "sample ratio")?;
    Ok((0..original.n_frames())
        .map(|n| {
            // Channel with the largest original magnitude carries the frame.
            let (c, mag) = (0..original.n_channels())
                .map(|c| (c, original.channel(c)[n].abs()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if mag < epsilon {
                1.0
            } else {
                limited.channel(c)[n] / original.channel(c)[n]
            }
        })
        .collect())
}

/// Divide-based ratio clamped to `(0, 1]`, i.e. without makeup gain.
pub fn sample_ratio(original: &AudioClip, limited: &AudioClip, epsilon: f64) -> Result<GainTrace> {
    let gain = sample_ratio_raw(original, limited, epsilon)?
        .into_iter()
        .map(|r| r.clamp(f64::MIN_POSITIVE, 1.0))
        .collect();
    Ok(GainTrace { gain, params: None })
}

pub fn apply_trace(clip: &AudioClip, trace: &GainTrace) -> Result<AudioClip> {
    if trace.len() != clip.n_frames() {
        return Err(Error::Consistency(format!(
            "trace has {} frames, clip has {}",
            trace.len(),
            clip.n_frames()
        )));
    }
    Ok(clip.multiplied_by_frames(&trace.gain))
}
