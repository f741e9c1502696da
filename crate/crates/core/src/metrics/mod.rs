//! Separation quality metrics.
//!
//! * [`si_sdr`]: scale-invariant SDR over the whole clip, channels concatenated.
//! * [`framewise_sdr`]: windowed SDR where the allowed distortion is an FIR
//!   filter of `filter_len` taps applied to the reference. Each window solves
//!   the Toeplitz normal equations of the zero-padded reference per channel;
//!   channel energies are summed before taking the ratio.

pub mod toeplitz;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, StemName, StemSet};
use crate::error::{Error, Result};
use crate::loudness::median_sorted;

/// Value reported for a perfect (zero-error) score.
pub const SDR_CAP_DB: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub filter_len: usize,
    /// Seconds.
    pub window: f64,
    /// Seconds.
    pub hop: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            filter_len: 512,
            window: 1.0,
            hop: 1.0,
        }
    }
}

impl ProjectionConfig {
    fn frames(&self, sample_rate: u32) -> Result<(usize, usize)> {
        let fs = sample_rate as f64;
        let win = (self.window * fs).round() as usize;
        let hop = (self.hop * fs).round() as usize;
        if self.filter_len == 0 {
            return Err(Error::Config("filter_len must be at least 1".into()));
        }
        if hop == 0 || win < hop {
            return Err(Error::Config(format!(
                "need window >= hop > 0, got window {} s, hop {} s",
                self.window, self.hop
            )));
        }
        if win <= self.filter_len {
            return Err(Error::Config(format!(
                "window of {win} frames must exceed filter_len {}",
                self.filter_len
            )));
        }
        Ok((win, hop))
    }
}

fn ratio_db(signal: f64, noise: f64) -> f64 {
    if noise <= 0.0 {
        return SDR_CAP_DB;
    }
    (10.0 * (signal / noise).log10()).min(SDR_CAP_DB)
}

/// Scale-invariant SDR in dB, capped at [`SDR_CAP_DB`].
pub fn si_sdr(reference: &AudioClip, estimate: &AudioClip) -> Result<f64> {
    reference.ensure_same_shape(estimate, "si-sdr")?;
    let pairs = || {
        reference
            .channels()
            .iter()
            .zip(estimate.channels())
            .flat_map(|(r, e)| r.iter().zip(e.iter()))
    };
    let ref_energy: f64 = pairs().map(|(r, _)| r * r).sum();
    if !(ref_energy > 0.0) {
        return Err(Error::Argument("reference has zero energy".into()));
    }
    let dot: f64 = pairs().map(|(r, e)| r * e).sum();
    let alpha = dot / ref_energy;
    let (target, noise) = pairs().fold((0.0, 0.0), |(t, n), (r, e)| {
        let s = alpha * r;
        (t + s * s, n + (e - s) * (e - s))
    });
    Ok(ratio_db(target, noise))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramewiseScore {
    /// Scores of the windows that were not excluded, in time order.
    pub per_window: Vec<f64>,
    /// NaN when every window was excluded.
    pub median: f64,
    pub mean: f64,
    pub n_excluded: usize,
}

impl FramewiseScore {
    fn from_windows(windows: Vec<Option<f64>>) -> Self {
        let n_excluded = windows.iter().filter(|w| w.is_none()).count();
        let per_window: Vec<f64> = windows.into_iter().flatten().collect();
        let (median, mean) = median_and_mean(&per_window);
        FramewiseScore {
            per_window,
            median,
            mean,
            n_excluded,
        }
    }
}

/// Order-independent median and mean; NaN for empty input.
fn median_and_mean(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    (median_sorted(&sorted), mean)
}

/// Per-channel sufficient statistics of one window.
struct WindowStats {
    /// Autocorrelation of the reference, lags `0..filter_len`.
    acf: Vec<f64>,
    /// Cross-correlation `sum_n e[n] r[n - k]`, lags `0..filter_len`.
    xcorr: Vec<f64>,
    est_energy: f64,
}

struct Correlator {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Correlator {
    fn new(win: usize, filter_len: usize) -> Self {
        let len = (win + filter_len - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        Correlator {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    fn stats(&self, reference: &[f64], estimate: &[f64], filter_len: usize) -> WindowStats {
        let spectrum = |x: &[f64]| {
            let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            buf.resize(self.len, Complex64::new(0.0, 0.0));
            self.forward.process(&mut buf);
            buf
        };
        let r = spectrum(reference);
        let e = spectrum(estimate);
        let inverse = |mut buf: Vec<Complex64>| {
            self.inverse.process(&mut buf);
            let norm = 1.0 / self.len as f64;
            buf.truncate(filter_len);
            buf.into_iter().map(|c| c.re * norm).collect::<Vec<f64>>()
        };
        let mut acf = inverse(r.iter().map(|a| a * a.conj()).collect());
        let mut xcorr = inverse(e.iter().zip(&r).map(|(b, a)| b * a.conj()).collect());

        // Lag 0 and the estimate energy by direct summation, so identical
        // inputs give bit-identical statistics.
        acf[0] = reference.iter().map(|v| v * v).sum();
        xcorr[0] = reference.iter().zip(estimate).map(|(a, b)| a * b).sum();
        let est_energy = estimate.iter().map(|v| v * v).sum();
        WindowStats {
            acf,
            xcorr,
            est_energy,
        }
    }
}

/// Projection and residual energies of one channel, or `None` if the
/// reference is silent or the normal equations are singular.
fn project(stats: &WindowStats) -> Option<(f64, f64)> {
    if !(stats.acf[0] > 0.0) {
        return None;
    }
    let h = toeplitz::solve_symmetric_toeplitz(&stats.acf, &stats.xcorr)?;
    let target = quad_form(&stats.acf, &h);
    let cross: f64 = h.iter().zip(&stats.xcorr).map(|(a, b)| a * b).sum();
    let residual = (stats.est_energy - 2.0 * cross + target).max(0.0);
    Some((target.max(0.0), residual))
}

/// `h^T T h` for the symmetric Toeplitz matrix with first column `column`.
fn quad_form(column: &[f64], h: &[f64]) -> f64 {
    let n = h.len();
    let diag: f64 = column[0] * h.iter().map(|v| v * v).sum::<f64>();
    let off: f64 = (1..n)
        .map(|lag| column[lag] * (0..n - lag).map(|i| h[i] * h[i + lag]).sum::<f64>())
        .sum();
    diag + 2.0 * off
}

/// Window start frames: `floor((n - win) / hop) + 1` windows from t = 0.
fn window_starts(n_frames: usize, win: usize, hop: usize) -> Vec<usize> {
    (0..=(n_frames - win) / hop).map(|i| i * hop).collect()
}

pub fn framewise_sdr(
    reference: &AudioClip,
    estimate: &AudioClip,
    config: &ProjectionConfig,
) -> Result<FramewiseScore> {
    reference.ensure_same_shape(estimate, "framewise sdr")?;
    let (win, hop) = config.frames(reference.sample_rate())?;
    if reference.n_frames() < win {
        return Err(Error::InsufficientDuration {
            needed: win,
            got: reference.n_frames(),
        });
    }
    let correlator = Correlator::new(win, config.filter_len);
    let windows: Vec<Option<f64>> = window_starts(reference.n_frames(), win, hop)
        .into_par_iter()
        .map(|start| {
            let mut target = 0.0;
            let mut residual = 0.0;
            let mut any_reference = false;
            for c in 0..reference.n_channels() {
                let r = &reference.channel(c)[start..start + win];
                let e = &estimate.channel(c)[start..start + win];
                let stats = correlator.stats(r, e, config.filter_len);
                if stats.acf[0] > 0.0 {
                    let (t, n) = project(&stats)?;
                    any_reference = true;
                    target += t;
                    residual += n;
                } else {
                    residual += stats.est_energy;
                }
            }
            any_reference.then(|| ratio_db(target, residual))
        })
        .collect();
    Ok(FramewiseScore::from_windows(windows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StemScore {
    pub sdr: FramewiseScore,
    pub si_sdr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sdr_median: f64,
    pub sdr_mean: f64,
    pub si_sdr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub track_id: String,
    pub stems: BTreeMap<StemName, StemScore>,
    /// Mean over the four stems of each aggregate.
    pub avg: Aggregate,
}

pub fn evaluate_stems(
    track_id: &str,
    reference: &BTreeMap<StemName, AudioClip>,
    estimate: &BTreeMap<StemName, AudioClip>,
    config: &ProjectionConfig,
) -> Result<EvalResult> {
    let mut stems = BTreeMap::new();
    for name in StemName::ALL {
        let (Some(r), Some(e)) = (reference.get(&name), estimate.get(&name)) else {
            return Err(Error::Consistency(format!(
                "track {track_id}: stem {name} missing from reference or estimate"
            )));
        };
        r.ensure_same_shape(e, &format!("track {track_id}, stem {name}"))?;
        stems.insert(
            name,
            StemScore {
                sdr: framewise_sdr(r, e, config)?,
                si_sdr: si_sdr(r, e)?,
            },
        );
    }
    let mean_of = |f: &dyn Fn(&StemScore) -> f64| stems.values().map(f).sum::<f64>() / 4.0;
    let avg = Aggregate {
        sdr_median: mean_of(&|s| s.sdr.median),
        sdr_mean: mean_of(&|s| s.sdr.mean),
        si_sdr: mean_of(&|s| s.si_sdr),
    };
    Ok(EvalResult {
        track_id: track_id.to_string(),
        stems,
        avg,
    })
}

pub fn evaluate_stemsets(
    track_id: &str,
    reference: &StemSet,
    estimate: &StemSet,
    config: &ProjectionConfig,
) -> Result<EvalResult> {
    evaluate_stems(track_id, &reference.stems, &estimate.stems, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Stem name or `"avg"`.
    pub stem: String,
    /// Median over tracks of per-track median SDR.
    pub sdr_median: f64,
    /// Mean over tracks of per-track mean SDR.
    pub sdr_mean: f64,
    /// Mean over tracks of SI-SDR.
    pub si_sdr: f64,
    pub n_tracks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stem,median,mean,si_sdr\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.4},{:.4},{:.4}\n",
                r.stem, r.sdr_median, r.sdr_mean, r.si_sdr
            ));
        }
        out
    }

    pub fn row(&self, stem: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.stem == stem)
    }
}

/// Table-style summary across tracks. Non-finite per-track values are skipped.
pub fn aggregate_tracks(results: &[EvalResult]) -> Result<Summary> {
    if results.is_empty() {
        return Err(Error::Argument("no evaluation results".into()));
    }
    let finite = |it: &mut dyn Iterator<Item = f64>| it.filter(|v| v.is_finite()).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for name in StemName::ALL {
        let scores: Vec<&StemScore> = results.iter().filter_map(|r| r.stems.get(&name)).collect();
        let (sdr_median, _) = median_and_mean(&finite(&mut scores.iter().map(|s| s.sdr.median)));
        let (_, sdr_mean) = median_and_mean(&finite(&mut scores.iter().map(|s| s.sdr.mean)));
        let (_, si) = median_and_mean(&finite(&mut scores.iter().map(|s| s.si_sdr)));
        rows.push(SummaryRow {
            stem: name.to_string(),
            sdr_median,
            sdr_mean,
            si_sdr: si,
            n_tracks: scores.len(),
        });
    }
    let avg = |f: fn(&SummaryRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    let avg_row = SummaryRow {
        stem: "avg".into(),
        sdr_median: avg(|r| r.sdr_median),
        sdr_mean: avg(|r| r.sdr_mean),
        si_sdr: avg(|r| r.si_sdr),
        n_tracks: results.len(),
    };
    rows.push(avg_row);
    Ok(Summary { rows })
}
