//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use loudsep::AudioClip;

/// Published 48 kHz K-weighting coefficients: (b, a) per stage.
pub const K_TABLE_48K: [([f64; 3], [f64; 3]); 2] = [
    (
        [1.53512485958697, -2.69169618940638, 1.19839281085285],
        [1.0, -1.69065929318241, 0.73248077421585],
    ),
    ([1.0, -2.0, 1.0], [1.0, -1.99004745483398, 0.99007225036621]),
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct-form I biquad.
pub fn biquad(b: [f64; 3], a: [f64; 3], x: &[f64]) -> Vec<f64> {
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    x.iter()
        .map(|&x0| {
            let y0 = b[0] * x0 + b[1] * x1 + b[2] * x2 - a[1] * y1 - a[2] * y2;
            (x2, x1, y2, y1) = (x1, x0, y1, y0);
            y0
        })
        .collect()
}

/// |H(e^{jw})|^2 of one biquad.
pub fn biquad_power(b: [f64; 3], a: [f64; 3], freq: f64, fs: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq / fs;
    let eval = |c: [f64; 3]| {
        let re = c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
        let im = -(c[1] * w.sin() + c[2] * (2.0 * w).sin());
        re * re + im * im
    };
    eval(b) / eval(a)
}

/// Closed-form loudness of a steady sine of `amplitude` on `n_channels`
/// unit-weight channels at 48 kHz.
pub fn sine_lufs_closed_form(freq: f64, amplitude: f64, n_channels: usize) -> f64 {
    let weight: f64 = K_TABLE_48K
        .iter()
        .map(|(b, a)| biquad_power(*b, *a, freq, 48000.0))
        .product();
    -0.691 + 10.0 * (n_channels as f64 * amplitude * amplitude / 2.0 * weight).log10()
}

/// Gated integrated loudness at 48 kHz, computed naively from the table.
pub fn gated_lufs_48k(channels: &[Vec<f64>]) -> Option<f64> {
    let block = 19200;
    let hop = 4800;
    let n = channels[0].len();
    if n < block {
        return None;
    }
    let filtered: Vec<Vec<f64>> = channels
        .iter()
        .map(|ch| K_TABLE_48K.iter().fold(ch.clone(), |x, (b, a)| biquad(*b, *a, &x)))
        .collect();
    let powers: Vec<f64> = (0..=(n - block) / hop)
        .map(|j| {
            filtered
                .iter()
                .map(|y| y[j * hop..j * hop + block].iter().map(|s| s * s).sum::<f64>() / block as f64)
                .sum()
        })
        .collect();
    let loud = |p: f64| -0.691 + 10.0 * p.log10();
    let abs: Vec<f64> = powers.into_iter().filter(|&p| p > 0.0 && loud(p) > -70.0).collect();
    if abs.is_empty() {
        return None;
    }
    let rel = loud(abs.iter().sum::<f64>() / abs.len() as f64) - 10.0;
    let kept: Vec<f64> = abs.into_iter().filter(|&p| loud(p) > rel).collect();
    (!kept.is_empty()).then(|| loud(kept.iter().sum::<f64>() / kept.len() as f64))
}

/// Scalar simulation of the limiter gain recursion on a constant-level input.
pub fn constant_input_gain(level: f64, ceiling: f64, n: usize, attack_ms: f64, release_ms: f64, fs: f64) -> f64 {
    let attack = (-1.0 / (attack_ms * 1e-3 * fs)).exp();
    let release = (-1.0 / (release_ms * 1e-3 * fs)).exp();
    let target = (ceiling / level).min(1.0);
    let mut g = 1.0_f64;
    for _ in 0..n {
        let c = if target < g { attack } else { release };
        g = c * g + (1.0 - c) * target;
    }
    g
}

/// Per-window SDR by an explicit convolution matrix and a dense solve.
///
/// Each channel gets its own `filter_len`-tap filter; the window of the
/// estimate is zero-extended to the length of the full convolution.
pub fn dense_window_sdr(reference: &AudioClip, estimate: &AudioClip, start: usize, win: usize, filter_len: usize) -> Option<f64> {
    let rows = win + filter_len - 1;
    let (mut target, mut residual) = (0.0, 0.0);
    let mut any = false;
    for c in 0..reference.n_channels() {
        let r = &reference.channel(c)[start..start + win];
        let e = &estimate.channel(c)[start..start + win];
        let e_pad = DVector::from_fn(rows, |t, _| if t < win { e[t] } else { 0.0 });
        if r.iter().all(|v| *v == 0.0) {
            residual += e_pad.norm_squared();
            continue;
        }
        any = true;
        let conv = DMatrix::from_fn(rows, filter_len, |t, k| {
            if t >= k && t - k < win {
                r[t - k]
            } else {
                0.0
            }
        });
        let gram = conv.transpose() * &conv;
        let rhs = conv.transpose() * &e_pad;
        let h = gram.lu().solve(&rhs)?;
        let s = &conv * h;
        target += s.norm_squared();
        residual += (&e_pad - &s).norm_squared();
    }
    any.then(|| 10.0 * (target / residual).log10())
}

/// Noise orthogonal to `reference` (flattened over channels) with the same energy.
pub fn orthogonal_equal_energy(reference: &AudioClip, seed: u64) -> AudioClip {
    let mut rng = rng(seed);
    let flat_ref: Vec<f64> = reference.channels().concat();
    let mut v: Vec<f64> = (0..flat_ref.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rr: f64 = flat_ref.iter().map(|x| x * x).sum();
    // Two Gram-Schmidt passes for full orthogonality in floating point.
    for _ in 0..2 {
        let proj: f64 = v.iter().zip(&flat_ref).map(|(a, b)| a * b).sum::<f64>() / rr;
        v.iter_mut().zip(&flat_ref).for_each(|(a, b)| *a -= proj * b);
    }
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let scale = (rr / vv).sqrt();
    let n = reference.n_frames();
    let channels = v.chunks(n).map(|c| c.iter().map(|x| x * scale).collect()).collect();
    AudioClip::new(channels, reference.sample_rate()).unwrap()
}

/// FIR filter, output truncated to the input length.
pub fn fir(x: &[f64], taps: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| taps.iter().enumerate().take(n + 1).map(|(k, h)| h * x[n - k]).sum())
        .collect()
}

pub fn white(rng: &mut ChaCha8Rng, n: usize, amplitude: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-amplitude..amplitude)).collect()
}

/// Sorted `(relative path, sha256)` of every file under `dir`.
pub fn hash_tree(dir: &Path) -> BTreeMap<PathBuf, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, String>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    hex::encode(Sha256::digest(&bytes)),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn loudsep_bin() -> &'static str {
    env!("CARGO_BIN_EXE_loudsep")
}
