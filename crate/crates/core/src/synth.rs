//! Deterministic synthetic program material for demos and tests.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::audio::{AudioClip, SampleFormat, StemName, StemSet};
use crate::error::Result;

/// Sine of `amplitude` peak, identical on every channel.
pub fn sine(freq: f64, amplitude: f64, secs: f64, sample_rate: u32, n_channels: usize) -> AudioClip {
    let n = (secs * sample_rate as f64).round() as usize;
    let ch: Vec<f64> = (0..n)
        .map(|i| amplitude * (TAU * freq * i as f64 / sample_rate as f64).sin())
        .collect();
    AudioClip::new(vec![ch; n_channels], sample_rate).expect("sine is finite")
}

/// White Gaussian noise with standard deviation `std` per channel.
pub fn noise(std: f64, n_frames: usize, sample_rate: u32, n_channels: usize, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = (0..n_channels)
        .map(|_| {
            (0..n_frames)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    std * z
                })
                .collect::<Vec<f64>>()
        })
        .collect();
    AudioClip::new(channels, sample_rate).expect("noise is finite")
}

fn one_pole_lowpass(x: &mut [f64], cutoff: f64, sample_rate: u32) {
    let a = (-TAU * cutoff / sample_rate as f64).exp();
    let mut y = 0.0;
    for s in x.iter_mut() {
        y = (1.0 - a) * *s + a * y;
        *s = y;
    }
}

/// A stereo four-stem track whose mixture peaks at roughly `level`.
///
/// Drums are decaying noise bursts on a random tempo, bass a low sawtooth-ish
/// line, vocals a vibrato tone with syllable envelopes, other a sustained
/// chord. Stems are independent random signals, so the mixture rarely
/// cancels to silence.
pub fn program_track(seed: u64, secs: f64, sample_rate: u32, level: f64) -> StemSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let n = (secs * fs).round() as usize;
    let t = |i: usize| i as f64 / fs;

    let beat = rng.random_range(0.35..0.6);
    let mut drums = vec![0.0; n];
    let mut hit_amp = 1.0;
    for (i, d) in drums.iter_mut().enumerate() {
        let phase = t(i) % beat;
        if phase < 1.0 / fs {
            hit_amp = rng.random_range(0.6..1.0);
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        *d = hit_amp * (-phase * 18.0).exp() * noise * 0.45;
    }
    one_pole_lowpass(&mut drums, 6000.0, sample_rate);

    let root = rng.random_range(40.0..70.0);
    let bass: Vec<f64> = (0..n)
        .map(|i| {
            let f = root * if (t(i) / (4.0 * beat)) as usize % 2 == 0 { 1.0 } else { 1.5 };
            let p = TAU * f * t(i);
            0.5 * (p.sin() + 0.3 * (2.0 * p).sin() + 0.15 * (3.0 * p).sin())
        })
        .collect();

    let voice = rng.random_range(180.0..320.0);
    let syllable = rng.random_range(0.2..0.35);
    let vocals: Vec<f64> = (0..n)
        .map(|i| {
            let env = (std::f64::consts::PI * (t(i) % syllable) / syllable).sin().powi(2);
            let p = TAU * voice * t(i) + 0.8 * (TAU * 5.5 * t(i)).sin();
            0.4 * env * (p.sin() + 0.4 * (2.0 * p).sin())
        })
        .collect();

    let chord = [1.0, 1.26, 1.5, 2.0].map(|r| r * rng.random_range(110.0..180.0));
    let mut other: Vec<f64> = (0..n)
        .map(|i| chord.iter().map(|f| (TAU * f * t(i)).sin()).sum::<f64>() * 0.12)
        .collect();
    let hiss = noise(0.01, n, sample_rate, 1, seed ^ 0x5eed).into_channels().remove(0);
    other.iter_mut().zip(hiss).for_each(|(o, h)| *o += h);

    let pans: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.3..0.7));
    let mut stems: BTreeMap<StemName, AudioClip> = BTreeMap::new();
    for ((name, mono), pan) in [
        (StemName::Drums, drums),
        (StemName::Bass, bass),
        (StemName::Vocals, vocals),
        (StemName::Other, other),
    ]
    .into_iter()
    .zip(pans)
    {
        let left = mono.iter().map(|s| s * (1.0 - pan)).collect();
        let right = mono.iter().map(|s| s * pan).collect();
        stems.insert(name, AudioClip::new(vec![left, right], sample_rate).expect("finite"));
    }
    let set = StemSet::from_stems(stems).expect("same shapes");
    let scale = level / set.mixture.peak();
    set.multiplied_by_frames(&vec![scale; n]).expect("same length")
}

/// Write `n_tracks` synthetic tracks as `dir/track_NNN/{mixture,<stem>}.wav`.
pub fn write_library(
    dir: impl AsRef<Path>,
    n_tracks: usize,
    secs: f64,
    sample_rate: u32,
    seed: u64,
    format: SampleFormat,
) -> Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_tracks)
        .map(|k| {
            let id = format!("track_{k:03}");
            let level = rng.random_range(0.3..0.9);
            program_track(rng.random(), secs, sample_rate, level).write_dir(dir.as_ref().join(&id), format)?;
            Ok(id)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn program_track_is_additive_and_scaled() {
        let set = program_track(3, 2.0, 44100, 0.8);
        assert!(set.additivity_error().unwrap() < 1e-12);
        assert!((set.mixture.peak() - 0.8).abs() < 1e-12);
        assert_eq!(set.mixture.n_channels(), 2);
        assert_eq!(program_track(3, 2.0, 44100, 0.8), set);
    }
}
