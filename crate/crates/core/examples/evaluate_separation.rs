//! Score degraded estimates with SI-SDR and framewise SDR, then aggregate
//! across tracks into a stems-by-statistic table.
//!
//! ```text
//! cargo run --release --example evaluate_separation
//! ```

use std::collections::BTreeMap;

use loudsep::metrics::{aggregate_tracks, evaluate_stems, framewise_sdr, si_sdr, ProjectionConfig};
use loudsep::synth::{noise, program_track};
use loudsep::{AudioClip, StemName};

fn degrade(clip: &AudioClip, snr_db: f64, seed: u64) -> AudioClip {
    let power = clip.channels().iter().flatten().map(|s| s * s).sum::<f64>()
        / (clip.n_frames() * clip.n_channels()) as f64;
    let std = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut out = clip.clone();
    out.add_assign(&noise(std, clip.n_frames(), clip.sample_rate(), clip.n_channels(), seed))
        .unwrap();
    out
}

fn main() -> loudsep::Result<()> {
    let config = ProjectionConfig {
        filter_len: 256,
        ..ProjectionConfig::default()
    };

    let track = program_track(1, 5.0, 44100, 0.7);
    let vocals = track.stem(StemName::Vocals);
    let noisy = degrade(vocals, 10.0, 9);
    println!("vocals at 10 dB SNR: SI-SDR {:.2} dB", si_sdr(vocals, &noisy)?);
    println!("  scaled by 0.3:     SI-SDR {:.2} dB", si_sdr(vocals, &noisy.scaled(0.3))?);
    let fw = framewise_sdr(vocals, &noisy, &config)?;
    println!(
        "  framewise SDR: median {:.2}, mean {:.2} over {} windows",
        fw.median,
        fw.mean,
        fw.per_window.len()
    );

    let mut results = Vec::new();
    for seed in 0..4 {
        let track = program_track(seed, 5.0, 44100, 0.7);
        let estimate: BTreeMap<StemName, AudioClip> = StemName::ALL
            .iter()
            .enumerate()
            .map(|(k, &name)| (name, degrade(track.stem(name), 4.0 + 4.0 * k as f64, seed * 10 + k as u64)))
            .collect();
        results.push(evaluate_stems(&format!("track{seed}"), &track.stems, &estimate, &config)?);
    }
    print!("{}", aggregate_tracks(&results)?.to_csv());
    Ok(())
}
