//! Integrated loudness of reference tones and of a small synthetic library.
//!
//! ```text
//! cargo run --example measure_loudness
//! ```

use loudsep::loudness::{apply_gain_db, gain_db_to_target, loudness_stats, lufs};
use loudsep::synth::{program_track, sine};

fn main() -> loudsep::Result<()> {
    // A full-scale 997 Hz sine on one channel reads -3.01 LUFS.
    let tone = sine(997.0, 1.0, 5.0, 48000, 1);
    println!("997 Hz, 0 dBFS peak, mono: {:7.3} LUFS", lufs(&tone)?);

    let stereo = sine(1000.0, 10f64.powf(-20.0 / 20.0), 5.0, 44100, 2);
    println!("1 kHz, -20 dBFS peak, stereo: {:7.3} LUFS", lufs(&stereo)?);

    let mut readings = Vec::new();
    for seed in 0..8 {
        let track = program_track(seed, 6.0, 44100, 0.5 + 0.05 * seed as f64);
        let l = lufs(&track.mixture)?;
        println!("track {seed}: {l:7.2} LUFS, peak {:.3}", track.mixture.peak());
        readings.push(l);
    }
    let stats = loudness_stats(&readings)?;
    println!(
        "library: mean {:.2}, std {:.2}, median {:.2}, range [{:.2}, {:.2}]",
        stats.mean, stats.std, stats.median, stats.min, stats.max
    );

    // Normalizing to -14 LUFS is a single linear gain.
    let track = program_track(42, 6.0, 44100, 0.6);
    let g = gain_db_to_target(&track.mixture, -14.0)?;
    let normalized = apply_gain_db(&track.mixture, g);
    println!("gain {g:+.2} dB -> {:.4} LUFS", lufs(&normalized)?);
    Ok(())
}
