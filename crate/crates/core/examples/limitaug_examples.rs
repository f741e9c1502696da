//! Generate training examples with each augmentation strategy and compare
//! the loudness of what a network would see.
//!
//! ```text
//! cargo run --release --example limitaug_examples
//! ```

use loudsep::augment::{
    generate_examples, BatchSettings, LimitAugConfig, SegmentOptions, StemLibrary, Strategy,
    TargetLoudnessDist,
};
use loudsep::loudness::loudness_stats;
use loudsep::synth::program_track;
use loudsep::StemName;

fn main() -> loudsep::Result<()> {
    let tracks = (0..5)
        .map(|k| (format!("song{k}"), program_track(100 + k, 12.0, 44100, 0.4)))
        .collect();
    let library = StemLibrary::new(tracks)?;
    let settings = BatchSettings {
        target_stem: StemName::Vocals,
        duration: 4.0,
        count: 24,
        seed: 7,
        segment: SegmentOptions::default(),
    };

    for strategy in Strategy::ALL {
        let config = LimitAugConfig {
            strategy,
            target_dist: TargetLoudnessDist::EXTRA_LOUD,
            ..LimitAugConfig::default()
        };
        let batch = generate_examples(&library, &config, &settings, 0..settings.count)?;
        let achieved: Vec<f64> = batch.iter().filter_map(|g| g.example.achieved_lufs).collect();
        let peaks: Vec<f64> = batch.iter().map(|g| g.example.mixture.peak()).collect();
        let stats = loudness_stats(&achieved)?;
        println!(
            "{:<20} loudness {:6.2} +- {:4.2} LUFS, max peak {:.3}",
            strategy.to_string(),
            stats.mean,
            stats.std,
            peaks.iter().cloned().fold(0.0, f64::max)
        );
    }

    // One example in detail: the target is the vocal stem under the exact
    // per-frame multiplier the mixture received.
    let config = LimitAugConfig::default();
    let g = &generate_examples(&library, &config, &settings, 3..4)?[0];
    let ex = &g.example;
    println!(
        "example 3: input {:.2} LUFS, drawn {:.2}, gain {:+.2} dB, release {:.0} ms, achieved {:.2}",
        ex.input_lufs.unwrap(),
        ex.drawn_target_lufs.unwrap(),
        ex.gain_db,
        ex.release_ms.unwrap(),
        ex.achieved_lufs.unwrap()
    );
    for (name, src) in &g.spec.sources {
        println!(
            "  {name:<6} from {} at {:.2} s, {:+.2} dB{}",
            src.track_id,
            src.offset,
            src.gain_db,
            if src.channel_swap { ", swapped" } else { "" }
        );
    }
    Ok(())
}
