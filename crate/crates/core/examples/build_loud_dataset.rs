//! Build moderately and heavily limited copies of a stem library and verify
//! them against the originals.
//!
//! ```text
//! cargo run --release --example build_loud_dataset [OUT_DIR]
//! ```

use std::path::PathBuf;

use loudsep::audio::SampleFormat;
use loudsep::dataset::{build_dataset, verify_dataset, DatasetRecipe};
use loudsep::synth::write_library;
use loudsep::TrackManifest;

fn main() -> loudsep::Result<()> {
    let scratch = tempfile::tempdir().expect("temp dir");
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| scratch.path().to_path_buf());
    let original = root.join("original");
    write_library(&original, 6, 8.0, 44100, 2024, SampleFormat::Float32)?;
    let library = TrackManifest::discover(&original)?;

    for recipe in [DatasetRecipe::loud(), DatasetRecipe::extra_loud()] {
        let out = root.join(&recipe.name);
        let report = build_dataset(&library, &recipe, &out, SampleFormat::Float32)?;
        println!("== {} (reduction {:?} dB)", recipe.name, recipe.reduction_range);
        for row in &report.rows {
            println!(
                "  {}  threshold {:6.2} dBFS  reduction {:.2} dB  {:6.2} -> {:6.2} LUFS",
                row.track_id, row.threshold_db, row.max_reduction_db, row.lufs_in, row.lufs_out
            );
        }
        for f in &report.failures {
            println!("  {} skipped: {}", f.track_id, f.error);
        }
        if let Some(s) = &report.stats {
            println!("  loudness mean {:.2} LUFS, std {:.2}", s.mean, s.std);
        }

        let check = verify_dataset(&original, &out)?;
        let worst = check.tracks.iter().map(|t| t.reproduction_error).fold(0.0, f64::max);
        println!("  verify: all passed = {}, worst ratio reproduction {worst:.2e}", check.all_passed);
    }
    println!("written under {}", root.display());
    Ok(())
}
