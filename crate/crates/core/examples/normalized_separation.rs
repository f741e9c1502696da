//! Run an external separator on loudness-normalized input and restore the
//! original level on its outputs.
//!
//! The stand-in separator here copies the input to two "stems"; any command
//! line with `{input}` and `{output_dir}` placeholders works.
//!
//! ```text
//! cargo run --example normalized_separation
//! ```

use loudsep::audio::{read_wav, write_wav, SampleFormat};
use loudsep::cli::{wrap_separate, WrapConfig};
use loudsep::loudness::lufs;
use loudsep::synth::program_track;

fn main() -> loudsep::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let input = dir.path().join("loud_master.wav");
    let mix = program_track(5, 6.0, 44100, 0.98).mixture;
    write_wav(&mix, &input, SampleFormat::Float32)?;

    let mut config = WrapConfig::new(
        "cp {input} {output_dir}/vocals.wav && mkdir -p {output_dir}/extra && cp {input} {output_dir}/extra/accompaniment.wav",
    );
    config.expected_stems = vec!["vocals".into(), "accompaniment".into()];
    let out_dir = dir.path().join("separated");
    let outcome = wrap_separate(&input, &out_dir, &config)?;
    let decoded = read_wav(&input)?;

    println!(
        "input {:.2} LUFS, normalized by {:+.2} dB for the separator ({:.2} s)",
        lufs(&mix)?,
        outcome.gain_db,
        outcome.separator_seconds
    );
    for rel in &outcome.stems {
        let stem = read_wav(out_dir.join(rel))?;
        println!(
            "  {}: {:.2} LUFS, max deviation from input {:.2e}",
            rel.display(),
            lufs(&stem)?,
            stem.max_abs_diff(&decoded)?
        );
    }
    Ok(())
}
