//! Limit a synthetic mix, then propagate the gain trace onto its stems.
//!
//! ```text
//! cargo run --example limit_clip
//! ```

use loudsep::limiter::{find_threshold_for_reduction, limit, sample_ratio, LimiterParams, RATIO_EPSILON};
use loudsep::loudness::{db_to_gain, lufs};
use loudsep::synth::program_track;

fn main() -> loudsep::Result<()> {
    let track = program_track(7, 8.0, 44100, 0.9);
    let mix = &track.mixture;

    let params = LimiterParams::default().with_threshold(-6.0).with_release(80.0);
    let (limited, trace) = limit(mix, &params)?;
    println!(
        "threshold -6 dBFS: peak {:.4} -> {:.4} (ceiling {:.4}), max reduction {:.2} dB",
        mix.peak(),
        limited.peak(),
        params.ceiling(),
        trace.max_reduction_db()
    );
    println!("loudness {:.2} -> {:.2} LUFS", lufs(mix)?, lufs(&limited)?);

    // The divide-based ratio recovers the trace wherever the mix is audible.
    let ratio = sample_ratio(mix, &limited, RATIO_EPSILON)?;
    let worst = (0..mix.n_frames())
        .filter(|&n| mix.frame_peak(n) > 1e-6)
        .map(|n| (ratio.gain[n] - trace.gain[n]).abs())
        .fold(0.0, f64::max);
    println!("ratio vs trace: max deviation {worst:.2e}");

    // Stems scaled by the trace still sum to the limited mix.
    let stems = track.multiplied_by_frames(&trace.gain)?;
    println!(
        "limited stems: additivity error {:.2e}, max |stem mix - limited| {:.2e}",
        stems.additivity_error()?,
        stems.mixture.max_abs_diff(&limited)?
    );

    for (lo, hi) in [(3.0, 4.0), (6.0, 7.0)] {
        let t = find_threshold_for_reduction(mix, (lo, hi), &LimiterParams::default())?;
        let (out, tr) = limit(mix, &LimiterParams::default().with_threshold(t))?;
        let makeup = 1.0 / out.peak();
        println!(
            "band [{lo}, {hi}] dB: threshold {t:.2} dBFS, reduction {:.2} dB, makeup {:+.2} dB",
            tr.max_reduction_db(),
            20.0 * makeup.log10()
        );
        assert!(out.peak() <= db_to_gain(t) * (1.0 + 1e-12));
    }
    Ok(())
}
