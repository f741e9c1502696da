//! Loud evaluation sets built by limiting mixtures and propagating the
//! applied gain onto the stems.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{load_stem_set, SampleFormat, StemSet, TrackManifest, ADDITIVITY_TOLERANCE};
use crate::error::{Error, Result};
use crate::limiter::{find_threshold_for_reduction, limit, sample_ratio_raw, LimiterParams, RATIO_EPSILON};
use crate::loudness::{gain_to_db, loudness_stats, lufs, LoudnessStats};

/// Peak level the makeup gain restores, linear (0 dBFS).
pub const CEILING: f64 = 1.0;
/// Slack allowed on the ceiling check.
pub const CEILING_SLACK: f64 = 1e-6;
/// Tolerance of the ratio-reproduction check in [`verify_dataset`].
pub const REPRODUCTION_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Makeup {
    /// Scale the limited mixture so its peak sits at [`CEILING`].
    ToCeiling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecipe {
    pub name: String,
    /// Target maximum gain reduction, dB.
    pub reduction_range: (f64, f64),
    /// Threshold is searched per track; the rest is used as given.
    pub limiter_template: LimiterParams,
    pub makeup: Makeup,
}

impl DatasetRecipe {
    pub fn custom(name: impl Into<String>, reduction_range: (f64, f64), release_ms: f64) -> Self {
        DatasetRecipe {
            name: name.into(),
            reduction_range,
            limiter_template: LimiterParams::default().with_release(release_ms),
            makeup: Makeup::ToCeiling,
        }
    }

    /// 3-4 dB of peak reduction.
    pub fn loud() -> Self {
        Self::custom("L", (3.0, 4.0), 100.0)
    }

    /// 6-7 dB of peak reduction.
    pub fn extra_loud() -> Self {
        Self::custom("XL", (6.0, 7.0), 100.0)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.reduction_range;
        if self.name.is_empty() {
            return Err(Error::Config("recipe name is empty".into()));
        }
        if !(0.0 <= lo && lo < hi) {
            return Err(Error::Config(format!("invalid reduction range [{lo}, {hi}]")));
        }
        self.limiter_template.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitedTrack {
    pub stems: StemSet,
    /// Limiter gain trace times makeup gain.
    pub multiplier: Vec<f64>,
    pub threshold_db: f64,
    pub max_reduction_db: f64,
    pub makeup_db: f64,
    pub lufs_in: f64,
    pub lufs_out: f64,
}

pub fn build_limited_track(track: &StemSet, recipe: &DatasetRecipe) -> Result<LimitedTrack> {
    recipe.validate()?;
    if !track.additive {
        return Err(Error::Consistency(format!(
            "mixture deviates from the stem sum by {:.2e}; use mixture_policy use_stem_sum",
            track.additivity_error()?
        )));
    }
    let lufs_in = lufs(&track.mixture)?;
    let threshold_db =
        find_threshold_for_reduction(&track.mixture, recipe.reduction_range, &recipe.limiter_template)?;
    let (limited, trace) = limit(&track.mixture, &recipe.limiter_template.with_threshold(threshold_db))?;

    let makeup = match recipe.makeup {
        Makeup::ToCeiling => CEILING / limited.peak(),
    };
    let multiplier: Vec<f64> = trace.gain.iter().map(|g| g * makeup).collect();
    let stems = track.multiplied_by_frames(&multiplier)?;
    let lufs_out = lufs(&stems.mixture)?;
    Ok(LimitedTrack {
        stems,
        multiplier,
        threshold_db,
        max_reduction_db: trace.max_reduction_db(),
        makeup_db: gain_to_db(makeup),
        lufs_in,
        lufs_out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub track_id: String,
    pub threshold_db: f64,
    pub max_reduction_db: f64,
    pub lufs_in: f64,
    pub lufs_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFailure {
    pub track_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub recipe: DatasetRecipe,
    pub rows: Vec<DatasetRow>,
    pub failures: Vec<TrackFailure>,
    /// Loudness statistics of the input mixtures of the built tracks.
    pub stats_in: Option<LoudnessStats>,
    /// Loudness statistics of the output mixtures.
    pub stats: Option<LoudnessStats>,
}

/// Build every track of `library` into `out_dir/<track_id>/`.
/// Failing tracks are reported and skipped.
pub fn build_dataset(
    library: &[TrackManifest],
    recipe: &DatasetRecipe,
    out_dir: &Path,
    format: SampleFormat,
) -> Result<DatasetReport> {
    if library.is_empty() {
        return Err(Error::Argument("empty track library".into()));
    }
    recipe.validate()?;

    let outcomes: Vec<Result<DatasetRow>> = library
        .par_iter()
        .map(|manifest| {
            let track = load_stem_set(manifest)?;
            let built = build_limited_track(&track, recipe)?;
            built.stems.write_dir(out_dir.join(&manifest.track_id), format)?;
            Ok(DatasetRow {
                track_id: manifest.track_id.clone(),
                threshold_db: built.threshold_db,
                max_reduction_db: built.max_reduction_db,
                lufs_in: built.lufs_in,
                lufs_out: built.lufs_out,
            })
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (manifest, outcome) in library.iter().zip(outcomes) {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::warn!("skipping {}: {e}", manifest.track_id);
                failures.push(TrackFailure {
                    track_id: manifest.track_id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let stats_of = |f: fn(&DatasetRow) -> f64| {
        let v: Vec<f64> = rows.iter().map(f).collect();
        loudness_stats(&v).ok()
    };
    Ok(DatasetReport {
        recipe: recipe.clone(),
        stats_in: stats_of(|r| r.lufs_in),
        stats: stats_of(|r| r.lufs_out),
        rows,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackVerification {
    pub track_id: String,
    pub additivity_error: f64,
    pub peak: f64,
    /// `max |ratio * original_stem - limited_stem|` over stems and the
    /// frames where the ratio is determined.
    pub reproduction_error: f64,
    /// Frames whose original mixture is below the ratio epsilon; stems that
    /// cancel there cannot be recovered from the mixture ratio.
    pub undetermined_frames: usize,
    pub problems: Vec<String>,
}

impl TrackVerification {
    pub fn passed(&self) -> bool {
        self.problems.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tracks: Vec<TrackVerification>,
    pub all_passed: bool,
}

pub fn verify_track(track_id: &str, original: &StemSet, limited: &StemSet) -> Result<TrackVerification> {
    original
        .mixture
        .ensure_same_shape(&limited.mixture, &format!("track {track_id}"))?;
    let mut problems = Vec::new();

    let additivity_error = limited.additivity_error()?;
    if additivity_error > ADDITIVITY_TOLERANCE {
        problems.push(format!("limited stems do not sum to the mixture ({additivity_error:.3e})"));
    }
    let peak = limited.mixture.peak();
    if peak > CEILING * (1.0 + CEILING_SLACK) {
        problems.push(format!("mixture peak {peak} exceeds the ceiling"));
    }

    let ratio = sample_ratio_raw(&original.mixture, &limited.mixture, RATIO_EPSILON)?;
    let determined: Vec<bool> = (0..original.n_frames())
        .map(|n| original.mixture.frame_peak(n) >= RATIO_EPSILON)
        .collect();
    let undetermined_frames = determined.iter().filter(|d| !**d).count();
    let mut reproduction_error = 0.0_f64;
    for (name, orig) in &original.stems {
        let lim = limited.stem(*name);
        orig.ensure_same_shape(lim, &format!("track {track_id} stem {name}"))?;
        for (o, l) in orig.channels().iter().zip(lim.channels()) {
            for n in (0..o.len()).filter(|&n| determined[n]) {
                reproduction_error = reproduction_error.max((ratio[n] * o[n] - l[n]).abs());
            }
        }
    }
    if reproduction_error > REPRODUCTION_TOLERANCE {
        problems.push(format!(
            "ratio applied to original stems misses limited stems by {reproduction_error:.3e}"
        ));
    }
    Ok(TrackVerification {
        track_id: track_id.to_string(),
        additivity_error,
        peak,
        reproduction_error,
        undetermined_frames,
        problems,
    })
}

/// Check a built dataset against its source library.
pub fn verify_dataset(original_dir: &Path, limited_dir: &Path) -> Result<VerificationReport> {
    let originals = TrackManifest::discover(original_dir)?;
    let limited = TrackManifest::discover(limited_dir)?;
    let ids = |v: &[TrackManifest]| v.iter().map(|m| m.track_id.clone()).collect::<Vec<_>>();
    if ids(&originals) != ids(&limited) {
        return Err(Error::Consistency(format!(
            "track layouts differ: {:?} vs {:?}",
            ids(&originals),
            ids(&limited)
        )));
    }
    let tracks = originals
        .par_iter()
        .zip(limited.par_iter())
        .map(|(o, l)| {
            let original = load_stem_set(o)?;
            let limited = load_stem_set(l)?;
            verify_track(&o.track_id, &original, &limited)
        })
        .collect::<Result<Vec<_>>>()?;
    let all_passed = tracks.iter().all(TrackVerification::passed);
    Ok(VerificationReport { tracks, all_passed })
}
