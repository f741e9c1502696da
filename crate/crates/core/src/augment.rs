//! Training-example construction with an online limiter (LimitAug) and the
//! alternative strategies it is compared against.
//!
//! Every example is a pure function of its inputs and a 64-bit seed. The
//! target stem is transformed with the exact per-frame multiplier the
//! mixture received (gain step times limiter trace, times an optional
//! post-normalization gain), so `sum(multiplier * stem_i) == mixture` holds
//! frame by frame.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{load_stem_set, write_wav, AudioClip, SampleFormat, StemName, StemSet, TrackManifest};
use crate::error::{Error, Result};
use crate::limiter::{limit, LimiterParams};
use crate::loudness::{db_to_gain, lufs};

/// Reference level for input loudness normalization, LUFS.
pub const REFERENCE_LUFS: f64 = -14.0;
/// Attempts per example before giving up on silent draws.
pub const MAX_ATTEMPTS: usize = 100;

/// Distribution of the loudness a training mixture is pushed towards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TargetLoudnessDist {
    Normal { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    Fixed { value: f64 },
}

impl TargetLoudnessDist {
    /// Loudness statistics of the moderately limited evaluation set.
    pub const LOUD: TargetLoudnessDist = TargetLoudnessDist::Normal {
        mu: -10.89,
        sigma: 1.19,
    };
    /// Loudness statistics of the heavily limited evaluation set.
    pub const EXTRA_LOUD: TargetLoudnessDist = TargetLoudnessDist::Normal {
        mu: -8.61,
        sigma: 1.17,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TargetLoudnessDist::Normal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
            TargetLoudnessDist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            TargetLoudnessDist::Fixed { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid target distribution {self}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TargetLoudnessDist::Normal { mu, sigma } => {
                Normal::new(mu, sigma).expect("validated").sample(rng)
            }
            TargetLoudnessDist::Uniform { lo, hi } => rng.random_range(lo..hi),
            TargetLoudnessDist::Fixed { value } => value,
        }
    }
}

impl fmt::Display for TargetLoudnessDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetLoudnessDist::Normal { mu, sigma } => write!(f, "normal:{mu},{sigma}"),
            TargetLoudnessDist::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            TargetLoudnessDist::Fixed { value } => write!(f, "fixed:{value}"),
        }
    }
}

impl FromStr for TargetLoudnessDist {
    type Err = Error;

    /// `normal:MU,SIGMA`, `uniform:LO,HI` or `fixed:V`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Argument(format!("bad target distribution {s:?}"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let dist = match (kind, nums.as_slice()) {
            ("normal", &[mu, sigma]) => TargetLoudnessDist::Normal { mu, sigma },
            ("uniform", &[lo, hi]) => TargetLoudnessDist::Uniform { lo, hi },
            ("fixed", &[value]) => TargetLoudnessDist::Fixed { value },
            _ => return Err(bad()),
        };
        dist.validate()?;
        Ok(dist)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Examples pass through unchanged.
    #[serde(rename = "baseline")]
    Baseline,
    /// Linear gain towards a drawn loudness, no limiter.
    #[serde(rename = "linear-gain")]
    LinearGain,
    /// Gain towards a drawn loudness, then the limiter.
    #[serde(rename = "limitaug")]
    LimitAug,
    /// Linear normalization to the reference loudness.
    #[serde(rename = "loudnorm")]
    LoudNorm,
    /// LimitAug followed by normalization to the reference loudness.
    #[serde(rename = "limitaug-loudnorm")]
    LimitAugLoudNorm,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Baseline,
        Strategy::LinearGain,
        Strategy::LimitAug,
        Strategy::LoudNorm,
        Strategy::LimitAugLoudNorm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::LinearGain => "linear-gain",
            Strategy::LimitAug => "limitaug",
            Strategy::LoudNorm => "loudnorm",
            Strategy::LimitAugLoudNorm => "limitaug-loudnorm",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Strategy::Baseline),
            "linear-gain" | "linear_gain" => Ok(Strategy::LinearGain),
            "limitaug" => Ok(Strategy::LimitAug),
            "loudnorm" => Ok(Strategy::LoudNorm),
            "limitaug-loudnorm" | "limitaug_loudnorm" => Ok(Strategy::LimitAugLoudNorm),
            other => Err(Error::Argument(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitAugConfig {
    pub target_dist: TargetLoudnessDist,
    /// Release is drawn uniformly from this range, milliseconds.
    pub release_range: (f64, f64),
    /// Limiter ceiling, dBFS.
    pub threshold: f64,
    /// Attack and lookahead of the online limiter, milliseconds.
    pub attack: f64,
    pub post_norm_target: Option<f64>,
    pub strategy: Strategy,
}

impl Default for LimitAugConfig {
    fn default() -> Self {
        LimitAugConfig {
            target_dist: TargetLoudnessDist::EXTRA_LOUD,
            release_range: (30.0, 200.0),
            threshold: 0.0,
            attack: 1.0,
            post_norm_target: None,
            strategy: Strategy::LimitAug,
        }
    }
}

impl LimitAugConfig {
    pub fn validate(&self) -> Result<()> {
        self.target_dist.validate()?;
        let (lo, hi) = self.release_range;
        if !(lo > 0.0 && lo <= hi && hi < 10_000.0) {
            return Err(Error::Config(format!("release range ({lo}, {hi}) outside (0, 10000) ms")));
        }
        if !(self.threshold <= 0.0) {
            return Err(Error::Config("threshold must be at most 0 dBFS".into()));
        }
        if let Some(t) = self.post_norm_target {
            if !t.is_finite() {
                return Err(Error::Config("post-normalization target must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Output of one augmentation step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub mixture: AudioClip,
    pub target: AudioClip,
    /// Per-frame factor mapping the input mixture (and every stem) to the output.
    pub multiplier: Vec<f64>,
    /// Loudness of the input mixture, when it was measured.
    pub input_lufs: Option<f64>,
    pub drawn_target_lufs: Option<f64>,
    /// Linear gain step before limiting, dB.
    pub gain_db: f64,
    pub release_ms: Option<f64>,
    pub post_gain_db: Option<f64>,
    /// Loudness of the returned mixture (`None` for silent baseline examples).
    pub achieved_lufs: Option<f64>,
}

fn scaled_example(stems: &StemSet, target_stem: StemName, input_lufs: f64, gain_db: f64) -> Result<TrainingExample> {
    let k = db_to_gain(gain_db);
    let mixture = stems.mixture.scaled(k);
    let achieved = lufs(&mixture)?;
    Ok(TrainingExample {
        target: stems.stem(target_stem).scaled(k),
        multiplier: vec![k; stems.n_frames()],
        mixture,
        input_lufs: Some(input_lufs),
        drawn_target_lufs: None,
        gain_db,
        release_ms: None,
        post_gain_db: None,
        achieved_lufs: Some(achieved),
    })
}

/// LimitAug on one stem set.
///
/// Measures the mixture, draws a target loudness and a release time, applies
/// the gain, limits at the configured ceiling and propagates the total
/// per-frame multiplier onto the target stem. If `post_norm_target` is set,
/// one more linear gain brings the limited mixture to that loudness.
pub fn limitaug<R: Rng + ?Sized>(
    stems: &StemSet,
    target_stem: StemName,
    config: &LimitAugConfig,
    rng: &mut R,
) -> Result<TrainingExample> {
    config.validate()?;
    let input_lufs = lufs(&stems.mixture)?;
    let drawn = config.target_dist.sample(rng);
    let (rlo, rhi) = config.release_range;
    let release = if rlo < rhi { rng.random_range(rlo..rhi) } else { rlo };
    let gain_db = drawn - input_lufs;
    let k = db_to_gain(gain_db);

    let params = LimiterParams {
        threshold: config.threshold,
        attack: config.attack,
        release,
        lookahead: config.attack,
        stereo_link: true,
    };
    let (mut mixture, trace) = limit(&stems.mixture.scaled(k), &params)?;
    let mut multiplier: Vec<f64> = trace.gain.iter().map(|g| k * g).collect();

    let mut post_gain_db = None;
    if let Some(post) = config.post_norm_target {
        let p_db = post - lufs(&mixture)?;
        let p = db_to_gain(p_db);
        mixture = mixture.scaled(p);
        multiplier.iter_mut().for_each(|m| *m *= p);
        post_gain_db = Some(p_db);
    }
    let achieved = lufs(&mixture)?;
    Ok(TrainingExample {
        target: stems.stem(target_stem).multiplied_by_frames(&multiplier),
        mixture,
        multiplier,
        input_lufs: Some(input_lufs),
        drawn_target_lufs: Some(drawn),
        gain_db,
        release_ms: Some(release),
        post_gain_db,
        achieved_lufs: Some(achieved),
    })
}

pub fn build_training_example<R: Rng + ?Sized>(
    stems: &StemSet,
    target_stem: StemName,
    config: &LimitAugConfig,
    rng: &mut R,
) -> Result<TrainingExample> {
    config.validate()?;
    let reference = config.post_norm_target.unwrap_or(REFERENCE_LUFS);
    match config.strategy {
        Strategy::Baseline => Ok(TrainingExample {
            mixture: stems.mixture.clone(),
            target: stems.stem(target_stem).clone(),
            multiplier: vec![1.0; stems.n_frames()],
            input_lufs: None,
            drawn_target_lufs: None,
            gain_db: 0.0,
            release_ms: None,
            post_gain_db: None,
            achieved_lufs: lufs(&stems.mixture).ok(),
        }),
        Strategy::LinearGain => {
            let input = lufs(&stems.mixture)?;
            let drawn = config.target_dist.sample(rng);
            let mut ex = scaled_example(stems, target_stem, input, drawn - input)?;
            ex.drawn_target_lufs = Some(drawn);
            Ok(ex)
        }
        Strategy::LoudNorm => {
            let input = lufs(&stems.mixture)?;
            scaled_example(stems, target_stem, input, reference - input)
        }
        Strategy::LimitAug => {
            let cfg = LimitAugConfig {
                post_norm_target: None,
                ..config.clone()
            };
            limitaug(stems, target_stem, &cfg, rng)
        }
        Strategy::LimitAugLoudNorm => {
            let cfg = LimitAugConfig {
                post_norm_target: Some(reference),
                ..config.clone()
            };
            limitaug(stems, target_stem, &cfg, rng)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentOptions {
    /// Per-stem random gain range, dB.
    pub gain_range_db: (f64, f64),
    pub swap_probability: f64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions {
            gain_range_db: (-6.0, 6.0),
            swap_probability: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StemSource {
    pub track_id: String,
    /// Seconds.
    pub offset: f64,
    pub offset_frames: usize,
    pub gain_db: f64,
    pub channel_swap: bool,
}

/// Every random choice behind one mixed segment, sufficient for exact replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    /// Seconds.
    pub duration: f64,
    pub n_frames: usize,
    pub sources: BTreeMap<StemName, StemSource>,
    pub rng_seed: u64,
}

/// Loaded stem sets that segments are drawn from.
#[derive(Debug, Clone)]
pub struct StemLibrary {
    tracks: Vec<(String, StemSet)>,
}

impl StemLibrary {
    pub fn new(tracks: Vec<(String, StemSet)>) -> Result<Self> {
        let Some((_, first)) = tracks.first() else {
            return Err(Error::Argument("empty stem library".into()));
        };
        let (fs, ch) = (first.sample_rate(), first.mixture.n_channels());
        if let Some((id, _)) = tracks
            .iter()
            .find(|(_, s)| s.sample_rate() != fs || s.mixture.n_channels() != ch)
        {
            return Err(Error::Consistency(format!(
                "track {id} differs in sample rate or channel count from the library"
            )));
        }
        Ok(StemLibrary { tracks })
    }

    pub fn load(manifests: &[TrackManifest]) -> Result<Self> {
        let tracks = manifests
            .iter()
            .map(|m| Ok((m.track_id.clone(), load_stem_set(m)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tracks)
    }

    pub fn sample_rate(&self) -> u32 {
        self.tracks[0].1.sample_rate()
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    fn get(&self, track_id: &str) -> Result<&StemSet> {
        self.tracks
            .iter()
            .find(|(id, _)| id == track_id)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Argument(format!("unknown track {track_id}")))
    }
}

/// Draw a random segment: each stem from an independently chosen track,
/// offset, gain and channel swap. The mixture is the sum of the stems.
pub fn sample_segment(
    library: &StemLibrary,
    seed: u64,
    duration: f64,
    options: &SegmentOptions,
) -> Result<(StemSet, SegmentSpec)> {
    let fs = library.sample_rate() as f64;
    let n_frames = (duration * fs).round() as usize;
    if n_frames == 0 {
        return Err(Error::Argument("segment duration must be positive".into()));
    }
    let (glo, ghi) = options.gain_range_db;
    if !(glo <= ghi) || !(0.0..=1.0).contains(&options.swap_probability) {
        return Err(Error::Config("invalid segment options".into()));
    }

    let eligible: Vec<&(String, StemSet)> = library
        .tracks
        .iter()
        .filter(|(id, s)| {
            let ok = s.n_frames() >= n_frames;
            if !ok {
                log::debug!("skipping {id}: shorter than {duration} s");
            }
            ok
        })
        .collect();
    if eligible.is_empty() {
        return Err(Error::Sampling(format!("no track is at least {duration} s long")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = BTreeMap::new();
    for name in StemName::ALL {
        let (id, set) = eligible[rng.random_range(0..eligible.len())];
        let offset_frames = rng.random_range(0..=set.n_frames() - n_frames);
        let gain_db = rng.random_range(glo..=ghi);
        let channel_swap = rng.random_bool(options.swap_probability);
        sources.insert(
            name,
            StemSource {
                track_id: id.clone(),
                offset: offset_frames as f64 / fs,
                offset_frames,
                gain_db,
                channel_swap,
            },
        );
    }
    let spec = SegmentSpec {
        duration,
        n_frames,
        sources,
        rng_seed: seed,
    };
    Ok((render_segment(library, &spec)?, spec))
}

/// Rebuild the stem set a [`SegmentSpec`] describes.
pub fn render_segment(library: &StemLibrary, spec: &SegmentSpec) -> Result<StemSet> {
    let mut stems = BTreeMap::new();
    for name in StemName::ALL {
        let src = spec
            .sources
            .get(&name)
            .ok_or_else(|| Error::Consistency(format!("segment spec lacks stem {name}")))?;
        let set = library.get(&src.track_id)?;
        let mut clip = set.stem(name).slice(src.offset_frames, spec.n_frames)?;
        if src.gain_db != 0.0 {
            clip = clip.scaled(db_to_gain(src.gain_db));
        }
        if src.channel_swap {
            clip.swap_channels();
        }
        stems.insert(name, clip);
    }
    StemSet::from_stems(stems)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSettings {
    pub target_stem: StemName,
    /// Seconds.
    pub duration: f64,
    pub count: usize,
    pub seed: u64,
    pub segment: SegmentOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedExample {
    pub index: usize,
    pub attempts: usize,
    pub spec: SegmentSpec,
    pub example: TrainingExample,
}

/// JSONL sidecar line describing one written example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub index: usize,
    pub mixture_file: String,
    pub target_file: String,
    pub target_stem: StemName,
    pub strategy: Strategy,
    pub segment: SegmentSpec,
    pub attempts: usize,
    pub input_lufs: Option<f64>,
    pub drawn_target_lufs: Option<f64>,
    pub gain_db: f64,
    pub release_ms: Option<f64>,
    pub post_gain_db: Option<f64>,
    pub achieved_lufs: Option<f64>,
}

/// Generate example `index`. Its randomness derives only from
/// `seed + index`, so results do not depend on scheduling.
pub fn generate_example(
    library: &StemLibrary,
    config: &LimitAugConfig,
    settings: &BatchSettings,
    index: usize,
) -> Result<GeneratedExample> {
    let mut master = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(index as u64));
    for attempt in 1..=MAX_ATTEMPTS {
        let seed = master.next_u64();
        let (stems, spec) = sample_segment(library, seed, settings.duration, &settings.segment)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        match build_training_example(&stems, settings.target_stem, config, &mut rng) {
            Ok(example) => {
                return Ok(GeneratedExample {
                    index,
                    attempts: attempt,
                    spec,
                    example,
                })
            }
            Err(Error::Silence) => log::debug!("example {index}: silent draw, resampling"),
            Err(e) => return Err(e),
        }
    }
    Err(Error::Sampling(format!(
        "example {index}: {MAX_ATTEMPTS} consecutive silent segments"
    )))
}

pub fn generate_examples(
    library: &StemLibrary,
    config: &LimitAugConfig,
    settings: &BatchSettings,
    indices: std::ops::Range<usize>,
) -> Result<Vec<GeneratedExample>> {
    config.validate()?;
    indices
        .into_par_iter()
        .map(|i| generate_example(library, config, settings, i))
        .collect()
}

/// Generate `settings.count` examples into `out_dir` as WAV pairs plus an
/// `examples.jsonl` sidecar. Works in chunks to bound memory.
pub fn write_examples(
    library: &StemLibrary,
    config: &LimitAugConfig,
    settings: &BatchSettings,
    out_dir: &Path,
    format: SampleFormat,
) -> Result<Vec<ExampleRecord>> {
    const CHUNK: usize = 64;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let sidecar = out_dir.join("examples.jsonl");
    let file = File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let mut jsonl = BufWriter::new(file);
    let mut records = Vec::with_capacity(settings.count);

    let mut start = 0;
    while start < settings.count {
        let end = (start + CHUNK).min(settings.count);
        for g in generate_examples(library, config, settings, start..end)? {
            let mixture_file = format!("{:06}_mixture.wav", g.index);
            let target_file = format!("{:06}_{}.wav", g.index, settings.target_stem);
            write_wav(&g.example.mixture, out_dir.join(&mixture_file), format)?;
            write_wav(&g.example.target, out_dir.join(&target_file), format)?;
            let ex = g.example;
            let record = ExampleRecord {
                index: g.index,
                mixture_file,
                target_file,
                target_stem: settings.target_stem,
                strategy: config.strategy,
                segment: g.spec,
                attempts: g.attempts,
                input_lufs: ex.input_lufs,
                drawn_target_lufs: ex.drawn_target_lufs,
                gain_db: ex.gain_db,
                release_ms: ex.release_ms,
                post_gain_db: ex.post_gain_db,
                achieved_lufs: ex.achieved_lufs,
            };
            serde_json::to_writer(&mut jsonl, &record)?;
            jsonl.write_all(b"\n").map_err(|e| Error::io(&sidecar, e))?;
            records.push(record);
        }
        start = end;
    }
    jsonl.flush().map_err(|e| Error::io(&sidecar, e))?;
    Ok(records)
}
