//! Command-line front end.
//!
//! Exit codes: 0 success, 1 operational error, 2 usage error. A JSON config
//! file (`--config FILE`) supplies flag values by long name; flags given on
//! the command line override it.

mod wrap;

pub use wrap::{wrap_separate, WrapConfig, WrapOutcome};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::audio::{read_wav, write_wav, AudioClip, SampleFormat, StemName, TrackManifest};
use crate::augment::{write_examples, BatchSettings, LimitAugConfig, SegmentOptions, StemLibrary, Strategy, TargetLoudnessDist};
use crate::dataset::{build_dataset, verify_dataset, DatasetRecipe};
use crate::error::{Error, Result};
use crate::limiter::{limit, LimiterParams};
use crate::loudness::{loudness_stats, lufs};
use crate::metrics::{aggregate_tracks, evaluate_stems, EvalResult, ProjectionConfig, Summary};

pub const SUBCOMMANDS: [&str; 7] = [
    "measure",
    "limit",
    "build-dataset",
    "augment",
    "eval",
    "wrap-separate",
    "verify",
];

#[derive(Debug, Parser)]
#[command(name = "loudsep", version, about = "Loudness, limiting and separation-evaluation toolkit")]
struct Cli {
    /// JSON file of default flag values, keyed by long flag name.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for batch subcommands (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrated loudness per track plus collection statistics.
    Measure(MeasureArgs),
    /// Limit one file.
    Limit(LimitArgs),
    /// Build a loud evaluation set from a stem library.
    BuildDataset(BuildArgs),
    /// Generate augmented training examples.
    Augment(AugmentArgs),
    /// Score estimated stems against references.
    Eval(EvalArgs),
    /// Run an external separator on loudness-normalized input.
    WrapSeparate(WrapArgs),
    /// Check a built dataset against its source library.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct MeasureArgs {
    /// WAV file, directory of WAV files, or track library directory.
    #[arg(long = "in")]
    input: PathBuf,
    /// Collection statistics (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-track loudness (CSV: track_id,lufs); stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct LimitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// dBFS.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    threshold: f64,
    /// Milliseconds.
    #[arg(long, default_value_t = 100.0)]
    release: f64,
    /// Milliseconds.
    #[arg(long, default_value_t = 1.0)]
    attack: f64,
    /// Milliseconds (default: attack).
    #[arg(long)]
    lookahead: Option<f64>,
    /// Write the gain trace as a mono float32 WAV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[arg(long, default_value = "float32")]
    format: SampleFormat,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct BuildArgs {
    /// L, XL or custom.
    #[arg(long, default_value = "L")]
    recipe: String,
    /// Reduction band LO,HI in dB (overrides the recipe's).
    #[arg(long, value_parser = parse_pair)]
    reduction: Option<(f64, f64)>,
    #[arg(long, default_value_t = 100.0)]
    release_ms: f64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "float32")]
    format: SampleFormat,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct AugmentArgs {
    /// Track library directory.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "limitaug")]
    strategy: Strategy,
    #[arg(long, default_value = "normal:-8.61,1.17", allow_hyphen_values = true)]
    target_dist: TargetLoudnessDist,
    #[arg(long, default_value = "30,200", value_parser = parse_pair)]
    release_ms: (f64, f64),
    #[arg(long, allow_hyphen_values = true)]
    post_norm: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Seconds.
    #[arg(long, default_value_t = 6.0)]
    duration: f64,
    #[arg(long, default_value = "vocals")]
    target_stem: StemName,
    #[arg(long, default_value = "-6,6", value_parser = parse_pair, allow_hyphen_values = true)]
    gain_range: (f64, f64),
    #[arg(long, default_value_t = 0.5)]
    swap_prob: f64,
    #[arg(long, default_value = "float32")]
    format: SampleFormat,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long = "est")]
    estimate: PathBuf,
    #[arg(long, default_value_t = 512)]
    filter_len: usize,
    #[arg(long, default_value_t = 1.0)]
    window: f64,
    #[arg(long, default_value_t = 1.0)]
    hop: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary table (rows = stems, columns = median, mean).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct WrapArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Separator command with {input} and {output_dir} placeholders.
    #[arg(long)]
    command: String,
    #[arg(long, default_value_t = -14.0, allow_hyphen_values = true)]
    target_lufs: f64,
    /// Take the target loudness from this file instead.
    #[arg(long)]
    target_from: Option<PathBuf>,
    /// Leave separator outputs at the normalized scale.
    #[arg(long)]
    no_restore: bool,
    /// Comma-separated stem names the separator must produce.
    #[arg(long, value_delimiter = ',')]
    stems: Vec<String>,
    #[arg(long, default_value = "float64")]
    temp_format: SampleFormat,
    #[arg(long, default_value = "float32")]
    format: SampleFormat,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct VerifyArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    limited: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

/// Run the CLI on `argv` (including the program name) and return the exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Splice `--config` values in right after the subcommand name so that
/// explicit flags, which come later, override them.
fn merge_config(argv: Vec<String>) -> Result<Vec<String>> {
    let mut config_path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            config_path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let Some(pos) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let values: BTreeMap<String, serde_json::Value> = serde_json::from_str(&text)?;

    let mut injected = Vec::new();
    for (key, value) in values {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            serde_json::Value::Bool(true) => injected.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => injected.extend([flag, s]),
            serde_json::Value::Number(n) => injected.extend([flag, n.to_string()]),
            serde_json::Value::Array(items) => {
                let joined: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                injected.extend([flag, joined.join(",")]);
            }
            serde_json::Value::Object(_) => {
                return Err(Error::Config(format!("config key {key:?} has an object value")))
            }
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Measure(a) => measure(a),
        Command::Limit(a) => limit_file(a),
        Command::BuildDataset(a) => build(a),
        Command::Augment(a) => augment(a),
        Command::Eval(a) => eval(a),
        Command::WrapSeparate(a) => wrap(a),
        Command::Verify(a) => verify(a),
    }
}

/// `(track_id, mixture)` loaders for every input `measure` accepts.
fn measurement_inputs(input: &Path) -> Result<Vec<(String, Box<dyn Fn() -> Result<AudioClip> + Send + Sync>)>> {
    let id_of = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if input.is_file() {
        let p = input.to_path_buf();
        return Ok(vec![(id_of(input), Box::new(move || read_wav(&p)))]);
    }
    let mut wavs: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| Error::io(input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    wavs.sort();
    if !wavs.is_empty() {
        return Ok(wavs
            .into_iter()
            .map(|p| {
                let id = id_of(&p);
                (id, Box::new(move || read_wav(&p)) as Box<dyn Fn() -> Result<AudioClip> + Send + Sync>)
            })
            .collect());
    }
    Ok(TrackManifest::discover(input)?
        .into_iter()
        .map(|m| {
            let id = m.track_id.clone();
            (
                id,
                Box::new(move || crate::audio::load_stem_set(&m).map(|s| s.mixture))
                    as Box<dyn Fn() -> Result<AudioClip> + Send + Sync>,
            )
        })
        .collect())
}

fn measure(a: MeasureArgs) -> Result<()> {
    use rayon::prelude::*;
    let inputs = measurement_inputs(&a.input)?;
    let readings: Vec<(String, Result<f64>)> = inputs
        .par_iter()
        .map(|(id, load)| (id.clone(), load().and_then(|clip| lufs(&clip))))
        .collect();
    let mut csv = String::from("track_id,lufs\n");
    let mut values = Vec::new();
    for (id, r) in readings {
        match r {
            Ok(l) => {
                csv.push_str(&format!("{id},{l:.4}\n"));
                values.push(l);
            }
            Err(e) => log::warn!("skipping {id}: {e}"),
        }
    }
    let stats = loudness_stats(&values)?;
    write_text(&csv, a.csv.as_deref())?;
    if let Some(out) = &a.out {
        write_json(&stats, out)?;
    }
    log::info!(
        "{} tracks: mean {:.2} LUFS (std {:.2})",
        stats.n_tracks,
        stats.mean,
        stats.std
    );
    Ok(())
}

fn limit_file(a: LimitArgs) -> Result<()> {
    let clip = read_wav(&a.input)?;
    let params = LimiterParams {
        threshold: a.threshold,
        attack: a.attack,
        release: a.release,
        lookahead: a.lookahead.unwrap_or(a.attack),
        stereo_link: true,
    };
    let (out, trace) = limit(&clip, &params)?;
    write_wav(&out, &a.out, a.format)?;
    if let Some(path) = &a.trace_out {
        write_wav(&trace.to_clip(clip.sample_rate())?, path, SampleFormat::Float32)?;
    }
    log::info!("max gain reduction {:.2} dB", trace.max_reduction_db());
    Ok(())
}

fn build(a: BuildArgs) -> Result<()> {
    let mut recipe = match a.recipe.as_str() {
        "L" | "l" => DatasetRecipe::loud(),
        "XL" | "xl" => DatasetRecipe::extra_loud(),
        "custom" => {
            let range = a
                .reduction
                .ok_or_else(|| Error::Argument("custom recipe needs --reduction LO,HI".into()))?;
            DatasetRecipe::custom("custom", range, a.release_ms)
        }
        other => return Err(Error::Argument(format!("unknown recipe {other:?}"))),
    };
    if let Some(range) = a.reduction {
        recipe.reduction_range = range;
    }
    recipe.limiter_template.release = a.release_ms;

    let library = TrackManifest::discover(&a.input)?;
    let report = build_dataset(&library, &recipe, &a.out, a.format)?;
    if let Some(path) = &a.report {
        write_json(&report, path)?;
    }
    log::info!(
        "built {} tracks, {} failed",
        report.rows.len(),
        report.failures.len()
    );
    if report.rows.is_empty() {
        return Err(Error::Search("no track could be built".into()));
    }
    Ok(())
}

fn augment(a: AugmentArgs) -> Result<()> {
    let library = StemLibrary::load(&TrackManifest::discover(&a.input)?)?;
    let config = LimitAugConfig {
        target_dist: a.target_dist,
        release_range: a.release_ms,
        threshold: a.threshold,
        post_norm_target: a.post_norm,
        strategy: a.strategy,
        ..LimitAugConfig::default()
    };
    let settings = BatchSettings {
        target_stem: a.target_stem,
        duration: a.duration,
        count: a.count,
        seed: a.seed,
        segment: SegmentOptions {
            gain_range_db: a.gain_range,
            swap_probability: a.swap_prob,
        },
    };
    let records = write_examples(&library, &config, &settings, &a.out, a.format)?;
    log::info!("wrote {} examples to {}", records.len(), a.out.display());
    Ok(())
}

/// Stem files present in `dir`; absent stems are left out.
fn read_stem_dir(dir: &Path) -> Result<BTreeMap<StemName, AudioClip>> {
    let mut stems = BTreeMap::new();
    for name in StemName::ALL {
        let path = dir.join(format!("{name}.wav"));
        if path.is_file() {
            stems.insert(name, read_wav(&path)?);
        }
    }
    Ok(stems)
}

#[derive(Debug, Serialize)]
struct EvalReport {
    config: ProjectionConfig,
    tracks: Vec<EvalResult>,
    summary: Summary,
}

fn track_dirs(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    Ok(fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .filter_map(|p| Some((p.file_name()?.to_string_lossy().into_owned(), p)))
        .collect())
}

fn eval(a: EvalArgs) -> Result<()> {
    use rayon::prelude::*;
    let config = ProjectionConfig {
        filter_len: a.filter_len,
        window: a.window,
        hop: a.hop,
    };
    let refs = track_dirs(&a.reference)?;
    let ests = track_dirs(&a.estimate)?;
    if refs.keys().ne(ests.keys()) {
        let only_ref: Vec<&String> = refs.keys().filter(|k| !ests.contains_key(*k)).collect();
        let only_est: Vec<&String> = ests.keys().filter(|k| !refs.contains_key(*k)).collect();
        return Err(Error::Consistency(format!(
            "track directories differ; only in reference: {only_ref:?}; only in estimate: {only_est:?}"
        )));
    }
    let tracks = refs
        .par_iter()
        .map(|(id, rdir)| {
            let reference = read_stem_dir(rdir)?;
            let estimate = read_stem_dir(&ests[id])?;
            evaluate_stems(id, &reference, &estimate, &config)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = aggregate_tracks(&tracks)?;
    if let Some(path) = &a.csv {
        write_text(&summary.to_csv(), Some(path))?;
    } else if a.out.is_none() {
        print!("{}", summary.to_csv());
    }
    if let Some(path) = &a.out {
        write_json(
            &EvalReport {
                config,
                tracks,
                summary,
            },
            path,
        )?;
    }
    Ok(())
}

fn wrap(a: WrapArgs) -> Result<()> {
    let target_lufs = match &a.target_from {
        Some(path) => lufs(&read_wav(path)?)?,
        None => a.target_lufs,
    };
    let config = WrapConfig {
        target_lufs,
        command_template: a.command,
        restore_gain: !a.no_restore,
        expected_stems: a.stems,
        temp_format: a.temp_format,
        output_format: a.format,
    };
    let outcome = wrap_separate(&a.input, &a.out, &config)?;
    log::info!(
        "gain {:+.2} dB, {} stems written",
        outcome.gain_db,
        outcome.stems.len()
    );
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<()> {
    let report = verify_dataset(&a.original, &a.limited)?;
    if let Some(path) = &a.out {
        write_json(&report, path)?;
    }
    for t in report.tracks.iter().filter(|t| !t.passed()) {
        eprintln!("{}: {}", t.track_id, t.problems.join("; "));
    }
    if report.all_passed {
        Ok(())
    } else {
        Err(Error::Consistency("dataset verification failed".into()))
    }
}
