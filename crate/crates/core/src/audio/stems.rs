use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{read_wav, write_wav, AudioClip, SampleFormat};
use crate::error::{Error, Result};

/// Maximum `|mixture - sum(stems)|` for a stem set to count as additive.
pub const ADDITIVITY_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StemName {
    Vocals,
    Bass,
    Drums,
    Other,
}

impl StemName {
    pub const ALL: [StemName; 4] = [
        StemName::Vocals,
        StemName::Bass,
        StemName::Drums,
        StemName::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StemName::Vocals => "vocals",
            StemName::Bass => "bass",
            StemName::Drums => "drums",
            StemName::Other => "other",
        }
    }
}

impl fmt::Display for StemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StemName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown stem {s:?}")))
    }
}

/// A mixture together with its four constituent stems.
#[derive(Debug, Clone, PartialEq)]
pub struct StemSet {
    pub mixture: AudioClip,
    pub stems: BTreeMap<StemName, AudioClip>,
    /// `true` when the mixture equals the stem sum within [`ADDITIVITY_TOLERANCE`].
    pub additive: bool,
}

impl StemSet {
    /// Build a set whose mixture is the sample-wise sum of `stems`.
    pub fn from_stems(stems: BTreeMap<StemName, AudioClip>) -> Result<Self> {
        let mixture = sum_clips(stems.values())?;
        Self::new(mixture, stems)
    }

    /// Build a set from an explicit mixture; `additive` is measured.
    pub fn new(mixture: AudioClip, stems: BTreeMap<StemName, AudioClip>) -> Result<Self> {
        for name in StemName::ALL {
            let stem = stems
                .get(&name)
                .ok_or_else(|| Error::Consistency(format!("missing stem {name}")))?;
            mixture.ensure_same_shape(stem, &format!("mixture vs {name}"))?;
        }
        let mut set = StemSet {
            mixture,
            stems,
            additive: false,
        };
        set.additive = set.additivity_error()? <= ADDITIVITY_TOLERANCE;
        Ok(set)
    }

    pub fn stem(&self, name: StemName) -> &AudioClip {
        &self.stems[&name]
    }

    pub fn stem_sum(&self) -> Result<AudioClip> {
        sum_clips(self.stems.values())
    }

    /// `max |mixture - sum(stems)|`.
    pub fn additivity_error(&self) -> Result<f64> {
        self.mixture.max_abs_diff(&self.stem_sum()?)
    }

    pub fn sample_rate(&self) -> u32 {
        self.mixture.sample_rate()
    }

    pub fn n_frames(&self) -> usize {
        self.mixture.n_frames()
    }

    /// Apply the same per-frame multiplier to the mixture and every stem.
    pub fn multiplied_by_frames(&self, gains: &[f64]) -> Result<StemSet> {
        if gains.len() != self.n_frames() {
            return Err(Error::Consistency(format!(
                "gain trace has {} frames, stem set has {}",
                gains.len(),
                self.n_frames()
            )));
        }
        let stems = self
            .stems
            .iter()
            .map(|(&k, v)| (k, v.multiplied_by_frames(gains)))
            .collect();
        StemSet::new(self.mixture.multiplied_by_frames(gains), stems)
    }

    /// Write `mixture.wav` and one file per stem into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>, format: SampleFormat) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_wav(&self.mixture, dir.join("mixture.wav"), format)?;
        for (name, clip) in &self.stems {
            write_wav(clip, dir.join(format!("{name}.wav")), format)?;
        }
        Ok(())
    }
}

fn sum_clips<'a>(mut clips: impl Iterator<Item = &'a AudioClip>) -> Result<AudioClip> {
    let mut acc = clips
        .next()
        .ok_or_else(|| Error::Argument("no clips to sum".into()))?
        .clone();
    for clip in clips {
        acc.add_assign(clip)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixturePolicy {
    UseFile,
    UseStemSum,
}

/// Where to find one track's audio and how to obtain its mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawManifest")]
pub struct TrackManifest {
    pub track_id: String,
    pub paths: BTreeMap<StemName, PathBuf>,
    pub mixture_path: Option<PathBuf>,
    pub mixture_policy: MixturePolicy,
}

#[derive(Deserialize)]
struct RawManifest {
    track_id: String,
    paths: BTreeMap<StemName, PathBuf>,
    #[serde(default)]
    mixture_path: Option<PathBuf>,
    #[serde(default)]
    mixture_policy: Option<MixturePolicy>,
}

impl TryFrom<RawManifest> for TrackManifest {
    type Error = String;

    fn try_from(raw: RawManifest) -> std::result::Result<Self, String> {
        let policy = match (raw.mixture_policy, &raw.mixture_path) {
            (Some(MixturePolicy::UseFile), None) => {
                return Err("mixture_policy use_file requires mixture_path".into())
            }
            (Some(p), _) => p,
            (None, Some(_)) => MixturePolicy::UseFile,
            (None, None) => MixturePolicy::UseStemSum,
        };
        let manifest = TrackManifest {
            track_id: raw.track_id,
            paths: raw.paths,
            mixture_path: raw.mixture_path,
            mixture_policy: policy,
        };
        manifest.validate().map_err(|e| e.to_string())?;
        Ok(manifest)
    }
}

impl TrackManifest {
    /// Manifest for the conventional `<dir>/{mixture,vocals,bass,drums,other}.wav` layout.
    /// The mixture file is used when present.
    pub fn from_layout(track_id: impl Into<String>, dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let paths = StemName::ALL
            .into_iter()
            .map(|n| (n, dir.join(format!("{n}.wav"))))
            .collect();
        let mixture = dir.join("mixture.wav");
        let (mixture_path, mixture_policy) = if mixture.is_file() {
            (Some(mixture), MixturePolicy::UseFile)
        } else {
            (None, MixturePolicy::UseStemSum)
        };
        TrackManifest {
            track_id: track_id.into(),
            paths,
            mixture_path,
            mixture_policy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.track_id.is_empty() {
            return Err(Error::Config("empty track_id".into()));
        }
        if let Some(missing) = StemName::ALL.iter().find(|n| !self.paths.contains_key(n)) {
            return Err(Error::Config(format!(
                "track {}: no path for stem {missing}",
                self.track_id
            )));
        }
        if self.mixture_policy == MixturePolicy::UseFile && self.mixture_path.is_none() {
            return Err(Error::Config(format!(
                "track {}: use_file without mixture_path",
                self.track_id
            )));
        }
        Ok(())
    }

    /// Parse a manifest JSON file; relative paths resolve against its directory.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: TrackManifest = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in manifest.paths.values_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = manifest.mixture_path.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(manifest)
    }

    /// Discover tracks in a library directory: one subdirectory per track,
    /// described by `manifest.json` if present, else by the conventional layout.
    /// Subdirectories are visited in name order.
    pub fn discover(dir: impl AsRef<Path>) -> Result<Vec<TrackManifest>> {
        let dir = dir.as_ref();
        let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        subdirs.sort();
        subdirs
            .into_iter()
            .map(|sub| {
                let manifest = sub.join("manifest.json");
                if manifest.is_file() {
                    TrackManifest::from_json_file(manifest)
                } else {
                    let id = sub
                        .file_name()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    Ok(TrackManifest::from_layout(id, &sub))
                }
            })
            .collect()
    }
}

pub fn load_stem_set(manifest: &TrackManifest) -> Result<StemSet> {
    manifest.validate()?;
    let mut stems = BTreeMap::new();
    for (&name, path) in &manifest.paths {
        stems.insert(name, read_wav(path)?);
    }

    let reference = &stems[&StemName::Vocals];
    let inconsistent = stems.values().any(|c| !c.same_shape(reference));
    let mixture = match manifest.mixture_policy {
        MixturePolicy::UseFile => {
            let path = manifest.mixture_path.as_ref().expect("validated");
            Some(read_wav(path)?)
        }
        MixturePolicy::UseStemSum => None,
    };
    if inconsistent || mixture.as_ref().is_some_and(|m| !m.same_shape(reference)) {
        let mut report: Vec<String> = stems
            .iter()
            .map(|(n, c)| describe(n.as_str(), c))
            .collect();
        if let Some(m) = &mixture {
            report.push(describe("mixture", m));
        }
        return Err(Error::Consistency(format!(
            "track {}: files disagree in rate/channels/length: {}",
            manifest.track_id,
            report.join(", ")
        )));
    }

    match mixture {
        Some(m) => StemSet::new(m, stems),
        None => StemSet::from_stems(stems),
    }
}

fn describe(name: &str, c: &AudioClip) -> String {
    format!(
        "{name}={} frames/{}ch/{} Hz",
        c.n_frames(),
        c.n_channels(),
        c.sample_rate()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stems_of(len: usize) -> BTreeMap<StemName, AudioClip> {
        StemName::ALL
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                let ch: Vec<f64> = (0..len).map(|k| ((k + i) as f64 * 0.01).sin() * 0.2).collect();
                (n, AudioClip::new(vec![ch.clone(), ch], 44100).unwrap())
            })
            .collect()
    }

    #[test]
    fn stem_sum_mixture_is_additive() {
        let set = StemSet::from_stems(stems_of(1000)).unwrap();
        assert!(set.additive);
        assert_eq!(set.additivity_error().unwrap(), 0.0);
    }

    #[test]
    fn panned_mixture_is_not_additive() {
        let stems = stems_of(1000);
        let sum = StemSet::from_stems(stems.clone()).unwrap().mixture;
        let mut chans = sum.into_channels();
        for (l, r) in chans[0].clone().iter().zip(chans[1].iter_mut()) {
            *r += *l;
        }
        chans[0].iter_mut().for_each(|s| *s = 0.0);
        let panned = AudioClip::new(chans, 44100).unwrap();
        let set = StemSet::new(panned, stems).unwrap();
        assert!(!set.additive);
    }

    #[test]
    fn manifest_policy_defaults() {
        let json = r#"{"track_id":"a","paths":{"vocals":"v.wav","bass":"b.wav","drums":"d.wav","other":"o.wav"}}"#;
        let m: TrackManifest = serde_json::from_str(json).unwrap();
        assert_eq!(m.mixture_policy, MixturePolicy::UseStemSum);

        let json = r#"{"track_id":"a","mixture_path":"m.wav","paths":{"vocals":"v.wav","bass":"b.wav","drums":"d.wav","other":"o.wav"}}"#;
        let m: TrackManifest = serde_json::from_str(json).unwrap();
        assert_eq!(m.mixture_policy, MixturePolicy::UseFile);

        let json = r#"{"track_id":"a","mixture_policy":"use_file","paths":{"vocals":"v.wav","bass":"b.wav","drums":"d.wav","other":"o.wav"}}"#;
        assert!(serde_json::from_str::<TrackManifest>(json).is_err());

        let json = r#"{"track_id":"a","paths":{"vocals":"v.wav","bass":"b.wav","drums":"d.wav"}}"#;
        assert!(serde_json::from_str::<TrackManifest>(json).is_err());
    }

    #[test]
    fn stem_names_parse() {
        for n in StemName::ALL {
            assert_eq!(n.as_str().parse::<StemName>().unwrap(), n);
        }
        assert!("guitar".parse::<StemName>().is_err());
    }
}
