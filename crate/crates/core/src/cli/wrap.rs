//! Loudness-normalized inference around an external separator.
//!
//! The input is brought to a reference loudness, handed to the separator as
//! a temporary WAV file, and every stem the separator writes is scaled back
//! by the same amount.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, write_wav, SampleFormat};
use crate::error::{Error, Result};
use crate::loudness::{apply_gain_db, gain_db_to_target};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrapConfig {
    pub target_lufs: f64,
    /// Shell command with `{input}` and `{output_dir}` placeholders.
    pub command_template: String,
    pub restore_gain: bool,
    /// Stem names (file stems) the separator must produce; empty accepts any.
    pub expected_stems: Vec<String>,
    /// Encoding of the normalized file handed to the separator.
    pub temp_format: SampleFormat,
    pub output_format: SampleFormat,
}

impl WrapConfig {
    pub fn new(command_template: impl Into<String>) -> Self {
        WrapConfig {
            target_lufs: -14.0,
            command_template: command_template.into(),
            restore_gain: true,
            expected_stems: Vec::new(),
            temp_format: SampleFormat::Float64,
            output_format: SampleFormat::Float32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for placeholder in ["{input}", "{output_dir}"] {
            if !self.command_template.contains(placeholder) {
                return Err(Error::Config(format!(
                    "command template lacks the {placeholder} placeholder"
                )));
            }
        }
        if !self.target_lufs.is_finite() {
            return Err(Error::Config("target loudness must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrapOutcome {
    /// Gain applied before separation, dB.
    pub gain_db: f64,
    /// Written stem files, relative to the output directory.
    pub stems: Vec<PathBuf>,
    pub separator_seconds: f64,
}

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.to_string_lossy().replace('\'', r"'\''"))
}

fn collect_wavs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_wavs(&path, out)?;
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        {
            out.push(path);
        }
    }
    Ok(())
}

pub fn wrap_separate(input: &Path, out_dir: &Path, config: &WrapConfig) -> Result<WrapOutcome> {
    config.validate()?;
    let clip = read_wav(input)?;
    let gain_db = gain_db_to_target(&clip, config.target_lufs)?;

    let scratch = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let normalized = scratch.path().join("input.wav");
    let separated = scratch.path().join("separated");
    fs::create_dir_all(&separated).map_err(|e| Error::io(&separated, e))?;
    write_wav(&apply_gain_db(&clip, gain_db), &normalized, config.temp_format)?;

    let command = config
        .command_template
        .replace("{input}", &shell_quote(&normalized))
        .replace("{output_dir}", &shell_quote(&separated));
    log::info!("running separator: {command}");
    let started = Instant::now();
    let output = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .output()
        .map_err(|e| Error::io("sh", e))?;
    let separator_seconds = started.elapsed().as_secs_f64();
    log::info!("separator exited with {} after {separator_seconds:.2} s", output.status);
    if !output.status.success() {
        return Err(Error::WrappedProcess {
            status: output.status.to_string(),
            output: format!(
                "{}{}",
                String::from_utf8_lossy(&output.stdout),
                String::from_utf8_lossy(&output.stderr)
            ),
        });
    }

    let mut produced = Vec::new();
    collect_wavs(&separated, &mut produced)?;
    if produced.is_empty() {
        return Err(Error::Consistency("separator produced no WAV files".into()));
    }
    let names: Vec<String> = produced
        .iter()
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    let missing: Vec<&String> = config
        .expected_stems
        .iter()
        .filter(|s| !names.contains(s))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Consistency(format!(
            "separator did not produce stems {missing:?} (found {names:?})"
        )));
    }

    // Decode everything before writing so a bad file leaves no partial output.
    let restore = if config.restore_gain { -gain_db } else { 0.0 };
    let stems = produced
        .iter()
        .map(|p| Ok((p.strip_prefix(&separated).unwrap().to_path_buf(), apply_gain_db(&read_wav(p)?, restore))))
        .collect::<Result<Vec<_>>>()?;
    let mut written = Vec::with_capacity(stems.len());
    for (rel, clip) in stems {
        let dest = out_dir.join(&rel);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_wav(&clip, &dest, config.output_format)?;
        written.push(rel);
    }
    Ok(WrapOutcome {
        gain_db,
        stems: written,
        separator_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_needs_both_placeholders() {
        assert!(WrapConfig::new("demucs {input}").validate().is_err());
        assert!(WrapConfig::new("cp {input} {output_dir}/x.wav").validate().is_ok());
    }

    #[test]
    fn quoting_survives_apostrophes() {
        assert_eq!(shell_quote(Path::new("/tmp/it's")), r"'/tmp/it'\''s'");
    }
}
