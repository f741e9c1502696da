//! Minimal RIFF/WAVE codec.
//!
//! Reads PCM 16/24/32-bit integer and IEEE float 32/64-bit payloads (plain or
//! `WAVE_FORMAT_EXTENSIBLE`), writes PCM 16/24-bit and float 32/64-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AudioClip;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Sample encoding used when writing a WAV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    Float32,
    Float64,
}

impl SampleFormat {
    fn bits(self) -> u16 {
        match self {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Pcm24 => 24,
            SampleFormat::Float32 => 32,
            SampleFormat::Float64 => 64,
        }
    }

    fn format_tag(self) -> u16 {
        match self {
            SampleFormat::Pcm16 | SampleFormat::Pcm24 => FORMAT_PCM,
            SampleFormat::Float32 | SampleFormat::Float64 => FORMAT_IEEE_FLOAT,
        }
    }
}

impl FromStr for SampleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcm16" => Ok(SampleFormat::Pcm16),
            "pcm24" => Ok(SampleFormat::Pcm24),
            "float32" => Ok(SampleFormat::Float32),
            "float64" => Ok(SampleFormat::Float64),
            other => Err(Error::Argument(format!("unknown sample format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Encoding {
    Int(u16),
    Float(u16),
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_wav_from(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_wav_from<R: Read>(mut reader: R) -> Result<AudioClip> {
    let io = |e| Error::io("<stream>", e);

    let mut header = [0u8; 12];
    reader.read_exact(&mut header).map_err(io)?;
    if &header[0..4] != b"RIFF" || &header[8..12] != b"WAVE" {
        return Err(Error::Format("not a RIFF/WAVE file".into()));
    }

    let mut fmt: Option<(Encoding, u16, u32)> = None;
    loop {
        let mut chunk = [0u8; 8];
        reader.read_exact(&mut chunk).map_err(io)?;
        let id = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let size = u32::from_le_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]) as usize;

        match &id {
            b"fmt " => {
                let mut body = vec![0u8; size + (size & 1)];
                reader.read_exact(&mut body).map_err(io)?;
                fmt = Some(parse_fmt(&body[..size])?);
            }
            b"data" => {
                let (encoding, n_channels, sample_rate) =
                    fmt.ok_or_else(|| Error::Format("data chunk before fmt chunk".into()))?;
                let mut body = vec![0u8; size];
                reader.read_exact(&mut body).map_err(io)?;
                let samples = decode(&body, encoding)?;
                return AudioClip::from_interleaved(&samples, n_channels as usize, sample_rate)
                    .map_err(|_| {
                        Error::Format(format!(
                            "data chunk of {size} bytes is not a whole number of frames"
                        ))
                    });
            }
            _ => {
                let skip = (size + (size & 1)) as u64;
                let copied = std::io::copy(&mut (&mut reader).take(skip), &mut std::io::sink())
                    .map_err(io)?;
                if copied != skip {
                    return Err(io(std::io::ErrorKind::UnexpectedEof.into()));
                }
            }
        }
    }
}

fn parse_fmt(body: &[u8]) -> Result<(Encoding, u16, u32)> {
    if body.len() < 16 {
        return Err(Error::Format("fmt chunk too short".into()));
    }
    let u16_at = |i: usize| u16::from_le_bytes([body[i], body[i + 1]]);
    let mut tag = u16_at(0);
    let n_channels = u16_at(2);
    let sample_rate = u32::from_le_bytes([body[4], body[5], body[6], body[7]]);
    let bits = u16_at(14);

    if tag == FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return Err(Error::Format("extensible fmt chunk too short".into()));
        }
        // First two bytes of the sub-format GUID carry the plain format tag.
        tag = u16_at(24);
    }
    if n_channels == 0 || sample_rate == 0 {
        return Err(Error::Format("zero channels or sample rate".into()));
    }

    let encoding = match (tag, bits) {
        (FORMAT_PCM, 16 | 24 | 32) => Encoding::Int(bits),
        (FORMAT_IEEE_FLOAT, 32 | 64) => Encoding::Float(bits),
        _ => {
            return Err(Error::Format(format!(
                "unsupported codec: format tag {tag:#06x}, {bits} bits"
            )))
        }
    };
    Ok((encoding, n_channels, sample_rate))
}

fn decode(body: &[u8], encoding: Encoding) -> Result<Vec<f64>> {
    let out: Vec<f64> = match encoding {
        Encoding::Int(16) => body
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
            .collect(),
        Encoding::Int(24) => body
            .chunks_exact(3)
            .map(|b| {
                let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
                v as f64 / 8_388_608.0
            })
            .collect(),
        Encoding::Int(32) => body
            .chunks_exact(4)
            .map(|b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0)
            .collect(),
        Encoding::Float(32) => body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect(),
        Encoding::Float(64) => body
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect(),
        _ => unreachable!("rejected in parse_fmt"),
    };
    if let Some(i) = out.iter().position(|s| !s.is_finite()) {
        return Err(Error::Data(format!("non-finite sample at index {i}")));
    }
    Ok(out)
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, format: SampleFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_wav_to(clip, &mut writer, format)
        .and_then(|_| writer.flush().map_err(|e| Error::io(path, e)))
        .map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
}

pub fn write_wav_to<W: Write>(clip: &AudioClip, writer: &mut W, format: SampleFormat) -> Result<()> {
    let io = |e| Error::io("<stream>", e);
    let n_channels = clip.n_channels() as u16;
    let bytes_per_sample = (format.bits() / 8) as usize;
    let block_align = n_channels as usize * bytes_per_sample;
    let data_len = block_align * clip.n_frames();
    if data_len > u32::MAX as usize - 64 {
        return Err(Error::Format("clip too long for a RIFF file".into()));
    }

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.format_tag().to_le_bytes());
    out.extend_from_slice(&n_channels.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    out.extend_from_slice(&((clip.sample_rate() as usize * block_align) as u32).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&format.bits().to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    for n in 0..clip.n_frames() {
        for c in 0..clip.n_channels() {
            let s = clip.channel(c)[n];
            match format {
                SampleFormat::Pcm16 => {
                    out.extend_from_slice(&(quantize(s, 16) as i16).to_le_bytes())
                }
                SampleFormat::Pcm24 => {
                    out.extend_from_slice(&quantize(s, 24).to_le_bytes()[..3])
                }
                SampleFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
                SampleFormat::Float64 => out.extend_from_slice(&s.to_le_bytes()),
            }
        }
    }
    writer.write_all(&out).map_err(io)
}

/// Round to nearest and saturate at full scale.
fn quantize(s: f64, bits: u32) -> i32 {
    let full = (1i64 << (bits - 1)) as f64;
    (s * full).round().clamp(-full, full - 1.0) as i32
}
