use crate::error::{Error, Result};

/// Planar multichannel buffer of 64-bit samples.
///
/// Every channel holds the same number of frames. Samples are nominally in
/// `[-1, 1]` but larger values are allowed in memory (gain staging before a
/// limiter routinely overshoots full scale).
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Argument("sample rate must be positive".into()));
        }
        if channels.is_empty() {
            return Err(Error::Argument("clip needs at least one channel".into()));
        }
        let n = channels[0].len();
        if let Some((c, ch)) = channels.iter().enumerate().find(|(_, ch)| ch.len() != n) {
            return Err(Error::Consistency(format!(
                "channel {c} has {} frames, channel 0 has {n}",
                ch.len()
            )));
        }
        Ok(AudioClip {
            channels,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn silence(n_channels: usize, n_frames: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![vec![0.0; n_frames]; n_channels], sample_rate)
    }

    pub fn from_interleaved(data: &[f64], n_channels: usize, sample_rate: u32) -> Result<Self> {
        if n_channels == 0 || data.len() % n_channels != 0 {
            return Err(Error::Argument(format!(
                "{} interleaved samples do not divide into {n_channels} channels",
                data.len()
            )));
        }
        let n_frames = data.len() / n_channels;
        let mut channels = vec![Vec::with_capacity(n_frames); n_channels];
        for frame in data.chunks_exact(n_channels) {
            for (ch, &s) in channels.iter_mut().zip(frame) {
                ch.push(s);
            }
        }
        Self::new(channels, sample_rate)
    }

    #[inline]
    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    #[inline]
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    #[inline]
    pub fn n_frames(&self) -> usize {
        self.channels[0].len()
    }

    pub fn duration_secs(&self) -> f64 {
        self.n_frames() as f64 / self.sample_rate as f64
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn interleaved(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_frames() * self.n_channels());
        for n in 0..self.n_frames() {
            for ch in &self.channels {
                out.push(ch[n]);
            }
        }
        out
    }

    /// Largest absolute sample value across all channels.
    pub fn peak(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|ch| ch.iter())
            .fold(0.0_f64, |m, &s| m.max(s.abs()))
    }

    /// Largest absolute value of frame `n` across channels.
    #[inline]
    pub fn frame_peak(&self, n: usize) -> f64 {
        self.channels
            .iter()
            .fold(0.0_f64, |m, ch| m.max(ch[n].abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.channels
            .iter()
            .all(|ch| ch.iter().all(|s| s.is_finite()))
    }

    pub fn ensure_finite(&self) -> Result<()> {
        for (c, ch) in self.channels.iter().enumerate() {
            if let Some(n) = ch.iter().position(|s| !s.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite sample at channel {c}, frame {n}"
                )));
            }
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &AudioClip) -> bool {
        self.sample_rate == other.sample_rate
            && self.n_channels() == other.n_channels()
            && self.n_frames() == other.n_frames()
    }

    pub fn ensure_same_shape(&self, other: &AudioClip, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Consistency(format!(
                "{what}: shape {}ch x {} @ {} Hz vs {}ch x {} @ {} Hz",
                self.n_channels(),
                self.n_frames(),
                self.sample_rate,
                other.n_channels(),
                other.n_frames(),
                other.sample_rate
            )))
        }
    }

    /// Multiply every sample by a linear factor.
    pub fn scaled(&self, factor: f64) -> AudioClip {
        AudioClip {
            channels: self
                .channels
                .iter()
                .map(|ch| ch.iter().map(|&s| s * factor).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Multiply frame `n` of every channel by `gains[n]`.
    ///
    /// Panics if `gains.len() != n_frames`.
    pub fn multiplied_by_frames(&self, gains: &[f64]) -> AudioClip {
        assert_eq!(gains.len(), self.n_frames());
        AudioClip {
            channels: self
                .channels
                .iter()
                .map(|ch| ch.iter().zip(gains).map(|(&s, &g)| g * s).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn add_assign(&mut self, other: &AudioClip) -> Result<()> {
        self.ensure_same_shape(other, "add")?;
        for (a, b) in self.channels.iter_mut().zip(&other.channels) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        Ok(())
    }

    /// Maximum absolute sample-wise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &AudioClip) -> Result<f64> {
        self.ensure_same_shape(other, "difference")?;
        Ok(self
            .channels
            .iter()
            .zip(&other.channels)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<AudioClip> {
        if start + len > self.n_frames() {
            return Err(Error::Argument(format!(
                "slice {start}..{} out of range for {} frames",
                start + len,
                self.n_frames()
            )));
        }
        Ok(AudioClip {
            channels: self
                .channels
                .iter()
                .map(|ch| ch[start..start + len].to_vec())
                .collect(),
            sample_rate: self.sample_rate,
        })
    }

    /// Reverse the channel order (L/R swap for stereo).
    pub fn swap_channels(&mut self) {
        self.channels.reverse();
    }
}
