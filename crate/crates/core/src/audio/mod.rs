//! Audio buffers, WAV I/O and stem sets.

mod clip;
mod stems;
mod wav;

pub use clip::AudioClip;
pub use stems::{
    load_stem_set, MixturePolicy, StemName, StemSet, TrackManifest, ADDITIVITY_TOLERANCE,
};
pub use wav::{read_wav, read_wav_from, write_wav, write_wav_to, SampleFormat};
