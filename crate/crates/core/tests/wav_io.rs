use std::io::Cursor;

use proptest::prelude::*;

use loudsep::audio::{read_wav, read_wav_from, write_wav, write_wav_to, SampleFormat};
use loudsep::synth::program_track;
use loudsep::AudioClip;

fn roundtrip(clip: &AudioClip, format: SampleFormat) -> AudioClip {
    let mut buf = Vec::new();
    write_wav_to(clip, &mut buf, format).unwrap();
    read_wav_from(Cursor::new(buf)).unwrap()
}

#[test]
fn float_formats_round_trip_exactly() {
    let clip = program_track(1, 0.5, 44100, 0.9).mixture;
    assert_eq!(roundtrip(&clip, SampleFormat::Float64), clip);
    let once = roundtrip(&clip, SampleFormat::Float32);
    assert_eq!(roundtrip(&once, SampleFormat::Float32), once);
    assert!(once.max_abs_diff(&clip).unwrap() < 1e-7);
}

#[test]
fn integer_formats_quantize_to_nearest() {
    let clip = program_track(2, 0.5, 48000, 0.9).mixture;
    for (format, step) in [(SampleFormat::Pcm16, 1.0 / 32768.0), (SampleFormat::Pcm24, 1.0 / 8_388_608.0)] {
        let back = roundtrip(&clip, format);
        assert!(back.max_abs_diff(&clip).unwrap() <= 0.5 * step + 1e-15);
        assert_eq!(roundtrip(&back, format), back);
    }
}

#[test]
fn files_on_disk_preserve_layout() {
    let dir = tempfile::tempdir().unwrap();
    for n_ch in 1..=4 {
        let channels = (0..n_ch).map(|c| (0..777).map(|i| ((i * (c + 1)) as f64 * 0.01).sin() * 0.5).collect()).collect();
        let clip = AudioClip::new(channels, 22050).unwrap();
        let path = dir.path().join(format!("c{n_ch}.wav"));
        write_wav(&clip, &path, SampleFormat::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!((back.n_channels(), back.n_frames(), back.sample_rate()), (n_ch, 777, 22050));
    }
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(read_wav("/nonexistent/x.wav"), Err(loudsep::Error::Io { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_finite_clip_survives_float64(samples in prop::collection::vec(-4.0f64..4.0, 1..400), n_ch in 1usize..=3) {
        let n = samples.len() / n_ch;
        prop_assume!(n > 0);
        let channels = (0..n_ch).map(|c| samples[c * n..(c + 1) * n].to_vec()).collect();
        let clip = AudioClip::new(channels, 44100).unwrap();
        prop_assert_eq!(roundtrip(&clip, SampleFormat::Float64), clip.clone());
        let pcm = roundtrip(&clip, SampleFormat::Pcm16);
        prop_assert!(pcm.peak() <= 1.0);
    }
}
