mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use loudsep::limiter::{
    apply_trace, find_threshold_for_reduction, limit, sample_ratio, sample_ratio_raw, LimiterParams, RATIO_EPSILON,
};
use loudsep::loudness::db_to_gain;
use loudsep::synth::program_track;
use loudsep::{AudioClip, Error};

use common::*;

fn clip_from(seed: u64, n: usize, n_ch: usize, peak: f64) -> AudioClip {
    let mut rng = rng(seed);
    let raw = AudioClip::new((0..n_ch).map(|_| white(&mut rng, n, 1.0)).collect(), 44100).unwrap();
    raw.scaled(peak / raw.peak())
}

#[test]
fn release_follows_the_one_pole_recursion() {
    // Burst then silence: during recovery the gain obeys the scalar recursion.
    let fs = 44100;
    let params = LimiterParams::default().with_threshold(-6.0).with_release(50.0);
    let mut x = vec![2.0 * params.ceiling(); 4410];
    x.extend(vec![0.0; 8820]);
    let (_, trace) = limit(&AudioClip::mono(x, fs).unwrap(), &params).unwrap();
    let release = (-1.0 / (0.05 * fs as f64)).exp();
    let start = 4410 + 100;
    let mut g = trace.gain[start - 1];
    for n in start..start + 4000 {
        g = 1.0 + release * (g - 1.0);
        assert_abs_diff_eq!(trace.gain[n], g, epsilon = 1e-12);
    }
}

#[test]
fn steady_state_matches_scalar_oracle() {
    for threshold in [-12.0, -6.0, 0.0] {
        let params = LimiterParams::default().with_threshold(threshold);
        let level = 2.0 * params.ceiling();
        let n = 44100;
        let (_, trace) = limit(&AudioClip::mono(vec![level; n], 44100).unwrap(), &params).unwrap();
        let oracle = constant_input_gain(level, params.ceiling(), n, params.attack, params.release, 44100.0);
        assert_abs_diff_eq!(*trace.gain.last().unwrap(), oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(oracle, 0.5, epsilon = 1e-9);
    }
}

#[test]
fn gain_starts_falling_before_the_peak() {
    let params = LimiterParams {
        attack: 2.0,
        lookahead: 2.0,
        ..LimiterParams::default()
    };
    let mut x = vec![0.1; 4410];
    x[3000] = 2.0;
    let (out, trace) = limit(&AudioClip::mono(x, 44100).unwrap(), &params).unwrap();
    assert!(trace.gain[3000 - 50] < 1.0);
    assert!(out.peak() <= 1.0 + 1e-12);
}

#[test]
fn ratio_recovers_trace_on_audible_frames() {
    let track = program_track(4, 4.0, 44100, 0.95);
    let (limited, trace) = limit(&track.mixture, &LimiterParams::default().with_threshold(-5.0)).unwrap();
    let ratio = sample_ratio(&track.mixture, &limited, RATIO_EPSILON).unwrap();
    for n in 0..trace.len() {
        if track.mixture.frame_peak(n) > 1e-6 {
            assert_abs_diff_eq!(ratio.gain[n], trace.gain[n], epsilon = 1e-9);
        }
    }
    let stems = track.multiplied_by_frames(&trace.gain).unwrap();
    assert!(stems.mixture.max_abs_diff(&limited).unwrap() == 0.0);
    assert!(apply_trace(&track.mixture, &trace).unwrap().max_abs_diff(&limited).unwrap() == 0.0);
}

#[test]
fn raw_ratio_keeps_makeup_gain() {
    let x = clip_from(1, 1000, 2, 0.5);
    let r = sample_ratio_raw(&x, &x.scaled(1.5), RATIO_EPSILON).unwrap();
    assert!(r.iter().all(|v| (v - 1.5).abs() < 1e-12));
    let clamped = sample_ratio(&x, &x.scaled(1.5), RATIO_EPSILON).unwrap();
    assert!(clamped.gain.iter().all(|&v| v == 1.0));
}

#[test]
fn search_reports_unreachable_bands() {
    let quiet = clip_from(2, 44100, 2, db_to_gain(-60.0));
    assert!(matches!(
        find_threshold_for_reduction(&quiet, (3.0, 4.0), &LimiterParams::default()),
        Err(Error::Search(_))
    ));
    let loud = clip_from(3, 44100, 2, 0.9);
    assert!(find_threshold_for_reduction(&loud, (4.0, 3.0), &LimiterParams::default()).is_err());
}

#[test]
fn rejects_bad_configuration() {
    let x = clip_from(5, 100, 2, 0.5);
    let unlinked = LimiterParams {
        stereo_link: false,
        ..LimiterParams::default()
    };
    assert!(matches!(limit(&x, &unlinked), Err(Error::Config(_))));
    assert!(limit(&clip_from(5, 100, 1, 0.5), &unlinked).is_ok());
    assert!(limit(&x, &LimiterParams::default().with_release(0.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ceiling_always_holds(seed in 0u64..10_000, threshold in -30.0f64..0.0, over in 1.0f64..20.0,
                            release in 5.0f64..500.0, n_ch in 1usize..=2) {
        let params = LimiterParams::default().with_threshold(threshold).with_release(release);
        let x = clip_from(seed, 4000, n_ch, params.ceiling() * over);
        let (out, trace) = limit(&x, &params).unwrap();
        prop_assert!(out.peak() <= params.ceiling() * (1.0 + 1e-6));
        prop_assert!(trace.gain.iter().all(|&g| g > 0.0 && g <= 1.0));
        prop_assert_eq!(out.n_frames(), x.n_frames());
    }

    #[test]
    fn below_threshold_is_identity(seed in 0u64..10_000, threshold in -30.0f64..0.0, under in 0.05f64..0.999) {
        let params = LimiterParams::default().with_threshold(threshold);
        let x = clip_from(seed, 3000, 2, params.ceiling() * under);
        let (out, _) = limit(&x, &params).unwrap();
        prop_assert_eq!(out, x);
    }

    #[test]
    fn trace_scaled_stems_stay_additive(seed in 0u64..500, threshold in -12.0f64..-1.0) {
        let track = program_track(seed, 1.0, 44100, 0.9);
        let (limited, trace) = limit(&track.mixture, &LimiterParams::default().with_threshold(threshold)).unwrap();
        let stems = track.multiplied_by_frames(&trace.gain).unwrap();
        prop_assert!(stems.additivity_error().unwrap() <= 1e-12);
        prop_assert!(stems.stem_sum().unwrap().max_abs_diff(&limited).unwrap() <= 1e-12);
    }
}
