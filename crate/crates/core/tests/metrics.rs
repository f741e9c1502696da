mod common;

use std::collections::BTreeMap;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use loudsep::metrics::{aggregate_tracks, evaluate_stems, framewise_sdr, si_sdr, ProjectionConfig, SDR_CAP_DB};
use loudsep::{AudioClip, Error, StemName};

use common::*;

fn pair(seed: u64, n: usize, n_ch: usize, fs: u32, snr_db: f64, taps: usize) -> (AudioClip, AudioClip) {
    let mut rng = rng(seed);
    let mut refs = Vec::new();
    let mut ests = Vec::new();
    for _ in 0..n_ch {
        let r = white(&mut rng, n, 1.0);
        let h: Vec<f64> = (0..taps).map(|k| 0.8f64.powi(k as i32) * if k % 2 == 0 { 1.0 } else { -0.5 }).collect();
        let amp = 10f64.powf(-snr_db / 20.0) * 1.7;
        let e = fir(&r, &h).iter().zip(white(&mut rng, n, amp)).map(|(a, b)| a + b).collect();
        refs.push(r);
        ests.push(e);
    }
    (AudioClip::new(refs, fs).unwrap(), AudioClip::new(ests, fs).unwrap())
}

#[test]
fn overlapping_windows_match_dense_oracle() {
    let config = ProjectionConfig {
        filter_len: 32,
        window: 0.5,
        hop: 0.25,
    };
    for seed in 0..4 {
        let (r, e) = pair(seed, 16000, 2, 8000, 10.0 + 5.0 * seed as f64, 8);
        let score = framewise_sdr(&r, &e, &config).unwrap();
        assert_eq!(score.per_window.len(), 7);
        for (w, got) in score.per_window.iter().enumerate() {
            let want = dense_window_sdr(&r, &e, w * 2000, 4000, 32).unwrap();
            assert_abs_diff_eq!(*got, want, epsilon = 1e-6);
        }
    }
}

#[test]
fn single_tap_reduces_to_windowed_si_sdr() {
    let config = ProjectionConfig {
        filter_len: 1,
        window: 1.0,
        hop: 1.0,
    };
    let (r, e) = pair(7, 24000, 1, 8000, 12.0, 1);
    let score = framewise_sdr(&r, &e, &config).unwrap();
    for (w, got) in score.per_window.iter().enumerate() {
        let rw = r.slice(w * 8000, 8000).unwrap();
        let ew = e.slice(w * 8000, 8000).unwrap();
        assert_abs_diff_eq!(*got, si_sdr(&rw, &ew).unwrap(), epsilon = 1e-9);
    }
}

#[test]
fn silent_reference_windows_are_excluded_and_counted() {
    let (mut r, e) = pair(3, 24000, 2, 8000, 20.0, 4);
    let mut channels = r.clone().into_channels();
    for ch in channels.iter_mut() {
        ch[8000..16000].iter_mut().for_each(|v| *v = 0.0);
    }
    r = AudioClip::new(channels, 8000).unwrap();
    let score = framewise_sdr(&r, &e, &ProjectionConfig { filter_len: 16, ..Default::default() }).unwrap();
    assert_eq!(score.n_excluded, 1);
    assert_eq!(score.per_window.len(), 2);
}

#[test]
fn identical_signals_hit_the_cap() {
    let (r, _) = pair(11, 16000, 2, 8000, 0.0, 1);
    let score = framewise_sdr(&r, &r, &ProjectionConfig { filter_len: 64, ..Default::default() }).unwrap();
    assert!(score.per_window.iter().all(|&v| v == SDR_CAP_DB));
    assert_eq!(si_sdr(&r, &r).unwrap(), SDR_CAP_DB);
}

#[test]
fn orthogonal_noise_is_zero_db() {
    for seed in 0..5 {
        let (r, _) = pair(seed, 5000, 2, 8000, 0.0, 1);
        let mut e = r.clone();
        e.add_assign(&orthogonal_equal_energy(&r, seed + 100)).unwrap();
        assert_abs_diff_eq!(si_sdr(&r, &e).unwrap(), 0.0, epsilon = 1e-9);
    }
}

#[test]
fn configuration_and_shape_errors() {
    let (r, e) = pair(1, 4000, 1, 8000, 10.0, 2);
    assert!(matches!(
        framewise_sdr(&r, &e, &ProjectionConfig::default()),
        Err(Error::InsufficientDuration { .. })
    ));
    let bad = ProjectionConfig { filter_len: 64, window: 0.25, hop: 0.5 };
    assert!(matches!(framewise_sdr(&r, &e, &bad), Err(Error::Config(_))));
    let (r2, _) = pair(1, 4001, 1, 8000, 10.0, 2);
    assert!(si_sdr(&r2, &e).is_err());
}

#[test]
fn table_aggregation_is_median_of_medians_and_mean_of_means() {
    let config = ProjectionConfig { filter_len: 16, window: 0.5, hop: 0.5 };
    let mut results = Vec::new();
    for t in 0..3u64 {
        let mut reference = BTreeMap::new();
        let mut estimate = BTreeMap::new();
        for (k, name) in StemName::ALL.into_iter().enumerate() {
            let (r, e) = pair(t * 10 + k as u64, 16000, 2, 8000, 5.0 + 3.0 * (t + k as u64) as f64, 3);
            reference.insert(name, r);
            estimate.insert(name, e);
        }
        results.push(evaluate_stems(&format!("t{t}"), &reference, &estimate, &config).unwrap());
    }
    let summary = aggregate_tracks(&results).unwrap();
    let mut reversed = results.clone();
    reversed.reverse();
    assert_eq!(aggregate_tracks(&reversed).unwrap(), summary);

    for name in StemName::ALL {
        let mut medians: Vec<f64> = results.iter().map(|r| r.stems[&name].sdr.median).collect();
        medians.sort_by(f64::total_cmp);
        let means: f64 = results.iter().map(|r| r.stems[&name].sdr.mean).sum::<f64>() / 3.0;
        let row = summary.row(name.as_str()).unwrap();
        assert_eq!(row.sdr_median, medians[1]);
        assert_abs_diff_eq!(row.sdr_mean, means, epsilon = 1e-12);
    }
    let avg = summary.row("avg").unwrap();
    let mean_of_rows: f64 = StemName::ALL.iter().map(|n| summary.row(n.as_str()).unwrap().sdr_median).sum::<f64>() / 4.0;
    assert_abs_diff_eq!(avg.sdr_median, mean_of_rows, epsilon = 1e-12);
    assert!(summary.to_csv().starts_with("stem,median,mean,si_sdr\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn toeplitz_solver_agrees_with_dense(seed in 0u64..10_000, snr in -5.0f64..40.0, taps in 1usize..20, filter_len in 1usize..24) {
        let (r, e) = pair(seed, 6000, 1, 8000, snr, taps);
        let config = ProjectionConfig { filter_len, window: 0.25, hop: 0.25 };
        let score = framewise_sdr(&r, &e, &config).unwrap();
        for (w, got) in score.per_window.iter().enumerate() {
            let want = dense_window_sdr(&r, &e, w * 2000, 2000, filter_len).unwrap();
            prop_assert!((got - want).abs() < 1e-6, "window {w}: {got} vs {want}");
        }
    }

    #[test]
    fn si_sdr_ignores_estimate_scale(seed in 0u64..10_000, exponent in -20i32..20, alpha in 1e-3f64..1e3) {
        let (r, e) = pair(seed, 3000, 2, 8000, 10.0, 2);
        let base = si_sdr(&r, &e).unwrap();
        prop_assert_eq!(si_sdr(&r, &e.scaled(2f64.powi(exponent))).unwrap().to_bits(), base.to_bits());
        prop_assert!((si_sdr(&r, &e.scaled(alpha)).unwrap() - base).abs() < 1e-9);
    }
}
