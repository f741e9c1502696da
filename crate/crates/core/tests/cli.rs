use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use loudsep::audio::{read_wav, write_wav, SampleFormat};
use loudsep::loudness::lufs;
use loudsep::synth::{program_track, sine, write_library};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loudsep"))
        .args(args)
        .env("LOUDSEP_LOG", "warn")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_version_and_usage_errors() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["measure", "--help"])), 0);
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["limit", "--in", "x.wav"])), 2);
    assert_eq!(code(&run(&["measure", "--in", "/nonexistent/dir"])), 1);
}

#[test]
fn measure_and_limit_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("tone.wav");
    write_wav(&sine(997.0, 0.9, 3.0, 48000, 2), &wav, SampleFormat::Float64).unwrap();

    let csv = dir.path().join("l.csv");
    let stats = dir.path().join("s.json");
    let out = run(&["measure", "--in", s(&wav), "--csv", s(&csv), "--out", s(&stats)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let line = text.lines().nth(1).unwrap();
    let value: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - lufs(&read_wav(&wav).unwrap()).unwrap()).abs() < 1e-4);
    assert!(fs::read_to_string(&stats).unwrap().contains("\"mean\""));

    let limited = dir.path().join("lim.wav");
    let trace = dir.path().join("trace.wav");
    let out = run(&[
        "limit", "--in", s(&wav), "--out", s(&limited), "--threshold", "-6", "--trace-out", s(&trace), "--format", "float64",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read_wav(&limited).unwrap().peak() <= 10f64.powf(-6.0 / 20.0) + 1e-12);
    assert_eq!(read_wav(&trace).unwrap().n_channels(), 1);
}

#[test]
fn build_then_verify_catches_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let orig = dir.path().join("orig");
    write_library(&orig, 2, 4.0, 44100, 3, SampleFormat::Float32).unwrap();
    let out = dir.path().join("l");
    let report = dir.path().join("report.json");
    let r = run(&["build-dataset", "--recipe", "L", "--in", s(&orig), "--out", s(&out), "--report", s(&report)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);

    assert_eq!(code(&run(&["verify", "--original", s(&orig), "--limited", s(&out)])), 0);

    let path = out.join("track_000/drums.wav");
    let drums = read_wav(&path).unwrap();
    write_wav(&drums.scaled(0.5), &path, SampleFormat::Float32).unwrap();
    let r = run(&["verify", "--original", s(&orig), "--limited", s(&out)]);
    assert_eq!(code(&r), 1);
    assert!(String::from_utf8_lossy(&r.stderr).contains("track_000"));

    assert_eq!(code(&run(&["build-dataset", "--recipe", "XXL", "--in", s(&orig), "--out", s(&out)])), 1);
}

#[test]
fn augment_reads_config_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let lib = dir.path().join("lib");
    write_library(&lib, 2, 5.0, 44100, 4, SampleFormat::Float32).unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"count": 2, "duration": 1.5, "strategy": "loudnorm", "post_norm": -20, "seed": 3}"#).unwrap();
    let out = dir.path().join("ex");
    let r = run(&["--config", s(&cfg), "augment", "--in", s(&lib), "--out", s(&out), "--count", "3"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let lines: Vec<serde_json::Value> = fs::read_to_string(out.join("examples.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    for l in &lines {
        assert_eq!(l["strategy"], "loudnorm");
        let mix = read_wav(out.join(l["mixture_file"].as_str().unwrap())).unwrap();
        assert_eq!(mix.n_frames(), (1.5 * 44100.0) as usize);
        assert!((lufs(&mix).unwrap() + 20.0).abs() < 0.05);
    }
}

#[test]
fn eval_scores_identical_stems_near_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("ref");
    write_library(&refs, 1, 3.0, 44100, 5, SampleFormat::Float32).unwrap();
    let csv = dir.path().join("sum.csv");
    let r = run(&["eval", "--ref", s(&refs), "--est", s(&refs), "--filter-len", "32", "--csv", s(&csv)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().last().unwrap().starts_with("avg,"));
    for line in text.lines().skip(1) {
        let median: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(median > 100.0, "{line}");
    }

    let other = dir.path().join("est");
    write_library(&other, 2, 3.0, 44100, 5, SampleFormat::Float32).unwrap();
    assert_eq!(code(&run(&["eval", "--ref", s(&refs), "--est", s(&other)])), 1);
}

#[test]
fn wrap_separate_restores_the_input_scale() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("mix.wav");
    let track = program_track(6, 3.0, 44100, 0.2);
    write_wav(&track.mixture, &input, SampleFormat::Float64).unwrap();
    let out = dir.path().join("sep");
    let r = run(&[
        "wrap-separate", "--in", s(&input), "--out", s(&out),
        "--command", "cp {input} {output_dir}/vocals.wav", "--stems", "vocals", "--format", "float64",
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let back = read_wav(out.join("vocals.wav")).unwrap();
    assert!(back.max_abs_diff(&track.mixture).unwrap() < 1e-12);

    let r = run(&["wrap-separate", "--in", s(&input), "--out", s(&out), "--command", "false {input} {output_dir}"]);
    assert_eq!(code(&r), 1);
}
