use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use csgrad::experiment::{diag, diag_corrupted, parse_config, recon_bench_rows, TRACE_HEADER};
use csgrad::fedopt::FeedbackCorruption;

fn csgrad(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_csgrad"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("CSGRAD_THREADS", t);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_config(out: &Path, algorithm: &str, extra: &str) -> String {
    format!(
        "command=run\nalgorithm={algorithm}\nd=300\nn=4\nT=25\nK=30\nQ=120\n\
         sketch_rows=3\nsketch_cols=40\nnoise_std=0.1\nmaster_seed=42\nnum_trials=2\n\
         output_path={}\n{extra}",
        out.display()
    )
}

#[test]
fn run_writes_traces_and_summary_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    for algorithm in ["cs_sgd", "sketch_sgd", "vanilla_sgd"] {
        let mut seen: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
        for threads in ["1", "4", "1"] {
            let out = tmp.path().join(algorithm);
            let _ = fs::remove_dir_all(&out);
            let cfg = write_config(tmp.path(), "run.cfg", &run_config(&out, algorithm, ""));
            let res = csgrad(&["run", "--config", &cfg], Some(threads));
            assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
            let csv = fs::read(out.join("trace_trial1.csv")).unwrap();
            let text = String::from_utf8(csv.clone()).unwrap();
            assert!(text.starts_with(TRACE_HEADER));
            assert_eq!(text.lines().count(), 26);
            let summary = fs::read(out.join("summary.json")).unwrap();
            seen.push((csv, summary));
        }
        assert_eq!(seen[0], seen[1], "{algorithm}: thread count changed output");
        assert_eq!(seen[0], seen[2], "{algorithm}: rerun changed output");
    }
}

#[test]
fn summary_reports_compression_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cfg = write_config(tmp.path(), "a.cfg", &run_config(&out, "cs_sgd", ""));
    assert!(csgrad(&["run", "--config", &cfg], None).status.success());
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    let t0 = &json["trials"][0];
    assert_eq!(t0["uplink_bytes_per_device_round"], 960);
    assert_eq!(t0["compression_rate"], 2.5);
    assert!(t0["final_f"].as_f64().unwrap() > 0.0);
    assert_eq!(json["trials"].as_array().unwrap().len(), 2);
}

#[test]
fn out_flag_overrides_output_path_and_zero_rounds_give_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("elsewhere");
    let body = run_config(Path::new("/nonexistent/never"), "cs_sgd", "").replace("T=25", "T=0");
    let cfg = write_config(tmp.path(), "t0.cfg", &body);
    let res = csgrad(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(res.status.success());
    let text = fs::read_to_string(out.join("trace_trial0.csv")).unwrap();
    assert_eq!(text, format!("{TRACE_HEADER}\n"));
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cases = [
        ("algorithm", run_config(&out, "foo", "")),
        ("Q", run_config(&out, "cs_sgd", "").replace("Q=120", "Q=600")),
        ("colour", run_config(&out, "cs_sgd", "colour=red\n")),
        ("command", run_config(&out, "cs_sgd", "").replace("command=run", "command=diag")),
    ];
    for (key, body) in cases {
        let cfg = write_config(tmp.path(), "bad.cfg", &body);
        let res = csgrad(&["run", "--config", &cfg], None);
        assert_eq!(res.status.code(), Some(1), "{key}");
        let err = String::from_utf8_lossy(&res.stderr);
        assert!(err.contains(&format!("`{key}`")), "{key}: {err}");
    }
    let res = csgrad(&["run", "--config", "/nonexistent.cfg"], None);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn sweep_noise_writes_every_level() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let body = run_config(&out, "cs_sgd", "")
        .replace("command=run", "command=sweep-noise")
        .replace("noise_std=0.1", "noise_std=0,1,5");
    let cfg = write_config(tmp.path(), "s.cfg", &body);
    assert!(csgrad(&["sweep-noise", "--config", &cfg], None).status.success());
    for w in 0..3 {
        for k in 0..2 {
            assert!(out.join(format!("trace_w{w}_trial{k}.csv")).exists());
        }
    }
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["by_noise"].as_array().unwrap().len(), 3);
}

const RECON: &str = "command=recon-bench\nd=2000\nK=40\nlambdas=1,4\nrecon_nnz=40\nrecon_sigma=0.01\n\
                     master_seed=3\nnum_trials=4\noutput_path=";

#[test]
fn recon_bench_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("recon");
    let cfg = write_config(tmp.path(), "r.cfg", &format!("{RECON}{}\n", out.display()));
    let res = csgrad(&["recon-bench", "--config", &cfg], None);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(out.join("recon.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,method,trial,rel_error"));
    assert_eq!(lines.count(), 2 * 2 * 4);
    assert!(text.contains("\n4,count_sketch,3,"));
}

#[test]
fn full_measurements_leave_only_the_noise() {
    // λ = 1 with d = d_aug: the error is at most the off-support noise energy.
    let body = "command=recon-bench\nd=1024\nK=30\nlambdas=1\nrecon_nnz=30\nrecon_sigma=0.05\n\
                master_seed=9\nnum_trials=5\noutput_path=x\n";
    let cfg = parse_config(body).unwrap();
    let (rows, _) = recon_bench_rows(&cfg).unwrap();
    for r in rows.iter().filter(|r| r.method == csgrad::experiment::ReconMethod::Fiht) {
        let mut rng = csgrad::rng::SplitMix64::from_path(9, &[csgrad::rng::stream::SIGNAL, r.trial as u64]);
        let g = csgrad::synth::make_recon_signal(1024, 30, 0.05, &mut rng).unwrap();
        let g2: f64 = g.as_slice().iter().map(|v| v * v).sum();
        let d = g.dim() as f64;
        // Noise energy is about d·σ²; allow for its sampling spread.
        let envelope = 1.5 * d * 0.05 * 0.05 / g2 + 1e-6;
        assert!(r.rel_error.unwrap() <= envelope, "{r:?} > {envelope}");
    }
}

fn diag_config(w: f64) -> String {
    format!(
        "command=diag\nd=200\nn=5\nT=60\nK=25\nQ=100\nnoise_std={w}\nmaster_seed=1\noutput_path=unused\n"
    )
}

#[test]
fn diag_passes_with_and_without_noise() {
    let tmp = tempfile::tempdir().unwrap();
    for w in [0.0, 1.0] {
        let cfg = write_config(tmp.path(), "d.cfg", &diag_config(w));
        let res = csgrad(&["diag", "--config", &cfg], None);
        let stdout = String::from_utf8_lossy(&res.stdout);
        assert!(res.status.success(), "W={w}: {stdout}");
        assert!(stdout.contains("diag: PASS"));
    }
}

#[test]
fn diag_detects_corrupted_feedback() {
    let cfg = parse_config(&diag_config(0.0)).unwrap();
    assert!(diag(&cfg).unwrap().iter().all(|o| o.passed));
    let bad = diag_corrupted(
        &cfg,
        FeedbackCorruption {
            after_round: 10,
            amount: 1e-3,
        },
    )
    .unwrap();
    assert!(bad.iter().all(|o| !o.passed));
    assert!(bad[0].render().contains("FAIL"));
}
