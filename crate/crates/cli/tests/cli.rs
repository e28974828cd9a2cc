use std::path::Path;
use std::process::{Command, Output};

fn streamreg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamreg"))
        .args(args)
        .current_dir(dir)
        .env_remove("STREAMREG_SEED")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

/// Simulates a small Gaussian stream with a matching config (M = 200).
fn gaussian_setup(dir: &Path, n: usize) {
    let n = n.to_string();
    ok(&streamreg(
        &["simulate", "gaussian-lm", "--n", &n, "--seed", "3", "--output", "data.csv", "--config-out", "run.toml"],
        dir,
    ));
}

const FIT: [&str; 8] = ["fit-stream", "--config", "run.toml", "--seed", "9", "--particles", "200", "--input"];

#[test]
fn simulate_writes_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    gaussian_setup(dir.path(), 50);
    let text = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y,x1,x2"));
    assert_eq!(lines.count(), 50);
    assert!(dir.path().join("run.toml").exists());
}

#[test]
fn fit_stream_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gaussian_setup(d, 300);
    let fit = |input: &str, output: &str, extra: &[&str]| {
        let mut args = FIT.to_vec();
        args.extend([input, "--output", output]);
        args.extend(extra);
        ok(&streamreg(&args, d));
        std::fs::read(d.join(output)).unwrap()
    };
    let a = fit("data.csv", "a.jsonl", &[]);
    let b = fit("data.csv", "b.jsonl", &[]);
    assert!(!a.is_empty());
    assert_eq!(a, b);

    // First 200 rows, checkpoint, then resume over the full file.
    let text = std::fs::read_to_string(d.join("data.csv")).unwrap();
    let head: Vec<&str> = text.lines().take(201).collect();
    std::fs::write(d.join("head.csv"), head.join("\n") + "\n").unwrap();
    let mut joined = fit("head.csv", "c.jsonl", &["--checkpoint", "run.ckpt"]);
    joined.extend(fit("data.csv", "d.jsonl", &["--checkpoint", "run.ckpt", "--resume"]));
    assert_eq!(joined, a);
}

#[test]
fn compare_against_itself_gives_zero_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gaussian_setup(d, 150);
    let mut args = FIT.to_vec();
    args.extend(["data.csv", "--output", "run.jsonl", "--snapshot-every", "25"]);
    ok(&streamreg(&args, d));
    let out = streamreg(&["compare", "--run", "run.jsonl", "--reference", "run.jsonl"], d);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() > 0);
    assert!(text.lines().all(|l| l.contains("\"kind\":\"gap\"") && l.contains("\"gap\":0.0")));
}

#[test]
fn batch_draws_compare_with_polygons() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gaussian_setup(d, 150);
    let mut args = FIT.to_vec();
    args.extend(["data.csv", "--output", "run.jsonl", "--checkpoint", "run.ckpt"]);
    ok(&streamreg(&args, d));
    ok(&streamreg(
        &["batch-mcmc", "--config", "run.toml", "--input", "data.csv", "--n-kept", "2000", "--output", "draws.csv"],
        d,
    ));
    let out = streamreg(
        &["compare", "--run", "run.jsonl", "--reference", "draws.csv", "--particles", "run.ckpt"],
        d,
    );
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"kind\":\"gap\""));
    assert!(text.contains("\"kind\":\"polygon\""));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(streamreg(&["simulate", "nonesuch"], d).status.code(), Some(2));
    assert_eq!(streamreg(&["fit-stream"], d).status.code(), Some(2));
    assert_eq!(streamreg(&["compare", "--run", "missing", "--reference", "missing"], d).status.code(), Some(1));

    gaussian_setup(d, 150);
    let text = std::fs::read_to_string(d.join("data.csv")).unwrap();
    let bad = text.replacen('\n', "\nnot-a-number,1,2\n", 1);
    std::fs::write(d.join("bad.csv"), bad).unwrap();
    let mut args = FIT.to_vec();
    args.extend(["bad.csv", "--output", "x.jsonl"]);
    let out = streamreg(&args, d);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}
