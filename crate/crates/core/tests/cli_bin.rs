use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn ironia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ironia"))
        .args(args)
        .env_remove("IRONIA_EMBED_COMMAND")
        .env_remove("OPENAI_API_KEY")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn stats_prints_distribution() {
    let out = ironia(&["stats", "--data", p(&fixture("gpt12.jsonl"))]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("| IRONY | 3 | 25.00% |"), "{text}");
}

#[test]
fn missing_file_exits_3() {
    let out = ironia(&["stats", "--data", "/nonexistent/primary.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "phase = \"augmented\"\nencoders = [\"stub\", \"stub\", \"stub\", \"stub\"]\noutput_dir = \"out\"\n\
         [data]\nprimary = \"p.jsonl\"\nverified = \"v.jsonl\"\n[training]\nmax_epochs = 2000\n",
    )
    .unwrap();
    let out = ironia(&["phase", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("at most 3") && err.contains("max_epochs"), "{err}");
    assert_eq!(ironia(&["phase", "--config", "/nonexistent.toml"]).status.code(), Some(2));
}

#[test]
fn unconfigured_encoder_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = ironia(&[
        "train",
        "--data",
        p(&fixture("gpt12.jsonl")),
        "--encoder",
        "bert-base-uncased",
        "--output",
        p(&dir.path().join("h.head")),
    ]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
}

#[test]
fn remote_client_without_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = ironia(&[
        "annotate",
        "--input",
        p(&fixture("gpt12.jsonl")),
        "--output",
        p(&dir.path().join("a.jsonl")),
        "--client",
        "remote",
        "--base-url",
        "http://127.0.0.1:9",
        "--model",
        "m",
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn annotate_then_enqueue_for_review() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let queue = d.join("events.jsonl");
    let out = ironia(&[
        "annotate",
        "--input",
        p(&fixture("gpt12.jsonl")),
        "--output",
        p(&d.join("ann.jsonl")),
        "--fixture",
        p(&fixture("gpt12_mock.jsonl")),
        "--queue",
        p(&queue),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert_eq!(std::fs::read_to_string(d.join("ann.jsonl")).unwrap().lines().count(), 12);

    // nothing reviewed yet
    let out = ironia(&["export", "--queue", p(&queue), "--output", p(&d.join("v.jsonl"))]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    let out = ironia(&["stats", "--queue", p(&queue), "--partial"]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("12 items: 12 pending"), "{}", stdout(&out));
}

#[test]
fn train_evaluate_report_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let head = d.join("stub.head");
    let data = fixture("gpt12.jsonl");
    let out = ironia(&[
        "train", "--data", p(&data), "--mode", "binary", "--output", p(&head), "--max-epochs", "5",
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("| stub | IRONY |"), "{}", stdout(&out));

    let report = d.join("r.json");
    let out = ironia(&[
        "evaluate", "--data", p(&data), "--mode", "binary", "--checkpoint", p(&head), "--whole", "--output", p(&report),
    ]);
    assert!(out.status.success(), "{out:?}");
    let out = ironia(&["evaluate", "--data", p(&data), "--checkpoint", p(&head), "--whole"]);
    assert_eq!(out.status.code(), Some(2), "mode mismatch: {out:?}");

    let csv = d.join("r.csv");
    let out = ironia(&["report", "--input", p(&report), "--csv", p(&csv)]);
    assert!(out.status.success(), "{out:?}");
    let csv = std::fs::read_to_string(csv).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().last().unwrap().starts_with("stub,AVG,"), "{csv}");
}
