use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn safebn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_safebn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_reports_classes() {
    let reference = fixtures().join("reference");
    let out = safebn(&["ingest", "--reference", path(&reference)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("9 classes"));
}

#[test]
fn ingest_rejects_bad_reference() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("class_7.csv"), "channel_id,value\n").unwrap();
    let out = safebn(&["ingest", "--reference", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("empty sample set for class 7"),
        "{}",
        stderr(&out)
    );

    let out = safebn(&["ingest", "--reference", path(&dir.path().join("missing"))]);
    assert_eq!(out.status.code(), Some(2));

    let mixed = tempfile::tempdir().unwrap();
    fs::write(
        mixed.path().join("class_1.csv"),
        "channel_id,value\n0,0.1\n1,0.2\n2,0.3\n",
    )
    .unwrap();
    fs::write(mixed.path().join("class_2.csv"), "channel_id,value\n0,0.1\n1,0.2\n").unwrap();
    let out = safebn(&["ingest", "--reference", path(mixed.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("class 2"), "{}", stderr(&out));
}

fn evaluate(frame: &str, class: &str, extra: &[&str]) -> Output {
    let f = fixtures();
    let reference = f.join("reference");
    let channels = f.join("frames").join(frame);
    let mut args = vec![
        "evaluate",
        "--reference",
        path(&reference),
        "--channels",
        path(&channels),
        "--class",
        class,
        "--speed",
        "40",
    ];
    args.extend_from_slice(extra);
    safebn(&args)
}

#[test]
fn evaluate_exit_codes() {
    let id = evaluate("class_4_id.csv", "4", &[]);
    assert_eq!(id.status.code(), Some(0), "{}", stderr(&id));
    assert!(stdout(&id).contains("verdict: ID"));
    assert!(stdout(&id).contains("state: S0"));

    let dark = evaluate("class_4_dark.csv", "4", &[]);
    assert_eq!(dark.status.code(), Some(10), "{}", stderr(&dark));
    assert!(stdout(&dark).contains("verdict: OOD"));
    assert!(stdout(&dark).contains("state: S5"));
    assert!(stdout(&dark).contains("action: fallback-ACC"));

    let unknown = evaluate("class_4_id.csv", "43", &[]);
    assert_eq!(unknown.status.code(), Some(2));

    let no_reference = evaluate("class_4_id.csv", "20", &[]);
    assert_eq!(no_reference.status.code(), Some(2));
    assert!(stderr(&no_reference).contains("no reference distribution for predicted class 20"));

    let bad_alpha = evaluate("class_4_id.csv", "4", &["--alpha", "1.5"]);
    assert_eq!(bad_alpha.status.code(), Some(2));
}

#[test]
fn evaluate_with_monitor_disabled_still_reports_the_test() {
    let out = evaluate("class_4_dark.csv", "4", &["--disable-safeml", "-v"]);
    assert_eq!(out.status.code(), Some(10));
    let text = stdout(&out);
    assert!(text.contains("verdict: OOD"));
    assert!(text.contains("state: S0"), "{text}");
    assert!(stderr(&out).contains("\"safeml_disabled\":true"));
}

fn run(out_dir: &Path, scenario: &str, extra: &[&str]) -> Output {
    let script = fixtures().join("scenarios").join(scenario);
    let mut args = vec!["run", "--scenario", path(&script), "--out", path(out_dir)];
    args.extend_from_slice(extra);
    safebn(&args)
}

#[test]
fn run_writes_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run(a.path(), "paper_table4.toml", &[]);
    let second = run(b.path(), "paper_table4.toml", &[]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(second.status.code(), Some(0));
    for suffix in ["trace.jsonl", "report.md", "report.csv"] {
        let name = format!("paper_table4.{suffix}");
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert!(!x.is_empty());
        assert!(x == y, "{name} differs");
    }
    let table = stdout(&first);
    assert!(table.contains(
        "| 1 | 1 | 3 | 1 | 60 | 40 | 0.0242 | 0.0285 | 0.0638 | 0.1254 | 0.2172 | **0.5408** |"
    ));
}

#[test]
fn run_with_monitor_disabled() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "paper_table3.toml", &["--disable-safeml"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("paper_table3.report.csv")).unwrap();
    let argmax: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(12).unwrap())
        .collect();
    assert_eq!(argmax, ["S0", "S3", "S0", "S0", "S3", "S0"]);
}

#[test]
fn run_reports_the_failing_frame() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bad.toml");
    let reference = fixtures().join("reference");
    fs::write(
        &script,
        format!(
            "reference_dir = {:?}\n[[frame]]\npredicted_class = 3\nchannels = [[0.1], [0.2], [0.3]]\nspeed = 40\n\
             [[frame]]\npredicted_class = 30\nchannels = [[0.1], [0.2], [0.3]]\nspeed = 40\n",
            path(&reference)
        ),
    )
    .unwrap();
    let out = safebn(&[
        "run",
        "--scenario",
        path(&script),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("frame 2"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(safebn(&["evaluate"]).status.code(), Some(2));
    assert_eq!(safebn(&["frobnicate"]).status.code(), Some(2));
}
