use std::path::Path;
use std::process::{Command, Output};

fn vocsid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vocsid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = vocsid(args);
    assert!(
        out.status.success(),
        "vocsid {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_train_evaluate_identify() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let store = dir.path().join("store");
    let report = dir.path().join("report.txt");

    let out = ok(&[
        "synth",
        "--speakers",
        "3",
        "--seed",
        "5",
        "--out",
        p(&corpus),
        "--train-utts",
        "3",
        "--test-utts",
        "2",
        "--seconds",
        "1",
    ]);
    assert!(out.contains("15 utterances for 3 speakers"), "{out}");

    let manifest = corpus.join("manifest.tsv");
    let out = ok(&[
        "--jobs",
        "2",
        "train",
        "--manifest",
        p(&manifest),
        "--out",
        p(&store),
        "--spectral-components",
        "4",
        "--residual-components",
        "4",
    ]);
    assert!(out.contains("trained 3 speakers (6 models)"), "{out}");

    let out = ok(&[
        "evaluate",
        "--manifest",
        p(&manifest),
        "--store",
        p(&store),
        "--report",
        p(&report),
    ]);
    assert!(out.contains("combined"), "{out}");
    assert_eq!(std::fs::read_to_string(&report).unwrap(), out);
    let records = std::fs::read_to_string(dir.path().join("report.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 6);

    let audio = corpus.join("audio").join("spk01-test-00.wav");
    let out = ok(&[
        "identify",
        "--audio",
        p(&audio),
        "--store",
        p(&store),
        "--eta",
        "1",
    ]);
    assert!(
        out.lines().last().unwrap().starts_with("identified: spk"),
        "{out}"
    );
}

#[test]
fn default_config_is_printed() {
    let out = ok(&["default-config"]);
    assert!(out.contains("pre_emphasis = 0.97"));
    assert!(out.contains("eta = 0.5"));
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    let out = vocsid(&["train", "--manifest", p(&missing), "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.tsv"));

    let out = vocsid(&[
        "evaluate",
        "--manifest",
        p(&missing),
        "--store",
        p(dir.path()),
        "--eta",
        "2",
    ]);
    assert!(!out.status.success());

    let out = vocsid(&[
        "train",
        "--manifest",
        p(&missing),
        "--out",
        p(dir.path()),
        "--spectral-kind",
        "plp",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("plp"));
}
