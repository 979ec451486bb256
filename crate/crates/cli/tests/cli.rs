use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gridmind(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridmind"))
        .args(args)
        .env_remove("GRIDMIND_SEED")
        .output()
        .unwrap()
}

fn generate(out: &Path, count: &str) {
    let o = gridmind(&[
        "generate",
        "--split",
        "test",
        "--variant",
        "fwd-mark",
        "--count",
        count,
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_exit_codes_follow_violations() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "10");
    let path = dir.path().to_str().unwrap();
    let clean = gridmind(&["verify", path]);
    assert_eq!(clean.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&clean.stdout).contains("10 records, 0 violations"));

    let file = dir.path().join("test-fwd-mark-00000.jsonl");
    let text = fs::read_to_string(&file).unwrap();
    fs::write(
        &file,
        text.replacen("\"complexity\":", "\"complexity\":1", 1),
    )
    .unwrap();
    let dirty = gridmind(&["verify", path]);
    assert_eq!(dirty.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&dirty.stdout).contains("1 violations"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "2");
    let report = dir.path().join("r.json");
    let o = gridmind(&[
        "eval",
        "--test-file",
        dir.path().to_str().unwrap(),
        "--agent",
        "telepathy",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(gridmind(&["generate", "--split", "test"]).status.code() != Some(0));
}

#[test]
fn bridged_serve_matches_the_in_process_oracle() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "6");
    let bridge = format!(
        "bridge:stdio:{} serve --agent oracle",
        env!("CARGO_BIN_EXE_gridmind")
    );
    let mut outputs = Vec::new();
    for agent in ["oracle", bridge.as_str()] {
        let report = dir.path().join("r.json");
        let o = gridmind(&[
            "eval",
            "--test-file",
            dir.path().to_str().unwrap(),
            "--agent",
            agent,
            "--report",
            report.to_str().unwrap(),
            "--timeout",
            "20",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
        assert_eq!(report["counts"]["success"], 6);
        outputs.push(String::from_utf8(o.stdout).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
