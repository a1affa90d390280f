use std::process::Command;

fn sva() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sva"));
    c.env_remove("MODEL_DIR");
    c
}

#[test]
fn gen_writes_manifest_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = sva()
            .args(["gen", "--setting", "ALL", "--n-per-cell", "2", "-o"])
            .arg(&out)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        (
            std::fs::read(out.join("prompts.jsonl")).unwrap(),
            std::fs::read(out.join("manifest.json")).unwrap(),
        )
    };
    let (a, ma) = run("a");
    let (b, mb) = run("b");
    assert_eq!(a, b);
    assert_eq!(ma, mb);
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 128);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "setting = \"is_negated\"\nn_per_cell = 5\n").unwrap();
    let out = dir.path().join("out");
    let status = sva()
        .args(["gen", "--n-per-cell", "3", "--config"])
        .arg(&cfg)
        .arg("-o")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("prompts.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.contains("\"is_negated\":true")));
}

#[test]
fn exit_codes_separate_asset_and_validation_errors() {
    let code = |args: &[&str]| sva().args(args).output().unwrap().status.code();
    // No checkpoint anywhere.
    assert_eq!(code(&["verify", "-o", "/tmp/sva-cli-none"]), Some(2));
    assert_eq!(code(&["verify", "--config", "/nonexistent/run.toml"]), Some(2));
    assert_eq!(code(&["gen", "--n-per-cell", "0"]), Some(3));
    assert_eq!(code(&["knockout", "NoSuchCircuit"]), Some(3));
    assert_eq!(code(&["attn", "--heads", "(12, 0)", "--synthetic-model", "1"]), Some(3));
}
