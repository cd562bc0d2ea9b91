use std::path::Path;
use std::process::Command;

const SCRIPT: &str = r#"{
  "Primary Care Doctor/*": "Routine case.\n[{Radiologist}, {Pathologist}, {Pharmacist}]",
  "Radiologist/*": "Fine.\nChoice: {A}: {rest}",
  "Pathologist/*": "Fine.\nChoice: {A}: {rest}",
  "Pharmacist/*": "Fine.\nChoice: {A}: {rest}",
  "Lead Physician/*": "{\"round {{round}}\": {\"consistency\": [\"rest\"], \"conflict\": [], \"independence\": [], \"integration\": [\"rest\"]}}",
  "Safety and Ethics Reviewer/*": "Safe.\nAnswer ID: {A}: {rest}",
  "Chain-of-Thought Reviewer/*": "{\"Question\": \"q\", \"Answer\": \"A\", \"Summary of S_final^4\": \"rest\", \"Correct Answer\": \"A\", \"Initial Hypothesis\": \"h\", \"Analysis Process\": \"p\", \"Final Conclusion\": \"c\", \"Error Reflection\": \"r\"}"
}"#;

fn mdt(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mdt")).args(args).output().unwrap();
    (
        out.status.success(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn setup(dir: &Path, mode: &str) -> String {
    let data = (0..3)
        .map(|i| {
            let gold = if i == 2 { "B" } else { "A" };
            format!(r#"{{"id": "c{i}", "question": "q{i}?", "options": {{"A": "rest", "B": "surgery"}}, "answer_idx": "{gold}"}}"#)
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(dir.join("data.jsonl"), data + "\n").unwrap();
    std::fs::write(dir.join("script.json"), SCRIPT).unwrap();
    let config = dir.join(format!("{mode}.toml"));
    std::fs::write(
        &config,
        format!(
            "dataset_path = \"data.jsonl\"\ndataset_kind = \"medqa\"\nmode = \"{mode}\"\nkb_dir = \"kb\"\noutput_dir = \"out-{mode}\"\n\n[backend]\nkind = \"mock\"\nscript = \"script.json\"\n"
        ),
    )
    .unwrap();
    config.display().to_string()
}

#[test]
fn run_train_then_export_and_import() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), "train");
    let (ok, stdout, stderr) = mdt(&["run", "--config", &config]);
    assert!(ok, "{stderr}");
    let metrics: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(metrics["n_cases"], 3);
    assert_eq!(metrics["n_correct"], 2);
    assert!(dir.path().join("out-train/run_log.jsonl").exists());

    let bundle = dir.path().join("bundle.jsonl");
    let kb = dir.path().join("kb");
    let (ok, stdout, stderr) = mdt(&["kb", "export", "--kb-dir", kb.to_str().unwrap(), "--out", bundle.to_str().unwrap()]);
    assert!(ok, "{stderr}");
    assert!(stdout.contains("2 correct and 1 chain"), "{stdout}");

    let copy = dir.path().join("copy");
    let (ok, stdout, _) = mdt(&["kb", "import", "--bundle", bundle.to_str().unwrap(), "--kb-dir", copy.to_str().unwrap()]);
    assert!(ok);
    assert!(stdout.contains("2 correct and 1 chain"), "{stdout}");
    assert_eq!(
        std::fs::read(copy.join("correct.jsonl")).unwrap(),
        std::fs::read(kb.join("correct.jsonl")).unwrap()
    );
}

#[test]
fn curve_and_cross_commands() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), "test");
    let (ok, stdout, stderr) = mdt(&["curve", "--config", &config, "--checkpoint-every", "2"]);
    assert!(ok, "{stderr}");
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "cases,accuracy,correct_kb,chain_kb");
    assert_eq!(lines.len(), 3);

    let kb = dir.path().join("kb");
    let kb = kb.to_str().unwrap();
    let (ok, stdout, stderr) = mdt(&["cross", "--config-a", &config, "--config-b", &config, "--kb-a", kb, "--kb-b", kb]);
    assert!(ok, "{stderr}");
    assert_eq!(stdout.lines().count(), 7);
    assert!(stdout.contains("medqa,KB_A,"));
}

#[test]
fn bad_config_and_missing_kb_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), "test");
    let (ok, _, stderr) = mdt(&["run", "--config", &config]);
    assert!(!ok);
    assert!(stderr.contains("not readable"), "{stderr}");

    let (ok, _, _) = mdt(&["run", "--config", dir.path().join("nope.toml").to_str().unwrap()]);
    assert!(!ok);
}
