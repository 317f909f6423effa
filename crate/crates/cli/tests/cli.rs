use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use lstp::checkpoint::Checkpoint;
use lstp::dialog::{DialogState, EngineOptions};
use lstp::data::UserProfile;
use lstp_cli::{chat_repl, run};
use serde_json::Value;

pub const TINY: &str = r#"{
  "gen": {"n_users": 120, "n_dialogs": 120},
  "kge": {"epochs": 30},
  "linker": {"epochs": 2},
  "ltp": {"epochs": 1, "max_len": 20},
  "stp": {"epochs": 1},
  "interactive": {"n_users": 8}
}"#;

fn lstp(args: &[&str]) -> i32 {
    run(std::iter::once("lstp").chain(args.iter().copied()))
}

struct Fixture {
    _dir: tempfile::TempDir,
    config: PathBuf,
    ck: PathBuf,
}

/// One tiny trained pipeline shared by the tests in this file.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("tiny.json");
        std::fs::write(&config, TINY).unwrap();
        let ck = dir.path().join("ck");
        let (c, o) = (config.to_str().unwrap(), ck.to_str().unwrap());
        for stage in ["gen-kg", "train-kge", "gen-corpus", "train-linker", "train-ltp", "train-stp"] {
            assert_eq!(lstp(&[stage, "--config", c, "--out", o, "--seed", "3"]), 0, "{stage}");
        }
        Fixture { _dir: dir, config, ck }
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(lstp(&["gen-kg"]), 2);
    assert_eq!(lstp(&["no-such-command"]), 2);
    assert_eq!(lstp(&["eval", "--out", "x", "--mode", "sideways"]), 2);
    assert_eq!(lstp(&["--help"]), 0);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"ltp\": {\"depth\": \"deep\"}}").unwrap();
    assert_eq!(lstp(&["gen-kg", "--config", s(&bad), "--out", s(dir.path())]), 2);
    assert_eq!(lstp(&["gen-kg", "--config", "/no/such/config.json", "--out", s(dir.path())]), 2);
}

#[test]
fn missing_artifacts_are_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lstp(&["train-kge", "--out", s(dir.path())]), 1);
    assert_eq!(lstp(&["chat", "--engine", s(dir.path())]), 1);
}

#[test]
fn every_eval_mode_writes_a_report() {
    let f = fixture();
    let out = tempfile::tempdir().unwrap();
    for mode in ["recommendation", "grounding", "generation", "interactive"] {
        assert_eq!(lstp(&["eval", "--mode", mode, "--config", s(&f.config), "--engine", s(&f.ck), "--out", s(out.path())]), 0, "{mode}");
        let report: Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("reports").join(format!("{mode}.json"))).unwrap()).unwrap();
        assert_eq!(report["mode"], mode);
        assert!(report["n"].as_u64().unwrap() > 0);
        assert!(!report["metrics"].as_object().unwrap().is_empty());
        assert!(report["config"]["run"].is_object());
        assert!(report.get("seed").is_some());
    }
    assert_eq!(lstp(&["eval", "--mode", "ablation", "--engine", s(&f.ck), "--out", s(out.path())]), 1);
    assert_eq!(lstp(&["eval", "--mode", "grounding", "--baseline", "random-grounding", "--engine", s(&f.ck), "--out", s(out.path())]), 2);
}

#[test]
fn stages_write_only_inside_out() {
    let f = fixture();
    let before: Vec<PathBuf> = walk(&f.ck);
    let out = tempfile::tempdir().unwrap();
    assert_eq!(lstp(&["train-ltp", "--config", s(&f.config), "--engine", s(&f.ck), "--out", s(out.path())]), 0);
    assert_eq!(walk(&f.ck), before);
    assert_eq!(walk(out.path()), vec![out.path().join("ltp.bin"), out.path().join("ltp.bin.json")]);
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn script(input: &str) -> (String, DialogState) {
    let engine = Checkpoint::new(&fixture().ck).load_engine(EngineOptions::default()).unwrap();
    let mut out = Vec::new();
    let state = chat_repl(&engine, DialogState::new("t", UserProfile::default()), input.as_bytes(), &mut out, true).unwrap();
    (String::from_utf8(out).unwrap(), state)
}

#[test]
fn chat_transcripts_are_reproducible() {
    let input = "hello\n\n   \ntell me about movies\n/quit\nnever read\n";
    let (a, sa) = script(input);
    let (b, sb) = script(input);
    assert_eq!(a, b);
    assert_eq!(sa.trace, sb.trace);
    assert_eq!(sa.trace.len(), 2);
    let debug_lines: Vec<&str> = a.lines().filter(|l| l.starts_with("[target=")).collect();
    assert_eq!(debug_lines.len(), 2);
    assert!(debug_lines.iter().all(|l| l.contains(" grounding=") && l.contains(" action=")));
}

#[test]
fn profile_command_seeds_the_session() {
    let f = fixture();
    let profiles = f.ck.join("corpus").join("profiles.jsonl");
    let (out, state) = script(&format!("/profile load {} u00002\nhi\n", profiles.display()));
    assert!(out.starts_with("loaded profile u00002"), "{out}");
    assert_eq!(state.profile.user_id, "u00002");
    assert!(!state.profile.interactions.is_empty());
    let (out, state) = script("/profile load /no/such/file.jsonl\n");
    assert!(out.starts_with("could not load profile"));
    assert!(state.profile.interactions.is_empty());
}

#[test]
fn chat_subcommand_writes_the_trace() {
    use std::io::Write;
    use std::process::{Command, Stdio};
    let f = fixture();
    let out = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_lstp"))
        .args(["chat", "--debug", "--engine", s(&f.ck), "--out", s(out.path())])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"hello\ntell me more\n/quit\n").unwrap();
    let output = child.wait_with_output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[target=")).count(), 2);
    let trace = std::fs::read_to_string(out.path().join(lstp_cli::TRACE_FILE)).unwrap();
    assert_eq!(trace.lines().count(), 2);
}
