//! End-to-end checks of the evmcfg binary: output formats, exit codes,
//! seed plumbing, and the train/eval/sweep pipeline over a tiny corpus.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn evmcfg() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_evmcfg"));
    cmd.env_remove("EVMCFG_SEED");
    cmd
}

fn write_hex(dir: &TempDir, name: &str, hex: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, hex).unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn gen_corpus(dir: &TempDir, count: usize, seed: u64) -> PathBuf {
    let path = dir.path().join("corpus.jsonl");
    let output = evmcfg()
        .args(["gen-corpus", "--count", &count.to_string(), "--seed", &seed.to_string()])
        .arg("-o")
        .arg(&path)
        .output()
        .unwrap();
    assert!(output.status.success());
    path
}

fn train_model(corpus: &Path, dir: &TempDir, epochs: usize) -> (PathBuf, String) {
    let model = dir.path().join("model.json");
    let output = evmcfg()
        .arg("train")
        .arg(corpus)
        .args(["--epochs", &epochs.to_string(), "--max-nodes", "64"])
        .arg("-o")
        .arg(&model)
        .output()
        .unwrap();
    (model, stdout_of(&output))
}

#[test]
fn missing_input_exits_with_two() {
    let output = evmcfg().args(["disasm", "no-such-file.hex"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("no-such-file.hex"));
}

#[test]
fn malformed_hex_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let input = write_hex(&dir, "bad.hex", "60zz");
    let output = evmcfg().arg("disasm").arg(&input).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("non-hex character"));
}

#[test]
fn disasm_prints_one_line_per_instruction() {
    let dir = TempDir::new().unwrap();
    let input = write_hex(&dir, "prog.hex", "0x6001600201");
    let output = evmcfg().arg("disasm").arg(&input).output().unwrap();
    let text = stdout_of(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines,
        vec!["0000: PUSH1 0x01", "0002: PUSH1 0x02", "0004: ADD"]
    );
}

#[test]
fn disasm_json_lists_offsets_and_mnemonics() {
    let dir = TempDir::new().unwrap();
    let input = write_hex(&dir, "prog.hex", "6001600201");
    let output = evmcfg().arg("disasm").arg(&input).arg("--json").output().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    let instrs = parsed.as_array().unwrap();
    assert_eq!(instrs.len(), 3);
    assert_eq!(instrs[0]["offset"], 0);
    assert_eq!(instrs[0]["opcode"], "PUSH1");
    assert_eq!(instrs[0]["immediate"], "0x01");
    assert_eq!(instrs[2]["offset"], 4);
    assert_eq!(instrs[2]["opcode"], "ADD");
    assert!(instrs[2].get("immediate").is_none());
}

#[test]
fn cfg_dot_shows_two_nodes_and_one_solid_edge() {
    let dir = TempDir::new().unwrap();
    let input = write_hex(&dir, "jump.hex", "6003565b00");
    let output = evmcfg().arg("cfg").arg(&input).output().unwrap();
    let dot = stdout_of(&output);
    assert!(dot.starts_with("digraph cfg {"));
    assert_eq!(dot.matches("[label=").count(), 2);
    assert_eq!(dot.matches(" -> ").count(), 1);
    assert!(dot.contains("b0 -> b1 [style=solid];"));
    assert!(!dot.contains("// unresolved"));
}

#[test]
fn cfg_dot_reports_unresolved_jumps_in_comments() {
    let dir = TempDir::new().unwrap();
    let input = write_hex(&dir, "bare.hex", "5600");
    let output = evmcfg().arg("cfg").arg(&input).output().unwrap();
    let dot = stdout_of(&output);
    assert!(dot.contains("// unresolved: B0 NoPrecedingPush"));
}

#[test]
fn cfg_json_uses_the_interchange_schema() {
    let dir = TempDir::new().unwrap();
    let input = write_hex(&dir, "jump.hex", "6003565b00");
    let output = evmcfg().arg("cfg").arg(&input).arg("--json").output().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(parsed["blocks"].as_array().unwrap().len(), 2);
    let edges = parsed["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 1);
    assert_eq!(edges[0]["src"], 0);
    assert_eq!(edges[0]["dst"], 1);
    assert_eq!(edges[0]["kind"], "JumpTaken");
    assert_eq!(parsed["unresolved"].as_array().unwrap().len(), 0);
}

#[test]
fn cfg_flags_conflict() {
    let dir = TempDir::new().unwrap();
    let input = write_hex(&dir, "jump.hex", "600456005b00");
    let output = evmcfg()
        .arg("cfg")
        .arg(&input)
        .args(["--dot", "--json"])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn encode_emits_the_graph_schema_without_a_label() {
    let dir = TempDir::new().unwrap();
    let input = write_hex(&dir, "jump.hex", "6003565b00");
    let output = evmcfg()
        .arg("encode")
        .arg(&input)
        .args(["--max-nodes", "4"])
        .output()
        .unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(parsed["n"], 2);
    assert_eq!(parsed["a_hat"].as_array().unwrap().len(), 2);
    assert_eq!(parsed["x"].as_array().unwrap()[0].as_array().unwrap().len(), 4);
    assert!(parsed.get("label").is_none());
}

#[test]
fn creation_bytecode_is_sectioned_before_analysis() {
    let dir = TempDir::new().unwrap();
    // Deployment prefix copies a 6-byte runtime (PUSH1 1, PUSH1 2, ADD, STOP)
    // and returns it.
    let input = write_hex(&dir, "create.hex", "600680600c6000396000f3fe600160020100");
    let output = evmcfg()
        .arg("disasm")
        .arg(&input)
        .arg("--creation")
        .output()
        .unwrap();
    let text = stdout_of(&output);
    assert_eq!(text.lines().next(), Some("0000: PUSH1 0x01"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn seed_env_is_honored_and_flags_win() {
    let out = |args: &[&str], env_seed: Option<&str>| {
        let mut cmd = evmcfg();
        if let Some(seed) = env_seed {
            cmd.env("EVMCFG_SEED", seed);
        }
        stdout_of(&cmd.args(["gen-corpus", "--count", "6"]).args(args).output().unwrap())
    };
    let flag_seven = out(&["--seed", "7"], None);
    let env_seven = out(&[], Some("7"));
    let default_forty_two = out(&[], None);
    let flag_beats_env = out(&["--seed", "42"], Some("7"));
    assert_eq!(flag_seven, env_seven);
    assert_ne!(flag_seven, default_forty_two);
    assert_eq!(flag_beats_env, default_forty_two);
}

#[test]
fn gen_corpus_lines_follow_the_record_schema() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_corpus(&dir, 10, 11);
    let text = std::fs::read_to_string(&corpus).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    for line in lines {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(record["id"].as_str().unwrap().starts_with("synth-"));
        assert!(record["bytecode"].as_str().unwrap().starts_with("0x"));
        assert!(record["label"].as_u64().unwrap() <= 1);
        assert!(matches!(
            record["origin"].as_str().unwrap(),
            "runtime" | "creation"
        ));
    }
}

#[test]
fn train_writes_a_checkpoint_and_prints_metrics() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_corpus(&dir, 40, 13);
    let (model, metrics_json) = train_model(&corpus, &dir, 30);
    let checkpoint: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert!(checkpoint.get("config").is_some());
    assert!(checkpoint.get("layers").is_some());
    assert!(checkpoint.get("readout").is_some());
    let report: serde_json::Value = serde_json::from_str(&metrics_json).unwrap();
    for key in ["tp", "fn", "fp", "tn", "accuracy", "recall", "precision", "f1", "flags"] {
        assert!(report.get(key).is_some(), "metrics missing {key}");
    }
}

#[test]
fn train_rejects_zero_layers() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_corpus(&dir, 10, 1);
    let output = evmcfg()
        .arg("train")
        .arg(&corpus)
        .args(["--layers", "0"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("1..=6"));
}

#[test]
fn trained_detector_is_perfect_on_its_own_corpus() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_corpus(&dir, 100, 5);
    let (model, _) = train_model(&corpus, &dir, 100);
    let output = evmcfg()
        .arg("eval")
        .arg(&model)
        .arg(&corpus)
        .args(["--max-nodes", "64"])
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(report["accuracy"], 1.0);
    assert_eq!(report["recall"], 1.0);
    assert_eq!(report["precision"], 1.0);
    assert_eq!(report["f1"], 1.0);
}

#[test]
fn eval_rejects_an_empty_corpus() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_corpus(&dir, 20, 3);
    let (model, _) = train_model(&corpus, &dir, 5);
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let output = evmcfg().arg("eval").arg(&model).arg(&empty).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("empty"));
}

#[test]
fn eval_surfaces_feature_width_mismatches_with_both_widths() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_corpus(&dir, 20, 3);
    let (model, _) = train_model(&corpus, &dir, 5);
    let output = evmcfg()
        .arg("eval")
        .arg(&model)
        .arg(&corpus)
        .args(["--max-nodes", "96"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("64"), "missing model width: {stderr}");
    assert!(stderr.contains("96"), "missing corpus width: {stderr}");
}

#[test]
fn sweep_layers_emits_one_row_per_depth() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_corpus(&dir, 30, 17);
    let run = || {
        let output = evmcfg()
            .arg("sweep-layers")
            .arg(&corpus)
            .args(["--layers", "1..3", "--epochs", "10", "--max-nodes", "64", "--csv"])
            .output()
            .unwrap();
        stdout_of(&output)
    };
    let first = run();
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines[0], "layers,accuracy,recall,precision,f1");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,"));
    assert!(lines[3].starts_with("3,"));
    assert_eq!(first, run());
}

#[test]
fn sweep_layers_single_depth_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_corpus(&dir, 30, 17);
    let output = evmcfg()
        .arg("sweep-layers")
        .arg(&corpus)
        .args(["--layers", "2", "--epochs", "5", "--max-nodes", "64"])
        .output()
        .unwrap();
    let table = stdout_of(&output);
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().trim_start().starts_with('2'));
}

#[test]
fn commands_do_not_mutate_their_inputs() {
    let dir = TempDir::new().unwrap();
    let corpus = gen_corpus(&dir, 20, 19);
    let before = std::fs::read(&corpus).unwrap();
    let _ = train_model(&corpus, &dir, 5);
    let output = evmcfg()
        .arg("cfg")
        .arg(write_hex(&dir, "prog.hex", "600456005b00"))
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(std::fs::read(&corpus).unwrap(), before);
}
