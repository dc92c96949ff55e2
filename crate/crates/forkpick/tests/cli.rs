//! End-to-end checks of the command-line interface: exit codes, JSON output
//! shape, and determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_forkpick")
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(format!("{}/tests/data/{}", env!("CARGO_MANIFEST_DIR"), name))
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn forkpick")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({}): {}",
            e,
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

#[test]
fn hybrid_rigid_weight_one_instance() {
    let out = run(&[
        "hybrid",
        "--rigid",
        data("weight1_t1.nwk").to_str().unwrap(),
        data("weight1_t2.nwk").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["optimum"], 1);
    assert_eq!(v["network_reticulations"], 1);
}

#[test]
fn check_rigid_counterexample_exits_one() {
    let out = run(&[
        "check",
        "--rigid",
        data("norigid_t1.nwk").to_str().unwrap(),
        data("norigid_t2.nwk").to_str().unwrap(),
        data("norigid_net.enwk").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["rigidly_displays"], false);
}

#[test]
fn check_weak_and_display_modes() {
    let weak = run(&[
        "check",
        "--weak",
        data("weakonly_t2.nwk").to_str().unwrap(),
        data("weakonly_net.enwk").to_str().unwrap(),
    ]);
    assert_eq!(weak.status.code(), Some(0));
    let disp = run(&[
        "check",
        "--display",
        data("weakonly_t2.nwk").to_str().unwrap(),
        data("weakonly_net.enwk").to_str().unwrap(),
    ]);
    assert_eq!(disp.status.code(), Some(1));
}

#[test]
fn validate_reports_and_exit_codes() {
    // a tree in network syntax is a valid network with no reticulations
    let dir = std::env::temp_dir().join("forkpick-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let tree_as_net = dir.join("tree_as_network.enwk");
    std::fs::write(&tree_as_net, "((a,b),(c,d));\n").unwrap();
    let out = run(&["validate", tree_as_net.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["is_valid_network"], true);
    assert_eq!(v["is_temporal"], true);
    assert_eq!(v["reticulation_count"], 0);

    // an outdegree-three vertex is reported with a witness, exit 1
    let bad = dir.join("nonbinary.enwk");
    std::fs::write(&bad, "((a,b,c),d);\n").unwrap();
    let out = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["is_valid_network"], false);
    assert!(v["witness"].is_string());

    // syntax errors exit 2
    let broken = dir.join("broken.enwk");
    std::fs::write(&broken, "((a,b);\n").unwrap();
    let out = run(&["validate", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sequence_modes_and_infeasible_exit() {
    let out = run(&[
        "sequence",
        data("weight1_t1.nwk").to_str().unwrap(),
        data("weight1_t2.nwk").to_str().unwrap(),
        "--mode",
        "cherry",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["optimum"], 1);
}

#[test]
fn construct_and_extract_round_trip() {
    let out = run(&[
        "construct",
        data("weight1_t1.nwk").to_str().unwrap(),
        data("weight1_t2.nwk").to_str().unwrap(),
        "--seq",
        data("weight1_seq.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["reticulation_count"], 1);
    let built = v["network"].as_str().unwrap();
    let reference =
        forkpick::newick::parse_network(std::fs::read_to_string(data("weight1_net.enwk")).unwrap().trim())
            .unwrap();
    assert_eq!(built, reference.canonical_form());

    let out = run(&[
        "extract",
        data("weight1_net.enwk").to_str().unwrap(),
        data("weight1_t1.nwk").to_str().unwrap(),
        data("weight1_t2.nwk").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["weight"], 1);
    assert_eq!(v["valid"], true);
}

#[test]
fn gen_thmbig_and_dot() {
    let out = run(&["gen-thmbig", "--m", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["witness_weight"], 1);

    let dot = run(&["dot", data("weight1_net.enwk").to_str().unwrap()]);
    assert_eq!(dot.status.code(), Some(0));
    let text = String::from_utf8_lossy(&dot.stdout);
    assert!(text.starts_with("digraph"));
    assert!(text.contains("color=red"));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let p1 = data("weak1rigid2_t1.nwk");
    let p2 = data("weak1rigid2_t2.nwk");
    let args = ["sequence", p1.to_str().unwrap(), p2.to_str().unwrap()];
    let a = run(&args);
    let b = run(&args);
    let strip = |out: &Output| {
        let v = stdout_json(out);
        let mut v = v;
        v["stats"]["elapsed_ms"] = serde_json::json!(0);
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn node_limit_yields_unknown_and_exit_three() {
    let out = Command::new(bin())
        .env("FORKPICK_NODE_LIMIT", "1")
        .args([
            "sequence",
            data("weakhybrid2_t1.nwk").to_str().unwrap(),
            data("weakhybrid2_t2.nwk").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let v = stdout_json(&out);
    assert_eq!(v["optimum"], "unknown");
}

#[test]
fn enumerate_count_only_mode() {
    let out = run(&["enumerate", "--labels", "a,b", "--reticulations", "1", "--count-only"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "2");
}

#[test]
fn hybrid_weak_cli_end_to_end() {
    let out = run(&[
        "hybrid",
        "--weak",
        data("weak1rigid2_t1.nwk").to_str().unwrap(),
        data("weak1rigid2_t2.nwk").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["value"], 1);
    assert_eq!(v["witness_verified"], true);
    assert!(v["witness_map_first"].is_object());
}

#[test]
fn unknown_flags_exit_two() {
    let out = run(&["hybrid", "--nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}
