//! End-to-end checks of the four subcommands through the real binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jumplab"));
    // keep ambient configuration out of the tests
    cmd.env_remove("JUMP_LLM_API_KEY")
        .env_remove("JUMP_LLM_ENDPOINT");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

#[test]
fn play_oracle_prints_perfect_success_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = bin()
        .args([
            "play",
            "--agent",
            "oracle",
            "--episodes",
            "5",
            "--seed",
            "1",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("Success Rate"), "{text}");
    assert!(text.contains("100.00%"), "{text}");
    for file in [
        "jumps.jsonl",
        "episodes.jsonl",
        "metrics.txt",
        "learning_curve.csv",
    ] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
}

#[test]
fn play_llm_without_endpoint_is_a_config_error() {
    let output = run(&["play", "--agent", "llm", "--episodes", "1"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("endpoint"), "{}", stderr(&output));
}

#[test]
fn play_rejects_invalid_flags() {
    let output = run(&["play", "--agent", "noisy:-3"]);
    assert_eq!(output.status.code(), Some(1));
    let output = run(&["play", "--episodes", "0"]);
    assert_eq!(output.status.code(), Some(1));
    let output = run(&[
        "play",
        "--agent",
        "oracle",
        "--gap-min",
        "500",
        "--gap-max",
        "400",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn play_config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("lab.conf");
    let out = dir.path().join("run");
    std::fs::write(
        &config,
        format!(
            "agent = oracle\nepisodes = 50\nseed = 2\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let output = bin()
        .args(["play", "--config"])
        .arg(&config)
        .args(["--episodes", "3"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let episodes = std::fs::read_to_string(out.join("episodes.jsonl")).unwrap();
    assert_eq!(episodes.lines().count(), 3, "flag must override the file");
}

#[test]
fn oracle_solves_the_success_case_geometry() {
    let output = run(&["oracle", "150", "280", "380", "360"]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("target_force  34.1"), "{text}");
    assert!(text.contains("min_force"), "{text}");
    assert!(text.contains("max_force"), "{text}");
}

#[test]
fn oracle_reports_unreachable_platforms() {
    let output = run(&["oracle", "150", "1700", "380", "1800"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(
        stderr(&output).contains("unreachable"),
        "{}",
        stderr(&output)
    );
}

#[test]
fn oracle_validates_platform_edges() {
    let output = run(&["oracle", "150", "360", "380", "280"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn prompt_renders_each_version_deterministically() {
    let base = [
        "prompt",
        "basic",
        "--player-x",
        "150",
        "--plat-left",
        "280",
        "--plat-top",
        "380",
        "--plat-right",
        "360",
    ];
    let output = run(&base);
    assert!(output.status.success());
    let basic = stdout(&output);
    assert!(basic.contains("only a numerical value"), "{basic}");
    assert!(basic.contains("(150, 380)"), "{basic}");

    let mut complete_args = base;
    complete_args[1] = "complete";
    let a = run(&complete_args);
    let b = run(&complete_args);
    assert!(a.status.success());
    let text = stdout(&a);
    assert!(text.contains("Common failure warnings:"), "{text}");
    assert!(text.contains("Worked examples:"), "{text}");
    assert_eq!(text, stdout(&b), "same seed must render identically");

    let output = run(&[
        "prompt",
        "bogus",
        "--player-x",
        "150",
        "--plat-left",
        "280",
        "--plat-top",
        "380",
        "--plat-right",
        "360",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn prompt_names_missing_template_path() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args([
            "prompt",
            "basic",
            "--player-x",
            "150",
            "--plat-left",
            "280",
            "--plat-top",
            "380",
            "--plat-right",
            "360",
            "--templates",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("basic.txt"), "{}", stderr(&output));
}

fn play_into(dir: &Path, extra: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.args([
        "play",
        "--agent",
        "noisy:5",
        "--episodes",
        "8",
        "--seed",
        "1",
        "--out",
    ]);
    cmd.arg(dir);
    cmd.args(extra);
    cmd.output().unwrap()
}

#[test]
fn report_reprints_the_play_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let play = play_into(&out, &[]);
    assert!(play.status.success());
    let play_text = stdout(&play);
    let table: String = play_text
        .lines()
        .take_while(|l| !l.starts_with("logs:"))
        .map(|l| format!("{l}\n"))
        .collect();

    let report = bin().arg("report").arg(&out).output().unwrap();
    assert!(report.status.success());
    assert_eq!(stdout(&report), table);
}

#[test]
fn report_cites_the_malformed_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let play = play_into(&out, &[]);
    assert!(play.status.success());

    let jumps_path = out.join("jumps.jsonl");
    let mut lines: Vec<String> = std::fs::read_to_string(&jumps_path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert!(lines.len() >= 8);
    let half = lines[7].len() / 2;
    lines[7].truncate(half);
    std::fs::write(&jumps_path, lines.join("\n")).unwrap();

    let report = bin().arg("report").arg(&out).output().unwrap();
    assert_eq!(report.status.code(), Some(1));
    assert!(stderr(&report).contains(":8:"), "{}", stderr(&report));
}

#[test]
fn report_on_empty_logs_names_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("jumps.jsonl"), "").unwrap();
    std::fs::write(dir.path().join("episodes.jsonl"), "").unwrap();
    let report = bin().arg("report").arg(dir.path()).output().unwrap();
    assert_eq!(report.status.code(), Some(1));
    assert!(
        stderr(&report).contains("no records"),
        "{}",
        stderr(&report)
    );
}

#[test]
fn report_on_missing_dir_is_a_runtime_error() {
    let report = bin()
        .arg("report")
        .arg("/nonexistent/surely")
        .output()
        .unwrap();
    assert_eq!(report.status.code(), Some(2));
}

#[test]
fn play_with_unreachable_llm_endpoint_exits_2_and_keeps_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let output = bin()
        .args(["play", "--agent", "llm", "--episodes", "2", "--seed", "1"])
        .args([
            "--endpoint",
            "http://127.0.0.1:9/v1/chat/completions",
            "--out",
        ])
        .arg(&out)
        .env("JUMP_LLM_API_KEY", "sk-unused")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", stderr(&output));
    assert!(
        stderr(&output).contains("unavailable"),
        "{}",
        stderr(&output)
    );
    let episodes = std::fs::read_to_string(out.join("episodes.jsonl")).unwrap();
    assert_eq!(episodes.lines().count(), 2, "aborted episodes still logged");
    assert!(episodes.contains("agent_unavailable"));
}

#[test]
fn parallel_play_matches_sequential_logs() {
    let dir = tempfile::tempdir().unwrap();
    let (seq, par) = (dir.path().join("seq"), dir.path().join("par"));
    assert!(play_into(&seq, &[]).status.success());
    assert!(play_into(&par, &["--parallel", "4"]).status.success());
    let mask = |path: &Path| -> Vec<serde_json::Value> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                for f in ["latency_ms", "duration_ms"] {
                    if v.get(f).is_some() {
                        v[f] = 0.into();
                    }
                }
                v
            })
            .collect()
    };
    assert_eq!(
        mask(&seq.join("jumps.jsonl")),
        mask(&par.join("jumps.jsonl"))
    );
    assert_eq!(
        mask(&seq.join("episodes.jsonl")),
        mask(&par.join("episodes.jsonl"))
    );
}
