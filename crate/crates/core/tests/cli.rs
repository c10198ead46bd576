use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dynbench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynbench"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dynbench(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_run_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--agents", "6", "--ticks", "60", "--scenes", "2", "--seed", "4", "--out", "s.jsonl"]);
    assert_eq!(fs::read_to_string(d.join("s.jsonl")).unwrap().lines().count(), 2);
    let printed = ok(
        d,
        &[
            "run", "--scenes", "s.jsonl", "--predictor", "cvm", "--predictor", "noisy_cvm", "--k", "5", "--f", "8",
            "--seed", "7", "--out", "r.json", "--dump-tracks", "t.jsonl", "--format", "csv",
        ],
    );
    assert!(printed.starts_with("Model,cvm,noisy_cvm\nk,1,5\nminDynADE (m),"), "{printed}");
    assert_eq!(ok(d, &["report", "r.json", "--format", "csv"]), printed);
    for f in ["md", "txt"] {
        let a = ok(d, &["report", "r.json", "--format", f]);
        assert_eq!(a, ok(d, &["report", "r.json", "--format", f]));
    }
    let tracks = fs::read_to_string(d.join("t.jsonl")).unwrap();
    assert!(tracks.contains("-tracks"));
}

#[test]
fn ingest_eth_ucy_with_density_filter() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // frames every 10 annotation steps, two pedestrians
    let mut text = String::new();
    for i in 0..6 {
        let frame = i * 10;
        text += &format!("{frame}\t1.0\t{:.2}\t0.0\n", i as f64 * 0.5);
        text += &format!("{frame}\t2.0\t0.0\t{:.2}\n", i as f64 * 0.4);
    }
    fs::write(d.join("crowd.txt"), &text).unwrap();
    ok(d, &["ingest", "--format", "eth_ucy", "--min-concurrent", "2", "--out", "a.jsonl", "crowd.txt"]);
    let line = fs::read_to_string(d.join("a.jsonl")).unwrap();
    assert!(line.contains(r#""scene_id":"crowd""#), "{line}");
    assert!(line.contains(r#""start_tick":0"#));
    ok(d, &["ingest", "--format", "eth_ucy", "--min-concurrent", "3", "--out", "b.jsonl", "crowd.txt"]);
    assert_eq!(fs::read_to_string(d.join("b.jsonl")).unwrap(), "");
}

#[test]
fn sweep_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--agents", "6", "--ticks", "50", "--scenes", "2", "--out", "s.jsonl"]);
    fs::write(
        d.join("exp.toml"),
        "scenes = \"s.jsonl\"\nmode = \"h_ablation\"\npredictors = [\"cvm\", \"prob_cvm\"]\nh_values = [2, 4]\nk = 3\nf = 6\n",
    )
    .unwrap();
    let txt = ok(d, &["sweep", "--config", "exp.toml", "--out", "r.json"]);
    let header: Vec<&str> = txt.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(header, ["H", "2", "4", "2", "4"]);
    assert_eq!(ok(d, &["report", "r.json"]), txt);
}

#[test]
fn stdio_bridge_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--agents", "6", "--ticks", "60", "--out", "s.jsonl"]);
    let peer = format!("bridge:{} peer --model cvm", env!("CARGO_BIN_EXE_dynbench"));
    let remote = ok(d, &["run", "--scenes", "s.jsonl", "--predictor", &peer, "--format", "csv"]);
    let local = ok(d, &["run", "--scenes", "s.jsonl", "--predictor", "cvm", "--format", "csv"]);
    let body = |s: &str| s.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&remote), body(&local));
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(!dynbench(d, &["run", "--scenes", "missing.jsonl", "--predictor", "cvm"]).status.success());
    assert!(!dynbench(d, &["run", "--scenes", "x", "--predictor", "lstm"]).status.success());
    fs::write(d.join("bad.jsonl"), "{\"scene_id\": 3}\n").unwrap();
    let out = dynbench(d, &["run", "--scenes", "bad.jsonl", "--predictor", "cvm"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl"));
}
