use std::path::Path;
use std::process::{Command, Output};

use shapegap::ldpc::{generate_code, write_alist};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapegap")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn capacity_of_the_noiseless_channel() {
    let out = run(&["capacity", "--w0", "1", "--w1", "5", "--epsilon", "0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("capacity = 0.405685"), "{text}");
    assert!(text.starts_with("p_star = "));
    assert!(text.contains("kkt_residual = "));
}

#[test]
fn ghc_prints_sixteen_words_and_divergence() {
    let out = run(&["ghc", "--epsilon", "0.057", "--k", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 17);
    assert!(lines[0].starts_with("00 "));
    let divergence: f64 = lines[16].strip_prefix("# divergence = ").unwrap().parse().unwrap();
    assert!(divergence > 0.0 && divergence < 0.05);
}

#[test]
fn simulate_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let res = run(&[
            "simulate", "--epsilon-list", "0.03,0.02", "--mode", "bootstrap", "--code-n", "256", "--rate", "0.75", "--trials", "30",
            "--seed", "9", "--out", path(out),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        assert!(stdout(&res).starts_with("mode"));
    }
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("epsilon,code_rate,mode,trials,block_errors,p_b"));
    let eps: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(eps, ["0.0200000", "0.0300000"]);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let csv = dir.path().join("out.csv");
    std::fs::write(
        &cfg,
        format!("# sweep\nmode = uniform\nepsilon-list = 0.01\ncode-n = 256\ntrials = 40\nout = {}\n", path(&csv)),
    )
    .unwrap();
    let res = run(&["simulate", "--config", path(&cfg), "--trials", "7"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "uniform");
    assert_eq!(row[3], "7");
}

#[test]
fn alist_code_file() {
    let dir = tempfile::tempdir().unwrap();
    let alist = dir.path().join("h.alist");
    let csv = dir.path().join("out.csv");
    std::fs::write(&alist, write_alist(generate_code(256, 0.5, 4).unwrap().parity())).unwrap();
    let res = run(&[
        "simulate", "--code-file", path(&alist), "--mode", "sparse_dense", "--epsilon-list", "0.04", "--trials", "10", "--out", path(&csv),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("0.0400000,0.500000,sparse_dense,10,"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let cases: [&[&str]; 5] = [
        &["capacity"],
        &["capacity", "--epsilon", "0.1", "--bogus"],
        &["simulate", "--epsilon-list", "0.01", "--trials", "5"],
        &["simulate", "--config", path(&cfg), "--out", "x.csv"],
        &["ghc", "--epsilon", "0.7"],
    ];
    for args in cases {
        assert_eq!(run(args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.alist");
    std::fs::write(&bad, "garbage\n").unwrap();
    let csv = dir.path().join("out.csv");
    let cases: [&[&str]; 3] = [
        &["simulate", "--code-file", path(&bad), "--epsilon-list", "0.02", "--out", path(&csv)],
        &["simulate", "--code-file", "/nonexistent/h.alist", "--epsilon-list", "0.02", "--out", path(&csv)],
        &[
            "simulate", "--mode", "bootstrap", "--rate", "0.25", "--code-n", "256", "--blocks", "3", "--epsilon-list", "0.02", "--trials", "2",
            "--out", path(&csv),
        ],
    ];
    for args in cases {
        let res = run(args);
        assert_eq!(res.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&res.stderr));
    }
}
