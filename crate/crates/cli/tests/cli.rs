use std::fs;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--set", "n_users=4", "--set", "n_files=6", "--set", "cache_size=2", "--set", "mc_samples=200",
];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_d2dcache"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend_from_slice(SMALL);
    v
}

#[test]
fn delays_file_is_reused_by_plan() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let table = table.to_str().unwrap();
    assert!(run(&with_small(&["delays", "--seed", "3", "--out", table])).status.success());
    let text = fs::read_to_string(table).unwrap();
    assert!(text.starts_with("n_users,seed,n_samples\n4,3,200\n"));

    // Same seed: estimating again or loading the table gives the same plan.
    let fresh = run(&with_small(&["plan", "--seed", "3"]));
    let loaded = run(&with_small(&["plan", "--seed", "3", "--delays", table]));
    assert!(fresh.status.success() && loaded.status.success());
    assert_eq!(fresh.stdout, loaded.stdout);
}

#[test]
fn plan_writes_side_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let phi = dir.path().join("phi.csv");
    let jsonl = dir.path().join("trace.jsonl");
    let out = run(&with_small(&[
        "plan",
        "--phi-out",
        phi.to_str().unwrap(),
        "--trace-jsonl",
        jsonl.to_str().unwrap(),
    ]));
    assert!(out.status.success());
    let phi = fs::read_to_string(phi).unwrap();
    assert_eq!(phi.lines().count(), 4);
    assert!(phi.lines().all(|l| l.split(',').filter(|&c| c == "1").count() == 2));
    assert_eq!(fs::read_to_string(jsonl).unwrap().lines().count(), 8);
    let trace = String::from_utf8(out.stdout).unwrap();
    assert!(trace.starts_with("iteration,user,file,gain,eta\n0,0,0,0,"));
    assert_eq!(trace.lines().count(), 10);
}

#[test]
fn exit_codes_follow_error_category() {
    let code = |args: &[&str]| run(args).status.code().unwrap();
    assert_eq!(code(&["plan", "--set", "n_userz=3"]), 2);
    assert_eq!(code(&["plan", "--set", "cache_size=500"]), 2);
    assert_eq!(code(&with_small(&["oracle", "--budget", "10"])), 6);
    assert_eq!(code(&with_small(&["plan", "--delays", "/nonexistent/t.csv"])), 7);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "n_users,seed,n_samples\n3,1,10\n1,2,3\n").unwrap();
    let out = run(&with_small(&["plan", "--delays", bad.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error["));
}

#[test]
fn config_file_and_override_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "n_users = 3\nn_files = 5\ncache_size = 1\nseed = 11\nmc_samples = 100\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = run(&["topology", "-c", cfg]);
    let b = run(&["topology", "-c", cfg, "--seed", "11"]);
    let c = run(&["topology", "-c", cfg, "--seed", "12"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert_eq!(String::from_utf8(a.stdout).unwrap().lines().count(), 5);
}
