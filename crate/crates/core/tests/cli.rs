use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use expander_cs::io::{parse_signal, SignalFile};

fn run_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_expander-cs"));
    cmd.args(args).current_dir(dir).env_remove("EXPANDER_CS_BUDGET");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    run_env(dir, args, &[])
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn sketch_then_recover_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |out: Output| assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    ok(run(d, &["gen-graph", "--n", "24", "--m", "300", "--d", "12", "--seed", "4", "-o", "g.txt"]));
    ok(run(d, &["check-expansion", "--graph", "g.txt", "--s-max", "3", "--epsilon", "0.2"]));
    for (seed, algorithm) in [("1", "fast"), ("2", "majority")] {
        ok(run(d, &["gen-signal", "--n", "24", "--k", "1", "--seed", seed, "-o", "x.txt"]));
        ok(run(d, &["sketch", "--graph", "g.txt", "--signal", "x.txt", "-o", "y.txt"]));
        ok(run(d, &[
            "recover", "--graph", "g.txt", "--sketch", "y.txt", "--algorithm", algorithm, "--epsilon", "0.2", "--trace", "t.csv", "-o", "xr.txt",
        ]));
        let original = parse_signal(&fs::read_to_string(d.join("x.txt")).unwrap()).unwrap();
        let recovered = parse_signal(&fs::read_to_string(d.join("xr.txt")).unwrap()).unwrap();
        assert_eq!(original, recovered);
        let trace = fs::read_to_string(d.join("t.csv")).unwrap();
        assert!(trace.starts_with("iter,node,value,gap_support_before,gap_support_after\n1,"));
    }
}

#[test]
fn float_sketches_recover_in_floating_mode() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("g.txt"), "EXPANDER 1\n4 8 2 1\n0 1\n2 3\n4 5\n6 7\n").unwrap();
    fs::write(d.join("y.txt"), "SKETCH 1 8\n0.0\n0.0\n2.5\n2.5\n0.0\n0.0\n0.0\n0.0\n").unwrap();
    let out = run(d, &["recover", "--graph", "g.txt", "--sketch", "y.txt", "-o", "x.txt"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    match parse_signal(&fs::read_to_string(d.join("x.txt")).unwrap()).unwrap() {
        SignalFile::Float(x) => assert_eq!(x.iter().collect::<Vec<_>>(), vec![(1, 2.5)]),
        other => panic!("expected floating signal, got {other:?}"),
    }
}

#[test]
fn missing_flag_prints_usage_and_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["recover", "--graph", "g.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"));
    let out = run(dir.path(), &["sketch", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["gen-graph", "check-expansion", "sketch", "recover", "recover-robust", "bench"] {
        let out = run(dir.path(), &[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(stdout(&out).contains("Usage"), "{sub}");
    }
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn stuck_decoder_exits_one_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("g.txt"), "EXPANDER 1\n4 8 2 1\n0 1\n2 3\n4 5\n6 7\n").unwrap();
    // measurements 0 and 1 disagree, so node 0 never has a qualifying gap
    fs::write(d.join("y.txt"), "SKETCH 1 8\n3\n4\n0\n0\n0\n0\n0\n0\n").unwrap();
    let out = run(d, &["recover", "--graph", "g.txt", "--sketch", "y.txt", "--trace", "t.csv", "-o", "x.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("stuck"));
    assert!(out.stdout.is_empty());
    assert!(!d.join("x.txt").exists());
    assert!(!d.join("t.csv").exists());
}

#[test]
fn malformed_inputs_exit_two_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("g.txt"), "EXPANDER 1\n2 4 2 -\n0 1\n3\n").unwrap();
    fs::write(d.join("x.txt"), "SIGNAL 1 2\n0 1\n").unwrap();
    let out = run(d, &["sketch", "--graph", "g.txt", "--signal", "x.txt", "-o", "y.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
    assert!(!d.join("y.txt").exists());

    fs::write(d.join("g.txt"), "EXPANDER 1\n2 4 2 1\n0 1\n2 3\n").unwrap();
    fs::write(d.join("x.txt"), "SIGNAL 1 2\n0 1\ntrailing\n").unwrap();
    let out = run(d, &["sketch", "--graph", "g.txt", "--signal", "x.txt", "-o", "y.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let out = run(d, &["sketch", "--graph", "missing.txt", "--signal", "x.txt", "-o", "y.txt"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn expansion_exit_codes_and_budget_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("dup.txt"), "EXPANDER 1\n2 2 2 2\n0 1\n0 1\n").unwrap();
    let out = run(d, &["check-expansion", "--graph", "dup.txt", "--s-max", "2", "--epsilon", "0.125"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("witness 0 1"), "{}", stderr(&out));

    assert_eq!(
        run(d, &["gen-graph", "--n", "30", "--m", "60", "--d", "4", "--seed", "1", "-o", "g.txt"]).status.code(),
        Some(0)
    );
    let args = ["check-expansion", "--graph", "g.txt", "--s-max", "3", "--epsilon", "0.5"];
    let over = run_env(d, &args, &[("EXPANDER_CS_BUDGET", "100")]);
    assert_eq!(over.status.code(), Some(3), "{}", stderr(&over));
    assert!(stderr(&over).contains("4525"), "{}", stderr(&over));

    let mut sampled = args.to_vec();
    sampled.extend(["--sample", "20"]);
    let out = run_env(d, &sampled, &[("EXPANDER_CS_BUDGET", "100")]);
    assert!(stdout(&out).contains("mode sampled"), "{}", stdout(&out));

    let bad = run_env(d, &args, &[("EXPANDER_CS_BUDGET", "lots")]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn robust_recovery_reports_support_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        run(d, &["gen-graph", "--n", "64", "--m", "1024", "--d", "32", "--seed", "300", "--right-regular", "-o", "g.txt"])
            .status
            .code(),
        Some(0)
    );
    let x = "SIGNAL 1 64\n3 0.00005\n10 -1000.5\n41 999.25\n50 -0.00002\n";
    fs::write(d.join("x.txt"), x).unwrap();
    assert_eq!(run(d, &["sketch", "--graph", "g.txt", "--signal", "x.txt", "-o", "y.txt"]).status.code(), Some(0));
    let out = run(d, &[
        "recover-robust", "--graph", "g.txt", "--sketch", "y.txt", "--k", "2", "--lambda", "0.0001", "--big-l", "1000",
        "--delta", "1", "--truth", "x.txt", "-o", "v.txt",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("\n10,-,-1001,"), "{text}");
    assert!(text.contains("\n41,+,999,"), "{text}");
    assert!(text.contains("ripr_holds true"), "{text}");
    assert!(text.contains("residual_l2 "));
    assert!(d.join("v.txt").exists());

    let bad = run(d, &[
        "recover-robust", "--graph", "g.txt", "--sketch", "y.txt", "--k", "2", "--lambda", "0.0001", "--big-l", "3",
        "--delta", "1", "-o", "w.txt",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(!d.join("w.txt").exists());
}

#[test]
fn bench_writes_csv_and_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("spec.txt"), "n = 30\nm = 200\nd = 10\nk = 0, 1\nepsilon = 0.2\ntrials = 4\ndecoder = fast\n").unwrap();
    let out = run(d, &["bench", "--spec", "spec.txt", "-o", "r.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(d.join("r.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("decoder,n,m,d,k,epsilon,success_rate,iters_p50,iters_max,iters_per_k,ms_per_iter"));
    assert!(lines[1].starts_with("fast,30,200,10,0,0.2,1,0,0,0,-"));
    let out = run(d, &["bench", "--spec", "spec.txt", "--format", "markdown", "-o", "r.md"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(fs::read_to_string(d.join("r.md")).unwrap().starts_with("| decoder |"));

    fs::write(d.join("bad.txt"), "n = 30\nwhat\n").unwrap();
    let out = run(d, &["bench", "--spec", "bad.txt", "-o", "r2.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"));
}
