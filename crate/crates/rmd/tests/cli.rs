//! End-to-end tests of the `rmd` binary: artifact layout, exit codes, and
//! the determinism contract on trace files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rmd-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn rmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmd")).args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Trace text with the per-row timing column removed.
fn strip_elapsed(trace: &str) -> String {
    trace
        .lines()
        .map(|l| l.rsplit_once(',').expect("csv row").0)
        .collect::<Vec<_>>()
        .join("\n")
}

fn accepted_gammas(trace: &str) -> Vec<f64> {
    trace
        .lines()
        .skip(1)
        .filter_map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            (cols[4] == "true").then(|| cols[1].parse().unwrap())
        })
        .collect()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn solve_writes_traces_factors_and_summary() {
    let dir = temp_dir("solve");
    let out = rmd(&[
        "solve",
        "--gen",
        "relu:m=40,n=40,r=4,sigma=0",
        "--method",
        "ebcd,bcd",
        "--seeds",
        "1..3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));

    let mut traces = 0;
    for method in ["ebcd", "bcd"] {
        for seed in 1..=3 {
            let trace = read(&dir.join(format!("trace_{method}_seed{seed}.csv")));
            assert!(trace.starts_with("iter,gamma,alpha,delta,accepted,elapsed_s\n"));
            let gammas = accepted_gammas(&trace);
            assert!(!gammas.is_empty());
            for pair in gammas.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "gamma increased in {method} seed {seed}");
            }
            let factors =
                rmd::data::io::read_factors(&dir.join(format!("factors_{method}_seed{seed}.csv")))
                    .unwrap();
            assert_eq!(factors.dims(), (40, 40));
            assert_eq!(factors.rank(), 4);
            traces += 1;
        }
    }
    assert_eq!(traces, 6);

    let summary: serde_json::Value = serde_json::from_str(&read(&dir.join("summary.json"))).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 6);
    for run in summary["runs"].as_array().unwrap() {
        assert!(run["gamma"].as_f64().unwrap() <= 1e-9);
        assert_eq!(run["stop"], "tol");
    }
}

#[test]
fn repeated_runs_are_byte_identical_outside_timing() {
    let args = |dir: &Path| {
        vec![
            "solve".to_string(),
            "--gen".into(),
            "relu:m=30,n=30,r=3,sigma=0.01".into(),
            "--method".into(),
            "ebcd".into(),
            "--seeds".into(),
            "5,6".into(),
            "--maxit".into(),
            "40".into(),
            "--out".into(),
            dir.to_str().unwrap().to_string(),
        ]
    };
    let d1 = temp_dir("det1");
    let d2 = temp_dir("det2");
    for d in [&d1, &d2] {
        let argv = args(d);
        let out = rmd(&argv.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        assert!(out.status.success(), "{}", stderr_of(&out));
    }
    for seed in [5, 6] {
        let name = format!("trace_ebcd_seed{seed}.csv");
        assert_eq!(
            strip_elapsed(&read(&d1.join(&name))),
            strip_elapsed(&read(&d2.join(&name))),
            "trace for seed {seed} differs between identical runs"
        );
        assert_eq!(read(&d1.join(format!("factors_ebcd_seed{seed}.csv"))),
                   read(&d2.join(format!("factors_ebcd_seed{seed}.csv"))));
    }
}

#[test]
fn unknown_method_exits_one_and_names_it() {
    let dir = temp_dir("badmethod");
    let out = rmd(&[
        "solve",
        "--gen",
        "relu:m=10,n=10,r=2",
        "--method",
        "gradient",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("gradient"));
}

#[test]
fn missing_input_file_exits_one() {
    let out = rmd(&["solve", "--input", "/nonexistent/x.mtx", "--rank", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_and_input_together_exit_one() {
    let out = rmd(&[
        "solve",
        "--gen",
        "relu:m=10,n=10,r=2",
        "--input",
        "/tmp/whatever.mtx",
        "--rank",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn rank_required_for_file_inputs() {
    let dir = temp_dir("norank");
    let path = dir.join("x.csv");
    rmd::data::io::write_dense_csv(&path, &nalgebra::DMatrix::identity(4, 4)).unwrap();
    let out = rmd(&["solve", "--input", path.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("rank"));
}

#[test]
fn verify_json_reports_all_checks_passing() {
    let out = rmd(&["verify", "--json"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 7);
}

#[test]
fn compress_clamps_rank_with_a_warning() {
    let dir = temp_dir("compress");
    let mtx = dir.join("eye.mtx");
    let mut text = String::from("%%MatrixMarket matrix coordinate real general\n64 64 64\n");
    for i in 1..=64 {
        text.push_str(&format!("{i} {i} 1.0\n"));
    }
    fs::write(&mtx, text).unwrap();
    let out = rmd(&[
        "compress",
        "--input",
        mtx.to_str().unwrap(),
        "--ratio",
        "0.5",
        "--method",
        "ebcd",
        "--maxit",
        "30",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("clamped"));
    let table = read(&dir.join("table.csv"));
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "method,rel_error,iters");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("ebcd,"));
    assert!(rows[1].starts_with("tsvd,"));
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.join("summary.json"))).unwrap();
    assert_eq!(summary["rank"], 1);
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let dir = temp_dir("config");
    let cfg = dir.join("run.json");
    fs::write(&cfg, r#"{ "maxit": 3, "method": "bcd", "seeds": "9" }"#).unwrap();
    let base = [
        "solve",
        "--gen",
        "relu:m=20,n=20,r=2,sigma=0.5",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ];
    let out = rmd(&base);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let trace = read(&dir.join("trace_bcd_seed9.csv"));
    assert_eq!(trace.lines().count(), 1 + 3);

    let mut with_flag = base.to_vec();
    with_flag.extend(["--maxit", "5"]);
    let out = rmd(&with_flag);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let trace = read(&dir.join("trace_bcd_seed9.csv"));
    assert_eq!(trace.lines().count(), 1 + 5, "flag should override the config file");
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = temp_dir("badconfig");
    let cfg = dir.join("run.json");
    fs::write(&cfg, r#"{ "maxiterations": 3 }"#).unwrap();
    let out = rmd(&[
        "solve",
        "--gen",
        "relu:m=10,n=10,r=2",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn edmc_rejects_zero_fraction() {
    let out = rmd(&["edmc", "--frac", "0", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn edmc_emits_one_row_per_frac_method_pair() {
    let dir = temp_dir("edmc");
    let out = rmd(&[
        "edmc",
        "--mode",
        "uniform",
        "--points",
        "12",
        "--frac",
        "0.5,0.9",
        "--method",
        "ebcd,bcd",
        "--seeds",
        "1",
        "--maxit",
        "60",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let table = read(&dir.join("errors.csv"));
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "frac,method,mean_error");
    assert_eq!(lines.count(), 4);
}

#[test]
fn embed_sweeps_ranks() {
    let dir = temp_dir("embed");
    let out = rmd(&[
        "embed",
        "--points",
        "10",
        "--tau",
        "0.2",
        "--rank",
        "2,4,8",
        "--maxit",
        "40",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let table = read(&dir.join("mad.csv"));
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "rank,method,mad,avg_iter_time");
    assert_eq!(lines.count(), 3);
}

#[test]
fn embed_rejects_tau_outside_unit_interval() {
    for tau in ["0", "1", "1.5"] {
        let out = rmd(&["embed", "--points", "5", "--tau", tau, "--rank", "2"]);
        assert_eq!(out.status.code(), Some(1), "tau={tau}");
    }
}

#[test]
fn nonconverged_solve_still_exits_zero() {
    let dir = temp_dir("nonconv");
    let out = rmd(&[
        "solve",
        "--gen",
        "relu:m=15,n=15,r=2,sigma=0.5",
        "--maxit",
        "4",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.join("summary.json"))).unwrap();
    assert_eq!(summary["runs"][0]["stop"], "maxit");
}

#[test]
fn help_exits_zero() {
    let out = rmd(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}
