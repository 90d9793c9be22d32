//! Command-line experiment harness. Subcommands generate or ingest a
//! problem, batch solver runs over seeds, and emit machine-readable
//! artifacts (trace CSVs, factor files, JSON summaries) for external
//! plotting. Exit codes: 0 completed, 1 input or configuration error,
//! 2 verification failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::core::{model_matrix, ModelShape, ObservedMatrix};
use crate::data::{
    self, edm, edmc_relative_error, embed_from_theta, gen_points, gen_relu_sampling, mad,
    observe_below, tsm_similarity, PointCloud, PointMode, DEFAULT_CLUSTER_SIZES,
};
use crate::error::{Error, Result};
use crate::solvers::{
    init_factors, solve, tsvd_baseline, IterRecord, Method, SolveReport, SolverConfig,
    SolverState,
};
use crate::theory;

const OUT_DIR_ENV: &str = "RMD_OUT_DIR";
pub const TRACE_HEADER: &str = "iter,gamma,alpha,delta,accepted,elapsed_s";

#[derive(Parser)]
#[command(name = "rmd", version, about = "ReLU matrix decomposition toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run solvers on a generated or ingested matrix
    Solve(SolveArgs),
    /// Distance-matrix completion from thresholded observations
    Edmc(EdmcArgs),
    /// Compress a sparse matrix and compare against the TSVD baseline
    Compress(CompressArgs),
    /// Embed points from a thresholded similarity matrix
    Embed(EmbedArgs),
    /// Run the built-in oracle checks
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// Stopping tolerance on the relative residual
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration budget
    #[arg(long)]
    maxit: Option<usize>,
    /// Wall-clock budget in seconds, checked between iterations
    #[arg(long = "time-limit")]
    time_limit: Option<f64>,
    /// Extrapolation cap
    #[arg(long = "alpha-bar")]
    alpha_bar: Option<f64>,
    /// Initial extrapolation increment
    #[arg(long)]
    mu: Option<f64>,
    /// Slow-decrease threshold triggering alpha growth
    #[arg(long = "delta-bar")]
    delta_bar: Option<f64>,
    /// Comma-separated methods: bcd, ebcd, naive
    #[arg(long)]
    method: Option<String>,
    /// Seed list: "3", "1,2,7", or "1..5" (inclusive)
    #[arg(long, alias = "seed")]
    seeds: Option<String>,
    /// Output directory (also settable via RMD_OUT_DIR)
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Generator spec, e.g. relu:m=200,n=200,r=10,sigma=0
    #[arg(long)]
    gen: Option<String>,
    /// Input matrix (.mtx Matrix Market or .csv dense)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Factorization rank (defaults to the generator's r)
    #[arg(long)]
    rank: Option<usize>,
    #[command(flatten)]
    flags: CommonFlags,
}

#[derive(Args)]
struct EdmcArgs {
    /// Point layout: uniform or clustered
    #[arg(long, default_value = "clustered")]
    mode: String,
    /// Comma-separated observed fractions in (0, 1]
    #[arg(long, default_value = "0.5")]
    frac: String,
    /// Factorization rank
    #[arg(long, default_value_t = 5)]
    rank: usize,
    /// Point count for uniform mode (clustered mode is 4x30 + 2x40)
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[command(flatten)]
    flags: CommonFlags,
}

#[derive(Args)]
struct CompressArgs {
    /// Input matrix (.mtx or .csv)
    #[arg(long)]
    input: PathBuf,
    /// Storage compression ratio
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[command(flatten)]
    flags: CommonFlags,
}

#[derive(Args)]
struct EmbedArgs {
    /// Dense CSV of points, one row per point
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generate this many uniform points instead of reading a file
    #[arg(long)]
    points: Option<usize>,
    /// Similarity threshold in (0, 1)
    #[arg(long)]
    tau: f64,
    /// Comma-separated rank sweep, e.g. 2,4,8
    #[arg(long)]
    rank: String,
    #[command(flatten)]
    flags: CommonFlags,
}

#[derive(Args)]
struct VerifyArgs {
    /// Emit results as JSON instead of a table
    #[arg(long)]
    json: bool,
}

/// Values accepted from a JSON config file; any field a flag also sets is
/// overridden by the flag.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    tol: Option<f64>,
    maxit: Option<usize>,
    time_limit: Option<f64>,
    alpha_bar: Option<f64>,
    mu: Option<f64>,
    delta_bar: Option<f64>,
    rank: Option<usize>,
    method: Option<String>,
    seeds: Option<String>,
    out: Option<PathBuf>,
}

/// Fully resolved run parameters shared by all solver-backed commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub tol: f64,
    pub maxit: usize,
    pub time_limit: Option<f64>,
    pub alpha_bar: f64,
    pub mu0: f64,
    pub delta_bar: f64,
    pub rank: Option<usize>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("at least one method is required".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &s in &self.seeds {
            if !seen.insert(s) {
                return Err(Error::InvalidArgument(format!("duplicate seed {s}")));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("at least one seed is required".into()));
        }
        Ok(())
    }

    pub fn solver_config(&self, rank: usize, seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::new(rank);
        cfg.tol = self.tol;
        cfg.maxit = self.maxit;
        cfg.time_limit = self.time_limit;
        cfg.alpha_bar = self.alpha_bar;
        cfg.mu0 = self.mu0;
        cfg.delta_bar = self.delta_bar;
        cfg.seed = seed;
        cfg
    }
}

/// Parses a seed list: a single value, a comma list, or an inclusive range
/// "a..b". Duplicates are rejected.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for tok in s.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            return Err(Error::InvalidArgument(format!("empty seed entry in '{s}'")));
        }
        if let Some((a, b)) = tok.split_once("..") {
            let lo: u64 = a
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("invalid seed '{a}'")))?;
            let hi: u64 = b
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("invalid seed '{b}'")))?;
            if hi < lo {
                return Err(Error::InvalidArgument(format!("empty seed range '{tok}'")));
            }
            seeds.extend(lo..=hi);
        } else {
            seeds.push(
                tok.parse()
                    .map_err(|_| Error::InvalidArgument(format!("invalid seed '{tok}'")))?,
            );
        }
    }
    Ok(seeds)
}

fn parse_method_list(s: &str) -> Result<Vec<Method>> {
    let mut methods = Vec::new();
    for tok in s.split(',') {
        let m: Method = tok.trim().parse()?;
        if methods.contains(&m) {
            return Err(Error::InvalidArgument(format!("method '{m}' listed twice")));
        }
        methods.push(m);
    }
    Ok(methods)
}

fn parse_frac_list(s: &str) -> Result<Vec<f64>> {
    let mut fracs = Vec::new();
    for tok in s.split(',') {
        let f: f64 = tok
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("invalid fraction '{tok}'")))?;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fraction must lie in (0, 1], got {f}"
            )));
        }
        fracs.push(f);
    }
    Ok(fracs)
}

fn parse_rank_list(s: &str) -> Result<Vec<usize>> {
    let mut ranks = Vec::new();
    for tok in s.split(',') {
        let r: usize = tok
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("invalid rank '{tok}'")))?;
        if r < 1 {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        ranks.push(r);
    }
    Ok(ranks)
}

/// A generator spec of the form "relu:m=200,n=200,r=10,sigma=0".
#[derive(Debug, Clone, PartialEq)]
pub enum GenSpec {
    Relu { m: usize, n: usize, r: usize, sigma: f64 },
}

pub fn parse_gen_spec(s: &str) -> Result<GenSpec> {
    let (name, rest) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("generator spec '{s}' missing ':'")))?;
    if name != "relu" {
        return Err(Error::InvalidArgument(format!(
            "unknown generator '{name}' (expected relu)"
        )));
    }
    let mut m = None;
    let mut n = None;
    let mut r = None;
    let mut sigma = 0.0;
    for pair in rest.split(',') {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got '{pair}'")))?;
        let parse_dim = |v: &str| -> Result<usize> {
            v.parse().map_err(|_| Error::InvalidArgument(format!("invalid value '{v}' for {k}")))
        };
        match k.trim() {
            "m" => m = Some(parse_dim(v.trim())?),
            "n" => n = Some(parse_dim(v.trim())?),
            "r" => r = Some(parse_dim(v.trim())?),
            "sigma" => {
                sigma = v.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("invalid value '{v}' for sigma"))
                })?
            }
            other => {
                return Err(Error::InvalidArgument(format!("unknown generator key '{other}'")))
            }
        }
    }
    let missing = |what: &str| Error::InvalidArgument(format!("relu generator requires {what}"));
    Ok(GenSpec::Relu {
        m: m.ok_or_else(|| missing("m"))?,
        n: n.ok_or_else(|| missing("n"))?,
        r: r.ok_or_else(|| missing("r"))?,
        sigma,
    })
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| {
                Error::InvalidArgument(format!("config file {}: {e}", p.display()))
            })
        }
    }
}

fn resolve_run_config(flags: &CommonFlags) -> Result<RunConfig> {
    let file = load_file_config(flags.config.as_deref())?;
    let methods = match flags.method.as_deref().or(file.method.as_deref()) {
        Some(s) => parse_method_list(s)?,
        None => vec![Method::Ebcd],
    };
    let seeds = match flags.seeds.as_deref().or(file.seeds.as_deref()) {
        Some(s) => parse_seed_list(s)?,
        None => vec![0],
    };
    let out_dir = flags
        .out
        .clone()
        .or(file.out)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("rmd-out"));
    let rc = RunConfig {
        methods,
        seeds,
        tol: flags.tol.or(file.tol).unwrap_or(1e-9),
        maxit: flags.maxit.or(file.maxit).unwrap_or(10_000),
        time_limit: flags.time_limit.or(file.time_limit),
        alpha_bar: flags.alpha_bar.or(file.alpha_bar).unwrap_or(4.0),
        mu0: flags.mu.or(file.mu).unwrap_or(0.3),
        delta_bar: flags.delta_bar.or(file.delta_bar).unwrap_or(0.8),
        rank: file.rank,
        out_dir,
    };
    rc.validate()?;
    Ok(rc)
}

fn to_pretty(v: &serde_json::Value) -> String {
    // Value-to-string serialization has no failure path
    serde_json::to_string_pretty(v).expect("JSON value serialization")
}

fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("bad output path {}", path.display())))?;
    let tmp = path.with_file_name(format!("{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Renders a trace as CSV with the fixed header.
pub fn trace_csv(trace: &[IterRecord]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for rec in trace {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            rec.iter, rec.gamma, rec.alpha, rec.delta, rec.accepted, rec.elapsed_s
        );
    }
    s
}

pub fn write_trace_csv(path: &Path, trace: &[IterRecord]) -> Result<()> {
    atomic_write(path, &trace_csv(trace))
}

fn write_factors_atomic(path: &Path, f: &crate::core::FactorPair) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("bad output path {}", path.display())))?;
    let tmp = path.with_file_name(format!("{}.tmp", name.to_string_lossy()));
    data::io::write_factors(&tmp, f)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn load_input(path: &Path) -> Result<ObservedMatrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mtx") => data::io::read_matrix_market(path),
        Some("csv") => ObservedMatrix::from_values(data::io::read_dense_csv(path)?),
        _ => Err(Error::InvalidArgument(format!(
            "unsupported input extension on {} (expected .mtx or .csv)",
            path.display()
        ))),
    }
}

fn report_json(report: &SolveReport, method: Method, seed: u64) -> serde_json::Value {
    json!({
        "method": method.to_string(),
        "seed": seed,
        "iterations": report.iterations(),
        "stop": report.stop.to_string(),
        "gamma": report.gamma,
        "ls_rel_error": report.ls_rel_error,
        "kkt": {
            "grad_w": report.kkt.grad_w_norm,
            "grad_h": report.kkt.grad_h_norm,
            "primal_eq": report.kkt.primal_eq,
            "primal_ineq": report.kkt.primal_ineq,
            "comp_slack": report.kkt.comp_slack,
            "dual_feas": report.kkt.dual_feas,
        },
    })
}

fn cmd_solve(args: SolveArgs) -> Result<i32> {
    let rc = resolve_run_config(&args.flags)?;
    let gen_spec = args.gen.as_deref().map(parse_gen_spec).transpose()?;
    let (fixed, source) = match (&gen_spec, &args.input) {
        (Some(_), None) => (None, args.gen.clone().unwrap_or_default()),
        (None, Some(p)) => (Some(load_input(p)?), p.display().to_string()),
        _ => {
            return Err(Error::InvalidArgument(
                "exactly one of --gen or --input is required".into(),
            ))
        }
    };
    let gen_rank = gen_spec.as_ref().map(|GenSpec::Relu { r, .. }| *r);
    let rank = args
        .rank
        .or(rc.rank)
        .or(gen_rank)
        .ok_or_else(|| Error::InvalidArgument("--rank is required for file inputs".into()))?;

    fs::create_dir_all(&rc.out_dir)?;
    let mut runs = Vec::new();
    for &seed in &rc.seeds {
        // generated problems vary with the seed; file inputs are fixed
        let generated;
        let problem = match (&fixed, &gen_spec) {
            (Some(x), _) => x,
            (None, Some(GenSpec::Relu { m, n, r, sigma })) => {
                generated = gen_relu_sampling(*m, *n, *r, *sigma, seed)?.0;
                &generated
            }
            _ => unreachable!("problem source checked above"),
        };
        for &method in &rc.methods {
            let cfg = rc.solver_config(rank, seed);
            let report = solve(problem, ModelShape::plain(), &cfg, method)?;
            let trace_name = format!("trace_{method}_seed{seed}.csv");
            let factors_name = format!("factors_{method}_seed{seed}.csv");
            write_trace_csv(&rc.out_dir.join(&trace_name), &report.trace)?;
            write_factors_atomic(&rc.out_dir.join(&factors_name), &report.factors)?;
            println!(
                "{method} seed {seed}: gamma {:.3e} after {} iterations ({})",
                report.gamma,
                report.iterations(),
                report.stop
            );
            let mut entry = report_json(&report, method, seed);
            entry["trace_file"] = json!(trace_name);
            entry["factors_file"] = json!(factors_name);
            runs.push(entry);
        }
    }
    let summary = json!({
        "command": "solve",
        "source": source,
        "rank": rank,
        "tol": rc.tol,
        "maxit": rc.maxit,
        "runs": runs,
    });
    atomic_write(&rc.out_dir.join("summary.json"), &to_pretty(&summary))?;
    Ok(0)
}

fn cluster_sizes_for(total: usize) -> Vec<usize> {
    if total == 200 {
        return DEFAULT_CLUSTER_SIZES.to_vec();
    }
    // keep six clusters, splitting the remainder over the last ones
    let base = total / 6;
    let mut sizes = vec![base; 6];
    for k in 0..(total - base * 6) {
        sizes[5 - (k % 6)] += 1;
    }
    sizes.retain(|&s| s > 0);
    sizes
}

fn cmd_edmc(args: EdmcArgs) -> Result<i32> {
    let rc = resolve_run_config(&args.flags)?;
    let mode: PointMode = args.mode.parse()?;
    let fracs = parse_frac_list(&args.frac)?;
    let rank = args.rank;
    fs::create_dir_all(&rc.out_dir)?;

    let mut table = String::from("frac,method,mean_error\n");
    let mut runs = Vec::new();
    for &frac in &fracs {
        let mut per_method: Vec<Vec<f64>> = vec![Vec::new(); rc.methods.len()];
        for &seed in &rc.seeds {
            let counts = match mode {
                PointMode::Uniform => vec![args.points],
                PointMode::Clustered => cluster_sizes_for(args.points),
            };
            let points = gen_points(mode, &counts, seed)?;
            let theta = edm(&points);
            let (x, d) = observe_below(&theta, frac)?;
            let shape = ModelShape::below_threshold(d)?;
            for (k, &method) in rc.methods.iter().enumerate() {
                let cfg = rc.solver_config(rank, seed);
                let report = solve(&x, shape, &cfg, method)?;
                let model = model_matrix(&report.factors, shape);
                let err = edmc_relative_error(&model, shape, &theta)?;
                per_method[k].push(err);
                println!(
                    "frac {frac} {method} seed {seed}: recovery error {err:.3e} ({} iterations)",
                    report.iterations()
                );
                let mut entry = report_json(&report, method, seed);
                entry["frac"] = json!(frac);
                entry["recovery_error"] = json!(err);
                runs.push(entry);
            }
        }
        for (k, method) in rc.methods.iter().enumerate() {
            let mean = per_method[k].iter().sum::<f64>() / per_method[k].len() as f64;
            let _ = writeln!(table, "{frac},{method},{mean:.16e}");
        }
    }
    atomic_write(&rc.out_dir.join("errors.csv"), &table)?;
    let summary = json!({
        "command": "edmc",
        "mode": args.mode,
        "rank": rank,
        "runs": runs,
    });
    atomic_write(&rc.out_dir.join("summary.json"), &to_pretty(&summary))?;
    Ok(0)
}

fn cmd_compress(args: CompressArgs) -> Result<i32> {
    let rc = resolve_run_config(&args.flags)?;
    let x = load_input(&args.input)?;
    let (m, n) = x.dims();
    let r = data::compression_rank(&x, args.ratio)?;
    if (r * (m + n)) as f64 > args.ratio * x.nnz() as f64 {
        eprintln!(
            "warning: rank clamped to 1; the requested compression ratio {} is not reachable",
            args.ratio
        );
    }
    fs::create_dir_all(&rc.out_dir)?;

    let seed = rc.seeds[0];
    let mut table = String::from("method,rel_error,iters\n");
    let mut runs = Vec::new();
    for &method in &rc.methods {
        let cfg = rc.solver_config(r, seed);
        let report = solve(&x, ModelShape::plain(), &cfg, method)?;
        let _ = writeln!(table, "{method},{:.16e},{}", report.ls_rel_error, report.iterations());
        println!(
            "{method}: relative error {:.3e} after {} iterations",
            report.ls_rel_error,
            report.iterations()
        );
        runs.push(report_json(&report, method, seed));
    }
    let (_, raw, relu) = tsvd_baseline(&x, r)?;
    let nx = x.norm();
    let _ = writeln!(table, "tsvd,{:.16e},0", relu / nx);
    println!("tsvd: relative error {:.3e} (clipped), {:.3e} (raw)", relu / nx, raw / nx);
    atomic_write(&rc.out_dir.join("table.csv"), &table)?;

    let summary = json!({
        "command": "compress",
        "input": args.input.display().to_string(),
        "ratio": args.ratio,
        "rank": r,
        "nnz": x.nnz(),
        "tsvd": { "raw_rel_error": raw / nx, "clipped_rel_error": relu / nx },
        "runs": runs,
    });
    atomic_write(&rc.out_dir.join("summary.json"), &to_pretty(&summary))?;
    Ok(0)
}

fn load_points(args: &EmbedArgs, seed: u64) -> Result<PointCloud> {
    match (&args.input, args.points) {
        (Some(path), None) => {
            let rows = data::io::read_dense_csv(path)?;
            let points = (0..rows.nrows())
                .map(|i| rows.row(i).transpose().clone_owned())
                .collect();
            PointCloud::new(points)
        }
        (None, Some(count)) => gen_points(PointMode::Uniform, &[count], seed),
        _ => Err(Error::InvalidArgument(
            "exactly one of --input or --points is required".into(),
        )),
    }
}

fn cmd_embed(args: EmbedArgs) -> Result<i32> {
    let rc = resolve_run_config(&args.flags)?;
    let ranks = parse_rank_list(&args.rank)?;
    fs::create_dir_all(&rc.out_dir)?;

    let mut table = String::from("rank,method,mad,avg_iter_time\n");
    let mut runs = Vec::new();
    for &r in &ranks {
        for &method in &rc.methods {
            let mut mads = Vec::new();
            let mut iter_times = Vec::new();
            for &seed in &rc.seeds {
                let points = load_points(&args, seed)?;
                let x = tsm_similarity(&points, args.tau)?;
                let run = (|| -> Result<(f64, f64)> {
                    let cfg = rc.solver_config(r, seed);
                    let report = solve(&x, ModelShape::plain(), &cfg, method)?;
                    let theta = report.factors.product();
                    let embedded = embed_from_theta(&theta, r)?;
                    let delta = mad(&points, &embedded, args.tau)?;
                    let avg = match report.trace.last() {
                        Some(last) => last.elapsed_s / report.trace.len() as f64,
                        None => 0.0,
                    };
                    runs.push({
                        let mut entry = report_json(&report, method, seed);
                        entry["rank"] = json!(r);
                        entry["mad"] = json!(delta);
                        entry
                    });
                    Ok((delta, avg))
                })();
                match run {
                    Ok((delta, avg)) => {
                        mads.push(delta);
                        iter_times.push(avg);
                    }
                    Err(e) => {
                        eprintln!("skipping rank {r} {method} seed {seed}: {e}");
                    }
                }
            }
            if mads.is_empty() {
                continue;
            }
            let mean_mad = mads.iter().sum::<f64>() / mads.len() as f64;
            let mean_time = iter_times.iter().sum::<f64>() / iter_times.len() as f64;
            let _ = writeln!(table, "{r},{method},{mean_mad:.16e},{mean_time:.16e}");
            println!("rank {r} {method}: mad {mean_mad:.3e}");
        }
    }
    atomic_write(&rc.out_dir.join("mad.csv"), &table)?;
    let summary = json!({
        "command": "embed",
        "tau": args.tau,
        "runs": runs,
    });
    atomic_write(&rc.out_dir.join("summary.json"), &to_pretty(&summary))?;
    Ok(0)
}

/// One oracle check outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match run() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult { name, passed: false, detail: format!("error: {e}") },
    }
}

/// The built-in oracle suite with fixed seeds. Each check is independent;
/// all must pass for `verify` to exit 0.
pub fn run_verify_checks() -> Vec<CheckResult> {
    use crate::core::latent_update;

    let plain = ModelShape::plain();
    let mut results = Vec::new();

    results.push(check("refit_optimality", || {
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for seed in 0..50u64 {
            let (x, _) = gen_relu_sampling(8, 8, 3, 0.0, seed)?;
            if x.norm() == 0.0 {
                continue;
            }
            let f = init_factors(&x, 3, seed + 1)?;
            let z = latent_update(&x, &f.product())?;
            for alpha in [1.0, 1.5, 2.0, 3.9] {
                let (lhs, _, gap) = theory::sigma_wh_check(&x, &z, f.w(), f.h(), alpha)?;
                worst = worst.max(gap / lhs.max(1.0));
                count += 1;
            }
        }
        Ok((count >= 200 && worst <= 1e-9, format!("max relative gap {worst:.2e} over {count} samples")))
    }));

    results.push(check("scheme_v1_v2", || {
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for seed in 0..25u64 {
            let (x, _) = gen_relu_sampling(10, 8, 3, 0.0, 100 + seed)?;
            if x.norm() == 0.0 {
                continue;
            }
            let cfg = SolverConfig::new(3);
            let st = SolverState::new(&x, plain, init_factors(&x, 3, seed)?, &cfg)?;
            if st.s_norm() == 0.0 {
                continue;
            }
            for alpha in [1.0, 1.7, 2.5, 4.0] {
                let (cand, _) = crate::solvers::ebcd_candidate(&x, plain, &st, alpha, &cfg)?;
                let v1 = theory::ebcd_step_v1(&x, plain, &st, alpha)?;
                let p2 = cand.factors().product();
                let gap = (v1.product() - &p2).norm() / p2.norm().max(1.0);
                worst = worst.max(gap);
                count += 1;
            }
        }
        Ok((count >= 100 && worst <= 1e-9, format!("max relative gap {worst:.2e} over {count} samples")))
    }));

    results.push(check("extrapolation_identity", || {
        let mut worst: f64 = 0.0;
        for seed in 0..25u64 {
            let (x, _) = gen_relu_sampling(9, 7, 3, 0.0, 200 + seed)?;
            if x.norm() == 0.0 {
                continue;
            }
            let cfg = SolverConfig::new(3);
            let st = SolverState::new(&x, plain, init_factors(&x, 3, seed)?, &cfg)?;
            for alpha in [1.0, 1.5, 3.0] {
                let gap = theory::extrapolation_identity_check(&st, alpha)?;
                let scale = theory::ebcd_step_v1(&x, plain, &st, alpha)?.w().norm();
                worst = worst.max(gap / scale.max(1.0));
            }
        }
        Ok((worst <= 1e-10, format!("max relative gap {worst:.2e}")))
    }));

    results.push(check("latent_bound", || {
        let mut count = 0;
        for seed in 0..1000u64 {
            let (x, _) = gen_relu_sampling(6, 6, 2, 0.0, 300 + seed)?;
            if x.norm() == 0.0 {
                continue;
            }
            let m1 = init_factors(&x, 2, seed)?.product();
            let m2 = init_factors(&x, 2, seed + 7)?.product();
            let z = latent_update(&x, &m1)?;
            let (_, _, holds) = theory::latent_bound_check(&x, &z, &m2)?;
            if !holds {
                return Ok((false, format!("violated at seed {seed}")));
            }
            count += 1;
        }
        Ok((count >= 900, format!("held on {count} random feasible triples")))
    }));

    results.push(check("ell_closed_form", || {
        let at_half = theory::ell(-0.5, 0.5)?;
        if (at_half - 1.25).abs() > 1e-12 {
            return Ok((false, format!("ell(-0.5, 0.5) = {at_half}, expected 1.25")));
        }
        let far = theory::ell(-1000.0, 0.5)?;
        if !(far > 0.25 && far < 0.2511) {
            return Ok((false, format!("ell(-1000, 0.5) = {far} outside (0.25, 0.2511)")));
        }
        let mut min_margin = f64::INFINITY;
        for k in 0..1000 {
            let b = -(10f64.powf(-6.0 + 12.0 * (k as f64) / 999.0));
            min_margin = min_margin.min(theory::ell(b, 0.5)? - 0.25);
        }
        Ok((min_margin > 0.0, format!("min margin above the infimum {min_margin:.2e}")))
    }));

    results.push(check("tight_instance", || {
        for v in [0.1, 1.0, 10.0] {
            let (_, err_sq) = theory::tight_rank1_theta(v, 0.5)?;
            if (err_sq - 0.25).abs() > 1e-12 {
                return Ok((false, format!("squared error {err_sq} at v = {v}, expected 0.25")));
            }
        }
        Ok((true, "squared error 0.25 for v in {0.1, 1, 10}".into()))
    }));

    results.push(check("kkt_at_convergence", || {
        let (x, _) = gen_relu_sampling(40, 40, 4, 0.0, 7)?;
        let mut cfg = SolverConfig::new(4);
        cfg.seed = 7;
        cfg.maxit = 5000;
        let report = solve(&x, plain, &cfg, Method::Ebcd)?;
        if report.gamma > 1e-9 {
            return Ok((false, format!("solver stalled at gamma {:.2e}", report.gamma)));
        }
        let k = &report.kkt;
        let bound = 1e-6 * x.norm();
        let ok = k.max_residual() <= bound
            && k.primal_eq == 0.0
            && k.primal_ineq == 0.0
            && k.comp_slack == 0.0
            && k.dual_feas >= 0.0;
        Ok((ok, format!("max residual {:.2e} against bound {bound:.2e}", k.max_residual())))
    }));

    results
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let results = run_verify_checks();
    let all_passed = results.iter().all(|r| r.passed);
    if args.json {
        let checks: Vec<_> = results
            .iter()
            .map(|r| json!({ "name": r.name, "passed": r.passed, "detail": r.detail }))
            .collect();
        println!("{}", to_pretty(&json!({ "passed": all_passed, "checks": checks })));
    } else {
        for r in &results {
            println!("{:<24} {}  {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
        }
        println!("{}", if all_passed { "all checks passed" } else { "some checks FAILED" });
    }
    Ok(if all_passed { 0 } else { 2 })
}

/// Parses arguments and runs the selected command, returning the process
/// exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Edmc(args) => cmd_edmc(args),
        Command::Compress(args) => cmd_compress(args),
        Command::Embed(args) => cmd_embed(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
