//! Command-line front end: `solve`, `sweep`, `validate` and `oracle`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use crate::chaos::write_coefficient_table;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::oracle::{barrier_call_mc, basket_put_linear_mc, linear_bsde_closed_form, ReferenceValue};
use crate::problems::{BlackScholesParams, ProblemParams, ProblemRegistry};
use crate::solver::{solve_with_setup, BsdeProblem, PicardSetup, SolverConfig, SolverState};
use crate::validate::{run_validation, ValidationOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "bsde-chaos", version, about = "Picard / Wiener chaos BSDE solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the problem described by a config file.
    Solve {
        config: PathBuf,
        /// Output directory, overriding the config and the environment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a solve over values of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the solver against the built-in oracles.
    Validate {
        #[arg(long)]
        fast: bool,
        /// Sample count used by every check.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = ValidationOptions::default().seed)]
        seed: u64,
    },
    /// Print a reference value.
    Oracle {
        #[arg(value_enum)]
        name: OracleName,
        /// Problem parameter as `key=value`; repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
        /// Antithetic pairs for Monte Carlo references.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    #[value(name = "M")]
    Samples,
    #[value(name = "N")]
    Steps,
    #[value(name = "p")]
    Order,
    #[value(name = "q")]
    Iterations,
}

impl Axis {
    fn label(self) -> &'static str {
        match self {
            Axis::Samples => "M",
            Axis::Steps => "N",
            Axis::Order => "p",
            Axis::Iterations => "q",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum OracleName {
    LinearTest,
    BarrierCall,
    BasketPut,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value for `{k}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Exit status for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Resource(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, out.as_deref()).map(|_| EXIT_OK),
        Command::Sweep { config, axis, values, out } => cmd_sweep(&config, axis, &values, out.as_deref()).map(|_| EXIT_OK),
        Command::Validate { fast, samples, seed } => Ok(cmd_validate(&ValidationOptions { fast, samples, seed })),
        Command::Oracle { name, params, samples, seed } => cmd_oracle(name, params, samples, seed).map(|_| EXIT_OK),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} threads: {e}")))?;
    Ok(pool.install(f))
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// `q,Y0,Z0_1..Z0_d,wall_seconds`.
pub fn write_trace_csv(state: &SolverState, mut w: impl Write) -> Result<()> {
    let zs: Vec<String> = (1..=state.dim()).map(|l| format!("Z0_{l}")).collect();
    writeln!(w, "q,Y0,{},wall_seconds", zs.join(","))?;
    for row in &state.trace {
        let z: Vec<String> = row.z0.iter().map(|&v| real(v)).collect();
        writeln!(
            w,
            "{},{},{},{}",
            row.iteration,
            real(row.y0),
            z.join(","),
            real(row.estimate_seconds + row.update_seconds)
        )?;
    }
    Ok(())
}

/// `m,j,t,Y,Z_1..Z_d` for the first `limit` samples (all if 0).
pub fn write_paths_csv(state: &SolverState, horizon: f64, limit: usize, mut w: impl Write) -> Result<()> {
    let zs: Vec<String> = (1..=state.dim()).map(|l| format!("Z_{l}")).collect();
    writeln!(w, "m,j,t,Y,{}", zs.join(","))?;
    let h = horizon / state.steps() as f64;
    let count = if limit == 0 { state.samples() } else { limit.min(state.samples()) };
    for m in 0..count {
        for (j, y) in state.y_path(m).iter().enumerate() {
            let z: Vec<String> = state.z_at(m, j).iter().map(|&v| real(v)).collect();
            writeln!(w, "{m},{j},{},{},{}", real(j as f64 * h), real(*y), z.join(","))?;
        }
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run_solve(problem: &dyn BsdeProblem, cfg: &SolverConfig, threads: usize) -> Result<(SolverState, f64)> {
    let clock = Instant::now();
    let state = with_threads(threads, || {
        let setup = PicardSetup::new(problem, cfg)?;
        solve_with_setup(problem, cfg, &setup)
    })??;
    Ok((state, clock.elapsed().as_secs_f64()))
}

/// Runs one solve and writes `trace.csv`, `summary.json` and the optional
/// `paths.csv` / `coefficients.tsv`. Returns the output directory.
pub fn cmd_solve(config_path: &Path, out: Option<&Path>) -> Result<PathBuf> {
    let run = RunConfig::load(config_path)?;
    let problem = run.build_problem(&ProblemRegistry::with_benchmarks())?;
    let cfg = run.solver_config();
    cfg.validate(problem.dim())?;
    let dir = run.output_dir(out);
    fs::create_dir_all(&dir)?;
    info!("solving {} into {}", problem.name(), dir.display());

    let (state, total) = run_solve(problem.as_ref(), &cfg, run.solver.threads)?;

    let mut w = create(&dir, "trace.csv")?;
    write_trace_csv(&state, &mut w)?;
    w.flush()?;
    let trace: Vec<_> = state
        .trace
        .iter()
        .map(|r| json!({ "q": r.iteration, "Y0": r.y0, "Z0": r.z0, "F_std": r.target_std }))
        .collect();
    let summary = json!({
        "problem": { "name": run.problem.name, "params": run.problem.params },
        "solver": cfg,
        "seed": cfg.seed,
        "Y0": state.y0(),
        "Z0": state.z0(),
        "iterations": state.iterations(),
        "trace": trace,
        "timing": {
            "panel_seconds": state.panel_seconds,
            "estimate_seconds": state.trace.iter().map(|r| r.estimate_seconds).sum::<f64>(),
            "update_seconds": state.trace.iter().map(|r| r.update_seconds).sum::<f64>(),
            "total_seconds": total,
        },
    });
    let mut w = create(&dir, "summary.json")?;
    serde_json::to_writer_pretty(&mut w, &summary).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    if run.output.paths {
        let mut w = create(&dir, "paths.csv")?;
        write_paths_csv(&state, cfg.horizon, run.output.paths_samples, &mut w)?;
        w.flush()?;
    }
    if run.output.coefficients {
        if let Some(c) = &state.coefficients {
            let mut w = create(&dir, "coefficients.tsv")?;
            write_coefficient_table(c, &mut w)?;
            w.flush()?;
        }
    }
    println!("{}: Y0 = {:.6}, Z0 = {:?}", problem.name(), state.y0(), state.z0());
    Ok(dir)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of one sweep point. The `q` axis keeps the base seed so that its
/// points reproduce the single-solve trace.
pub fn sweep_seed(base: u64, axis: Axis, value: usize) -> u64 {
    match axis {
        Axis::Iterations => base,
        _ => splitmix64(base ^ splitmix64(((axis as u64) << 56) ^ value as u64)),
    }
}

fn parse_axis_value(s: &str) -> Result<usize> {
    let t = s.trim();
    let v: f64 = t.parse().map_err(|_| Error::Config(format!("sweep value `{t}` is not a number")))?;
    if !(v >= 0.0 && v.fract() == 0.0 && v < 1e15) {
        return Err(Error::Config(format!("sweep value `{t}` is not a nonnegative integer")));
    }
    Ok(v as usize)
}

/// One solve per axis value, written to `sweep.csv`. Failing points are
/// recorded with their error and do not stop the sweep.
pub fn cmd_sweep(config_path: &Path, axis: Axis, values: &[String], out: Option<&Path>) -> Result<PathBuf> {
    let run = RunConfig::load(config_path)?;
    let problem = run.build_problem(&ProblemRegistry::with_benchmarks())?;
    let base = run.solver_config();
    let values: Vec<usize> = values.iter().map(|v| parse_axis_value(v)).collect::<Result<_>>()?;
    let dir = run.output_dir(out);
    fs::create_dir_all(&dir)?;

    let d = problem.dim();
    let mut w = create(&dir, "sweep.csv")?;
    let zs: Vec<String> = (1..=d).map(|l| format!("Z0_{l}")).collect();
    writeln!(w, "{},Y0,{},wall_seconds,seed,status", axis.label(), zs.join(","))?;
    for &v in &values {
        let mut cfg = base.clone();
        match axis {
            Axis::Samples => cfg.samples = v,
            Axis::Steps => cfg.steps = v,
            Axis::Order => cfg.order = v,
            Axis::Iterations => cfg.iterations = v,
        }
        cfg.seed = sweep_seed(base.seed, axis, v);
        let point = if cfg.iterations == 0 {
            Err(Error::Config("q must be at least 1".into()))
        } else {
            run_solve(problem.as_ref(), &cfg, run.solver.threads)
        };
        match point {
            Ok((state, secs)) => {
                let z: Vec<String> = state.z0().iter().map(|&x| real(x)).collect();
                writeln!(w, "{v},{},{},{},{},ok", real(state.y0()), z.join(","), real(secs), cfg.seed)?;
                println!("{}={v}: Y0 = {:.6}", axis.label(), state.y0());
            }
            Err(e) => {
                let blank = vec![""; d].join(",");
                let msg = e.to_string().replace([',', '\n'], ";");
                writeln!(w, "{v},,{blank},,{},error: {msg}", cfg.seed)?;
                eprintln!("{}={v}: {e}", axis.label());
            }
        }
        w.flush()?;
    }
    Ok(dir)
}

/// Prints the check table; returns the exit status.
pub fn cmd_validate(opts: &ValidationOptions) -> i32 {
    let results = run_validation(opts);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!("{} {:width$}  {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if results.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

fn oracle_value(name: OracleName, params: &ProblemParams, samples: usize, seed: u64) -> Result<ReferenceValue> {
    match name {
        OracleName::LinearTest => {
            Ok(linear_bsde_closed_form(params.get("r", 0.05), params.get("T", 1.0), params.get("xi", 1.0)))
        }
        OracleName::BarrierCall => {
            let bs = BlackScholesParams::single(params.get("S0", 1.0), params.get("r", 0.01), params.get("sigma", 0.2));
            let steps = params.get("N", 20.0);
            if steps < 1.0 || steps.fract() != 0.0 {
                return Err(Error::Config(format!("N must be a positive integer, got {steps}")));
            }
            barrier_call_mc(
                &bs,
                params.get("T", 1.0),
                steps as usize,
                params.get("K", 0.9),
                params.get("L", 0.85),
                samples,
                seed,
            )
        }
        OracleName::BasketPut => {
            let d = params.get("d", 5.0);
            if d < 1.0 || d.fract() != 0.0 {
                return Err(Error::Config(format!("d must be a positive integer, got {d}")));
            }
            let r = params.get("r", 0.02);
            let bs = BlackScholesParams::uniform(d as usize, params.get("S0", 100.0), r, r, params.get("sigma", 0.2), r);
            basket_put_linear_mc(&bs, params.get("T", 1.0), params.get("K", 95.0), params.get("rho", 0.1), samples, seed)
        }
    }
}

fn cmd_oracle(name: OracleName, params: Vec<(String, f64)>, samples: usize, seed: u64) -> Result<()> {
    let params = ProblemParams::new(params.into_iter().collect());
    let value = oracle_value(name, &params, samples, seed)?;
    params.finish(name.to_possible_value().expect("named variant").get_name())?;
    println!("{}", serde_json::to_string_pretty(&value).map_err(std::io::Error::from)?);
    Ok(())
}
