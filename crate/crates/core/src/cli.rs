//! Command-line front end.
//!
//! `affine-regime classify|simulate|verify|floquet <scenario> [--out DIR]
//! [--seed N] [--paths P] [--horizon T]`
//!
//! The JSON report goes to stdout and to `<out>/<name>.<command>.json`.
//! Diagnostics go to stderr. Exit codes: 0 success, 1 unreadable or invalid
//! input, 2 numerical failure, 3 undecided or inconclusive, 4 inconsistent.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::criteria::{classify_with, mean_square_equiv, IntegralCriterion, Regime};
use crate::error::Error;
use crate::linalg::monodromy;
use crate::model::DriftSpec;
use crate::report::{
    ClassifyReport, FloquetReport, SimulationSummary, VerifyReport, SCHEMA_VERSION,
};
use crate::scenario::{rows_of, Scenario};
use crate::simulate::{simulate, PathEnsemble, SimConfig};
use crate::stats::{compare, ensemble_mean_sq, Agreement};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "AFFINE_REGIME_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_UNDECIDED: i32 = 3;
pub const EXIT_INCONSISTENT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "affine-regime", version, about = "Regime classification and simulation of affine SDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the almost-sure regime.
    Classify(CommonArgs),
    /// Simulate an ensemble and write the paths as CSV.
    Simulate(CommonArgs),
    /// Classify, simulate and compare.
    Verify(CommonArgs),
    /// Monodromy matrix and Floquet multiplier of a periodic drift.
    Floquet(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn input(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_INPUT, message: e.to_string() }
}

// Configuration and model-definition errors point at the input; the rest are
// numerical failures.
fn numeric(e: Error) -> Failure {
    let code = match e {
        Error::Config(_) | Error::InvalidSpec(_) => EXIT_INPUT,
        _ => EXIT_NUMERIC,
    };
    Failure { code, message: e.to_string() }
}

struct Context {
    scenario: Scenario,
    out_dir: PathBuf,
}

fn load(args: &CommonArgs) -> Result<Context, Failure> {
    let mut scenario = Scenario::load(&args.scenario).map_err(input)?;
    if args.seed.is_some() || args.paths.is_some() || args.horizon.is_some() {
        let sim = scenario
            .simulation
            .as_mut()
            .ok_or_else(|| input("--seed, --paths and --horizon need a [simulation] section"))?;
        if let Some(seed) = args.seed {
            sim.seed = seed;
        }
        if let Some(paths) = args.paths {
            sim.paths = paths;
        }
        if let Some(t) = args.horizon {
            sim.t_end = t;
        }
        scenario.validate().map_err(input)?;
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| scenario.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Context { scenario, out_dir })
}

fn emit<T: Serialize>(ctx: &Context, command: &str, report: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report).map_err(|e| numeric(Error::Config(e.to_string())))?;
    std::fs::create_dir_all(&ctx.out_dir).map_err(input)?;
    let path = ctx.out_dir.join(format!("{}.{command}.json", ctx.scenario.name));
    std::fs::write(&path, &text).map_err(|e| input(format!("cannot write {}: {e}", path.display())))?;
    info!("report written to {}", path.display());
    println!("{text}");
    Ok(())
}

fn sim_config(scenario: &Scenario) -> Result<SimConfig, Failure> {
    scenario.simulation.clone().ok_or_else(|| input("the scenario has no [simulation] section"))
}

/// Write `path_id,t,x_1..x_d,norm2` rows with 17 significant digits.
pub fn write_csv(ens: &PathEnsemble, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "path_id,t")?;
    for i in 1..=ens.d {
        write!(w, ",x_{i}")?;
    }
    writeln!(w, ",norm2")?;
    for (p, path) in ens.paths.iter().enumerate() {
        for (k, t) in ens.times.iter().enumerate() {
            write!(w, "{p},{t:.16e}")?;
            for x in ens.state(p, k) {
                write!(w, ",{x:.16e}")?;
            }
            writeln!(w, ",{:.16e}", path.norm[k])?;
        }
    }
    w.flush()
}

fn cmd_classify(ctx: &Context) -> Result<i32, Failure> {
    let s = &ctx.scenario;
    let drift = s.drift_spec().map_err(input)?;
    let sigma = s.diffusion_spec().map_err(input)?;
    let opts = s.criteria.classify_options();
    let verdict = classify_with(&sigma, &drift, &opts).map_err(numeric)?;
    let integral = IntegralCriterion::new(&sigma, s.criteria.c, opts.norm, s.criteria.t_max, s.criteria.quad_tol)
        .map_err(numeric)?;
    let integral_rulings = verdict
        .diagnostics
        .iter()
        .map(|r| integral.ruling(r.eps))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(numeric)?;
    let criteria_agree = verdict.diagnostics.iter().zip(&integral_rulings).all(|(a, b)| a.status == b.status);
    let mean_square = mean_square_equiv(&sigma).map_err(numeric)?;
    let code = if verdict.regime == Regime::Undecided { EXIT_UNDECIDED } else { EXIT_OK };
    let report = ClassifyReport {
        schema_version: SCHEMA_VERSION,
        command: "classify",
        scenario: s.name.clone(),
        verdict,
        integral_rulings,
        criteria_agree,
        mean_square,
    };
    emit(ctx, "classify", &report)?;
    Ok(code)
}

fn run_simulation(ctx: &Context) -> Result<PathEnsemble, Failure> {
    let s = &ctx.scenario;
    let cfg = sim_config(s)?;
    let drift = s.drift_spec().map_err(input)?;
    let sigma = s.diffusion_spec().map_err(input)?;
    let xi = s.initial_state().map_err(input)?;
    info!("simulating {} paths up to t = {} with step {}", cfg.paths, cfg.t_end, cfg.dt);
    simulate(&drift, &sigma, &xi, &cfg).map_err(numeric)
}

fn cmd_simulate(ctx: &Context) -> Result<i32, Failure> {
    let ens = run_simulation(ctx)?;
    std::fs::create_dir_all(&ctx.out_dir).map_err(input)?;
    let csv = ctx.out_dir.join(format!("{}.paths.csv", ctx.scenario.name));
    write_csv(&ens, &csv).map_err(|e| input(format!("cannot write {}: {e}", csv.display())))?;
    let last = ens.times.len() - 1;
    let p = ens.n_paths() as f64;
    let final_mean: Vec<f64> =
        (0..ens.d).map(|i| (0..ens.n_paths()).map(|j| ens.state(j, last)[i]).sum::<f64>() / p).collect();
    let final_variance: Vec<f64> = (0..ens.d)
        .map(|i| {
            if ens.n_paths() < 2 {
                return 0.0;
            }
            (0..ens.n_paths()).map(|j| (ens.state(j, last)[i] - final_mean[i]).powi(2)).sum::<f64>() / (p - 1.0)
        })
        .collect();
    let curve = ensemble_mean_sq(&ens);
    let report = SimulationSummary {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        scenario: ctx.scenario.name.clone(),
        csv: csv.display().to_string(),
        paths: ens.n_paths(),
        d: ens.d,
        dt: ens.dt,
        t_end: ens.t_end(),
        recorded_times: ens.times.len(),
        seeds: ens.seeds(),
        final_mean,
        final_variance,
        final_mean_sq: curve.mean[last],
        final_mean_sq_std_error: curve.std_error[last],
    };
    emit(ctx, "simulate", &report)?;
    Ok(EXIT_OK)
}

fn cmd_verify(ctx: &Context) -> Result<i32, Failure> {
    let s = &ctx.scenario;
    let drift = s.drift_spec().map_err(input)?;
    let sigma = s.diffusion_spec().map_err(input)?;
    let verdict = classify_with(&sigma, &drift, &s.criteria.classify_options()).map_err(numeric)?;
    let ens = run_simulation(ctx)?;
    let evidence = compare(&verdict, &ens, &s.stats);
    let agreement = evidence.agreement;
    let report = VerifyReport {
        schema_version: SCHEMA_VERSION,
        command: "verify",
        scenario: s.name.clone(),
        verdict,
        evidence,
        agreement,
    };
    emit(ctx, "verify", &report)?;
    Ok(match agreement {
        Agreement::Consistent => EXIT_OK,
        Agreement::Inconclusive => EXIT_UNDECIDED,
        Agreement::Inconsistent => EXIT_INCONSISTENT,
    })
}

fn cmd_floquet(ctx: &Context) -> Result<i32, Failure> {
    let s = &ctx.scenario;
    let DriftSpec::Periodic(p) = s.drift_spec().map_err(input)? else {
        return Err(input("floquet needs a periodic drift (kind = \"fourier\" or \"periodic_table\")"));
    };
    let m = monodromy(&p, s.criteria.ode_tol).map_err(numeric)?;
    let report = FloquetReport {
        schema_version: SCHEMA_VERSION,
        command: "floquet",
        scenario: s.name.clone(),
        period: p.period(),
        psi_t: rows_of(&m.psi_t),
        rho: m.rho,
        stable: m.rho < 1.0,
        ode_tolerance: m.ode_tolerance,
    };
    emit(ctx, "floquet", &report)?;
    Ok(EXIT_OK)
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (args, f): (&CommonArgs, fn(&Context) -> Result<i32, Failure>) = match &cli.command {
        Command::Classify(a) => (a, cmd_classify),
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Verify(a) => (a, cmd_verify),
        Command::Floquet(a) => (a, cmd_floquet),
    };
    match load(args).and_then(|ctx| f(&ctx)) {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            code
        }
    }
}
