use std::f64::consts::LN_2;
use std::time::Instant;

use gauss_renyi::discretization::density;
use gauss_renyi::dynamics::{histogram, l1_distance, simulate, CoinParams, RNG_ALGORITHM_ID};
use gauss_renyi::hardy_kernels::{norms_table, XI_ETA_MAX};
use gauss_renyi::markov_mod::{run_modification, SplitKind};
use gauss_renyi::spectral_bounds::{ess_radius_bound, min_quasicompact_k};
use gauss_renyi::transfer::TailPolicy;
use gauss_renyi::verify::{run_suite, tabulate, Suite};
use gauss_renyi::Error;
use serde_json::json;

use crate::manifest::{num, OutputDir};
use crate::{BoundsArgs, Cli, Command, DensityArgs, HardyArgs, ModifyArgs, SimulateArgs, SplitChoice, VerifyArgs};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_REFUSED: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

/// Density samples written per run.
const DENSITY_POINTS: usize = 1001;
/// Starting point of every simulated orbit.
const SIMULATION_X0: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// Degree of the reference density used by `simulate`.
const REFERENCE_DEGREE: usize = 32;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

fn usage(message: impl Into<String>) -> CliError {
    CliError { code: EXIT_USAGE, message: message.into() }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: EXIT_REFUSED, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { code: EXIT_REFUSED, message: format!("i/o: {e}") }
    }
}

type CmdResult = Result<u8, CliError>;

fn check_probability(p: f64) -> Result<(), CliError> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(usage(format!("--p must lie in [0, 1] (got {p})")))
    }
}

fn check_range<T: PartialOrd + std::fmt::Display>(flag: &str, v: T, lo: T, hi: T) -> Result<(), CliError> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        Err(usage(format!("{flag} must lie in [{lo}, {hi}] (got {v})")))
    }
}

pub fn run(cli: Cli) -> CmdResult {
    let started = Instant::now();
    if let Some(t) = cli.threads {
        check_range("--threads", t, 1, 1024)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| usage(format!("cannot set thread count: {e}")))?;
    }
    match &cli.command {
        Command::Density(a) => density_cmd(&cli, a, started),
        Command::Simulate(a) => simulate_cmd(&cli, a, started),
        Command::Bounds(a) => bounds_cmd(&cli, a, started),
        Command::Verify(a) => verify_cmd(&cli, a, started),
        Command::Hardy(a) => hardy_cmd(&cli, a, started),
        Command::Modify(a) => modify_cmd(&cli, a, started),
    }
}

fn density_cmd(cli: &Cli, a: &DensityArgs, started: Instant) -> CmdResult {
    check_probability(a.p)?;
    check_range("--degree", a.degree, 4, 512)?;
    check_range("--tail-n", a.tail_n, 2, 1_000_000)?;
    let policy = TailPolicy::new(a.tail_n, 2, TailPolicy::default().tol)?;
    let res = density(a.p, a.degree, &policy)?;
    let table = tabulate(&res.density, DENSITY_POINTS);
    let gauss_deviation =
        (a.p == 1.0).then(|| table.iter().map(|&(x, h)| (h - 1.0 / ((1.0 + x) * LN_2)).abs()).fold(0.0, f64::max));
    let mut out = OutputDir::create(&cli.out)?;
    let rows: Vec<Vec<String>> = table.iter().map(|&(x, h)| vec![num(x), num(h)]).collect();
    out.write_csv("density.csv", &["x", "h"], &rows)?;
    let meta = json!({
        "p": a.p,
        "degree": a.degree,
        "tail_n": a.tail_n,
        "lambda1": res.lambda1,
        "lambda2_modulus": res.lambda2,
        "residual": res.residual,
        "iterations": res.iterations,
        "integral": res.density.integral(),
        "gauss_max_deviation": gauss_deviation,
    });
    out.write_json("density.json", &meta)?;
    out.finish(started, "density", json!({"p": a.p, "degree": a.degree, "tail_n": a.tail_n}), None)?;
    println!(
        "p = {}  degree = {}  lambda_1 = {:.15}  |lambda_2| = {}",
        a.p,
        a.degree,
        res.lambda1,
        fmt_opt(res.lambda2)
    );
    println!("eigen-residual = {:e}", res.residual);
    if let Some(d) = gauss_deviation {
        println!("max deviation from 1/((1+x) log 2): {d:e}");
    }
    Ok(0)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.12}"))
}

fn simulate_cmd(cli: &Cli, a: &SimulateArgs, started: Instant) -> CmdResult {
    check_probability(a.p)?;
    check_range("--samples", a.samples, 1, 1_000_000_000)?;
    check_range("--bins", a.bins, 1, 1_000_000)?;
    let params = CoinParams::new(a.p, a.seed)?;
    let samples = simulate(&params, SIMULATION_X0, a.burn_in, a.samples)?;
    let hist = histogram(&samples, a.bins);
    let l1 = if a.p > 0.0 {
        let h = density(a.p, REFERENCE_DEGREE, &TailPolicy::default())?;
        Some(l1_distance(&hist, &h.density))
    } else {
        None
    };
    let width = 1.0 / a.bins as f64;
    let rows: Vec<Vec<String>> = hist
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![num(i as f64 * width), num((i + 1) as f64 * width), num(v)])
        .collect();
    let mut out = OutputDir::create(&cli.out)?;
    out.write_csv("simulate.csv", &["bin_left", "bin_right", "density"], &rows)?;
    let params_json = json!({
        "p": a.p, "samples": a.samples, "bins": a.bins, "seed": a.seed, "burn_in": a.burn_in, "x0": SIMULATION_X0,
    });
    out.write_json(
        "simulate.json",
        &json!({"parameters": params_json, "rng_algorithm_id": RNG_ALGORITHM_ID, "l1_to_density": l1, "reference_degree": REFERENCE_DEGREE}),
    )?;
    let manifest = out.finish(started, "simulate", params_json, Some(a.seed))?;
    println!("p = {}  samples = {}  bins = {}  seed = {}", a.p, a.samples, a.bins, a.seed);
    match l1 {
        Some(d) => println!("L1 distance to the computed density: {d:.6}"),
        None => println!("p = 0: no invariant probability density to compare against"),
    }
    println!("simulate.csv sha256 {}", manifest.outputs[0].sha256);
    Ok(0)
}

fn bounds_cmd(cli: &Cli, a: &BoundsArgs, started: Instant) -> CmdResult {
    check_probability(a.p)?;
    check_range("--k-max", a.k_max, 1, 64)?;
    let rows = (1..=a.k_max).map(|k| ess_radius_bound(a.p, k)).collect::<Result<Vec<_>, _>>()?;
    let min_k = min_quasicompact_k(a.p)?;
    let mut out = OutputDir::create(&cli.out)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.k.to_string(), num(r.zeta_value), num(r.bound), r.quasi_compact.to_string()])
        .collect();
    out.write_csv("bounds.csv", &["k", "zeta", "bound", "quasi_compact"], &csv_rows)?;
    out.write_json("bounds.json", &json!({"p": a.p, "rows": rows, "min_quasicompact_k": min_k}))?;
    out.finish(started, "bounds", json!({"p": a.p, "k_max": a.k_max}), None)?;
    println!("{:>3}  {:>20}  {:>20}  quasi_compact", "k", "zeta(2k+2)", "bound");
    for r in &rows {
        println!("{:>3}  {:>20.15}  {:>20.15}  {}", r.k, r.zeta_value, r.bound, r.quasi_compact);
    }
    println!("smallest quasi-compact k: {min_k}");
    Ok(0)
}

fn verify_cmd(cli: &Cli, a: &VerifyArgs, started: Instant) -> CmdResult {
    let suite = Suite::parse(&a.suite).map_err(|e| usage(e.to_string()))?;
    let results = run_suite(suite);
    let mut out = OutputDir::create(&cli.out)?;
    out.write_json("verify.json", &json!({"suite": suite.name(), "results": results}))?;
    out.finish(started, "verify", json!({"suite": suite.name()}), None)?;
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    Ok(if failed == 0 { 0 } else { EXIT_VERIFY })
}

fn hardy_cmd(cli: &Cli, a: &HardyArgs, started: Instant) -> CmdResult {
    check_range("--n-max", a.n_max, 1, XI_ETA_MAX)?;
    let rows = norms_table(a.n_max)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.n.to_string(), num(r.hs), num(r.trace_bound), num(r.op_bound), num(r.eta_sq), num(r.xi_sq)])
        .collect();
    let mut out = OutputDir::create(&cli.out)?;
    out.write_csv("hardy.csv", &["n", "hs", "trace_bound", "op_bound", "eta_sq", "xi_sq"], &csv_rows)?;
    out.finish(started, "hardy", json!({"n_max": a.n_max}), None)?;
    println!("wrote {} rows", rows.len());
    Ok(0)
}

fn modify_cmd(cli: &Cli, a: &ModifyArgs, started: Instant) -> CmdResult {
    check_probability(a.p)?;
    check_range("--degree", a.degree, 4, 512)?;
    let splits: &[SplitKind] = match a.split {
        SplitChoice::Banach => &[SplitKind::Banach],
        SplitChoice::Hardy => &[SplitKind::Hardy],
        SplitChoice::Both => &[SplitKind::Banach, SplitKind::Hardy],
    };
    let policy = TailPolicy::default();
    let reports = splits.iter().map(|&s| run_modification(s, a.p, a.degree, &policy)).collect::<Result<Vec<_>, _>>()?;
    let mut out = OutputDir::create(&cli.out)?;
    out.write_json("modification.json", &reports)?;
    out.finish(
        started,
        "modify",
        json!({"p": a.p, "split": format!("{:?}", a.split).to_lowercase(), "degree": a.degree}),
        None,
    )?;
    for r in &reports {
        println!(
            "{:<7} lambda_hat = {:.15}  markov residual = {:e}  |J(I-B) - I| = {:e}  lift discrepancy = {:e}",
            r.split.name(),
            r.lambda1_hat,
            r.markov_residual,
            r.resolvent_residual,
            r.lift_discrepancy
        );
    }
    Ok(0)
}
