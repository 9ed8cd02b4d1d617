//! `ncw`: scenario-driven front end for the transport distances.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid input,
//! 3 solver non-convergence.

mod report;
mod scenario;

use clap::{Parser, Subcommand};
use ncw_core::balance::Variant;
use ncw_core::solver::{self, SdpProblem, SolveReport, SolverOptions};
use ncw_core::{suites, systems};
use scenario::Scenario;
use serde_json::{json, Value};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const DEFAULT_SEED: u64 = 20_261_018;
const DEFAULT_CASES: usize = 100;

#[derive(Parser, Debug)]
#[command(name = "ncw", version, about = "Quadratic Wasserstein distances between noncommutative dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the scenario variant (plain or modular).
    #[arg(long, global = true)]
    variant: Option<Variant>,
    /// Solver stopping tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Solver iteration cap.
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,
    /// Write the result to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the randomized suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distance between the scenario's source and target systems.
    Dist { scenario: PathBuf },
    /// One distance per point of the scenario's sweep grid, as CSV.
    Sweep { scenario: PathBuf },
    /// Run property suites by name, or the suites listed in a JSON file.
    Verify {
        targets: Vec<String>,
        /// Randomized cases per suite.
        #[arg(long)]
        cases: Option<usize>,
    },
    /// Reduced distance against the augmented distance for two composites.
    Reduce { scenario: PathBuf },
}

#[derive(Debug)]
enum Failure {
    Verification(String),
    Invalid(String),
    NotConverged(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
            Failure::Invalid(m) => write!(f, "invalid input: {m}"),
            Failure::NotConverged(m) => write!(f, "solver did not converge: {m}"),
        }
    }
}

fn invalid(e: impl fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NCW_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Dist { scenario } => dist(cli, scenario),
        Command::Sweep { scenario } => sweep(cli, scenario),
        Command::Verify { targets, cases } => verify(cli, targets, *cases),
        Command::Reduce { scenario } => reduce(cli, scenario),
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::from_path(path).map_err(invalid)
}

fn options(cli: &Cli, scenario: &Scenario) -> Result<SolverOptions, Failure> {
    let mut opts = scenario.solver;
    if let Some(tol) = cli.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid("--tol must be positive"));
        }
        opts.tol = tol;
    }
    if let Some(n) = cli.max_iter {
        opts.max_iter = n;
    }
    Ok(opts)
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| invalid(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dist(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let scenario = load(path)?;
    let variant = cli.variant.unwrap_or(scenario.variant);
    let opts = options(cli, &scenario)?;
    let inst = scenario.instance(&[]).map_err(invalid)?;
    let problem = SdpProblem::new(&inst.source, &inst.target, &inst.spec, variant).map_err(invalid)?;
    let result = solver::solve(&problem, &opts).map_err(|e| Failure::NotConverged(e.to_string()))?;
    let mut doc = report::solve_json(&result);
    let extra = json!({
        "scenario": scenario.id,
        "source": scenario.source,
        "target": scenario.target,
        "variant": variant.to_string(),
        "feasible_dimension": solver::feasible_dimension(&problem),
        "constraints": report::provenance_json(&problem),
    });
    report::merge(&mut doc, extra);
    emit(cli, &report::pretty(&doc))?;
    converged(&result, "distance")
}

fn converged(r: &SolveReport, what: &str) -> Result<(), Failure> {
    if r.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "{what}: {} iterations, primal residual {:.3e}, dual residual {:.3e}",
            r.iterations, r.primal_residual, r.dual_residual
        )))
    }
}

fn sweep(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let scenario = load(path)?;
    let variant = cli.variant.unwrap_or(scenario.variant);
    let opts = options(cli, &scenario)?;
    let axes: Vec<Vec<f64>> = scenario.sweep.iter().map(|a| a.values.clone()).collect();
    let points = solver::cartesian(&axes);
    let results = solver::sweep(
        &points,
        |point| {
            let inst = scenario
                .instance(point)
                .map_err(|e| ncw_core::Error::InvalidInput(e.to_string()))?;
            SdpProblem::new(&inst.source, &inst.target, &inst.spec, variant)
        },
        &opts,
        cli.jobs.unwrap_or(0),
    );
    let names: Vec<&str> = scenario.sweep.iter().map(|a| a.param.as_str()).collect();
    let csv = report::sweep_csv(&scenario.id, &names, variant, &points, &results).map_err(invalid)?;
    emit(cli, &csv)?;
    let failed = results.iter().filter(|r| r.is_err()).count();
    let stalled = results.iter().filter(|r| matches!(r, Ok(rep) if !rep.converged)).count();
    if failed > 0 {
        return Err(invalid(format!("{failed} grid point(s) could not be evaluated; see the status column")));
    }
    if stalled > 0 {
        return Err(Failure::NotConverged(format!("{stalled} grid point(s); see the status column")));
    }
    Ok(())
}

/// Suites and their settings named by a JSON file `{"verify": {...}}`.
fn suites_from_file(path: &Path) -> Result<(Vec<String>, Option<usize>, Option<u64>), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: invalid JSON: {e}", path.display())))?;
    let v = doc.get("verify").ok_or_else(|| invalid("$.verify: missing"))?;
    let names = match v.get("suites") {
        None => suites::SUITES.iter().map(|s| s.to_string()).collect(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, s)| s.as_str().map(str::to_string).ok_or_else(|| invalid(format!("$.verify.suites[{i}]: expected a suite name"))))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(invalid("$.verify.suites: expected an array of suite names")),
    };
    let cases = v.get("cases").map(|c| c.as_u64().map(|n| n as usize).ok_or_else(|| invalid("$.verify.cases: expected an integer"))).transpose()?;
    let seed = v.get("seed").map(|s| s.as_u64().ok_or_else(|| invalid("$.verify.seed: expected an integer"))).transpose()?;
    Ok((names, cases, seed))
}

fn verify(cli: &Cli, targets: &[String], cases: Option<usize>) -> Result<(), Failure> {
    let mut jobs: Vec<(String, usize, u64)> = Vec::new();
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    if targets.is_empty() {
        jobs.extend(suites::SUITES.iter().map(|s| (s.to_string(), cases.unwrap_or(DEFAULT_CASES), seed)));
    }
    for t in targets {
        if t.ends_with(".json") {
            let (names, c, s) = suites_from_file(Path::new(t))?;
            jobs.extend(names.into_iter().map(|n| (n, cases.or(c).unwrap_or(DEFAULT_CASES), cli.seed.or(s).unwrap_or(DEFAULT_SEED))));
        } else {
            jobs.push((t.clone(), cases.unwrap_or(DEFAULT_CASES), seed));
        }
    }
    for (name, _, _) in &jobs {
        if !suites::SUITES.contains(&name.as_str()) {
            return Err(invalid(format!("unknown suite '{name}' (known: {})", suites::SUITES.join(", "))));
        }
    }
    let mut text = String::new();
    let mut failed = Vec::new();
    for (name, cases, seed) in &jobs {
        let out = suites::run(name, *seed, *cases).map_err(invalid)?;
        log::info!("{out}");
        text.push_str(&format!("{out}\n"));
        if !out.passed() {
            failed.push(name.clone());
        }
    }
    emit(cli, &text)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(failed.join(", ")))
    }
}

fn reduce(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let scenario = load(path)?;
    let variant = cli.variant.unwrap_or(scenario.variant);
    let opts = options(cli, &scenario)?;
    let inst = scenario.composite_instance(&[]).map_err(invalid)?;
    let (n_r, n_s) = inst.source.dims();
    if inst.target.dims() != (n_r, n_s) {
        return Err(invalid("source and target composites must have equal factor dimensions"));
    }
    if inst.spec.dim() != n_s {
        return Err(invalid(format!("$.cost: cost acts on the second factor and must be {n_s}x{n_s}")));
    }
    let a_r = systems::reduce_system(&inst.source, &inst.times).map_err(invalid)?;
    let b_r = systems::reduce_system(&inst.target, &inst.times).map_err(invalid)?;
    let reduced_problem = SdpProblem::new(&a_r, &b_r, &inst.spec, variant).map_err(invalid)?;
    let lifted = inst.spec.lift_to_second(n_r);
    let augmented_problem = SdpProblem::new(&systems::augment(&inst.source), &systems::augment(&inst.target), &lifted, variant).map_err(invalid)?;
    let reduced = solver::solve(&reduced_problem, &opts).map_err(|e| Failure::NotConverged(e.to_string()))?;
    let augmented = solver::solve(&augmented_problem, &opts).map_err(|e| Failure::NotConverged(e.to_string()))?;
    let doc = json!({
        "scenario": scenario.id,
        "variant": variant.to_string(),
        "times": inst.times,
        "reduced": report::solve_json(&reduced),
        "augmented": report::solve_json(&augmented),
        "slack": augmented.distance - reduced.distance,
        "inequality_holds": reduced.distance <= augmented.distance + 1e-6,
    });
    emit(cli, &report::pretty(&doc))?;
    converged(&reduced, "reduced distance")?;
    converged(&augmented, "augmented distance")
}
