//! Command-line surface: `check`, `solve`, `verify`.
//!
//! Exit codes: 0 success, 1 configuration or file errors, 2 infeasible
//! hypotheses, 3 non-convergence, 4 verification failure.

use crate::config::{load_config, Config};
use crate::funcspace::GridFn;
use crate::hypotheses::{check_feasibility, measure_bounds, FeasibilityResult, HypothesisReport};
use crate::params::{derive_params, ContractionParams};
use crate::solver::{solve_with_log, verify, SolveDiagnostics, SolverError, SolverState, VerifyReport};
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "funceq", about = "Bounded C^n solutions of phi(phi(x)) = h(phi(f(x))) + g(x)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Cap the worker thread count (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Override the seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Omit the timestamp from JSON artifacts (for byte-identical output).
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure the hypothesis constants and check parameter feasibility.
    Check { config: PathBuf },
    /// Run the full pipeline and write the solution artifacts.
    Solve { config: PathBuf },
    /// Re-verify a solve output directory from its stored artifacts.
    Verify { dir: PathBuf },
}

pub fn run(cli: Cli) -> i32 {
    if let Some(threads) = cli.threads {
        // Ignore the error if a global pool already exists (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match cli.command {
        Command::Check { config } => cmd_check(&config, cli.seed, cli.no_timestamp),
        Command::Solve { config } => cmd_solve(&config, cli.seed, cli.no_timestamp),
        Command::Verify { dir } => cmd_verify(&dir),
    }
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn timestamp(no_timestamp: bool) -> Option<u64> {
    if no_timestamp {
        return None;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    std::fs::write(path, text + "\n").map_err(|e| format!("cannot write {}: {e}", path.display()))
}

#[derive(Serialize)]
struct CheckDoc<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    report: &'a HypothesisReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    feasibility: Option<&'a FeasibilityResult>,
}

#[derive(Serialize)]
struct ResultDoc<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    seed: u64,
    tol: f64,
    max_iter: usize,
    diagnostics: &'a SolveDiagnostics,
    verification: &'a VerifyReport,
}

fn print_condition(name: &str, lhs: f64, cmp: &str, rhs: f64, pass: bool) {
    let status = if pass { "pass" } else { "FAIL" };
    println!("  {name:<42} {lhs:>14.6e} {cmp} {rhs:<14.6e} {status}");
}

fn print_report(report: &HypothesisReport, feasibility: Option<&FeasibilityResult>, n: usize) {
    println!("measured constants on [-{w}, {w}]:", w = report.window);
    println!("  m = inf|h'| = {}", report.m);
    println!("  alpha = inf|f'| = {}", report.alpha);
    println!("  beta = max_k sup|g^(k)| = {}", report.beta);
    println!("  sup|g| = {}", report.sup_g);
    println!("conditions:");
    print_condition("inf|h'| > 1", report.m, ">", 1.0, report.m > 1.0);
    print_condition("inf|f'| > 0", report.alpha, ">", 0.0, report.alpha > 0.0);
    for v in &report.violations {
        println!("  violation: {v}");
    }
    if let Some(feas) = feasibility {
        let (m, a) = (report.safe_m(), report.safe_alpha());
        print_condition(
            "(m*alpha)^2 >= 4*beta",
            (m * a) * (m * a),
            ">=",
            4.0 * report.beta,
            feas.discriminant >= 0.0,
        );
        if let Some(l) = feas.l_candidate {
            print_condition("L < m - 1", l, "<", m - 1.0, l < m - 1.0);
            print_condition("rho_1 < m*alpha/2", l, "<", m * a / 2.0, l < m * a / 2.0);
            for k in 2..=n {
                print_condition(
                    &format!("rho_1^{k} + rho_1 < m*alpha^{k}"),
                    l.powi(k as i32) + l,
                    "<",
                    m * a.powi(k as i32),
                    l.powi(k as i32) + l < m * a.powi(k as i32),
                );
            }
        }
        for r in &feas.reasons {
            println!("  infeasible: {r}");
        }
        println!(
            "feasibility: {}",
            if feas.feasible { "feasible" } else { "infeasible" }
        );
    }
}

/// Shared head of check and solve: measure, print, judge feasibility.
fn run_check(
    cfg: &Config,
) -> Result<(HypothesisReport, Option<FeasibilityResult>), i32> {
    let problem = cfg.problem();
    let report = match measure_bounds(&problem, cfg.window, cfg.samples) {
        Ok(r) => r,
        Err(e) => return Err(fail(EXIT_CONFIG, e)),
    };
    if !report.violations.is_empty() {
        print_report(&report, None, cfg.n);
        return Ok((report, None));
    }
    let feasibility = match check_feasibility(&report, cfg.n) {
        Ok(f) => f,
        Err(e) => return Err(fail(EXIT_CONFIG, e)),
    };
    print_report(&report, Some(&feasibility), cfg.n);
    Ok((report, Some(feasibility)))
}

fn cmd_check(config_path: &Path, _seed: Option<u64>, no_timestamp: bool) -> i32 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let (report, feasibility) = match run_check(&cfg) {
        Ok(pair) => pair,
        Err(code) => return code,
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.directory) {
        return fail(EXIT_CONFIG, format!("cannot create {}: {e}", cfg.directory.display()));
    }
    let doc = CheckDoc {
        timestamp: timestamp(no_timestamp),
        report: &report,
        feasibility: feasibility.as_ref(),
    };
    if let Err(e) = write_json(&cfg.directory.join("check.json"), &doc) {
        return fail(EXIT_CONFIG, e);
    }
    match feasibility {
        Some(f) if f.feasible => EXIT_OK,
        _ => EXIT_INFEASIBLE,
    }
}

fn cmd_solve(config_path: &Path, seed: Option<u64>, no_timestamp: bool) -> i32 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let seed = seed.unwrap_or(cfg.seed);
    let (report, feasibility) = match run_check(&cfg) {
        Ok(pair) => pair,
        Err(code) => return code,
    };
    match feasibility {
        Some(f) if f.feasible => {}
        _ => return EXIT_INFEASIBLE,
    }
    let problem = cfg.problem();
    let params = match derive_params(&problem, &report, cfg.trials, seed) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_INFEASIBLE, e),
    };
    eprintln!(
        "params: L = {}, lambda_factor = {}, rho = {:?}",
        params.l, params.lambda_factor, params.rho
    );
    let result = match solve_with_log(&problem, &params, cfg.tol, cfg.max_iter, |rec| {
        eprintln!(
            "iter {:>3}: phi change {:.3e}, field changes {:?}, clamped evals {}",
            rec.iteration,
            rec.phi_change,
            rec.field_changes
                .iter()
                .map(|c| format!("{c:.3e}"))
                .collect::<Vec<_>>(),
            rec.clamp_hits
        );
    }) {
        Ok(r) => r,
        Err(e @ SolverError::NotConverged { .. }) => return fail(EXIT_NO_CONVERGENCE, e),
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let verification = match verify(
        &problem,
        &params,
        &result.state,
        Some(result.diagnostics.measured_lambda_factor),
    ) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    print_verify(&verification);

    if let Err(e) = write_artifacts(&cfg, seed, no_timestamp, &params, &result.state, &result.diagnostics, &verification) {
        return fail(EXIT_CONFIG, e);
    }
    if verification.passed {
        EXIT_OK
    } else {
        EXIT_VERIFY
    }
}

fn write_artifacts(
    cfg: &Config,
    seed: u64,
    no_timestamp: bool,
    params: &ContractionParams,
    state: &SolverState,
    diagnostics: &SolveDiagnostics,
    verification: &VerifyReport,
) -> Result<(), String> {
    let dir = &cfg.directory;
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    std::fs::write(dir.join("config.cfg"), &cfg.source_text)
        .map_err(|e| format!("cannot write config.cfg: {e}"))?;
    if cfg.formats.csv {
        state
            .phi
            .write_csv_path(dir.join("phi.csv"))
            .map_err(|e| e.to_string())?;
        for (k, field) in state.fields.iter().enumerate() {
            field
                .write_csv_path(dir.join(format!("phi_{}.csv", k + 1)))
                .map_err(|e| e.to_string())?;
        }
    }
    if cfg.formats.json {
        write_json(&dir.join("params.json"), params)?;
        let doc = ResultDoc {
            timestamp: timestamp(no_timestamp),
            seed,
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            diagnostics,
            verification,
        };
        write_json(&dir.join("result.json"), &doc)?;
    }
    Ok(())
}

fn print_verify(report: &VerifyReport) {
    println!("verification:");
    for c in &report.checks {
        print_condition(&c.name, c.value, "<=", c.bound, c.pass);
    }
    println!(
        "verification: {}",
        if report.passed { "passed" } else { "FAILED" }
    );
}

fn cmd_verify(dir: &Path) -> i32 {
    let cfg = match load_config(dir.join("config.cfg")) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let problem = cfg.problem();
    let phi = match GridFn::<f64>::read_csv_path(dir.join("phi.csv")) {
        Ok(g) => g,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let mut fields = Vec::with_capacity(cfg.n);
    for k in 1..=cfg.n {
        match GridFn::<f64>::read_csv_path(dir.join(format!("phi_{k}.csv"))) {
            Ok(g) => fields.push(g),
            Err(e) => return fail(EXIT_CONFIG, e),
        }
    }
    let params: ContractionParams = match std::fs::read_to_string(dir.join("params.json"))
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(p) => p,
        Err(e) => return fail(EXIT_CONFIG, format!("params.json: {e}")),
    };
    // The stored contraction factor is re-checked when present; the solve
    // history itself cannot be recomputed from the artifacts.
    let measured = std::fs::read_to_string(dir.join("result.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| v["diagnostics"]["measured_lambda_factor"].as_f64());
    let state = SolverState {
        phi,
        fields,
        iteration: 0,
    };
    let report = match verify(&problem, &params, &state, measured) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    print_verify(&report);
    if report.passed {
        EXIT_OK
    } else {
        EXIT_VERIFY
    }
}
