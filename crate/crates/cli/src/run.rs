//! Command execution. Every command writes its JSON report (to
//! `output.json_path`, or stdout when unset) and, where it produces a profile
//! or table, a CSV at `output.csv_path`.

use plap_core::existence::assemble_certificate;
use plap_core::fdoracle::{distance_guess, fd_eigen, fd_solve, FdMesh, FdOptions, FdRhs};
use plap_core::pcalc::{eigenpair, phi_p, pi_p};
use plap_core::singular::{
    solve_general_f, solve_singular, verify_with_envelope, EnvelopeF, SolutionConstants, SolutionReport,
};
use plap_core::{solve_dirichlet, GridProfile, Interval, PExponent, PlapError, ProblemSpec, Profile, SolverConfig, Verdict};
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog;
use crate::config::{Command, RunConfig};
use crate::error::{is_input_error, CliError};
use crate::output::{fmt_f64, to_json, write_json, ProfileTable};

pub const REPORT_SCHEMA: &str = "report_v1";
pub const SWEEP_SCHEMA: &str = "sweep_v1";
/// Interior nodes of the finite-difference cross-check.
pub const ORACLE_N: usize = 400;

#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    /// One-line human summary.
    pub summary: String,
    /// The JSON report as written.
    pub json: String,
}

pub fn run(command: Command, cfg: &RunConfig, oracle: bool) -> Result<Outcome, CliError> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(CliError::Input(format!(
                "config is for '{}' but '{}' was requested",
                c.name(),
                command.name()
            )));
        }
    }
    let (code, summary, json) = match command {
        Command::SolveLinear => solve_linear(cfg, oracle)?,
        Command::SolveSingular => solve_nonlinear(cfg, None, oracle)?,
        Command::SolveF => {
            let env = cfg
                .envelope
                .ok_or_else(|| CliError::Input("solve-f needs an 'envelope' section".into()))?;
            solve_nonlinear(cfg, Some(env), oracle)?
        }
        Command::Check => check(cfg)?,
        Command::Eigen => eigen(cfg, oracle)?,
        Command::Verify => verify(cfg)?,
        Command::Sweep => sweep(cfg)?,
    };
    let text = to_json(&json)?;
    if let Some(path) = &cfg.output.json_path {
        std::fs::write(path, &text)?;
    }
    Ok(Outcome {
        exit_code: code,
        summary,
        json: text,
    })
}

type Step = (i32, String, serde_json::Value);

fn value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// `p` and `gamma` for commands that do not use `gamma` (explicit problems may omit it).
fn linear_problem(cfg: &RunConfig) -> Result<ProblemSpec, CliError> {
    let gamma = match (&cfg.problem.catalog, cfg.problem.gamma) {
        (None, None) => Some(1.0),
        (_, g) => g,
    };
    cfg.problem.resolve_with(cfg.problem.p, gamma)
}

#[derive(Serialize)]
struct OracleReport {
    n: usize,
    h: f64,
    max_diff: f64,
    tolerance: f64,
    agree: bool,
    newton_iters: usize,
    kacanov_iters: usize,
}

fn oracle_report(mesh: &FdMesh, fd: &plap_core::fdoracle::FdResult, u: &dyn Profile) -> OracleReport {
    let max_diff = mesh
        .nodes
        .iter()
        .zip(&fd.u)
        .fold(0.0f64, |m, (x, v)| m.max((v - u.value(*x)).abs()));
    let tolerance = (5.0 * mesh.h * mesh.h).max(1e-6);
    OracleReport {
        n: mesh.n,
        h: mesh.h,
        max_diff,
        tolerance,
        agree: fd.converged && max_diff <= tolerance,
        newton_iters: fd.newton_iters,
        kacanov_iters: fd.kacanov_iters,
    }
}

#[derive(Serialize)]
struct LinearReport {
    schema: &'static str,
    command: &'static str,
    omega: Interval,
    p: f64,
    grid_n: usize,
    c_h: f64,
    d_a: f64,
    d_b: f64,
    integral_m: f64,
    flux_identity_residual: f64,
    min_v: f64,
    max_v: f64,
    root_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_sup_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleReport>,
}

/// Closed forms of `S(m)` for catalog weights.
fn exact_linear(name: &str, p: f64) -> Option<fn(f64) -> f64> {
    match (name, p == 2.0) {
        ("rito-sine", true) => Some(f64::sin),
        ("rito-sin2", true) => Some(|x| x.sin().powi(2)),
        _ => None,
    }
}

fn sup_error_on(omega: Interval, nodes: usize, u: &dyn Profile, exact: &dyn Fn(f64) -> f64) -> f64 {
    (0..=nodes)
        .map(|k| omega.a() + omega.len() * k as f64 / nodes as f64)
        .fold(0.0f64, |m, x| m.max((u.value(x) - exact(x)).abs()))
}

fn solve_linear(cfg: &RunConfig, oracle: bool) -> Result<Step, CliError> {
    let spec = linear_problem(cfg)?;
    let sol = solve_dirichlet(&spec.m, spec.omega, spec.p, &cfg.solver)?;
    if let Some(path) = &cfg.output.csv_path {
        ProfileTable {
            x: &sol.grid,
            v: &sol.v,
            v_prime: &sol.v_prime,
            flux: &sol.flux,
            residual_cell: None,
        }
        .write(path)?;
    }
    let exact_sup_error = cfg
        .problem
        .catalog
        .as_deref()
        .and_then(|n| exact_linear(n, spec.p.p()))
        .map(|f| sup_error_on(spec.omega, 1000, &sol, &f));
    let oracle = if oracle {
        let mesh = FdMesh::new(spec.omega, ORACLE_N)?;
        let rhs = FdRhs::linear(&mesh, &spec.m);
        let scale = sol.v.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3) / (0.5 * spec.omega.len());
        let fd = fd_solve(&mesh, &rhs, spec.p, &distance_guess(&mesh, scale), &FdOptions::default())?;
        Some(oracle_report(&mesh, &fd, &sol))
    } else {
        None
    };
    let (d_a, d_b) = sol.boundary_fluxes();
    let report = LinearReport {
        schema: REPORT_SCHEMA,
        command: Command::SolveLinear.name(),
        omega: spec.omega,
        p: spec.p.p(),
        grid_n: cfg.solver.grid_n,
        c_h: sol.c_h,
        d_a,
        d_b,
        integral_m: spec.m.integral(),
        flux_identity_residual: sol.flux_identity_residual(&spec.m),
        min_v: sol.v.iter().cloned().fold(f64::INFINITY, f64::min),
        max_v: sol.v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        root_iterations: sol.root_iterations,
        exact_sup_error,
        oracle,
    };
    let agree = report.oracle.as_ref().is_none_or(|o| o.agree);
    let summary = format!(
        "solve-linear: c_h = {}, flux identity residual {:e}{}",
        fmt_f64(report.c_h),
        report.flux_identity_residual,
        report
            .oracle
            .as_ref()
            .map(|o| format!(", oracle diff {:e} (tol {:e})", o.max_diff, o.tolerance))
            .unwrap_or_default()
    );
    Ok((if agree { 0 } else { 2 }, summary, value(&report)))
}

#[derive(Serialize)]
struct SingularReport {
    schema: &'static str,
    command: &'static str,
    omega: Interval,
    p: f64,
    gamma: f64,
    grid_n: usize,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    envelope: Option<EnvelopeF>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pipeline: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_sup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary_values: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    audited_cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sandwich_ok: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    used_fallback: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    constants: Option<SolutionConstants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    necessary_estimate_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_sup_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleReport>,
}

impl SingularReport {
    fn empty(spec: &ProblemSpec, cfg: &SolverConfig, command: Command, envelope: Option<EnvelopeF>) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            command: command.name(),
            omega: spec.omega,
            p: spec.p.p(),
            gamma: spec.gamma,
            grid_n: cfg.grid_n,
            status: "failed",
            error: None,
            envelope,
            pipeline: None,
            converged: None,
            residual_sup: None,
            residual_l1: None,
            boundary_values: None,
            audited_cells: None,
            sandwich_ok: None,
            iterations: None,
            used_fallback: None,
            constants: None,
            necessary_estimate_gap: None,
            max_u: None,
            exact_sup_error: None,
            oracle: None,
        }
    }

    fn fill(&mut self, r: &SolutionReport) {
        self.status = if r.converged { "converged" } else { "not_converged" };
        self.pipeline = Some(r.pipeline);
        self.converged = Some(r.converged);
        self.residual_sup = Some(r.residual_sup);
        self.residual_l1 = Some(r.residual.residual_l1);
        self.boundary_values = Some(r.residual.boundary_values);
        self.audited_cells = Some(r.residual.audited_cells);
        self.sandwich_ok = Some(r.sandwich_ok);
        self.iterations = Some(r.iterations);
        self.used_fallback = Some(r.used_fallback);
        self.constants = Some(r.constants);
        self.necessary_estimate_gap = Some(r.necessary_estimate_gap);
        self.max_u = Some(r.u.v.iter().cloned().fold(0.0, f64::max));
    }
}

fn solve_nonlinear(cfg: &RunConfig, envelope: Option<EnvelopeF>, oracle: bool) -> Result<Step, CliError> {
    let spec = cfg.problem.resolve()?;
    let command = if envelope.is_some() { Command::SolveF } else { Command::SolveSingular };
    let mut report = SingularReport::empty(&spec, &cfg.solver, command, envelope);
    let result = match &envelope {
        Some(env) => solve_general_f(&spec, env, &cfg.solver),
        None => solve_singular(&spec, &cfg.solver),
    };
    let r = match result {
        Ok(r) => r,
        Err(e) if is_input_error(&e) => return Err(e.into()),
        Err(e) => {
            report.error = Some(e.to_string());
            let summary = format!("{}: no constructive solution found: {e}", command.name());
            return Ok((2, summary, value(&report)));
        }
    };
    report.fill(&r);
    if let Some(path) = &cfg.output.csv_path {
        ProfileTable {
            x: &r.u.grid,
            v: &r.u.v,
            v_prime: &r.u.v_prime,
            flux: &r.u.flux,
            residual_cell: Some(&r.residual.cell_residuals),
        }
        .write(path)?;
    }
    if envelope.is_none() {
        report.exact_sup_error = cfg
            .problem
            .catalog
            .as_deref()
            .and_then(|n| catalog::exact_solution(n, spec.p.p(), spec.gamma))
            .map(|(u, _)| sup_error_on(spec.omega, 1000, &r.u, &u));
    }
    if oracle {
        let mesh = FdMesh::new(spec.omega, ORACLE_N)?;
        let rhs = match &envelope {
            Some(env) => {
                let env = *env;
                FdRhs::nonlinear(&mesh, &spec.m, std::sync::Arc::new(move |u| env.eval_with_derivative(u)))
            }
            None => FdRhs::singular(&mesh, &spec.m, spec.gamma),
        };
        let init: Vec<f64> = mesh.nodes.iter().map(|x| r.u.value(*x).max(1e-8)).collect();
        match fd_solve(&mesh, &rhs, spec.p, &init, &FdOptions::default()) {
            Ok(fd) => report.oracle = Some(oracle_report(&mesh, &fd, &r.u)),
            Err(e) => report.error = Some(format!("oracle: {e}")),
        }
    }
    let summary = format!(
        "{}: {} via {} in {} iterations, residual_sup {:e}",
        command.name(),
        report.status,
        r.pipeline,
        r.iterations,
        r.residual_sup
    );
    Ok((if r.converged { 0 } else { 2 }, summary, value(&report)))
}

fn check(cfg: &RunConfig) -> Result<Step, CliError> {
    let spec = cfg.problem.resolve()?;
    let cert = assemble_certificate(&spec, &cfg.solver)?;
    let code = if cert.verdict == Verdict::Inconclusive { 2 } else { 0 };
    let summary = format!("check: {} ({})", verdict_name(cert.verdict), cert.verdict_reason);
    Ok((code, summary, value(&cert)))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::NonexistenceProved => "nonexistence_proved",
        Verdict::SufficientConditionMet => "sufficient_condition_met",
        Verdict::Inconclusive => "inconclusive",
    }
}

#[derive(Serialize)]
struct EigenReport {
    schema: &'static str,
    command: &'static str,
    omega: Interval,
    p: f64,
    pi_p: f64,
    lambda1: f64,
    first_integral_spread: f64,
    ode_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<EigenOracle>,
}

#[derive(Serialize)]
struct EigenOracle {
    n: usize,
    lambda: f64,
    relative_diff: f64,
    iterations: usize,
}

fn eigen(cfg: &RunConfig, oracle: bool) -> Result<Step, CliError> {
    let (omega, p) = match (&cfg.problem.catalog, cfg.problem.omega, &cfg.problem.m) {
        (None, Some(o), _) => (o, cfg.problem.p),
        (None, None, Some(m)) => (m.domain(), cfg.problem.p),
        _ => {
            let s = linear_problem(cfg)?;
            (s.omega, Some(s.p.p()))
        }
    };
    let p = PExponent::new(p.ok_or_else(|| CliError::Input("problem.p is required".into()))?)?;
    let pair = eigenpair(omega, p, cfg.solver.grid_n)?;
    if let Some(path) = &cfg.output.csv_path {
        let flux: Vec<f64> = pair.phi_prime.iter().map(|d| phi_p(*d, p)).collect();
        ProfileTable {
            x: &pair.grid,
            v: &pair.phi,
            v_prime: &pair.phi_prime,
            flux: &flux,
            residual_cell: None,
        }
        .write(path)?;
    }
    let oracle = if oracle {
        let e = fd_eigen(omega, p, ORACLE_N, &FdOptions::default())?;
        Some(EigenOracle {
            n: ORACLE_N,
            lambda: e.lambda,
            relative_diff: (e.lambda - pair.lambda1).abs() / pair.lambda1,
            iterations: e.iterations,
        })
    } else {
        None
    };
    let report = EigenReport {
        schema: REPORT_SCHEMA,
        command: Command::Eigen.name(),
        omega,
        p: p.p(),
        pi_p: pi_p(p),
        lambda1: pair.lambda1,
        first_integral_spread: pair.first_integral_spread(),
        ode_residual: pair.ode_residual(),
        oracle,
    };
    let summary = format!("eigen: lambda_1 = {}, pi_p = {}", fmt_f64(report.lambda1), fmt_f64(report.pi_p));
    Ok((0, summary, value(&report)))
}

#[derive(Serialize)]
struct VerifyReport {
    schema: &'static str,
    command: &'static str,
    omega: Interval,
    p: f64,
    gamma: f64,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    residual_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_sup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary_values: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    audited_cells: Option<usize>,
}

fn verify(cfg: &RunConfig) -> Result<Step, CliError> {
    let spec = cfg.problem.resolve()?;
    let cand = cfg
        .candidate
        .as_ref()
        .ok_or_else(|| CliError::Input("verify needs a 'candidate' section with csv_path".into()))?;
    let (x, v, d) = crate::output::read_profile(&cand.csv_path)?;
    check_uniform(&x, spec.omega)?;
    let profile = GridProfile::new(spec.omega, v, d)?;
    let env = cfg.envelope.unwrap_or_else(|| EnvelopeF::pure(spec.gamma));
    let mut report = VerifyReport {
        schema: REPORT_SCHEMA,
        command: Command::Verify.name(),
        omega: spec.omega,
        p: spec.p.p(),
        gamma: spec.gamma,
        passed: false,
        error: None,
        residual_tol: cfg.solver.residual_tol,
        residual_sup: None,
        residual_l1: None,
        boundary_values: None,
        audited_cells: None,
    };
    match verify_with_envelope(&profile, &spec, &env, &cfg.solver) {
        Ok(r) => {
            report.passed = r.residual_sup < cfg.solver.residual_tol
                && r.boundary_values.iter().all(|b| b.abs() <= cfg.solver.boundary_tol);
            report.residual_sup = Some(r.residual_sup);
            report.residual_l1 = Some(r.residual_l1);
            report.boundary_values = Some(r.boundary_values);
            report.audited_cells = Some(r.audited_cells);
            if let Some(path) = &cfg.output.csv_path {
                let (vals, slopes) = profile.sample(&r.grid);
                let flux: Vec<f64> = slopes.iter().map(|s| phi_p(*s, spec.p)).collect();
                ProfileTable {
                    x: &r.grid,
                    v: &vals,
                    v_prime: &slopes,
                    flux: &flux,
                    residual_cell: Some(&r.cell_residuals),
                }
                .write(path)?;
            }
        }
        Err(e @ PlapError::NonPositive { .. }) => report.error = Some(e.to_string()),
        Err(e) => return Err(e.into()),
    }
    let summary = format!(
        "verify: {} (residual_sup {})",
        if report.passed { "passed" } else { "failed" },
        report.residual_sup.map_or("n/a".to_string(), |r| format!("{r:e}"))
    );
    Ok((if report.passed { 0 } else { 2 }, summary, value(&report)))
}

fn check_uniform(x: &[f64], omega: Interval) -> Result<(), CliError> {
    if x.len() < 3 {
        return Err(CliError::Input("candidate profile needs at least 3 rows".into()));
    }
    let n = x.len() - 1;
    let h = omega.len() / n as f64;
    let tol = 1e-9 * omega.len();
    for (i, xi) in x.iter().enumerate() {
        if (xi - (omega.a() + i as f64 * h)).abs() > tol {
            return Err(CliError::Input(format!(
                "candidate grid is not the uniform grid of ({}, {}) with {n} cells (row {})",
                omega.a(),
                omega.b(),
                i + 2
            )));
        }
    }
    Ok(())
}

/// One `(gamma, p)` point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub p: f64,
    pub verdict: String,
    pub margin_ii: Option<f64>,
    pub converged: bool,
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    schema: &'static str,
    command: &'static str,
    rows: &'a [SweepRow],
}

fn sweep_point(cfg: &RunConfig, gamma: f64, p: f64) -> SweepRow {
    let mut row = SweepRow {
        gamma,
        p,
        verdict: "error".into(),
        margin_ii: None,
        converged: false,
        residual: None,
        note: None,
    };
    let spec = match cfg.problem.resolve_with(Some(p), Some(gamma)) {
        Ok(s) => s,
        Err(e) => {
            row.note = Some(e.to_string());
            return row;
        }
    };
    match assemble_certificate(&spec, &cfg.solver) {
        Ok(cert) => {
            row.verdict = verdict_name(cert.verdict).into();
            row.margin_ii = cert.sufficient_ii.map(|s| s.margin);
            if cert.verdict == Verdict::NonexistenceProved {
                return row;
            }
        }
        Err(e) => {
            row.note = Some(e.to_string());
            return row;
        }
    }
    match solve_singular(&spec, &cfg.solver) {
        Ok(r) => {
            row.converged = r.converged;
            row.residual = Some(r.residual_sup);
        }
        Err(e) => row.note = Some(e.to_string()),
    }
    row
}

/// Evaluate the sweep grid on `threads` workers; rows are sorted by `(gamma, p)`.
pub fn sweep_rows(cfg: &RunConfig, threads: usize) -> Result<Vec<SweepRow>, CliError> {
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Input("sweep needs a 'sweep' section".into()))?;
    let points: Vec<(f64, f64)> = s
        .gamma_grid
        .iter()
        .flat_map(|g| s.p_grid.iter().map(move |p| (*g, *p)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    let mut rows: Vec<SweepRow> = pool.install(|| points.par_iter().map(|(g, p)| sweep_point(cfg, *g, *p)).collect());
    rows.sort_by(|a, b| a.gamma.total_cmp(&b.gamma).then(a.p.total_cmp(&b.p)));
    Ok(rows)
}

fn sweep(cfg: &RunConfig) -> Result<Step, CliError> {
    let threads = cfg.sweep.as_ref().map_or(1, |s| s.parallel);
    let rows = sweep_rows(cfg, threads)?;
    if let Some(path) = &cfg.output.csv_path {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["gamma", "p", "verdict", "margin_ii", "converged", "residual"])?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &rows {
            w.write_record([
                fmt_f64(r.gamma),
                fmt_f64(r.p),
                r.verdict.clone(),
                opt(r.margin_ii),
                r.converged.to_string(),
                opt(r.residual),
            ])?;
        }
        w.flush()?;
    }
    let met = rows.iter().filter(|r| r.verdict == "sufficient_condition_met").count();
    let summary = format!("sweep: {} points, {met} with a sufficient condition", rows.len());
    let report = SweepReport {
        schema: SWEEP_SCHEMA,
        command: Command::Sweep.name(),
        rows: &rows,
    };
    Ok((0, summary, value(&report)))
}

pub fn write_report<T: Serialize>(path: &std::path::Path, report: &T) -> Result<(), CliError> {
    write_json(path, report)
}
