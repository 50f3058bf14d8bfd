//! Constructive solution of
//!
//! ```text
//! -(phi_p(u'))' = m(x) u^{-gamma},  u > 0,  u(a) = u(b) = 0.
//! ```
//!
//! A subsolution comes from a fixed point of `v -> S(m^+ - m^- v^{-gamma})`
//! restricted to a cone `[k delta, S(m^+)]`; the supersolution is
//! `sigma S(m^+)^beta`. A damped Picard iteration between the two (with a
//! finite-difference Newton fallback) produces a candidate that is accepted
//! only if it passes the residual audit of [`verify_solution`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::dirichlet::{solve_dirichlet, C1Solution, FnSource};
use crate::error::{PlapError, Result};
use crate::existence::{check_sufficient_ii, search_window, ProblemSpec};
use crate::bounds::WindowGeometry;
use crate::fdoracle::{fd_solve, FdMesh, FdOptions, FdRhs};
use crate::pcalc::{delta_omega, lambda_1, phi_p};
use crate::profile::{DistanceProfile, GridProfile, PowerProfile, Profile};
use crate::quadrature::{adaptive, AdaptiveOptions};
use crate::weights::{Side, WeightFn};

/// `sigma psi^beta` with `psi = S(m^+)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupersolutionParams {
    /// `(p - 1) / (p - 1 + gamma)`.
    pub beta: f64,
    pub sigma: f64,
    pub psi: C1Solution,
}

impl SupersolutionParams {
    pub fn profile(&self) -> PowerProfile<&C1Solution> {
        PowerProfile {
            base: &self.psi,
            sigma: self.sigma,
            beta: self.beta,
        }
    }

    /// Smallest ratio `(sigma beta)^{p-1} psi^{(beta-1)(p-1)} / (sigma psi^beta)^{-gamma}`
    /// over interior nodes where `m^+ > 0`; the supersolution inequality needs it `>= 1`.
    pub fn audit(&self, spec: &ProblemSpec) -> f64 {
        let pm1 = spec.p.pm1();
        let n = self.psi.grid.len() - 1;
        let mut worst = f64::INFINITY;
        for i in 1..n {
            let x = self.psi.grid[i];
            if spec.m.eval(x) <= 0.0 {
                continue;
            }
            let psi = self.psi.v[i];
            if psi <= 0.0 {
                continue;
            }
            let lhs = (self.sigma * self.beta).powf(pm1) * psi.powf((self.beta - 1.0) * pm1);
            let rhs = (self.sigma * psi.powf(self.beta)).powf(-spec.gamma);
            worst = worst.min(lhs / rhs);
        }
        worst
    }
}

/// `sigma = beta^{-beta}` over `psi = S(m^+)`.
pub fn build_supersolution(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<SupersolutionParams> {
    supersolution_with_factor(spec, 1.0, cfg)
}

fn supersolution_with_factor(spec: &ProblemSpec, cap: f64, cfg: &SolverConfig) -> Result<SupersolutionParams> {
    let (plus, _) = spec.m.sign_split()?;
    if plus.is_zero() {
        return Err(PlapError::ZeroPositivePart);
    }
    let psi = solve_dirichlet(&plus, spec.omega, spec.p, cfg)?;
    let beta = spec.beta_super();
    let sigma = cap.powf(1.0 / (spec.p.pm1() + spec.gamma)) * beta.powf(-beta);
    Ok(SupersolutionParams { beta, sigma, psi })
}

/// The cone `[lower_coeff delta, upper]` for the weight `tau m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeBounds {
    pub lower_coeff: f64,
    pub upper: C1Solution,
    pub tau: f64,
}

/// Closed-form constants of the window pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowConstants {
    pub tau: f64,
    pub c1: f64,
    pub c2: f64,
    pub r: f64,
    /// `c1^{p-1+gamma}`.
    pub chain_lhs: f64,
    /// `((p-1)/(tau gamma))^gamma ((p-1+gamma)/(p-1))^{p-1+gamma} c2^{p-1}`.
    pub chain_rhs: f64,
}

/// A subsolution for `tau m` from the cone-constrained fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsolution {
    pub v: C1Solution,
    pub bounds: ConeBounds,
    pub iterations: usize,
    pub final_gap: f64,
    /// Largest node-wise excursion of an unclamped iterate outside the cone.
    pub cone_excursion: f64,
    pub window: Option<WindowConstants>,
}

struct ConeIteration {
    v: C1Solution,
    iterations: usize,
    gap: f64,
    excursion: f64,
}

fn node_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `max |a_i - b_i| / |b_i|` over interior nodes: the relative change of
/// `u^{-gamma}`, which is what the source sees near the boundary.
fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() - 1;
    (1..n).fold(0.0, |m, i| {
        let d = (a[i] - b[i]).abs();
        if d == 0.0 {
            m
        } else {
            m.max(d / b[i].abs())
        }
    })
}

/// Picard iteration `v <- S(m^+ - m^- clamp(v)^{-gamma})` from `k delta`,
/// where `clamp` projects onto `[k delta, upper]`.
fn cone_picard(
    spec: &ProblemSpec,
    plus: &WeightFn,
    minus: &WeightFn,
    lower_coeff: f64,
    upper: &C1Solution,
    cfg: &SolverConfig,
) -> Result<ConeIteration> {
    if minus.is_zero() {
        return Ok(ConeIteration {
            v: solve_dirichlet(plus, spec.omega, spec.p, cfg)?,
            iterations: 1,
            gap: 0.0,
            excursion: 0.0,
        });
    }
    let lower = DistanceProfile {
        interval: spec.omega,
        eps: lower_coeff,
    };
    let mut breaks = spec.m.breakpoints();
    breaks.push(spec.omega.mid());
    let grid = spec.omega.uniform_grid(cfg.grid_n);
    let mut current: Option<C1Solution> = None;
    let mut prev_values: Vec<f64> = grid.iter().map(|x| lower.value(*x)).collect();
    let mut excursion = 0.0f64;
    let mut gap = f64::INFINITY;
    for it in 1..=cfg.max_picard {
        let cur = current.as_ref();
        let source = FnSource::new(
            |x: f64| {
                let mm = minus.eval(x);
                let mp = plus.eval(x);
                if mm == 0.0 {
                    return mp;
                }
                let base = cur.map_or_else(|| lower.value(x), |s| s.value(x));
                let clamped = base.min(upper.value(x)).max(lower.value(x));
                mp - mm * clamped.powf(-spec.gamma)
            },
            breaks.clone(),
        );
        let next = solve_dirichlet(&source, spec.omega, spec.p, cfg)?;
        for (i, x) in grid.iter().enumerate() {
            let lo = lower.value(*x) - next.v[i];
            let hi = next.v[i] - upper.v[i];
            excursion = excursion.max(lo).max(hi);
        }
        gap = node_gap(&next.v, &prev_values);
        prev_values.clone_from(&next.v);
        if gap < cfg.fp_tol {
            return Ok(ConeIteration {
                v: next,
                iterations: it,
                gap,
                excursion,
            });
        }
        current = Some(next);
    }
    Err(PlapError::NonConvergence {
        iterations: cfg.max_picard,
        gap,
        best_residual: f64::NAN,
    })
}

/// Cone-entry condition: with `S(m^+) <= 1` after scaling, pick the largest
/// `eps = eps0 2^{-j}` with `S(m^+ - m^- (eps delta)^{-gamma}) >= eps delta`
/// and iterate in the cone `[eps delta, S(m^+)]`.
pub fn build_subsolution_i(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<Subsolution> {
    let s_m = solve_dirichlet(&spec.m, spec.omega, spec.p, cfg)?;
    let cone = s_m.cone_membership(cfg);
    if !cone.in_cone {
        return Err(PlapError::NoConeEntry(
            "S(m) is not in the interior of the positive cone".into(),
        ));
    }
    let (plus, _) = spec.m.sign_split()?;
    let psi = solve_dirichlet(&plus, spec.omega, spec.p, cfg)?;
    let top = psi.v.iter().fold(0.0f64, |m, v| m.max(*v));
    let tau = if top > 1.0 { top.powf(-spec.p.pm1()) } else { 1.0 };
    let scaled = spec.scaled(tau);
    let (plus, minus) = scaled.m.sign_split()?;
    let upper = solve_dirichlet(&plus, spec.omega, spec.p, cfg)?;
    // S(tau m) = tau^{1/(p-1)} S(m)
    let eps0 = 0.5 * cone.min_interior_ratio * tau.powf(1.0 / spec.p.pm1());

    let mut breaks = scaled.m.breakpoints();
    breaks.push(spec.omega.mid());
    let mut chosen = None;
    for j in 0..=40 {
        let eps = eps0 * 0.5f64.powi(j);
        if minus.is_zero() {
            chosen = Some(eps);
            break;
        }
        let src = FnSource::new(
            |x: f64| {
                let mm = minus.eval(x);
                if mm == 0.0 {
                    plus.eval(x)
                } else {
                    plus.eval(x) - mm * (eps * delta_omega(x, spec.omega)).powf(-spec.gamma)
                }
            },
            breaks.clone(),
        );
        let Ok(t) = solve_dirichlet(&src, spec.omega, spec.p, cfg) else {
            continue;
        };
        let ok = t.grid.iter().zip(&t.v).all(|(x, v)| {
            let d = eps * delta_omega(*x, spec.omega);
            *v >= d - cfg.grid_tol * d
        });
        if ok {
            chosen = Some(eps);
            break;
        }
    }
    let Some(eps) = chosen else {
        return Err(PlapError::NoConeEntry(format!(
            "no eps in eps0 * 2^-j (eps0 = {eps0:e}, j <= 40) satisfies the cone entry inequality"
        )));
    };
    let it = cone_picard(&scaled, &plus, &minus, eps, &upper, cfg)?;
    Ok(Subsolution {
        v: it.v,
        bounds: ConeBounds {
            lower_coeff: eps,
            upper,
            tau,
        },
        iterations: it.iterations,
        final_gap: it.gap,
        cone_excursion: it.excursion,
        window: None,
    })
}

/// Constants `tau, c1, c2, r` for a window and the inequality chain they must satisfy.
pub fn window_constants(spec: &ProblemSpec, w: &WindowGeometry, cfg: &SolverConfig) -> Result<WindowConstants> {
    let (plus, minus) = spec.m.sign_split()?;
    let pm1 = spec.p.pm1();
    let g = spec.gamma;
    let int_plus = plus.integral();
    if int_plus <= 0.0 {
        return Err(PlapError::ZeroPositivePart);
    }
    let tau = (2.0 / spec.omega.len()).powf(pm1) / int_plus;
    let inf_plus = plus.inf_on_window(w.window, cfg.inf_samples)?;
    let c1 = inf_plus / (lambda_1(w.window, spec.p) * w.c_i.powf(pm1));
    let tail = |side: Side, cut: f64| -> Result<f64> {
        let at_end = match side {
            Side::Left => cut <= spec.omega.a(),
            Side::Right => cut >= spec.omega.b(),
        };
        if at_end || minus.is_zero() {
            return Ok(0.0);
        }
        let r = minus.endpoint_singular_integral(g, side, cut)?;
        Ok(if r.is_finite() { r.value } else { f64::INFINITY })
    };
    let c2 = tail(Side::Left, w.x0())?.max(tail(Side::Right, w.x1())?);
    let r = (tau * c2 * g / pm1).powf(1.0 / (pm1 + g));
    let chain_lhs = c1.powf(pm1 + g);
    let chain_rhs = (pm1 / (tau * g)).powf(g) * ((pm1 + g) / pm1).powf(pm1 + g) * c2.powf(pm1);
    Ok(WindowConstants {
        tau,
        c1,
        c2,
        r,
        chain_lhs,
        chain_rhs,
    })
}

/// Window condition: iterate for `tau m` in the cone `[r delta, S(tau m^+)]`.
/// With `m^- = 0` the cone degenerates and the cone-entry condition is used instead.
pub fn build_subsolution_ii(spec: &ProblemSpec, w: &WindowGeometry, cfg: &SolverConfig) -> Result<Subsolution> {
    let check = check_sufficient_ii(spec, w, cfg)?;
    if !check.holds {
        return Err(PlapError::HypothesisFailed(format!(
            "window ({}, {}) does not satisfy the sufficient inequality (lhs {:e}, rhs {:e})",
            w.x0(),
            w.x1(),
            check.lhs,
            check.rhs
        )));
    }
    let (_, minus) = spec.m.sign_split()?;
    if minus.is_zero() {
        return build_subsolution_i(spec, cfg);
    }
    let k = window_constants(spec, w, cfg)?;
    if k.chain_lhs < k.chain_rhs {
        return Err(PlapError::HypothesisFailed(format!(
            "constant chain fails: c1^(p-1+gamma) = {:e} < {:e}",
            k.chain_lhs, k.chain_rhs
        )));
    }
    let scaled = spec.scaled(k.tau);
    let (plus, minus) = scaled.m.sign_split()?;
    let upper = solve_dirichlet(&plus, spec.omega, spec.p, cfg)?;
    let it = cone_picard(&scaled, &plus, &minus, k.r, &upper, cfg)?;
    Ok(Subsolution {
        v: it.v,
        bounds: ConeBounds {
            lower_coeff: k.r,
            upper,
            tau: k.tau,
        },
        iterations: it.iterations,
        final_gap: it.gap,
        cone_excursion: it.excursion,
        window: Some(k),
    })
}

/// `tau^{-1/(p-1+gamma)} u`: turns a solution for `tau m` into one for `m`.
pub fn scale_solution(u: &C1Solution, tau: f64, spec: &ProblemSpec) -> C1Solution {
    let c = tau.powf(-1.0 / (spec.p.pm1() + spec.gamma));
    let cf = c.powf(spec.p.pm1());
    C1Solution {
        interval: u.interval,
        p: u.p,
        grid: u.grid.clone(),
        v: u.v.iter().map(|x| c * x).collect(),
        v_prime: u.v_prime.iter().map(|x| c * x).collect(),
        c_h: cf * u.c_h,
        flux: u.flux.iter().map(|x| cf * x).collect(),
        h_cum: u.h_cum.iter().map(|x| cf * x).collect(),
        root_iterations: u.root_iterations,
    }
}

/// Formulas for `f` in `-(phi_p(u'))' = m f(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvelopeFormula {
    /// `coeff xi^{-gamma}`.
    Power { coeff: f64 },
    /// `xi^{-gamma} (base + amp sin(omega / xi))`.
    OscillatingPower { base: f64, amp: f64, omega: f64 },
}

/// A nonlinearity `f` with `c_f xi^{-gamma} <= f(xi) <= C_f xi^{-gamma}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvelope")]
pub struct EnvelopeF {
    pub formula: EnvelopeFormula,
    pub c_f: f64,
    #[serde(rename = "C_f")]
    pub cap_c_f: f64,
    pub gamma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvelope {
    formula: EnvelopeFormula,
    c_f: f64,
    #[serde(rename = "C_f")]
    cap_c_f: f64,
    gamma: f64,
}

impl TryFrom<RawEnvelope> for EnvelopeF {
    type Error = PlapError;
    fn try_from(r: RawEnvelope) -> Result<Self> {
        EnvelopeF::new(r.formula, r.c_f, r.cap_c_f, r.gamma)
    }
}

const ENVELOPE_SAMPLES: usize = 4000;

impl EnvelopeF {
    /// Validates `0 < c_f <= C_f` and the envelope on a log grid of `[1e-6, 1e3]`.
    pub fn new(formula: EnvelopeFormula, c_f: f64, cap_c_f: f64, gamma: f64) -> Result<Self> {
        if !(c_f > 0.0 && c_f <= cap_c_f && cap_c_f.is_finite() && gamma > 0.0) {
            return Err(PlapError::InvalidInput(format!(
                "envelope constants must satisfy 0 < c_f <= C_f and gamma > 0 (got {c_f}, {cap_c_f}, {gamma})"
            )));
        }
        let env = Self {
            formula,
            c_f,
            cap_c_f,
            gamma,
        };
        let (lo, hi) = (1e-6f64.ln(), 1e3f64.ln());
        for k in 0..=ENVELOPE_SAMPLES {
            let xi = (lo + (hi - lo) * k as f64 / ENVELOPE_SAMPLES as f64).exp();
            let scaled = env.eval(xi) * xi.powf(gamma);
            let slack = 1e-12 * cap_c_f;
            if scaled < c_f - slack || scaled > cap_c_f + slack || !scaled.is_finite() {
                return Err(PlapError::EnvelopeViolation {
                    xi,
                    value: env.eval(xi),
                    lower: c_f * xi.powf(-gamma),
                    upper: cap_c_f * xi.powf(-gamma),
                });
            }
        }
        Ok(env)
    }

    /// The pure power `xi^{-gamma}`.
    pub fn pure(gamma: f64) -> Self {
        Self {
            formula: EnvelopeFormula::Power { coeff: 1.0 },
            c_f: 1.0,
            cap_c_f: 1.0,
            gamma,
        }
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.eval_with_derivative(xi).0
    }

    pub fn eval_with_derivative(&self, xi: f64) -> (f64, f64) {
        let g = self.gamma;
        let pw = xi.powf(-g);
        match self.formula {
            EnvelopeFormula::Power { coeff } => (coeff * pw, -g * coeff * pw / xi),
            EnvelopeFormula::OscillatingPower { base, amp, omega } => {
                let (s, c) = (omega / xi).sin_cos();
                let q = base + amp * s;
                (pw * q, -g * pw / xi * q - pw * amp * c * omega / (xi * xi))
            }
        }
    }
}

/// Pointwise audit of `-(phi_p(u'))' = m f(u)` on uniform cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Largest `|cell residual|` over audited cells.
    pub residual_sup: f64,
    /// `sum |cell residual| * cell width` over audited cells.
    pub residual_l1: f64,
    /// `[u(a), u(b)]`.
    pub boundary_values: [f64; 2],
    pub audited_cells: usize,
    /// Cell residuals, `NaN` inside the excluded boundary layer.
    #[serde(skip)]
    pub cell_residuals: Vec<f64>,
    #[serde(skip)]
    pub grid: Vec<f64>,
}

/// Residual audit for `f(u) = u^{-gamma}`.
pub fn verify_solution<P: Profile + ?Sized>(u: &P, spec: &ProblemSpec, cfg: &SolverConfig) -> Result<ResidualReport> {
    verify_with_envelope(u, spec, &EnvelopeF::pure(spec.gamma), cfg)
}

/// Residual audit: flux `F = phi_p(u')` at the cell edges and
/// `-(F_{i+1} - F_i)/dx - avg_cell(m f(u))` on every cell outside a layer of
/// width `audit_margin (b - a)` at each end.
pub fn verify_with_envelope<P: Profile + ?Sized>(
    u: &P,
    spec: &ProblemSpec,
    f: &EnvelopeF,
    cfg: &SolverConfig,
) -> Result<ResidualReport> {
    let omega = spec.omega;
    let grid = omega.uniform_grid(cfg.grid_n);
    let n = cfg.grid_n;
    for x in &grid[1..n] {
        let v = u.value(*x);
        if v.is_nan() || v <= 0.0 {
            return Err(PlapError::NonPositive { x: *x, value: v });
        }
    }
    let margin = cfg.audit_margin * omega.len();
    let flux: Vec<f64> = grid.iter().map(|x| phi_p(u.slope(*x), spec.p)).collect();
    let breaks = spec.m.breakpoints();
    let opts = AdaptiveOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        max_intervals: 400,
    };
    let mut cells = vec![f64::NAN; n];
    let mut sup = 0.0f64;
    let mut l1 = 0.0;
    let mut audited = 0;
    for i in 0..n {
        let (lo, hi) = (grid[i], grid[i + 1]);
        if lo < omega.a() + margin || hi > omega.b() - margin {
            continue;
        }
        let mut cuts = vec![lo];
        cuts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
        cuts.push(hi);
        let dx = hi - lo;
        let integral: f64 = cuts
            .windows(2)
            .map(|w| adaptive(|x| spec.m.eval(x) * f.eval(u.value(x)), w[0], w[1], opts).value)
            .sum();
        let r = -(flux[i + 1] - flux[i]) / dx - integral / dx;
        cells[i] = r;
        sup = sup.max(r.abs());
        l1 += r.abs() * dx;
        audited += 1;
    }
    Ok(ResidualReport {
        residual_sup: if sup.is_nan() { f64::INFINITY } else { sup },
        residual_l1: l1,
        boundary_values: [u.value(omega.a()), u.value(omega.b())],
        audited_cells: audited,
        cell_residuals: cells,
        grid,
    })
}

/// Constants used along the way, for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct SolutionConstants {
    pub beta_super: f64,
    pub beta_nec: f64,
    pub sigma: f64,
    /// `eps` (cone entry) or `r` (window).
    pub lower_coeff: f64,
    pub tau: f64,
    pub window: Option<WindowConstants>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport {
    pub u: C1Solution,
    /// Subsolution at the grid nodes.
    #[serde(skip)]
    pub sub: Vec<f64>,
    /// Supersolution at the grid nodes.
    #[serde(skip)]
    pub sup: Vec<f64>,
    pub residual: ResidualReport,
    pub residual_sup: f64,
    pub sandwich_ok: bool,
    pub iterations: usize,
    pub converged: bool,
    pub used_fallback: bool,
    pub pipeline: &'static str,
    pub constants: SolutionConstants,
    /// `max_i (u_i^{beta_nec} - beta_nec S(m)_i)`; nonpositive for a true solution.
    pub necessary_estimate_gap: f64,
}

struct SandwichOutcome {
    u: C1Solution,
    iterations: usize,
    converged: bool,
}

fn sandwich_map<V: Profile + ?Sized, W: Profile + ?Sized>(
    spec: &ProblemSpec,
    f: &EnvelopeF,
    current: &GridProfile,
    v: &V,
    w: &W,
    breaks: &[f64],
    cfg: &SolverConfig,
) -> Result<C1Solution> {
    let src = FnSource::new(
        |x: f64| {
            let m = spec.m.eval(x);
            if m == 0.0 {
                return 0.0;
            }
            let ub = current.value(x).min(w.value(x)).max(v.value(x));
            m * f.eval(ub)
        },
        breaks.to_vec(),
    );
    solve_dirichlet(&src, spec.omega, spec.p, cfg)
}

fn damped_loop<V: Profile + ?Sized, W: Profile + ?Sized>(
    spec: &ProblemSpec,
    f: &EnvelopeF,
    init: GridProfile,
    v: &V,
    w: &W,
    cfg: &SolverConfig,
) -> Result<SandwichOutcome> {
    let breaks = spec.m.breakpoints();
    let mut current = init;
    let mut theta = cfg.damping_init;
    let mut prev_gap = f64::INFINITY;
    let mut last = None;
    for it in 1..=cfg.max_picard {
        let t = sandwich_map(spec, f, &current, v, w, &breaks, cfg)?;
        let gap = relative_gap(&t.v, &current.values);
        if gap < cfg.fp_tol {
            return Ok(SandwichOutcome {
                u: t,
                iterations: it,
                converged: true,
            });
        }
        if gap > prev_gap {
            theta = (0.5 * theta).max(cfg.damping_floor);
        }
        prev_gap = gap;
        for i in 0..current.values.len() {
            current.values[i] = (1.0 - theta) * current.values[i] + theta * t.v[i];
            current.slopes[i] = (1.0 - theta) * current.slopes[i] + theta * t.v_prime[i];
        }
        last = Some(t);
    }
    Ok(SandwichOutcome {
        u: last.expect("at least one iteration"),
        iterations: cfg.max_picard,
        converged: false,
    })
}

/// Node slopes of grid data by second-order differences.
fn fd_slopes(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    let h = grid[1] - grid[0];
    (0..=n)
        .map(|i| {
            if i == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if i == n {
                (3.0 * values[n] - 4.0 * values[n - 1] + values[n - 2]) / (2.0 * h)
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Damped, clamped Picard iteration between a subsolution `v` and a
/// supersolution `w`, accepted only through the residual audit.
pub fn sandwich_solve<V: Profile + ?Sized, W: Profile + ?Sized>(
    spec: &ProblemSpec,
    v: &V,
    w: &W,
    cfg: &SolverConfig,
) -> Result<SolutionReport> {
    sandwich_with_envelope(spec, &EnvelopeF::pure(spec.gamma), v, w, cfg)
}

pub fn sandwich_with_envelope<V: Profile + ?Sized, W: Profile + ?Sized>(
    spec: &ProblemSpec,
    f: &EnvelopeF,
    v: &V,
    w: &W,
    cfg: &SolverConfig,
) -> Result<SolutionReport> {
    cfg.validate()?;
    let grid = spec.omega.uniform_grid(cfg.grid_n);
    let sub: Vec<f64> = grid.iter().map(|x| v.value(*x)).collect();
    let sup: Vec<f64> = grid.iter().map(|x| w.value(*x)).collect();
    if let Some(i) = (0..grid.len()).find(|&i| sub[i] > sup[i] + cfg.grid_tol) {
        return Err(PlapError::HypothesisFailed(format!(
            "subsolution exceeds supersolution at x = {} ({} > {})",
            grid[i], sub[i], sup[i]
        )));
    }
    let init = GridProfile::new(spec.omega, sub.clone(), grid.iter().map(|x| v.slope(*x)).collect())?;
    let accept = |u: &C1Solution| -> Result<(ResidualReport, bool, bool)> {
        let report = verify_with_envelope(u, spec, f, cfg)?;
        let sandwich_ok = (0..grid.len())
            .all(|i| u.v[i] >= sub[i] - cfg.grid_tol && u.v[i] <= sup[i] + cfg.grid_tol);
        let boundary_ok = report.boundary_values.iter().all(|b| b.abs() < cfg.boundary_tol);
        let ok = report.residual_sup < cfg.residual_tol && sandwich_ok && boundary_ok;
        Ok((report, sandwich_ok, ok))
    };

    let first = damped_loop(spec, f, init, v, w, cfg)?;
    let mut iterations = first.iterations;
    let mut best = None;
    if let Ok((report, sandwich_ok, ok)) = accept(&first.u) {
        if ok && first.converged {
            return Ok(finish(spec, first.u, sub, sup, report, sandwich_ok, iterations, false, cfg));
        }
        best = Some(report.residual_sup);
    }

    // Newton on the finite-difference system from the midpoint of the bracket.
    let mesh = FdMesh::new(spec.omega, cfg.grid_n - 1)?;
    let env = *f;
    let rhs = FdRhs::nonlinear(&mesh, &spec.m, Arc::new(move |x| env.eval_with_derivative(x)));
    let mid: Vec<f64> = (1..cfg.grid_n).map(|i| 0.5 * (sub[i] + sup[i])).collect();
    let fd = fd_solve(&mesh, &rhs, spec.p, &mid, &FdOptions::default());
    if let Ok(fd) = fd {
        let values = fd.with_boundary();
        let slopes = fd_slopes(&grid, &values);
        let start = GridProfile::new(spec.omega, values, slopes)?;
        let second = damped_loop(spec, f, start, v, w, cfg)?;
        iterations += second.iterations;
        if let Ok((report, sandwich_ok, ok)) = accept(&second.u) {
            if ok && second.converged {
                return Ok(finish(spec, second.u, sub, sup, report, sandwich_ok, iterations, true, cfg));
            }
            best = Some(best.map_or(report.residual_sup, |b: f64| b.min(report.residual_sup)));
        }
    }
    Err(PlapError::NonConvergence {
        iterations,
        gap: f64::NAN,
        best_residual: best.unwrap_or(f64::NAN),
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    spec: &ProblemSpec,
    u: C1Solution,
    sub: Vec<f64>,
    sup: Vec<f64>,
    residual: ResidualReport,
    sandwich_ok: bool,
    iterations: usize,
    used_fallback: bool,
    cfg: &SolverConfig,
) -> SolutionReport {
    let necessary_estimate_gap = necessary_estimate_gap(&u, spec, cfg).unwrap_or(f64::NAN);
    SolutionReport {
        residual_sup: residual.residual_sup,
        converged: true,
        u,
        sub,
        sup,
        residual,
        sandwich_ok,
        iterations,
        used_fallback,
        pipeline: "sandwich",
        constants: SolutionConstants {
            beta_super: spec.beta_super(),
            beta_nec: spec.beta_nec(),
            tau: 1.0,
            ..Default::default()
        },
        necessary_estimate_gap,
    }
}

/// `max_i (u_i^{beta} - beta S(m)_i)` with `beta = (p - 1 + gamma)/(p - 1)`.
pub fn necessary_estimate_gap(u: &C1Solution, spec: &ProblemSpec, cfg: &SolverConfig) -> Result<f64> {
    let s_m = solve_dirichlet(&spec.m, spec.omega, spec.p, &cfg.clone().with_grid(u.grid.len() - 1))?;
    let beta = spec.beta_nec();
    Ok(u.v
        .iter()
        .zip(&s_m.v)
        .map(|(ui, si)| ui.max(0.0).powf(beta) - beta * si)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Sub/supersolution sandwich for `tau m` followed by un-scaling.
fn complete_pipeline(
    spec: &ProblemSpec,
    sub: Subsolution,
    pipeline: &'static str,
    cfg: &SolverConfig,
) -> Result<SolutionReport> {
    let tau = sub.bounds.tau;
    let scaled = spec.scaled(tau);
    let mut sup = supersolution_with_factor(&scaled, 1.0, cfg)?;
    enlarge_to_dominate(&mut sup, &sub.v);
    let inner = sandwich_solve(&scaled, &sub.v, &sup.profile(), cfg)?;
    let u = scale_solution(&inner.u, tau, spec);
    let c = tau.powf(-1.0 / (spec.p.pm1() + spec.gamma));
    let residual = verify_solution(&u, spec, cfg)?;
    let boundary_ok = residual.boundary_values.iter().all(|b| b.abs() < cfg.boundary_tol);
    let converged = residual.residual_sup < cfg.residual_tol && inner.sandwich_ok && boundary_ok;
    Ok(SolutionReport {
        necessary_estimate_gap: necessary_estimate_gap(&u, spec, cfg)?,
        residual_sup: residual.residual_sup,
        sub: inner.sub.iter().map(|x| c * x).collect(),
        sup: inner.sup.iter().map(|x| c * x).collect(),
        u,
        residual,
        sandwich_ok: inner.sandwich_ok,
        iterations: sub.iterations + inner.iterations,
        converged,
        used_fallback: inner.used_fallback,
        pipeline,
        constants: SolutionConstants {
            beta_super: spec.beta_super(),
            beta_nec: spec.beta_nec(),
            sigma: sup.sigma,
            lower_coeff: sub.bounds.lower_coeff,
            tau,
            window: sub.window,
        },
    })
}

/// Grow `sigma` until `sigma psi^beta >= v` at every interior grid node.
fn enlarge_to_dominate(sup: &mut SupersolutionParams, v: &C1Solution) {
    let n = v.grid.len() - 1;
    let mut ratio = 0.0f64;
    for i in 1..n {
        let w = sup.sigma * sup.psi.value(v.grid[i]).max(0.0).powf(sup.beta);
        if v.v[i] > 0.0 && w > 0.0 {
            ratio = ratio.max(v.v[i] / w);
        }
    }
    if ratio > 1.0 {
        sup.sigma *= ratio * (1.0 + 1e-9);
    }
}

/// Cone-entry pipeline: cone subsolution, supersolution, sandwich.
pub fn solve_via_cone(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<SolutionReport> {
    let sub = build_subsolution_i(spec, cfg)?;
    complete_pipeline(spec, sub, "cone", cfg)
}

/// Window pipeline on a given window.
pub fn solve_via_window(spec: &ProblemSpec, w: &WindowGeometry, cfg: &SolverConfig) -> Result<SolutionReport> {
    let sub = build_subsolution_ii(spec, w, cfg)?;
    let name = if sub.window.is_some() { "window" } else { "cone" };
    complete_pipeline(spec, sub, name, cfg)
}

/// Try the window pipeline on the best lattice window, then the cone pipeline.
pub fn solve_singular(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<SolutionReport> {
    if let Some(best) = search_window(spec, cfg)? {
        if best.holds {
            if let Ok(r) = solve_via_window(spec, &best.window, cfg) {
                if r.converged {
                    return Ok(r);
                }
            }
        }
    }
    solve_via_cone(spec, cfg)
}

/// General nonlinearity: subsolution from the problem with weight
/// `c_f m^+ - C_f m^-`, supersolution `sigma S(m^+)^beta` with
/// `sigma >= C_f^{1/(p-1+gamma)} beta^{-beta}`, then the sandwich with `m f(u)`.
pub fn solve_general_f(spec: &ProblemSpec, f: &EnvelopeF, cfg: &SolverConfig) -> Result<SolutionReport> {
    if (f.gamma - spec.gamma).abs() > 1e-15 * spec.gamma {
        return Err(PlapError::InvalidInput(format!(
            "envelope gamma {} differs from problem gamma {}",
            f.gamma, spec.gamma
        )));
    }
    let (plus, minus) = spec.m.sign_split()?;
    let lower_weight = WeightFn::linear_combination(f.c_f, &plus, -f.cap_c_f, &minus)?;
    let lower_spec = ProblemSpec::new(spec.omega, spec.p, spec.gamma, lower_weight)?;
    let lower = solve_singular(&lower_spec, cfg)?;
    if !lower.converged {
        return Err(PlapError::NonConvergence {
            iterations: lower.iterations,
            gap: f64::NAN,
            best_residual: lower.residual_sup,
        });
    }
    let mut sup = supersolution_with_factor(spec, f.cap_c_f, cfg)?;
    enlarge_to_dominate(&mut sup, &lower.u);
    let mut report = sandwich_with_envelope(spec, f, &lower.u, &sup.profile(), cfg)?;
    report.iterations += lower.iterations;
    report.pipeline = "envelope";
    report.constants.sigma = sup.sigma;
    report.constants.lower_coeff = lower.constants.lower_coeff;
    report.constants.tau = lower.constants.tau;
    report.constants.window = lower.constants.window;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcalc::{Interval, PExponent};
    use crate::weights::{PieceKind, TrigParams};
    use std::f64::consts::PI;

    fn sin_spec(gamma: f64) -> ProblemSpec {
        let omega = Interval::new(0.0, PI).unwrap();
        let m = WeightFn::single(
            omega,
            PieceKind::Sin(TrigParams {
                exponent: 1.0 + gamma,
                ..Default::default()
            }),
        );
        ProblemSpec::new(omega, PExponent::new(2.0).unwrap(), gamma, m).unwrap()
    }

    #[test]
    fn supersolution_constants() {
        let cfg = SolverConfig::default().with_grid(256);
        let s = build_supersolution(&sin_spec(1.0), &cfg).unwrap();
        assert!((s.beta - 0.5).abs() < 1e-15);
        assert!((s.sigma - 2f64.sqrt()).abs() < 1e-14);
        assert!(s.audit(&sin_spec(1.0)) >= 1.0 - 1e-12);
    }

    #[test]
    fn envelope_rejects_bad_bounds() {
        let f = EnvelopeFormula::OscillatingPower {
            base: 2.0,
            amp: 1.0,
            omega: 1.0,
        };
        assert!(EnvelopeF::new(f, 1.0, 3.0, 0.5).is_ok());
        assert!(matches!(
            EnvelopeF::new(f, 1.5, 3.0, 0.5),
            Err(PlapError::EnvelopeViolation { .. })
        ));
    }

    #[test]
    fn envelope_derivative() {
        let f = EnvelopeF::new(
            EnvelopeFormula::OscillatingPower {
                base: 2.0,
                amp: 1.0,
                omega: 1.0,
            },
            1.0,
            3.0,
            0.5,
        )
        .unwrap();
        for xi in [0.3, 1.0, 4.0] {
            let h = 1e-6 * xi;
            let fd = (f.eval(xi + h) - f.eval(xi - h)) / (2.0 * h);
            assert!((fd - f.eval_with_derivative(xi).1).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn verify_detects_perturbation() {
        let spec = sin_spec(0.5);
        let cfg = SolverConfig::default();
        let exact = crate::profile::AnalyticProfile::new(spec.omega, f64::sin, f64::cos);
        assert!(verify_solution(&exact, &spec, &cfg).unwrap().residual_sup < 1e-8);
        let bad = crate::profile::AnalyticProfile::new(
            spec.omega,
            |x| x.sin() + 0.01 * (5.0 * x).sin(),
            |x| x.cos() + 0.05 * (5.0 * x).cos(),
        );
        assert!(verify_solution(&bad, &spec, &cfg).unwrap().residual_sup > 0.1);
    }
}
