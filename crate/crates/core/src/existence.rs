//! Existence and nonexistence tests for
//!
//! ```text
//! -(|u'|^{p-2} u')' = m(x) u^{-gamma},  u > 0 in (a, b),  u(a) = u(b) = 0.
//! ```
//!
//! Necessary: `S(m) > 0` in the interior and `int m > 0`.
//! Cone-entry condition: `S(m)` in the interior of the positive cone, for small
//! enough `gamma` (confirmed here only by a successful construction).
//! Window condition: an inequality between `inf_I m^+`, `int m^+` and the
//! weighted tail masses `int m^- delta^{-gamma}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{lower_bound_from_parts, LowerBoundReport, WindowGeometry};
use crate::config::SolverConfig;
use crate::dirichlet::{cone_membership, solve_dirichlet, C1Solution, ConeMembership};
use crate::error::{PlapError, Result};
use crate::pcalc::{lambda_1, Interval, PExponent};
use crate::weights::{EndpointSingularIntegral, Side, WeightFn};

/// One instance of the singular problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ProblemSpec {
    pub omega: Interval,
    pub p: PExponent,
    pub gamma: f64,
    pub m: WeightFn,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    omega: Interval,
    p: PExponent,
    gamma: f64,
    m: WeightFn,
}

impl TryFrom<RawSpec> for ProblemSpec {
    type Error = PlapError;
    fn try_from(r: RawSpec) -> Result<Self> {
        ProblemSpec::new(r.omega, r.p, r.gamma, r.m)
    }
}

impl ProblemSpec {
    pub fn new(omega: Interval, p: PExponent, gamma: f64, m: WeightFn) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(PlapError::InvalidInput(format!(
                "gamma must be positive and finite, got {gamma}"
            )));
        }
        if m.domain() != omega {
            return Err(PlapError::InvalidInput(format!(
                "weight is defined on ({}, {}) but Omega is ({}, {})",
                m.domain().a(),
                m.domain().b(),
                omega.a(),
                omega.b()
            )));
        }
        Ok(Self { omega, p, gamma, m })
    }

    /// The same problem with weight `tau * m`.
    pub fn scaled(&self, tau: f64) -> ProblemSpec {
        ProblemSpec {
            m: self.m.scaled(tau),
            ..self.clone()
        }
    }

    /// `(p - 1) / (p - 1 + gamma)`, the exponent of the power supersolution.
    pub fn beta_super(&self) -> f64 {
        self.p.pm1() / (self.p.pm1() + self.gamma)
    }

    /// `(p - 1 + gamma) / (p - 1)`, the exponent in `u^beta <= beta S(m)`.
    pub fn beta_nec(&self) -> f64 {
        (self.p.pm1() + self.gamma) / self.p.pm1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmPositivity {
    /// `min_interior S(m) / delta > 0`.
    pub holds: bool,
    /// `S(m)` is negative beyond the grid tolerance somewhere inside.
    pub violated: bool,
    pub min_ratio: f64,
    pub min_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralSign {
    /// `int m > slack * int |m|`.
    pub holds: bool,
    pub violated: bool,
    pub value: f64,
    pub abs_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxRecord {
    pub d_a: f64,
    pub d_b: f64,
    pub both_nonzero: bool,
    pub either_nonzero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessaryChecks {
    pub sm_positive: SmPositivity,
    pub integral: IntegralSign,
    pub flux: FluxRecord,
    #[serde(skip)]
    pub s_m: C1Solution,
}

impl NecessaryChecks {
    pub fn violated(&self) -> bool {
        self.sm_positive.violated || self.integral.violated
    }
}

/// Integrability of `part * delta^{-gamma}` near both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integrability {
    pub left: EndpointSingularIntegral,
    pub right: EndpointSingularIntegral,
    pub integrable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficientI {
    pub cone: ConeMembership,
    pub minus_integrability: Integrability,
    pub plus_integrability: Integrability,
    /// The cone condition for the given gamma; existence additionally needs
    /// the constructive pipeline to succeed.
    pub condition_holds: bool,
    pub constructive_success: Option<bool>,
    pub constructive_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficientII {
    pub window: WindowGeometry,
    pub inf_i_m_plus: f64,
    pub int_m_plus: f64,
    pub tail_left: f64,
    pub tail_right: f64,
    pub constant: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub integrable: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierWindow {
    pub window: WindowGeometry,
    pub report: LowerBoundReport,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NonexistenceProved,
    SufficientConditionMet,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceCertificate {
    pub schema: &'static str,
    pub omega: [f64; 2],
    pub p: f64,
    pub gamma: f64,
    pub necessary_sm_positive: SmPositivity,
    pub necessary_integral: IntegralSign,
    pub flux_nonzero: FluxRecord,
    pub sufficient_i: SufficientI,
    pub sufficient_ii: Option<SufficientII>,
    pub barrier_window: Option<BarrierWindow>,
    pub verdict: Verdict,
    pub verdict_reason: String,
    pub solution_class: &'static str,
}

pub const SOLUTION_CLASS: &str = "nonexistence refers to solutions u in C^1 of the closed interval \
with phi_p(u') absolutely continuous; existence refers to distributional solutions in \
C^1 of the open interval, continuous up to the boundary";

fn sm_positivity(s_m: &C1Solution, cfg: &SolverConfig) -> SmPositivity {
    let n = s_m.grid.len() - 1;
    let scale = s_m.v.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut min_ratio = f64::INFINITY;
    let mut min_value = f64::INFINITY;
    for i in 1..n {
        let d = crate::pcalc::delta_omega(s_m.grid[i], s_m.interval);
        min_ratio = min_ratio.min(s_m.v[i] / d);
        min_value = min_value.min(s_m.v[i]);
    }
    SmPositivity {
        holds: min_ratio > 0.0,
        violated: min_value < -cfg.grid_tol * scale.max(f64::MIN_POSITIVE),
        min_ratio,
        min_value,
    }
}

/// `S(m) > 0` inside, `int m > 0`, and the boundary slopes of `S(m)`.
pub fn check_necessary(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<NecessaryChecks> {
    let s_m = solve_dirichlet(&spec.m, spec.omega, spec.p, cfg)?;
    let value = spec.m.integral();
    let (plus, minus) = spec.m.sign_split()?;
    let abs_mass = plus.integral() + minus.integral();
    let holds = value > cfg.integral_slack * abs_mass;
    let integral = IntegralSign {
        holds,
        violated: !holds,
        value,
        abs_mass,
    };
    let (d_a, d_b) = s_m.boundary_fluxes();
    let slope_tol = cfg.cone_tol * s_m.max_abs_slope();
    let flux = FluxRecord {
        d_a,
        d_b,
        both_nonzero: d_a.abs() > slope_tol && d_b.abs() > slope_tol,
        either_nonzero: d_a.abs() > slope_tol || d_b.abs() > slope_tol,
    };
    Ok(NecessaryChecks {
        sm_positive: sm_positivity(&s_m, cfg),
        integral,
        flux,
        s_m,
    })
}

fn integrability(part: &WeightFn, spec: &ProblemSpec) -> Result<Integrability> {
    let mid = spec.omega.mid();
    let left = part.endpoint_singular_integral(spec.gamma, Side::Left, mid)?;
    let right = part.endpoint_singular_integral(spec.gamma, Side::Right, mid)?;
    Ok(Integrability {
        integrable: left.is_finite() && right.is_finite(),
        left,
        right,
    })
}

/// Cone membership of `S(m)` and the integrability of `m^{+-} delta^{-gamma}`.
pub fn check_sufficient_i(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<SufficientI> {
    let s_m = solve_dirichlet(&spec.m, spec.omega, spec.p, cfg)?;
    sufficient_i_from(spec, &s_m, cfg)
}

fn sufficient_i_from(spec: &ProblemSpec, s_m: &C1Solution, cfg: &SolverConfig) -> Result<SufficientI> {
    let cone = cone_membership(s_m, cfg);
    let (plus, minus) = spec.m.sign_split()?;
    Ok(SufficientI {
        condition_holds: cone.in_cone,
        cone,
        minus_integrability: integrability(&minus, spec)?,
        plus_integrability: integrability(&plus, spec)?,
        constructive_success: None,
        constructive_residual: None,
    })
}

/// `((p-1)/gamma)^gamma ((p-1+gamma)/(p-1))^{p-1+gamma} ((b-a)/2)^{gamma(p-1)}
/// (c_I^{p-1} lambda_1(I))^{p-1+gamma}`.
pub fn c_gamma_constant(gamma: f64, p: PExponent, omega: Interval, w: &WindowGeometry) -> f64 {
    let pm1 = p.pm1();
    let e = pm1 + gamma;
    (pm1 / gamma).powf(gamma)
        * (e / pm1).powf(e)
        * (0.5 * omega.len()).powf(gamma * pm1)
        * (w.c_i.powf(pm1) * lambda_1(w.window, p)).powf(e)
}

/// Data shared by all windows of one problem.
struct WindowContext {
    plus: WeightFn,
    minus: WeightFn,
    int_m_plus: f64,
    integrable: bool,
}

impl WindowContext {
    fn new(spec: &ProblemSpec) -> Result<Self> {
        let (plus, minus) = spec.m.sign_split()?;
        let integrable = integrability(&minus, spec)?.integrable;
        Ok(Self {
            int_m_plus: plus.integral(),
            plus,
            minus,
            integrable,
        })
    }

    fn tail_left(&self, spec: &ProblemSpec, x0: f64) -> Result<f64> {
        if x0 <= spec.omega.a() || self.minus.is_zero() {
            return Ok(0.0);
        }
        if x0 >= spec.omega.b() {
            return Ok(f64::INFINITY);
        }
        let r = self.minus.endpoint_singular_integral(spec.gamma, Side::Left, x0)?;
        Ok(if r.is_finite() { r.value } else { f64::INFINITY })
    }

    fn tail_right(&self, spec: &ProblemSpec, x1: f64) -> Result<f64> {
        if x1 >= spec.omega.b() || self.minus.is_zero() {
            return Ok(0.0);
        }
        if x1 <= spec.omega.a() {
            return Ok(f64::INFINITY);
        }
        let r = self.minus.endpoint_singular_integral(spec.gamma, Side::Right, x1)?;
        Ok(if r.is_finite() { r.value } else { f64::INFINITY })
    }

    fn record(
        &self,
        spec: &ProblemSpec,
        w: WindowGeometry,
        tail_left: f64,
        tail_right: f64,
        cfg: &SolverConfig,
    ) -> Result<SufficientII> {
        let pm1 = spec.p.pm1();
        let inf_i_m_plus = self.plus.inf_on_window(w.window, cfg.inf_samples)?.max(0.0);
        let constant = c_gamma_constant(spec.gamma, spec.p, spec.omega, &w);
        let lhs = if self.int_m_plus > 0.0 {
            inf_i_m_plus.powf(pm1 + spec.gamma) / self.int_m_plus.powf(spec.gamma)
        } else {
            0.0
        };
        let tail = tail_left.max(tail_right);
        let rhs = if tail == 0.0 { 0.0 } else { constant * tail.powf(pm1) };
        let holds = self.integrable
            && inf_i_m_plus > 0.0
            && lhs >= rhs + cfg.integral_slack * lhs.max(rhs);
        Ok(SufficientII {
            window: w,
            inf_i_m_plus,
            int_m_plus: self.int_m_plus,
            tail_left,
            tail_right,
            constant,
            lhs,
            rhs,
            margin: lhs - rhs,
            integrable: self.integrable,
            holds,
        })
    }
}

/// Window condition on a given window.
pub fn check_sufficient_ii(spec: &ProblemSpec, w: &WindowGeometry, cfg: &SolverConfig) -> Result<SufficientII> {
    let ctx = WindowContext::new(spec)?;
    let tl = ctx.tail_left(spec, w.x0())?;
    let tr = ctx.tail_right(spec, w.x1())?;
    ctx.record(spec, *w, tl, tr, cfg)
}

/// Lattice points `a + k (b - a) / L`, `k = 0..=L`.
fn lattice(omega: Interval, cells: usize) -> Vec<f64> {
    omega.uniform_grid(cells)
}

/// Window pairs `(k0, k1)` with `k1 - k0 >= 2`, in lexicographic order.
fn lattice_windows(cells: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for k0 in 0..=cells {
        for k1 in (k0 + 2)..=cells {
            out.push((k0, k1));
        }
    }
    out
}

/// Deterministic choice among scored candidates: larger score wins, ties go to
/// the earlier candidate (smaller x0, then smaller x1).
fn pick_best<T: Clone>(scored: Vec<(f64, T)>) -> Option<T> {
    let mut best: Option<(f64, T)> = None;
    for (score, item) in scored {
        let better = match &best {
            None => true,
            Some((s, _)) => score > *s || (s.is_nan() && !score.is_nan()),
        };
        if better {
            best = Some((score, item));
        }
    }
    best.map(|(_, t)| t)
}

/// Best window for the window condition on the configured lattice, by margin.
pub fn search_window(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<Option<SufficientII>> {
    let ctx = WindowContext::new(spec)?;
    if ctx.int_m_plus <= 0.0 {
        return Ok(None);
    }
    let pts = lattice(spec.omega, cfg.window_lattice);
    let left: Vec<f64> = pts
        .par_iter()
        .map(|x| ctx.tail_left(spec, *x))
        .collect::<Result<_>>()?;
    let right: Vec<f64> = pts
        .par_iter()
        .map(|x| ctx.tail_right(spec, *x))
        .collect::<Result<_>>()?;
    let records: Vec<SufficientII> = lattice_windows(cfg.window_lattice)
        .par_iter()
        .map(|&(k0, k1)| {
            let w = WindowGeometry::new(spec.omega, Interval::new(pts[k0], pts[k1])?)?;
            ctx.record(spec, w, left[k0], right[k1], cfg)
        })
        .collect::<Result<_>>()?;
    Ok(pick_best(records.into_iter().map(|r| (r.margin, r)).collect()))
}

/// The window inequality that implies `S(m)` in the positive cone.
pub fn check_barrier_window(spec: &ProblemSpec, w: &WindowGeometry, cfg: &SolverConfig) -> Result<BarrierWindow> {
    let (plus, minus) = spec.m.sign_split()?;
    let inf_plus = plus.inf_on_window(w.window, cfg.inf_samples)?;
    let report = lower_bound_from_parts(inf_plus, &minus, spec.omega, w, spec.p, cfg);
    Ok(BarrierWindow {
        window: *w,
        holds: report.hypothesis_holds,
        report,
    })
}

fn search_barrier_window(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<Option<BarrierWindow>> {
    let (plus, minus) = spec.m.sign_split()?;
    let pts = lattice(spec.omega, cfg.window_lattice);
    let records: Vec<BarrierWindow> = lattice_windows(cfg.window_lattice)
        .par_iter()
        .map(|&(k0, k1)| {
            let w = WindowGeometry::new(spec.omega, Interval::new(pts[k0], pts[k1])?)?;
            let inf_plus = plus.inf_on_window(w.window, cfg.inf_samples)?;
            let report = lower_bound_from_parts(inf_plus, &minus, spec.omega, &w, spec.p, cfg);
            Ok(BarrierWindow {
                window: w,
                holds: report.hypothesis_holds,
                report,
            })
        })
        .collect::<Result<_>>()?;
    Ok(pick_best(
        records
            .into_iter()
            .map(|r| (r.report.lhs - r.report.rhs, r))
            .collect(),
    ))
}

/// Run every check and decide a verdict: a failed necessary condition proves
/// nonexistence; the window condition or a successful cone-entry construction
/// proves existence; anything else is inconclusive.
pub fn assemble_certificate(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<ExistenceCertificate> {
    cfg.validate()?;
    let nec = check_necessary(spec, cfg)?;
    let mut suff_i = sufficient_i_from(spec, &nec.s_m, cfg)?;
    let suff_ii = search_window(spec, cfg)?;
    let barrier_window = search_barrier_window(spec, cfg)?;

    let (verdict, reason) = if nec.sm_positive.violated {
        (
            Verdict::NonexistenceProved,
            "S(m) takes negative values in the interior".to_string(),
        )
    } else if nec.integral.violated {
        (
            Verdict::NonexistenceProved,
            "the integral of m is not positive".to_string(),
        )
    } else if suff_ii.as_ref().is_some_and(|r| r.holds) {
        (
            Verdict::SufficientConditionMet,
            "window condition holds with integrable m^- delta^-gamma".to_string(),
        )
    } else if suff_i.condition_holds {
        match crate::singular::solve_via_cone(spec, cfg) {
            Ok(report) if report.converged => {
                suff_i.constructive_success = Some(true);
                suff_i.constructive_residual = Some(report.residual_sup);
                (
                    Verdict::SufficientConditionMet,
                    "S(m) lies in the positive cone and the constructed solution passed the residual audit"
                        .to_string(),
                )
            }
            Ok(report) => {
                suff_i.constructive_success = Some(false);
                suff_i.constructive_residual = Some(report.residual_sup);
                (
                    Verdict::Inconclusive,
                    "S(m) lies in the positive cone but no solution was constructed for this gamma"
                        .to_string(),
                )
            }
            Err(e) => {
                suff_i.constructive_success = Some(false);
                (
                    Verdict::Inconclusive,
                    format!("S(m) lies in the positive cone but the construction failed: {e}"),
                )
            }
        }
    } else {
        (
            Verdict::Inconclusive,
            "no necessary condition fails and no sufficient condition could be verified".to_string(),
        )
    };

    Ok(ExistenceCertificate {
        schema: "cert_v1",
        omega: [spec.omega.a(), spec.omega.b()],
        p: spec.p.p(),
        gamma: spec.gamma,
        necessary_sm_positive: nec.sm_positive,
        necessary_integral: nec.integral,
        flux_nonzero: nec.flux,
        sufficient_i: suff_i,
        sufficient_ii: suff_ii,
        barrier_window,
        verdict,
        verdict_reason: reason,
        solution_class: SOLUTION_CLASS,
    })
}
