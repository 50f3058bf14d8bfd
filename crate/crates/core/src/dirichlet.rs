//! The solution operator `S(h)` of
//!
//! ```text
//! -(phi_p(v'))' = h  in (a, b),   v(a) = v(b) = 0
//! ```
//!
//! through the representation `v(x) = int_a^x phi_p^{-1}(c - H(y)) dy` with
//! `H(y) = int_a^y h` and `c` the unique root of
//! `G(c) = int_a^b phi_p^{-1}(c - H(y)) dy`.
//!
//! The grid cells (split at the source's breakpoints) are the quadrature
//! panels. `H` is known exactly (to quadrature accuracy) at the panel ends and
//! at the Gauss nodes of every panel. Panels touching an endpoint use a graded
//! map `x = a + w s^q`, which absorbs integrable endpoint blow-up of `h`.
//! For `p != 2` the integrand has a kink where `c = H`; panels where `c - H`
//! changes sign are integrated on a geometric refinement toward that root.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::SolverConfig;
use crate::error::{PlapError, Result};
use crate::pcalc::{delta_omega, phi_p, phi_p_inv, Interval, PExponent};
use crate::profile::{hermite, uniform_cell, Profile};
use crate::quadrature::{adaptive, AdaptiveOptions, GaussRule};
use crate::roots::{brent, BrentOptions};
use crate::weights::WeightFn;

/// A right-hand side for the Dirichlet problem.
pub trait Source: Sync {
    fn eval(&self, x: f64) -> f64;

    /// Points where the source may fail to be smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl Source for WeightFn {
    fn eval(&self, x: f64) -> f64 {
        WeightFn::eval(self, x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        WeightFn::breakpoints(self)
    }
}

/// A source given by a closure, with optional breakpoints.
pub struct FnSource<F> {
    f: F,
    breaks: Vec<f64>,
}

impl<F: Fn(f64) -> f64 + Sync> FnSource<F> {
    pub fn new(f: F, breaks: Vec<f64>) -> Self {
        Self { f, breaks }
    }
}

impl<F: Fn(f64) -> f64 + Sync> Source for FnSource<F> {
    fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

/// A solved Dirichlet profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C1Solution {
    #[serde(skip)]
    pub interval: Interval,
    #[serde(skip)]
    pub p: PExponent,
    pub grid: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
    /// The representation constant: `phi_p(v'(a))`.
    pub c_h: f64,
    /// `phi_p(v') = c_h - H` at the nodes.
    pub flux: Vec<f64>,
    /// `H(x_i) = int_a^{x_i} h`.
    pub h_cum: Vec<f64>,
    pub root_iterations: usize,
}

impl C1Solution {
    /// `(v'(a), v'(b))`.
    pub fn boundary_fluxes(&self) -> (f64, f64) {
        (self.v_prime[0], self.v_prime[self.v_prime.len() - 1])
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.v_prime.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// `|phi_p(v'(a)) - phi_p(v'(b)) - int_a^b m|`, with the integral of `m`
    /// computed independently of the solve.
    pub fn flux_identity_residual(&self, m: &WeightFn) -> f64 {
        let (da, db) = self.boundary_fluxes();
        (phi_p(da, self.p) - phi_p(db, self.p) - m.integral()).abs()
    }

    pub fn cone_membership(&self, cfg: &SolverConfig) -> ConeMembership {
        cone_membership(self, cfg)
    }
}

impl Profile for C1Solution {
    fn interval(&self) -> Interval {
        self.interval
    }
    fn value(&self, x: f64) -> f64 {
        let (i, t, w) = uniform_cell(&self.grid, x);
        hermite(self.v[i], self.v[i + 1], self.v_prime[i], self.v_prime[i + 1], t, w).0
    }
    fn slope(&self, x: f64) -> f64 {
        let (i, t, w) = uniform_cell(&self.grid, x);
        hermite(self.v[i], self.v[i + 1], self.v_prime[i], self.v_prime[i + 1], t, w).1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeMembership {
    pub in_cone: bool,
    /// Minimum of `v / delta` over interior nodes.
    pub min_interior_ratio: f64,
    pub d_a: f64,
    pub d_b: f64,
}

/// Membership in the interior of the positive cone: `v > 0` inside with
/// `v'(a) > 0 > v'(b)`. The slope inequalities carry the slack
/// `cone_tol * max |v'|`.
pub fn cone_membership(sol: &C1Solution, cfg: &SolverConfig) -> ConeMembership {
    let n = sol.grid.len() - 1;
    let mut ratio = f64::INFINITY;
    for i in 1..n {
        let d = delta_omega(sol.grid[i], sol.interval);
        ratio = ratio.min(sol.v[i] / d);
    }
    let (d_a, d_b) = sol.boundary_fluxes();
    let slack = cfg.cone_tol * sol.max_abs_slope();
    ConeMembership {
        in_cone: ratio > 0.0 && d_a > slack && d_b < -slack && slack > 0.0,
        min_interior_ratio: ratio,
        d_a,
        d_b,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Grading {
    Uniform,
    TowardLo(f64),
    TowardHi(f64),
}

#[derive(Debug, Clone)]
struct Panel {
    lo: f64,
    hi: f64,
    grading: Grading,
    /// `H` at s = 0, the Gauss nodes and s = 1.
    h_known: Vec<f64>,
}

impl Panel {
    #[inline]
    fn map(&self, s: f64) -> (f64, f64) {
        let w = self.hi - self.lo;
        match self.grading {
            Grading::Uniform => (self.lo + w * s, w),
            Grading::TowardLo(q) => (self.lo + w * s.powf(q), w * q * s.powf(q - 1.0)),
            Grading::TowardHi(q) => {
                let r = 1.0 - s;
                (self.hi - w * r.powf(q), w * q * r.powf(q - 1.0))
            }
        }
    }
}

struct Problem<'a, S: ?Sized> {
    h: &'a S,
    a: f64,
    b: f64,
    p: PExponent,
    rule: GaussRule,
    /// 0, Gauss nodes, 1
    s_known: Vec<f64>,
}

const MIN_REFINED_WIDTH: f64 = 1e-10;
/// A panel end is treated as near a kink when `|c - H|` there is below this
/// multiple of the change of `c - H` to the first Gauss node.
const KINK_PROXIMITY: f64 = 20.0;

fn increment_opts() -> AdaptiveOptions {
    AdaptiveOptions {
        abs_tol: 1e-17,
        rel_tol: 1e-14,
        max_intervals: 400,
    }
}

impl<S: Source + ?Sized> Problem<'_, S> {
    /// `h(x(s)) x'(s)`; zero where the map rounds onto an endpoint.
    #[inline]
    fn hs(&self, panel: &Panel, s: f64) -> f64 {
        let (x, dx) = panel.map(s);
        if x <= self.a || x >= self.b || dx == 0.0 {
            return 0.0;
        }
        self.h.eval(x) * dx
    }

    fn h_integral(&self, panel: &Panel, s0: f64, s1: f64) -> f64 {
        if s0 == s1 {
            return 0.0;
        }
        adaptive(|s| self.hs(panel, s), s0, s1, increment_opts()).value
    }

    fn integrate_panel_h(&self, panel: &mut Panel) -> Result<()> {
        let mut acc = 0.0;
        let mut vals = Vec::with_capacity(self.s_known.len());
        vals.push(0.0);
        for w in self.s_known.windows(2) {
            let r = adaptive(|s| self.hs(panel, s), w[0], w[1], increment_opts());
            if !r.value.is_finite() {
                return Err(PlapError::Quadrature(format!(
                    "source integral is not finite on [{}, {}]",
                    panel.lo, panel.hi
                )));
            }
            acc += r.value;
            vals.push(acc);
        }
        panel.h_known = vals;
        Ok(())
    }

    /// `int phi_p^{-1}(c - H(x)) dx` over one panel.
    fn panel_integral(&self, panel: &Panel, c: f64) -> f64 {
        let g: Vec<f64> = panel.h_known.iter().map(|hk| c - hk).collect();
        if self.p.is_two() {
            return self.plain_gauss(panel, &g);
        }
        if g.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        let last = g.len() - 1;
        let one_signed = g.iter().all(|v| *v > 0.0) || g.iter().all(|v| *v < 0.0);
        // a kink just outside the panel still spoils the Gauss rule
        let near_lo = g[0].abs() < KINK_PROXIMITY * (g[1] - g[0]).abs();
        let near_hi = g[last].abs() < KINK_PROXIMITY * (g[last - 1] - g[last]).abs();
        if one_signed && !near_lo && !near_hi {
            return self.plain_gauss(panel, &g);
        }
        self.refined(panel, c, &g, near_lo, near_hi)
    }

    fn plain_gauss(&self, panel: &Panel, g: &[f64]) -> f64 {
        let mut total = 0.0;
        for (k, (s, w)) in self.rule.nodes.iter().zip(&self.rule.weights).enumerate() {
            let (_, dx) = panel.map(*s);
            total += w * dx * phi_p_inv(g[k + 1], self.p);
        }
        total
    }

    fn refined(&self, panel: &Panel, c: f64, g: &[f64], near_lo: bool, near_hi: bool) -> f64 {
        let sk = &self.s_known;
        let last = g.len() - 1;
        // (s, H(s)) of every point the integrand is singular at or near
        let mut singular: Vec<(f64, f64)> = Vec::new();
        for j in 0..last {
            if g[j] == 0.0 {
                singular.push((sk[j], c));
            } else if g[j] * g[j + 1] < 0.0 {
                let h0 = panel.h_known[j];
                let s0 = sk[j];
                let f = |s: f64| c - (h0 + self.h_integral(panel, s0, s));
                let opts = BrentOptions {
                    ftol: 0.0,
                    xtol: 1e-15,
                    max_iter: 200,
                };
                let root = brent(f, sk[j], sk[j + 1], opts)
                    .map(|r| r.x)
                    .unwrap_or(0.5 * (sk[j] + sk[j + 1]));
                singular.push((root, c));
            }
        }
        if g[last] == 0.0 {
            singular.push((1.0, c));
        }
        if near_lo && !singular.iter().any(|(s, _)| *s == 0.0) {
            singular.push((0.0, panel.h_known[0]));
        }
        if near_hi && !singular.iter().any(|(s, _)| *s == 1.0) {
            singular.push((1.0, panel.h_known[last]));
        }
        singular.sort_by(|x, y| x.0.total_cmp(&y.0));
        singular.dedup_by(|x, y| x.0 == y.0);

        let mut cuts = vec![0.0];
        cuts.extend(singular.iter().map(|(s, _)| *s));
        cuts.push(1.0);
        cuts.dedup();
        let anchor = |s: f64| singular.iter().find(|(t, _)| *t == s).map(|(_, h)| *h);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (l, r) = (w[0], w[1]);
            match (anchor(l), anchor(r)) {
                (Some(hl), Some(hr)) => {
                    let m = 0.5 * (l + r);
                    total += self.toward_point(panel, m, l, hl, c);
                    total += self.toward_point(panel, m, r, hr, c);
                }
                (Some(hl), None) => total += self.toward_point(panel, r, l, hl, c),
                (None, Some(hr)) => total += self.toward_point(panel, l, r, hr, c),
                (None, None) => total += self.anchored_gauss(panel, l, r, c),
            }
        }
        total
    }

    /// Integral over the s-segment between `far` and `point` (where `H` equals
    /// `h_point`), on pieces that halve toward `point`.
    fn toward_point(&self, panel: &Panel, far: f64, point: f64, h_point: f64, c: f64) -> f64 {
        let len = (far - point).abs();
        if len == 0.0 {
            return 0.0;
        }
        let dir = (far - point).signum();
        let g0 = c - h_point;
        let mut total = 0.0;
        let mut outer = len;
        loop {
            let inner = if outer * 0.5 < MIN_REFINED_WIDTH { 0.0 } else { 0.5 * outer };
            let (p0, p1) = (point + dir * inner, point + dir * outer);
            let (lo, hi) = if p0 < p1 { (p0, p1) } else { (p1, p0) };
            let width = hi - lo;
            for (node, w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let s = lo + width * node;
                let (_, dx) = panel.map(s);
                let gs = g0 - self.h_integral(panel, point, s);
                total += w * width * dx * phi_p_inv(gs, self.p);
            }
            if inner == 0.0 {
                break;
            }
            outer = inner;
        }
        total
    }

    fn anchored_gauss(&self, panel: &Panel, l: f64, r: f64, c: f64) -> f64 {
        // l is a known point (panel start or a Gauss node)
        let j = self
            .s_known
            .iter()
            .position(|s| *s == l)
            .unwrap_or(0);
        let (s0, h0) = (self.s_known[j], panel.h_known[j]);
        let width = r - l;
        let mut total = 0.0;
        for (node, w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let s = l + width * node;
            let (_, dx) = panel.map(s);
            let gs = c - (h0 + self.h_integral(panel, s0, s));
            total += w * width * dx * phi_p_inv(gs, self.p);
        }
        total
    }

    fn g_of_c(&self, panels: &[Panel], c: f64) -> f64 {
        panels.iter().map(|pnl| self.panel_integral(pnl, c)).sum()
    }
}

/// Estimated blow-up exponent `e` of `|h| ~ t^{-e}` at distance `t` from an
/// endpoint, probed at two small distances.
fn endpoint_exponent<S: Source + ?Sized>(h: &S, endpoint: f64, dir: f64, len: f64) -> f64 {
    let d = 1e-7 * len;
    let h1 = h.eval(endpoint + dir * d).abs();
    let h2 = h.eval(endpoint + dir * 2.0 * d).abs();
    if !(h1 > 0.0 && h2 > 0.0) || !h1.is_finite() || !h2.is_finite() {
        return if h1.is_infinite() { f64::INFINITY } else { 0.0 };
    }
    (h1 / h2).log2()
}

fn grading_for(e: f64, side: &'static str) -> Result<f64> {
    if e >= 0.999 {
        return Err(PlapError::NonIntegrableSource { side, exponent: e });
    }
    if e <= 0.05 {
        Ok(2.0)
    } else {
        Ok((2.0 / (1.0 - e)).ceil().max(2.0))
    }
}

/// Solve `-(phi_p(v'))' = h` on `interval` with zero boundary values.
pub fn solve_dirichlet<S: Source + ?Sized>(
    h: &S,
    interval: Interval,
    p: PExponent,
    cfg: &SolverConfig,
) -> Result<C1Solution> {
    cfg.validate()?;
    let (a, b) = (interval.a(), interval.b());
    let q_a = grading_for(endpoint_exponent(h, a, 1.0, b - a), "left")?;
    let q_b = grading_for(endpoint_exponent(h, b, -1.0, b - a), "right")?;

    let grid = interval.uniform_grid(cfg.grid_n);
    let mut breaks: Vec<f64> = h
        .breakpoints()
        .into_iter()
        .filter(|x| *x > a && *x < b)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut panels: Vec<Panel> = Vec::with_capacity(grid.len() + breaks.len());
    let mut node_end = vec![0usize; grid.len()];
    let mut bi = 0;
    for (i, w) in grid.windows(2).enumerate() {
        let mut lo = w[0];
        while bi < breaks.len() && breaks[bi] <= lo {
            bi += 1;
        }
        while bi < breaks.len() && breaks[bi] < w[1] {
            panels.push(Panel {
                lo,
                hi: breaks[bi],
                grading: Grading::Uniform,
                h_known: Vec::new(),
            });
            lo = breaks[bi];
            bi += 1;
        }
        panels.push(Panel {
            lo,
            hi: w[1],
            grading: Grading::Uniform,
            h_known: Vec::new(),
        });
        node_end[i + 1] = panels.len() - 1;
    }
    let n_panels = panels.len();
    panels[0].grading = Grading::TowardLo(q_a);
    panels[n_panels - 1].grading = Grading::TowardHi(q_b);

    let rule = GaussRule::new(cfg.quad_order);
    let mut s_known = vec![0.0];
    s_known.extend(rule.nodes.iter().copied());
    s_known.push(1.0);
    let prob = Problem {
        h,
        a,
        b,
        p,
        rule,
        s_known,
    };

    panels
        .par_iter_mut()
        .try_for_each(|pnl| prob.integrate_panel_h(pnl))?;
    let mut offset = 0.0;
    for pnl in panels.iter_mut() {
        for v in pnl.h_known.iter_mut() {
            *v += offset;
        }
        offset = *pnl.h_known.last().expect("nonempty");
    }

    let (mut lo, mut hi) = panels
        .iter()
        .flat_map(|pnl| pnl.h_known.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), v| (l.min(*v), u.max(*v)));
    let scale = (hi - lo).max(lo.abs().max(hi.abs())).max(1e-300);
    let mut g_lo = prob.g_of_c(&panels, lo);
    let mut g_hi = if hi > lo { prob.g_of_c(&panels, hi) } else { g_lo };
    let mut expand = 0;
    while g_lo > 0.0 && expand < 60 {
        lo -= scale * 2f64.powi(expand - 20);
        g_lo = prob.g_of_c(&panels, lo);
        expand += 1;
    }
    expand = 0;
    while g_hi < 0.0 && expand < 60 {
        hi += scale * 2f64.powi(expand - 20);
        g_hi = prob.g_of_c(&panels, hi);
        expand += 1;
    }
    let tol_g = cfg.boundary_tol * (b - a);
    let (c, iterations) = if g_lo == 0.0 || (hi - lo) <= 1e-14 * (1.0 + lo.abs()) {
        (lo, 0)
    } else if g_hi == 0.0 {
        (hi, 0)
    } else {
        let opts = BrentOptions {
            ftol: 1e-6 * tol_g,
            xtol: 1e-15,
            max_iter: cfg.max_root_iters,
        };
        let root = brent(|c| prob.g_of_c(&panels, c), lo, hi, opts).ok_or(
            PlapError::RootNotConverged {
                lo,
                hi,
                residual: g_lo.abs().min(g_hi.abs()),
            },
        )?;
        if !root.converged && root.fx.abs() > tol_g {
            return Err(PlapError::RootNotConverged {
                lo: root.lo,
                hi: root.hi,
                residual: root.fx,
            });
        }
        (root.x, root.iterations)
    };

    let contributions: Vec<f64> = panels.par_iter().map(|pnl| prob.panel_integral(pnl, c)).collect();
    let mut v = vec![0.0; grid.len()];
    let mut acc = 0.0;
    let mut k = 0;
    for i in 1..grid.len() {
        while k <= node_end[i] {
            acc += contributions[k];
            k += 1;
        }
        v[i] = acc;
    }
    let residual = v[grid.len() - 1];
    if residual.is_nan() || residual.abs() >= cfg.boundary_tol {
        return Err(PlapError::RootNotConverged {
            lo: c,
            hi: c,
            residual,
        });
    }
    let mut h_cum = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        h_cum[i] = *panels[node_end[i]].h_known.last().expect("nonempty");
    }
    let flux: Vec<f64> = h_cum.iter().map(|hc| c - hc).collect();
    let v_prime = flux.iter().map(|f| phi_p_inv(*f, p)).collect();
    Ok(C1Solution {
        interval,
        p,
        grid,
        v,
        v_prime,
        c_h: c,
        flux,
        h_cum,
        root_iterations: iterations,
    })
}
