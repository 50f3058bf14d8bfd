//! Primitive p-calculus: the odd power map and its inverse, the constant
//! `pi_p`, the principal Dirichlet eigenvalue of an interval and the
//! normalized principal eigenfunction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{PlapError, Result};
use crate::quadrature::{adaptive, AdaptiveOptions, GaussRule};

/// An exponent `p > 1` together with its Hölder conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PExponent {
    p: f64,
    p_conj: f64,
}

impl PExponent {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(PlapError::InvalidInput(format!(
                "exponent p must be a finite number greater than 1, got {p}"
            )));
        }
        Ok(Self {
            p,
            p_conj: p / (p - 1.0),
        })
    }

    #[inline]
    pub fn p(self) -> f64 {
        self.p
    }

    #[inline]
    pub fn conj(self) -> f64 {
        self.p_conj
    }

    /// `p - 1`, the homogeneity degree of the operator.
    #[inline]
    pub fn pm1(self) -> f64 {
        self.p - 1.0
    }

    #[inline]
    pub fn is_two(self) -> bool {
        self.p == 2.0
    }
}

impl TryFrom<f64> for PExponent {
    type Error = PlapError;
    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PExponent> for f64 {
    fn from(p: PExponent) -> f64 {
        p.p
    }
}

/// A bounded open interval `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(PlapError::InvalidInput(format!(
                "interval endpoints must be finite with a < b, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    #[inline]
    pub fn a(self) -> f64 {
        self.a
    }

    #[inline]
    pub fn b(self) -> f64 {
        self.b
    }

    #[inline]
    pub fn len(self) -> f64 {
        self.b - self.a
    }

    #[inline]
    pub fn mid(self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn contains(self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    pub fn contains_interval(self, other: Interval) -> bool {
        self.a <= other.a && other.b <= self.b
    }

    /// `n + 1` equally spaced nodes including both endpoints.
    pub fn uniform_grid(self, n: usize) -> Vec<f64> {
        let h = self.len() / n as f64;
        (0..=n)
            .map(|i| {
                if i == n {
                    self.b
                } else {
                    self.a + h * i as f64
                }
            })
            .collect()
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = PlapError;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> [f64; 2] {
        [i.a, i.b]
    }
}

/// `|t|^{p-2} t`, with value 0 at the origin.
#[inline]
pub fn phi_p(t: f64, p: PExponent) -> f64 {
    if t == 0.0 {
        0.0
    } else if p.is_two() {
        t
    } else {
        t.abs().powf(p.pm1()) * t.signum()
    }
}

/// Inverse of [`phi_p`]: `|s|^{1/(p-1)} sign(s)`.
#[inline]
pub fn phi_p_inv(s: f64, p: PExponent) -> f64 {
    if s == 0.0 {
        0.0
    } else if p.is_two() {
        s
    } else {
        s.abs().powf(1.0 / p.pm1()) * s.signum()
    }
}

/// The generalized half-period `2 pi (p-1)^{1/p} / (p sin(pi/p))`.
pub fn pi_p(p: PExponent) -> f64 {
    let p = p.p();
    2.0 * PI * (p - 1.0).powf(1.0 / p) / (p * (PI / p).sin())
}

/// Principal Dirichlet eigenvalue `(pi_p / |I|)^p` of the p-Laplacian on `I`.
pub fn lambda_1(interval: Interval, p: PExponent) -> f64 {
    (pi_p(p) / interval.len()).powf(p.p())
}

/// Distance from `x` to the boundary of `interval`.
///
/// Panics if `x` lies outside the closed interval.
#[inline]
pub fn delta_omega(x: f64, interval: Interval) -> f64 {
    assert!(
        interval.contains(x),
        "delta_omega: x = {x} outside [{}, {}]",
        interval.a(),
        interval.b()
    );
    (x - interval.a()).min(interval.b() - x)
}

/// The principal eigenpair sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda1: f64,
    pub interval: Interval,
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_prime: Vec<f64>,
    profile: HalfProfile,
}

impl Eigenpair {
    /// Value and slope of the eigenfunction at arbitrary points.
    pub fn eval_many(&self, xs: &[f64]) -> Vec<(f64, f64)> {
        self.profile.eval_many(self.interval, xs)
    }

    /// Spread of the first integral `(p-1)|phi'|^p + lambda phi^p` over the grid,
    /// relative to `lambda`.
    pub fn first_integral_spread(&self) -> f64 {
        let p = self.profile.p;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (v, d) in self.phi.iter().zip(&self.phi_prime) {
            let e = p.pm1() * d.abs().powf(p.p()) + self.lambda1 * v.powf(p.p());
            lo = lo.min(e);
            hi = hi.max(e);
        }
        (hi - lo) / self.lambda1
    }

    /// Sup over grid cells of `|-(F_{i+1} - F_i)/dx - lambda * avg_cell(phi^{p-1})|`,
    /// where `F = phi_p(phi')` are the flux samples at the nodes.
    pub fn ode_residual(&self) -> f64 {
        let p = self.profile.p;
        let rule = GaussRule::new(6);
        let mid = self.interval.mid();
        let a = self.interval.a();
        let b = self.interval.b();
        // cell sub-panels, graded toward a, b and the midpoint where phi^{p-1} is not smooth
        let mut points = Vec::new();
        let mut layout = Vec::with_capacity(self.grid.len());
        for w in self.grid.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mut parts = Vec::with_capacity(2);
            if lo < mid && mid < hi {
                parts.push((lo, mid));
                parts.push((mid, hi));
            } else {
                parts.push((lo, hi));
            }
            let start = points.len();
            for &(l, h) in &parts {
                let toward_lo = l == a || l == mid;
                let toward_hi = h == b || h == mid;
                for (s, wgt) in rule.nodes.iter().zip(&rule.weights) {
                    let (x, jac) = graded_point(l, h, *s, toward_lo, toward_hi);
                    points.push((x, wgt * jac));
                }
            }
            layout.push((start, points.len()));
        }
        let xs: Vec<f64> = points.iter().map(|(x, _)| *x).collect();
        let vals = self.eval_many(&xs);
        let mut worst: f64 = 0.0;
        for (i, &(start, end)) in layout.iter().enumerate() {
            let dx = self.grid[i + 1] - self.grid[i];
            let integral: f64 = (start..end)
                .map(|j| points[j].1 * vals[j].0.powf(p.pm1()))
                .sum();
            let f0 = phi_p(self.phi_prime[i], p);
            let f1 = phi_p(self.phi_prime[i + 1], p);
            let r = -(f1 - f0) / dx - self.lambda1 * integral / dx;
            worst = worst.max(r.abs());
        }
        worst
    }
}

/// Quadrature point on [lo, hi] for reference node `s` in [0, 1], using a
/// quadratic map toward a flagged endpoint. Returns (x, dx/ds).
fn graded_point(lo: f64, hi: f64, s: f64, toward_lo: bool, toward_hi: bool) -> (f64, f64) {
    let w = hi - lo;
    match (toward_lo, toward_hi) {
        (true, false) => (lo + w * s * s, 2.0 * w * s),
        (false, true) => (hi - w * (1.0 - s) * (1.0 - s), 2.0 * w * (1.0 - s)),
        _ => (lo + w * s, w),
    }
}

/// Principal eigenpair of the p-Laplacian on `interval`, normalized so that
/// `max phi = 1`, sampled on `grid_n + 1` uniform nodes.
pub fn eigenpair(interval: Interval, p: PExponent, grid_n: usize) -> Result<Eigenpair> {
    if grid_n < 16 {
        return Err(PlapError::InvalidInput(format!(
            "eigenpair grid needs at least 16 cells, got {grid_n}"
        )));
    }
    let lambda1 = lambda_1(interval, p);
    let profile = HalfProfile::new(p, lambda1)?;
    let grid = interval.uniform_grid(grid_n);
    let vals = profile.eval_many(interval, &grid);
    let (phi, phi_prime) = vals.into_iter().unzip();
    Ok(Eigenpair {
        lambda1,
        interval,
        grid,
        phi,
        phi_prime,
        profile,
    })
}

/// Increasing half of the eigenfunction, obtained from the first integral
/// `(p-1)|phi'|^p + lambda phi^p = lambda`:
///
/// `t = k * F(phi(t))`, `F(y) = int_0^y (1 - s^p)^{-1/p} ds`, `k = ((p-1)/lambda)^{1/p}`,
/// with `t` the distance to the nearest endpoint. Above `s* = 2^{-1/p}` the
/// integral is evaluated in the variable `sigma = (1 - s^p)^{(p-1)/p}`, which
/// removes the endpoint singularity at `s = 1`.
#[derive(Debug, Clone)]
struct HalfProfile {
    p: PExponent,
    scale: f64,
    slope_scale: f64,
    s_star: f64,
    sigma_star: f64,
    sigma_exp: f64,
    f_star: f64,
    upper_total: f64,
}

const INVERSION_TOL: f64 = 1e-15;

impl HalfProfile {
    fn new(p: PExponent, lambda: f64) -> Result<Self> {
        let pv = p.p();
        let s_star = 0.5f64.powf(1.0 / pv);
        let sigma_exp = pv / (pv - 1.0);
        let sigma_star = 0.5f64.powf((pv - 1.0) / pv);
        let mut this = Self {
            p,
            scale: ((pv - 1.0) / lambda).powf(1.0 / pv),
            slope_scale: (lambda / (pv - 1.0)).powf(1.0 / pv),
            s_star,
            sigma_star,
            sigma_exp,
            f_star: 0.0,
            upper_total: 0.0,
        };
        let lower = this.lower_integral(0.0, s_star);
        let upper = this.upper_integral(0.0, sigma_star);
        if !(lower.converged && upper.converged) {
            return Err(PlapError::Quadrature(format!(
                "half-period profile integrals for p = {pv} (errors {:e}, {:e})",
                lower.error, upper.error
            )));
        }
        this.f_star = lower.value;
        this.upper_total = upper.value;
        Ok(this)
    }

    fn lower_integrand(&self, s: f64) -> f64 {
        (1.0 - s.powf(self.p.p())).powf(-1.0 / self.p.p())
    }

    fn upper_integrand(&self, sigma: f64) -> f64 {
        let pv = self.p.p();
        (1.0 - sigma.powf(self.sigma_exp)).powf(1.0 / pv - 1.0) / (pv - 1.0)
    }

    fn lower_integral(&self, lo: f64, hi: f64) -> crate::quadrature::QuadResult {
        adaptive(|s| self.lower_integrand(s), lo, hi, quad_opts())
    }

    fn upper_integral(&self, lo: f64, hi: f64) -> crate::quadrature::QuadResult {
        adaptive(|s| self.upper_integrand(s), lo, hi, quad_opts())
    }

    /// Evaluate (phi, phi') at the given points of `interval`.
    fn eval_many(&self, interval: Interval, xs: &[f64]) -> Vec<(f64, f64)> {
        let half = 0.5 * interval.len();
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let dist = |x: f64| (x - interval.a()).min(interval.b() - x).clamp(0.0, half);
        order.sort_by(|&i, &j| dist(xs[i]).total_cmp(&dist(xs[j])));
        let mut out = vec![(0.0, 0.0); xs.len()];
        // (y, F(y)) on the lower branch, (sigma, int_sigma^{sigma*}) on the upper branch
        let mut lower_anchor = (0.0, 0.0);
        let mut upper_anchor = (self.sigma_star, 0.0);
        for idx in order {
            let x = xs[idx];
            let t = dist(x);
            let target = t / self.scale;
            let (value, slope) = if target <= self.f_star {
                let y = self.solve_lower(target, &mut lower_anchor);
                (y, self.slope_scale * (1.0 - y.powf(self.p.p())).powf(1.0 / self.p.p()))
            } else {
                let sigma = self.solve_upper(target - self.f_star, &mut upper_anchor);
                (
                    (1.0 - sigma.powf(self.sigma_exp)).powf(1.0 / self.p.p()),
                    self.slope_scale * sigma.powf(1.0 / self.p.pm1()),
                )
            };
            let signed = if x < interval.mid() {
                slope
            } else if x > interval.mid() {
                -slope
            } else {
                0.0
            };
            out[idx] = (value, signed);
        }
        out
    }

    /// Solve F(y) = target on [anchor.0, s*], moving the anchor forward.
    fn solve_lower(&self, target: f64, anchor: &mut (f64, f64)) -> f64 {
        let (y0, f0) = *anchor;
        if target <= f0 {
            return y0;
        }
        let mut lo = y0;
        let mut hi = self.s_star;
        let mut y = (y0 + (target - f0) / self.lower_integrand(y0)).min(hi);
        let mut fy = f0;
        for _ in 0..100 {
            fy = f0 + self.lower_integral(y0, y).value;
            let g = fy - target;
            if g.abs() <= INVERSION_TOL * (1.0 + target) {
                break;
            }
            if g > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let mut next = y - g / self.lower_integrand(y);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == y {
                break;
            }
            y = next;
        }
        *anchor = (y, fy);
        y
    }

    /// Solve int_sigma^{sigma*} g = target for sigma in [0, anchor.0].
    fn solve_upper(&self, target: f64, anchor: &mut (f64, f64)) -> f64 {
        let (s0, h0) = *anchor;
        if target >= self.upper_total {
            return 0.0;
        }
        if target <= h0 {
            return s0;
        }
        let mut lo = 0.0;
        let mut hi = s0;
        let mut sigma = (s0 - (target - h0) / self.upper_integrand(s0)).max(0.0);
        let mut hs = h0;
        for _ in 0..100 {
            hs = h0 + self.upper_integral(sigma, s0).value;
            let g = hs - target;
            if g.abs() <= INVERSION_TOL * (1.0 + target) {
                break;
            }
            // hs decreases as sigma grows
            if g > 0.0 {
                lo = sigma;
            } else {
                hi = sigma;
            }
            let mut next = sigma + g / self.upper_integrand(sigma);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == sigma {
                break;
            }
            sigma = next;
        }
        *anchor = (sigma, hs);
        sigma
    }
}

fn quad_opts() -> AdaptiveOptions {
    AdaptiveOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-14,
        max_intervals: 4000,
    }
}
