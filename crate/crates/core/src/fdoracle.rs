//! Finite-difference oracle for `-(phi_p(u'))' = rhs(x, u)` with zero
//! boundary values: flux differences on a uniform mesh, damped Newton with a
//! tridiagonal Jacobian and a Kacanov (frozen-coefficient) fallback.
//!
//! Source terms are cell-averaged over `[x_i - h/2, x_i + h/2]`, so jumps in
//! piecewise weights do not degrade the order of the scheme.

use std::sync::Arc;

use serde::Serialize;

use crate::dirichlet::Source;
use crate::error::{PlapError, Result};
use crate::pcalc::{delta_omega, phi_p, Interval, PExponent};
use crate::quadrature::{adaptive, AdaptiveOptions};

const JACOBIAN_CAP: f64 = 1e8;
const POSITIVITY_FLOOR: f64 = 1e-12;

/// Uniform mesh with `n` interior nodes and spacing `h = (b - a) / (n + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdMesh {
    pub interval: Interval,
    pub n: usize,
    pub h: f64,
    /// Interior nodes only.
    pub nodes: Vec<f64>,
}

impl FdMesh {
    pub fn new(interval: Interval, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(PlapError::InvalidInput(format!(
                "finite-difference mesh needs at least 3 interior nodes, got {n}"
            )));
        }
        let h = interval.len() / (n + 1) as f64;
        let nodes = (1..=n).map(|i| interval.a() + i as f64 * h).collect();
        Ok(Self { interval, n, h, nodes })
    }

    /// Interior nodes with both boundary points attached.
    pub fn full_nodes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n + 2);
        out.push(self.interval.a());
        out.extend_from_slice(&self.nodes);
        out.push(self.interval.b());
        out
    }

    /// Average of `f` over the dual cell of every interior node, split at `breaks`.
    pub fn cell_averages<S: Source + ?Sized>(&self, f: &S) -> Vec<f64> {
        let mut breaks: Vec<f64> = f.breakpoints();
        breaks.sort_by(f64::total_cmp);
        let opts = AdaptiveOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_intervals: 200,
        };
        self.nodes
            .iter()
            .map(|&x| {
                let lo = x - 0.5 * self.h;
                let hi = x + 0.5 * self.h;
                let mut cuts = vec![lo];
                cuts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
                cuts.push(hi);
                cuts.windows(2)
                    .map(|w| adaptive(|t| f.eval(t), w[0], w[1], opts).value)
                    .sum::<f64>()
                    / self.h
            })
            .collect()
    }
}

type ScalarMap = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// `rhs_i(u) = weight_i * g(u) + source_i` with `g` and `g'` supplied together.
#[derive(Clone)]
pub struct FdRhs {
    pub weight: Vec<f64>,
    pub source: Vec<f64>,
    nonlinearity: Option<ScalarMap>,
    /// Keep iterates above a small positive floor.
    pub positive: bool,
}

impl std::fmt::Debug for FdRhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FdRhs")
            .field("nodes", &self.weight.len())
            .field("nonlinear", &self.nonlinearity.is_some())
            .field("positive", &self.positive)
            .finish()
    }
}

impl FdRhs {
    /// A source independent of `u`.
    pub fn linear<S: Source + ?Sized>(mesh: &FdMesh, h: &S) -> Self {
        Self::nodal(mesh.cell_averages(h))
    }

    /// A source given directly by nodal values.
    pub fn nodal(values: Vec<f64>) -> Self {
        Self {
            weight: vec![0.0; values.len()],
            source: values,
            nonlinearity: None,
            positive: false,
        }
    }

    /// `m(x) u^{-gamma}`.
    pub fn singular<S: Source + ?Sized>(mesh: &FdMesh, m: &S, gamma: f64) -> Self {
        Self::nonlinear(
            mesh,
            m,
            Arc::new(move |u: f64| {
                let g = u.powf(-gamma);
                (g, -gamma * g / u)
            }),
        )
    }

    /// `m(x) f(u)` with `f` returning `(f(u), f'(u))`; iterates stay positive.
    pub fn nonlinear<S: Source + ?Sized>(mesh: &FdMesh, m: &S, f: ScalarMap) -> Self {
        let weight = mesh.cell_averages(m);
        Self {
            source: vec![0.0; weight.len()],
            weight,
            nonlinearity: Some(f),
            positive: true,
        }
    }

    fn eval(&self, i: usize, u: f64) -> (f64, f64) {
        match &self.nonlinearity {
            None => (self.source[i], 0.0),
            Some(g) => {
                let (v, d) = g(u);
                (self.weight[i] * v + self.source[i], self.weight[i] * d)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Converged when `max |F_i| <= tol * (1 + max |rhs_i|)`.
    pub tol: f64,
    pub max_newton: usize,
    pub max_kacanov: usize,
    /// Converged when a Newton step is below `step_tol * max |u|`.
    pub step_tol: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_newton: 200,
            max_kacanov: 2000,
            step_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdResult {
    /// Interior nodal values.
    pub u: Vec<f64>,
    pub newton_iters: usize,
    pub kacanov_iters: usize,
    pub final_residual: f64,
    pub converged: bool,
}

impl FdResult {
    /// Nodal values including the zero boundary values.
    pub fn with_boundary(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.u.len() + 2);
        out.push(0.0);
        out.extend_from_slice(&self.u);
        out.push(0.0);
        out
    }
}

fn phi_prime(t: f64, p: PExponent) -> f64 {
    let pm1 = p.pm1();
    if p.is_two() {
        return 1.0;
    }
    let a = t.abs();
    if a == 0.0 {
        return if p.p() < 2.0 { JACOBIAN_CAP } else { 0.0 };
    }
    (pm1 * a.powf(p.p() - 2.0)).min(JACOBIAN_CAP)
}

/// Discrete residual `F(u)` and the largest absolute right-hand side.
pub fn residual(mesh: &FdMesh, rhs: &FdRhs, p: PExponent, u: &[f64]) -> (Vec<f64>, f64) {
    let n = mesh.n;
    let h = mesh.h;
    let mut f = vec![0.0; n];
    let mut scale = 0.0f64;
    let mut left_flux = phi_p(u[0] / h, p);
    for i in 0..n {
        let right = if i + 1 < n { u[i + 1] } else { 0.0 };
        let right_flux = phi_p((right - u[i]) / h, p);
        let (r, _) = rhs.eval(i, u[i]);
        scale = scale.max(r.abs());
        f[i] = -(right_flux - left_flux) / h - r;
        left_flux = right_flux;
    }
    (f, scale)
}

/// Tridiagonal Jacobian `(sub, diag, sup)` of `F` at `u`.
pub fn jacobian(mesh: &FdMesh, rhs: &FdRhs, p: PExponent, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = mesh.n;
    let h2 = mesh.h * mesh.h;
    let slope = |i: usize| -> f64 {
        // slope on the edge (i-1, i) in full-mesh numbering
        let lo = if i == 0 { 0.0 } else { u[i - 1] };
        let hi = if i == n { 0.0 } else { u[i] };
        (hi - lo) / mesh.h
    };
    let k: Vec<f64> = (0..=n).map(|e| phi_prime(slope(e), p) / h2).collect();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 0..n {
        let (_, dr) = rhs.eval(i, u[i]);
        diag[i] = k[i] + k[i + 1] - dr;
        if i > 0 {
            sub[i] = -k[i];
        }
        if i + 1 < n {
            sup[i] = -k[i + 1];
        }
    }
    (sub, diag, sup)
}

/// Thomas algorithm; `None` on a vanishing pivot.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 || !piv.is_finite() {
        return None;
    }
    c[0] = sup[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - sub[i] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        c[i] = sup[i] / piv;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / piv;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Some(x)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solve the discrete problem from `init` (interior values).
pub fn fd_solve(
    mesh: &FdMesh,
    rhs: &FdRhs,
    p: PExponent,
    init: &[f64],
    opts: &FdOptions,
) -> Result<FdResult> {
    if init.len() != mesh.n {
        return Err(PlapError::InvalidInput(format!(
            "initial guess has {} values for {} interior nodes",
            init.len(),
            mesh.n
        )));
    }
    if rhs.positive && init.iter().any(|v| *v <= 0.0) {
        return Err(PlapError::InvalidInput(
            "initial guess must be positive for a singular right-hand side".into(),
        ));
    }
    let project = |u: &mut [f64]| {
        if rhs.positive {
            for v in u.iter_mut() {
                *v = v.max(POSITIVITY_FLOOR);
            }
        }
    };

    let mut u = init.to_vec();
    let (mut f, mut scale) = residual(mesh, rhs, p, &u);
    let mut norm = sup_norm(&f);
    let mut history = vec![norm];
    let target = |scale: f64| opts.tol * (1.0 + scale);

    let mut newton_iters = 0;
    let mut small_step = false;
    while norm > target(scale) && newton_iters < opts.max_newton {
        newton_iters += 1;
        let (sub, diag, sup) = jacobian(mesh, rhs, p, &u);
        let neg: Vec<f64> = f.iter().map(|x| -x).collect();
        let Some(step) = solve_tridiagonal(&sub, &diag, &sup, &neg) else {
            break;
        };
        // near a vanishing slope phi_p is not Lipschitz for p < 2 and the
        // residual stalls at round-off level; a negligible step also counts
        if sup_norm(&step) <= opts.step_tol * sup_norm(&u).max(f64::MIN_POSITIVE) {
            small_step = true;
            break;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-10 {
            let mut trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
            project(&mut trial);
            let (ft, st) = residual(mesh, rhs, p, &trial);
            let nt = sup_norm(&ft);
            if nt.is_finite() && nt < (1.0 - 1e-4 * lambda) * norm {
                u = trial;
                f = ft;
                scale = st;
                norm = nt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        history.push(norm);
        if !accepted {
            break;
        }
    }

    let mut kacanov_iters = 0;
    if norm > target(scale) && !small_step {
        // frozen-coefficient iteration: -(a(u_k) D+ u_{k+1})' = rhs(u_k)
        let h2 = mesh.h * mesh.h;
        let n = mesh.n;
        while norm > target(scale) && kacanov_iters < opts.max_kacanov {
            kacanov_iters += 1;
            let coeff: Vec<f64> = (0..=n)
                .map(|e| {
                    let lo = if e == 0 { 0.0 } else { u[e - 1] };
                    let hi = if e == n { 0.0 } else { u[e] };
                    let s = ((hi - lo) / mesh.h).abs().max(1e-10);
                    s.powf(p.p() - 2.0).clamp(1.0 / JACOBIAN_CAP, JACOBIAN_CAP) / h2
                })
                .collect();
            let sub: Vec<f64> = (0..n).map(|i| if i > 0 { -coeff[i] } else { 0.0 }).collect();
            let sup: Vec<f64> = (0..n).map(|i| if i + 1 < n { -coeff[i + 1] } else { 0.0 }).collect();
            let diag: Vec<f64> = (0..n).map(|i| coeff[i] + coeff[i + 1]).collect();
            let r: Vec<f64> = (0..n).map(|i| rhs.eval(i, u[i]).0).collect();
            let Some(next) = solve_tridiagonal(&sub, &diag, &sup, &r) else {
                break;
            };
            let mut trial: Vec<f64> = u.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
            project(&mut trial);
            let (ft, st) = residual(mesh, rhs, p, &trial);
            u = trial;
            f = ft;
            scale = st;
            norm = sup_norm(&f);
            history.push(norm);
        }
    }

    if (norm > target(scale) && !small_step) || !norm.is_finite() {
        let keep = history.len().saturating_sub(20);
        return Err(PlapError::NewtonFailure {
            history: history[keep..].to_vec(),
        });
    }
    Ok(FdResult {
        u,
        newton_iters,
        kacanov_iters,
        final_residual: norm,
        converged: true,
    })
}

/// Initial guess `scale * delta_Omega` on the interior nodes.
pub fn distance_guess(mesh: &FdMesh, scale: f64) -> Vec<f64> {
    mesh.nodes
        .iter()
        .map(|&x| scale * delta_omega(x, mesh.interval))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdEigen {
    /// Discrete Rayleigh quotient `sum |D+u|^p / sum |u|^p`.
    pub lambda: f64,
    /// Interior values normalized to unit maximum.
    pub phi: Vec<f64>,
    pub iterations: usize,
}

/// Nonlinear inverse power iteration: solve `-(phi_p(w'))' = phi_p(u_k)` with
/// `max u_k = 1`, then `u_{k+1} = w / max w`.
pub fn fd_eigen(interval: Interval, p: PExponent, n: usize, opts: &FdOptions) -> Result<FdEigen> {
    let mesh = FdMesh::new(interval, n)?;
    let mut u: Vec<f64> = distance_guess(&mesh, 1.0);
    let m = sup_norm(&u);
    u.iter_mut().for_each(|v| *v /= m);
    let mut w_guess = u.clone();
    let mut lambda_prev = f64::NAN;
    let mut change = f64::INFINITY;
    for it in 1..=500 {
        let rhs = FdRhs::nodal(u.iter().map(|v| phi_p(*v, p)).collect());
        let w = fd_solve(&mesh, &rhs, p, &w_guess, opts)?.u;
        let wmax = sup_norm(&w);
        u = w.iter().map(|v| v / wmax).collect();
        w_guess = w;
        let lambda = rayleigh(&mesh, p, &u);
        change = ((lambda - lambda_prev) / lambda).abs();
        if change < 1e-12 {
            return Ok(FdEigen {
                lambda,
                phi: u,
                iterations: it,
            });
        }
        lambda_prev = lambda;
    }
    Err(PlapError::Stagnation {
        iterations: 500,
        change,
    })
}

fn rayleigh(mesh: &FdMesh, p: PExponent, u: &[f64]) -> f64 {
    let full = {
        let mut v = vec![0.0];
        v.extend_from_slice(u);
        v.push(0.0);
        v
    };
    let num: f64 = full
        .windows(2)
        .map(|w| ((w[1] - w[0]) / mesh.h).abs().powf(p.p()))
        .sum();
    let den: f64 = u.iter().map(|v| v.abs().powf(p.p())).sum();
    num / den
}
