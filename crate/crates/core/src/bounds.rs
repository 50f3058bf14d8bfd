//! Barriers for `S(h)` in terms of the boundary distance:
//!
//! * `h >= 0`: `S(h) <= (int_a^b h)^{1/(p-1)} delta`;
//! * if `inf_I h > lambda_1(I) max((x_I - a)^{p-1} int_a^{x0} h^-, (b - x_I)^{p-1} int_{x1}^b h^-)`
//!   for a window `I = (x0, x1)`, then `S(h) >= min(H_a, H_b)^{1/(p-1)} delta` with
//!   `H_a = inf_I h / (lambda_1(I) (x_I - a)^{p-1}) - int_a^{x0} h^-` and `H_b` alike.

use serde::Serialize;

use crate::config::SolverConfig;
use crate::error::{PlapError, Result};
use crate::pcalc::{lambda_1, Interval, PExponent};
use crate::weights::WeightFn;

/// A window `I = (x0, x1)` inside `Omega` with its midpoint and
/// `c_I = max(x_I - a, b - x_I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowGeometry {
    pub window: Interval,
    pub x_i: f64,
    pub c_i: f64,
}

impl WindowGeometry {
    pub fn new(omega: Interval, window: Interval) -> Result<Self> {
        if !omega.contains_interval(window) {
            return Err(PlapError::InvalidInput(format!(
                "window ({}, {}) is not contained in ({}, {})",
                window.a(),
                window.b(),
                omega.a(),
                omega.b()
            )));
        }
        let x_i = window.mid();
        Ok(Self {
            window,
            x_i,
            c_i: (x_i - omega.a()).max(omega.b() - x_i),
        })
    }

    pub fn x0(&self) -> f64 {
        self.window.a()
    }

    pub fn x1(&self) -> f64 {
        self.window.b()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub hypothesis_holds: bool,
    pub inf_i_h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub tail_a: f64,
    pub tail_b: f64,
    pub h_a: f64,
    pub h_b: f64,
    /// `min(H_a, H_b)^{1/(p-1)}` when the hypothesis holds, else 0.
    pub coefficient: f64,
}

/// `(int_a^b h)^{1/(p-1)}` for nonnegative `h`.
pub fn upper_bound_coeff(h: &WeightFn, omega: Interval, p: PExponent) -> Result<f64> {
    if h.domain() != omega {
        return Err(PlapError::InvalidInput("weight domain differs from Omega".into()));
    }
    if !h.negative_part_is_zero()? {
        return Err(PlapError::NegativePart);
    }
    Ok(h.integral().max(0.0).powf(1.0 / p.pm1()))
}

/// Evaluate the window hypothesis for the lower barrier and, when it holds,
/// the barrier coefficient. The strict inequality is certified with the
/// relative slack `cfg.integral_slack`.
pub fn lower_bound(
    h: &WeightFn,
    omega: Interval,
    w: &WindowGeometry,
    p: PExponent,
    cfg: &SolverConfig,
) -> Result<LowerBoundReport> {
    if h.domain() != omega {
        return Err(PlapError::InvalidInput("weight domain differs from Omega".into()));
    }
    let (_, minus) = h.sign_split()?;
    let inf_i_h = h.inf_on_window(w.window, cfg.inf_samples)?;
    Ok(lower_bound_from_parts(inf_i_h, &minus, omega, w, p, cfg))
}

pub(crate) fn lower_bound_from_parts(
    inf_i_h: f64,
    minus: &WeightFn,
    omega: Interval,
    w: &WindowGeometry,
    p: PExponent,
    cfg: &SolverConfig,
) -> LowerBoundReport {
    let lam = lambda_1(w.window, p);
    let tail_a = minus.integral_on(omega.a(), w.x0());
    let tail_b = minus.integral_on(w.x1(), omega.b());
    let da = (w.x_i - omega.a()).powf(p.pm1());
    let db = (omega.b() - w.x_i).powf(p.pm1());
    let rhs = lam * (da * tail_a).max(db * tail_b);
    let lhs = inf_i_h;
    let hypothesis_holds = lhs > rhs + cfg.integral_slack * lhs.abs().max(rhs.abs());
    let h_a = inf_i_h / (lam * da) - tail_a;
    let h_b = inf_i_h / (lam * db) - tail_b;
    let coefficient = if hypothesis_holds {
        h_a.min(h_b).powf(1.0 / p.pm1())
    } else {
        0.0
    };
    LowerBoundReport {
        hypothesis_holds,
        inf_i_h,
        lhs,
        rhs,
        tail_a,
        tail_b,
        h_a,
        h_b,
        coefficient,
    }
}
