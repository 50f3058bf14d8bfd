#![allow(dead_code)]

use plap_core::weights::{PieceKind, PieceSpec, TrigParams};
use plap_core::{Interval, WeightFn};
use rand::Rng;

/// `int_0^1 f(s) ds` by tanh-sinh, with `f` receiving `(s, 1 - s)` so that
/// integrands singular at `s = 1` can be evaluated without cancellation.
pub fn tanh_sinh_unit<F: Fn(f64, f64) -> f64>(f: F) -> f64 {
    let h = 1.0 / 128.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut total = 0.0;
    let kmax = (6.5 / h) as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let y = half_pi * t.sinh();
        // s = (1 + tanh y)/2, 1 - s = 1/(1 + e^{2y})
        let one_minus = 1.0 / (1.0 + (2.0 * y).exp());
        let s = 1.0 / (1.0 + (-2.0 * y).exp());
        if s <= 0.0 || one_minus <= 0.0 {
            continue;
        }
        let w = half_pi * t.cosh() / (2.0 * y.cosh().powi(2));
        total += w * f(s, one_minus);
    }
    total * h
}

/// `2 (p-1)^{1/p} int_0^1 (1 - s^p)^{-1/p} ds`.
pub fn pi_p_by_quadrature(p: f64) -> f64 {
    let integral = tanh_sinh_unit(|s, one_minus| {
        let one_minus_sp = -(p * (-one_minus).ln_1p()).exp_m1();
        let _ = s;
        one_minus_sp.powf(-1.0 / p)
    });
    2.0 * (p - 1.0).powf(1.0 / p) * integral
}

pub fn random_piece<R: Rng>(rng: &mut R, sign: Option<f64>) -> PieceKind {
    match rng.gen_range(0..3) {
        0 => {
            let v: f64 = rng.gen_range(-2.0..2.0);
            PieceKind::Const {
                value: sign.map_or(v, |s| s * v.abs()),
            }
        }
        1 => {
            // c0 + c1 x + c2 x^2 with a sign-definite option via positive coefficients on [0, *]
            let mut coeffs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
            if let Some(s) = sign {
                coeffs.iter_mut().for_each(|c| *c = s * c.abs());
            }
            PieceKind::Poly { coeffs }
        }
        _ => {
            let amp: f64 = rng.gen_range(0.2..2.0);
            let omega: f64 = rng.gen_range(0.5..4.0);
            match sign {
                Some(s) => PieceKind::Sum {
                    parts: vec![
                        PieceKind::Const { value: s * amp },
                        PieceKind::Sin(TrigParams {
                            amp: s * amp * 0.5,
                            omega,
                            ..Default::default()
                        }),
                    ],
                },
                None => PieceKind::Sin(TrigParams {
                    amp,
                    omega,
                    ..Default::default()
                }),
            }
        }
    }
}

/// Random piecewise weight on `[0, len]` with 1..=5 pieces. `sign = Some(1.0)`
/// produces a nonnegative weight.
pub fn random_weight<R: Rng>(rng: &mut R, len: f64, sign: Option<f64>) -> WeightFn {
    let k = rng.gen_range(1..=5);
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(0.05..0.95) * len).collect();
    cuts.push(0.0);
    cuts.push(len);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3 * len);
    let pieces = cuts
        .windows(2)
        .map(|w| PieceSpec::new(w[0], w[1], random_piece(rng, sign)))
        .collect();
    WeightFn::from_pieces(pieces).expect("valid tiling")
}

pub fn unit() -> Interval {
    Interval::new(0.0, 1.0).unwrap()
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Composite Simpson rule for `int m`, split at the weight's breakpoints.
pub fn simpson_integral(m: &WeightFn, panels: usize) -> f64 {
    let mut cuts = m.breakpoints();
    cuts.push(m.domain().a());
    cuts.push(m.domain().b());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let h = (hi - lo) / (2 * panels) as f64;
        // stay off the cut points, where the piece choice is ambiguous
        let f = |x: f64| m.eval(x.clamp(lo + 1e-13 * (hi - lo), hi - 1e-13 * (hi - lo)));
        let mut s = f(lo) + f(hi);
        for k in 1..2 * panels {
            s += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        total += s * h / 3.0;
    }
    total
}

/// `((p-1)/p) [(1/2)^{p'} - |x - 1/2|^{p'}]`, the solution for `h = 1` on `(0, 1)`.
pub fn unit_source_solution(p: f64, x: f64) -> f64 {
    let pc = p / (p - 1.0);
    (p - 1.0) / p * (0.5f64.powf(pc) - (x - 0.5).abs().powf(pc))
}

pub mod cases {
    use plap_core::weights::{BaseKind, PieceKind, Trig, TrigParams, TrigPowerParams};
    use plap_core::{Interval, PExponent, ProblemSpec, WeightFn};
    use std::f64::consts::PI;

    pub fn spec(omega: Interval, p: f64, gamma: f64, m: WeightFn) -> ProblemSpec {
        ProblemSpec::new(omega, PExponent::new(p).unwrap(), gamma, m).unwrap()
    }

    pub fn zero_pi() -> Interval {
        Interval::new(0.0, PI).unwrap()
    }

    /// `m = sin x` on `(0, 3 pi)`.
    pub fn rito_sine() -> ProblemSpec {
        let o = Interval::new(0.0, 3.0 * PI).unwrap();
        spec(o, 2.0, 0.5, WeightFn::single(o, PieceKind::Sin(TrigParams::default())))
    }

    /// `m = -2 cos 2x = 2(sin^2 x - cos^2 x)` on `(0, pi)`.
    pub fn rito_sin2() -> ProblemSpec {
        let m = PieceKind::Cos(TrigParams {
            amp: -2.0,
            omega: 2.0,
            ..Default::default()
        });
        spec(zero_pi(), 2.0, 0.5, WeightFn::single(zero_pi(), m))
    }

    /// `m = sin^{1+gamma} x`, whose solution is `sin x` at `p = 2`.
    pub fn manufactured_sin(gamma: f64) -> ProblemSpec {
        let m = PieceKind::Sin(TrigParams {
            exponent: 1.0 + gamma,
            ..Default::default()
        });
        spec(zero_pi(), 2.0, gamma, WeightFn::single(zero_pi(), m))
    }

    /// `m = -2 cos 2x sin^2 x`, `gamma = 1`, whose solution is `sin^2 x`.
    pub fn manufactured_sin2() -> ProblemSpec {
        let m = PieceKind::Trigpower(TrigPowerParams {
            amp: -2.0,
            trig: Trig::Cos,
            omega: 2.0,
            phase: 0.0,
            trig_exponent: 1.0,
            base: BaseKind::Sin,
            x0: 0.0,
            base_omega: 1.0,
            base_phase: 0.0,
            alpha: 2.0,
        });
        spec(zero_pi(), 2.0, 1.0, WeightFn::single(zero_pi(), m))
    }

    /// `1` on `[0.4, 0.6)`, `-1e-4` elsewhere on `(0, 1)`.
    pub fn plateau(p: f64) -> ProblemSpec {
        let m = WeightFn::piecewise_constant(&[0.0, 0.4, 0.6, 1.0], &[-1e-4, 1.0, -1e-4]).unwrap();
        spec(Interval::new(0.0, 1.0).unwrap(), p, 0.5, m)
    }
}
