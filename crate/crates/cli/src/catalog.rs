//! Named problem instances.

use std::f64::consts::PI;

use plap_core::weights::{BaseKind, PieceKind, Trig, TrigParams, TrigPowerParams};
use plap_core::{Interval, PExponent, ProblemSpec, WeightFn};

use crate::error::CliError;

pub const NAMES: [&str; 5] = ["rito-sine", "rito-sin2", "manufactured-sin", "manufactured-sin2", "plateau"];

/// Default `(p, gamma)` of a catalog entry.
pub fn defaults(name: &str) -> Result<(f64, f64), CliError> {
    match name {
        "rito-sine" | "rito-sin2" | "manufactured-sin" | "plateau" => Ok((2.0, 0.5)),
        "manufactured-sin2" => Ok((2.0, 1.0)),
        _ => Err(unknown(name)),
    }
}

fn unknown(name: &str) -> CliError {
    CliError::Input(format!("unknown problem '{name}'; the catalog has: {}", NAMES.join(", ")))
}

/// The weight of a catalog entry. The manufactured weights depend on `gamma`.
pub fn weight(name: &str, gamma: f64) -> Result<WeightFn, CliError> {
    let zero_pi = Interval::new(0.0, PI)?;
    Ok(match name {
        "rito-sine" => {
            let o = Interval::new(0.0, 3.0 * PI)?;
            WeightFn::single(o, PieceKind::Sin(TrigParams::default()))
        }
        // 2 (sin^2 x - cos^2 x) = -2 cos 2x
        "rito-sin2" => WeightFn::single(
            zero_pi,
            PieceKind::Cos(TrigParams {
                amp: -2.0,
                omega: 2.0,
                ..Default::default()
            }),
        ),
        "manufactured-sin" => WeightFn::single(
            zero_pi,
            PieceKind::Sin(TrigParams {
                exponent: 1.0 + gamma,
                ..Default::default()
            }),
        ),
        "manufactured-sin2" => WeightFn::single(
            zero_pi,
            PieceKind::Trigpower(TrigPowerParams {
                amp: -2.0,
                trig: Trig::Cos,
                omega: 2.0,
                phase: 0.0,
                trig_exponent: 1.0,
                base: BaseKind::Sin,
                x0: 0.0,
                base_omega: 1.0,
                base_phase: 0.0,
                alpha: 2.0 * gamma,
            }),
        ),
        "plateau" => WeightFn::piecewise_constant(&[0.0, 0.4, 0.6, 1.0], &[-1e-4, 1.0, -1e-4])?,
        _ => return Err(unknown(name)),
    })
}

/// Resolve a catalog entry, optionally overriding `p` and `gamma`.
pub fn problem(name: &str, p: Option<f64>, gamma: Option<f64>) -> Result<ProblemSpec, CliError> {
    let (p0, g0) = defaults(name)?;
    let gamma = gamma.unwrap_or(g0);
    let m = weight(name, gamma)?;
    Ok(ProblemSpec::new(m.domain(), PExponent::new(p.unwrap_or(p0))?, gamma, m)?)
}

/// A closed-form profile `(u, u')`.
pub type ExactPair = (fn(f64) -> f64, fn(f64) -> f64);

/// Closed-form solutions known for catalog entries: `(u, u')` of the singular
/// problem (`manufactured-*` at `p = 2`).
pub fn exact_solution(name: &str, p: f64, gamma: f64) -> Option<ExactPair> {
    match (name, p == 2.0) {
        ("manufactured-sin", true) => Some((f64::sin, f64::cos)),
        ("manufactured-sin2", true) if gamma == 1.0 => Some((|x| x.sin().powi(2), |x| (2.0 * x).sin())),
        _ => None,
    }
}
