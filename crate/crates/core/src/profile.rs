//! Functions on an interval carrying both value and slope: grid samples with
//! cubic Hermite interpolation and a few closed-form building blocks.

use std::sync::Arc;

use crate::error::{PlapError, Result};
use crate::pcalc::Interval;

pub trait Profile: Send + Sync {
    fn interval(&self) -> Interval;
    fn value(&self, x: f64) -> f64;
    fn slope(&self, x: f64) -> f64;

    fn sample(&self, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        xs.iter().map(|&x| (self.value(x), self.slope(x))).unzip()
    }
}

impl<P: Profile + ?Sized> Profile for Arc<P> {
    fn interval(&self) -> Interval {
        (**self).interval()
    }
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }
    fn slope(&self, x: f64) -> f64 {
        (**self).slope(x)
    }
}

impl<P: Profile + ?Sized> Profile for &P {
    fn interval(&self) -> Interval {
        (**self).interval()
    }
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }
    fn slope(&self, x: f64) -> f64 {
        (**self).slope(x)
    }
}

/// Locate the cell of a uniform grid containing `x` and return
/// `(index, local coordinate in [0, 1], cell width)`.
#[inline]
pub(crate) fn uniform_cell(grid: &[f64], x: f64) -> (usize, f64, f64) {
    let n = grid.len() - 1;
    let a = grid[0];
    let h = (grid[n] - a) / n as f64;
    let pos = ((x - a) / h).floor();
    let i = if pos < 0.0 {
        0
    } else {
        (pos as usize).min(n - 1)
    };
    // guard against round-off in the index computation
    let i = if x < grid[i] && i > 0 {
        i - 1
    } else if i + 1 < n && x >= grid[i + 1] {
        i + 1
    } else {
        i
    };
    let w = grid[i + 1] - grid[i];
    (i, (x - grid[i]) / w, w)
}

/// Cubic Hermite value and derivative on one cell.
#[inline]
pub(crate) fn hermite(v0: f64, v1: f64, d0: f64, d1: f64, t: f64, w: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * v0 + h10 * w * d0 + h01 * v1 + h11 * w * d1;
    let dh00 = 6.0 * t2 - 6.0 * t;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = -dh00;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let slope = (dh00 * v0 + dh01 * v1) / w + dh10 * d0 + dh11 * d1;
    (value, slope)
}

/// Value/slope samples on a uniform grid, interpolated by cubic Hermite.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProfile {
    interval: Interval,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl GridProfile {
    pub fn new(interval: Interval, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if values.len() < 3 || values.len() != slopes.len() {
            return Err(PlapError::InvalidInput(format!(
                "grid profile needs matching value/slope arrays of length >= 3 (got {} and {})",
                values.len(),
                slopes.len()
            )));
        }
        let grid = interval.uniform_grid(values.len() - 1);
        Ok(Self {
            interval,
            grid,
            values,
            slopes,
        })
    }

    /// Sample another profile on a uniform grid with `n` cells.
    pub fn from_profile<P: Profile + ?Sized>(p: &P, n: usize) -> Self {
        let interval = p.interval();
        let grid = interval.uniform_grid(n);
        let (values, slopes) = p.sample(&grid);
        Self {
            interval,
            grid,
            values,
            slopes,
        }
    }

    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (i, t, w) = uniform_cell(&self.grid, x);
        hermite(
            self.values[i],
            self.values[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            t,
            w,
        )
    }
}

impl Profile for GridProfile {
    fn interval(&self) -> Interval {
        self.interval
    }
    fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }
    fn slope(&self, x: f64) -> f64 {
        self.eval(x).1
    }
}

/// `eps * delta_Omega(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceProfile {
    pub interval: Interval,
    pub eps: f64,
}

impl Profile for DistanceProfile {
    fn interval(&self) -> Interval {
        self.interval
    }
    fn value(&self, x: f64) -> f64 {
        self.eps * (x - self.interval.a()).min(self.interval.b() - x).max(0.0)
    }
    fn slope(&self, x: f64) -> f64 {
        if x < self.interval.mid() {
            self.eps
        } else if x > self.interval.mid() {
            -self.eps
        } else {
            0.0
        }
    }
}

/// `sigma * psi^beta` for a nonnegative base profile `psi`.
#[derive(Clone)]
pub struct PowerProfile<P> {
    pub base: P,
    pub sigma: f64,
    pub beta: f64,
}

impl<P: Profile> Profile for PowerProfile<P> {
    fn interval(&self) -> Interval {
        self.base.interval()
    }
    fn value(&self, x: f64) -> f64 {
        self.sigma * self.base.value(x).max(0.0).powf(self.beta)
    }
    fn slope(&self, x: f64) -> f64 {
        let v = self.base.value(x).max(0.0);
        if v == 0.0 {
            return if self.beta < 1.0 {
                f64::INFINITY * self.base.slope(x).signum()
            } else {
                0.0
            };
        }
        self.sigma * self.beta * v.powf(self.beta - 1.0) * self.base.slope(x)
    }
}

/// `k * base`.
#[derive(Clone)]
pub struct ScaledProfile<P> {
    pub base: P,
    pub factor: f64,
}

impl<P: Profile> Profile for ScaledProfile<P> {
    fn interval(&self) -> Interval {
        self.base.interval()
    }
    fn value(&self, x: f64) -> f64 {
        self.factor * self.base.value(x)
    }
    fn slope(&self, x: f64) -> f64 {
        self.factor * self.base.slope(x)
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A profile given by closed-form value and slope functions.
#[derive(Clone)]
pub struct AnalyticProfile {
    interval: Interval,
    value: RealFn,
    slope: RealFn,
}

impl AnalyticProfile {
    pub fn new(
        interval: Interval,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        slope: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            interval,
            value: Arc::new(value),
            slope: Arc::new(slope),
        }
    }
}

impl Profile for AnalyticProfile {
    fn interval(&self) -> Interval {
        self.interval
    }
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }
    fn slope(&self, x: f64) -> f64 {
        (self.slope)(x)
    }
}

impl std::fmt::Debug for AnalyticProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticProfile")
            .field("interval", &self.interval)
            .finish_non_exhaustive()
    }
}
