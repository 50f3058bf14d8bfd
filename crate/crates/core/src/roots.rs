//! Bracketed scalar root finding (Brent's method: bisection safeguarding
//! secant and inverse quadratic steps).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct BrentOptions {
    /// Stop as soon as |f(x)| falls below this value.
    pub ftol: f64,
    /// Relative bracket width at which to stop: width < xtol * (1 + |x|).
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for BrentOptions {
    fn default() -> Self {
        Self {
            ftol: 0.0,
            xtol: 1e-14,
            max_iter: 200,
        }
    }
}

/// Returns `None` when `f(a)` and `f(b)` do not bracket a sign change.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: BrentOptions) -> Option<Root> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(done(a, fa, a, a, 0, true));
    }
    if fb == 0.0 {
        return Some(done(b, fb, b, b, 0, true));
    }
    if !fa.is_finite() || !fb.is_finite() || fa.signum() == fb.signum() {
        return None;
    }
    // `b` is the best iterate, `a` the contrapoint, `c` and `d` the two previous iterates.
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = c;
    let mut bisected = true;
    for it in 1..=opts.max_iter {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if fb.abs() <= opts.ftol || hi - lo < opts.xtol * (1.0 + b.abs()) {
            return Some(done(b, fb, lo, hi, it - 1, true));
        }
        let delta = opts.xtol * (1.0 + b.abs());
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let q = (3.0 * a + b) / 4.0;
        let between = (s > q.min(b)) && (s < q.max(b));
        let reject = !s.is_finite()
            || !between
            || (bisected && (s - b).abs() >= 0.5 * (b - c).abs())
            || (!bisected && (s - b).abs() >= 0.5 * (c - d).abs())
            || (bisected && (b - c).abs() < delta)
            || (!bisected && (c - d).abs() < delta);
        if reject {
            s = 0.5 * (a + b);
        }
        bisected = reject;
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fs == 0.0 {
            return Some(done(s, fs, s, s, it, true));
        }
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let converged = fb.abs() <= opts.ftol || hi - lo < opts.xtol * (1.0 + b.abs());
    Some(done(b, fb, lo, hi, opts.max_iter, converged))
}

fn done(x: f64, fx: f64, lo: f64, hi: f64, iterations: usize, converged: bool) -> Root {
    Root {
        x,
        fx,
        lo,
        hi,
        iterations,
        converged,
    }
}

/// Plain bisection down to adjacent floating-point numbers.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, max_iter: usize) -> f64 {
    let mut flo = f(lo);
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
