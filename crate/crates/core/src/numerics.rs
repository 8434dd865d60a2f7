//! Scalar numerical kernels shared by the geometry, domain and oracle modules:
//! adaptive Simpson quadrature, bracketed root finding, monotone piecewise-cubic
//! (PCHIP) interpolation and periodic cubic splines on uniform nodes.

use crate::error::{Error, Result};
use std::f64::consts::PI;

const SIMPSON_MAX_DEPTH: u32 = 48;
const SIMPSON_PANELS: usize = 16;

/// Integrates `f` over `[a, b]` by adaptive Simpson with Richardson correction.
///
/// The interval is first split into a fixed number of panels so narrow features
/// are not skipped by the initial five-point estimate; `abs_tol` is shared
/// between panels.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let width = (b - a) / SIMPSON_PANELS as f64;
    let panel_tol = abs_tol / SIMPSON_PANELS as f64;
    let mut total = 0.0;
    for p in 0..SIMPSON_PANELS {
        let lo = a + width * p as f64;
        let hi = if p + 1 == SIMPSON_PANELS { b } else { a + width * (p + 1) as f64 };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += simpson_step(&f, lo, hi, flo, fmid, fhi, whole, panel_tol, SIMPSON_MAX_DEPTH);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // The second test stops refinement once the correction is at rounding level.
    if depth == 0
        || delta.abs() <= 15.0 * tol
        || delta.abs() <= 4.0 * f64::EPSILON * (left.abs() + right.abs())
    {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Solves `f(x) = 0` on a sign-changing bracket by secant steps safeguarded
/// with bisection. Returns once the bracket is narrower than `tol`.
pub fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let fail = || Error::RootFinding { target: 0.0, lo, hi };
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(fail());
    }
    let mut force_bisect = false;
    for _ in 0..400 {
        let width = (b - a).abs();
        if width <= tol {
            return Ok(0.5 * (a + b));
        }
        let secant = b - fb * (b - a) / (fb - fa);
        let inside = secant > a.min(b) && secant < a.max(b);
        let x = if force_bisect || !inside { 0.5 * (a + b) } else { secant };
        let fx = f(x);
        if !fx.is_finite() {
            return Err(fail());
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        force_bisect = (b - a).abs() > 0.5 * width;
    }
    Err(fail())
}

/// Shape-preserving C¹ piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    t: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::invalid("interpolation table columns differ in length"));
        }
        if t.len() < 3 {
            return Err(Error::invalid("interpolation table needs at least 3 rows"));
        }
        if t.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("interpolation table contains non-finite values"));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("interpolation abscissae must be strictly increasing"));
        }
        let n = t.len();
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut slopes = vec![0.0; n];
        for k in 1..n - 1 {
            let (d0, d1) = (delta[k - 1], delta[k]);
            if d0 * d1 > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                slopes[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
        }
        slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Ok(Pchip { t, y, slopes })
    }

    pub fn knots(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.t.len();
        match self.t.partition_point(|&tk| tk <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    /// Value and first derivative at `x`; extrapolates the end cubic outside the table.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let k = self.segment(x);
        let h = self.t[k + 1] - self.t[k];
        let u = (x - self.t[k]) / h;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        let value = (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * m1;
        let deriv = ((6.0 * u2 - 6.0 * u) * y0
            + (3.0 * u2 - 4.0 * u + 1.0) * m0
            + (-6.0 * u2 + 6.0 * u) * y1
            + (3.0 * u2 - 2.0 * u) * m1)
            / h;
        (value, deriv)
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

/// Interpolating cubic spline with periodic end conditions on `m` uniform nodes
/// over one turn `[0, 2π)`.
///
/// The second-derivative system is cyclic and diagonally dominant; it is solved
/// by Jacobi sweeps so that a cyclic shift of the samples shifts the spline
/// coefficients bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpline {
    y: Vec<f64>,
    second: Vec<f64>,
    h: f64,
}

impl PeriodicSpline {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        let m = y.len();
        if m < 3 {
            return Err(Error::invalid("periodic spline needs at least 3 samples"));
        }
        let h = 2.0 * PI / m as f64;
        let rhs: Vec<f64> = (0..m)
            .map(|j| {
                let prev = y[(j + m - 1) % m];
                let next = y[(j + 1) % m];
                6.0 * (next - 2.0 * y[j] + prev) / (h * h)
            })
            .collect();
        let scale = rhs.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let mut second: Vec<f64> = rhs.iter().map(|r| r / 6.0).collect();
        let mut next = vec![0.0; m];
        for _ in 0..200 {
            let mut change = 0.0_f64;
            for j in 0..m {
                let v = (rhs[j] - second[(j + m - 1) % m] - second[(j + 1) % m]) / 4.0;
                change = change.max((v - second[j]).abs());
                next[j] = v;
            }
            std::mem::swap(&mut second, &mut next);
            if change <= f64::EPSILON * scale {
                break;
            }
        }
        Ok(PeriodicSpline { y, second, h })
    }

    pub fn samples(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Value, first and second θ-derivative at position `x` measured in node
    /// units (`x = θ·m/2π`).
    pub fn eval_nodal(&self, x: f64) -> (f64, f64, f64) {
        let m = self.y.len();
        let mf = m as f64;
        let wrapped = x.rem_euclid(mf);
        let base = wrapped.floor();
        let u = wrapped - base;
        let j = (base as usize) % m;
        let j1 = (j + 1) % m;
        let (y0, y1) = (self.y[j], self.y[j1]);
        let (s0, s1) = (self.second[j], self.second[j1]);
        let h = self.h;
        let w = 1.0 - u;
        let value = w * y0 + u * y1 + h * h / 6.0 * ((w * w * w - w) * s0 + (u * u * u - u) * s1);
        let d1 = (y1 - y0) / h + h / 6.0 * ((1.0 - 3.0 * w * w) * s0 + (3.0 * u * u - 1.0) * s1);
        let d2 = w * s0 + u * s1;
        (value, d1, d2)
    }

    /// Value, first and second derivative at angle `theta`.
    pub fn eval(&self, theta: f64) -> (f64, f64, f64) {
        self.eval_nodal(theta / self.h)
    }
}
