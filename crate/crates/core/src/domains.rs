//! Starshaped domains and rings in chart coordinates.
//!
//! Every domain is a radial graph `{ r e(θ) : 0 ≤ r < ρ(θ) }` about the chart
//! origin, so it is starshaped about the origin by construction. The
//! normal-vector test in [`star_defect`] checks starshapedness about other
//! centers.

use crate::error::{Error, Result};
use crate::geometry::RadialConformalFactor;
use crate::numerics::PeriodicSpline;
use std::f64::consts::PI;
use std::fmt;

/// Periodic radius function `θ ↦ ρ(θ) > 0`, stored as `m` samples at
/// `θ_j = 2πj/m` and interpolated by a periodic cubic spline.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    spline: PeriodicSpline,
}

impl RadialFunction {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("radial function samples must be positive and finite"));
        }
        Ok(Self { spline: PeriodicSpline::new(samples)? })
    }

    pub fn constant(radius: f64) -> Result<Self> {
        Self::from_samples(vec![radius; 8])
    }

    /// `ρ(θ) = a₀ + Σ_k (a_k cos kθ + b_k sin kθ)` sampled at `resolution` nodes.
    /// `cos[0]` is the mean; `sin[0]` is ignored.
    pub fn from_fourier(cos: &[f64], sin: &[f64], resolution: usize) -> Result<Self> {
        let samples = (0..resolution)
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / resolution as f64;
                let c: f64 = cos.iter().enumerate().map(|(k, a)| a * (k as f64 * theta).cos()).sum();
                let s: f64 = sin.iter().enumerate().skip(1).map(|(k, b)| b * (k as f64 * theta).sin()).sum();
                c + s
            })
            .collect();
        Self::from_samples(samples)
    }

    pub fn samples(&self) -> &[f64] {
        self.spline.samples()
    }

    pub fn len(&self) -> usize {
        self.spline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spline.is_empty()
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.spline.eval(theta).0
    }

    /// `(ρ, dρ/dθ)` at `theta`.
    pub fn value_and_slope(&self, theta: f64) -> (f64, f64) {
        let (v, d, _) = self.spline.eval(theta);
        (v, d)
    }

    /// `(ρ, dρ/dθ)` at the angle `2π·num/den`. Node-aligned arguments avoid
    /// rounding in the angle so that rotated rings evaluate identically.
    pub fn at_fraction(&self, num: usize, den: usize) -> (f64, f64) {
        let x = (num as f64 * self.len() as f64) / den as f64;
        let (v, d, _) = self.spline.eval_nodal(x);
        (v, d)
    }

    pub fn min_max(&self, refine: usize) -> (f64, f64) {
        let n = self.len() * refine.max(1);
        (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
            let v = self.at_fraction(j, n).0;
            (lo.min(v), hi.max(v))
        })
    }

    /// The same curve rotated by `shift` sample spacings counter-clockwise.
    pub fn rotated(&self, shift: usize) -> Self {
        let mut samples = self.samples().to_vec();
        let m = samples.len();
        samples.rotate_right(shift % m);
        Self::from_samples(samples).expect("rotation preserves validity")
    }

    /// Samples are all equal: the curve is a circle about the origin.
    pub fn is_round(&self) -> bool {
        let s = self.samples();
        s.iter().all(|&v| v == s[0])
    }
}

impl fmt::Display for RadialFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_round() {
            write!(f, "circle(r={})", self.samples()[0])
        } else {
            let (lo, hi) = self.min_max(1);
            write!(f, "radial(m={},min={lo},max={hi})", self.len())
        }
    }
}

/// `ρ(θ)·(cos θ, sin θ)`.
pub fn boundary_point(rho: &RadialFunction, theta: f64) -> [f64; 2] {
    let r = rho.value(theta);
    [r * theta.cos(), r * theta.sin()]
}

/// Outward unit normal of the curve `θ ↦ ρ(θ) e(θ)`.
pub fn outward_normal(rho: &RadialFunction, theta: f64) -> [f64; 2] {
    let (r, dr) = rho.value_and_slope(theta);
    let (s, c) = theta.sin_cos();
    let n = [r * c + dr * s, r * s - dr * c];
    let len = n[0].hypot(n[1]);
    [n[0] / len, n[1] / len]
}

/// Whether `p` lies strictly inside the radial graph `ρ`.
pub fn contains(rho: &RadialFunction, p: [f64; 2]) -> bool {
    let r = p[0].hypot(p[1]);
    r == 0.0 || r < rho.value(p[1].atan2(p[0]))
}

/// Minimum over `samples` equispaced angles of `⟨ν(x), x − center⟩`.
///
/// A smooth bounded domain is starshaped about an interior point iff this
/// quantity is non-negative along the whole boundary.
pub fn star_defect(rho: &RadialFunction, center: [f64; 2], samples: usize) -> Result<f64> {
    if samples == 0 {
        return Err(Error::invalid("star_defect needs at least one sample"));
    }
    if !contains(rho, center) {
        return Err(Error::domain(format!(
            "center ({}, {}) is not strictly inside the curve",
            center[0], center[1]
        )));
    }
    Ok((0..samples)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / samples as f64;
            let x = boundary_point(rho, theta);
            let nu = outward_normal(rho, theta);
            nu[0] * (x[0] - center[0]) + nu[1] * (x[1] - center[1])
        })
        .fold(f64::INFINITY, f64::min))
}

/// Condenser `X₀ \ closure(X₁)` between two nested radial graphs in a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct StarshapedRing {
    outer: RadialFunction,
    inner: RadialFunction,
    factor: RadialConformalFactor,
}

/// Oversampling used when checking ring invariants between spline nodes.
const RING_CHECK_REFINE: usize = 8;

impl StarshapedRing {
    pub fn new(outer: RadialFunction, inner: RadialFunction, factor: RadialConformalFactor) -> Result<Self> {
        let n = (outer.len().max(inner.len())) * RING_CHECK_REFINE;
        let mut outer_max = f64::NEG_INFINITY;
        for j in 0..n {
            let r0 = outer.at_fraction(j, n).0;
            let r1 = inner.at_fraction(j, n).0;
            if !(r1 > 0.0) {
                return Err(Error::invalid(format!(
                    "inner radius must be positive, got {r1} at theta = {}",
                    2.0 * PI * j as f64 / n as f64
                )));
            }
            if r1 >= r0 {
                return Err(Error::invalid(format!(
                    "inner radius must be strictly less than outer radius (theta = {}: {r1} >= {r0})",
                    2.0 * PI * j as f64 / n as f64
                )));
            }
            outer_max = outer_max.max(r0);
        }
        if outer_max >= factor.domain_radius() {
            return Err(Error::invalid(format!(
                "ring exceeds the chart: outer radius {outer_max} >= domain radius {} of {factor}",
                factor.domain_radius()
            )));
        }
        Ok(Self { outer, inner, factor })
    }

    /// Round annulus `R1 < |x| < R0`.
    pub fn annulus(r1: f64, r0: f64, factor: RadialConformalFactor) -> Result<Self> {
        Self::new(RadialFunction::constant(r0)?, RadialFunction::constant(r1)?, factor)
    }

    pub fn outer(&self) -> &RadialFunction {
        &self.outer
    }

    pub fn inner(&self) -> &RadialFunction {
        &self.inner
    }

    pub fn factor(&self) -> &RadialConformalFactor {
        &self.factor
    }

    pub fn with_factor(&self, factor: RadialConformalFactor) -> Result<Self> {
        Self::new(self.outer.clone(), self.inner.clone(), factor)
    }

    pub fn rotated(&self, shift: usize) -> Self {
        Self {
            outer: self.outer.rotated(shift),
            inner: self.inner.rotated(shift),
            factor: self.factor.clone(),
        }
    }

    /// `(R1, R0)` when both boundaries are circles.
    pub fn round_radii(&self) -> Option<(f64, f64)> {
        (self.inner.is_round() && self.outer.is_round())
            .then(|| (self.inner.samples()[0], self.outer.samples()[0]))
    }

    /// `T_x = sup{ t ≥ 1 : t x ∈ closure(X₀) }`, equal to `ρ₀(θ_x)/|x|`.
    pub fn t_exit(&self, x: [f64; 2]) -> Result<f64> {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return Err(Error::domain("exit time is undefined at the origin"));
        }
        let r0 = self.outer.value(x[1].atan2(x[0]));
        if r > r0 * (1.0 + 1e-12) {
            return Err(Error::domain(format!("point ({}, {}) lies outside the outer domain", x[0], x[1])));
        }
        Ok((r0 / r).max(1.0))
    }
}

impl fmt::Display for StarshapedRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "outer={} inner={} factor={}", self.outer, self.inner, self.factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fourier(cos: &[f64]) -> RadialFunction {
        RadialFunction::from_fourier(cos, &[], 512).unwrap()
    }

    #[test]
    fn boundary_point_examples() {
        let one = RadialFunction::constant(1.0).unwrap();
        assert_eq!(boundary_point(&one, 0.0), [1.0, 0.0]);
        let two = RadialFunction::constant(2.0).unwrap();
        let p = boundary_point(&two, PI / 2.0);
        assert!(p[0].abs() < 1e-15 && (p[1] - 2.0).abs() < 1e-15);
        let q = boundary_point(&fourier(&[1.0, 0.0, 0.3]), 0.0);
        assert!((q[0] - 1.3).abs() < 1e-15 && q[1] == 0.0);
    }

    #[test]
    fn outward_normal_examples() {
        let one = RadialFunction::constant(1.0).unwrap();
        let n = outward_normal(&one, PI / 4.0);
        let h = 2f64.sqrt() / 2.0;
        assert!((n[0] - h).abs() < 1e-15 && (n[1] - h).abs() < 1e-15);
        let three = RadialFunction::constant(3.0).unwrap();
        for t in [0.0, 1.0, 2.5, -4.0] {
            let n = outward_normal(&three, t);
            assert!((n[0] - t.cos()).abs() < 1e-15 && (n[1] - t.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn outward_normal_of_three_petal_curve() {
        let rho = fourier(&[1.0, 0.0, 0.0, 0.5]);
        let t = PI / 6.0;
        // closed form: ρ = 1 + 0.5 cos 3t = 1, ρ' = -1.5 sin 3t = -1.5
        let (r, dr) = (1.0_f64, -1.5_f64);
        let expected = r * r / (r * r + dr * dr).sqrt();
        let x = boundary_point(&rho, t);
        let nu = outward_normal(&rho, t);
        assert!((nu[0] * x[0] + nu[1] * x[1] - expected).abs() < 1e-5);
        // tangent by central difference of the curve
        let h = 1e-5;
        let a = boundary_point(&rho, t + h);
        let b = boundary_point(&rho, t - h);
        let tangent = [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)];
        let tl = tangent[0].hypot(tangent[1]);
        assert!((nu[0] * tangent[0] + nu[1] * tangent[1]).abs() / tl < 1e-6);
    }

    #[test]
    fn star_defect_examples() {
        let one = RadialFunction::constant(1.0).unwrap();
        assert!((star_defect(&one, [0.0, 0.0], 360).unwrap() - 1.0).abs() < 1e-12);
        assert!((star_defect(&one, [0.5, 0.0], 360).unwrap() - 0.5).abs() < 1e-12);
        let petals = fourier(&[1.0, 0.0, 0.0, 0.5]);
        assert!(star_defect(&petals, [0.4, 0.0], 720).unwrap() < 0.0);
        assert!(star_defect(&petals, [0.0, 0.0], 720).unwrap() > 0.0);
        assert!(matches!(star_defect(&one, [1.0, 0.0], 10), Err(Error::Domain(_))));
        assert!(star_defect(&one, [2.0, 0.0], 10).is_err());
    }

    #[test]
    fn t_exit_examples() {
        let e = RadialConformalFactor::euclidean(1.0).unwrap();
        let ring = StarshapedRing::annulus(0.5, 2.0, e.clone()).unwrap();
        assert_eq!(ring.t_exit([1.0, 0.0]).unwrap(), 2.0);
        assert!((ring.t_exit([0.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(ring.t_exit([0.0, 0.0]).is_err());
        assert!(ring.t_exit([2.5, 0.0]).is_err());
        let oval = StarshapedRing::new(
            fourier(&[1.5, 0.0, 0.3]),
            RadialFunction::constant(0.5).unwrap(),
            e,
        )
        .unwrap();
        assert!((oval.t_exit([0.9, 0.0]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ring_validation() {
        let e = RadialConformalFactor::euclidean(1.0).unwrap();
        let err = StarshapedRing::annulus(1.0, 1.0, e.clone()).unwrap_err();
        assert!(err.to_string().contains("inner radius must be strictly less"));
        let h = RadialConformalFactor::hyperbolic(1.0).unwrap();
        assert!(StarshapedRing::annulus(0.3, 1.2, h.clone()).is_err());
        assert!(StarshapedRing::annulus(0.3, 0.8, h).is_ok());
        assert!(RadialFunction::from_samples(vec![1.0, -1.0, 1.0]).is_err());
        assert_eq!(StarshapedRing::annulus(1.0, 2.0, e).unwrap().round_radii(), Some((1.0, 2.0)));
    }

    fn smooth_rho() -> impl Strategy<Value = RadialFunction> {
        (0.5f64..2.0, prop::collection::vec(-0.1f64..0.1, 6), prop::collection::vec(-0.1f64..0.1, 6))
            .prop_map(|(mean, a, b)| {
                let mut cos = vec![mean];
                cos.extend(a);
                let mut sin = vec![0.0];
                sin.extend(b);
                RadialFunction::from_fourier(&cos, &sin, 128).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn radial_graphs_are_starshaped_about_origin(rho in smooth_rho()) {
            prop_assert!(star_defect(&rho, [0.0, 0.0], 720).unwrap() >= -1e-9);
        }

        #[test]
        fn normals_are_unit_and_orthogonal_to_tangent(rho in smooth_rho(), t in 0.0f64..6.3) {
            let nu = outward_normal(&rho, t);
            prop_assert!((nu[0].hypot(nu[1]) - 1.0).abs() <= 1e-12);
            let (r, dr) = rho.value_and_slope(t);
            let (s, c) = t.sin_cos();
            let tangent = [dr * c - r * s, dr * s + r * c];
            prop_assert!((nu[0] * tangent[0] + nu[1] * tangent[1]).abs() <= 1e-10);
            prop_assert!(nu[0] * c + nu[1] * s > 0.0);
        }

        #[test]
        fn t_exit_scales_inversely(rho in smooth_rho(), t in 0.1f64..=1.0, th in 0.0f64..6.3, frac in 0.05f64..1.0) {
            let e = RadialConformalFactor::euclidean(1.0).unwrap();
            let inner = RadialFunction::constant(0.1).unwrap();
            let ring = StarshapedRing::new(rho.clone(), inner, e).unwrap();
            let r = frac * rho.value(th);
            let x = [r * th.cos(), r * th.sin()];
            let tx = ring.t_exit(x).unwrap();
            let scaled = ring.t_exit([t * x[0], t * x[1]]).unwrap();
            prop_assert!((scaled - tx / t).abs() <= 1e-9);
        }
    }
}
