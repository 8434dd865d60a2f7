//! Starshapedness checks for computed potentials.
//!
//! On a ring grid every θ-line is a ray segment, so the envelope
//! `U*(x) = sup{ U(t x) : 1 ≤ t < T_x }` is a suffix maximum along each ray and
//! "every superlevel set is starshaped about the origin" is the same as "U is
//! non-increasing outward along every ray". The gradient test
//! `⟨∇U(x), x⟩ ≤ 0` is reported alongside as a diagnostic.

use crate::domains::{RadialFunction, StarshapedRing};
use crate::error::{Error, Result};
use crate::geometry::RadialConformalFactor;
use crate::solver::{RhsSpec, ScalarField};
use std::f64::consts::PI;

/// Denominator guard in the normal-direction defect.
pub const NORMAL_GUARD: f64 = 1e-12;
/// Nodes with `|∇U|` below this are skipped by the normal-direction defect.
pub const MIN_GRADIENT: f64 = 1e-8;
/// Lower bound of [`default_tolerance`].
pub const TOLERANCE_FLOOR: f64 = 1e-6;
/// Multiple of the refinement error used by [`default_tolerance`].
pub const TOLERANCE_FACTOR: f64 = 10.0;

/// Quasi-starshaped envelope: suffix maximum of `U` along every θ-line.
pub fn envelope(field: &ScalarField) -> ScalarField {
    let k = field.grid().k();
    let mut values = field.values().to_vec();
    for ray in values.chunks_mut(k) {
        for i in (0..k - 1).rev() {
            if ray[i + 1] > ray[i] {
                ray[i] = ray[i + 1];
            }
        }
    }
    ScalarField::from_parts(field.grid().clone(), values, field.exponent())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarshapeReport {
    /// `max (U* − U)` over all nodes.
    pub envelope_defect: f64,
    /// Largest total outward increase of `U` along a single θ-line.
    pub monotonicity_defect: f64,
    /// `max ⟨∇U, x⟩₊ / (|∇U||x| + ε)` over interior nodes with `|∇U| ≥ 1e-8`.
    pub normal_defect: f64,
    pub tolerance: f64,
    /// All three defects are within `tolerance`.
    pub verdict: bool,
}

pub fn starshape_report(field: &ScalarField, tol: f64) -> Result<StarshapeReport> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance must be a non-negative number, got {tol}")));
    }
    let grid = field.grid();
    let (m, k) = (grid.m(), grid.k());
    let star = envelope(field);
    let envelope_defect = star
        .values()
        .iter()
        .zip(field.values())
        .map(|(a, b)| a - b)
        .fold(0.0, f64::max);

    let monotonicity_defect = (0..m)
        .map(|j| {
            field
                .ray(j)
                .windows(2)
                .map(|w| (w[1] - w[0]).max(0.0))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);

    let gradient = field.gradient();
    let mut normal_defect = 0.0_f64;
    for j in 0..m {
        for i in 1..k - 1 {
            let g = gradient[grid.index(j, i)];
            let norm = g[0].hypot(g[1]);
            if norm < MIN_GRADIENT {
                continue;
            }
            let x = grid.node(j, i);
            let dot = g[0] * x[0] + g[1] * x[1];
            normal_defect = normal_defect.max(dot.max(0.0) / (norm * x[0].hypot(x[1]) + NORMAL_GUARD));
        }
    }

    let verdict = envelope_defect <= tol && monotonicity_defect <= tol && normal_defect <= tol;
    Ok(StarshapeReport { envelope_defect, monotonicity_defect, normal_defect, tolerance: tol, verdict })
}

/// `max(10·refinement_error, 1e-6)`.
pub fn default_tolerance(refinement_error: f64) -> f64 {
    (TOLERANCE_FACTOR * refinement_error).max(TOLERANCE_FLOOR)
}

/// Boundary of `{U > level}` as a radial function sampled at the grid angles.
///
/// On each θ-line the outermost crossing is located between bracketing nodes
/// by linear interpolation.
pub fn superlevel_boundary(field: &ScalarField, level: f64) -> Result<RadialFunction> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level must lie in (0, 1), got {level}")));
    }
    let grid = field.grid();
    let (m, k) = (grid.m(), grid.k());
    let mut radii = Vec::with_capacity(m);
    for j in 0..m {
        let ray = field.ray(j);
        let i = (0..k - 1).rev().find(|&i| ray[i] >= level && ray[i + 1] < level).ok_or_else(|| {
            Error::domain(format!("no crossing of level {level} on the ray at theta = {}", grid.theta(j)))
        })?;
        let frac = (ray[i] - level) / (ray[i] - ray[i + 1]);
        let s = grid.s(i) + frac * grid.hs();
        let r_in = grid.radius(j, 0);
        let r_out = grid.radius(j, k - 1);
        radii.push(r_in + s * (r_out - r_in));
    }
    RadialFunction::from_samples(radii)
}

/// `U(x) = 1 − |x − c|²`: superlevel sets are disks about `c`, so rays from the
/// origin that pass near `c` see `U` rise before it falls.
pub fn off_center_bump(grid: &crate::solver::RingGrid, center: [f64; 2]) -> Result<ScalarField> {
    ScalarField::from_fn(grid, |x| {
        let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
        1.0 - dx * dx - dy * dy
    })
}

/// Sample counts for [`condition_margin`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionSamples {
    /// Points per direction: `x_count²` base points are used.
    pub x_count: usize,
    pub tau_count: usize,
    pub s_count: usize,
    /// Gradient directions; each is used at magnitudes 0.1, 1 and 10.
    pub v_count: usize,
}

impl Default for ConditionSamples {
    fn default() -> Self {
        Self { x_count: 12, tau_count: 8, s_count: 6, v_count: 8 }
    }
}

/// Gradient magnitudes probed by [`condition_margin`].
pub const GRADIENT_MAGNITUDES: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionSample {
    pub x: [f64; 2],
    pub tau: f64,
    pub s: f64,
    pub v: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionMargin {
    /// Minimum of `τ^q Ψ(τx)^q F(τx, s, v/τ) − Ψ(x)^q F(x, s, v)`.
    pub margin: f64,
    pub argmin: ConditionSample,
}

/// Samples the dilation condition on `F` and returns its worst margin.
///
/// Base points sit at cell centres of an `x_count × x_count` (angle, radial
/// fraction) lattice inside the ring, `τ` runs uniformly over `[1, T_x]`, `s`
/// over `[0, 1]`, and `v` over `v_count` unit directions at each magnitude in
/// [`GRADIENT_MAGNITUDES`]. The condition holds on the samples iff the margin
/// is non-negative.
pub fn condition_margin(
    rhs: &RhsSpec,
    factor: &RadialConformalFactor,
    q: f64,
    ring: &StarshapedRing,
    samples: ConditionSamples,
) -> Result<ConditionMargin> {
    let ConditionSamples { x_count, tau_count, s_count, v_count } = samples;
    if x_count < 2 || tau_count < 2 || s_count < 2 || v_count < 2 {
        return Err(Error::invalid(format!("condition sampling needs every count >= 2, got {samples:?}")));
    }
    if !(q >= 2.0 && q.is_finite()) {
        return Err(Error::invalid(format!("q must be >= 2, got {q}")));
    }
    let weight = |x: [f64; 2]| -> Result<f64> { Ok(factor.psi(x[0].hypot(x[1]))?.powf(q)) };
    let mut best: Option<ConditionMargin> = None;
    for a in 0..x_count {
        let theta = 2.0 * PI * (a as f64 + 0.5) / x_count as f64;
        let (sin, cos) = theta.sin_cos();
        let (r_in, r_out) = (ring.inner().value(theta), ring.outer().value(theta));
        for b in 0..x_count {
            let r = r_in + (b as f64 + 0.5) / x_count as f64 * (r_out - r_in);
            let x = [r * cos, r * sin];
            let t_exit = ring.t_exit(x)?;
            let base_weight = weight(x)?;
            for c in 0..tau_count {
                let tau = 1.0 + (t_exit - 1.0) * c as f64 / (tau_count - 1) as f64;
                let y = [tau * x[0], tau * x[1]];
                let scaled_weight = tau.powf(q) * weight(y)?;
                for e in 0..s_count {
                    let s = e as f64 / (s_count - 1) as f64;
                    for d in 0..v_count {
                        let phi = 2.0 * PI * d as f64 / v_count as f64;
                        for magnitude in GRADIENT_MAGNITUDES {
                            let v = [magnitude * phi.cos(), magnitude * phi.sin()];
                            let lhs = scaled_weight * rhs.eval(y, s, [v[0] / tau, v[1] / tau]);
                            let margin = lhs - base_weight * rhs.eval(x, s, v);
                            if best.map_or(true, |b| margin < b.margin) {
                                best = Some(ConditionMargin { margin, argmin: ConditionSample { x, tau, s, v } });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(best.expect("sample counts are positive"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_linear, RingGrid, SolverConfig};
    use proptest::prelude::*;

    fn euclid() -> RadialConformalFactor {
        RadialConformalFactor::euclidean(1.0).unwrap()
    }

    fn grid(r1: f64, r0: f64, m: usize, k: usize) -> RingGrid {
        RingGrid::new(&StarshapedRing::annulus(r1, r0, euclid()).unwrap(), m, k).unwrap()
    }

    #[test]
    fn suffix_maximum_of_a_single_bump() {
        let g = grid(1.0, 2.0, 8, 5);
        let field = ScalarField::from_fn(&g, |x| {
            let s = x[0].hypot(x[1]) - 1.0;
            s * (1.0 - s)
        })
        .unwrap();
        let star = envelope(&field);
        let ray = star.ray(3);
        let expected = [0.25, 0.25, 0.25, 0.1875, 0.0];
        for (a, b) in ray.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{ray:?}");
        }
    }

    #[test]
    fn envelope_of_a_monotone_field_is_itself() {
        let g = grid(1.0, 2.0, 16, 16);
        let out = solve_linear(&g, &RhsSpec::zero(), &SolverConfig::default()).unwrap();
        let star = envelope(&out.field);
        assert_eq!(star.values(), out.field.values());
        assert_eq!(star.exponent(), Some(2.0));
    }

    #[test]
    fn harmonic_potential_passes() {
        let g = grid(1.0, 2.0, 32, 64);
        let out = solve_linear(&g, &RhsSpec::zero(), &SolverConfig::default()).unwrap();
        let report = starshape_report(&out.field, 5e-3).unwrap();
        assert!(report.verdict, "{report:?}");
        assert_eq!(report.envelope_defect, 0.0);
        assert_eq!(report.monotonicity_defect, 0.0);
        assert_eq!(report.normal_defect, 0.0);
    }

    #[test]
    fn constant_field_has_no_defects() {
        let g = grid(1.0, 2.0, 16, 8);
        let report = starshape_report(&ScalarField::from_fn(&g, |_| 0.5).unwrap(), 0.0).unwrap();
        assert_eq!(
            (report.envelope_defect, report.monotonicity_defect, report.normal_defect),
            (0.0, 0.0, 0.0)
        );
        assert!(report.verdict);
    }

    #[test]
    fn bump_fails_the_report() {
        let g = grid(0.1, 1.0, 64, 91);
        let bump = off_center_bump(&g, [0.3, 0.0]).unwrap();
        let report = starshape_report(&bump, 1e-6).unwrap();
        assert!(!report.verdict);
        // along θ = 0 the field rises by (0.3 − 0.1)² before it falls
        assert!((report.monotonicity_defect - 0.04).abs() < 1e-12, "{report:?}");
        assert!(report.normal_defect > 0.5);
    }

    #[test]
    fn logarithmic_levels_are_circles() {
        let g = grid(1.0, 2.0, 32, 64);
        let out = solve_linear(&g, &RhsSpec::zero(), &SolverConfig::default()).unwrap();
        let rho = superlevel_boundary(&out.field, 0.5).unwrap();
        assert!(rho.samples().iter().all(|r| (r - 2f64.sqrt()).abs() < 5e-3));
        let near_inner = superlevel_boundary(&out.field, 0.999).unwrap();
        assert!(near_inner.samples().iter().all(|r| r - 1.0 < g.hs()));
        assert!(superlevel_boundary(&out.field, 1.0).is_err());
    }

    #[test]
    fn missing_crossing_is_an_error() {
        let g = grid(1.0, 2.0, 8, 8);
        let flat = ScalarField::from_fn(&g, |_| 0.2).unwrap();
        assert!(matches!(superlevel_boundary(&flat, 0.5), Err(Error::Domain(_))));
    }

    fn ring(outer: f64) -> StarshapedRing {
        StarshapedRing::annulus(0.5, outer, euclid()).unwrap()
    }

    #[test]
    fn zero_source_has_zero_margin() {
        let out = condition_margin(&RhsSpec::zero(), &euclid(), 3.0, &ring(2.0), ConditionSamples::default()).unwrap();
        assert_eq!(out.margin, 0.0);
    }

    #[test]
    fn state_source_margin_sign_tracks_the_factor() {
        let rhs = RhsSpec::power_law(1.0, 0.0, 1.0);
        let samples = ConditionSamples::default();
        let flat = condition_margin(&rhs, &euclid(), 2.0, &ring(2.0), samples).unwrap();
        assert!(flat.margin >= 0.0, "{flat:?}");
        let sphere = RadialConformalFactor::sphere(1.0).unwrap();
        let round = ring(2.0).with_factor(sphere.clone()).unwrap();
        let curved = condition_margin(&rhs, &sphere, 2.0, &round, samples).unwrap();
        assert!(curved.margin < 0.0, "{curved:?}");
        let r = curved.argmin.x[0].hypot(curved.argmin.x[1]);
        assert!(r * curved.argmin.tau > 1.0);
    }

    fn monotone_rays(m: usize, k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0..1.0_f64, m * k)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn envelope_is_minimal_dominating_and_idempotent(
            values in monotone_rays(8, 6),
            lift in prop::collection::vec(0.0..0.5_f64, 48),
        ) {
            let g = grid(1.0, 2.0, 8, 6);
            let field = ScalarField::new(g.clone(), values).unwrap();
            let star = envelope(&field);
            let twice = envelope(&star);
            prop_assert_eq!(twice.values(), star.values());
            for (a, b) in star.values().iter().zip(field.values()) {
                prop_assert!(a >= b);
            }
            // any ray-monotone majorant dominates the envelope
            let mut w: Vec<f64> = field.values().iter().zip(&lift).map(|(v, l)| v + l).collect();
            for ray in w.chunks_mut(6) {
                for i in (0..5).rev() {
                    ray[i] = ray[i].max(ray[i + 1]);
                }
            }
            for (wv, sv) in w.iter().zip(star.values()) {
                prop_assert!(wv >= sv);
            }
            let report = starshape_report(&field, 0.0).unwrap();
            prop_assert_eq!(report.envelope_defect == 0.0, report.monotonicity_defect == 0.0);
        }

        #[test]
        fn margin_scales_linearly(c in 0.1..10.0_f64, outer in 1.2..2.5_f64) {
            let sphere = RadialConformalFactor::sphere(1.0).unwrap();
            let round = StarshapedRing::annulus(0.5, outer, sphere.clone()).unwrap();
            let rhs = RhsSpec::power_law(1.0, 1.0, 1.0);
            let samples = ConditionSamples { x_count: 4, tau_count: 4, s_count: 3, v_count: 2 };
            let base = condition_margin(&rhs, &sphere, 2.5, &round, samples).unwrap();
            let scaled = condition_margin(&rhs.scaled(c), &sphere, 2.5, &round, samples).unwrap();
            prop_assert!((scaled.margin - c * base.margin).abs() <= 1e-12);
        }
    }
}
