//! Radial capacitary potentials of round annuli by quadrature.
//!
//! For `U = U(r)` on `R1 < r < R0` in `n` dimensions the divergence form of the
//! chart equation is `(ψ^{n−q} r^{n−1} |U'|^{q−2} U')' = 0`, so
//! `ψ^{n−q} r^{n−1} |U'|^{q−1} = c` and, since `U` decreases,
//!
//! ```text
//! U'(r) = −(c ψ(r)^{q−n} r^{1−n})^{1/(q−1)}.
//! ```
//!
//! With `U(R1) = 1`, `U(R0) = 0` this integrates to
//! `U(r) = ∫_r^{R0} g / ∫_{R1}^{R0} g` with `g(s) = (ψ(s)^{q−n} s^{1−n})^{1/(q−1)}`.
//! At `n = q` the factor drops out entirely.

use crate::error::{Error, Result};
use crate::geometry::RadialConformalFactor;
use crate::numerics::adaptive_simpson;
use crate::solver::ScalarField;

/// Target relative accuracy of every quadrature.
pub const RELATIVE_TOL: f64 = 1e-10;

/// Relative tolerance used to match a field's ring against the potential.
const RADIUS_MATCH: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RadialPotential {
    factor: RadialConformalFactor,
    n: usize,
    q: f64,
    r1: f64,
    r0: f64,
    total: f64,
    abs_tol: f64,
}

impl RadialPotential {
    pub fn new(factor: RadialConformalFactor, n: usize, q: f64, r1: f64, r0: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("dimension must be >= 2, got {n}")));
        }
        if !(q >= 2.0 && q.is_finite()) {
            return Err(Error::invalid(format!("q must be >= 2, got {q}")));
        }
        if !(r1 > 0.0 && r1 < r0) {
            return Err(Error::invalid(format!(
                "radii must satisfy 0 < R1 < R0: inner radius must be strictly less than outer radius (got {r1}, {r0})"
            )));
        }
        if r0 >= factor.domain_radius() {
            return Err(Error::invalid(format!(
                "outer radius {r0} is not below the domain radius {} of {factor}",
                factor.domain_radius()
            )));
        }
        let mut pot = Self { factor, n, q, r1, r0, total: 1.0, abs_tol: 0.0 };
        // g is monotone on [R1, R0], so its endpoint values bound the integral
        let scale = (r0 - r1) * pot.integrand(r1).min(pot.integrand(r0));
        pot.abs_tol = 0.1 * RELATIVE_TOL * scale;
        pot.total = pot.integral(r1, r0);
        Ok(pot)
    }

    pub fn factor(&self) -> &RadialConformalFactor {
        &self.factor
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn radii(&self) -> (f64, f64) {
        (self.r1, self.r0)
    }

    /// `(ψ(s)^{q−n} s^{1−n})^{1/(q−1)}`.
    pub fn integrand(&self, s: f64) -> f64 {
        let psi = self.factor.psi_and_slope(s).0;
        let exponent = 1.0 / (self.q - 1.0);
        let n = self.n as f64;
        let psi_part = if self.q == n { 1.0 } else { psi.powf((self.q - n) * exponent) };
        psi_part * s.powf((1.0 - n) * exponent)
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        adaptive_simpson(|s| self.integrand(s), a, b, self.abs_tol)
    }

    /// Potential at coordinate radius `r ∈ [R1, R0]`.
    pub fn value(&self, r: f64) -> Result<f64> {
        if !(r >= self.r1 && r <= self.r0) {
            return Err(Error::domain(format!("radius {r} is outside [{}, {}]", self.r1, self.r0)));
        }
        if r == self.r1 {
            return Ok(1.0);
        }
        if r == self.r0 {
            return Ok(0.0);
        }
        // integrate over the shorter piece
        if r - self.r1 < self.r0 - r {
            Ok(1.0 - self.integral(self.r1, r) / self.total)
        } else {
            Ok(self.integral(r, self.r0) / self.total)
        }
    }

    /// `resolution` equispaced `(r, U(r))` pairs from `R1` to `R0`.
    pub fn table(&self, resolution: usize) -> Result<Vec<(f64, f64)>> {
        if resolution < 2 {
            return Err(Error::invalid(format!("table needs at least 2 rows, got {resolution}")));
        }
        (0..resolution)
            .map(|i| {
                let r = if i == resolution - 1 {
                    self.r0
                } else {
                    self.r1 + (self.r0 - self.r1) * i as f64 / (resolution - 1) as f64
                };
                Ok((r, self.value(r)?))
            })
            .collect()
    }
}

fn round_radii_of(field: &ScalarField) -> Result<(f64, f64)> {
    field
        .grid()
        .ring()
        .round_radii()
        .ok_or_else(|| Error::invalid("comparison needs a round annulus, but the ring is not round"))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= RADIUS_MATCH * a.abs().max(b.abs())
}

/// Sup-norm distance between a round-annulus solve and the radial potential.
///
/// The ring radii, conformal factor and exponent of the field must match the
/// potential, and the potential must be two-dimensional.
pub fn compare_round(field: &ScalarField, pot: &RadialPotential) -> Result<f64> {
    let (r1, r0) = round_radii_of(field)?;
    if !close(r1, pot.r1) || !close(r0, pot.r0) {
        return Err(Error::invalid(format!(
            "ring radii ({r1}, {r0}) do not match the potential ({}, {})",
            pot.r1, pot.r0
        )));
    }
    let grid = field.grid();
    if grid.ring().factor() != &pot.factor {
        return Err(Error::invalid(format!(
            "field factor {} does not match potential factor {}",
            grid.ring().factor(),
            pot.factor
        )));
    }
    if pot.n != 2 {
        return Err(Error::invalid(format!("grid fields are two-dimensional, potential has n = {}", pot.n)));
    }
    match field.exponent() {
        Some(q) if q == pot.q => {}
        other => {
            return Err(Error::invalid(format!(
                "field exponent {other:?} does not match potential q = {}",
                pot.q
            )))
        }
    }
    // every ray of a round annulus shares its node radii
    let exact: Vec<f64> = (0..grid.k())
        .map(|i| pot.value(grid.radius(0, i).clamp(pot.r1, pot.r0)))
        .collect::<Result<_>>()?;
    let mut worst = 0.0_f64;
    for j in 0..grid.m() {
        for (i, u) in field.ray(j).iter().enumerate() {
            worst = worst.max((u - exact[i]).abs());
        }
    }
    Ok(worst)
}

/// Sup-norm distance between a round-annulus field and a tabulated radial
/// profile, linearly interpolated in `r`.
pub fn compare_table(field: &ScalarField, table: &[(f64, f64)]) -> Result<f64> {
    round_radii_of(field)?;
    if table.len() < 2 || table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::invalid("table needs at least two rows with increasing radii"));
    }
    let lookup = |r: f64| -> Result<f64> {
        let p = table.partition_point(|&(t, _)| t < r);
        if p < table.len() && table[p].0 == r {
            return Ok(table[p].1);
        }
        if p == 0 || p == table.len() {
            return Err(Error::domain(format!("radius {r} is outside the table")));
        }
        let ((ra, ua), (rb, ub)) = (table[p - 1], table[p]);
        Ok(ua + (ub - ua) * (r - ra) / (rb - ra))
    };
    let grid = field.grid();
    let mut worst = 0.0_f64;
    for j in 0..grid.m() {
        for i in 0..grid.k() {
            worst = worst.max((field.get(j, i) - lookup(grid.radius(j, i))?).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn euclid() -> RadialConformalFactor {
        RadialConformalFactor::euclidean(1.0).unwrap()
    }

    #[test]
    fn planar_harmonic_is_logarithmic() {
        let pot = RadialPotential::new(euclid(), 2, 2.0, 1.0, 2.0).unwrap();
        assert!((pot.value(2f64.sqrt()).unwrap() - 0.5).abs() < 1e-12);
        for r in [1.1_f64, 1.37, 1.8, 1.99] {
            let exact = (2.0 / r).ln() / 2f64.ln();
            assert!((pot.value(r).unwrap() - exact).abs() <= RELATIVE_TOL * exact);
        }
    }

    #[test]
    fn three_dimensional_harmonic_is_inverse_radius() {
        let pot = RadialPotential::new(euclid(), 3, 2.0, 1.0, 2.0).unwrap();
        assert!((pot.value(4.0 / 3.0).unwrap() - 0.5).abs() < 1e-12);
        let r = 1.7;
        let exact = (1.0 / r - 0.5) / 0.5;
        assert!((pot.value(r).unwrap() - exact).abs() <= RELATIVE_TOL * exact);
    }

    #[test]
    fn planar_three_laplacian_is_square_root() {
        let pot = RadialPotential::new(euclid(), 2, 3.0, 1.0, 2.0).unwrap();
        let exact = (2f64.sqrt() - 1.5f64.sqrt()) / (2f64.sqrt() - 1.0);
        assert!((pot.value(1.5).unwrap() - exact).abs() <= RELATIVE_TOL * exact);
    }

    #[test]
    fn boundary_values_and_domain() {
        let f = RadialConformalFactor::hyperbolic(1.0).unwrap();
        let pot = RadialPotential::new(f, 2, 3.0, 0.3, 0.8).unwrap();
        assert_eq!(pot.value(0.3).unwrap(), 1.0);
        assert_eq!(pot.value(0.8).unwrap(), 0.0);
        assert!(matches!(pot.value(0.81), Err(Error::Domain(_))));
        assert!(RadialPotential::new(euclid(), 2, 2.0, 2.0, 2.0).is_err());
        assert!(RadialPotential::new(euclid(), 1, 2.0, 1.0, 2.0).is_err());
        assert!(RadialPotential::new(RadialConformalFactor::hyperbolic(1.0).unwrap(), 2, 2.0, 0.5, 1.0).is_err());
        let table = pot.table(5).unwrap();
        assert_eq!(table.len(), 5);
        assert_eq!(table[4], (0.8, 0.0));
    }

    #[test]
    fn factor_drops_out_when_q_equals_n() {
        for n in [2usize, 3, 4] {
            let q = n as f64;
            let e = RadialPotential::new(euclid(), n, q, 0.4, 0.9).unwrap();
            let s = RadialPotential::new(RadialConformalFactor::sphere(1.0).unwrap(), n, q, 0.4, 0.9).unwrap();
            let h = RadialPotential::new(RadialConformalFactor::hyperbolic(1.0).unwrap(), n, q, 0.4, 0.9).unwrap();
            for r in [0.45, 0.6, 0.85] {
                let v = e.value(r).unwrap();
                assert!((v - s.value(r).unwrap()).abs() <= 1e-12);
                assert!((v - h.value(r).unwrap()).abs() <= 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn strictly_decreasing(a in 0.3..0.8_f64, b in 0.3..0.8_f64, q in 2.0..5.0_f64, n in 2usize..5) {
            prop_assume!((a - b).abs() > 1e-6);
            let f = RadialConformalFactor::sphere(1.0).unwrap();
            let pot = RadialPotential::new(f, n, q, 0.3, 0.8).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(pot.value(lo).unwrap() > pot.value(hi).unwrap());
        }
    }
}
