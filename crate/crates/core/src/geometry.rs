//! Radial conformal factors of rotationally symmetric charts.
//!
//! A chart with `g_ij = ψ(|x|)² δ_ij` is described entirely by the positive
//! function `ψ` on `[0, domain_radius)`. The model spaces have closed forms:
//! euclidean `ψ ≡ λ`, the round sphere of radius `r` under stereographic
//! projection `ψ(t) = 2r²/(r² + t²)`, and the Poincaré disk of radius `r`
//! `ψ(t) = 2r²/(r² − t²)`. Tabulated factors are interpolated by PCHIP so that
//! `ψ'` is continuous.
//!
//! [`GeodesicRadialProfile`] follows a radial unit-speed geodesic from the
//! chart origin: its coordinate radius `r(t)` satisfies `ψ(r) r' = 1`, i.e.
//! `Φ(r(t)) = t` with `Φ(r) = ∫₀ʳ ψ`.

use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, find_root, Pchip};
use std::fmt;

/// Absolute tolerance of the arc-length quadrature.
pub const ARC_LENGTH_TOL: f64 = 1e-10;
/// Tolerance in `r` when inverting the arc length.
pub const INVERSION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum FactorKind {
    Euclidean { lambda: f64 },
    Sphere { radius: f64 },
    Hyperbolic { radius: f64 },
    Custom(Pchip),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialConformalFactor {
    kind: FactorKind,
    domain_radius: f64,
}

impl RadialConformalFactor {
    pub fn euclidean(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("euclidean factor needs lambda > 0, got {lambda}")));
        }
        Ok(Self { kind: FactorKind::Euclidean { lambda }, domain_radius: f64::INFINITY })
    }

    pub fn sphere(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("sphere factor needs radius > 0, got {radius}")));
        }
        Ok(Self { kind: FactorKind::Sphere { radius }, domain_radius: f64::INFINITY })
    }

    pub fn hyperbolic(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("hyperbolic factor needs radius > 0, got {radius}")));
        }
        Ok(Self { kind: FactorKind::Hyperbolic { radius }, domain_radius: radius })
    }

    /// Builds a factor from `(t, ψ(t))` samples. The table must start at `t = 0`,
    /// be strictly increasing in `t`, hold positive values, and have an
    /// interpolated slope at the origin that is negligible against the first
    /// secant slope (`ψ'(0) = 0` for a smooth chart).
    pub fn custom(t: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if t.first().copied() != Some(0.0) {
            return Err(Error::invalid("custom factor table must start at t = 0"));
        }
        if psi.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("custom factor values must be positive"));
        }
        let table = Pchip::new(t, psi)?;
        let knots = table.knots();
        let values = table.values();
        let secant = ((values[1] - values[0]) / knots[1]).abs();
        let slope0 = table.eval(0.0).1.abs();
        if slope0 > 0.05 * secant + 1e-9 {
            return Err(Error::invalid(format!(
                "custom factor slope at the origin is {slope0:e}; a smooth chart needs psi'(0) = 0"
            )));
        }
        // Positivity between knots: PCHIP never overshoots, so the minimum sample bounds it.
        let domain_radius = *knots.last().unwrap();
        Ok(Self { kind: FactorKind::Custom(table), domain_radius })
    }

    /// Reads a two-column whitespace-separated `t psi` table; `#` starts a comment.
    pub fn custom_from_text(text: &str) -> Result<Self> {
        let mut t = Vec::new();
        let mut psi = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|c| !c.is_empty()).collect();
            if cols.len() != 2 {
                return Err(Error::Config(format!("factor table line {}: expected 2 columns", lineno + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Config(format!("factor table line {}: {e}", lineno + 1)))
            };
            t.push(parse(cols[0])?);
            psi.push(parse(cols[1])?);
        }
        Self::custom(t, psi)
    }

    pub fn kind(&self) -> &FactorKind {
        &self.kind
    }

    /// Supremum of coordinate radii covered by the chart (`∞` when unbounded).
    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) || t >= self.domain_radius {
            return Err(Error::domain(format!(
                "radius {t} outside [0, {}) for {self}",
                self.domain_radius
            )));
        }
        Ok(())
    }

    /// `ψ(t)` and `ψ'(t)` without the domain check; callers guarantee `0 ≤ t < ρ`.
    pub(crate) fn psi_and_slope(&self, t: f64) -> (f64, f64) {
        match &self.kind {
            FactorKind::Euclidean { lambda } => (*lambda, 0.0),
            FactorKind::Sphere { radius } => {
                let r2 = radius * radius;
                let den = r2 + t * t;
                (2.0 * r2 / den, -4.0 * r2 * t / (den * den))
            }
            FactorKind::Hyperbolic { radius } => {
                let r2 = radius * radius;
                let den = r2 - t * t;
                (2.0 * r2 / den, 4.0 * r2 * t / (den * den))
            }
            FactorKind::Custom(table) => table.eval(t),
        }
    }

    /// `ψ(t)`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.psi_and_slope(t).0)
    }

    /// `ψ'(t)`.
    pub fn psi_prime(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.psi_and_slope(t).1)
    }

    /// Euclidean gradient of `log Ψ` with `Ψ(x) = ψ(|x|)`; zero at the origin.
    pub fn log_psi_gradient(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let r = x[0].hypot(x[1]);
        self.check(r)?;
        if r == 0.0 {
            return Ok([0.0, 0.0]);
        }
        let (psi, slope) = self.psi_and_slope(r);
        let c = slope / (psi * r);
        Ok([c * x[0], c * x[1]])
    }

    /// `Φ(r) = ∫₀ʳ ψ(s) ds`.
    pub fn arc_length(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(adaptive_simpson(|s| self.psi_and_slope(s).0, 0.0, r, ARC_LENGTH_TOL))
    }
}

impl fmt::Display for RadialConformalFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FactorKind::Euclidean { lambda } => write!(f, "euclidean(lambda={lambda})"),
            FactorKind::Sphere { radius } => write!(f, "sphere(r={radius})"),
            FactorKind::Hyperbolic { radius } => write!(f, "hyperbolic(r={radius})"),
            FactorKind::Custom(table) => write!(
                f,
                "custom(rows={},t_max={})",
                table.knots().len(),
                self.domain_radius
            ),
        }
    }
}

/// Radial unit-speed geodesic from the chart origin to a point at coordinate radius `r_p`.
#[derive(Debug, Clone)]
pub struct GeodesicRadialProfile {
    factor: RadialConformalFactor,
    r_p: f64,
    arc_length_total: f64,
}

impl GeodesicRadialProfile {
    pub fn new(factor: RadialConformalFactor, r_p: f64) -> Result<Self> {
        if !(r_p > 0.0) {
            return Err(Error::invalid(format!("endpoint radius must be positive, got {r_p}")));
        }
        let arc_length_total = factor.arc_length(r_p)?;
        Ok(Self { factor, r_p, arc_length_total })
    }

    pub fn factor(&self) -> &RadialConformalFactor {
        &self.factor
    }

    pub fn r_p(&self) -> f64 {
        self.r_p
    }

    pub fn arc_length_total(&self) -> f64 {
        self.arc_length_total
    }

    /// Coordinate radius reached after arc length `t ∈ [0, Φ(r_p)]`.
    pub fn radius_at(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.arc_length_total).contains(&t) {
            return Err(Error::domain(format!(
                "arc length {t} outside [0, {}]",
                self.arc_length_total
            )));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let phi = |r: f64| adaptive_simpson(|s| self.factor.psi_and_slope(s).0, 0.0, r, ARC_LENGTH_TOL);
        find_root(|r| phi(r) - t, 0.0, self.r_p, INVERSION_TOL).map_err(|e| match e {
            Error::RootFinding { lo, hi, .. } => Error::RootFinding { target: t, lo, hi },
            other => other,
        })
    }

    /// Largest centered second difference of `α(t) = log r(t)` over
    /// `t_k = k·Φ(r_p)/samples`, `k = 1..=samples`. Non-positive values mean
    /// `α` is concave to discretization accuracy.
    pub fn alpha_concavity_defect(&self, samples: usize) -> Result<f64> {
        if samples < 3 {
            return Err(Error::invalid("alpha concavity needs at least 3 samples"));
        }
        let step = self.arc_length_total / samples as f64;
        let alpha = (1..=samples)
            .map(|k| self.radius_at(step * k as f64).map(f64::ln))
            .collect::<Result<Vec<_>>>()?;
        Ok(alpha
            .windows(3)
            .map(|w| (w[2] - 2.0 * w[1] + w[0]) / (step * step))
            .fold(f64::NEG_INFINITY, f64::max))
    }
}
