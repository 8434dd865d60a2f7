//! Truncation error of the discrete operator on closed-form fields.

use super::grid::RingGrid;
use super::operator::Operator;
use super::SolverConfig;
use crate::error::Result;
use crate::geometry::RadialConformalFactor;

/// A twice-differentiable field with closed-form derivatives.
pub trait ExactField {
    fn value(&self, x: [f64; 2]) -> f64;
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
    fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2];
}

pub struct ConstantField(pub f64);

impl ExactField for ConstantField {
    fn value(&self, _: [f64; 2]) -> f64 {
        self.0
    }
    fn gradient(&self, _: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn hessian(&self, _: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0, 0.0], [0.0, 0.0]]
    }
}

/// `log |x|`.
pub struct LogRadius;

impl ExactField for LogRadius {
    fn value(&self, x: [f64; 2]) -> f64 {
        x[0].hypot(x[1]).ln()
    }
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let r2 = x[0] * x[0] + x[1] * x[1];
        [x[0] / r2, x[1] / r2]
    }
    fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let r4 = r2 * r2;
        [
            [(r2 - 2.0 * x[0] * x[0]) / r4, -2.0 * x[0] * x[1] / r4],
            [-2.0 * x[0] * x[1] / r4, (r2 - 2.0 * x[1] * x[1]) / r4],
        ]
    }
}

/// `c·|x|^p`.
pub struct RadialPower {
    pub coefficient: f64,
    pub power: f64,
}

impl ExactField for RadialPower {
    fn value(&self, x: [f64; 2]) -> f64 {
        self.coefficient * x[0].hypot(x[1]).powf(self.power)
    }
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let r = x[0].hypot(x[1]);
        let g = self.coefficient * self.power * r.powf(self.power - 2.0);
        [g * x[0], g * x[1]]
    }
    fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let (c, p) = (self.coefficient, self.power);
        let r = x[0].hypot(x[1]);
        let a = c * p * r.powf(p - 2.0);
        let b = c * p * (p - 2.0) * r.powf(p - 4.0);
        [[a + b * x[0] * x[0], b * x[0] * x[1]], [b * x[0] * x[1], a + b * x[1] * x[1]]]
    }
}

type ValueFn = Box<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
type HessFn = Box<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync>;

/// Field assembled from user closures.
pub struct ClosedForm {
    pub value: ValueFn,
    pub gradient: GradFn,
    pub hessian: HessFn,
}

impl ExactField for ClosedForm {
    fn value(&self, x: [f64; 2]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        (self.gradient)(x)
    }
    fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        (self.hessian)(x)
    }
}

/// `div(a∇U) + (n−q) a ⟨∇ log Ψ, ∇U⟩` with `a = (|∇U|² + ε²)^{(q−2)/2}`,
/// evaluated from closed-form derivatives.
pub fn exact_operator(
    field: &dyn ExactField,
    factor: &RadialConformalFactor,
    cfg: &SolverConfig,
    x: [f64; 2],
) -> Result<f64> {
    let g = field.gradient(x);
    let h = field.hessian(x);
    let q = cfg.q;
    let reg = g[0] * g[0] + g[1] * g[1] + cfg.epsilon * cfg.epsilon;
    let a = reg.powf(0.5 * (q - 2.0));
    let laplacian = h[0][0] + h[1][1];
    let ghg = g[0] * (h[0][0] * g[0] + h[0][1] * g[1]) + g[1] * (h[1][0] * g[0] + h[1][1] * g[1]);
    let dlog = factor.log_psi_gradient(x)?;
    let drift = (cfg.n as f64 - q) * a * (dlog[0] * g[0] + dlog[1] * g[1]);
    Ok(a * laplacian + (q - 2.0) * reg.powf(0.5 * (q - 4.0)) * ghg + drift)
}

/// Sup norm over interior nodes of the discrete operator applied to the
/// sampled field minus the exact operator value.
pub fn manufactured_residual(grid: &RingGrid, cfg: &SolverConfig, exact: &dyn ExactField) -> Result<f64> {
    cfg.validate()?;
    let values: Vec<f64> = grid.nodes().iter().map(|&x| exact.value(x)).collect();
    let op = Operator::new(grid, &values, cfg.q, cfg.n as f64, cfg.epsilon);
    let factor = grid.ring().factor();
    let mut worst = 0.0_f64;
    for j in 0..grid.m() {
        for i in 1..grid.k() - 1 {
            let psi = factor.psi_and_slope(grid.radius(j, i)).0;
            let weight = op.node_jacobian(j, i) * psi.powf(cfg.n as f64 - cfg.q);
            let discrete = op.apply(&values, j, i) / weight;
            let continuous = exact_operator(exact, factor, cfg, grid.node(j, i))?;
            worst = worst.max((discrete - continuous).abs());
        }
    }
    Ok(worst)
}

/// Observed orders `log₂(e_h / e_{h/2})` between consecutive residuals.
pub fn convergence_orders(residuals: &[f64]) -> Vec<f64> {
    residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
