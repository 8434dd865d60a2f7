//! Dirichlet solves for the chart-transformed capacitary problems.
//!
//! `U = 1` on the inner boundary (`s = 0`), `U = 0` on the outer boundary
//! (`s = 1`), and in between
//! `Δ_q U + (n−q)|∇U|^{q−2}⟨∇ log Ψ, ∇U⟩ = Ψ^q F(x, U, ∇U)`.
//! See [`operator`] for the discretization. The q-Laplacian is linearized by
//! Picard (lagged diffusivity) iteration; every linear system is solved by a
//! sparse LU factorization, which keeps the results deterministic.

mod dump;
mod grid;
mod manufactured;
mod operator;

pub use dump::{read_dump, write_dump, DumpHeader, DumpRow};
pub use grid::{RingGrid, ScalarField, MIN_JACOBIAN};
pub use manufactured::{
    convergence_orders, exact_operator, manufactured_residual, ClosedForm, ConstantField, ExactField,
    LogRadius, RadialPower,
};

use crate::error::{Error, Result};
use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::SparseColMat;
use operator::Operator;
use std::fmt;
use std::sync::Arc;

/// Spatial dimension of the grid solves.
pub const DIMENSION: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Exponent of the q-Laplacian; `q = 2` is the linear case.
    pub q: f64,
    /// Spatial dimension; the grid solver only supports 2.
    pub n: usize,
    /// Gradient regularization inside the diffusion coefficient.
    pub epsilon: f64,
    /// Sup-norm update size that ends the Picard iteration.
    pub picard_tol: f64,
    pub max_picard: usize,
    /// Scaled sup-norm residual bound for each linear solve.
    pub linear_tol: f64,
    /// Dirichlet values `(inner, outer)`; the capacitary problem uses `(1, 0)`.
    pub boundary: (f64, f64),
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            q: 2.0,
            n: DIMENSION,
            epsilon: 1e-6,
            picard_tol: 1e-8,
            max_picard: 200,
            linear_tol: 1e-10,
            boundary: (1.0, 0.0),
        }
    }
}

impl SolverConfig {
    pub fn with_q(q: f64) -> Self {
        Self { q, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 2.0 && self.q.is_finite()) {
            return Err(Error::invalid(format!("q must be >= 2, got {}", self.q)));
        }
        if self.n != DIMENSION {
            return Err(Error::invalid(format!("grid solves are two-dimensional, got n = {}", self.n)));
        }
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("picard_tol", self.picard_tol),
            ("linear_tol", self.linear_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_picard == 0 {
            return Err(Error::invalid("max_picard must be at least 1"));
        }
        if !(self.boundary.0.is_finite() && self.boundary.1.is_finite()) {
            return Err(Error::invalid("boundary values must be finite"));
        }
        Ok(())
    }
}

type SourceFn = Arc<dyn Fn([f64; 2], f64, [f64; 2]) -> f64 + Send + Sync>;
type SpatialFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
type StateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum RhsKind {
    Zero,
    Separable { spatial: SpatialFn, state: StateFn },
    General(SourceFn),
}

/// Right-hand side `F(x, s, v)` in chart coordinates. `F` must be
/// non-negative; the starshapedness results also need it non-decreasing in `s`.
#[derive(Clone)]
pub struct RhsSpec {
    kind: RhsKind,
    label: String,
}

impl RhsSpec {
    pub fn zero() -> Self {
        Self { kind: RhsKind::Zero, label: "zero".into() }
    }

    /// `F(x, s, v) = a(x)·b(s)`.
    pub fn separable(
        label: impl Into<String>,
        spatial: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        state: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: RhsKind::Separable { spatial: Arc::new(spatial), state: Arc::new(state) },
            label: label.into(),
        }
    }

    pub fn general(
        label: impl Into<String>,
        f: impl Fn([f64; 2], f64, [f64; 2]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { kind: RhsKind::General(Arc::new(f)), label: label.into() }
    }

    /// `F(x, s, v) = c·|x|^a·s^b`.
    pub fn power_law(coefficient: f64, radius_power: f64, state_power: f64) -> Self {
        let label = format!("power(c={coefficient},radius_power={radius_power},s_power={state_power})");
        Self::separable(
            label,
            move |x: [f64; 2]| coefficient * x[0].hypot(x[1]).powf(radius_power),
            move |s: f64| if state_power == 0.0 { 1.0 } else { s.max(0.0).powf(state_power) },
        )
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, RhsKind::Zero)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: [f64; 2], s: f64, v: [f64; 2]) -> f64 {
        match &self.kind {
            RhsKind::Zero => 0.0,
            RhsKind::Separable { spatial, state } => spatial(x) * state(s),
            RhsKind::General(f) => f(x, s, v),
        }
    }

    /// Same function multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let label = format!("{}*{c}", self.label);
        match &self.kind {
            RhsKind::Zero => Self::zero(),
            _ => {
                let base = self.clone();
                Self::general(label, move |x, s, v| c * base.eval(x, s, v))
            }
        }
    }
}

impl fmt::Debug for RhsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RhsSpec({})", self.label)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub field: ScalarField,
    pub iterations: usize,
    /// Sup-norm change of the last Picard step.
    pub final_update: f64,
    pub converged: bool,
    pub update_history: Vec<f64>,
    /// Scaled residual of every linear solve.
    pub linear_residuals: Vec<f64>,
}

/// Solves the `q = 2` problem. A zero right-hand side takes a single linear
/// solve; otherwise `F` is lagged as in [`solve_qlaplace`] with the matrix
/// factored once.
pub fn solve_linear(grid: &RingGrid, rhs: &RhsSpec, cfg: &SolverConfig) -> Result<SolveOutcome> {
    if cfg.q != 2.0 {
        return Err(Error::invalid(format!("solve_linear needs q = 2, got {}", cfg.q)));
    }
    run(grid, rhs, cfg, rhs.is_zero())
}

/// Picard iteration for the q-Laplacian problem.
///
/// Each step freezes `W` from the current iterate, evaluates `F` at the current
/// iterate, solves the linear problem and relaxes toward its solution with
/// factor `ω = 2/q`, further capped at 0.8 when `F` is nonzero. Relaxed iterates
/// are clipped to the range of the boundary data. Returns the last
/// iterate flagged non-converged when `max_picard` steps are exhausted.
pub fn solve_qlaplace(grid: &RingGrid, rhs: &RhsSpec, cfg: &SolverConfig) -> Result<SolveOutcome> {
    run(grid, rhs, cfg, false)
}

/// Relaxation factor of the Picard update.
///
/// Freezing `|∇U|^{q−2}` makes the error along `∇U` change sign with
/// amplification `q − 2`; `2/q` balances that against the undamped modes.
pub fn relaxation(q: f64, rhs_is_zero: bool) -> f64 {
    let base = 2.0 / q;
    if rhs_is_zero {
        base
    } else {
        base.min(0.8)
    }
}

fn run(grid: &RingGrid, rhs: &RhsSpec, cfg: &SolverConfig, single_pass: bool) -> Result<SolveOutcome> {
    cfg.validate()?;
    faer::set_global_parallelism(faer::Parallelism::None);
    let (m, k) = (grid.m(), grid.k());
    let (inner, outer) = cfg.boundary;
    let mut u: Vec<f64> = (0..m * k)
        .map(|p| {
            let s = grid.s(p % k);
            inner * (1.0 - s) + outer * s
        })
        .collect();
    let omega = relaxation(cfg.q, rhs.is_zero());
    // F is only defined for states between the boundary values
    let (lo, hi) = (inner.min(outer), inner.max(outer));
    // with a source the reaction coefficients change between iterations
    let fixed_matrix = cfg.q == 2.0 && rhs.is_zero();
    let mut solver = LinearSolver::default();
    let mut update_history = Vec::new();
    let mut linear_residuals = Vec::new();
    let mut converged = false;
    let max_iter = if single_pass { 1 } else { cfg.max_picard };

    for iteration in 1..=max_iter {
        let op = Operator::new(grid, &u, cfg.q, cfg.n as f64, cfg.epsilon);
        let source = source_term(grid, &op, rhs, &u, cfg)?;
        let system = assemble(grid, &op, &u, &source);
        let (solution, residual) = solver.solve(&system, fixed_matrix, cfg.linear_tol)?;
        linear_residuals.push(residual);

        let step = if single_pass { 1.0 } else { omega };
        let mut update = 0.0_f64;
        for j in 0..m {
            for i in 1..k - 1 {
                let p = j * k + i;
                let target = solution[j * (k - 2) + (i - 1)];
                if !target.is_finite() {
                    return Err(Error::NotFinite { j, i, iteration });
                }
                let next = (u[p] + step * (target - u[p])).clamp(lo, hi);
                update = update.max((next - u[p]).abs());
                u[p] = next;
            }
        }
        update_history.push(update);
        if single_pass || update <= cfg.picard_tol {
            converged = true;
            break;
        }
    }

    let iterations = update_history.len();
    let final_update = if single_pass { 0.0 } else { *update_history.last().unwrap_or(&0.0) };
    Ok(SolveOutcome {
        field: ScalarField::from_parts(grid.clone(), u, Some(cfg.q)),
        iterations,
        final_update,
        converged,
        update_history,
        linear_residuals,
    })
}

/// Lagged source at the interior nodes, θ-major over `i = 1..k−1`.
///
/// `F` at the current iterate `U⁰` is split as `F⁰ = e + c·U⁰` with
/// `c = max(0, (F⁰ − F(x, 0, ∇U⁰))/U⁰) ≥ 0`, and the equation row becomes
/// `J div(W∇U) − Jψⁿc·U = Jψⁿe`. A fixed point solves the original equation;
/// the non-negative reaction term keeps iterates from overshooting below
/// zero where `W` degenerates.
struct Source {
    explicit: Vec<f64>,
    reaction: Vec<f64>,
}

fn source_term(grid: &RingGrid, op: &Operator, rhs: &RhsSpec, u: &[f64], cfg: &SolverConfig) -> Result<Source> {
    let (m, k) = (grid.m(), grid.k());
    let len = m * (k - 2);
    if rhs.is_zero() {
        return Ok(Source { explicit: vec![0.0; len], reaction: vec![0.0; len] });
    }
    let field = ScalarField::from_parts(grid.clone(), u.to_vec(), None);
    let gradient = field.gradient();
    let factor = grid.ring().factor();
    let mut explicit = Vec::with_capacity(len);
    let mut reaction = Vec::with_capacity(len);
    for j in 0..m {
        for i in 1..k - 1 {
            let p = j * k + i;
            let x = grid.node(j, i);
            let state = u[p].clamp(0.0, 1.0);
            let f = rhs.eval(x, state, gradient[p]);
            let f0 = rhs.eval(x, 0.0, gradient[p]);
            for value in [f, f0] {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::invalid(format!(
                        "right-hand side {} must be finite and non-negative, got {value} at node (j={j}, i={i})",
                        rhs.label()
                    )));
                }
            }
            let c = if state > 0.0 { ((f - f0) / state).max(0.0) } else { 0.0 };
            let psi = factor.psi_and_slope(grid.radius(j, i)).0;
            let weight = op.node_jacobian(j, i) * psi.powi(cfg.n as i32);
            explicit.push(weight * (f - c * state));
            reaction.push(weight * c);
        }
    }
    Ok(Source { explicit, reaction })
}

/// Compressed rows of the interior system.
struct LinearSystem {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    rhs: Vec<f64>,
}

fn assemble(grid: &RingGrid, op: &Operator, u: &[f64], source: &Source) -> LinearSystem {
    let (m, k) = (grid.m(), grid.k());
    let inner = k - 2;
    let n = m * inner;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(n * 9);
    let mut vals = Vec::with_capacity(n * 9);
    let mut rhs = Vec::with_capacity(n);
    row_ptr.push(0);
    let mut scratch: Vec<(usize, f64)> = Vec::with_capacity(24);
    for j in 0..m {
        for i in 1..k - 1 {
            let row = j * inner + (i - 1);
            let mut b = source.explicit[row];
            scratch.clear();
            if source.reaction[row] != 0.0 {
                scratch.push((row, -source.reaction[row]));
            }
            for t in op.row(j, i) {
                if t.i == 0 || t.i == k - 1 {
                    b -= t.coeff * u[t.j * k + t.i];
                } else {
                    scratch.push((t.j * inner + (t.i - 1), t.coeff));
                }
            }
            scratch.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for &(c, v) in &scratch {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
            rhs.push(b);
        }
    }
    LinearSystem { n, row_ptr, cols, vals, rhs }
}

impl LinearSystem {
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let ax: f64 = (self.row_ptr[r]..self.row_ptr[r + 1]).map(|p| self.vals[p] * x[self.cols[p]]).sum();
                self.rhs[r] - ax
            })
            .collect()
    }

    /// `‖b − Ax‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)`.
    fn scaled_residual(&self, x: &[f64], residual: &[f64]) -> f64 {
        let norm_a = (0..self.n)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|p| self.vals[p].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let sup = |v: &[f64]| v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let denom = norm_a * sup(x) + sup(&self.rhs);
        if denom == 0.0 {
            0.0
        } else {
            sup(residual) / denom
        }
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut triplets = Vec::with_capacity(self.vals.len());
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((r, self.cols[p], self.vals[p]));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| Error::Factorization(format!("{e:?}")))
    }
}

#[derive(Default)]
struct LinearSolver {
    symbolic: Option<SymbolicLu<usize>>,
    numeric: Option<Lu<usize, f64>>,
}

const REFINEMENT_STEPS: usize = 3;

impl LinearSolver {
    /// Solves the system, reusing the symbolic analysis across calls and the
    /// numeric factors too when `fixed_matrix` is set.
    fn solve(&mut self, system: &LinearSystem, fixed_matrix: bool, tol: f64) -> Result<(Vec<f64>, f64)> {
        if !(fixed_matrix && self.numeric.is_some()) {
            let matrix = system.to_faer()?;
            if self.symbolic.is_none() {
                self.symbolic = Some(
                    SymbolicLu::try_new(matrix.symbolic()).map_err(|e| Error::Factorization(format!("{e:?}")))?,
                );
            }
            let symbolic = self.symbolic.clone().unwrap();
            self.numeric = Some(
                Lu::try_new_with_symbolic(symbolic, matrix.as_ref())
                    .map_err(|e| Error::Factorization(format!("{e:?}")))?,
            );
        }
        let lu = self.numeric.as_ref().unwrap();
        let b = Col::<f64>::from_fn(system.n, |r| system.rhs[r]);
        let sol = lu.solve(&b);
        let mut x: Vec<f64> = (0..system.n).map(|r| sol[r]).collect();
        let mut residual = system.residual(&x);
        let mut scaled = system.scaled_residual(&x, &residual);
        let mut history = vec![scaled];
        for _ in 0..REFINEMENT_STEPS {
            if scaled <= tol {
                break;
            }
            let rb = Col::<f64>::from_fn(system.n, |r| residual[r]);
            let dx = lu.solve(&rb);
            for (r, xr) in x.iter_mut().enumerate() {
                *xr += dx[r];
            }
            residual = system.residual(&x);
            scaled = system.scaled_residual(&x, &residual);
            history.push(scaled);
        }
        if !(scaled <= tol) {
            return Err(Error::LinearSolve { tol, history });
        }
        Ok((x, scaled))
    }
}
