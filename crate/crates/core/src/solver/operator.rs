//! Conservative finite-difference form of the chart-transformed q-Laplacian.
//!
//! With `g = ψ(|x|)² δ`, `Δ_{q,M} u = ψ^{-n} div(ψ^{n−q} |∇U|^{q−2} ∇U)` for
//! `U = u ∘ ξ⁻¹`, which expands to
//! `ψ^{-q} [Δ_q U + (n−q)|∇U|^{q−2}⟨∇ log Ψ, ∇U⟩]`. The solver discretizes the
//! divergence form `div(W ∇U) = ψ^n F` with `W = ψ^{n−q} (|∇U|² + ε²)^{(q−2)/2}`
//! in the `(s, θ)` coordinates of the ring grid:
//!
//! ```text
//! ∂_s [W (A U_s + B U_θ)] + ∂_θ [W (B U_s + C U_θ)] = J ψ^n F
//! A = (r_θ² + r²)/(d r),  B = −r_θ/r,  C = d/r,  J = d r
//! ```
//!
//! where `r = ρ₁ + s d`, `d = ρ₀ − ρ₁`. Fluxes live on cell faces; the metric
//! terms there come from the spline boundaries at half-angles.

use super::grid::{AngularSample, RingGrid};

/// One term of a face flux: `coeff · U(j, i)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Term {
    pub j: usize,
    pub i: usize,
    pub coeff: f64,
}

#[derive(Debug, Clone, Copy)]
struct Metric {
    a: f64,
    b: f64,
    c: f64,
    jac: f64,
    r: f64,
}

fn metric(sample: &AngularSample, s: f64) -> Metric {
    let (r, rt) = sample.radius(s);
    let d = sample.width();
    Metric { a: (rt * rt + r * r) / (d * r), b: -rt / r, c: d / r, jac: d * r, r }
}

/// Discrete operator with face weights frozen from a given nodal field.
pub(crate) struct Operator<'g> {
    grid: &'g RingGrid,
    /// `W` on s-faces `(i + 1/2, j)`, stored at `j·(k−1) + i`.
    w_s: Vec<f64>,
    /// `W` on θ-faces `(i, j + 1/2)`, stored at `j·k + i`.
    w_t: Vec<f64>,
    metric_s: Vec<Metric>,
    metric_t: Vec<Metric>,
}

impl<'g> Operator<'g> {
    /// Freezes `W = ψ^{n−q}(|∇U|² + ε²)^{(q−2)/2}` from `frozen` on every face.
    pub fn new(grid: &'g RingGrid, frozen: &[f64], q: f64, n: f64, epsilon: f64) -> Self {
        let (m, k) = (grid.m(), grid.k());
        let (hs, ht) = (grid.hs(), grid.htheta());
        let factor = grid.ring().factor();
        let u = |j: usize, i: usize| frozen[(j % m) * k + i];
        let psi_power = |r: f64| {
            if n == q {
                1.0
            } else {
                factor.psi_and_slope(r).0.powf(n - q)
            }
        };
        let coefficient = |grad2: f64| {
            if q == 2.0 {
                1.0
            } else {
                (grad2 + epsilon * epsilon).powf(0.5 * (q - 2.0))
            }
        };

        let mut metric_s = Vec::with_capacity(m * (k - 1));
        let mut w_s = Vec::with_capacity(m * (k - 1));
        for j in 0..m {
            let sample = grid.angular(2 * j);
            let (jp, jm) = (j + 1, j + m - 1);
            for i in 0..k - 1 {
                let mt = metric(sample, (i as f64 + 0.5) * hs);
                let us = (u(j, i + 1) - u(j, i)) / hs;
                let ut = (u(jp, i) - u(jm, i) + u(jp, i + 1) - u(jm, i + 1)) / (4.0 * ht);
                let grad2 = (mt.a * us * us + 2.0 * mt.b * us * ut + mt.c * ut * ut) / mt.jac;
                w_s.push(psi_power(mt.r) * coefficient(grad2));
                metric_s.push(mt);
            }
        }

        let mut metric_t = Vec::with_capacity(m * k);
        let mut w_t = Vec::with_capacity(m * k);
        for j in 0..m {
            let sample = grid.angular(2 * j + 1);
            for i in 0..k {
                let mt = metric(sample, i as f64 * hs);
                let w = if i == 0 || i == k - 1 {
                    // boundary θ-faces carry no flux into any equation
                    0.0
                } else {
                    let ut = (u(j + 1, i) - u(j, i)) / ht;
                    let us = (u(j, i + 1) - u(j, i - 1) + u(j + 1, i + 1) - u(j + 1, i - 1)) / (4.0 * hs);
                    let grad2 = (mt.a * us * us + 2.0 * mt.b * us * ut + mt.c * ut * ut) / mt.jac;
                    psi_power(mt.r) * coefficient(grad2)
                };
                w_t.push(w);
                metric_t.push(mt);
            }
        }
        Self { grid, w_s, w_t, metric_s, metric_t }
    }

    /// Flux through the s-face between `(j, i)` and `(j, i+1)`.
    fn flux_s(&self, j: usize, i: usize) -> [Term; 6] {
        let (m, k) = (self.grid.m(), self.grid.k());
        let (hs, ht) = (self.grid.hs(), self.grid.htheta());
        let f = j * (k - 1) + i;
        let (w, mt) = (self.w_s[f], self.metric_s[f]);
        let (jp, jm) = ((j + 1) % m, (j + m - 1) % m);
        let a = w * mt.a / hs;
        let b = w * mt.b / (4.0 * ht);
        [
            Term { j, i: i + 1, coeff: a },
            Term { j, i, coeff: -a },
            Term { j: jp, i, coeff: b },
            Term { j: jm, i, coeff: -b },
            Term { j: jp, i: i + 1, coeff: b },
            Term { j: jm, i: i + 1, coeff: -b },
        ]
    }

    /// Flux through the θ-face between `(j, i)` and `(j+1, i)`, interior `i`.
    fn flux_t(&self, j: usize, i: usize) -> [Term; 6] {
        let (m, k) = (self.grid.m(), self.grid.k());
        let (hs, ht) = (self.grid.hs(), self.grid.htheta());
        let f = j * k + i;
        let (w, mt) = (self.w_t[f], self.metric_t[f]);
        let jp = (j + 1) % m;
        let c = w * mt.c / ht;
        let b = w * mt.b / (4.0 * hs);
        [
            Term { j: jp, i, coeff: c },
            Term { j, i, coeff: -c },
            Term { j, i: i + 1, coeff: b },
            Term { j, i: i - 1, coeff: -b },
            Term { j: jp, i: i + 1, coeff: b },
            Term { j: jp, i: i - 1, coeff: -b },
        ]
    }

    /// Stencil of the equation at interior node `(j, i)`, i.e. the discrete
    /// `J div(W∇U)`, as 24 (possibly repeated) terms.
    pub fn row(&self, j: usize, i: usize) -> impl Iterator<Item = Term> {
        let m = self.grid.m();
        let (hs, ht) = (self.grid.hs(), self.grid.htheta());
        let jm = (j + m - 1) % m;
        let scale = |sign: f64, h: f64| move |t: Term| Term { coeff: sign * t.coeff / h, ..t };
        let up_s = self.flux_s(j, i).into_iter().map(scale(1.0, hs));
        let down_s = self.flux_s(j, i - 1).into_iter().map(scale(-1.0, hs));
        let up_t = self.flux_t(j, i).into_iter().map(scale(1.0, ht));
        let down_t = self.flux_t(jm, i).into_iter().map(scale(-1.0, ht));
        up_s.chain(down_s).chain(up_t).chain(down_t)
    }

    /// Jacobian `d·r` of the `(s, θ) → x` map at a node, from the spline data.
    pub fn node_jacobian(&self, j: usize, i: usize) -> f64 {
        metric(self.grid.angular(2 * j), self.grid.s(i)).jac
    }

    /// Applies the row stencil to nodal values.
    pub fn apply(&self, values: &[f64], j: usize, i: usize) -> f64 {
        let k = self.grid.k();
        self.row(j, i).map(|t| t.coeff * values[t.j * k + t.i]).sum()
    }
}
