use crate::domains::StarshapedRing;
use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

/// Smallest admissible Jacobian determinant of the `(s, θ) → x` map.
pub const MIN_JACOBIAN: f64 = 1e-12;

/// Boundary radii and their θ-derivatives at one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AngularSample {
    pub inner: f64,
    pub inner_slope: f64,
    pub outer: f64,
    pub outer_slope: f64,
}

impl AngularSample {
    /// Coordinate radius `r` and `∂r/∂θ` at ray parameter `s`.
    pub fn radius(&self, s: f64) -> (f64, f64) {
        let width = self.outer - self.inner;
        let dwidth = self.outer_slope - self.inner_slope;
        (self.inner + s * width, self.inner_slope + s * dwidth)
    }

    pub fn width(&self) -> f64 {
        self.outer - self.inner
    }
}

#[derive(Debug)]
struct GridData {
    ring: StarshapedRing,
    m: usize,
    k: usize,
    nodes: Vec<[f64; 2]>,
    radius: Vec<f64>,
    jacobian: Vec<[[f64; 2]; 2]>,
    // 2m entries: index 2j is θ_j, index 2j+1 is θ_{j+1/2}
    angular: Vec<AngularSample>,
}

/// Body-fitted grid over a starshaped ring.
///
/// Node `(j, i)` sits at `x = (ρ₁(θ_j) + s_i(ρ₀(θ_j) − ρ₁(θ_j)))·e(θ_j)` with
/// `s_i = i/(k−1)` and `θ_j = 2πj/m`; every θ-line is a segment of a ray from
/// the origin. Node storage is θ-major: `index = j·k + i`. Cloning is cheap.
#[derive(Debug, Clone)]
pub struct RingGrid(Arc<GridData>);

impl RingGrid {
    pub fn new(ring: &StarshapedRing, m: usize, k: usize) -> Result<Self> {
        if m < 8 {
            return Err(Error::invalid(format!("grid needs m >= 8 angular nodes, got {m}")));
        }
        if k < 3 {
            return Err(Error::invalid(format!("grid needs k >= 3 radial nodes, got {k}")));
        }
        let angular: Vec<AngularSample> = (0..2 * m)
            .map(|h| {
                let (inner, inner_slope) = ring.inner().at_fraction(h, 2 * m);
                let (outer, outer_slope) = ring.outer().at_fraction(h, 2 * m);
                AngularSample { inner, inner_slope, outer, outer_slope }
            })
            .collect();
        let mut nodes = Vec::with_capacity(m * k);
        let mut radius = Vec::with_capacity(m * k);
        for j in 0..m {
            let theta = 2.0 * PI * j as f64 / m as f64;
            let (sin, cos) = theta.sin_cos();
            for i in 0..k {
                let (r, _) = angular[2 * j].radius(i as f64 / (k - 1) as f64);
                nodes.push([r * cos, r * sin]);
                radius.push(r);
            }
        }
        let hs = 1.0 / (k - 1) as f64;
        let ht = 2.0 * PI / m as f64;
        let at = |j: usize, i: usize| nodes[j * k + i];
        let mut jacobian = Vec::with_capacity(m * k);
        for j in 0..m {
            let (jp, jm) = ((j + 1) % m, (j + m - 1) % m);
            for i in 0..k {
                let xs = s_difference(|ii| at(j, ii), i, k, hs);
                let (a, b) = (at(jp, i), at(jm, i));
                let xt = [(a[0] - b[0]) / (2.0 * ht), (a[1] - b[1]) / (2.0 * ht)];
                let det = xs[0] * xt[1] - xs[1] * xt[0];
                if !(det > MIN_JACOBIAN) {
                    return Err(Error::invalid(format!(
                        "degenerate ring: Jacobian determinant {det:e} at node (j={j}, i={i})"
                    )));
                }
                jacobian.push([xs, xt]);
            }
        }
        Ok(RingGrid(Arc::new(GridData { ring: ring.clone(), m, k, nodes, radius, jacobian, angular })))
    }

    pub fn ring(&self) -> &StarshapedRing {
        &self.0.ring
    }

    /// Angular node count.
    pub fn m(&self) -> usize {
        self.0.m
    }

    /// Radial node count.
    pub fn k(&self) -> usize {
        self.0.k
    }

    pub fn len(&self) -> usize {
        self.0.m * self.0.k
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, j: usize, i: usize) -> usize {
        j * self.0.k + i
    }

    pub fn s(&self, i: usize) -> f64 {
        i as f64 / (self.0.k - 1) as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.0.m as f64
    }

    pub fn hs(&self) -> f64 {
        1.0 / (self.0.k - 1) as f64
    }

    pub fn htheta(&self) -> f64 {
        2.0 * PI / self.0.m as f64
    }

    pub fn node(&self, j: usize, i: usize) -> [f64; 2] {
        self.0.nodes[self.index(j, i)]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.0.nodes
    }

    /// Coordinate radius `|x|` of node `(j, i)`.
    pub fn radius(&self, j: usize, i: usize) -> f64 {
        self.0.radius[self.index(j, i)]
    }

    /// Columns `[∂x/∂s, ∂x/∂θ]` at node `(j, i)` from second-order differences
    /// of the node positions.
    pub fn jacobian(&self, j: usize, i: usize) -> [[f64; 2]; 2] {
        self.0.jacobian[self.index(j, i)]
    }

    /// Boundary data at `θ_{h/2}`: even `h` are nodes, odd `h` are midpoints.
    pub(crate) fn angular(&self, half_index: usize) -> &AngularSample {
        &self.0.angular[half_index % (2 * self.0.m)]
    }

    pub fn same_as(&self, other: &RingGrid) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

/// Second-order difference along s: centered inside, one-sided at the ends.
pub(crate) fn s_difference<F: Fn(usize) -> [f64; 2]>(at: F, i: usize, k: usize, hs: f64) -> [f64; 2] {
    // written in differences so constant data differentiates to exactly zero
    let diff = |a: usize, b: usize| {
        let (pa, pb) = (at(a), at(b));
        [pa[0] - pb[0], pa[1] - pb[1]]
    };
    let (d1, d2, w1, w2) = if i == 0 {
        (diff(1, 0), diff(2, 0), 2.0, -0.5)
    } else if i == k - 1 {
        (diff(k - 2, k - 1), diff(k - 3, k - 1), -2.0, 0.5)
    } else {
        (diff(i + 1, i - 1), [0.0, 0.0], 0.5, 0.0)
    };
    [(w1 * d1[0] + w2 * d2[0]) / hs, (w1 * d1[1] + w2 * d2[1]) / hs]
}

/// Nodal values of a scalar on a [`RingGrid`], θ-major.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: RingGrid,
    values: Vec<f64>,
    q: Option<f64>,
}

impl ScalarField {
    pub fn new(grid: RingGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NotFinite { j: p / grid.k(), i: p % grid.k(), iteration: 0 });
        }
        Ok(Self { grid, values, q: None })
    }

    /// Samples `f` at every node.
    pub fn from_fn<F: Fn([f64; 2]) -> f64>(grid: &RingGrid, f: F) -> Result<Self> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid.clone(), values)
    }

    /// Tags the field with the exponent of the equation it solves.
    pub fn with_exponent(mut self, q: f64) -> Self {
        self.q = Some(q);
        self
    }

    pub fn exponent(&self) -> Option<f64> {
        self.q
    }

    pub fn grid(&self) -> &RingGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[self.grid.index(j, i)]
    }

    /// Values along the θ-line `j`, from the inner boundary outward.
    pub fn ray(&self, j: usize) -> &[f64] {
        let k = self.grid.k();
        &self.values[j * k..(j + 1) * k]
    }

    /// Value on θ-line `j` at ray parameter `s ∈ [0, 1]`, by four-point
    /// Lagrange interpolation between nodes.
    pub fn sample_ray(&self, j: usize, s: f64) -> f64 {
        lagrange_on_ray(self.ray(j), s.clamp(0.0, 1.0))
    }

    pub(crate) fn from_parts(grid: RingGrid, values: Vec<f64>, q: Option<f64>) -> Self {
        Self { grid, values, q }
    }

    /// Cartesian gradient at every node via the chain rule through the stored
    /// Jacobians. Differences are second order: centered in the interior,
    /// one-sided at `s = 0, 1`, periodic in θ. Exact for fields linear in `x`.
    pub fn gradient(&self) -> Vec<[f64; 2]> {
        let g = &self.grid;
        let (m, k) = (g.m(), g.k());
        let (hs, ht) = (g.hs(), g.htheta());
        let mut out = Vec::with_capacity(m * k);
        for j in 0..m {
            let (jp, jm) = ((j + 1) % m, (j + m - 1) % m);
            for i in 0..k {
                let us = s_difference(|ii| [self.get(j, ii), 0.0], i, k, hs)[0];
                let ut = (self.get(jp, i) - self.get(jm, i)) / (2.0 * ht);
                let [xs, xt] = g.jacobian(j, i);
                // [xs·∇U, xt·∇U] = [us, ut]
                let det = xs[0] * xt[1] - xs[1] * xt[0];
                let gx = (us * xt[1] - ut * xs[1]) / det;
                let gy = (ut * xs[0] - us * xt[0]) / det;
                out.push([gx, gy]);
            }
        }
        out
    }

    /// Largest absolute nodal difference to another field on the same node set.
    pub fn max_difference(&self, other: &ScalarField) -> Result<f64> {
        if self.values.len() != other.values.len() || self.grid.m() != other.grid.m() {
            return Err(Error::invalid("fields live on different grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Sup-norm distance to a field on a refined grid (`m_fine = 2m`, any `k_fine`),
    /// evaluated at this grid's nodes. Fine values are interpolated along rays by
    /// four-point Lagrange interpolation in `s`.
    pub fn refinement_difference(&self, fine: &ScalarField) -> Result<f64> {
        let (m, k) = (self.grid.m(), self.grid.k());
        let (mf, kf) = (fine.grid.m(), fine.grid.k());
        if mf != 2 * m || kf < 4 {
            return Err(Error::invalid(format!(
                "refinement comparison needs m_fine = 2m and k_fine >= 4 (got {m}x{k} vs {mf}x{kf})"
            )));
        }
        let mut worst = 0.0_f64;
        for j in 0..m {
            let ray = fine.ray(2 * j);
            for i in 0..k {
                let v = lagrange_on_ray(ray, self.grid.s(i));
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        Ok(worst)
    }
}

/// Cubic Lagrange interpolation of uniformly spaced ray samples at `s ∈ [0, 1]`.
pub(crate) fn lagrange_on_ray(ray: &[f64], s: f64) -> f64 {
    let n = ray.len();
    let pos = s * (n - 1) as f64;
    let nearest = pos.round();
    if (pos - nearest).abs() < 1e-9 {
        return ray[nearest as usize];
    }
    if n < 4 {
        let a = (pos.floor() as usize).min(n - 2);
        return ray[a] + (pos - a as f64) * (ray[a + 1] - ray[a]);
    }
    let start = (pos.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut value = 0.0;
    for a in 0..4 {
        let xa = (start + a) as f64;
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                let xb = (start + b) as f64;
                w *= (pos - xb) / (xa - xb);
            }
        }
        value += w * ray[start + a];
    }
    value
}
