//! Analytically solvable hyperbolic benchmark: a linearized shallow-water
//! pair on (0,1) with the boundary feedback u = -tanh(rate) v_x(t,1).
//!
//! In the Riemann variables R1 = h_x + v_x (right-moving) and R2 = h_x - v_x
//! (left-moving) the dynamics is pure transport with the reflections
//! R1(t,0) = R2(t,0) at the left end and, under the feedback,
//! R2(t,1) = -e^(-2 rate) R1(t,1) at the right end. With dt = dx the scheme
//! is an exact shift, all decay rates are exact, and the weighted energy
//! int (e^(-rate x) R1)^2 + (e^(rate x) R2)^2 dx contracts by exactly
//! e^(-2 rate dt) per step.

use crate::error::{Error, Result};

/// Cell-centered Riemann-invariant state.
#[derive(Debug, Clone)]
pub struct RiemannGrid {
    /// Number of cells; dx = dt = 1/m.
    pub m: usize,
    pub rate: f64,
    /// Right-moving invariant h_x + v_x at cell centers.
    pub r1: Vec<f64>,
    /// Left-moving invariant h_x - v_x at cell centers.
    pub r2: Vec<f64>,
}

impl RiemannGrid {
    pub fn dx(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// Unit-CFL time step.
    pub fn dt(&self) -> f64 {
        self.dx()
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    /// Build from height and velocity sampled at the m+1 nodes j/m.
    /// Differencing node values gives second-order derivatives at the cell
    /// centers, and is exactly inverted by [`reconstruct`].
    pub fn from_height_velocity(h: &[f64], v: &[f64], rate: f64) -> Result<Self> {
        if h.len() != v.len() || h.len() < 2 {
            return Err(Error::Inconsistent("need matching node arrays of length m+1".into()));
        }
        let tol = 1e-9 * h.iter().chain(v.iter()).fold(1.0f64, |a, &x| a.max(x.abs()));
        if h[0].abs() > tol || v[v.len() - 1].abs() > tol {
            return Err(Error::Inconsistent("boundary compatibility needs h(0) = v(1) = 0".into()));
        }
        let m = h.len() - 1;
        let dx = 1.0 / m as f64;
        let mut r1 = vec![0.0; m];
        let mut r2 = vec![0.0; m];
        for i in 0..m {
            let hx = (h[i + 1] - h[i]) / dx;
            let vx = (v[i + 1] - v[i]) / dx;
            r1[i] = hx + vx;
            r2[i] = hx - vx;
        }
        Ok(Self { m, rate, r1, r2 })
    }

    pub fn zero(m: usize, rate: f64) -> Self {
        Self { m, rate, r1: vec![0.0; m], r2: vec![0.0; m] }
    }
}

/// The boundary feedback u(t) = -tanh(rate) v_x(t,1), read off the outgoing
/// characteristic: v_x(1) = (R1 - R2)(1)/2 with the reflected value of R2.
pub fn feedback_sv(grid: &RiemannGrid) -> f64 {
    let r1_out = grid.r1[grid.m - 1];
    let reflected = -(-2.0 * grid.rate).exp() * r1_out;
    -grid.rate.tanh() * (r1_out - reflected) / 2.0
}

/// Closed-loop reflection coefficient at x = 1:
/// (tanh(rate) - 1)/(tanh(rate) + 1) = -e^(-2 rate).
pub fn reflection_coefficient(rate: f64) -> f64 {
    -(-2.0 * rate).exp()
}

/// One exact-shift step: R1 moves one cell right, R2 one cell left, with the
/// two boundary relations filling the entering cells.
pub fn step_sv(grid: &RiemannGrid) -> RiemannGrid {
    let m = grid.m;
    let mut r1 = vec![0.0; m];
    let mut r2 = vec![0.0; m];
    r1[1..m].copy_from_slice(&grid.r1[..m - 1]);
    r1[0] = grid.r2[0];
    r2[..m - 1].copy_from_slice(&grid.r2[1..m]);
    r2[m - 1] = reflection_coefficient(grid.rate) * grid.r1[m - 1];
    RiemannGrid { m, rate: grid.rate, r1, r2 }
}

/// One step of the transformed target system: the same shift with unit-
/// magnitude reflections (+1 left, -1 right) and the exact per-step decay
/// factor e^(-rate dt) applied along every characteristic.
pub fn step_sv_target(grid: &RiemannGrid) -> RiemannGrid {
    let m = grid.m;
    let decay = (-grid.rate * grid.dt()).exp();
    let mut r1 = vec![0.0; m];
    let mut r2 = vec![0.0; m];
    for (dst, src) in r1[1..].iter_mut().zip(&grid.r1[..m - 1]) {
        *dst = decay * src;
    }
    r1[0] = decay * grid.r2[0];
    for (dst, src) in r2[..m - 1].iter_mut().zip(&grid.r2[1..]) {
        *dst = decay * src;
    }
    r2[m - 1] = -decay * grid.r1[m - 1];
    RiemannGrid { m, rate: grid.rate, r1, r2 }
}

/// Plain energy int (R1)^2 + (R2)^2 dx.
pub fn energy(grid: &RiemannGrid) -> f64 {
    let dx = grid.dx();
    grid.r1
        .iter()
        .zip(grid.r2.iter())
        .map(|(&a, &b)| dx * (a * a + b * b))
        .sum()
}

/// Weighted energy int (e^(-rate x) R1)^2 + (e^(rate x) R2)^2 dx, which the
/// exact-shift scheme contracts by exactly e^(-2 rate dt) per step.
pub fn weighted_energy(grid: &RiemannGrid) -> f64 {
    let dx = grid.dx();
    let mut acc = 0.0;
    for i in 0..grid.m {
        let x = grid.cell_center(i);
        let w1 = (-2.0 * grid.rate * x).exp();
        let w2 = (2.0 * grid.rate * x).exp();
        acc += dx * (w1 * grid.r1[i] * grid.r1[i] + w2 * grid.r2[i] * grid.r2[i]);
    }
    acc
}

/// Recover (h, v) at the m+1 nodes from the cell derivatives:
/// h(0) = 0 integrates H = (R1+R2)/2 forward, v(1) = 0 integrates
/// V = (R1-R2)/2 backward. Exactly inverts [`RiemannGrid::from_height_velocity`].
pub fn reconstruct(grid: &RiemannGrid) -> (Vec<f64>, Vec<f64>) {
    let m = grid.m;
    let dx = grid.dx();
    let mut h = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    for i in 0..m {
        let hx = (grid.r1[i] + grid.r2[i]) / 2.0;
        h[i + 1] = h[i] + dx * hx;
    }
    for i in (0..m).rev() {
        let vx = (grid.r1[i] - grid.r2[i]) / 2.0;
        v[i] = v[i + 1] - dx * vx;
    }
    (h, v)
}

/// The closed-form integral transformation onto the decaying target system,
/// evaluated on node grids with trapezoidal quadrature:
///   h~(x) = [cosh(rx) h(x) - r int_0^x sinh(ry) h dy
///            - sinh(rx) v(x) + r int_0^x cosh(ry) v dy] / cosh(r),
///   v~(x) = [sinh(r) h(1) - sinh(rx) h(x) - r int_x^1 cosh(ry) h dy
///            + cosh(rx) v(x) + r int_x^1 sinh(ry) v dy] / cosh(r).
/// Returns node arrays satisfying h~(0) = v~(1) = 0.
pub fn explicit_transform_sv(h: &[f64], v: &[f64], rate: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(h.len(), v.len());
    let n = h.len();
    let dx = 1.0 / (n - 1) as f64;
    let x_at = |j: usize| j as f64 * dx;
    let cosh_r = rate.cosh();

    // Cumulative trapezoid integrals from the left.
    let mut sinh_h = vec![0.0; n]; // int_0^x sinh(ry) h dy
    let mut cosh_v = vec![0.0; n]; // int_0^x cosh(ry) v dy
    let mut cosh_h = vec![0.0; n]; // int_0^x cosh(ry) h dy
    let mut sinh_v = vec![0.0; n]; // int_0^x sinh(ry) v dy
    for j in 1..n {
        let (y0, y1) = (x_at(j - 1), x_at(j));
        sinh_h[j] = sinh_h[j - 1]
            + 0.5 * dx * ((rate * y0).sinh() * h[j - 1] + (rate * y1).sinh() * h[j]);
        cosh_v[j] = cosh_v[j - 1]
            + 0.5 * dx * ((rate * y0).cosh() * v[j - 1] + (rate * y1).cosh() * v[j]);
        cosh_h[j] = cosh_h[j - 1]
            + 0.5 * dx * ((rate * y0).cosh() * h[j - 1] + (rate * y1).cosh() * h[j]);
        sinh_v[j] = sinh_v[j - 1]
            + 0.5 * dx * ((rate * y0).sinh() * v[j - 1] + (rate * y1).sinh() * v[j]);
    }
    let mut ht = vec![0.0; n];
    let mut vt = vec![0.0; n];
    for j in 0..n {
        let x = x_at(j);
        let (sh, ch) = ((rate * x).sinh(), (rate * x).cosh());
        ht[j] = (ch * h[j] - rate * sinh_h[j] - sh * v[j] + rate * cosh_v[j]) / cosh_r;
        vt[j] = (rate.sinh() * h[n - 1] - sh * h[j] - rate * (cosh_h[n - 1] - cosh_h[j])
            + ch * v[j]
            + rate * (sinh_v[n - 1] - sinh_v[j]))
            / cosh_r;
    }
    (ht, vt)
}

/// Feedback gain seen by the unit sine mode phi_n(x) = sqrt(2) sin(n pi x)
/// placed in the velocity component, estimated from the node grid with a
/// one-sided fourth-order derivative at x = 1. Converges to
/// sqrt(2) (-1)^(n+1) n pi tanh(rate) as the grid refines.
pub fn projected_gain(rate: f64, n: usize, m_cells: usize) -> f64 {
    let nodes = m_cells + 1;
    let dx = 1.0 / m_cells as f64;
    let v: Vec<f64> = (0..nodes)
        .map(|j| std::f64::consts::SQRT_2 * (n as f64 * std::f64::consts::PI * j as f64 * dx).sin())
        .collect();
    let vx1 = (25.0 * v[nodes - 1] - 48.0 * v[nodes - 2] + 36.0 * v[nodes - 3]
        - 16.0 * v[nodes - 4]
        + 3.0 * v[nodes - 5])
        / (12.0 * dx);
    -rate.tanh() * vx1
}

/// Closed-form value the projected gain converges to.
pub fn projected_gain_exact(rate: f64, n: usize) -> f64 {
    let sign = if n.is_multiple_of(2) { -1.0 } else { 1.0 };
    std::f64::consts::SQRT_2 * sign * n as f64 * std::f64::consts::PI * rate.tanh()
}
