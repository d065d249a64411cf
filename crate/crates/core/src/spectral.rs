//! Eigenstructure of the Dirichlet Laplacian on (0,1), weighted Sobolev
//! norms, quadrature and sine-series analysis.
//!
//! Everything downstream works in the orthonormal eigenbasis
//! phi_k(x) = sqrt(2) sin(k pi x), lambda_k = (k pi)^2. A state is a pair of
//! real coefficient sequences (p, q) and the H^s-type norms are the weighted
//! sums (sum_k lambda_k^s (p_k^2 + q_k^2))^(1/2).

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// One eigenpair of the Dirichlet Laplacian on (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    /// 1-based mode index.
    pub k: usize,
    /// Eigenvalue (k pi)^2.
    pub lambda: f64,
}

impl EigenPair {
    /// Evaluate the eigenfunction phi_k(x) = sqrt(2) sin(k pi x).
    pub fn phi(&self, x: f64) -> f64 {
        SQRT_2 * (self.k as f64 * PI * x).sin()
    }

    /// phi_k'(x) = sqrt(2) k pi cos(k pi x).
    pub fn phi_deriv(&self, x: f64) -> f64 {
        let kpi = self.k as f64 * PI;
        SQRT_2 * kpi * (kpi * x).cos()
    }
}

/// Eigenpair for mode `k >= 1`; rejects k = 0.
pub fn eigenpair(k: usize) -> Result<EigenPair> {
    if k == 0 {
        return Err(Error::ZeroModeIndex);
    }
    let kpi = k as f64 * PI;
    Ok(EigenPair { k, lambda: kpi * kpi })
}

/// lambda_k = (k pi)^2 without the EigenPair wrapper (k >= 1 assumed).
pub fn lambda_k(k: usize) -> f64 {
    let kpi = k as f64 * PI;
    kpi * kpi
}

/// Truncated spectral state: coefficients of (Psi^1, Psi^2) in the sine basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    /// Coefficients of the first (real-part) component, index k-1 <-> mode k.
    pub p: Vec<f64>,
    /// Coefficients of the second (imaginary-part) component.
    pub q: Vec<f64>,
}

impl SpectralState {
    pub fn zero(n_modes: usize) -> Self {
        assert!(n_modes >= 1, "truncation order must be >= 1");
        Self { p: vec![0.0; n_modes], q: vec![0.0; n_modes] }
    }

    /// Unit coefficient on mode `k` (1-based) of the p (first) component.
    pub fn unit_p(n_modes: usize, k: usize) -> Self {
        let mut s = Self::zero(n_modes);
        s.p[k - 1] = 1.0;
        s
    }

    /// Unit coefficient on mode `k` (1-based) of the q (second) component.
    pub fn unit_q(n_modes: usize, k: usize) -> Self {
        let mut s = Self::zero(n_modes);
        s.q[k - 1] = 1.0;
        s
    }

    pub fn from_parts(p: Vec<f64>, q: Vec<f64>) -> Self {
        assert_eq!(p.len(), q.len(), "components must share the truncation");
        assert!(!p.is_empty());
        Self { p, q }
    }

    pub fn n_modes(&self) -> usize {
        self.p.len()
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.q.iter()).all(|v| v.is_finite())
    }

    /// Weighted Sobolev norm (sum_k lambda_k^s (p_k^2 + q_k^2))^(1/2).
    pub fn sobolev_norm(&self, s: u32) -> f64 {
        debug_assert!(s <= 5, "norm index outside the supported range");
        let mut acc = 0.0;
        for (i, (&pk, &qk)) in self.p.iter().zip(self.q.iter()).enumerate() {
            let w = lambda_k(i + 1).powi(s as i32);
            acc += w * (pk * pk + qk * qk);
        }
        acc.sqrt()
    }
}

/// Real polynomial in ascending coefficient order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least one coefficient");
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::new(vec![0.0]);
        }
        let d = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, &c)| m as f64 * c)
            .collect();
        Polynomial::new(d)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

// 8-point Gauss-Legendre rule on [-1, 1].
const GL8_X: [f64; 4] = [
    0.1834346424956498,
    0.525532409916329,
    0.7966664774136267,
    0.9602898564975362,
];
const GL8_W: [f64; 4] = [
    0.362683783378362,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];

/// Composite Gauss-Legendre rule: 8 points per panel on a uniform partition
/// of (0,1). The default panel count for truncation N keeps each panel under
/// two oscillations of mode N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub panels: usize,
}

impl Quadrature {
    pub fn new(panels: usize) -> Self {
        assert!(panels >= 1);
        Self { panels }
    }

    /// Resolution rule: ceil(4 N / 8) + 4 panels for truncation order N.
    pub fn for_modes(n_modes: usize) -> Self {
        Self::new((4 * n_modes).div_ceil(8) + 4)
    }

    pub fn refined(&self) -> Self {
        Self::new(self.panels * 2)
    }

    /// Integrate `f` over (0,1).
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let h = 1.0 / self.panels as f64;
        let mut acc = 0.0;
        for p in 0..self.panels {
            let mid = (p as f64 + 0.5) * h;
            let half = 0.5 * h;
            for (&x, &w) in GL8_X.iter().zip(GL8_W.iter()) {
                acc += half * w * (f(mid + half * x) + f(mid - half * x));
            }
        }
        acc
    }

    /// Sine coefficients <f, phi_k> for k = 1..=n_modes.
    pub fn project(&self, f: &dyn Fn(f64) -> f64, n_modes: usize) -> Vec<f64> {
        (1..=n_modes)
            .map(|k| {
                let kpi = k as f64 * PI;
                self.integrate(|x| f(x) * SQRT_2 * (kpi * x).sin())
            })
            .collect()
    }
}

/// Projection with an under-resolution check: the rule is doubled once and
/// the run is rejected if any coefficient drifts by more than `tol` relative
/// to the overall coefficient scale.
pub fn project_checked(
    f: &dyn Fn(f64) -> f64,
    n_modes: usize,
    quad: Quadrature,
    tol: f64,
) -> Result<Vec<f64>> {
    let coarse = quad.project(f, n_modes);
    let fine = quad.refined().project(f, n_modes);
    let scale = fine.iter().fold(0.0f64, |a, &c| a.max(c.abs())).max(1.0);
    for (k, (&c, &cf)) in coarse.iter().zip(fine.iter()).enumerate() {
        let drift = (c - cf).abs() / scale;
        if drift > tol {
            return Err(Error::QuadratureUnderresolved { mode: k + 1, drift });
        }
    }
    Ok(fine)
}

/// Evaluate the sine series sum_k c_k phi_k at `x`.
pub fn synthesize(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| c * SQRT_2 * ((i + 1) as f64 * PI * x).sin())
        .sum()
}

/// Exact moments I_m = int_0^1 x^m sin(a x) dx and J_m = int_0^1 x^m cos(a x) dx
/// for a = k pi, via the stable downward-free recurrence
///   I_0 = (1 - cos a)/a,          J_0 = sin(a)/a,
///   I_m = (-cos a + m J_{m-1})/a, J_m = (sin a - m I_{m-1})/a.
/// `a = 0` degenerates to I_m = 0, J_m = 1/(m+1).
pub fn sine_cosine_moments(max_m: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    let mut si = vec![0.0; max_m + 1];
    let mut co = vec![0.0; max_m + 1];
    if a == 0.0 {
        for (m, c) in co.iter_mut().enumerate() {
            *c = 1.0 / (m as f64 + 1.0);
        }
        return (si, co);
    }
    let (sin_a, cos_a) = a.sin_cos();
    si[0] = (1.0 - cos_a) / a;
    co[0] = sin_a / a;
    for m in 1..=max_m {
        si[m] = (-cos_a + m as f64 * co[m - 1]) / a;
        co[m] = (sin_a - m as f64 * si[m - 1]) / a;
    }
    (si, co)
}

/// Exact sine coefficients <poly, phi_k>, k = 1..=n_modes, of a polynomial.
pub fn project_polynomial(poly: &Polynomial, n_modes: usize) -> Vec<f64> {
    let deg = poly.coeffs().len() - 1;
    (1..=n_modes)
        .map(|k| {
            let (si, _) = sine_cosine_moments(deg, k as f64 * PI);
            SQRT_2
                * poly
                    .coeffs()
                    .iter()
                    .zip(si.iter())
                    .map(|(&c, &im)| c * im)
                    .sum::<f64>()
        })
        .collect()
}

/// Exact coefficients <poly * phi_1, phi_k> of a polynomial multiplied by the
/// ground eigenfunction, using
/// 2 sin(pi x) sin(k pi x) = cos((k-1) pi x) - cos((k+1) pi x).
pub fn project_polynomial_times_phi1(poly: &Polynomial, n_modes: usize) -> Vec<f64> {
    let deg = poly.coeffs().len() - 1;
    (1..=n_modes)
        .map(|k| {
            let (_, j_minus) = sine_cosine_moments(deg, (k as f64 - 1.0) * PI);
            let (_, j_plus) = sine_cosine_moments(deg, (k as f64 + 1.0) * PI);
            poly.coeffs()
                .iter()
                .enumerate()
                .map(|(m, &c)| c * (j_minus[m] - j_plus[m]))
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eigenpair_values() {
        let e1 = eigenpair(1).unwrap();
        assert!((e1.lambda - PI * PI).abs() < 1e-15);
        let e2 = eigenpair(2).unwrap();
        assert!((e2.lambda - 4.0 * PI * PI).abs() < 1e-13);
        // phi_1(1/2) = sqrt(2)
        assert!((e1.phi(0.5) - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn eigenpair_rejects_zero() {
        assert!(matches!(eigenpair(0), Err(Error::ZeroModeIndex)));
    }

    #[test]
    fn lambda_strictly_increasing() {
        for k in 1..512 {
            assert!(lambda_k(k + 1) > lambda_k(k));
        }
    }

    #[test]
    fn sobolev_norm_examples() {
        let mut s = SpectralState::zero(8);
        s.p[0] = 1.0;
        assert!((s.sobolev_norm(0) - 1.0).abs() < 1e-15);
        // lambda_1^(3/2) = pi^3
        assert!((s.sobolev_norm(3) - PI.powi(3)).abs() < 1e-12);
        assert_eq!(SpectralState::zero(4).sobolev_norm(3), 0.0);
    }

    #[test]
    fn eigenfunctions_orthonormal_under_quadrature() {
        // The integrand phi_k phi_j oscillates at mode k + j, so the rule is
        // sized for the product order.
        let quad = Quadrature::for_modes(32);
        for k in 1..=16usize {
            for j in 1..=16usize {
                let v = quad.integrate(|x| {
                    eigenpair(k).unwrap().phi(x) * eigenpair(j).unwrap().phi(x)
                });
                let expect = if k == j { 1.0 } else { 0.0 };
                assert!(
                    (v - expect).abs() < 1e-12,
                    "orthonormality off at ({k},{j}): {v}"
                );
            }
        }
    }

    #[test]
    fn project_unit_mode() {
        let quad = Quadrature::for_modes(5);
        let f = |x: f64| eigenpair(3).unwrap().phi(x);
        let c = quad.project(&f, 5);
        for (i, &ck) in c.iter().enumerate() {
            let expect = if i == 2 { 1.0 } else { 0.0 };
            assert!((ck - expect).abs() < 1e-12, "mode {}: {}", i + 1, ck);
        }
    }

    #[test]
    fn project_zero_function() {
        let quad = Quadrature::for_modes(8);
        let c = quad.project(&|_x| 0.0, 8);
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn polynomial_projection_matches_quadrature() {
        // f(x) = x^2 phi_1(x); k = 1 coefficient is 1/3 - 1/(2 pi^2).
        let mu = Polynomial::new(vec![0.0, 0.0, 1.0]);
        let exact = project_polynomial_times_phi1(&mu, 8);
        let expect_1 = 1.0 / 3.0 - 1.0 / (2.0 * PI * PI);
        assert!((exact[0] - expect_1).abs() < 1e-14, "{}", exact[0]);

        let quad = Quadrature::for_modes(8);
        let numeric = quad.project(&|x| x * x * SQRT_2 * (PI * x).sin(), 8);
        for (e, n) in exact.iter().zip(numeric.iter()) {
            assert!((e - n).abs() < 1e-12, "closed form {e} vs quadrature {n}");
        }
    }

    #[test]
    fn plain_polynomial_projection_matches_quadrature() {
        let h = Polynomial::new(vec![0.0, -2.0, 0.5, 2.0]);
        let exact = project_polynomial(&h, 12);
        let quad = Quadrature::for_modes(12);
        let numeric = quad.project(&|x| h.eval(x), 12);
        for (e, n) in exact.iter().zip(numeric.iter()) {
            assert!((e - n).abs() < 1e-12);
        }
    }

    #[test]
    fn underresolution_detected() {
        // One panel cannot resolve mode 40.
        let err = project_checked(
            &|x| eigenpair(40).unwrap().phi(x),
            40,
            Quadrature::new(1),
            1e-10,
        );
        assert!(matches!(err, Err(Error::QuadratureUnderresolved { .. })));
    }

    proptest! {
        // Parseval round trip: synthesize a coefficient vector on the grid and
        // re-project; the coefficients must come back.
        #[test]
        fn parseval_roundtrip(coeffs in proptest::collection::vec(-10.0f64..10.0, 1..24)) {
            let n = coeffs.len();
            let quad = Quadrature::for_modes(2 * n);
            let back = quad.project(&|x| synthesize(&coeffs, x), n);
            for (c, b) in coeffs.iter().zip(back.iter()) {
                prop_assert!((c - b).abs() < 1e-10);
            }
        }

        // norm_{s+1} >= pi * norm_s since lambda_k >= pi^2.
        #[test]
        fn sobolev_monotone(
            p in proptest::collection::vec(-5.0f64..5.0, 1..16),
            s in 0u32..4,
        ) {
            let n = p.len();
            let state = SpectralState::from_parts(p, vec![0.0; n]);
            prop_assert!(state.sobolev_norm(s + 1) >= PI * state.sobolev_norm(s) - 1e-12);
        }
    }
}
