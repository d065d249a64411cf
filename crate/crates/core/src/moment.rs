//! Dipolar-moment ingestion and the per-mode synthesis inputs.
//!
//! From a moment function mu this module produces the coefficients
//! m_k = <mu phi_1, phi_k>, checks the controllability surrogate
//! (k^3 |m_k| bounded away from zero over the sweep), and splits
//! mu phi_1 = g + h where h is the explicit cubic whose sine coefficients
//! h_k = 4/(k^3 pi^2) ((-1)^(k+1) mu'(1) - mu'(0)) carry the non-smooth part.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{
    lambda_k, project_checked, project_polynomial_times_phi1, Polynomial, Quadrature, SQRT_2,
};

/// Numerical floor for the hypothesis sweep: k^3 |m_k| must stay above this.
pub const HYPOTHESIS_TOL: f64 = 1e-8;

/// Relative tolerance for the endpoint-slope degeneracy check.
const SLOPE_TOL: f64 = 1e-10;

/// Relative drift accepted when the quadrature rule is doubled.
const QUAD_DRIFT_TOL: f64 = 1e-10;

/// How the moment function is represented.
#[derive(Debug, Clone)]
pub enum MomentShape {
    Polynomial(Polynomial),
    /// Samples on a uniform grid over [0,1], endpoints included.
    Sampled { values: Vec<f64> },
}

/// The dipolar moment mu together with its endpoint derivatives, which fix
/// the leading 1/k^3 behaviour of the coefficients m_k.
#[derive(Debug, Clone)]
pub struct DipolarMoment {
    pub shape: MomentShape,
    /// mu'(0)
    pub dmu0: f64,
    /// mu'(1)
    pub dmu1: f64,
}

impl DipolarMoment {
    /// Polynomial moment; endpoint derivatives are taken analytically.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        let poly = Polynomial::new(coeffs);
        let d = poly.derivative();
        let (dmu0, dmu1) = (d.eval(0.0), d.eval(1.0));
        Self::validate_slopes(dmu0, dmu1)?;
        Ok(Self { shape: MomentShape::Polynomial(poly), dmu0, dmu1 })
    }

    /// Sampled moment on a uniform grid (>= 5 samples); endpoint derivatives
    /// via one-sided 4th-order finite differences.
    pub fn sampled(values: Vec<f64>) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::Inconsistent(
                "sampled moment needs at least 5 uniform samples".into(),
            ));
        }
        let h = 1.0 / (values.len() - 1) as f64;
        let f = &values;
        let n = values.len();
        let dmu0 =
            (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
        let dmu1 = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
            + 3.0 * f[n - 5])
            / (12.0 * h);
        Self::validate_slopes(dmu0, dmu1)?;
        Ok(Self { shape: MomentShape::Sampled { values }, dmu0, dmu1 })
    }

    /// The standard benchmark mu(x) = x^2.
    pub fn benchmark_x_squared() -> Self {
        Self::polynomial(vec![0.0, 0.0, 1.0]).expect("x^2 satisfies the slope condition")
    }

    fn validate_slopes(dmu0: f64, dmu1: f64) -> Result<()> {
        let scale = dmu0.abs().max(dmu1.abs()).max(1.0);
        if (dmu1 - dmu0).abs() <= SLOPE_TOL * scale || (dmu1 + dmu0).abs() <= SLOPE_TOL * scale {
            return Err(Error::DegenerateSlopes { dmu0, dmu1 });
        }
        Ok(())
    }

    /// Evaluate mu(x). Sampled moments use local cubic interpolation.
    pub fn eval(&self, x: f64) -> f64 {
        match &self.shape {
            MomentShape::Polynomial(p) => p.eval(x),
            MomentShape::Sampled { values } => cubic_interp(values, x),
        }
    }
}

/// Local cubic (4-point Lagrange) interpolation on a uniform grid.
fn cubic_interp(values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let h = 1.0 / (n - 1) as f64;
    let pos = (x / h).floor() as isize;
    let i0 = pos.clamp(1, n as isize - 3) as usize - 1;
    let mut acc = 0.0;
    for a in 0..4 {
        let xa = (i0 + a) as f64 * h;
        let mut l = values[i0 + a];
        for b in 0..4 {
            if b != a {
                let xb = (i0 + b) as f64 * h;
                l *= (x - xb) / (xa - xb);
            }
        }
        acc += l;
    }
    acc
}

/// Moment coefficients m_k plus the residuals m_k - h_k.
#[derive(Debug, Clone)]
pub struct MomentCoefficients {
    pub m: Vec<f64>,
    /// m_k - h_k; decays faster than 1/k^3 for H^3 moments.
    pub residual: Vec<f64>,
}

/// m_k = <mu phi_1, phi_k> for k = 1..=n_modes. Polynomial moments use the
/// exact antiderivative path; sampled moments go through checked quadrature.
pub fn moment_coefficients(mu: &DipolarMoment, n_modes: usize) -> Result<MomentCoefficients> {
    let m = match &mu.shape {
        MomentShape::Polynomial(p) => project_polynomial_times_phi1(p, n_modes),
        MomentShape::Sampled { .. } => {
            let f = |x: f64| mu.eval(x) * SQRT_2 * (PI * x).sin();
            project_checked(&f, n_modes, Quadrature::for_modes(n_modes), QUAD_DRIFT_TOL)?
        }
    };
    let h = corrector_coefficients(mu, n_modes);
    let residual = m.iter().zip(h.iter()).map(|(mk, hk)| mk - hk).collect();
    Ok(MomentCoefficients { m, residual })
}

/// Hypothesis sweep result over k <= N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisReport {
    pub c_lower: f64,
    pub c_upper: f64,
    pub worst_k: usize,
}

/// c_lower = min_k k^3 |m_k|, c_upper = max_k k^3 |m_k|. Fails when the lower
/// constant drops to the numerical floor.
pub fn check_hypothesis(m: &[f64]) -> Result<HypothesisReport> {
    let mut c_lower = f64::INFINITY;
    let mut c_upper = 0.0f64;
    let mut worst_k = 1;
    for (i, &mk) in m.iter().enumerate() {
        let k = i + 1;
        let v = (k as f64).powi(3) * mk.abs();
        if v < c_lower {
            c_lower = v;
            worst_k = k;
        }
        c_upper = c_upper.max(v);
    }
    if c_lower <= HYPOTHESIS_TOL {
        return Err(Error::HypothesisViolation { worst_k, c_lower });
    }
    Ok(HypothesisReport { c_lower, c_upper, worst_k })
}

/// The cubic corrector
/// h(x) = -(pi sqrt(2)/3) ((mu'(0)+mu'(1)) x^3 - 3 mu'(0) x^2 + (2 mu'(0)-mu'(1)) x),
/// chosen so that mu phi_1 - h has zero-boundary second differences (H^3 split).
pub fn cubic_corrector(mu: &DipolarMoment) -> Polynomial {
    let scale = -PI * SQRT_2 / 3.0;
    Polynomial::new(vec![
        0.0,
        scale * (2.0 * mu.dmu0 - mu.dmu1),
        scale * (-3.0 * mu.dmu0),
        scale * (mu.dmu0 + mu.dmu1),
    ])
}

/// Closed-form sine coefficients of the cubic corrector:
/// h_k = 4/(k^3 pi^2) ((-1)^(k+1) mu'(1) - mu'(0)).
pub fn corrector_coefficients(mu: &DipolarMoment, n_modes: usize) -> Vec<f64> {
    (1..=n_modes)
        .map(|k| {
            let sign = if k.is_multiple_of(2) { -1.0 } else { 1.0 };
            4.0 / ((k as f64).powi(3) * PI * PI) * (sign * mu.dmu1 - mu.dmu0)
        })
        .collect()
}

/// Per-mode synthesis inputs: eigenvalues (plain and shift-adjusted), moment
/// coefficients, corrector coefficients and the basis normalizations.
#[derive(Debug, Clone)]
pub struct ModeTable {
    pub n_modes: usize,
    /// Target decay rate of the closed loop.
    pub rate: f64,
    /// 0 in plain mode, lambda_1 in shifted (rotating-frame) mode.
    pub lambda_shift: f64,
    /// True eigenvalues lambda_k = (k pi)^2.
    pub lambda: Vec<f64>,
    /// m_k = <mu phi_1, phi_k>.
    pub m: Vec<f64>,
    /// m_k - h_k.
    pub m_residual: Vec<f64>,
    /// h_k, sine coefficients of the cubic corrector.
    pub h_coeff: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub hypothesis: HypothesisReport,
}

/// Which spectrum the synthesis targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftMode {
    /// Work with the full spectrum lambda_k.
    Plain,
    /// Shift by lambda_1 (rotating-frame target); mode 1 of the g-family
    /// drops out and states are constrained to p_1 = 0.
    Shifted,
}

impl ModeTable {
    pub fn build(mu: &DipolarMoment, n_modes: usize, rate: f64, mode: ShiftMode) -> Result<Self> {
        assert!(n_modes >= 1);
        assert!(rate > 0.0, "decay rate must be positive");
        let coeffs = moment_coefficients(mu, n_modes)?;
        let hypothesis = check_hypothesis(&coeffs.m)?;
        let h_coeff = corrector_coefficients(mu, n_modes);
        let lambda: Vec<f64> = (1..=n_modes).map(lambda_k).collect();
        let lambda_shift = match mode {
            ShiftMode::Plain => 0.0,
            ShiftMode::Shifted => lambda[0],
        };
        let mut table = Self {
            n_modes,
            rate,
            lambda_shift,
            lambda,
            m: coeffs.m,
            m_residual: coeffs.residual,
            h_coeff,
            beta1: Vec::new(),
            beta2: Vec::new(),
            hypothesis,
        };
        let (b1, b2) = crate::basis::beta_coefficients(&table)?;
        table.beta1 = b1;
        table.beta2 = b2;
        Ok(table)
    }

    pub fn is_shifted(&self) -> bool {
        self.lambda_shift != 0.0
    }

    /// Shift-adjusted eigenvalue for mode `k` (1-based).
    pub fn lambda_eff(&self, k: usize) -> f64 {
        self.lambda[k - 1] - self.lambda_shift
    }
}
