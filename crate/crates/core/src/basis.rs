//! The candidate Riesz basis built from the explicit Fourier formulas.
//!
//! For each mode pair (n, k) the 4x4 mode-coupling matrix has determinant
//! delta_nk = (rate^2 + (L_k - L_n)^2)(rate^2 + (L_k + L_n)^2) > 0, where
//! L_j is the (possibly shifted) eigenvalue. Inverting it in closed form
//! gives the coefficient tensors c_nk^ij; the h-family tensors are entrywise
//! swaps of the c-family. The basis columns (g_n^12, g_n^22) and
//! (h_n^12, h_n^22) are normalized so their diagonal coefficients equal
//! 1/lambda_n, which makes the family quadratically close to the weighted
//! orthonormal basis; the frame-bound and tail diagnostics quantify that.

use nalgebra::{DMatrix, Matrix4};

use crate::error::{Error, Result};
use crate::moment::ModeTable;

/// Guard for the frame-bound check: sigma_min below this fraction of
/// sigma_max counts as a rank-deficient family.
const NEAR_SINGULAR_RATIO: f64 = 1e-10;

/// Normalization sequences for the g- and h-families, chosen so that
/// <g_n^12, phi_n> = <h_n^22, phi_n> = 1/lambda_n.
///
/// In plain mode this is
///   beta1_n = rate (rate^2 + 4 lambda_n^2) / (2 lambda_n^3 m_n),
///   beta2_n = -rate (rate^2 + 4 lambda_n^2) / ((rate^2 + 2 lambda_n^2) lambda_n m_n);
/// in shifted mode lambda_n is replaced by the shifted eigenvalue inside the
/// parenthesized factors while the single 1/lambda_n normalization keeps the
/// true eigenvalue. Mode 1 of the g-family is dropped in shifted mode (its
/// shifted eigenvalue is zero), so beta1_1 is left at 0 there.
pub fn beta_coefficients(table: &ModeTable) -> Result<(Vec<f64>, Vec<f64>)> {
    let rate = table.rate;
    let r2 = rate * rate;
    let mut beta1 = vec![0.0; table.n_modes];
    let mut beta2 = vec![0.0; table.n_modes];
    for n in 1..=table.n_modes {
        let m_n = table.m[n - 1];
        if m_n == 0.0 {
            return Err(Error::HypothesisViolation { worst_k: n, c_lower: 0.0 });
        }
        let lam_true = table.lambda[n - 1];
        let lam = table.lambda_eff(n);
        let common = rate * (r2 + 4.0 * lam * lam);
        if !(table.is_shifted() && n == 1) {
            beta1[n - 1] = common / (2.0 * (lam * lam) * lam_true * m_n);
        }
        beta2[n - 1] = -common / ((r2 + 2.0 * lam * lam) * lam_true * m_n);
    }
    Ok((beta1, beta2))
}

/// The 4x4 mode-coupling matrix for the pair (n, k).
pub fn mode_coupling_matrix(table: &ModeTable, n: usize, k: usize) -> Matrix4<f64> {
    let rate = table.rate;
    let ln = table.lambda_eff(n);
    let lk = table.lambda_eff(k);
    Matrix4::new(
        -lk, 0.0, -rate, ln, //
        0.0, -lk, -ln, -rate, //
        rate, -ln, -lk, 0.0, //
        ln, rate, 0.0, -lk,
    )
}

/// Closed-form inverse applied to the first unit vector, scaled by delta:
/// the coefficient tensors of the g-family.
#[derive(Debug, Clone)]
pub struct KernelTensor {
    pub n_modes: usize,
    /// Entry (n-1, k-1) = c_nk^ij.
    pub c11: DMatrix<f64>,
    pub c12: DMatrix<f64>,
    pub c21: DMatrix<f64>,
    pub c22: DMatrix<f64>,
    /// d_nk^12 = c_nk^11 and d_nk^22 = c_nk^21, stored so the swap identity
    /// holds entrywise by construction.
    pub d12: DMatrix<f64>,
    pub d22: DMatrix<f64>,
    pub delta: DMatrix<f64>,
}

/// Fill the coefficient tensors
///   c11 = L_k (L_n^2 - rate^2 - L_k^2) / delta,
///   c12 = 2 rate L_k L_n / delta,
///   c21 = -rate (rate^2 + L_k^2 + L_n^2) / delta,
///   c22 = L_n (rate^2 - L_k^2 + L_n^2) / delta.
pub fn kernel_tensors(table: &ModeTable) -> KernelTensor {
    let n_modes = table.n_modes;
    let rate = table.rate;
    let r2 = rate * rate;
    let mut c11 = DMatrix::zeros(n_modes, n_modes);
    let mut c12 = DMatrix::zeros(n_modes, n_modes);
    let mut c21 = DMatrix::zeros(n_modes, n_modes);
    let mut c22 = DMatrix::zeros(n_modes, n_modes);
    let mut delta = DMatrix::zeros(n_modes, n_modes);
    for n in 1..=n_modes {
        let ln = table.lambda_eff(n);
        for k in 1..=n_modes {
            let lk = table.lambda_eff(k);
            let diff = lk - ln;
            let sum = lk + ln;
            let det = (r2 + diff * diff) * (r2 + sum * sum);
            let (i, j) = (n - 1, k - 1);
            delta[(i, j)] = det;
            c11[(i, j)] = lk * (ln * ln - r2 - lk * lk) / det;
            c12[(i, j)] = 2.0 * rate * lk * ln / det;
            c21[(i, j)] = -rate * (r2 + lk * lk + ln * ln) / det;
            c22[(i, j)] = ln * (r2 - lk * lk + ln * ln) / det;
        }
    }
    let d12 = c11.clone();
    let d22 = c21.clone();
    KernelTensor { n_modes, c11, c12, c21, c22, d12, d22, delta }
}

/// The basis family: coefficient tensors plus the weighted column matrices.
#[derive(Debug, Clone)]
pub struct BasisFamily {
    pub n_modes: usize,
    pub shifted: bool,
    pub tensor: KernelTensor,
    /// Modes contributing g-columns (1..=N, or 2..=N in shifted mode).
    pub g_modes: Vec<usize>,
    /// Columns in X^2-weighted coordinates: rows are (component-1 modes,
    /// then component-2 modes) scaled by lambda_k; columns are the g-family
    /// followed by the h-family.
    pub x2: DMatrix<f64>,
    /// The same columns in X^3-weighted coordinates, additionally scaled by
    /// lambda_n^(-1/2) (the tilde family).
    pub x3_tilde: DMatrix<f64>,
}

impl BasisFamily {
    pub fn assemble(table: &ModeTable) -> Result<Self> {
        let tensor = kernel_tensors(table);
        Self::from_tensor(tensor, table)
    }

    pub fn from_tensor(tensor: KernelTensor, table: &ModeTable) -> Result<Self> {
        let n = table.n_modes;
        if tensor.n_modes != n || table.beta1.len() != n {
            return Err(Error::Inconsistent(
                "tensor and mode table disagree on the truncation".into(),
            ));
        }
        let shifted = table.is_shifted();
        let g_modes: Vec<usize> = if shifted { (2..=n).collect() } else { (1..=n).collect() };
        let n_cols = g_modes.len() + n;
        let mut x2 = DMatrix::zeros(2 * n, n_cols);
        let mut x3 = DMatrix::zeros(2 * n, n_cols);
        for (col, &gn) in g_modes.iter().enumerate() {
            let b1 = table.beta1[gn - 1];
            let tilde = table.lambda[gn - 1].sqrt().recip();
            for k in 1..=n {
                let w2 = table.lambda[k - 1];
                let w3 = w2 * w2.sqrt();
                let mk = table.m[k - 1];
                let comp1 = tensor.c12[(gn - 1, k - 1)] * b1 * mk;
                let comp2 = tensor.c22[(gn - 1, k - 1)] * b1 * mk;
                x2[(k - 1, col)] = w2 * comp1;
                x2[(n + k - 1, col)] = w2 * comp2;
                x3[(k - 1, col)] = w3 * comp1 * tilde;
                x3[(n + k - 1, col)] = w3 * comp2 * tilde;
            }
        }
        for hn in 1..=n {
            let col = g_modes.len() + hn - 1;
            let b2 = table.beta2[hn - 1];
            let tilde = table.lambda[hn - 1].sqrt().recip();
            for k in 1..=n {
                let w2 = table.lambda[k - 1];
                let w3 = w2 * w2.sqrt();
                let mk = table.m[k - 1];
                let comp1 = tensor.d12[(hn - 1, k - 1)] * b2 * mk;
                let comp2 = tensor.d22[(hn - 1, k - 1)] * b2 * mk;
                x2[(k - 1, col)] = w2 * comp1;
                x2[(n + k - 1, col)] = w2 * comp2;
                x3[(k - 1, col)] = w3 * comp1 * tilde;
                x3[(n + k - 1, col)] = w3 * comp2 * tilde;
            }
        }
        Ok(Self { n_modes: n, shifted, tensor, g_modes, x2, x3_tilde: x3 })
    }

    pub fn n_columns(&self) -> usize {
        self.x2.ncols()
    }

    fn columns(&self, s: u32) -> &DMatrix<f64> {
        match s {
            2 => &self.x2,
            3 => &self.x3_tilde,
            _ => panic!("basis columns are kept for s = 2 and s = 3 only"),
        }
    }
}

/// Sweep of the quadratic-closeness partial sums at M = N/4, N/2, N.
#[derive(Debug, Clone)]
pub struct TailReport {
    pub s: u32,
    pub checkpoints: Vec<usize>,
    pub s_g: Vec<f64>,
    pub s_h: Vec<f64>,
}

impl TailReport {
    /// Last-increment to previous-sum ratio, the saturation measure.
    pub fn g_increment_ratio(&self) -> f64 {
        let n = self.s_g.len();
        (self.s_g[n - 1] - self.s_g[n - 2]) / self.s_g[n - 2]
    }

    pub fn h_increment_ratio(&self) -> f64 {
        let n = self.s_h.len();
        (self.s_h[n - 1] - self.s_h[n - 2]) / self.s_h[n - 2]
    }
}

/// Quadratic-closeness partial sums
/// S_g(M) = sum_{n<=M} || (phi_n/lambda_n^(s/2), 0) - (g_n^12, g_n^22)/lambda_n^((s-2)/2) ||_{X^s}^2
/// and the h-family analogue, with the inner mode sums truncated at N.
pub fn closeness_tails(basis: &BasisFamily, table: &ModeTable, s: u32) -> TailReport {
    assert!(s == 2 || s == 3, "closeness sums are defined for s = 2, 3");
    let n = basis.n_modes;
    let checkpoints = vec![n / 4, n / 2, n];
    let term_g = |gn: usize| -> f64 {
        let b1 = table.beta1[gn - 1];
        let ln_half = table.lambda[gn - 1].powf((s as f64 - 2.0) / 2.0);
        let unit = table.lambda[gn - 1].powf(-(s as f64) / 2.0);
        let mut acc = 0.0;
        for k in 1..=n {
            let w = table.lambda[k - 1].powi(s as i32);
            let mk = table.m[k - 1];
            let g12 = basis.tensor.c12[(gn - 1, k - 1)] * b1 * mk / ln_half;
            let g22 = basis.tensor.c22[(gn - 1, k - 1)] * b1 * mk / ln_half;
            let e1 = if k == gn { unit } else { 0.0 };
            acc += w * ((e1 - g12) * (e1 - g12) + g22 * g22);
        }
        acc
    };
    let term_h = |hn: usize| -> f64 {
        let b2 = table.beta2[hn - 1];
        let ln_half = table.lambda[hn - 1].powf((s as f64 - 2.0) / 2.0);
        let unit = table.lambda[hn - 1].powf(-(s as f64) / 2.0);
        let mut acc = 0.0;
        for k in 1..=n {
            let w = table.lambda[k - 1].powi(s as i32);
            let mk = table.m[k - 1];
            let h12 = basis.tensor.d12[(hn - 1, k - 1)] * b2 * mk / ln_half;
            let h22 = basis.tensor.d22[(hn - 1, k - 1)] * b2 * mk / ln_half;
            let e2 = if k == hn { unit } else { 0.0 };
            acc += w * (h12 * h12 + (e2 - h22) * (e2 - h22));
        }
        acc
    };
    let mut s_g = Vec::new();
    let mut s_h = Vec::new();
    let mut acc_g = 0.0;
    let mut acc_h = 0.0;
    let mut next = 0;
    for mode in 1..=n {
        if basis.g_modes.contains(&mode) {
            acc_g += term_g(mode);
        }
        acc_h += term_h(mode);
        if next < checkpoints.len() && mode == checkpoints[next] {
            s_g.push(acc_g);
            s_h.push(acc_h);
            next += 1;
        }
    }
    TailReport { s, checkpoints, s_g, s_h }
}

/// Frame bounds: extreme eigenvalues of the Gram matrix of the family in
/// X^s coordinates (s = 2 raw columns, s = 3 tilde columns).
pub fn frame_bounds(basis: &BasisFamily, s: u32) -> Result<(f64, f64)> {
    let cols = basis.columns(s);
    let gram = cols.transpose() * cols;
    let (max, min) = crate::linalg::symmetric_eigen_extremes(&gram);
    if min < NEAR_SINGULAR_RATIO * max {
        return Err(Error::NearSingularBasis { ratio: min / max });
    }
    Ok((min, max))
}
