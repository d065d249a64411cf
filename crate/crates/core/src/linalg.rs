//! Dense linear-algebra helpers: refined LU solves, singular-value bounds,
//! Gram eigenvalue extremes and complex eigenpairs of real matrices.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// LU solve with partial pivoting plus one step of iterative refinement.
/// Returns the solution and the Euclidean norm of the final residual.
pub fn lu_solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let lu = a.clone().lu();
    let mut x = lu
        .solve(b)
        .ok_or(Error::SingularMatrix { context: "lu_solve_refined" })?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let residual = (b - a * &x).norm();
    Ok((x, residual))
}

/// Extreme singular values (sigma_max, sigma_min).
pub fn singular_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (max, min)
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    singular_extremes(a).0
}

/// Two-norm condition number sigma_max / sigma_min.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let (max, min) = singular_extremes(a);
    max / min
}

/// Extreme eigenvalues of a symmetric matrix.
pub fn symmetric_eigen_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    (max, min)
}

/// Numerical rank: singular values below `rel_tol * sigma_max` count as zero.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Rank of a complex matrix under the same thresholding.
pub fn numerical_rank_complex(a: &DMatrix<Complex<f64>>, rel_tol: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

pub type ComplexEigenPairs = (Vec<Complex<f64>>, Vec<DVector<Complex<f64>>>);

/// Eigenvalues and eigenvectors of a real square matrix with simple spectrum.
///
/// Eigenvalues come from the real Schur form; each eigenvector is recovered by
/// inverse iteration on the complexified matrix. Conjugate eigenvalue pairs
/// are detected and get exactly conjugate eigenvectors, so downstream
/// symmetrization leaves no imaginary residue.
pub fn complex_eigenpairs(a: &DMatrix<f64>) -> Result<ComplexEigenPairs> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let eigs = a.clone().complex_eigenvalues();
    let scale = a.amax().max(1.0);

    // Sort for reproducibility: by real part, then imaginary part.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        (eigs[i].re, eigs[i].im)
            .partial_cmp(&(eigs[j].re, eigs[j].im))
            .unwrap()
    });

    let ac = a.map(|v| Complex::new(v, 0.0));
    let mut values = vec![Complex::new(0.0, 0.0); n];
    let mut vectors: Vec<Option<DVector<Complex<f64>>>> = vec![None; n];

    for (slot, &idx) in order.iter().enumerate() {
        if vectors[slot].is_some() {
            continue;
        }
        let lam = eigs[idx];
        let v = inverse_iteration(&ac, lam, scale)?;
        values[slot] = lam;
        vectors[slot] = Some(v.clone());
        if lam.im.abs() > 1e-12 * scale {
            // Locate the conjugate partner among the remaining slots.
            let conj = lam.conj();
            let partner = (slot + 1..n)
                .filter(|&s| vectors[s].is_none())
                .min_by(|&s1, &s2| {
                    let d1 = (eigs[order[s1]] - conj).norm();
                    let d2 = (eigs[order[s2]] - conj).norm();
                    d1.partial_cmp(&d2).unwrap()
                });
            if let Some(ps) = partner {
                values[ps] = conj;
                vectors[ps] = Some(v.map(|z| z.conj()));
            }
        }
    }

    let vectors: Vec<DVector<Complex<f64>>> = vectors.into_iter().map(|v| v.unwrap()).collect();
    Ok((values, vectors))
}

/// A few rounds of inverse iteration around the shift `lam`. The start vector
/// is deterministic; the phase is fixed by making the largest entry real
/// positive.
fn inverse_iteration(
    ac: &DMatrix<Complex<f64>>,
    lam: Complex<f64>,
    scale: f64,
) -> Result<DVector<Complex<f64>>> {
    let n = ac.nrows();
    let mut shift = lam;
    for attempt in 0..3 {
        let mut m = ac.clone();
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        let Some(lu) = try_lu(&m) else {
            // Exactly singular shift: nudge it off the eigenvalue.
            shift += Complex::new(1e-13 * scale * (attempt + 1) as f64, 0.0);
            continue;
        };
        let mut v = DVector::from_fn(n, |i, _| {
            Complex::new(1.0 + 0.37 * ((i + 1) as f64).sin(), 0.11 * ((i + 1) as f64).cos())
        });
        v /= Complex::new(v.norm(), 0.0);
        for _ in 0..4 {
            let Some(w) = lu.solve(&v) else { break };
            let norm = w.norm();
            if !norm.is_finite() || norm == 0.0 {
                break;
            }
            v = w / Complex::new(norm, 0.0);
        }
        // Fix the phase for reproducibility.
        let (mut best, mut best_abs) = (Complex::new(1.0, 0.0), 0.0);
        for z in v.iter() {
            if z.norm() > best_abs {
                best_abs = z.norm();
                best = *z;
            }
        }
        v *= best.conj() / Complex::new(best_abs, 0.0);
        let resid = (ac * &v - &v * lam).norm();
        if resid <= 1e-8 * scale {
            return Ok(v);
        }
        shift += Complex::new(1e-13 * scale, 1e-13 * scale);
    }
    Err(Error::SingularMatrix { context: "inverse_iteration" })
}

fn try_lu(
    m: &DMatrix<Complex<f64>>,
) -> Option<nalgebra::LU<Complex<f64>, nalgebra::Dyn, nalgebra::Dyn>> {
    let lu = m.clone().lu();
    // Probe with a solve; nalgebra returns None on exact singularity.
    let probe = DVector::from_element(m.nrows(), Complex::new(1.0, 0.0));
    lu.solve(&probe)?;
    Some(lu)
}
