//! Small dense linear-algebra helpers: deterministic power iterations used
//! for spectral norms and extreme eigenvalues of symmetric operators.

use nalgebra::{DMatrix, DVector};

/// Outcome of an iterative eigenvalue estimate.
#[derive(Clone, Debug)]
pub struct EigEstimate {
    pub value: f64,
    pub vector: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Deterministic, non-degenerate start vector for power iterations.
pub fn power_iteration_start(dim: usize) -> DVector<f64> {
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + ((i % 13) as f64) * 0.01);
    v /= v.norm();
    v
}

/// Largest-magnitude eigenvalue of a symmetric operator given by `apply`,
/// via power iteration with Rayleigh-quotient convergence test. The returned
/// value is signed (Rayleigh quotient at the final vector).
pub fn sym_extreme_eig<F>(
    apply: F,
    dim: usize,
    warm_start: Option<&DVector<f64>>,
    tol: f64,
    max_iter: usize,
) -> EigEstimate
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut v = match warm_start {
        Some(w) if w.len() == dim && w.norm() > 0.0 => w.normalize(),
        _ => power_iteration_start(dim),
    };
    let mut rho_prev = f64::INFINITY;
    let mut rho = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let av = apply(&v);
        rho = v.dot(&av);
        let norm = av.norm();
        if norm == 0.0 {
            // operator annihilates v; eigenvalue 0 along this direction
            rho = 0.0;
            converged = true;
            break;
        }
        v = av / norm;
        if (rho - rho_prev).abs() <= tol * rho.abs().max(1e-300) {
            converged = true;
            break;
        }
        rho_prev = rho;
    }
    EigEstimate {
        value: rho,
        vector: v,
        converged,
        iterations,
    }
}

/// Spectral norm (largest singular value) of a rectangular matrix via power
/// iteration on A^T A.
pub fn spectral_norm(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let est = sym_extreme_eig(
        |v| a.tr_mul(&(a * v)),
        cols,
        None,
        tol,
        max_iter,
    );
    est.value.max(0.0).sqrt()
}

/// Spectral norm of the difference A - B of two symmetric matrices, i.e. the
/// largest-magnitude eigenvalue in absolute value.
pub fn sym_diff_spectral_norm(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    warm_start: Option<&DVector<f64>>,
    tol: f64,
    max_iter: usize,
) -> EigEstimate {
    let dim = a.nrows();
    let mut est = sym_extreme_eig(|v| a * v - b * v, dim, warm_start, tol, max_iter);
    est.value = est.value.abs();
    est
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -5.0, 1.0]));
        let s = spectral_norm(&a, 1e-12, 10_000);
        assert!((s - 5.0).abs() < 1e-8);
    }

    #[test]
    fn extreme_eig_signed() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-4.0, 2.0, 1.0]));
        let est = sym_extreme_eig(|v| &a * v, 3, None, 1e-12, 10_000);
        assert!(est.converged);
        assert!((est.value + 4.0).abs() < 1e-8);
    }

    #[test]
    fn spectral_norm_matches_svd_on_random_rectangular() {
        let a = DMatrix::from_fn(7, 4, |i, j| ((i * 31 + j * 17) % 11) as f64 / 11.0 - 0.4);
        let s_pi = spectral_norm(&a, 1e-14, 100_000);
        let s_svd = a.clone().svd(false, false).singular_values[0];
        assert!((s_pi - s_svd).abs() <= 1e-8 * s_svd.max(1.0));
    }
}
