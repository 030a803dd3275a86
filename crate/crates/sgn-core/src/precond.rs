//! The running Gauss-Newton preconditioner
//! `H_k = alpha * sum_{t<=k} J_t^T J_t + lambda * I`
//! with a dense matrix path and an incrementally maintained inverse.
//!
//! The inverse is updated per Jacobian row with the Sherman-Morrison
//! identity `(H + a g g^T)^{-1} = H^{-1} - a (H^{-1}g)(H^{-1}g)^T / (1 + a
//! g^T H^{-1} g)`, and the log-determinant is accumulated through the matrix
//! determinant lemma, `log det(H + a g g^T) = log det H + log(1 + a g^T
//! H^{-1} g)`, so both stay O(p^2) per row. `accumulate_batch_blocked` folds
//! a whole batch into one rank-B Woodbury update; it computes the same state
//! with fewer passes over memory and is the path the large training runs
//! use.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Result, SgnError};
use crate::linalg;

#[derive(Clone, Debug)]
pub struct Preconditioner {
    h: DMatrix<f64>,
    h_inv: DMatrix<f64>,
    logdet: f64,
    alpha: f64,
    lambda: f64,
    update_count: usize,
    dim: usize,
}

/// Result of a minimum-eigenvalue query; `converged = false` means the
/// iteration cap was reached and `value` is the best estimate.
#[derive(Clone, Copy, Debug)]
pub struct MinEigEstimate {
    pub value: f64,
    pub converged: bool,
}

impl Preconditioner {
    /// Fresh state H = lambda * I with exact log-determinant p * log(lambda).
    pub fn new(dim: usize, alpha: f64, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(SgnError::InvalidParameter("dimension must be positive".into()));
        }
        if !(alpha > 0.0) {
            return Err(SgnError::InvalidParameter("alpha must be positive".into()));
        }
        if !(lambda > 0.0) {
            return Err(SgnError::InvalidParameter("lambda must be positive".into()));
        }
        Ok(Preconditioner {
            h: DMatrix::identity(dim, dim) * lambda,
            h_inv: DMatrix::identity(dim, dim) / lambda,
            logdet: dim as f64 * lambda.ln(),
            alpha,
            lambda,
            update_count: 0,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of `accumulate_batch*` calls applied so far.
    pub fn update_count(&self) -> usize {
        self.update_count
    }

    /// Dense H.
    pub fn dense(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Incrementally maintained H^{-1}.
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.h_inv
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// `log det(H_k) - log det(H_0)`; zero before any update and
    /// nondecreasing afterwards.
    pub fn logdet_ratio(&self) -> f64 {
        self.logdet - self.dim as f64 * self.lambda.ln()
    }

    /// Accumulated Gram sum S_k = sum_{t<=k} J_t^T J_t = (H - lambda I)/alpha.
    pub fn gram_sum(&self) -> DMatrix<f64> {
        let mut s = self.h.clone();
        for i in 0..self.dim {
            s[(i, i)] -= self.lambda;
        }
        s / self.alpha
    }

    fn check_batch(&self, jac: &DMatrix<f64>) -> Result<()> {
        if jac.nrows() == 0 {
            return Err(SgnError::EmptyBatch);
        }
        if jac.ncols() != self.dim {
            return Err(SgnError::DimensionMismatch(format!(
                "jacobian has {} columns, state dimension is {}",
                jac.ncols(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Fold a batch Jacobian into the state: H += alpha * J^T J, with the
    /// inverse updated by successive rank-one Sherman-Morrison steps, one per
    /// row of J, and the log-determinant accumulated per step.
    pub fn accumulate_batch(&mut self, jac: &DMatrix<f64>) -> Result<()> {
        self.check_batch(jac)?;
        for r in 0..jac.nrows() {
            let g = jac.row(r).transpose();
            self.accumulate_row(&g)?;
        }
        self.update_count += 1;
        Ok(())
    }

    pub(crate) fn accumulate_row(&mut self, g: &DVector<f64>) -> Result<()> {
        let hg = &self.h_inv * g;
        let denom = 1.0 + self.alpha * g.dot(&hg);
        if !(denom > 0.0) {
            // impossible for an SPD state; the inverse has been corrupted
            return Err(SgnError::NumericalBreakdown(format!(
                "Sherman-Morrison denominator {denom} <= 0"
            )));
        }
        self.h_inv.ger(-self.alpha / denom, &hg, &hg, 1.0);
        self.h.ger(self.alpha, g, g, 1.0);
        self.logdet += denom.ln();
        Ok(())
    }

    pub(crate) fn bump_update_count(&mut self) {
        self.update_count += 1;
    }

    /// Same state transition as [`Preconditioner::accumulate_batch`], done as
    /// a single rank-B Woodbury update:
    /// `H^{-1} -= alpha * U S^{-1} U^T` with `U = H^{-1} J^T` and
    /// `S = I_B + alpha J U`, and `log det` incremented by `log det S`.
    pub fn accumulate_batch_blocked(&mut self, jac: &DMatrix<f64>) -> Result<()> {
        self.check_batch(jac)?;
        let b = jac.nrows();
        let jt = jac.transpose();
        let u = &self.h_inv * &jt; // p x B
        let mut s = DMatrix::identity(b, b);
        s.gemm(self.alpha, jac, &u, 1.0);
        let chol = Cholesky::new(s).ok_or_else(|| {
            SgnError::NumericalBreakdown("capacitance matrix not positive definite".into())
        })?;
        let l = chol.l();
        let mut logdet_s = 0.0;
        for i in 0..b {
            logdet_s += l[(i, i)].ln();
        }
        let mut s_inv = chol.inverse();
        // keep the small inverse exactly symmetric before forming U S^{-1} U^T
        for i in 0..b {
            for j in 0..i {
                let avg = 0.5 * (s_inv[(i, j)] + s_inv[(j, i)]);
                s_inv[(i, j)] = avg;
                s_inv[(j, i)] = avg;
            }
        }
        let us = &u * &s_inv;
        self.h_inv.gemm(-self.alpha, &us, &u.transpose(), 1.0);
        self.h.gemm(self.alpha, &jt, jac, 1.0);
        self.logdet += 2.0 * logdet_s;
        self.update_count += 1;
        Ok(())
    }

    /// H^{-1} v through the incremental path.
    pub fn solve(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.dim {
            return Err(SgnError::DimensionMismatch(format!(
                "vector has length {}, state dimension is {}",
                v.len(),
                self.dim
            )));
        }
        Ok(&self.h_inv * v)
    }

    /// H^{-1} v through a dense Cholesky factorization of H; reference path
    /// for cross-checking the incremental inverse.
    pub fn solve_dense(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.dim {
            return Err(SgnError::DimensionMismatch(format!(
                "vector has length {}, state dimension is {}",
                v.len(),
                self.dim
            )));
        }
        let chol = Cholesky::new(self.h.clone())
            .ok_or_else(|| SgnError::NotPositiveDefinite("dense H".into()))?;
        Ok(chol.solve(v))
    }

    /// lambda_min(H) by inverse power iteration on the incremental inverse,
    /// relative tolerance 1e-6.
    pub fn min_eigenvalue(&self) -> MinEigEstimate {
        let mut warm = linalg::power_iteration_start(self.dim);
        self.min_eigenvalue_warm(&mut warm)
    }

    /// As [`Preconditioner::min_eigenvalue`], reusing (and updating) a warm
    /// start vector; callers that query every iteration converge in a few
    /// steps this way.
    pub fn min_eigenvalue_warm(&self, warm: &mut DVector<f64>) -> MinEigEstimate {
        let est = linalg::sym_extreme_eig(
            |v| &self.h_inv * v,
            self.dim,
            Some(warm),
            1e-6,
            2_000,
        );
        *warm = est.vector;
        let value = if est.value > 0.0 { 1.0 / est.value } else { f64::INFINITY };
        MinEigEstimate {
            value,
            converged: est.converged,
        }
    }
}

/// Count of eigenvalues of a PSD matrix exceeding `threshold * lambda_max`;
/// the numerical-rank estimate used for the intrinsic-rank telemetry. The
/// zero matrix has rank 0.
pub fn intrinsic_rank_estimate(gram: &DMatrix<f64>, threshold: f64) -> Result<usize> {
    if gram.nrows() != gram.ncols() {
        return Err(SgnError::DimensionMismatch(format!(
            "gram matrix is {}x{}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if !(threshold > 0.0) {
        return Err(SgnError::InvalidParameter("threshold must be positive".into()));
    }
    let eigs = gram.clone().symmetric_eigen().eigenvalues;
    let max = eigs.iter().cloned().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return Ok(0);
    }
    Ok(eigs.iter().filter(|&&e| e > threshold * max).count())
}

/// Default relative eigenvalue threshold for [`intrinsic_rank_estimate`].
pub const INTRINSIC_RANK_THRESHOLD: f64 = 1e-8;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
        DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn init_state() {
        let s = Preconditioner::new(2, 1.0, 1.0).unwrap();
        assert_eq!(s.dense(), &DMatrix::identity(2, 2));
        assert_eq!(s.logdet_ratio(), 0.0);

        let s = Preconditioner::new(3, 0.5, 2.0).unwrap();
        assert!((s.logdet() - 3.0 * 2.0_f64.ln()).abs() < 1e-15);
        let prod = s.dense() * s.inverse();
        assert!((prod - DMatrix::identity(3, 3)).norm() < 1e-12);

        assert!(Preconditioner::new(2, 0.0, 1.0).is_err());
        assert!(Preconditioner::new(2, 1.0, -1.0).is_err());
    }

    #[test]
    fn single_unit_row_on_identity() {
        // p=2, lambda=1, alpha=1, g = e1: H = diag(2, 1), logdet = log 2
        let mut s = Preconditioner::new(2, 1.0, 1.0).unwrap();
        let jac = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        s.accumulate_batch(&jac).unwrap();
        assert!((s.dense()[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((s.dense()[(1, 1)] - 1.0).abs() < 1e-15);
        assert!((s.logdet_ratio() - 2.0_f64.ln()).abs() < 1e-15);
        let v = s.solve(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15);
        assert_eq!(s.update_count(), 1);
    }

    #[test]
    fn zero_row_leaves_state_unchanged() {
        let mut s = Preconditioner::new(4, 0.7, 1.3).unwrap();
        let before = s.clone();
        let jac = DMatrix::zeros(1, 4);
        s.accumulate_batch(&jac).unwrap();
        assert_eq!(s.dense(), before.dense());
        assert_eq!(s.inverse(), before.inverse());
        assert_eq!(s.logdet(), before.logdet());
    }

    #[test]
    fn incremental_inverse_matches_dense_inverse() {
        // 50 random rank-1 updates at p=20 against a dense matrix inverse
        let p = 20;
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let mut s = Preconditioner::new(p, 0.3, 0.8).unwrap();
        for _ in 0..50 {
            let jac = DMatrix::from_fn(1, p, |_, _| rng.random_range(-1.0..1.0));
            s.accumulate_batch(&jac).unwrap();
        }
        let dense_inv = s.dense().clone().try_inverse().unwrap();
        let rel = (s.inverse() - &dense_inv).norm() / dense_inv.norm();
        assert!(rel <= 1e-8, "relative error {rel}");
        // logdet telemetry matches the dense determinant
        let chol = Cholesky::new(s.dense().clone()).unwrap();
        let mut logdet_dense = 0.0;
        for i in 0..p {
            logdet_dense += 2.0 * chol.l()[(i, i)].ln();
        }
        assert!((s.logdet() - logdet_dense).abs() <= 1e-6);
    }

    #[test]
    fn blocked_update_matches_row_wise() {
        let p = 15;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut row_wise = Preconditioner::new(p, 0.4, 0.6).unwrap();
        let mut blocked = Preconditioner::new(p, 0.4, 0.6).unwrap();
        for _ in 0..10 {
            let jac = DMatrix::from_fn(5, p, |_, _| rng.random_range(-1.0..1.0));
            row_wise.accumulate_batch(&jac).unwrap();
            blocked.accumulate_batch_blocked(&jac).unwrap();
        }
        assert!((row_wise.dense() - blocked.dense()).norm() / row_wise.dense().norm() < 1e-12);
        assert!(
            (row_wise.inverse() - blocked.inverse()).norm() / row_wise.inverse().norm() < 1e-9
        );
        assert!((row_wise.logdet() - blocked.logdet()).abs() < 1e-9);
    }

    #[test]
    fn solve_agrees_with_dense_solve() {
        let p = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut s = Preconditioner::new(p, 1.1, 0.5).unwrap();
        for _ in 0..8 {
            let jac = DMatrix::from_fn(3, p, |_, _| rng.random_range(-1.0..1.0));
            s.accumulate_batch(&jac).unwrap();
        }
        let v = random_vec(&mut rng, p);
        let a = s.solve(&v).unwrap();
        let b = s.solve_dense(&v).unwrap();
        assert!((&a - &b).norm() / b.norm() <= 1e-7);
        let zero = s.solve(&DVector::zeros(p)).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn loewner_growth_and_floor() {
        let p = 10;
        let lambda = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = Preconditioner::new(p, 0.6, lambda).unwrap();
        let mut prev = s.dense().clone();
        let mut prev_logdet = s.logdet_ratio();
        for _ in 0..20 {
            let jac = DMatrix::from_fn(2, p, |_, _| rng.random_range(-1.0..1.0));
            s.accumulate_batch(&jac).unwrap();
            // H_{k+1} - H_k is PSD along random directions
            let diff = s.dense() - &prev;
            for _ in 0..5 {
                let v = random_vec(&mut rng, p);
                assert!(v.dot(&(&diff * &v)) >= -1e-12);
            }
            assert!(s.logdet_ratio() >= prev_logdet - 1e-12);
            // lambda_min(H) >= lambda
            let min_eig = s.min_eigenvalue();
            assert!(min_eig.value >= lambda - 1e-9);
            prev = s.dense().clone();
            prev_logdet = s.logdet_ratio();
        }
    }

    #[test]
    fn min_eigenvalue_against_eigendecomposition() {
        let p = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut s = Preconditioner::new(p, 0.8, 0.4).unwrap();
        for _ in 0..40 {
            let jac = DMatrix::from_fn(2, p, |_, _| rng.random_range(-1.0..1.0));
            s.accumulate_batch(&jac).unwrap();
        }
        let est = s.min_eigenvalue();
        assert!(est.converged);
        let eigs = s.dense().clone().symmetric_eigen().eigenvalues;
        let exact = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            (est.value - exact).abs() / exact <= 1e-5,
            "estimate {} vs exact {exact}",
            est.value
        );

        let s = Preconditioner::new(5, 1.0, 2.5).unwrap();
        assert!((s.min_eigenvalue().value - 2.5).abs() < 1e-9);
    }

    #[test]
    fn intrinsic_rank_cases() {
        let id = DMatrix::<f64>::identity(6, 6);
        assert_eq!(intrinsic_rank_estimate(&id, 0.5).unwrap(), 6);

        let g = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let outer = &g * g.transpose();
        assert_eq!(intrinsic_rank_estimate(&outer, 1e-8).unwrap(), 1);

        let zero = DMatrix::<f64>::zeros(4, 4);
        assert_eq!(intrinsic_rank_estimate(&zero, 1e-8).unwrap(), 0);

        assert!(intrinsic_rank_estimate(&id, 0.0).is_err());
    }

    #[test]
    fn gram_sum_recovers_accumulated_jacobians() {
        let p = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = Preconditioner::new(p, 0.25, 1.5).unwrap();
        let mut expected = DMatrix::zeros(p, p);
        for _ in 0..5 {
            let jac = DMatrix::from_fn(2, p, |_, _| rng.random_range(-1.0..1.0));
            expected += jac.transpose() * &jac;
            s.accumulate_batch(&jac).unwrap();
        }
        assert!((s.gram_sum() - expected).norm() < 1e-10);
    }
}
