//! Metric projection onto the Euclidean ball C = B_2(w0, r_C) under the
//! H-norm.
//!
//! The KKT system of `min (w-u)^T H (w-u) s.t. ||w - w0|| <= r_C` reduces to
//! a scalar root find: `w(mu) = (H + mu I)^{-1} (H u + mu w0)` with mu = 0
//! when u is feasible, otherwise the unique mu > 0 with
//! `||w(mu) - w0|| = r_C`. Each evaluation is one dense Cholesky solve; the
//! incremental inverse of the preconditioner cannot absorb the +mu*I shift,
//! which is why this path works off the dense matrix.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Result, SgnError};
use crate::linalg;
use crate::network::GeometrySpec;
use crate::precond::Preconditioner;

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    pub point: DVector<f64>,
    /// KKT multiplier of the ball constraint; zero when inactive, infinite in
    /// the degenerate r_C = 0 case where C collapses to {w0}.
    pub multiplier: f64,
    pub active: bool,
    /// `||H (point - u) + mu (point - w0)|| / (1 + ||u||)`.
    pub kkt_residual: f64,
}

/// Absolute tolerance of the scalar root find, as a multiple of r_C.
const ROOT_TOL: f64 = 1e-10;
const MAX_ROOT_ITERS: usize = 200;

pub fn project(
    u: &DVector<f64>,
    state: &Preconditioner,
    geom: &GeometrySpec,
) -> Result<ProjectionResult> {
    project_dense(u, state.dense(), geom)
}

/// Projection under an explicitly supplied dense SPD metric.
pub fn project_dense(
    u: &DVector<f64>,
    h: &DMatrix<f64>,
    geom: &GeometrySpec,
) -> Result<ProjectionResult> {
    let p = h.nrows();
    if u.len() != p || geom.anchor().len() != p || h.ncols() != p {
        return Err(SgnError::DimensionMismatch(format!(
            "projection dimensions disagree: u={}, anchor={}, H={}x{}",
            u.len(),
            geom.anchor().len(),
            h.nrows(),
            h.ncols()
        )));
    }
    let w0 = geom.anchor();
    let r = geom.radius();

    if r == 0.0 {
        return Ok(ProjectionResult {
            point: w0.clone(),
            multiplier: f64::INFINITY,
            active: true,
            kkt_residual: 0.0,
        });
    }

    let dist = (u - w0).norm();
    if dist <= r {
        return Ok(ProjectionResult {
            point: u.clone(),
            multiplier: 0.0,
            active: false,
            kkt_residual: 0.0,
        });
    }

    // the shifted solves below only certify H + mu I for the mu they visit;
    // reject a non-SPD metric up front
    if Cholesky::new(h.clone()).is_none() {
        return Err(SgnError::NotPositiveDefinite("projection metric".into()));
    }

    let hu = h * u;
    let lambda_max = linalg::sym_extreme_eig(|v| h * v, p, None, 1e-6, 10_000)
        .value
        .max(f64::MIN_POSITIVE);

    // mu in [0, lambda_max (dist/r - 1) + 1] brackets the root:
    // ||w(mu) - w0|| = ||(H + mu I)^{-1} H (u - w0)|| <= lambda_max /
    // (lambda_max + mu) * dist, monotone decreasing in mu.
    let mut lo = 0.0;
    let mut hi = lambda_max * (dist / r - 1.0) + 1.0;
    let tol = ROOT_TOL * r;

    let evaluate = |mu: f64| -> Result<(DVector<f64>, DVector<f64>, Cholesky<f64, nalgebra::Dyn>)> {
        let mut shifted = h.clone();
        for i in 0..p {
            shifted[(i, i)] += mu;
        }
        let chol = Cholesky::new(shifted)
            .ok_or_else(|| SgnError::NotPositiveDefinite(format!("H + {mu} I")))?;
        let rhs = &hu + mu * w0;
        let w = chol.solve(&rhs);
        let v = &w - w0;
        Ok((w, v, chol))
    };

    // widen the bracket if the theoretical bound was tightened by rounding
    for _ in 0..64 {
        let (_, v, _) = evaluate(hi)?;
        if v.norm() <= r {
            break;
        }
        hi *= 2.0;
    }

    let mut mu = 0.5 * (lo + hi);
    let mut result: Option<(DVector<f64>, f64)> = None;
    for _ in 0..MAX_ROOT_ITERS {
        let (w, v, chol) = evaluate(mu)?;
        let n = v.norm();
        if (n - r).abs() <= tol {
            result = Some((w, mu));
            break;
        }
        if n > r {
            lo = mu;
        } else {
            hi = mu;
        }
        // Newton step on g(mu) = 1/r - 1/n(mu); n'(mu) = v . v' / n with
        // v' = -(H + mu I)^{-1} v
        let v_prime = -chol.solve(&v);
        let n_prime = v.dot(&v_prime) / n;
        let g = 1.0 / r - 1.0 / n;
        let g_prime = n_prime / (n * n);
        let newton = mu - g / g_prime;
        mu = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let (point, multiplier) = result.ok_or_else(|| {
        SgnError::NumericalBreakdown(format!(
            "ball projection root find did not reach tolerance {tol} within {MAX_ROOT_ITERS} iterations"
        ))
    })?;

    let kkt = (h * (&point - u) + multiplier * (&point - w0)).norm() / (1.0 + u.norm());
    Ok(ProjectionResult {
        point,
        multiplier,
        active: true,
        kkt_residual: kkt,
    })
}

/// H-norm `sqrt(v^T H v)` of a vector under the dense preconditioner matrix.
pub fn h_norm(h: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(h * v)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NetworkConfig, NetworkParams};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geometry(p: usize, radius: f64) -> GeometrySpec {
        // anchor at the origin of a width-p, depth-1, input-1 network whose
        // flat parameter count is ... easier: build directly on a zero anchor
        let cfg = NetworkConfig::new(1, p / 2, 1).unwrap();
        assert_eq!(cfg.param_count(), p);
        let params = NetworkParams::zeros(cfg).unwrap();
        GeometrySpec::new(&params, radius).unwrap()
    }

    fn random_state(p: usize, rng: &mut ChaCha8Rng, updates: usize) -> Preconditioner {
        let mut s = Preconditioner::new(p, 0.7, 0.9).unwrap();
        for _ in 0..updates {
            let jac = DMatrix::from_fn(2, p, |_, _| rng.random_range(-1.0..1.0));
            s.accumulate_batch(&jac).unwrap();
        }
        s
    }

    #[test]
    fn feasible_point_is_unchanged() {
        let p = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let state = random_state(p, &mut rng, 5);
        let geom = geometry(p, 2.0);
        let u = DVector::from_fn(p, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let res = project(&u, &state, &geom).unwrap();
        assert!(!res.active);
        assert_eq!(res.multiplier, 0.0);
        assert_eq!(res.point, u);
        assert_eq!(res.kkt_residual, 0.0);
    }

    #[test]
    fn identity_metric_reduces_to_euclidean_projection() {
        let p = 10;
        let state = Preconditioner::new(p, 1.0, 1.0).unwrap();
        let geom = geometry(p, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let res = project(&u, &state, &geom).unwrap();
        let expected = &u * (0.5 / u.norm());
        assert!((res.point - expected).norm() <= 1e-9);
        assert!(res.active);
    }

    #[test]
    fn zero_radius_returns_anchor() {
        let p = 8;
        let state = Preconditioner::new(p, 1.0, 1.0).unwrap();
        let geom = geometry(p, 0.0);
        let u = DVector::from_element(p, 3.0);
        let res = project(&u, &state, &geom).unwrap();
        assert_eq!(&res.point, geom.anchor());
        assert!(res.active);
    }

    #[test]
    fn kkt_feasibility_and_idempotence() {
        let p = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geom = geometry(p, 0.8);
        for _ in 0..20 {
            let state = random_state(p, &mut rng, 6);
            let u = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
            let res = project(&u, &state, &geom).unwrap();
            assert!((res.point.clone() - geom.anchor()).norm() <= geom.radius() + 1e-9);
            assert!(res.kkt_residual <= 1e-7, "kkt residual {}", res.kkt_residual);
            let again = project(&res.point, &state, &geom).unwrap();
            assert!((again.point - &res.point).norm() <= 1e-9);
        }
    }

    #[test]
    fn projection_is_h_optimal_against_feasible_points() {
        let p = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let geom = geometry(p, 1.0);
        let state = random_state(p, &mut rng, 8);
        let u = DVector::from_fn(p, |_, _| rng.random_range(-3.0..3.0));
        let res = project(&u, &state, &geom).unwrap();
        let d_star = h_norm(state.dense(), &(&res.point - &u));
        for _ in 0..200 {
            let mut w = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
            let norm = w.norm();
            if norm > geom.radius() {
                w *= geom.radius() / norm * rng.random_range(0.0..1.0);
            }
            let d = h_norm(state.dense(), &(&w - &u));
            assert!(d_star <= d + 1e-9);
        }
    }

    #[test]
    fn non_spd_metric_is_rejected() {
        let p = 4;
        let geom = geometry(p, 0.1);
        let mut h = DMatrix::identity(p, p);
        h[(0, 0)] = -1.0;
        let u = DVector::from_element(p, 5.0);
        assert!(matches!(
            project_dense(&u, &h, &geom),
            Err(SgnError::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn h_norm_non_expansive_sampled() {
        let p = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let geom = geometry(p, 0.6);
        let state = random_state(p, &mut rng, 5);
        for _ in 0..100 {
            let u = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
            let v = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
            let pu = project(&u, &state, &geom).unwrap().point;
            let pv = project(&v, &state, &geom).unwrap().point;
            let lhs = h_norm(state.dense(), &(pu - pv));
            let rhs = h_norm(state.dense(), &(u - v));
            assert!(lhs <= rhs * (1.0 + 1e-9), "{lhs} > {rhs}");
        }
    }
}
