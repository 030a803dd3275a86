//! Shared helpers for the integration and acceptance suites: independent
//! reference implementations (projected SGD, finite-difference curvature,
//! projected-gradient projection) that deliberately avoid the library code
//! paths they are used to check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sgn_core::activation::Activation;
use sgn_core::loss::{Dataset, Loss};
use sgn_core::network::{
    per_sample_gradient, value_and_gradient, GeometrySpec, NetworkConfig, NetworkParams,
};
use sgn_core::sampler::SamplerSequence;

pub fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform point of the ball B(w0, r) in R^p.
pub fn sample_in_ball(w0: &DVector<f64>, radius: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let p = w0.len();
    let mut dir = DVector::from_fn(p, |_, _| std_normal(rng));
    let norm = dir.norm().max(1e-300);
    let frac: f64 = rng.random_range(0.0_f64..1.0);
    dir *= radius * frac.powf(1.0 / p as f64) / norm;
    w0 + dir
}

/// Uniform input of the unit ball in R^d.
pub fn sample_unit_input(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let x = DVector::from_fn(d, |_, _| std_normal(rng));
    let norm = x.norm().max(1e-300);
    let frac: f64 = rng.random_range(0.0_f64..1.0);
    x * (frac.powf(1.0 / d as f64) / norm)
}

/// Spectral norm of the parameter Hessian of the prediction at (w, x),
/// estimated by power iteration on central finite differences of the
/// analytic gradient.
pub fn fd_hessian_spectral_norm(
    params: &NetworkParams,
    act: Activation,
    x: &DVector<f64>,
    step: f64,
    iters: usize,
) -> f64 {
    let cfg = params.config();
    let flat = params.flatten();
    let p = flat.len();
    let apply = |v: &DVector<f64>| -> DVector<f64> {
        let norm = v.norm();
        if norm == 0.0 {
            return DVector::zeros(p);
        }
        let plus = NetworkParams::from_flat(cfg, &(&flat + step * v / norm)).unwrap();
        let minus = NetworkParams::from_flat(cfg, &(&flat - step * v / norm)).unwrap();
        let gp = per_sample_gradient(&plus, act, x).unwrap();
        let gm = per_sample_gradient(&minus, act, x).unwrap();
        (gp - gm) * (norm / (2.0 * step))
    };
    let est = sgn_core::linalg::sym_extreme_eig(apply, p, None, 1e-7, iters);
    est.value.abs()
}

/// Reference projected SGD with Euclidean ball projection:
/// `w <- proj(w - step * sum_{j in I_k} l'_j grad_j)`. Returns the iterate
/// trajectory including the start point.
#[allow(clippy::too_many_arguments)]
pub fn reference_projected_sgd(
    init: &NetworkParams,
    data: &Dataset,
    act: Activation,
    loss: Loss,
    step: f64,
    radius: f64,
    sampler_seed: u64,
    batch: usize,
    steps: usize,
) -> Vec<DVector<f64>> {
    let cfg = init.config();
    let w0 = init.flatten();
    let sampler = SamplerSequence::new(sampler_seed, data.len(), batch).unwrap();
    let mut w = w0.clone();
    let mut out = vec![w.clone()];
    for k in 0..steps {
        let params = NetworkParams::from_flat(cfg, &w).unwrap();
        let mut update = DVector::zeros(w.len());
        for j in sampler.indices(k) {
            let (pred, g) = value_and_gradient(&params, act, data.x(j)).unwrap();
            update += g * loss.grad(pred, data.y(j));
        }
        w -= step * update;
        let dist = (&w - &w0).norm();
        if dist > radius {
            w = &w0 + (&w - &w0) * (radius / dist);
        }
        out.push(w.clone());
    }
    out
}

/// Projected-gradient reference for the metric projection: minimizes
/// (w-u)^T H (w-u) over the ball B(w0, r) by plain projected gradient
/// descent with step 1/lambda_max(H).
pub fn projected_gradient_projection(
    u: &DVector<f64>,
    h: &DMatrix<f64>,
    w0: &DVector<f64>,
    radius: f64,
    iterations: usize,
) -> DVector<f64> {
    let eigs = h.clone().symmetric_eigen().eigenvalues;
    let lmax = eigs.iter().cloned().fold(0.0_f64, f64::max);
    let step = 1.0 / lmax;
    let mut w = w0.clone();
    for _ in 0..iterations {
        let grad = h * (&w - u);
        w -= step * grad;
        let dist = (&w - w0).norm();
        if dist > radius {
            w = w0 + (&w - w0) * (radius / dist);
        }
    }
    w
}

/// Fresh network with standard normal weights.
pub fn random_network(cfg: NetworkConfig, seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    NetworkParams::random_normal(cfg, &mut rng).unwrap()
}

/// Random parameters inside the trust ball of a geometry.
pub fn random_params_in_ball(
    geom: &GeometrySpec,
    rng: &mut ChaCha8Rng,
) -> NetworkParams {
    let w = sample_in_ball(geom.anchor(), geom.radius(), rng);
    NetworkParams::from_flat(geom.config(), &w).unwrap()
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope_xy(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}
