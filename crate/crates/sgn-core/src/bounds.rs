//! Closed-form calculators for the convergence and stability bounds, plus
//! the measured constants they consume (Lipschitz geometry, mu0, PE fits).
//!
//! Every calculator evaluates a published formula verbatim from run
//! constants so harnesses can assert `measurement <= bound`. The stability
//! bound hides an absolute constant; its calculator therefore returns the
//! constant-free structural terms, and callers compare growth exponents and
//! orderings rather than absolute values.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::activation::Activation;
use crate::error::{Result, SgnError};
use crate::loss::{Dataset, Loss};
use crate::network::{value_and_gradient, GeometrySpec, NetworkParams};
use crate::optimizer::Hyperparams;

/// The three Lipschitz constants attached to the geometry: predictor,
/// predictor gradient, and loss.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LipschitzBounds {
    /// `sigma0 + zeta_C (sigma0 sigma1 / sqrt(m)) sqrt(H) (sigma1 kappa_C)^{H-1}`
    pub lip_phi: f64,
    /// `8 (sigma2 sigma0 + sigma1^2 zeta_C) [t + t^2]` with
    /// `t = H kappa_C^{H-1} / sqrt(m)`; note the base is kappa_C, without a
    /// sigma1 factor, exactly as the printed bound has it.
    pub lip_grad_phi: f64,
    /// `beta_K` with K the prediction bound over the trust ball.
    pub lip_loss: f64,
}

/// Bound on |phi(x; w)| over w in C and ||x|| <= 1: zeta_C * sigma0.
pub fn prediction_bound(act: Activation, geom: &GeometrySpec) -> f64 {
    geom.zeta_c() * act.sigma0()
}

pub fn lipschitz_bounds(act: Activation, loss: Loss, geom: &GeometrySpec) -> LipschitzBounds {
    let cfg = geom.config();
    lipschitz_bounds_from_constants(
        act,
        loss,
        cfg.depth,
        cfg.width,
        geom.kappa_c(),
        geom.zeta_c(),
    )
}

/// The same constants evaluated from raw geometry numbers instead of a
/// measured anchor.
pub fn lipschitz_bounds_from_constants(
    act: Activation,
    loss: Loss,
    depth: usize,
    width: usize,
    kappa_c: f64,
    zeta_c: f64,
) -> LipschitzBounds {
    let m = width as f64;
    let h = depth as f64;
    let s0 = act.sigma0();
    let s1 = act.sigma1();
    let s2 = act.sigma2();

    let lip_phi = s0 + zeta_c * (s0 * s1 / m.sqrt()) * h.sqrt() * (s1 * kappa_c).powi(depth as i32 - 1);
    let t = h * kappa_c.powi(depth as i32 - 1) / m.sqrt();
    let lip_grad_phi = 8.0 * (s2 * s0 + s1 * s1 * zeta_c) * (t + t * t);
    let lip_loss = loss.lip_on_interval(zeta_c * s0);
    LipschitzBounds {
        lip_phi,
        lip_grad_phi,
        lip_loss,
    }
}

/// The finite-time ceiling on the running-average optimality gap after k
/// iterations, and its Polyak-average variant
/// `4 kappa + 2 r_C^4 Lip_{grad phi}^2`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OptimalityGapBound {
    pub kappa: f64,
    pub polyak: f64,
}

/// The gap ceiling evaluated with a measured log-det ratio standing in for
/// the expectation:
///
/// ```text
/// kappa = [Lip_phi^2 r^2 (gamma+2)/xi + xi Lip_loss^2 (logdet + 1/(gamma+1))] / k
///         + r^4 Lip_gp^2 / xi + Lip_loss r^2 Lip_gp
/// ```
pub fn optimality_gap_bound(
    hyper: &Hyperparams,
    lip: &LipschitzBounds,
    radius: f64,
    logdet_ratio: f64,
    k: usize,
) -> Result<OptimalityGapBound> {
    if k == 0 {
        return Err(SgnError::InvalidParameter(
            "the optimality-gap bound needs k >= 1".into(),
        ));
    }
    let gamma = hyper.gamma(lip.lip_phi);
    let xi = hyper.xi();
    let r2 = radius * radius;
    let transient = (lip.lip_phi * lip.lip_phi * r2 * (gamma + 2.0) / xi
        + xi * lip.lip_loss * lip.lip_loss * (logdet_ratio + 1.0 / (gamma + 1.0)))
        / k as f64;
    let floor = r2 * r2 * lip.lip_grad_phi * lip.lip_grad_phi / xi
        + lip.lip_loss * r2 * lip.lip_grad_phi;
    let kappa = transient + floor;
    Ok(OptimalityGapBound {
        kappa,
        polyak: 4.0 * kappa + 2.0 * r2 * r2 * lip.lip_grad_phi * lip.lip_grad_phi,
    })
}

/// Almost-sure and rank-aware ceilings on log det(H_k)/det(H_0).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogdetGrowthBounds {
    /// `p log(1 + (alpha/lambda)(k+1) sqrt(B) Lip_phi)`, holds pathwise.
    pub worst_case: f64,
    /// `r_bar (log(k+1) + 1/gamma + Lip_phi^2 / r_bar)` for an intrinsic
    /// rank estimate r_bar.
    pub rank_aware: f64,
}

pub fn logdet_growth_bounds(
    hyper: &Hyperparams,
    lip: &LipschitzBounds,
    param_count: usize,
    k: usize,
    r_bar: f64,
) -> LogdetGrowthBounds {
    let b = hyper.batch as f64;
    let worst_case = param_count as f64
        * (1.0 + hyper.alpha / hyper.lambda * (k as f64 + 1.0) * b.sqrt() * lip.lip_phi).ln();
    let gamma = hyper.gamma(lip.lip_phi);
    let rank_aware = if r_bar > 0.0 {
        r_bar * ((k as f64 + 1.0).ln() + 1.0 / gamma + lip.lip_phi * lip.lip_phi / r_bar)
    } else {
        0.0
    };
    LogdetGrowthBounds {
        worst_case,
        rank_aware,
    }
}

/// Constants of the stability analysis. The curvature cap Lambda has two
/// published conventions, `B Lip_phi^2 + epsilon` and the larger
/// co-coercivity form `2 epsilon + B Lip_phi^2`; both are kept, and the
/// larger one feeds every downstream check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StabilityConstants {
    /// epsilon = B Lip_loss Lip_{grad phi}.
    pub epsilon: f64,
    /// B Lip_phi^2 + epsilon.
    pub lambda_cap_theorem: f64,
    /// 2 epsilon + B Lip_phi^2 (the value used for the hypothesis checks).
    pub lambda_cap: f64,
    /// Measured singular-value floor of the full Jacobian over C.
    pub mu0: f64,
    /// Strong-convexity modulus of the loss.
    pub nu: f64,
    /// M = max{2/nu, 8(Lambda + epsilon)/(nu^2 mu0^2)}.
    pub big_m: f64,
}

pub fn stability_constants(
    batch: usize,
    lip: &LipschitzBounds,
    nu: f64,
    mu0: f64,
) -> StabilityConstants {
    let b = batch as f64;
    let epsilon = b * lip.lip_loss * lip.lip_grad_phi;
    let lambda_cap_theorem = b * lip.lip_phi * lip.lip_phi + epsilon;
    let lambda_cap = 2.0 * epsilon + b * lip.lip_phi * lip.lip_phi;
    let big_m = (2.0 / nu).max(8.0 * (lambda_cap + epsilon) / (nu * nu * mu0 * mu0));
    StabilityConstants {
        epsilon,
        lambda_cap_theorem,
        lambda_cap,
        mu0,
        nu,
        big_m,
    }
}

/// Outcome of the step-size/damping hypothesis check
/// `eta/lambda <= 1/Lambda` and `alpha/eta <= mu0^2 nu^2 / (8 B (Lambda + epsilon))`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HyperparamsCheck {
    pub eta_condition: bool,
    pub alpha_condition: bool,
    pub met: bool,
}

pub fn hyperparams_check(hyper: &Hyperparams, sc: &StabilityConstants) -> HyperparamsCheck {
    let eta_condition = hyper.eta / hyper.lambda <= 1.0 / sc.lambda_cap;
    let alpha_condition = hyper.alpha / hyper.eta
        <= sc.mu0 * sc.mu0 * sc.nu * sc.nu
            / (8.0 * hyper.batch as f64 * (sc.lambda_cap + sc.epsilon));
    HyperparamsCheck {
        eta_condition,
        alpha_condition,
        met: eta_condition && alpha_condition,
    }
}

/// Structural terms of the stability bound, without the hidden absolute
/// constant:
///
/// ```text
/// k sqrt(eta B Lip_gp) + k sqrt(alpha) B^{3/2} Lip_gp
///   + alpha B^2 (Lip_gp + 1/n) sum_t (t+1)/sqrt(lambda_t)
///   + (eta B / n) sum_t 1/sqrt(lambda_t)
/// ```
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StabilityGrowthBound {
    pub non_expansivity: f64,
    pub preconditioner_mismatch: f64,
    pub gradient_mismatch: f64,
    pub total: f64,
    /// False when the step-size/damping hypotheses are unmet; the terms are
    /// still reported.
    pub hypotheses_met: bool,
}

pub fn stability_growth_bound(
    hyper: &Hyperparams,
    sc: &StabilityConstants,
    lip: &LipschitzBounds,
    n: usize,
    lambda_t: &[f64],
    k: usize,
) -> Result<StabilityGrowthBound> {
    if lambda_t.is_empty() {
        return Err(SgnError::InvalidParameter(
            "the stability bound needs a nonempty lambda_t sequence".into(),
        ));
    }
    if lambda_t.len() < k {
        return Err(SgnError::DimensionMismatch(format!(
            "need lambda_t for t < {k}, got {} entries",
            lambda_t.len()
        )));
    }
    for (t, &l) in lambda_t.iter().take(k).enumerate() {
        if !(l > 0.0) {
            return Err(SgnError::InvalidParameter(format!(
                "lambda_{t} = {l} must be positive"
            )));
        }
    }
    let b = hyper.batch as f64;
    let kf = k as f64;
    let non_expansivity = kf * (hyper.eta * b * lip.lip_grad_phi).sqrt()
        + kf * hyper.alpha.sqrt() * b.powf(1.5) * lip.lip_grad_phi;
    let weighted: f64 = lambda_t
        .iter()
        .take(k)
        .enumerate()
        .map(|(t, &l)| (t as f64 + 1.0) / l.sqrt())
        .sum();
    let plain: f64 = lambda_t.iter().take(k).map(|&l| 1.0 / l.sqrt()).sum();
    let preconditioner_mismatch =
        hyper.alpha * b * b * (lip.lip_grad_phi + 1.0 / n as f64) * weighted;
    let gradient_mismatch = hyper.eta * b / n as f64 * plain;
    Ok(StabilityGrowthBound {
        non_expansivity,
        preconditioner_mismatch,
        gradient_mismatch,
        total: non_expansivity + preconditioner_mismatch + gradient_mismatch,
        hypotheses_met: hyperparams_check(hyper, sc).met,
    })
}

/// Expected spectral distance of the paired preconditioners after k
/// iterations:
/// `2 B alpha (k+1) r_C Lip_phi Lip_gp + alpha Lip_phi^2 (k+1) B / n`.
pub fn preconditioner_drift_bound(
    alpha: f64,
    batch: usize,
    k: usize,
    n: usize,
    radius: f64,
    lip: &LipschitzBounds,
) -> f64 {
    let b = batch as f64;
    let kp1 = k as f64 + 1.0;
    2.0 * b * alpha * kp1 * radius * lip.lip_phi * lip.lip_grad_phi
        + alpha * lip.lip_phi * lip.lip_phi * kp1 * b / n as f64
}

/// Power-law fit of the persistence-of-excitation condition
/// `lambda_min(S_t) >= C B (t+1)^q`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PeFit {
    pub c: f64,
    pub q: f64,
    /// Root-mean-square residual of the log-log least squares fit.
    pub residual: f64,
}

/// Least-squares fit of `log(lambda_min(S_t)/B)` against `log(t+1)` over
/// t > burn_in. The input is the lambda_min(S_t) trajectory indexed by t.
pub fn pe_fit(lambda_min_gram: &[f64], batch: usize, burn_in: usize) -> Result<PeFit> {
    if lambda_min_gram.len() <= burn_in + 10 {
        return Err(SgnError::InvalidParameter(format!(
            "need more than burn_in + 10 = {} trajectory entries, got {}",
            burn_in + 10,
            lambda_min_gram.len()
        )));
    }
    let b = batch as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, &l) in lambda_min_gram.iter().enumerate() {
        if t <= burn_in {
            continue;
        }
        if !(l > 0.0) {
            return Err(SgnError::InvalidParameter(format!(
                "lambda_min(S_{t}) = {l} must be positive in the fit window"
            )));
        }
        xs.push((t as f64 + 1.0).ln());
        ys.push((l / b).ln());
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    if sxx == 0.0 {
        return Err(SgnError::InvalidParameter(
            "degenerate fit window: no spread in log(t+1)".into(),
        ));
    }
    let q = sxy / sxx;
    let intercept = mean_y - q * mean_x;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + q * x);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PeFit {
        c: intercept.exp(),
        q,
        residual,
    })
}

/// rho_nu = ||(v_c_bar, v_w_bar)||_2, the trust radius of the realizable
/// teacher construction.
pub fn teacher_radius(v_c_bar: f64, v_w_bar: f64) -> f64 {
    v_c_bar.hypot(v_w_bar)
}

/// Measured singular-value floor: the minimum over a probe set (the anchor
/// plus `probes` uniform points of C) of sigma_min of the full n x p
/// Jacobian, computed as sqrt(lambda_min(J J^T)). A sampled estimate of the
/// true infimum over C.
pub fn measure_mu0(
    anchor: &NetworkParams,
    geom: &GeometrySpec,
    data: &Dataset,
    act: Activation,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    let cfg = geom.config();
    let p = cfg.param_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu0 = f64::INFINITY;
    let mut eval_at = |params: &NetworkParams| -> Result<()> {
        let n = data.len();
        let mut jac = nalgebra::DMatrix::zeros(n, p);
        for (row, x) in data.inputs().iter().enumerate() {
            let (_, g) = value_and_gradient(params, act, x)?;
            jac.row_mut(row).copy_from(&g.transpose());
        }
        let kernel = &jac * jac.transpose();
        let eigs = kernel.symmetric_eigen().eigenvalues;
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        mu0 = mu0.min(min.max(0.0).sqrt());
        Ok(())
    };
    eval_at(anchor)?;
    for _ in 0..probes {
        let mut dir = DVector::from_fn(p, |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g
        });
        let norm = dir.norm().max(1e-12);
        let radius_frac: f64 = rng.random_range(0.0_f64..1.0);
        dir *= geom.radius() * radius_frac / norm;
        let w = geom.anchor() + dir;
        let params = NetworkParams::from_flat(cfg, &w)?;
        eval_at(&params)?;
    }
    Ok(mu0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::square_loss;
    use crate::network::NetworkConfig;
    use crate::optimizer::symmetric_init;

    fn toy_geom(m: usize, d: usize, radius: f64) -> GeometrySpec {
        let cfg = NetworkConfig::new(1, m, d).unwrap();
        let init = symmetric_init(&cfg, 1).unwrap();
        GeometrySpec::new(&init, radius).unwrap()
    }

    fn toy_hyper() -> Hyperparams {
        Hyperparams {
            eta: 1.0,
            alpha: 0.5,
            lambda: 1.0,
            batch: 8,
            radius: 1.0,
            k_max: 100,
        }
    }

    #[test]
    fn lip_phi_hand_computation_shallow_tanh() {
        // H = 1: lip_phi = sigma0 + zeta_C sigma0 sigma1 / sqrt(m)
        let geom = toy_geom(16, 2, 1.0);
        let lip = lipschitz_bounds(Activation::Tanh, square_loss(), &geom);
        let expected = 1.0 + geom.zeta_c() * 2.0 / 4.0;
        assert!((lip.lip_phi - expected).abs() < 1e-12);
        // H = 1: t = 1/sqrt(m)
        let t = 0.25;
        let expected_grad = 8.0 * (2.0 + 4.0 * geom.zeta_c()) * (t + t * t);
        assert!((lip.lip_grad_phi - expected_grad).abs() < 1e-10);
        assert!((lip.lip_loss - (1.0 + geom.zeta_c())).abs() < 1e-12);
    }

    #[test]
    fn lip_grad_phi_shrinks_with_width_at_fixed_geometry() {
        // doubling m at fixed H, kappa_C, zeta_C reduces the formula value
        let base = toy_geom(16, 2, 1.0);
        let kappa_c = base.kappa_c();
        let zeta_c = base.zeta_c();
        let act = Activation::Tanh;
        let value = |m: f64| {
            let t = 2.0 * kappa_c.powi(1) / m.sqrt();
            8.0 * (act.sigma2() * act.sigma0() + act.sigma1() * act.sigma1() * zeta_c)
                * (t + t * t)
        };
        let mut prev = f64::INFINITY;
        for m in [16.0, 32.0, 64.0, 128.0, 256.0] {
            let v = value(m);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn gap_bound_gamma_scaling_is_exact() {
        // doubling gamma at fixed xi, k, logdet scales the first additive
        // term by (2 gamma + 2)/(gamma + 2)
        let geom = toy_geom(8, 2, 1.0);
        let lip = lipschitz_bounds(Activation::Tanh, square_loss(), &geom);
        let hyper = toy_hyper();
        let mut doubled = hyper;
        doubled.lambda *= 2.0; // gamma is proportional to lambda
        let k = 50;
        let logdet = 3.0;
        let gamma = hyper.gamma(lip.lip_phi);
        let b1 = optimality_gap_bound(&hyper, &lip, 1.0, logdet, k).unwrap();
        let b2 = optimality_gap_bound(&doubled, &lip, 1.0, logdet, k).unwrap();
        let term = |g: f64| lip.lip_phi * lip.lip_phi * (g + 2.0) / hyper.xi() / k as f64;
        let second_and_rest = b1.kappa - term(gamma);
        let expected = term(2.0 * gamma) + second_and_rest
            + hyper.xi() * lip.lip_loss * lip.lip_loss / k as f64
                * (1.0 / (2.0 * gamma + 1.0) - 1.0 / (gamma + 1.0));
        assert!((b2.kappa - expected).abs() <= 1e-9 * expected.abs());
    }

    #[test]
    fn gap_bound_asymptotic_floor() {
        // with logdet growing like r log k, kappa tends to the k-free floor
        let geom = toy_geom(8, 2, 1.0);
        let lip = lipschitz_bounds(Activation::Tanh, square_loss(), &geom);
        let hyper = toy_hyper();
        let k = 1_000_000_000usize;
        let logdet = 5.0 * (k as f64).ln();
        let bound = optimality_gap_bound(&hyper, &lip, 1.0, logdet, k).unwrap();
        let floor = lip.lip_grad_phi * lip.lip_grad_phi / hyper.xi()
            + lip.lip_loss * lip.lip_grad_phi;
        assert!(
            (bound.kappa - floor).abs() / floor <= 0.01,
            "kappa {} vs floor {floor}",
            bound.kappa
        );
        assert!(optimality_gap_bound(&hyper, &lip, 1.0, 0.0, 0).is_err());
    }

    #[test]
    fn logdet_worst_case_log2_example() {
        // argument of the log equal to 1 gives p log 2 at k = 0
        let geom = toy_geom(8, 2, 1.0);
        let mut lip = lipschitz_bounds(Activation::Tanh, square_loss(), &geom);
        lip.lip_phi = 2.0;
        let mut hyper = toy_hyper();
        hyper.batch = 4; // sqrt(B) Lip_phi = 4
        hyper.alpha = 0.25;
        hyper.lambda = 1.0; // (alpha/lambda)(k+1) sqrt(B) lip = 1 at k=0
        let b = logdet_growth_bounds(&hyper, &lip, 10, 0, 5.0);
        assert!((b.worst_case - 10.0 * 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn stability_constants_and_m() {
        let lip = LipschitzBounds {
            lip_phi: 2.0,
            lip_grad_phi: 0.5,
            lip_loss: 3.0,
        };
        let sc = stability_constants(4, &lip, 1.0, 0.1);
        assert_eq!(sc.epsilon, 4.0 * 3.0 * 0.5);
        assert_eq!(sc.lambda_cap_theorem, 16.0 + 6.0);
        assert_eq!(sc.lambda_cap, 12.0 + 16.0);
        assert!(sc.lambda_cap >= sc.lambda_cap_theorem);
        assert!(sc.big_m >= 2.0 / sc.nu);
    }

    #[test]
    fn stability_bound_constant_lambda_collapses_to_arithmetic_series() {
        let geom = toy_geom(8, 2, 1.0);
        let lip = lipschitz_bounds(Activation::Tanh, square_loss(), &geom);
        let hyper = toy_hyper();
        let sc = stability_constants(hyper.batch, &lip, 1.0, 0.5);
        let k = 20;
        let lambda_t = vec![hyper.lambda; k];
        let b = stability_growth_bound(&hyper, &sc, &lip, 64, &lambda_t, k).unwrap();
        let bf = hyper.batch as f64;
        // sum (t+1) = k(k+1)/2
        let expected_mismatch = hyper.alpha
            * bf
            * bf
            * (lip.lip_grad_phi + 1.0 / 64.0)
            * (k as f64 * (k as f64 + 1.0) / 2.0)
            / hyper.lambda.sqrt();
        assert!((b.preconditioner_mismatch - expected_mismatch).abs() < 1e-9);
        let expected_grad = hyper.eta * bf / 64.0 * k as f64 / hyper.lambda.sqrt();
        assert!((b.gradient_mismatch - expected_grad).abs() < 1e-12);
        assert!(stability_growth_bound(&hyper, &sc, &lip, 64, &[], 0).is_err());

        // n -> infinity kills the gradient-mismatch term
        let big_n = stability_growth_bound(&hyper, &sc, &lip, usize::MAX, &lambda_t, k).unwrap();
        assert!(big_n.gradient_mismatch < 1e-12);
    }

    #[test]
    fn pe_fit_exact_power_law() {
        let b = 8usize;
        let traj: Vec<f64> = (0..100).map(|t| 2.0 * b as f64 * (t as f64 + 1.0)).collect();
        let fit = pe_fit(&traj, b, 5).unwrap();
        assert!((fit.c - 2.0).abs() <= 1e-6, "c = {}", fit.c);
        assert!((fit.q - 1.0).abs() <= 1e-6, "q = {}", fit.q);
        assert!(fit.residual <= 1e-10);

        // constant trajectory: q = 0
        let flat: Vec<f64> = vec![5.0; 60];
        let fit = pe_fit(&flat, b, 3).unwrap();
        assert!(fit.q.abs() <= 1e-12);

        assert!(pe_fit(&traj[..10], b, 5).is_err());
        let mut bad = traj.clone();
        bad[50] = 0.0;
        assert!(pe_fit(&bad, b, 5).is_err());
    }

    #[test]
    fn teacher_radius_examples() {
        assert_eq!(teacher_radius(3.0, 4.0), 5.0);
        assert_eq!(teacher_radius(0.0, 0.0), 0.0);
    }

    #[test]
    fn preconditioner_drift_bound_formula() {
        let lip = LipschitzBounds {
            lip_phi: 2.0,
            lip_grad_phi: 0.5,
            lip_loss: 1.0,
        };
        let v = preconditioner_drift_bound(0.1, 4, 9, 32, 1.5, &lip);
        let expected = 2.0 * 4.0 * 0.1 * 10.0 * 1.5 * 2.0 * 0.5 + 0.1 * 4.0 * 10.0 * 4.0 / 32.0;
        assert!((v - expected).abs() < 1e-12);
    }
}
