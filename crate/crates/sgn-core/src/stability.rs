//! Paired-trajectory stability experiments: two trainers on datasets that
//! differ in exactly one sample, coupled through an identical subsampling
//! stream, with the parameter gap measured in the midpoint metric
//! `Hbar_k = (H_k + H'_k)/2`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::activation::Activation;
use crate::bounds::LipschitzBounds;
use crate::error::{Result, SgnError};
use crate::linalg;
use crate::loss::{empirical_risk, Dataset, Loss};
use crate::network::{forward, GeometrySpec, NetworkParams};
use crate::optimizer::{Hyperparams, TrainOptions, Trainer};

/// Two datasets at Hamming distance one plus the shared subsampling seed.
#[derive(Clone, Debug)]
pub struct StabilityPair {
    pub data: Dataset,
    pub data_prime: Dataset,
    pub j_star: usize,
    pub sampler_seed: u64,
}

/// Build the neighboring dataset by replacing sample `j_star`. The
/// replacement must actually differ; a Hamming distance of zero is rejected.
pub fn make_neighbor(
    data: &Dataset,
    j_star: usize,
    x_new: DVector<f64>,
    y_new: f64,
    sampler_seed: u64,
) -> Result<StabilityPair> {
    if j_star >= data.len() {
        return Err(SgnError::InvalidParameter(format!(
            "j_star = {j_star} out of range for n = {}",
            data.len()
        )));
    }
    if data.x(j_star) == &x_new && data.y(j_star) == y_new {
        return Err(SgnError::InvalidParameter(
            "replacement sample equals the original; the pair would have Hamming distance 0"
                .into(),
        ));
    }
    let data_prime = data.with_replaced(j_star, x_new, y_new)?;
    Ok(StabilityPair {
        data: data.clone(),
        data_prime,
        j_star,
        sampler_seed,
    })
}

/// Per-iteration log of one coupled run. Row k >= 1 describes the state
/// after k steps: Delta_k under the metric Hbar_{k-1} that drove step k-1,
/// and the indicator of whether j_star was in the batch of that step.
#[derive(Clone, Debug)]
pub struct StabilityRow {
    pub iteration: usize,
    pub delta_l2: f64,
    pub delta_hbar: f64,
    pub h_diff_norm: f64,
    pub jstar_hit: bool,
    pub indices: Vec<usize>,
    pub risk_a: f64,
    pub risk_b: f64,
    pub minibatch_a: Option<f64>,
    pub minibatch_b: Option<f64>,
    pub grad_norm_a: Option<f64>,
    pub grad_norm_b: Option<f64>,
    pub proj_a: bool,
    pub proj_b: bool,
    pub logdet_a: f64,
    pub logdet_b: f64,
    pub lambda_min_a: f64,
    pub lambda_min_b: f64,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug)]
pub struct StabilityLog {
    pub rows: Vec<StabilityRow>,
    pub polyak_a: DVector<f64>,
    pub polyak_b: DVector<f64>,
    pub final_a: DVector<f64>,
    pub final_b: DVector<f64>,
}

impl StabilityLog {
    /// `(1/k) sum_{t=1..k} ||Delta_t||_{Hbar_{t-1}}` over the executed steps.
    pub fn mean_delta_hbar(&self) -> f64 {
        let k = self.rows.len() - 1;
        if k == 0 {
            return 0.0;
        }
        self.rows[1..].iter().map(|r| r.delta_hbar).sum::<f64>() / k as f64
    }

    pub fn final_delta_hbar(&self) -> f64 {
        self.rows.last().map(|r| r.delta_hbar).unwrap_or(0.0)
    }
}

/// Step both trainers of the pair in lockstep for `hyper.k_max` iterations.
#[allow(clippy::too_many_arguments)]
pub fn run_pair(
    pair: &StabilityPair,
    act: Activation,
    loss: Loss,
    hyper: Hyperparams,
    init: &NetworkParams,
    radius: f64,
    opts: TrainOptions,
) -> Result<StabilityLog> {
    let geom = GeometrySpec::new(init, radius)?;
    let mut a = Trainer::new(
        act,
        loss,
        hyper,
        geom.clone(),
        pair.data.clone(),
        pair.sampler_seed,
        init,
        opts.clone(),
    )?;
    let mut b = Trainer::new(
        act,
        loss,
        hyper,
        geom,
        pair.data_prime.clone(),
        pair.sampler_seed,
        init,
        opts.clone(),
    )?;

    let p = init.config().param_count();
    let mut h_diff_warm = linalg::power_iteration_start(p);
    let mut eig_warm_a = linalg::power_iteration_start(p);
    let mut eig_warm_b = linalg::power_iteration_start(p);
    let mut lambda_min_a = hyper.lambda;
    let mut lambda_min_b = hyper.lambda;

    let mut rows = Vec::with_capacity(hyper.k_max + 1);
    rows.push(StabilityRow {
        iteration: 0,
        delta_l2: 0.0,
        delta_hbar: 0.0,
        h_diff_norm: 0.0,
        jstar_hit: false,
        indices: Vec::new(),
        risk_a: a.current_risk()?,
        risk_b: b.current_risk()?,
        minibatch_a: None,
        minibatch_b: None,
        grad_norm_a: None,
        grad_norm_b: None,
        proj_a: false,
        proj_b: false,
        logdet_a: 0.0,
        logdet_b: 0.0,
        lambda_min_a,
        lambda_min_b,
        wall_time_ms: 0.0,
    });

    for k in 0..hyper.k_max {
        let start = std::time::Instant::now();
        let info_a = a.step()?;
        let info_b = b.step()?;
        debug_assert_eq!(info_a.indices, info_b.indices);

        let delta = a.w() - b.w();
        let delta_l2 = delta.norm();
        let ha_d = a.precond().dense() * &delta;
        let hb_d = b.precond().dense() * &delta;
        let delta_hbar = (0.5 * (delta.dot(&ha_d) + delta.dot(&hb_d))).max(0.0).sqrt();
        // warm-started and iteration-capped: while the preconditioners have
        // barely separated the difference matrix is noise-scale and the
        // Rayleigh quotient cannot converge in relative terms; a capped
        // estimate is plenty for telemetry
        let h_diff = linalg::sym_diff_spectral_norm(
            a.precond().dense(),
            b.precond().dense(),
            Some(&h_diff_warm),
            1e-5,
            40,
        );
        h_diff_warm = h_diff.vector.clone();

        if (k + 1) % opts.lambda_min_stride == 0 || k + 1 == hyper.k_max {
            lambda_min_a = a.precond().min_eigenvalue_warm(&mut eig_warm_a).value;
            lambda_min_b = b.precond().min_eigenvalue_warm(&mut eig_warm_b).value;
        }

        rows.push(StabilityRow {
            iteration: k + 1,
            delta_l2,
            delta_hbar,
            h_diff_norm: h_diff.value,
            jstar_hit: info_a.indices.contains(&pair.j_star),
            indices: info_a.indices,
            risk_a: a.current_risk()?,
            risk_b: b.current_risk()?,
            minibatch_a: Some(info_a.minibatch_loss),
            minibatch_b: Some(info_b.minibatch_loss),
            grad_norm_a: Some(info_a.grad_norm),
            grad_norm_b: Some(info_b.grad_norm),
            proj_a: info_a.proj_active,
            proj_b: info_b.proj_active,
            logdet_a: a.precond().logdet_ratio(),
            logdet_b: b.precond().logdet_ratio(),
            lambda_min_a,
            lambda_min_b,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }

    Ok(StabilityLog {
        polyak_a: a.polyak_mean(),
        polyak_b: b.polyak_mean(),
        final_a: a.w().clone(),
        final_b: b.w().clone(),
        rows,
    })
}

/// The averaged-iterate loss-difference ceiling
/// `(Lip_loss Lip_phi / sqrt(lambda)) (1/k) sum_t ||Delta_t||_{Hbar_{t-1}}`.
pub fn stability_to_generalization(
    log: &StabilityLog,
    lip: &LipschitzBounds,
    lambda: f64,
) -> f64 {
    lip.lip_loss * lip.lip_phi / lambda.sqrt() * log.mean_delta_hbar()
}

/// Largest loss difference between two parameter vectors over a random probe
/// grid of (x, y) with ||x|| <= 1 and |y| <= 1; a sampled stand-in for the
/// sup over the sample space, so it underestimates the true sup.
pub fn probe_loss_difference(
    a: &NetworkParams,
    b: &NetworkParams,
    act: Activation,
    loss: Loss,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    let d = a.config().input_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..probes {
        let mut x = DVector::from_fn(d, |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g
        });
        let norm = x.norm().max(1e-12);
        let radius: f64 = rng.random_range(0.0_f64..1.0).powf(1.0 / d as f64);
        x *= radius / norm;
        let y = match loss {
            Loss::Square => rng.random_range(-1.0..1.0),
            Loss::RegLogistic { .. } => {
                if rng.random_range(0.0_f64..1.0) < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
        };
        let pa = forward(a, act, &x)?;
        let pb = forward(b, act, &x)?;
        worst = worst.max((loss.eval(pa, y) - loss.eval(pb, y)).abs());
    }
    Ok(worst)
}

/// Held-out mean loss minus training mean loss at the given parameters.
pub fn empirical_generalization_gap(
    params: &NetworkParams,
    act: Activation,
    loss: Loss,
    train: &Dataset,
    held_out: &Dataset,
) -> Result<f64> {
    let risk = |data: &Dataset| -> Result<f64> {
        let preds: Vec<f64> = data
            .inputs()
            .iter()
            .map(|x| forward(params, act, x))
            .collect::<Result<_>>()?;
        empirical_risk(loss, &preds, data)
    };
    Ok(risk(held_out)? - risk(train)?)
}

/// Midpoint-metric norm of an arbitrary vector, `sqrt(v^T Hbar v)`.
pub fn hbar_norm(h_a: &DMatrix<f64>, h_b: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (0.5 * (v.dot(&(h_a * v)) + v.dot(&(h_b * v)))).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::square_loss;
    use crate::optimizer::symmetric_init;
    use crate::teacher::{sample_unit_ball_inputs, teacher_dataset, NtkTeacher, TransportMap};

    fn setup(n: usize, m: usize, d: usize, seed: u64) -> (NetworkParams, Dataset) {
        let cfg = crate::network::NetworkConfig::new(1, m, d).unwrap();
        let init = symmetric_init(&cfg, seed).unwrap();
        let map = TransportMap::anchored(0.5, 0.5, d);
        let teacher = NtkTeacher::new(d, 2_000, map, Activation::Tanh, seed + 1).unwrap();
        let data = teacher_dataset(&teacher, n, seed + 2).unwrap();
        (init, data)
    }

    fn replacement(d: usize, seed: u64) -> (DVector<f64>, f64) {
        let x = sample_unit_ball_inputs(1, d, seed).pop().unwrap();
        (x, 0.31)
    }

    #[test]
    fn neighbor_construction_guards() {
        let (_, data) = setup(8, 4, 2, 1);
        let (x, y) = replacement(2, 99);
        let pair = make_neighbor(&data, 3, x.clone(), y, 7).unwrap();
        // the datasets agree everywhere except j_star
        let mut differing = 0;
        for i in 0..8 {
            if pair.data.x(i) != pair.data_prime.x(i) || pair.data.y(i) != pair.data_prime.y(i) {
                differing += 1;
                assert_eq!(i, 3);
            }
        }
        assert_eq!(differing, 1);

        // identical replacement is rejected
        let same_x = data.x(3).clone();
        let same_y = data.y(3);
        assert!(make_neighbor(&data, 3, same_x, same_y, 7).is_err());
        assert!(make_neighbor(&data, 100, x, y, 7).is_err());
    }

    fn toy_hyper(k_max: usize) -> Hyperparams {
        Hyperparams {
            eta: 0.5,
            alpha: 0.25,
            lambda: 1.0,
            batch: 4,
            radius: 1.0,
            k_max,
        }
    }

    #[test]
    fn coupling_starts_at_zero_and_replays_bitwise() {
        let (init, data) = setup(16, 8, 2, 5);
        let (x, y) = replacement(2, 50);
        let pair = make_neighbor(&data, 0, x, y, 13).unwrap();
        let log1 = run_pair(
            &pair,
            Activation::Tanh,
            square_loss(),
            toy_hyper(12),
            &init,
            1.0,
            TrainOptions::default(),
        )
        .unwrap();
        assert_eq!(log1.rows[0].delta_l2, 0.0);
        assert_eq!(log1.rows[0].delta_hbar, 0.0);
        let log2 = run_pair(
            &pair,
            Activation::Tanh,
            square_loss(),
            toy_hyper(12),
            &init,
            1.0,
            TrainOptions::default(),
        )
        .unwrap();
        for (r1, r2) in log1.rows.iter().zip(&log2.rows) {
            assert_eq!(r1.delta_l2, r2.delta_l2);
            assert_eq!(r1.delta_hbar, r2.delta_hbar);
            assert_eq!(r1.indices, r2.indices);
        }
    }

    #[test]
    fn hbar_norm_dominates_scaled_euclidean() {
        let (init, data) = setup(16, 8, 2, 6);
        let (x, y) = replacement(2, 51);
        let pair = make_neighbor(&data, 1, x, y, 3).unwrap();
        let hyper = toy_hyper(15);
        let log = run_pair(
            &pair,
            Activation::Tanh,
            square_loss(),
            hyper,
            &init,
            1.0,
            TrainOptions::default(),
        )
        .unwrap();
        for row in &log.rows[1..] {
            assert!(
                row.delta_hbar >= hyper.lambda.sqrt() * row.delta_l2 - 1e-12,
                "iteration {}: {} < sqrt(lambda) * {}",
                row.iteration,
                row.delta_hbar,
                row.delta_l2
            );
        }
    }

    #[test]
    fn untouched_jstar_with_vanishing_alpha_keeps_delta_zero() {
        // j_star outside every sampled batch and alpha ~ 0: the two
        // trajectories are identical
        let (init, data) = setup(12, 8, 2, 7);
        let hyper = Hyperparams {
            eta: 0.2,
            alpha: 1e-12,
            lambda: 1.0,
            batch: 2,
            radius: 1.0,
            k_max: 10,
        };
        // find a j_star never sampled within the horizon
        let sampler = crate::sampler::SamplerSequence::new(17, 12, 2).unwrap();
        let mut hit = vec![false; 12];
        for k in 0..10 {
            for j in sampler.indices(k) {
                hit[j] = true;
            }
        }
        let j_star = (0..12).find(|&j| !hit[j]).expect("some index never sampled");
        let (x, y) = replacement(2, 52);
        let pair = make_neighbor(&data, j_star, x, y, 17).unwrap();
        let log = run_pair(
            &pair,
            Activation::Tanh,
            square_loss(),
            hyper,
            &init,
            1.0,
            TrainOptions::default(),
        )
        .unwrap();
        for row in &log.rows {
            assert!(!row.jstar_hit);
            assert_eq!(row.delta_l2, 0.0);
        }
    }

    #[test]
    fn lemma2_value_scales_linearly_in_lip_loss() {
        let (init, data) = setup(12, 8, 2, 8);
        let (x, y) = replacement(2, 53);
        let pair = make_neighbor(&data, 2, x, y, 19).unwrap();
        let log = run_pair(
            &pair,
            Activation::Tanh,
            square_loss(),
            toy_hyper(8),
            &init,
            1.0,
            TrainOptions::default(),
        )
        .unwrap();
        let lip = LipschitzBounds {
            lip_phi: 2.0,
            lip_grad_phi: 1.0,
            lip_loss: 3.0,
        };
        let mut doubled = lip;
        doubled.lip_loss *= 2.0;
        let v1 = stability_to_generalization(&log, &lip, 1.0);
        let v2 = stability_to_generalization(&log, &doubled, 1.0);
        assert!((v2 - 2.0 * v1).abs() <= 1e-12 * v1.abs().max(1.0));

        // zero-delta log gives zero
        assert_eq!(
            stability_to_generalization(
                &StabilityLog {
                    rows: vec![log.rows[0].clone()],
                    polyak_a: log.polyak_a.clone(),
                    polyak_b: log.polyak_b.clone(),
                    final_a: log.final_a.clone(),
                    final_b: log.final_b.clone(),
                },
                &lip,
                1.0
            ),
            0.0
        );
    }

    #[test]
    fn generalization_gap_is_zero_on_identical_sets() {
        let (init, data) = setup(10, 8, 2, 9);
        let gap = empirical_generalization_gap(
            &init,
            Activation::Tanh,
            square_loss(),
            &data,
            &data,
        )
        .unwrap();
        assert_eq!(gap, 0.0);
    }
}
