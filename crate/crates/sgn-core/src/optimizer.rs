//! The SGN iteration: mini-batch subsampling, gradient assembly, the
//! accumulate-then-step preconditioned update, metric projection, and
//! Polyak-Ruppert averaging.
//!
//! Step order is fixed: (1) Jacobian and loss gradients at w_k, (2) fold the
//! batch into the preconditioner so the state holds H_k including the
//! current batch, (3) Psi_k = J_k^T G_k, (4) u_k = w_k - eta H_k^{-1} Psi_k,
//! (5) w_{k+1} = projection of u_k under H_k. A trajectory is a pure
//! function of (dataset, seed, hyperparameters, init): replays are
//! bit-identical.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::activation::Activation;
use crate::error::{Result, SgnError};
use crate::loss::{empirical_risk, Dataset, Loss};
use crate::network::{
    value_and_gradient, GeometrySpec, NetworkConfig, NetworkParams,
};
use crate::precond::{MinEigEstimate, Preconditioner};
use crate::projection::{project, project_dense};
use crate::sampler::SamplerSequence;

/// Step size, accumulation weight, damping, batch size, trust radius and
/// horizon. The derived ratios gamma = lambda/(alpha Lip^2 B) and
/// xi = eta/alpha are always recomputed, never stored.
#[derive(Clone, Copy, Debug)]
pub struct Hyperparams {
    pub eta: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub batch: usize,
    pub radius: f64,
    pub k_max: usize,
}

impl Hyperparams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(SgnError::InvalidParameter("eta must be positive".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(SgnError::InvalidParameter("alpha must be positive".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(SgnError::InvalidParameter("lambda must be positive".into()));
        }
        if self.batch == 0 || self.batch > n {
            return Err(SgnError::InvalidParameter(format!(
                "batch size {} must lie in [1, {n}]",
                self.batch
            )));
        }
        if !(self.radius >= 0.0) {
            return Err(SgnError::InvalidParameter("radius must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn xi(&self) -> f64 {
        self.eta / self.alpha
    }

    pub fn gamma(&self, lip_phi: f64) -> f64 {
        self.lambda / (self.alpha * lip_phi * lip_phi * self.batch as f64)
    }

    /// Non-fatal hypothesis checks; currently the single condition
    /// xi >= 2/nu of the convergence theorem.
    pub fn warnings(&self, nu: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.xi() < 2.0 / nu {
            out.push(format!(
                "xi = eta/alpha = {:.6} is below 2/nu = {:.6}; the convergence bound hypothesis is unmet",
                self.xi(),
                2.0 / nu
            ));
        }
        out
    }
}

/// Which preconditioner update path the trainer uses. Both compute the same
/// state; `Blocked` folds the whole batch in one Woodbury update and is the
/// choice for large parameter counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UpdateStyle {
    #[default]
    RowWise,
    Blocked,
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub update_style: UpdateStyle,
    /// Recompute lambda_min(H_k) every this many iterations (warm-started
    /// inverse power iteration); intermediate rows carry the last estimate.
    pub lambda_min_stride: usize,
    /// Maintain the running mean of the full-data Jacobian covariance
    /// (1/k) sum_t (1/n) J(w_t)^T J(w_t) for intrinsic-rank telemetry.
    /// Costs n rank-one updates per iteration, so off by default.
    pub track_gram_mean: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            update_style: UpdateStyle::RowWise,
            lambda_min_stride: 1,
            track_gram_mean: false,
        }
    }
}

/// Per-iteration telemetry. Row 0 is the initial state; row k >= 1 describes
/// the state after k steps, with `minibatch_loss` and `grad_norm` taken from
/// the batch that produced it.
#[derive(Clone, Debug)]
pub struct IterationRow {
    pub iteration: usize,
    pub train_risk: f64,
    pub minibatch_loss: Option<f64>,
    pub logdet_ratio: f64,
    pub lambda_min: f64,
    pub lambda_min_converged: bool,
    pub grad_norm: Option<f64>,
    pub proj_active: bool,
    pub dist_from_anchor: f64,
    /// Risk of the running Polyak-Ruppert average w-hat_k.
    pub polyak_risk: f64,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub rows: Vec<IterationRow>,
    pub final_w: DVector<f64>,
    /// Polyak-Ruppert average (1/k) sum_{t<k} w_t of the executed steps
    /// (the initial parameter when no steps ran).
    pub polyak_w: DVector<f64>,
    /// Running Gram mean, present when requested in the options.
    pub gram_mean: Option<DMatrix<f64>>,
}

/// What a single step did; consumed by the stability harness.
#[derive(Clone, Debug)]
pub struct StepInfo {
    pub iteration: usize,
    pub indices: Vec<usize>,
    pub minibatch_loss: f64,
    pub grad_norm: f64,
    pub proj_active: bool,
}

pub struct Trainer {
    act: Activation,
    loss: Loss,
    hyper: Hyperparams,
    geom: GeometrySpec,
    data: Dataset,
    sampler: SamplerSequence,
    state: Preconditioner,
    w: DVector<f64>,
    params: NetworkParams,
    polyak_sum: DVector<f64>,
    steps: usize,
    opts: TrainOptions,
    eig_warm: DVector<f64>,
    lambda_min_last: MinEigEstimate,
    gram_mean_sum: Option<DMatrix<f64>>,
}

impl Trainer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        act: Activation,
        loss: Loss,
        hyper: Hyperparams,
        geom: GeometrySpec,
        data: Dataset,
        sampler_seed: u64,
        init: &NetworkParams,
        opts: TrainOptions,
    ) -> Result<Self> {
        hyper.validate(data.len())?;
        data.check_labels(loss)?;
        let cfg = geom.config();
        if init.config() != cfg {
            return Err(SgnError::DimensionMismatch(
                "initial parameters and geometry disagree on the architecture".into(),
            ));
        }
        if data.input_dim() != cfg.input_dim {
            return Err(SgnError::DimensionMismatch(format!(
                "dataset inputs have dimension {}, network expects {}",
                data.input_dim(),
                cfg.input_dim
            )));
        }
        if opts.lambda_min_stride == 0 {
            return Err(SgnError::InvalidParameter(
                "lambda_min_stride must be >= 1".into(),
            ));
        }
        let w = init.flatten();
        if !geom.contains(&w, 1e-9) {
            return Err(SgnError::InvalidParameter(
                "initial parameters lie outside the trust ball".into(),
            ));
        }
        let p = cfg.param_count();
        let sampler = SamplerSequence::new(sampler_seed, data.len(), hyper.batch)?;
        let state = Preconditioner::new(p, hyper.alpha, hyper.lambda)?;
        let gram_mean_sum = opts.track_gram_mean.then(|| DMatrix::zeros(p, p));
        Ok(Trainer {
            act,
            loss,
            hyper,
            geom,
            data,
            sampler,
            state,
            params: init.clone(),
            polyak_sum: DVector::zeros(p),
            w,
            steps: 0,
            opts,
            eig_warm: crate::linalg::power_iteration_start(p),
            lambda_min_last: MinEigEstimate {
                value: hyper.lambda,
                converged: true,
            },
            gram_mean_sum,
        })
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn precond(&self) -> &Preconditioner {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn geom(&self) -> &GeometrySpec {
        &self.geom
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    /// w-hat over the steps executed so far; the initial parameter before
    /// any step.
    pub fn polyak_mean(&self) -> DVector<f64> {
        if self.steps == 0 {
            self.w.clone()
        } else {
            &self.polyak_sum / self.steps as f64
        }
    }

    /// Empirical risk over the full training set at the given flat parameter.
    pub fn risk_at(&self, w: &DVector<f64>) -> Result<f64> {
        let params = NetworkParams::from_flat(self.geom.config(), w)?;
        self.risk_of_params(&params)
    }

    fn risk_of_params(&self, params: &NetworkParams) -> Result<f64> {
        let preds: Vec<f64> = self
            .data
            .inputs()
            .iter()
            .map(|x| crate::network::forward(params, self.act, x))
            .collect::<Result<_>>()?;
        empirical_risk(self.loss, &preds, &self.data)
    }

    pub fn current_risk(&self) -> Result<f64> {
        self.risk_of_params(&self.params)
    }

    /// One SGN step on the next sampled batch.
    pub fn step(&mut self) -> Result<StepInfo> {
        let k = self.steps;
        let indices = self.sampler.indices(k);

        if let Some(gram) = self.gram_mean_sum.as_mut() {
            // full-data Jacobian covariance at the pre-step parameters
            let n = self.data.len() as f64;
            for x in self.data.inputs() {
                let (_, g) = value_and_gradient(&self.params, self.act, x)?;
                gram.ger(1.0 / n, &g, &g, 1.0);
            }
        }

        let b = indices.len();
        let p = self.state.dim();
        let mut jac = DMatrix::zeros(b, p);
        let mut g_vec = DVector::zeros(b);
        let mut minibatch_loss = 0.0;
        for (row, &j) in indices.iter().enumerate() {
            let (pred, grad) = value_and_gradient(&self.params, self.act, self.data.x(j))?;
            let y = self.data.y(j);
            minibatch_loss += self.loss.eval(pred, y);
            g_vec[row] = self.loss.grad(pred, y);
            jac.row_mut(row).copy_from(&grad.transpose());
        }
        if !minibatch_loss.is_finite() {
            return Err(SgnError::NonFinite {
                iteration: k,
                quantity: "minibatch loss".into(),
            });
        }

        match self.opts.update_style {
            UpdateStyle::RowWise => self.state.accumulate_batch(&jac)?,
            UpdateStyle::Blocked => self.state.accumulate_batch_blocked(&jac)?,
        }

        let psi = jac.tr_mul(&g_vec);
        let grad_norm = psi.norm();
        let u = &self.w - self.hyper.eta * self.state.solve(&psi)?;
        let projected = project(&u, &self.state, &self.geom)?;

        self.polyak_sum += &self.w;
        self.w = projected.point;
        if !self.w.iter().all(|v| v.is_finite()) {
            return Err(SgnError::NonFinite {
                iteration: k,
                quantity: "parameters".into(),
            });
        }
        self.params = NetworkParams::from_flat(self.geom.config(), &self.w)?;
        self.steps = k + 1;

        Ok(StepInfo {
            iteration: k,
            indices,
            minibatch_loss,
            grad_norm,
            proj_active: projected.active,
        })
    }

    /// lambda_min(H) honoring the telemetry stride; exact on stride
    /// boundaries, last estimate in between.
    fn lambda_min_telemetry(&mut self, force: bool) -> MinEigEstimate {
        if force || self.steps % self.opts.lambda_min_stride == 0 {
            self.lambda_min_last = self.state.min_eigenvalue_warm(&mut self.eig_warm);
        }
        self.lambda_min_last
    }

    fn telemetry_row(
        &mut self,
        info: Option<&StepInfo>,
        force_eig: bool,
        wall_time_ms: f64,
    ) -> Result<IterationRow> {
        let risk = self.current_risk()?;
        if !risk.is_finite() {
            return Err(SgnError::NonFinite {
                iteration: self.steps,
                quantity: "training risk".into(),
            });
        }
        let eig = self.lambda_min_telemetry(force_eig);
        let polyak_risk = self.risk_at(&self.polyak_mean())?;
        Ok(IterationRow {
            iteration: self.steps,
            train_risk: risk,
            minibatch_loss: info.map(|i| i.minibatch_loss),
            logdet_ratio: self.state.logdet_ratio(),
            lambda_min: eig.value,
            lambda_min_converged: eig.converged,
            grad_norm: info.map(|i| i.grad_norm),
            proj_active: info.map(|i| i.proj_active).unwrap_or(false),
            dist_from_anchor: (&self.w - self.geom.anchor()).norm(),
            polyak_risk,
            wall_time_ms,
        })
    }

    /// Run `k_max` steps, recording telemetry each iteration (plus the
    /// initial state).
    pub fn run(mut self) -> Result<TrajectoryRecord> {
        let k_max = self.hyper.k_max;
        let mut rows = Vec::with_capacity(k_max + 1);
        let initial = self.telemetry_row(None, true, 0.0)?;
        rows.push(initial);
        for _ in 0..k_max {
            let start = Instant::now();
            let info = self.step()?;
            let force = self.steps == k_max;
            let wall = start.elapsed().as_secs_f64() * 1e3;
            rows.push(self.telemetry_row(Some(&info), force, wall)?);
        }
        let polyak_w = self.polyak_mean();
        let gram_mean = self.gram_mean_sum.take().map(|g| {
            if self.steps > 0 {
                g / self.steps as f64
            } else {
                g
            }
        });
        Ok(TrajectoryRecord {
            rows,
            final_w: self.w,
            polyak_w,
            gram_mean,
        })
    }
}

/// Mirrored random initialization for single-hidden-layer networks: the
/// first m/2 units draw (c, W-row) jointly standard normal per unit, the
/// second half repeats the rows with negated output weights, so the network
/// output is identically zero at the initial parameters.
pub fn symmetric_init(cfg: &NetworkConfig, seed: u64) -> Result<NetworkParams> {
    cfg.validate()?;
    if cfg.depth != 1 {
        return Err(SgnError::InvalidParameter(
            "symmetric initialization is defined for depth 1 only".into(),
        ));
    }
    if cfg.width % 2 != 0 {
        return Err(SgnError::InvalidParameter(
            "symmetric initialization needs an even width".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = cfg.width;
    let d = cfg.input_dim;
    let mut w = DMatrix::zeros(m, d);
    let mut c = DVector::zeros(m);
    for i in 0..m / 2 {
        let g: f64 = StandardNormal.sample(&mut rng);
        c[i] = g;
        for j in 0..d {
            let g: f64 = StandardNormal.sample(&mut rng);
            w[(i, j)] = g;
        }
        c[i + m / 2] = -c[i];
        for j in 0..d {
            w[(i + m / 2, j)] = w[(i, j)];
        }
    }
    NetworkParams::new(*cfg, vec![w], c)
}

/// A strong feasible benchmark for optimality-gap measurements: the
/// minimum-norm interpolant of the model linearized at the anchor,
/// `w = w0 + J0^T (J0 J0^T + ridge I)^{-1} (y - phi(w0))`, pulled back onto
/// the trust ball when it lands outside. Its full-data risk upper-bounds the
/// best risk attainable in C up to the linearization error, which is what a
/// heavily trained reference run would estimate.
pub fn linearized_reference_solution(
    anchor: &NetworkParams,
    data: &Dataset,
    act: Activation,
    geom: &GeometrySpec,
    relative_ridge: f64,
) -> Result<DVector<f64>> {
    let n = data.len();
    let p = anchor.config().param_count();
    let mut jac = DMatrix::zeros(n, p);
    let mut residual = DVector::zeros(n);
    for (row, x) in data.inputs().iter().enumerate() {
        let (pred, g) = value_and_gradient(anchor, act, x)?;
        residual[row] = data.y(row) - pred;
        jac.row_mut(row).copy_from(&g.transpose());
    }
    let mut kernel = &jac * jac.transpose();
    let trace: f64 = (0..n).map(|i| kernel[(i, i)]).sum();
    let ridge = relative_ridge * (trace / n as f64).max(f64::MIN_POSITIVE);
    for i in 0..n {
        kernel[(i, i)] += ridge;
    }
    let chol = nalgebra::Cholesky::new(kernel)
        .ok_or_else(|| SgnError::NotPositiveDefinite("linearized kernel".into()))?;
    let dual = chol.solve(&residual);
    let mut w = geom.anchor() + jac.tr_mul(&dual);
    let dist = (&w - geom.anchor()).norm();
    if dist > geom.radius() && dist > 0.0 {
        w = geom.anchor() + (&w - geom.anchor()) * (geom.radius() / dist);
    }
    Ok(w)
}

/// One incremental sweep in the extended-Kalman-filter form: the
/// preconditioner is updated row by row inside the sweep and each row also
/// moves the parameter through the partially updated inverse,
///
/// ```text
/// Z^(j)     = Z^(j-1) + alpha g_j g_j^T,
/// M_j       = alpha g_j^T (theta^(j-1) - w_k) - eta l'_j,
/// theta^(j) = theta^(j-1) - M_j [Z^(j)]^{-1} g_j,
/// ```
///
/// with gradients g_j and loss derivatives l'_j evaluated at w_k, and the
/// final parameter projected under the pre-sweep metric. This is a distinct
/// code path from [`Trainer::step`]; no equivalence between the two is
/// asserted anywhere.
pub fn ekf_sweep_step(
    params: &NetworkParams,
    state: &mut Preconditioner,
    batch: &[usize],
    data: &Dataset,
    act: Activation,
    loss: Loss,
    eta: f64,
    geom: &GeometrySpec,
) -> Result<DVector<f64>> {
    if batch.is_empty() {
        return Err(SgnError::EmptyBatch);
    }
    let w_k = params.flatten();
    let h_pre = state.dense().clone();
    let alpha = state.alpha();
    let mut theta = w_k.clone();
    for &j in batch {
        if j >= data.len() {
            return Err(SgnError::InvalidParameter(format!(
                "batch index {j} out of range for n = {}",
                data.len()
            )));
        }
        let (pred, g) = value_and_gradient(params, act, data.x(j))?;
        state.accumulate_row(&g)?;
        let g_tilde = state.solve(&g)?;
        let m_j = alpha * g.dot(&(&theta - &w_k)) - eta * loss.grad(pred, data.y(j));
        theta -= m_j * &g_tilde;
    }
    state.bump_update_count();
    let projected = project_dense(&theta, &h_pre, geom)?;
    Ok(projected.point)
}
