//! C ABI for the SGN training library.
//!
//! Everything crosses the boundary through opaque handles, plain C structs
//! and status codes; no Rust type leaks. Errors are reported twice: as the
//! returned `SgnStatus` and as a per-thread message retrievable with
//! `sgn_last_error_message`. All functions catch panics and convert them to
//! `SgnStatus::Panic`. The matching header is generated into
//! `include/sgn_ffi.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use nalgebra::DVector;

use sgn_core::activation::Activation;
use sgn_core::bounds::{
    lipschitz_bounds_from_constants, logdet_growth_bounds, optimality_gap_bound, pe_fit,
    teacher_radius, LipschitzBounds,
};
use sgn_core::cli::{cmd_stability, cmd_teacher_gen, cmd_train, CliOptions};
use sgn_core::config::RunConfig;
use sgn_core::error::SgnError;
use sgn_core::loss::{Dataset, Loss};
use sgn_core::network::{GeometrySpec, NetworkConfig, NetworkParams};
use sgn_core::optimizer::{symmetric_init, Hyperparams, TrainOptions, Trainer, UpdateStyle};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgnStatus {
    Ok = 0,
    /// Invalid configuration or parameters.
    ConfigError = 2,
    /// Invalid or unreadable data.
    DataError = 3,
    /// Numerical abort (non-finite values, broken factorization).
    NumericalError = 4,
    /// A required pointer was null or a buffer too small.
    InvalidPointer = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let cstring = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn status_of(err: &SgnError) -> SgnStatus {
    match sgn_core::cli::exit_code(err) {
        2 => SgnStatus::ConfigError,
        3 => SgnStatus::DataError,
        _ => SgnStatus::NumericalError,
    }
}

fn report(err: SgnError) -> SgnStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

/// Runs a closure, capturing panics and translating errors to statuses.
fn guarded<F: FnOnce() -> Result<(), SgnStatus>>(f: F) -> SgnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgnStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            SgnStatus::Panic
        }
    }
}

/// Message describing the most recent error on this thread, valid until the
/// next failing call on the same thread. Null when no error was recorded.
#[no_mangle]
pub extern "C" fn sgn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|s| s.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sgn_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Activation selector: 0 = tanh, 1 = sigmoid.
fn activation_from(code: u32) -> Result<Activation, SgnStatus> {
    match code {
        0 => Ok(Activation::Tanh),
        1 => Ok(Activation::Sigmoid),
        _ => {
            set_error(format!("unknown activation code {code}"));
            Err(SgnStatus::ConfigError)
        }
    }
}

/// Loss selector: 0 = square, 1 = regularized logistic (uses `loss_reg`).
fn loss_from(code: u32, reg: f64) -> Result<Loss, SgnStatus> {
    match code {
        0 => Ok(Loss::Square),
        1 => sgn_core::loss::reg_logistic_loss(reg).map_err(report),
        _ => {
            set_error(format!("unknown loss code {code}"));
            Err(SgnStatus::ConfigError)
        }
    }
}

/// Trainer construction parameters. `symmetric_init != 0` requires depth 1
/// and even width; otherwise weights are independent standard normal.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SgnTrainerConfig {
    pub depth: u32,
    pub width: u32,
    pub input_dim: u32,
    /// 0 = tanh, 1 = sigmoid.
    pub activation: u32,
    /// 0 = square, 1 = regularized logistic.
    pub loss: u32,
    /// Tikhonov weight of the logistic loss; ignored for the square loss.
    pub loss_reg: f64,
    pub eta: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub batch: u32,
    /// Trust-ball radius around the initial parameters.
    pub radius: f64,
    pub sampler_seed: u64,
    pub init_seed: u64,
    /// Nonzero for the mirrored zero-output initialization.
    pub symmetric_init: u32,
    /// Nonzero to fold batches with the blocked Woodbury update.
    pub blocked_updates: u32,
    /// Telemetry stride for minimum-eigenvalue queries (>= 1).
    pub lambda_min_stride: u32,
}

/// Opaque trainer handle.
pub struct SgnTrainer {
    inner: Trainer,
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if ptr.is_null() && len > 0 {
        None
    } else if len == 0 {
        Some(&[])
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Create a trainer for a dataset given as `n` rows of `input_dim` features
/// (row-major) plus `n` labels. Returns null on failure; the error is
/// retrievable via [`sgn_last_error_message`].
///
/// # Safety
/// `config` must point to a valid `SgnTrainerConfig`; `features` must hold
/// `n * config.input_dim` doubles and `labels` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn sgn_trainer_new(
    config: *const SgnTrainerConfig,
    features: *const f64,
    labels: *const f64,
    n: usize,
) -> *mut SgnTrainer {
    let mut out: *mut SgnTrainer = std::ptr::null_mut();
    let status = guarded(|| {
        let cfg = unsafe { config.as_ref() }.ok_or_else(|| {
            set_error("null config pointer");
            SgnStatus::InvalidPointer
        })?;
        let d = cfg.input_dim as usize;
        let xs_raw = unsafe { slice(features, n * d) }.ok_or_else(|| {
            set_error("null feature pointer");
            SgnStatus::InvalidPointer
        })?;
        let ys_raw = unsafe { slice(labels, n) }.ok_or_else(|| {
            set_error("null label pointer");
            SgnStatus::InvalidPointer
        })?;

        let act = activation_from(cfg.activation)?;
        let loss = loss_from(cfg.loss, cfg.loss_reg)?;
        let net = NetworkConfig::new(cfg.depth as usize, cfg.width as usize, d).map_err(report)?;
        let xs: Vec<DVector<f64>> = (0..n)
            .map(|i| DVector::from_column_slice(&xs_raw[i * d..(i + 1) * d]))
            .collect();
        let data = Dataset::new(xs, ys_raw.to_vec()).map_err(report)?;

        let init = if cfg.symmetric_init != 0 {
            symmetric_init(&net, cfg.init_seed).map_err(report)?
        } else {
            let mut rng =
                <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.init_seed);
            NetworkParams::random_normal(net, &mut rng).map_err(report)?
        };
        let geom = GeometrySpec::new(&init, cfg.radius).map_err(report)?;
        let hyper = Hyperparams {
            eta: cfg.eta,
            alpha: cfg.alpha,
            lambda: cfg.lambda,
            batch: cfg.batch as usize,
            radius: cfg.radius,
            k_max: 0,
        };
        let opts = TrainOptions {
            update_style: if cfg.blocked_updates != 0 {
                UpdateStyle::Blocked
            } else {
                UpdateStyle::RowWise
            },
            lambda_min_stride: cfg.lambda_min_stride.max(1) as usize,
            track_gram_mean: false,
        };
        let trainer = Trainer::new(act, loss, hyper, geom, data, cfg.sampler_seed, &init, opts)
            .map_err(report)?;
        out = Box::into_raw(Box::new(SgnTrainer { inner: trainer }));
        Ok(())
    });
    let _ = status;
    out
}

/// Release a trainer handle. Null is a no-op.
///
/// # Safety
/// `trainer` must come from [`sgn_trainer_new`] and must not be used again.
#[no_mangle]
pub unsafe extern "C" fn sgn_trainer_free(trainer: *mut SgnTrainer) {
    if !trainer.is_null() {
        drop(unsafe { Box::from_raw(trainer) });
    }
}

unsafe fn trainer_ref<'a>(ptr: *const SgnTrainer) -> Result<&'a SgnTrainer, SgnStatus> {
    unsafe { ptr.as_ref() }.ok_or_else(|| {
        set_error("null trainer handle");
        SgnStatus::InvalidPointer
    })
}

/// Execute one SGN step.
///
/// # Safety
/// `trainer` must be a live handle from [`sgn_trainer_new`].
#[no_mangle]
pub unsafe extern "C" fn sgn_trainer_step(trainer: *mut SgnTrainer) -> SgnStatus {
    guarded(|| {
        let handle = unsafe { trainer.as_mut() }.ok_or_else(|| {
            set_error("null trainer handle");
            SgnStatus::InvalidPointer
        })?;
        handle.inner.step().map(|_| ()).map_err(report)
    })
}

/// Number of steps executed so far.
///
/// # Safety
/// `trainer` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sgn_trainer_iteration(trainer: *const SgnTrainer) -> u64 {
    unsafe { trainer.as_ref() }
        .map(|t| t.inner.steps() as u64)
        .unwrap_or(0)
}

/// Flat parameter count p.
///
/// # Safety
/// `trainer` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sgn_trainer_param_count(trainer: *const SgnTrainer) -> usize {
    unsafe { trainer.as_ref() }
        .map(|t| t.inner.w().len())
        .unwrap_or(0)
}

/// Scalar telemetry selector for [`sgn_trainer_metric`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgnMetric {
    /// Mean training loss at the current parameters.
    TrainRisk = 0,
    /// log det(H_k) - log det(H_0).
    LogdetRatio = 1,
    /// Minimum eigenvalue of the preconditioner.
    LambdaMin = 2,
    /// Euclidean distance of the parameters from the trust-ball anchor.
    DistFromAnchor = 3,
    /// Mean training loss at the Polyak average.
    PolyakRisk = 4,
}

/// Read one scalar metric of the current state into `out`.
///
/// # Safety
/// `trainer` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sgn_trainer_metric(
    trainer: *const SgnTrainer,
    metric: SgnMetric,
    out: *mut f64,
) -> SgnStatus {
    guarded(|| {
        let handle = unsafe { trainer_ref(trainer) }?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| {
            set_error("null output pointer");
            SgnStatus::InvalidPointer
        })?;
        let t = &handle.inner;
        *out = match metric {
            SgnMetric::TrainRisk => t.current_risk().map_err(report)?,
            SgnMetric::LogdetRatio => t.precond().logdet_ratio(),
            SgnMetric::LambdaMin => t.precond().min_eigenvalue().value,
            SgnMetric::DistFromAnchor => (t.w() - t.geom().anchor()).norm(),
            SgnMetric::PolyakRisk => t.risk_at(&t.polyak_mean()).map_err(report)?,
        };
        Ok(())
    })
}

/// Copy the flat parameter vector (or the Polyak average when
/// `polyak != 0`) into a caller buffer of length `len >= p`.
///
/// # Safety
/// `trainer` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sgn_trainer_params(
    trainer: *const SgnTrainer,
    polyak: u32,
    out: *mut f64,
    len: usize,
) -> SgnStatus {
    guarded(|| {
        let handle = unsafe { trainer_ref(trainer) }?;
        let w = if polyak != 0 {
            handle.inner.polyak_mean()
        } else {
            handle.inner.w().clone()
        };
        if out.is_null() || len < w.len() {
            set_error(format!("parameter buffer needs {} doubles", w.len()));
            return Err(SgnStatus::InvalidPointer);
        }
        let out_slice = unsafe { std::slice::from_raw_parts_mut(out, w.len()) };
        out_slice.copy_from_slice(w.as_slice());
        Ok(())
    })
}

fn path_from(ptr: *const c_char, what: &str) -> Result<PathBuf, SgnStatus> {
    if ptr.is_null() {
        set_error(format!("null {what} pointer"));
        return Err(SgnStatus::InvalidPointer);
    }
    let s = unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        SgnStatus::ConfigError
    })?;
    Ok(PathBuf::from(s))
}

/// Batch commands mirroring the CLI subcommands.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgnCommand {
    Train = 0,
    Stability = 1,
    TeacherGen = 2,
}

/// Run a full experiment from a config file, writing metrics and summaries
/// under `out_dir`; equivalent to the `sgn-lab` subcommands.
///
/// # Safety
/// `config_path` and `out_dir` must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sgn_run_config(
    command: SgnCommand,
    config_path: *const c_char,
    out_dir: *const c_char,
    jobs: u32,
    csv_has_header: u32,
) -> SgnStatus {
    guarded(|| {
        let config_path = path_from(config_path, "config path")?;
        let out_dir = path_from(out_dir, "output directory")?;
        let cfg = RunConfig::parse_file(&config_path).map_err(report)?;
        let opts = CliOptions {
            out_dir,
            jobs: jobs.max(1) as usize,
            csv_has_header: csv_has_header != 0,
        };
        match command {
            SgnCommand::Train => cmd_train(&cfg, &opts).map(|_| ()).map_err(report),
            SgnCommand::Stability => cmd_stability(&cfg, &opts).map(|_| ()).map_err(report),
            SgnCommand::TeacherGen => cmd_teacher_gen(&cfg, &opts).map_err(report),
        }
    })
}

/// Lipschitz constants computed from raw geometry numbers; `out` receives
/// [Lip_phi, Lip_grad_phi, Lip_loss].
///
/// # Safety
/// `out` must hold three doubles.
#[no_mangle]
pub unsafe extern "C" fn sgn_lipschitz_bounds(
    activation: u32,
    loss: u32,
    loss_reg: f64,
    depth: u32,
    width: u32,
    kappa_c: f64,
    zeta_c: f64,
    out: *mut f64,
) -> SgnStatus {
    guarded(|| {
        let act = activation_from(activation)?;
        let loss = loss_from(loss, loss_reg)?;
        if out.is_null() {
            set_error("null output pointer");
            return Err(SgnStatus::InvalidPointer);
        }
        let lip =
            lipschitz_bounds_from_constants(act, loss, depth as usize, width as usize, kappa_c, zeta_c);
        let out_slice = unsafe { std::slice::from_raw_parts_mut(out, 3) };
        out_slice[0] = lip.lip_phi;
        out_slice[1] = lip.lip_grad_phi;
        out_slice[2] = lip.lip_loss;
        Ok(())
    })
}

/// The running-average optimality-gap ceiling and its Polyak variant;
/// `out` receives [kappa, polyak].
///
/// # Safety
/// `out` must hold two doubles.
#[no_mangle]
pub unsafe extern "C" fn sgn_optimality_gap_bound(
    eta: f64,
    alpha: f64,
    lambda: f64,
    batch: u32,
    radius: f64,
    lip_phi: f64,
    lip_grad_phi: f64,
    lip_loss: f64,
    logdet_ratio: f64,
    k: u64,
    out: *mut f64,
) -> SgnStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return Err(SgnStatus::InvalidPointer);
        }
        let hyper = Hyperparams {
            eta,
            alpha,
            lambda,
            batch: batch as usize,
            radius,
            k_max: 0,
        };
        let lip = LipschitzBounds {
            lip_phi,
            lip_grad_phi,
            lip_loss,
        };
        let bound = optimality_gap_bound(&hyper, &lip, radius, logdet_ratio, k as usize)
            .map_err(report)?;
        let out_slice = unsafe { std::slice::from_raw_parts_mut(out, 2) };
        out_slice[0] = bound.kappa;
        out_slice[1] = bound.polyak;
        Ok(())
    })
}

/// Worst-case and rank-aware log-det growth ceilings; `out` receives
/// [worst_case, rank_aware].
///
/// # Safety
/// `out` must hold two doubles.
#[no_mangle]
pub unsafe extern "C" fn sgn_logdet_growth_bounds(
    eta: f64,
    alpha: f64,
    lambda: f64,
    batch: u32,
    param_count: usize,
    k: u64,
    r_bar: f64,
    lip_phi: f64,
    out: *mut f64,
) -> SgnStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return Err(SgnStatus::InvalidPointer);
        }
        let hyper = Hyperparams {
            eta,
            alpha,
            lambda,
            batch: batch as usize,
            radius: 0.0,
            k_max: 0,
        };
        let lip = LipschitzBounds {
            lip_phi,
            lip_grad_phi: 0.0,
            lip_loss: 0.0,
        };
        let bounds = logdet_growth_bounds(&hyper, &lip, param_count, k as usize, r_bar);
        let out_slice = unsafe { std::slice::from_raw_parts_mut(out, 2) };
        out_slice[0] = bounds.worst_case;
        out_slice[1] = bounds.rank_aware;
        Ok(())
    })
}

/// Power-law fit of a lambda_min trajectory; `out` receives
/// [C, q, residual].
///
/// # Safety
/// `trajectory` must hold `len` doubles and `out` three doubles.
#[no_mangle]
pub unsafe extern "C" fn sgn_pe_fit(
    trajectory: *const f64,
    len: usize,
    batch: u32,
    burn_in: usize,
    out: *mut f64,
) -> SgnStatus {
    guarded(|| {
        let traj = unsafe { slice(trajectory, len) }.ok_or_else(|| {
            set_error("null trajectory pointer");
            SgnStatus::InvalidPointer
        })?;
        if out.is_null() {
            set_error("null output pointer");
            return Err(SgnStatus::InvalidPointer);
        }
        let fit = pe_fit(traj, batch as usize, burn_in).map_err(report)?;
        let out_slice = unsafe { std::slice::from_raw_parts_mut(out, 3) };
        out_slice[0] = fit.c;
        out_slice[1] = fit.q;
        out_slice[2] = fit.residual;
        Ok(())
    })
}

/// Trust radius of the realizable-teacher construction,
/// `sqrt(v_c_bar^2 + v_w_bar^2)`.
#[no_mangle]
pub extern "C" fn sgn_teacher_radius(v_c_bar: f64, v_w_bar: f64) -> f64 {
    teacher_radius(v_c_bar, v_w_bar)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> SgnTrainerConfig {
        SgnTrainerConfig {
            depth: 1,
            width: 8,
            input_dim: 2,
            activation: 0,
            loss: 0,
            loss_reg: 0.0,
            eta: 0.5,
            alpha: 0.25,
            lambda: 1.0,
            batch: 4,
            radius: 1.0,
            sampler_seed: 7,
            init_seed: 9,
            symmetric_init: 1,
            blocked_updates: 0,
            lambda_min_stride: 1,
        }
    }

    fn toy_data(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let a = i as f64 / n as f64;
            xs.push(0.8 * a);
            xs.push(0.5 * (1.0 - a));
            ys.push(0.4 * a - 0.2);
        }
        (xs, ys)
    }

    #[test]
    fn trainer_lifecycle_and_metrics() {
        let cfg = toy_config();
        let (xs, ys) = toy_data(16);
        let trainer = unsafe { sgn_trainer_new(&cfg, xs.as_ptr(), ys.as_ptr(), 16) };
        assert!(!trainer.is_null());
        let p = unsafe { sgn_trainer_param_count(trainer) };
        assert_eq!(p, 8 * 2 + 8);

        let mut initial_risk = 0.0;
        let status =
            unsafe { sgn_trainer_metric(trainer, SgnMetric::TrainRisk, &mut initial_risk) };
        assert_eq!(status, SgnStatus::Ok);
        for _ in 0..30 {
            assert_eq!(unsafe { sgn_trainer_step(trainer) }, SgnStatus::Ok);
        }
        assert_eq!(unsafe { sgn_trainer_iteration(trainer) }, 30);
        let mut final_risk = 0.0;
        unsafe { sgn_trainer_metric(trainer, SgnMetric::TrainRisk, &mut final_risk) };
        assert!(final_risk < initial_risk);

        let mut logdet = 0.0;
        unsafe { sgn_trainer_metric(trainer, SgnMetric::LogdetRatio, &mut logdet) };
        assert!(logdet > 0.0);

        let mut params = vec![0.0; p];
        let status = unsafe { sgn_trainer_params(trainer, 0, params.as_mut_ptr(), p) };
        assert_eq!(status, SgnStatus::Ok);
        assert!(params.iter().any(|&v| v != 0.0));

        // short buffer is rejected
        let status = unsafe { sgn_trainer_params(trainer, 0, params.as_mut_ptr(), p - 1) };
        assert_eq!(status, SgnStatus::InvalidPointer);

        unsafe { sgn_trainer_free(trainer) };
    }

    #[test]
    fn constructor_rejects_bad_input_and_reports() {
        let mut cfg = toy_config();
        cfg.batch = 0;
        let (xs, ys) = toy_data(16);
        let trainer = unsafe { sgn_trainer_new(&cfg, xs.as_ptr(), ys.as_ptr(), 16) };
        assert!(trainer.is_null());
        let msg = sgn_last_error_message();
        assert!(!msg.is_null());
        let text = unsafe { CStr::from_ptr(msg) }.to_str().unwrap();
        assert!(text.contains("batch"), "{text}");

        let trainer = unsafe { sgn_trainer_new(std::ptr::null(), xs.as_ptr(), ys.as_ptr(), 16) };
        assert!(trainer.is_null());
    }

    #[test]
    fn null_handles_are_rejected_not_crashing() {
        assert_eq!(unsafe { sgn_trainer_step(std::ptr::null_mut()) }, SgnStatus::InvalidPointer);
        let mut out = 0.0;
        assert_eq!(
            unsafe { sgn_trainer_metric(std::ptr::null(), SgnMetric::TrainRisk, &mut out) },
            SgnStatus::InvalidPointer
        );
        unsafe { sgn_trainer_free(std::ptr::null_mut()) };
        assert_eq!(unsafe { sgn_trainer_iteration(std::ptr::null()) }, 0);
    }

    #[test]
    fn bound_calculators_round_trip() {
        let mut lip = [0.0; 3];
        let status = unsafe { sgn_lipschitz_bounds(0, 0, 0.0, 1, 16, 1.5, 2.0, lip.as_mut_ptr()) };
        assert_eq!(status, SgnStatus::Ok);
        assert!(lip[0] > 1.0 && lip[1] > 0.0 && lip[2] > 1.0);

        let mut gap = [0.0; 2];
        let status = unsafe {
            sgn_optimality_gap_bound(1.0, 0.5, 1.0, 8, 1.0, lip[0], lip[1], lip[2], 3.0, 100, gap.as_mut_ptr())
        };
        assert_eq!(status, SgnStatus::Ok);
        assert!(gap[0] > 0.0 && gap[1] > 4.0 * gap[0] - 1e-12);
        // k = 0 violates the calculator contract
        let status = unsafe {
            sgn_optimality_gap_bound(1.0, 0.5, 1.0, 8, 1.0, lip[0], lip[1], lip[2], 3.0, 0, gap.as_mut_ptr())
        };
        assert_eq!(status, SgnStatus::ConfigError);

        let traj: Vec<f64> = (0..100).map(|t| 16.0 * (t as f64 + 1.0)).collect();
        let mut fit = [0.0; 3];
        let status = unsafe { sgn_pe_fit(traj.as_ptr(), traj.len(), 8, 5, fit.as_mut_ptr()) };
        assert_eq!(status, SgnStatus::Ok);
        assert!((fit[1] - 1.0).abs() < 1e-9);

        assert_eq!(sgn_teacher_radius(3.0, 4.0), 5.0);
    }

    #[test]
    fn config_file_commands_work_through_the_ffi() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.cfg");
        std::fs::write(
            &cfg_path,
            "network.depth = 1\nnetwork.width = 8\nnetwork.input_dim = 2\nnetwork.activation = tanh\nloss.name = square\nhyper.eta = 1.0\nhyper.alpha = 0.5\nhyper.lambda = 1.0\nhyper.batch = 4\nhyper.k_max = 3\nhyper.radius = 1.0\ndata.teacher.n = 12\ndata.teacher.v_c_bar = 0.7\ndata.teacher.v_w_bar = 0.7\ndata.teacher.map = anchored\ndata.teacher.m_features = 2000\nseeds = 0\n",
        )
        .unwrap();
        let out = dir.path().join("out");
        let cfg_c = CString::new(cfg_path.to_str().unwrap()).unwrap();
        let out_c = CString::new(out.to_str().unwrap()).unwrap();
        let status =
            unsafe { sgn_run_config(SgnCommand::Train, cfg_c.as_ptr(), out_c.as_ptr(), 1, 0) };
        assert_eq!(status, SgnStatus::Ok);
        assert!(out.join("train_0.csv").exists());
        assert!(out.join("summary.json").exists());

        // a config error surfaces as the config status with a message
        std::fs::write(&cfg_path, "nonsense.key = 1\n").unwrap();
        let status =
            unsafe { sgn_run_config(SgnCommand::Train, cfg_c.as_ptr(), out_c.as_ptr(), 1, 0) };
        assert_eq!(status, SgnStatus::ConfigError);
    }
}
