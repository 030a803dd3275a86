//! Command implementations behind the `sgn-lab` binary: dataset ingestion,
//! per-seed experiment orchestration, metrics emission. All randomness
//! derives from the config seeds; seed jobs are independent and run
//! concurrently up to a jobs limit.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::activation::Activation;
use crate::bounds::{
    self, hyperparams_check, lipschitz_bounds, logdet_growth_bounds, measure_mu0,
    optimality_gap_bound, pe_fit, preconditioner_drift_bound, stability_constants,
    stability_growth_bound, LipschitzBounds,
};
use crate::config::{DataSpec, InitKind, MapKind, NetworkSection, RunConfig, TeacherSpec};
use crate::error::{Result, SgnError};
use crate::loss::{Dataset, Loss};
use crate::metrics::{
    loglog_slope, mean_and_se, write_json, write_stability_csv, write_train_csv, PairSide,
    SeedStabilitySummary, SeedTrainSummary, StabilityAggregate, StabilitySummary, TrainSummary,
};
use crate::network::{forward, GeometrySpec, NetworkConfig, NetworkParams};
use crate::optimizer::{
    linearized_reference_solution, symmetric_init, Hyperparams, Trainer, TrajectoryRecord,
};
use crate::stability::{
    make_neighbor, probe_loss_difference, run_pair, stability_to_generalization, StabilityLog,
};
use crate::teacher::{sample_unit_ball_inputs, teacher_dataset, NtkTeacher, TransportMap};

/// Flags shared by every subcommand.
#[derive(Clone, Debug)]
pub struct CliOptions {
    pub out_dir: PathBuf,
    pub jobs: usize,
    /// Skip one header line when reading CSV datasets.
    pub csv_has_header: bool,
}

/// Deterministic derivation of purpose-specific seeds from a config seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 over the combined value
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_INIT: u64 = 1;
const STREAM_TEACHER: u64 = 2;
const STREAM_TRAIN_INPUTS: u64 = 3;
const STREAM_HELDOUT_INPUTS: u64 = 4;
const STREAM_SAMPLER: u64 = 5;
const STREAM_REPLACEMENT: u64 = 6;
const STREAM_PROBES: u64 = 7;
const STREAM_MU0: u64 = 8;

pub fn network_config(section: &NetworkSection) -> Result<NetworkConfig> {
    NetworkConfig::new(section.depth, section.width, section.input_dim)
}

pub fn build_init(section: &NetworkSection, seed: u64) -> Result<NetworkParams> {
    let cfg = network_config(section)?;
    match section.init {
        InitKind::Symmetric => symmetric_init(&cfg, derive_seed(seed, STREAM_INIT)),
        InitKind::Normal => {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(
                derive_seed(seed, STREAM_INIT),
            );
            NetworkParams::random_normal(cfg, &mut rng)
        }
    }
}

fn transport_map(spec: &TeacherSpec, input_dim: usize) -> TransportMap {
    match spec.map {
        MapKind::Zero => TransportMap::Zero,
        MapKind::Constant => TransportMap::constant(spec.v_c_bar, spec.v_w_bar, input_dim),
        MapKind::Anchored => TransportMap::anchored(spec.v_c_bar, spec.v_w_bar, input_dim),
    }
}

pub struct LoadedData {
    pub train: Dataset,
    pub heldout: Option<Dataset>,
    pub scale_factor: f64,
    pub teacher: Option<NtkTeacher>,
}

/// Load or synthesize the dataset for one seed.
pub fn load_data(
    cfg: &RunConfig,
    opts: &CliOptions,
    act: Activation,
    seed: u64,
) -> Result<LoadedData> {
    match &cfg.data {
        DataSpec::Csv { path } => {
            let (train, scale) =
                read_csv_dataset(path, cfg.network.input_dim, opts.csv_has_header)?;
            train.check_labels(cfg.loss)?;
            Ok(LoadedData {
                train,
                heldout: None,
                scale_factor: scale,
                teacher: None,
            })
        }
        DataSpec::Teacher(spec) => {
            let d = cfg.network.input_dim;
            let teacher = NtkTeacher::new(
                d,
                spec.m_features,
                transport_map(spec, d),
                act,
                derive_seed(seed, STREAM_TEACHER),
            )?;
            let train = teacher_dataset(&teacher, spec.n, derive_seed(seed, STREAM_TRAIN_INPUTS))?;
            train.check_labels(cfg.loss)?;
            let heldout = if spec.heldout > 0 {
                Some(teacher_dataset(
                    &teacher,
                    spec.heldout,
                    derive_seed(seed, STREAM_HELDOUT_INPUTS),
                )?)
            } else {
                None
            };
            Ok(LoadedData {
                train,
                heldout,
                scale_factor: 1.0,
                teacher: Some(teacher),
            })
        }
    }
}

/// Read a dataset of d feature columns followed by one label column.
/// Inputs are rescaled by the global maximum norm when it exceeds one; the
/// scale factor is reported so runs remain reconstructible.
pub fn read_csv_dataset(
    path: &Path,
    input_dim: usize,
    has_header: bool,
) -> Result<(Dataset, f64)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SgnError::Data(format!("cannot read dataset '{}': {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if has_header && lineno == 0 {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != input_dim + 1 {
            return Err(SgnError::Data(format!(
                "line {}: expected {} columns ({} features + label), got {}",
                lineno + 1,
                input_dim + 1,
                input_dim,
                fields.len()
            )));
        }
        let mut x = DVector::zeros(input_dim);
        for (j, f) in fields[..input_dim].iter().enumerate() {
            x[j] = f
                .parse::<f64>()
                .map_err(|_| SgnError::Data(format!("line {}: '{f}' is not a number", lineno + 1)))?;
        }
        let y = fields[input_dim].parse::<f64>().map_err(|_| {
            SgnError::Data(format!(
                "line {}: '{}' is not a number",
                lineno + 1,
                fields[input_dim]
            ))
        })?;
        xs.push(x);
        ys.push(y);
    }
    if xs.is_empty() {
        return Err(SgnError::EmptyDataset);
    }
    let max_norm = xs.iter().map(|x| x.norm()).fold(0.0_f64, f64::max);
    let scale = if max_norm > 1.0 { max_norm } else { 1.0 };
    if scale > 1.0 {
        for x in &mut xs {
            *x /= scale;
        }
    }
    Ok((Dataset::new(xs, ys)?, scale))
}

fn full_risk(
    cfg: NetworkConfig,
    w: &DVector<f64>,
    act: Activation,
    loss: Loss,
    data: &Dataset,
) -> Result<f64> {
    let params = NetworkParams::from_flat(cfg, w)?;
    let preds: Vec<f64> = data
        .inputs()
        .iter()
        .map(|x| forward(&params, act, x))
        .collect::<Result<_>>()?;
    crate::loss::empirical_risk(loss, &preds, data)
}

struct SeedRun {
    record: TrajectoryRecord,
    summary: SeedTrainSummary,
    kappas: Vec<Option<f64>>,
}

fn run_train_seed(cfg: &RunConfig, opts: &CliOptions, seed: u64) -> Result<SeedRun> {
    let act = cfg.network.activation;
    let loaded = load_data(cfg, opts, act, seed)?;
    let init = build_init(&cfg.network, seed)?;
    let geom = GeometrySpec::new(&init, cfg.hyper.radius)?;
    let lip = lipschitz_bounds(act, cfg.loss, &geom);
    let hyper = cfg.hyper.resolve(lip.lip_phi);
    let net_cfg = geom.config();

    let trainer = Trainer::new(
        act,
        cfg.loss,
        hyper,
        geom.clone(),
        loaded.train.clone(),
        derive_seed(seed, STREAM_SAMPLER),
        &init,
        cfg.telemetry.train_options(),
    )?;
    let record = trainer.run()?;

    // best-in-ball risk proxy: linearized reference plus every point the run
    // itself visited
    let w_ref = linearized_reference_solution(&init, &loaded.train, act, &geom, 1e-10)?;
    let mut reference_risk = full_risk(net_cfg, &w_ref, act, cfg.loss, &loaded.train)?;
    for row in &record.rows {
        reference_risk = reference_risk.min(row.train_risk).min(row.polyak_risk);
    }

    let mut kappas = vec![None; record.rows.len()];
    let mut bound_satisfied = true;
    let mut running_gap_sum = 0.0;
    for k in 1..record.rows.len() {
        let bound = optimality_gap_bound(&hyper, &lip, hyper.radius, record.rows[k].logdet_ratio, k)?;
        kappas[k] = Some(bound.kappa);
        // running mean of gaps over iterates w_0 .. w_{k-1}
        running_gap_sum += record.rows[k - 1].train_risk - reference_risk;
        if k >= 10 && running_gap_sum / k as f64 > bound.kappa {
            bound_satisfied = false;
        }
    }

    let mut logdet_bound_satisfied = true;
    for k in 1..record.rows.len() {
        // row k holds H_{k-1}
        let growth = logdet_growth_bounds(
            &hyper,
            &lip,
            net_cfg.param_count(),
            k - 1,
            loaded.train.len().min(net_cfg.param_count()) as f64,
        );
        if record.rows[k].logdet_ratio > growth.worst_case + 1e-6 {
            logdet_bound_satisfied = false;
        }
    }

    let last = record.rows.last().expect("at least the initial row");
    let kappa_final = kappas.last().copied().flatten().unwrap_or(f64::INFINITY);
    let summary = SeedTrainSummary {
        seed,
        initial_risk: record.rows[0].train_risk,
        final_risk: last.train_risk,
        final_polyak_risk: last.polyak_risk,
        final_logdet_ratio: last.logdet_ratio,
        final_lambda_min: last.lambda_min,
        reference_risk,
        kappa_final,
        bound_satisfied,
        prop1_satisfied: logdet_bound_satisfied,
        lip,
        gamma: hyper.gamma(lip.lip_phi),
        xi: hyper.xi(),
        eta: hyper.eta,
        lambda: hyper.lambda,
        projection_activations: record.rows.iter().filter(|r| r.proj_active).count(),
    };
    Ok(SeedRun {
        record,
        summary,
        kappas,
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SgnError::Config(format!("cannot build a {jobs}-thread pool: {e}")))
}

pub fn cmd_train(cfg: &RunConfig, opts: &CliOptions) -> Result<TrainSummary> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let pool = thread_pool(opts.jobs)?;
    let runs: Vec<Result<SeedRun>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| run_train_seed(cfg, opts, seed))
            .collect()
    });
    let mut per_seed = Vec::new();
    let mut scale_factor = 1.0;
    for (seed, run) in cfg.seeds.iter().zip(runs) {
        let run = run?;
        let path = opts.out_dir.join(format!("train_{seed}.csv"));
        write_train_csv(&path, &run.record, &run.kappas)?;
        per_seed.push(run.summary);
    }
    if let DataSpec::Csv { .. } = cfg.data {
        // the scale factor is seed-independent for file-backed data
        let loaded = load_data(cfg, opts, cfg.network.activation, cfg.seeds[0])?;
        scale_factor = loaded.scale_factor;
    }

    let warnings = {
        let first = &per_seed[0];
        let hyper = Hyperparams {
            eta: first.eta,
            alpha: cfg.hyper.alpha,
            lambda: first.lambda,
            batch: cfg.hyper.batch,
            radius: cfg.hyper.radius,
            k_max: cfg.hyper.k_max,
        };
        hyper.warnings(cfg.loss.nu())
    };

    let (mean_final, _) = mean_and_se(&per_seed.iter().map(|s| s.final_risk).collect::<Vec<_>>());
    let (mean_polyak, _) = mean_and_se(
        &per_seed
            .iter()
            .map(|s| s.final_polyak_risk)
            .collect::<Vec<_>>(),
    );
    let summary = TrainSummary {
        command: "train".into(),
        n: dataset_size(cfg, opts)?,
        param_count: network_config(&cfg.network)?.param_count(),
        data_scale_factor: scale_factor,
        warnings,
        bound_satisfied: per_seed.iter().all(|s| s.bound_satisfied),
        prop1_satisfied: per_seed.iter().all(|s| s.prop1_satisfied),
        seed_mean_final_risk: mean_final,
        seed_mean_final_polyak_risk: mean_polyak,
        per_seed,
    };
    write_json(&opts.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

struct StabilitySeedRun {
    log: StabilityLog,
    summary: SeedStabilitySummary,
    lambda_min_a: Vec<f64>,
}

fn run_stability_seed(
    cfg: &RunConfig,
    opts: &CliOptions,
    lambda: Option<f64>,
    seed: u64,
) -> Result<(StabilitySeedRun, LipschitzBounds, Hyperparams)> {
    let st = cfg
        .stability
        .as_ref()
        .ok_or_else(|| SgnError::Config("stability.j_star is required for this command".into()))?;
    let act = cfg.network.activation;
    let loaded = load_data(cfg, opts, act, seed)?;
    let init = build_init(&cfg.network, seed)?;
    let geom = GeometrySpec::new(&init, cfg.hyper.radius)?;
    let lip = lipschitz_bounds(act, cfg.loss, &geom);
    let hyper = match lambda {
        Some(l) => cfg.hyper.resolve_with_lambda(lip.lip_phi, l),
        None => cfg.hyper.resolve(lip.lip_phi),
    };

    // replacement sample from its own stream; teacher labels when available
    let rep_seed = derive_seed(st.replacement_seed, derive_seed(seed, STREAM_REPLACEMENT));
    let x_new = sample_unit_ball_inputs(1, cfg.network.input_dim, rep_seed)
        .pop()
        .expect("one sample requested");
    let y_new = match (&loaded.teacher, cfg.loss) {
        (_, Loss::RegLogistic { .. }) => {
            if rep_seed % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        }
        (Some(t), _) => t.eval(&x_new)?,
        (None, _) => 0.0,
    };
    let pair = make_neighbor(
        &loaded.train,
        st.j_star,
        x_new,
        y_new,
        derive_seed(seed, STREAM_SAMPLER),
    )?;
    let log = run_pair(
        &pair,
        act,
        cfg.loss,
        hyper,
        &init,
        cfg.hyper.radius,
        cfg.telemetry.train_options(),
    )?;

    let lemma2_value = stability_to_generalization(&log, &lip, hyper.lambda);
    let polyak_a = NetworkParams::from_flat(geom.config(), &log.polyak_a)?;
    let polyak_b = NetworkParams::from_flat(geom.config(), &log.polyak_b)?;
    let probe = probe_loss_difference(
        &polyak_a,
        &polyak_b,
        act,
        cfg.loss,
        1_000,
        derive_seed(seed, STREAM_PROBES),
    )?;
    let lambda_min_a: Vec<f64> = log.rows.iter().skip(1).map(|r| r.lambda_min_a).collect();
    let summary = SeedStabilitySummary {
        seed,
        final_delta_hbar: log.final_delta_hbar(),
        mean_delta_hbar: log.mean_delta_hbar(),
        final_h_diff_norm: log.rows.last().map(|r| r.h_diff_norm).unwrap_or(0.0),
        jstar_hits: log.rows.iter().filter(|r| r.jstar_hit).count(),
        lemma2_value,
        probe_loss_difference: probe,
    };
    Ok((
        StabilitySeedRun {
            log,
            summary,
            lambda_min_a,
        },
        lip,
        hyper,
    ))
}

pub fn cmd_stability(cfg: &RunConfig, opts: &CliOptions) -> Result<StabilitySummary> {
    let st = cfg
        .stability
        .as_ref()
        .ok_or_else(|| SgnError::Config("stability.j_star is required for this command".into()))?;
    std::fs::create_dir_all(&opts.out_dir)?;
    let n_data = dataset_size(cfg, opts)?;
    let lambdas: Vec<Option<f64>> = if st.lambda_sweep.is_empty() {
        vec![None]
    } else {
        st.lambda_sweep.iter().map(|&l| Some(l)).collect()
    };

    let pool = thread_pool(opts.jobs)?;
    let mut sweeps = Vec::new();
    let mut warnings = Vec::new();
    let mut hypotheses_met = true;
    for (li, &lambda) in lambdas.iter().enumerate() {
        let runs: Vec<Result<(StabilitySeedRun, LipschitzBounds, Hyperparams)>> =
            pool.install(|| {
                cfg.seeds
                    .par_iter()
                    .map(|&seed| run_stability_seed(cfg, opts, lambda, seed))
                    .collect()
            });

        let mut per_seed = Vec::new();
        let mut finals = Vec::new();
        let mut final_h_diffs = Vec::new();
        let mut drift_bounds = Vec::new();
        let mut curves: Vec<Vec<f64>> = Vec::new();
        let mut pe: Option<bounds::PeFit> = None;
        let mut pe_error = None;
        let mut kappa_final = f64::NAN;
        let mut hyper_used = None;
        for (&seed, run) in cfg.seeds.iter().zip(runs) {
            let (run, lip, hyper) = run?;
            let tag = if lambdas.len() > 1 {
                format!("stability_l{li}_{seed}")
            } else {
                format!("stability_{seed}")
            };
            write_stability_csv(
                &opts.out_dir.join(format!("{tag}_a.csv")),
                &run.log,
                PairSide::A,
            )?;
            write_stability_csv(
                &opts.out_dir.join(format!("{tag}_b.csv")),
                &run.log,
                PairSide::B,
            )?;
            finals.push(run.summary.final_delta_hbar);
            final_h_diffs.push(run.summary.final_h_diff_norm);
            drift_bounds.push(preconditioner_drift_bound(
                hyper.alpha,
                hyper.batch,
                run.log.rows.len().saturating_sub(1),
                n_data,
                hyper.radius,
                &lip,
            ));
            curves.push(run.log.rows.iter().map(|r| r.delta_hbar).collect());
            if seed == cfg.seeds[0] {
                // excitation fit from the first seed's lambda_min telemetry
                let gram_mins: Vec<f64> = run
                    .lambda_min_a
                    .iter()
                    .map(|&l| (l - hyper.lambda) / hyper.alpha)
                    .collect();
                let burn_in = gram_mins.len() / 4;
                match pe_fit(&gram_mins, hyper.batch, burn_in) {
                    Ok(fit) => pe = Some(fit),
                    Err(e) => pe_error = Some(e.to_string()),
                }
                kappa_final = optimality_gap_bound(
                    &hyper,
                    &lip,
                    hyper.radius,
                    run.log.rows.last().map(|r| r.logdet_a).unwrap_or(0.0),
                    hyper.k_max.max(1),
                )?
                .kappa;
                warnings.extend(hyper.warnings(cfg.loss.nu()));
                hyper_used = Some((hyper, lip));
            }
            per_seed.push(run.summary);
        }

        // seed-mean delta curve
        let rows = curves.iter().map(|c| c.len()).min().unwrap_or(0);
        let mean_curve: Vec<f64> = (0..rows)
            .map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64)
            .collect();
        let (mean_final, se_final) = mean_and_se(&finals);
        let (mean_h_diff, _) = mean_and_se(&final_h_diffs);
        let (mean_drift_bound, _) = mean_and_se(&drift_bounds);

        if let Some((hyper, lip)) = &hyper_used {
            // hypothesis check with the measured singular-value floor of the
            // first seed
            let act = cfg.network.activation;
            let loaded = load_data(cfg, opts, act, cfg.seeds[0])?;
            let init = build_init(&cfg.network, cfg.seeds[0])?;
            let geom = GeometrySpec::new(&init, cfg.hyper.radius)?;
            let mu0 = measure_mu0(
                &init,
                &geom,
                &loaded.train,
                act,
                cfg.mu0_probes,
                derive_seed(cfg.seeds[0], STREAM_MU0),
            )?;
            let sc = stability_constants(hyper.batch, lip, cfg.loss.nu(), mu0);
            hypotheses_met &= hyperparams_check(hyper, &sc).met;
        }

        sweeps.push(StabilityAggregate {
            lambda: hyper_used.map(|(h, _)| h.lambda).unwrap_or(f64::NAN),
            kappa_final,
            seed_mean_final_delta_hbar: mean_final,
            seed_se_final_delta_hbar: se_final,
            growth_slope: loglog_slope(&mean_curve, mean_curve.len() / 2),
            seed_mean_curve: mean_curve,
            h_diff_bound: mean_drift_bound,
            seed_mean_final_h_diff: mean_h_diff,
            pe_fit: pe,
            pe_fit_error: pe_error,
            per_seed,
        });
    }

    let lambda_ordering_monotone = if sweeps.len() >= 2 {
        Some(
            sweeps
                .windows(2)
                .all(|w| w[1].seed_mean_final_delta_hbar < w[0].seed_mean_final_delta_hbar),
        )
    } else {
        None
    };

    let summary = StabilitySummary {
        command: "stability".into(),
        n: n_data,
        param_count: network_config(&cfg.network)?.param_count(),
        j_star: st.j_star,
        warnings,
        hypotheses_met,
        sweeps,
        lambda_ordering_monotone,
    };
    write_json(&opts.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Bound table printed by the bounds subcommand.
pub fn cmd_bounds(cfg: &RunConfig, opts: &CliOptions, out: &mut dyn std::io::Write) -> Result<()> {
    let act = cfg.network.activation;
    let seed = cfg.seeds[0];
    let loaded = load_data(cfg, opts, act, seed)?;
    let init = build_init(&cfg.network, seed)?;
    let geom = GeometrySpec::new(&init, cfg.hyper.radius)?;
    let lip = lipschitz_bounds(act, cfg.loss, &geom);
    let hyper = cfg.hyper.resolve(lip.lip_phi);
    let net_cfg = geom.config();
    let k = cfg.bounds_k.unwrap_or(cfg.hyper.k_max).max(1);
    let nu = cfg.loss.nu();

    writeln!(out, "geometry (seed {seed}):")?;
    writeln!(
        out,
        "  p = {}, kappa0 = {:.6}, zeta0 = {:.6}, kappa_C = {:.6}, zeta_C = {:.6}, r_C = {:.6}",
        net_cfg.param_count(),
        geom.kappa0(),
        geom.zeta0(),
        geom.kappa_c(),
        geom.zeta_c(),
        geom.radius()
    )?;
    writeln!(out, "lipschitz constants:")?;
    writeln!(out, "  Lip_phi      = {:.6}", lip.lip_phi)?;
    writeln!(out, "  Lip_grad_phi = {:.6}", lip.lip_grad_phi)?;
    writeln!(out, "  Lip_loss     = {:.6}", lip.lip_loss)?;
    writeln!(
        out,
        "  prediction bound K = {:.6}",
        bounds::prediction_bound(act, &geom)
    )?;
    writeln!(
        out,
        "hyperparameters: eta = {:.6}, alpha = {:.6}, lambda = {:.6}, B = {}, xi = {:.6}, gamma = {:.6}",
        hyper.eta,
        hyper.alpha,
        hyper.lambda,
        hyper.batch,
        hyper.xi(),
        hyper.gamma(lip.lip_phi)
    )?;
    for w in hyper.warnings(nu) {
        writeln!(out, "  warning: {w}")?;
    }

    let growth = logdet_growth_bounds(
        &hyper,
        &lip,
        net_cfg.param_count(),
        k,
        loaded.train.len().min(net_cfg.param_count()) as f64,
    );
    writeln!(out, "log-det growth ceilings at k = {k}:")?;
    writeln!(out, "  worst case = {:.6}", growth.worst_case)?;
    writeln!(
        out,
        "  rank aware = {:.6} (intrinsic rank capped at min(n, p) = {})",
        growth.rank_aware,
        loaded.train.len().min(net_cfg.param_count())
    )?;

    let gap = optimality_gap_bound(&hyper, &lip, hyper.radius, growth.worst_case, k)?;
    writeln!(
        out,
        "optimality-gap ceiling at k = {k} (worst-case log-det): kappa = {:.6}, polyak = {:.6}",
        gap.kappa, gap.polyak
    )?;

    let mu0 = measure_mu0(
        &init,
        &geom,
        &loaded.train,
        act,
        cfg.mu0_probes,
        derive_seed(seed, STREAM_MU0),
    )?;
    let sc = stability_constants(hyper.batch, &lip, nu, mu0);
    writeln!(out, "stability constants:")?;
    writeln!(out, "  epsilon = {:.6}", sc.epsilon)?;
    writeln!(
        out,
        "  Lambda = {:.6} (co-coercivity form; {:.6} in the plain form)",
        sc.lambda_cap, sc.lambda_cap_theorem
    )?;
    writeln!(out, "  mu0 (measured over {} probes) = {:.6}", cfg.mu0_probes, mu0)?;
    writeln!(out, "  M = {:.6}", sc.big_m)?;

    let check = hyperparams_check(&hyper, &sc);
    writeln!(
        out,
        "step-size/damping hypotheses: eta/lambda <= 1/Lambda: {}; alpha/eta <= mu0^2 nu^2 / (8B(Lambda+eps)): {}",
        check.eta_condition, check.alpha_condition
    )?;
    if !check.met {
        writeln!(out, "  stability hypotheses unmet")?;
    }

    let lambda_t = vec![hyper.lambda; k];
    let growth_bound = stability_growth_bound(&hyper, &sc, &lip, loaded.train.len(), &lambda_t, k)?;
    writeln!(
        out,
        "stability growth terms at k = {k} (constant-free, lambda_t = lambda):"
    )?;
    writeln!(out, "  non-expansivity        = {:.6e}", growth_bound.non_expansivity)?;
    writeln!(
        out,
        "  preconditioner mismatch = {:.6e}",
        growth_bound.preconditioner_mismatch
    )?;
    writeln!(out, "  gradient mismatch      = {:.6e}", growth_bound.gradient_mismatch)?;
    writeln!(out, "  total                  = {:.6e}", growth_bound.total)?;
    Ok(())
}

/// Generate a teacher-labeled dataset CSV (features then label, no header).
pub fn cmd_teacher_gen(cfg: &RunConfig, opts: &CliOptions) -> Result<()> {
    if !matches!(cfg.data, DataSpec::Teacher(_)) {
        return Err(SgnError::Config(
            "teacher-gen needs a data.teacher.* section, not data.path".into(),
        ));
    }
    std::fs::create_dir_all(&opts.out_dir)?;
    let act = cfg.network.activation;
    let seed = cfg.seeds[0];
    let loaded = load_data(cfg, opts, act, seed)?;
    let write = |name: &str, data: &Dataset| -> Result<()> {
        let mut out = std::fs::File::create(opts.out_dir.join(name))?;
        for i in 0..data.len() {
            let x = data.x(i);
            for j in 0..x.len() {
                write!(out, "{},", x[j])?;
            }
            writeln!(out, "{}", data.y(i))?;
        }
        Ok(())
    };
    write("teacher_train.csv", &loaded.train)?;
    if let Some(heldout) = &loaded.heldout {
        write("teacher_heldout.csv", heldout)?;
    }
    Ok(())
}

/// Exit code for a failed run: 2 config, 3 data, 4 numerical.
pub fn exit_code(err: &SgnError) -> i32 {
    match err {
        SgnError::Config(_) | SgnError::InvalidParameter(_) => 2,
        SgnError::Data(_)
        | SgnError::InvalidLabel(_)
        | SgnError::EmptyDataset
        | SgnError::EmptyBatch
        | SgnError::DimensionMismatch(_)
        | SgnError::Io(_) => 3,
        SgnError::NonFinite { .. }
        | SgnError::NumericalBreakdown(_)
        | SgnError::NotPositiveDefinite(_) => 4,
    }
}

/// Fill the n field for CSV-backed train summaries (the loader knows it only
/// after reading the file).
pub fn dataset_size(cfg: &RunConfig, opts: &CliOptions) -> Result<usize> {
    match &cfg.data {
        DataSpec::Teacher(t) => Ok(t.n),
        DataSpec::Csv { path } => {
            let (data, _) = read_csv_dataset(path, cfg.network.input_dim, opts.csv_has_header)?;
            Ok(data.len())
        }
    }
}
