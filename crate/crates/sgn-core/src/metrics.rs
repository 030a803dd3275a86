//! CSV metrics emission and run summaries.
//!
//! The per-iteration training schema is
//! `iteration,train_risk,minibatch_loss,logdet_ratio,lambda_min,grad_norm,proj_active,delta_h_norm,gap_bound_kappa,wall_time_ms`
//! with one row per iteration plus the initial state. Cells that do not
//! apply (the initial row's batch quantities, the stability-only
//! `delta_h_norm` on plain training runs) stay empty. Stability runs append
//! `delta_l2,h_diff_norm,jstar_hit,batch_indices` and fill `delta_h_norm`
//! with the midpoint-metric norm of the parameter gap.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::bounds::{LipschitzBounds, PeFit};
use crate::error::Result;
use crate::optimizer::TrajectoryRecord;
use crate::stability::StabilityLog;

pub const TRAIN_CSV_HEADER: &str = "iteration,train_risk,minibatch_loss,logdet_ratio,lambda_min,grad_norm,proj_active,delta_h_norm,gap_bound_kappa,wall_time_ms";

pub const STABILITY_CSV_HEADER: &str = "iteration,train_risk,minibatch_loss,logdet_ratio,lambda_min,grad_norm,proj_active,delta_h_norm,gap_bound_kappa,wall_time_ms,delta_l2,h_diff_norm,jstar_hit,batch_indices";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write one training trajectory; `kappas[i]` is the optimality-gap bound
/// attached to row i (none for the initial row).
pub fn write_train_csv(
    path: &Path,
    record: &TrajectoryRecord,
    kappas: &[Option<f64>],
) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "{TRAIN_CSV_HEADER}")?;
    for (i, row) in record.rows.iter().enumerate() {
        let kappa = kappas.get(i).copied().flatten();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.iteration,
            row.train_risk,
            fmt_opt(row.minibatch_loss),
            row.logdet_ratio,
            row.lambda_min,
            fmt_opt(row.grad_norm),
            row.proj_active as u8,
            "", // delta_h_norm: stability runs only
            fmt_opt(kappa),
            row.wall_time_ms,
        )?;
    }
    Ok(())
}

/// Which trainer of a coupled pair a stability CSV describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairSide {
    A,
    B,
}

/// Write one side of a coupled stability run. The shared columns
/// (delta_h_norm, delta_l2, h_diff_norm, jstar_hit, batch_indices) are
/// identical across the two files by construction.
pub fn write_stability_csv(path: &Path, log: &StabilityLog, side: PairSide) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "{STABILITY_CSV_HEADER}")?;
    for row in &log.rows {
        let (risk, minibatch, grad_norm, proj, logdet, lambda_min) = match side {
            PairSide::A => (
                row.risk_a,
                row.minibatch_a,
                row.grad_norm_a,
                row.proj_a,
                row.logdet_a,
                row.lambda_min_a,
            ),
            PairSide::B => (
                row.risk_b,
                row.minibatch_b,
                row.grad_norm_b,
                row.proj_b,
                row.logdet_b,
                row.lambda_min_b,
            ),
        };
        let indices = row
            .indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(";");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.iteration,
            risk,
            fmt_opt(minibatch),
            logdet,
            lambda_min,
            fmt_opt(grad_norm),
            proj as u8,
            row.delta_hbar,
            "", // gap_bound_kappa: training runs only
            row.wall_time_ms,
            row.delta_l2,
            row.h_diff_norm,
            row.jstar_hit as u8,
            indices,
        )?;
    }
    Ok(())
}

/// Per-seed outcome of a training run.
#[derive(Clone, Debug, Serialize)]
pub struct SeedTrainSummary {
    pub seed: u64,
    pub initial_risk: f64,
    pub final_risk: f64,
    pub final_polyak_risk: f64,
    pub final_logdet_ratio: f64,
    pub final_lambda_min: f64,
    pub reference_risk: f64,
    pub kappa_final: f64,
    /// Running-average optimality gap <= kappa at every k >= 10.
    pub bound_satisfied: bool,
    pub prop1_satisfied: bool,
    pub lip: LipschitzBounds,
    pub gamma: f64,
    pub xi: f64,
    pub eta: f64,
    pub lambda: f64,
    pub projection_activations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainSummary {
    pub command: String,
    pub n: usize,
    pub param_count: usize,
    pub data_scale_factor: f64,
    pub warnings: Vec<String>,
    pub per_seed: Vec<SeedTrainSummary>,
    pub seed_mean_final_risk: f64,
    pub seed_mean_final_polyak_risk: f64,
    pub bound_satisfied: bool,
    pub prop1_satisfied: bool,
}

/// Per-seed outcome of a coupled stability run.
#[derive(Clone, Debug, Serialize)]
pub struct SeedStabilitySummary {
    pub seed: u64,
    pub final_delta_hbar: f64,
    pub mean_delta_hbar: f64,
    pub final_h_diff_norm: f64,
    pub jstar_hits: usize,
    pub lemma2_value: f64,
    pub probe_loss_difference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityAggregate {
    pub lambda: f64,
    pub kappa_final: f64,
    pub seed_mean_final_delta_hbar: f64,
    pub seed_se_final_delta_hbar: f64,
    pub seed_mean_curve: Vec<f64>,
    pub growth_slope: Option<f64>,
    pub h_diff_bound: f64,
    pub seed_mean_final_h_diff: f64,
    pub pe_fit: Option<PeFit>,
    pub pe_fit_error: Option<String>,
    pub per_seed: Vec<SeedStabilitySummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilitySummary {
    pub command: String,
    pub n: usize,
    pub param_count: usize,
    pub j_star: usize,
    pub warnings: Vec<String>,
    pub hypotheses_met: bool,
    pub sweeps: Vec<StabilityAggregate>,
    /// Final-delta means ordered the same way as the lambda sweep.
    pub lambda_ordering_monotone: Option<bool>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| crate::error::SgnError::Data(format!("cannot serialize summary: {e}")))?;
    writeln!(out)?;
    Ok(())
}

/// Mean and standard error of a sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of ln(value_k) against ln(k) over k >= from,
/// skipping nonpositive values; none when fewer than two usable points.
pub fn loglog_slope(values: &[f64], from: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .skip(from.max(1))
        .filter(|(_, &v)| v > 0.0)
        .map(|(k, &v)| ((k as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_basics() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - (1.0_f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let values: Vec<f64> = (0..100).map(|k| 3.0 * (k as f64).powf(1.5)).collect();
        let slope = loglog_slope(&values, 10).unwrap();
        assert!((slope - 1.5).abs() < 1e-9);
        assert!(loglog_slope(&[0.0, 0.0], 0).is_none());
    }
}
