//! Loss functions (twice-differentiable, strongly convex, locally Lipschitz)
//! and the training dataset container.
//!
//! The regularized logistic loss carries its Tikhonov weight as `reg` rather
//! than lambda: the damping factor of the preconditioner is an unrelated
//! lambda and the two must not be confused.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SgnError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum Loss {
    /// `l(pred, y) = (y - pred)^2 / 2`, nu = 1, beta_K = 1 + K.
    Square,
    /// `l(pred, y) = log(1 + exp(-y * pred)) + (reg/2) * pred^2` for labels
    /// y in {-1, +1}; nu = reg, beta_K = 1 + reg * K.
    RegLogistic { reg: f64 },
}

/// Square loss constructor.
pub fn square_loss() -> Loss {
    Loss::Square
}

/// Regularized logistic loss constructor; `reg` must be positive.
pub fn reg_logistic_loss(reg: f64) -> Result<Loss> {
    if !(reg > 0.0) {
        return Err(SgnError::InvalidParameter(
            "logistic regularizer must be positive".into(),
        ));
    }
    Ok(Loss::RegLogistic { reg })
}

impl Loss {
    pub fn parse(name: &str, reg: Option<f64>) -> Result<Self> {
        match name {
            "square" => Ok(Loss::Square),
            "reg_logistic" => {
                let reg = reg.ok_or_else(|| {
                    SgnError::Config("loss.reg is required for reg_logistic".into())
                })?;
                reg_logistic_loss(reg)
            }
            other => Err(SgnError::Config(format!(
                "unknown loss '{other}' (expected square or reg_logistic)"
            ))),
        }
    }

    pub fn eval(self, pred: f64, y: f64) -> f64 {
        match self {
            Loss::Square => 0.5 * (y - pred) * (y - pred),
            Loss::RegLogistic { reg } => {
                // log(1 + e^u) = max(u, 0) + log1p(e^{-|u|})
                let u = -y * pred;
                u.max(0.0) + (-u.abs()).exp().ln_1p() + 0.5 * reg * pred * pred
            }
        }
    }

    /// Derivative of the loss in its prediction argument.
    pub fn grad(self, pred: f64, y: f64) -> f64 {
        match self {
            Loss::Square => pred - y,
            Loss::RegLogistic { reg } => {
                // -y / (1 + e^{y * pred}) + reg * pred, computed stably
                let u = y * pred;
                let s = if u >= 0.0 {
                    (-u).exp() / (1.0 + (-u).exp())
                } else {
                    1.0 / (1.0 + u.exp())
                };
                -y * s + reg * pred
            }
        }
    }

    /// Strong-convexity modulus nu.
    pub fn nu(self) -> f64 {
        match self {
            Loss::Square => 1.0,
            Loss::RegLogistic { reg } => reg,
        }
    }

    /// Local Lipschitz constant beta_K of the loss on predictions bounded by
    /// `k_bound` in magnitude.
    pub fn lip_on_interval(self, k_bound: f64) -> f64 {
        match self {
            Loss::Square => 1.0 + k_bound,
            Loss::RegLogistic { reg } => 1.0 + reg * k_bound,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::Square => "square",
            Loss::RegLogistic { .. } => "reg_logistic",
        }
    }

    /// Labels must lie in {-1, +1} for the logistic loss.
    pub fn validate_label(self, y: f64) -> Result<()> {
        match self {
            Loss::Square => Ok(()),
            Loss::RegLogistic { .. } => {
                if y == 1.0 || y == -1.0 {
                    Ok(())
                } else {
                    Err(SgnError::InvalidLabel(format!(
                        "logistic loss requires labels in {{-1, +1}}, got {y}"
                    )))
                }
            }
        }
    }
}

/// Supervised training set with inputs normalized to the unit ball and
/// labels bounded by one in magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    xs: Vec<DVector<f64>>,
    ys: Vec<f64>,
}

impl Dataset {
    /// Norm slack tolerated when validating `||x|| <= 1` and `|y| <= 1`.
    pub const NORM_SLACK: f64 = 1e-9;

    pub fn new(xs: Vec<DVector<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(SgnError::EmptyDataset);
        }
        if xs.len() != ys.len() {
            return Err(SgnError::DimensionMismatch(format!(
                "{} inputs but {} labels",
                xs.len(),
                ys.len()
            )));
        }
        let dim = xs[0].len();
        for (i, x) in xs.iter().enumerate() {
            if x.len() != dim {
                return Err(SgnError::DimensionMismatch(format!(
                    "input {i} has dimension {}, expected {dim}",
                    x.len()
                )));
            }
            if x.norm() > 1.0 + Self::NORM_SLACK {
                return Err(SgnError::Data(format!(
                    "input {i} has norm {} > 1",
                    x.norm()
                )));
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(SgnError::Data(format!("input {i} has non-finite entries")));
            }
        }
        for (i, y) in ys.iter().enumerate() {
            if !y.is_finite() || y.abs() > 1.0 + Self::NORM_SLACK {
                return Err(SgnError::Data(format!("label {i} is {y}, must be in [-1, 1]")));
            }
        }
        Ok(Dataset { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.xs[0].len()
    }

    pub fn x(&self, i: usize) -> &DVector<f64> {
        &self.xs[i]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.xs
    }

    pub fn labels(&self) -> &[f64] {
        &self.ys
    }

    /// Copy of the dataset with sample `i` replaced.
    pub fn with_replaced(&self, i: usize, x: DVector<f64>, y: f64) -> Result<Self> {
        if i >= self.len() {
            return Err(SgnError::InvalidParameter(format!(
                "replacement index {i} out of range for n = {}",
                self.len()
            )));
        }
        let mut xs = self.xs.clone();
        let mut ys = self.ys.clone();
        xs[i] = x;
        ys[i] = y;
        Dataset::new(xs, ys)
    }

    pub fn check_labels(&self, loss: Loss) -> Result<()> {
        for &y in &self.ys {
            loss.validate_label(y)?;
        }
        Ok(())
    }
}

/// Mean per-sample loss of the predictions over the dataset.
pub fn empirical_risk(loss: Loss, preds: &[f64], data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(SgnError::EmptyDataset);
    }
    if preds.len() != data.len() {
        return Err(SgnError::DimensionMismatch(format!(
            "{} predictions for {} samples",
            preds.len(),
            data.len()
        )));
    }
    let sum: f64 = preds
        .iter()
        .zip(data.labels())
        .map(|(&p, &y)| loss.eval(p, y))
        .sum();
    Ok(sum / data.len() as f64)
}
