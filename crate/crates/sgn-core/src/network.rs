//! Deep feedforward network with 1/sqrt(m) output scaling, exact per-sample
//! gradients, and the geometry constants attached to a trust ball around an
//! anchor parameter.
//!
//! Layer recursion: `x^(h) = (1/sqrt(m)) * sigma(W^(h) x^(h-1))` for
//! h = 1..H, prediction `phi = c . x^(H)`. The first weight matrix is m x d,
//! the rest are m x m.
//!
//! Parameters flatten in the fixed order (W^(1) row-major, ..., W^(H)
//! row-major, c); every module in the crate indexes the flat vector this way.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::activation::Activation;
use crate::error::{Result, SgnError};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Depth H >= 1 (number of hidden layers).
    pub depth: usize,
    /// Width m >= 1 of every hidden layer.
    pub width: usize,
    /// Input dimension d >= 1.
    pub input_dim: usize,
}

impl NetworkConfig {
    pub fn new(depth: usize, width: usize, input_dim: usize) -> Result<Self> {
        let cfg = NetworkConfig {
            depth,
            width,
            input_dim,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(SgnError::InvalidParameter("depth must be >= 1".into()));
        }
        if self.width < 1 {
            return Err(SgnError::InvalidParameter("width must be >= 1".into()));
        }
        if self.input_dim < 1 {
            return Err(SgnError::InvalidParameter("input_dim must be >= 1".into()));
        }
        Ok(())
    }

    /// Total parameter count p = m*d + (H-1)*m^2 + m.
    pub fn param_count(&self) -> usize {
        self.width * self.input_dim
            + (self.depth - 1) * self.width * self.width
            + self.width
    }
}

/// All layer weights plus the output vector, in the shapes of the recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    cfg: NetworkConfig,
    layers: Vec<DMatrix<f64>>,
    output: DVector<f64>,
}

impl NetworkParams {
    pub fn new(cfg: NetworkConfig, layers: Vec<DMatrix<f64>>, output: DVector<f64>) -> Result<Self> {
        cfg.validate()?;
        if layers.len() != cfg.depth {
            return Err(SgnError::DimensionMismatch(format!(
                "expected {} layers, got {}",
                cfg.depth,
                layers.len()
            )));
        }
        for (h, w) in layers.iter().enumerate() {
            let expected_cols = if h == 0 { cfg.input_dim } else { cfg.width };
            if w.nrows() != cfg.width || w.ncols() != expected_cols {
                return Err(SgnError::DimensionMismatch(format!(
                    "layer {} has shape {}x{}, expected {}x{}",
                    h + 1,
                    w.nrows(),
                    w.ncols(),
                    cfg.width,
                    expected_cols
                )));
            }
        }
        if output.len() != cfg.width {
            return Err(SgnError::DimensionMismatch(format!(
                "output vector has length {}, expected {}",
                output.len(),
                cfg.width
            )));
        }
        Ok(NetworkParams {
            cfg,
            layers,
            output,
        })
    }

    pub fn zeros(cfg: NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let mut layers = Vec::with_capacity(cfg.depth);
        layers.push(DMatrix::zeros(cfg.width, cfg.input_dim));
        for _ in 1..cfg.depth {
            layers.push(DMatrix::zeros(cfg.width, cfg.width));
        }
        Ok(NetworkParams {
            cfg,
            layers,
            output: DVector::zeros(cfg.width),
        })
    }

    /// Standard normal entries for every weight; generic initialization used
    /// by probes and tests.
    pub fn random_normal<R: Rng>(cfg: NetworkConfig, rng: &mut R) -> Result<Self> {
        let mut params = NetworkParams::zeros(cfg)?;
        for layer in &mut params.layers {
            for v in layer.iter_mut() {
                *v = sample_std_normal(rng);
            }
        }
        for v in params.output.iter_mut() {
            *v = sample_std_normal(rng);
        }
        Ok(params)
    }

    pub fn config(&self) -> NetworkConfig {
        self.cfg
    }

    pub fn layers(&self) -> &[DMatrix<f64>] {
        &self.layers
    }

    pub fn output(&self) -> &DVector<f64> {
        &self.output
    }

    /// Flatten to a length-p vector in the crate-wide order.
    pub fn flatten(&self) -> DVector<f64> {
        let p = self.cfg.param_count();
        let mut flat = DVector::zeros(p);
        let mut off = 0;
        for w in &self.layers {
            for i in 0..w.nrows() {
                for j in 0..w.ncols() {
                    flat[off + i * w.ncols() + j] = w[(i, j)];
                }
            }
            off += w.nrows() * w.ncols();
        }
        for i in 0..self.output.len() {
            flat[off + i] = self.output[i];
        }
        flat
    }

    /// Inverse of [`NetworkParams::flatten`].
    pub fn from_flat(cfg: NetworkConfig, flat: &DVector<f64>) -> Result<Self> {
        cfg.validate()?;
        let p = cfg.param_count();
        if flat.len() != p {
            return Err(SgnError::DimensionMismatch(format!(
                "flat vector has length {}, expected {}",
                flat.len(),
                p
            )));
        }
        let mut params = NetworkParams::zeros(cfg)?;
        let mut off = 0;
        for w in &mut params.layers {
            for i in 0..w.nrows() {
                for j in 0..w.ncols() {
                    w[(i, j)] = flat[off + i * w.ncols() + j];
                }
            }
            off += w.nrows() * w.ncols();
        }
        for i in 0..params.output.len() {
            params.output[i] = flat[off + i];
        }
        Ok(params)
    }
}

fn sample_std_normal<R: Rng>(rng: &mut R) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

fn check_input_dim(cfg: &NetworkConfig, x: &DVector<f64>) -> Result<()> {
    if x.len() != cfg.input_dim {
        return Err(SgnError::DimensionMismatch(format!(
            "input has length {}, expected {}",
            x.len(),
            cfg.input_dim
        )));
    }
    Ok(())
}

/// Prediction phi(x; w) = c . x^(H).
pub fn forward(params: &NetworkParams, act: Activation, x: &DVector<f64>) -> Result<f64> {
    check_input_dim(&params.cfg, x)?;
    let scale = 1.0 / (params.cfg.width as f64).sqrt();
    let mut cur = x.clone();
    for w in &params.layers {
        let z = w * &cur;
        cur = z.map(|v| scale * act.eval(v));
    }
    Ok(params.output.dot(&cur))
}

struct ForwardCache {
    /// x^(0), x^(1), ..., x^(H)
    layer_outputs: Vec<DVector<f64>>,
    /// z^(1), ..., z^(H) pre-activations
    preactivations: Vec<DVector<f64>>,
}

fn forward_cached(params: &NetworkParams, act: Activation, x: &DVector<f64>) -> ForwardCache {
    let scale = 1.0 / (params.cfg.width as f64).sqrt();
    let mut layer_outputs = Vec::with_capacity(params.cfg.depth + 1);
    let mut preactivations = Vec::with_capacity(params.cfg.depth);
    layer_outputs.push(x.clone());
    for w in &params.layers {
        let z = w * layer_outputs.last().unwrap();
        layer_outputs.push(z.map(|v| scale * act.eval(v)));
        preactivations.push(z);
    }
    ForwardCache {
        layer_outputs,
        preactivations,
    }
}

/// Exact gradient of `forward` with respect to the flattened parameters.
///
/// Backward recursion: with D_h = (1/sqrt(m)) diag(sigma'(z^(h))) W^(h),
/// u_H = c and u_{h-1} = D_h^T u_h; the blocks are
/// grad_{W^(h)} = (1/sqrt(m)) (sigma'(z^(h)) had u_h) x^(h-1)^T and
/// grad_c = x^(H).
pub fn per_sample_gradient(
    params: &NetworkParams,
    act: Activation,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    value_and_gradient(params, act, x).map(|(_, g)| g)
}

/// Prediction and exact parameter gradient in one backward pass.
pub fn value_and_gradient(
    params: &NetworkParams,
    act: Activation,
    x: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    check_input_dim(&params.cfg, x)?;
    let cfg = params.cfg;
    let m = cfg.width;
    let scale = 1.0 / (m as f64).sqrt();
    let cache = forward_cached(params, act, x);
    let p = cfg.param_count();
    let mut grad = DVector::zeros(p);

    // c block sits at the tail of the flat layout
    let c_off = p - m;
    for i in 0..m {
        grad[c_off + i] = cache.layer_outputs[cfg.depth][i];
    }

    // offsets of each W block in the flat layout
    let mut offsets = Vec::with_capacity(cfg.depth);
    let mut off = 0;
    for h in 0..cfg.depth {
        offsets.push(off);
        off += m * if h == 0 { cfg.input_dim } else { m };
    }

    let mut u = params.output.clone();
    for h in (0..cfg.depth).rev() {
        let z = &cache.preactivations[h];
        // d = sigma'(z^(h)) had u, scaled
        let d = DVector::from_fn(m, |i, _| scale * act.deriv(z[i]) * u[i]);
        let x_prev = &cache.layer_outputs[h];
        let cols = x_prev.len();
        let base = offsets[h];
        for i in 0..m {
            let di = d[i];
            for j in 0..cols {
                grad[base + i * cols + j] = di * x_prev[j];
            }
        }
        if h > 0 {
            u = params.layers[h].tr_mul(&d);
        }
    }
    let value = params.output.dot(&cache.layer_outputs[cfg.depth]);
    Ok((value, grad))
}

/// Stacked per-sample gradients: row j is the gradient at `batch[j]`.
pub fn batch_jacobian(
    params: &NetworkParams,
    act: Activation,
    batch: &[DVector<f64>],
) -> Result<DMatrix<f64>> {
    if batch.is_empty() {
        return Err(SgnError::EmptyBatch);
    }
    let p = params.cfg.param_count();
    let mut jac = DMatrix::zeros(batch.len(), p);
    for (row, x) in batch.iter().enumerate() {
        let g = per_sample_gradient(params, act, x)?;
        jac.row_mut(row).copy_from(&g.transpose());
    }
    Ok(jac)
}

/// Anchor parameter, trust radius, and the derived geometry constants
/// kappa_C = kappa0 + r_C/sqrt(m) and zeta_C = zeta0 + r_C/sqrt(m).
#[derive(Clone, Debug)]
pub struct GeometrySpec {
    cfg: NetworkConfig,
    w0: DVector<f64>,
    radius: f64,
    kappa0: f64,
    zeta0: f64,
}

impl GeometrySpec {
    /// Measures kappa0 = max_h ||W0^(h)||_2 / sqrt(m) (power iteration,
    /// tolerance 1e-8) and zeta0 = ||c0||_2 at the anchor.
    pub fn new(anchor: &NetworkParams, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(SgnError::InvalidParameter(
                "radius must be nonnegative".into(),
            ));
        }
        let m = anchor.cfg.width as f64;
        let kappa0 = anchor
            .layers
            .iter()
            .map(|w| linalg::spectral_norm(w, 1e-8, 100_000) / m.sqrt())
            .fold(0.0_f64, f64::max);
        let zeta0 = anchor.output.norm();
        Ok(GeometrySpec {
            cfg: anchor.cfg,
            w0: anchor.flatten(),
            radius,
            kappa0,
            zeta0,
        })
    }

    pub fn config(&self) -> NetworkConfig {
        self.cfg
    }

    /// Flat anchor vector w0.
    pub fn anchor(&self) -> &DVector<f64> {
        &self.w0
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    pub fn zeta0(&self) -> f64 {
        self.zeta0
    }

    pub fn kappa_c(&self) -> f64 {
        self.kappa0 + self.radius / (self.cfg.width as f64).sqrt()
    }

    pub fn zeta_c(&self) -> f64 {
        self.zeta0 + self.radius / (self.cfg.width as f64).sqrt()
    }

    /// Whether the flat parameter lies in C = B_2(w0, r_C), with slack.
    pub fn contains(&self, w: &DVector<f64>, slack: f64) -> bool {
        (w - &self.w0).norm() <= self.radius + slack
    }
}
