//! Stochastic Gauss-Newton (SGN) training for deep feedforward networks.
//!
//! The crate implements the SGN iteration with Levenberg-Marquardt damping
//! and metric projection,
//!
//! ```text
//! u_k     = w_k - eta * H_k^{-1} J_k^T G_k,      H_k = alpha * sum_{t<=k} J_t^T J_t + lambda * I,
//! w_{k+1} = argmin_{w in C} ||w - u_k||_{H_k},   C = B_2(w0, r_C),
//! ```
//!
//! together with the closed-form convergence/stability bound calculators that
//! go with it and paired-trajectory harnesses that measure algorithmic
//! stability in the midpoint metric. Everything is dense `f64` linear algebra
//! sized for desk-scale experiments (parameter counts up to a few thousand).

pub mod activation;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod optimizer;
pub mod precond;
pub mod projection;
pub mod sampler;
pub mod stability;
pub mod teacher;

pub use activation::Activation;
pub use error::SgnError;
pub use loss::{Dataset, Loss};
pub use network::{GeometrySpec, NetworkConfig, NetworkParams};
pub use optimizer::{Hyperparams, Trainer, TrajectoryRecord};
pub use precond::Preconditioner;
pub use projection::{project, ProjectionResult};
pub use sampler::SamplerSequence;
