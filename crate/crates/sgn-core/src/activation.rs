//! Bounded smooth activations with their sup-norm constants.
//!
//! The constants (sigma0, sigma1, sigma2) bound |sigma|, |sigma'| and
//! |sigma''| on all of R. They feed the Lipschitz-bound calculators, so for
//! tanh we keep (1, 2, 2) even though (1, 1, 0.77) would be tight: the bound
//! arithmetic must match the published constants.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SgnError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(SgnError::Config(format!(
                "unknown activation '{other}' (expected tanh or sigmoid)"
            ))),
        }
    }

    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    pub fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }

    pub fn second_deriv(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }

    /// Bound on |sigma|.
    pub fn sigma0(self) -> f64 {
        match self {
            Activation::Tanh => 1.0,
            Activation::Sigmoid => 1.0,
        }
    }

    /// Bound on |sigma'|.
    pub fn sigma1(self) -> f64 {
        match self {
            Activation::Tanh => 2.0,
            Activation::Sigmoid => 0.25,
        }
    }

    /// Bound on |sigma''|. For sigmoid the true supremum is 1/(6*sqrt(3)),
    /// about 0.0962; 0.1 is the documented constant.
    pub fn sigma2(self) -> f64 {
        match self {
            Activation::Tanh => 2.0,
            Activation::Sigmoid => 0.1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
