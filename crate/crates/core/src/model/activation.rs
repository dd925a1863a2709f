//! Activation functions used as the outer map g_λ and as the inner g of
//! exogenous/impact components.

use serde::{Deserialize, Serialize};

use crate::math::{log1p_exp, sigmoid};

/// An activation. `Softplus` is the standard increasing form
/// `log(1 + exp(βx))/β`; `SoftplusPaper` is the sign-flipped variant
/// `log(1 + exp(−βx))/β`, kept selectable for auditing older results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Softplus { beta: f64 },
    SoftplusPaper { beta: f64 },
}

impl Activation {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Softplus { beta } => log1p_exp(beta * x) / beta,
            Activation::SoftplusPaper { beta } => log1p_exp(-beta * x) / beta,
        }
    }

    pub fn grad(&self, x: f64) -> f64 {
        match *self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus { beta } => sigmoid(beta * x),
            Activation::SoftplusPaper { beta } => sigmoid(beta * x) - 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Activation::Identity)
    }

    /// Whether larger inputs give larger outputs. False only for the
    /// sign-flipped softplus, which reverses order.
    pub fn is_nondecreasing(&self) -> bool {
        !matches!(self, Activation::SoftplusPaper { .. })
    }

    pub fn validate(&self) -> crate::Result<()> {
        match *self {
            Activation::Softplus { beta } | Activation::SoftplusPaper { beta } if beta <= 0.0 => {
                Err(crate::Error::InvalidParameter(format!(
                    "softplus β must be positive, got {beta}"
                )))
            }
            _ => Ok(()),
        }
    }
}
