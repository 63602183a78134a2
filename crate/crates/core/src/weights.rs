//! Trial-weight evaluation: ordinary weights and the locally balanced family.
//!
//! A balancing function `h` satisfies `h(u) = u * h(1/u)` for all `u > 0`.
//! Multiple-try trial weights built from such an `h`,
//! `w(y|x) = h(pi(y) K(y,x) / (pi(x) K(x,y)))`, keep the chain reversible with
//! respect to `pi` for any number of trials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpace;

/// Built-in balancing functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balancing {
    /// `h(u) = sqrt(u)`
    Sqrt,
    /// `h(u) = min(1, u)`
    Min1,
    /// `h(u) = max(1, u)`
    Max1,
}

impl Balancing {
    pub const ALL: [Balancing; 3] = [Balancing::Sqrt, Balancing::Min1, Balancing::Max1];

    /// `h(u)` for positive `u`. Production code works on log ratios via
    /// [`Balancing::log_eval`]; this direct form exists for small-magnitude
    /// arguments and tests.
    pub fn eval(self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(Error::NonPositiveRatio(u));
        }
        Ok(match self {
            Balancing::Sqrt => u.sqrt(),
            Balancing::Min1 => u.min(1.0),
            Balancing::Max1 => u.max(1.0),
        })
    }

    /// `log h(exp(log_u))` without exponentiating the argument.
    pub fn log_eval(self, log_u: f64) -> f64 {
        match self {
            Balancing::Sqrt => 0.5 * log_u,
            Balancing::Min1 => log_u.min(0.0),
            Balancing::Max1 => log_u.max(0.0),
        }
    }
}

impl std::fmt::Display for Balancing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Balancing::Sqrt => "sqrt",
            Balancing::Min1 => "min",
            Balancing::Max1 => "max",
        })
    }
}

/// Which weight family a sampler uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `w(y|x) = pi(y)`, the classical unscaled choice.
    Ordinary,
    /// Locally balanced: `w(y|x) = h(pi(y) K(y,x) / (pi(x) K(x,y)))`.
    Balanced { balancing: Balancing },
}

impl WeightSpec {
    pub const ALL: [WeightSpec; 4] = [
        WeightSpec::Ordinary,
        WeightSpec::Balanced { balancing: Balancing::Sqrt },
        WeightSpec::Balanced { balancing: Balancing::Min1 },
        WeightSpec::Balanced { balancing: Balancing::Max1 },
    ];

    pub fn sqrt() -> Self {
        WeightSpec::Balanced { balancing: Balancing::Sqrt }
    }

    /// Log trial weight of the move `x -> y` given both log posteriors and the
    /// forward/reverse proposal log densities. `-inf` posteriors propagate.
    pub fn log_weight(
        self,
        log_post_x: f64,
        log_post_y: f64,
        log_fwd: f64,
        log_rev: f64,
    ) -> f64 {
        if log_post_y == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        match self {
            WeightSpec::Ordinary => log_post_y,
            WeightSpec::Balanced { balancing } => {
                balancing.log_eval(log_post_y + log_rev - log_post_x - log_fwd)
            }
        }
    }
}

impl std::fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightSpec::Ordinary => f.write_str("ord"),
            WeightSpec::Balanced { balancing } => write!(f, "{balancing}"),
        }
    }
}

/// Log weight of the move `x -> y` evaluated through a model.
pub fn log_weight<M: ModelSpace>(
    model: &M,
    x: &M::State,
    y: &M::State,
    log_fwd: f64,
    log_rev: f64,
    weight: WeightSpec,
) -> f64 {
    weight.log_weight(model.log_post(x), model.log_post(y), log_fwd, log_rev)
}
