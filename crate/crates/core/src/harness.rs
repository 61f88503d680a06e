//! Experiments that tie the discrete model to its limits: convergence-rate
//! sweeps of the exact season probabilities, Monte-Carlo estimates of the
//! infinitesimal mean and variance of the chain, and moment comparisons
//! between the chain and the diffusion.

mod compare;
mod moments;
mod rates;

pub use compare::{chain_vs_diffusion, CompareConfig, CompareReport, MomentComparison};
pub use moments::{
    beta_shift_check, envelope_checks, infinitesimal_check, BetaShiftRow, Coefficient, EnvelopeRow,
    InfinitesimalRow,
};
pub use rates::{rate_sweep_q, sweep_all_targets, RateRow, RateTable, RateTarget, SweepOptions};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::limit_analytic::LimitPoint;

/// Subsets of the simplex on which the discrete probabilities converge
/// uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// `{y >= y0}`.
    OmegaY0(f64),
    /// `{z <= s (x + y), x - z >= (1 - s) / (2 + 2 s)}`.
    OmegaS(f64),
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Region::OmegaY0(y0) if !(y0 > 0.0 && y0 <= 1.0) => domain(format!("y0 = {y0} must lie in (0, 1]")),
            Region::OmegaS(s) if !(s > 0.0 && s < 1.0) => domain(format!("s = {s} must lie in (0, 1)")),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, p: &LimitPoint) -> bool {
        match *self {
            Region::OmegaY0(y0) => p.in_omega_y0(y0),
            Region::OmegaS(s) => p.in_omega_s(s),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Region::OmegaY0(y0) => format!("omega_y0({y0})"),
            Region::OmegaS(s) => format!("omega_s({s})"),
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}
