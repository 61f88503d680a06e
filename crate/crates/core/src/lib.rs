//! Numerical toolkit for a Wright-Fisher model with indirect selection.
//!
//! A reproductive season is an urn experiment: `f` females each draw one male
//! from an urn of `w` white ("fair") and `b` black ("harmful") males. A drawn
//! white male reproduces and leaves the urn; a drawn black male reproduces
//! once but stays in the urn and keeps taking draws away from the others.
//!
//! The crate is split along the objects of the model:
//!
//! * [`season_exact`]: exact probabilities of a single season via dynamic
//!   programming, plus an exhaustive rational enumerator used as an oracle.
//! * [`season_mc`]: seeded simulation of seasons, the two-urn coupling and
//!   concentration checks.
//! * [`limit_analytic`]: the large-population limits `T`, `u`, `v`, `v_s` and
//!   the diffusion coefficients.
//! * [`wf_chain`]: the multi-generation Markov chain and the classical
//!   Wright-Fisher chain.
//! * [`diffusion`]: Euler-Maruyama integration of the limiting SDEs.
//! * [`harness`]: convergence-rate sweeps and discrete/continuous comparisons.

pub mod diffusion;
pub mod error;
pub mod harness;
pub mod limit_analytic;
pub mod rng;
pub mod season_exact;
pub mod season_mc;
pub mod stats;
pub mod wf_chain;

pub use error::{Error, Result};
pub use season_exact::UrnState;
