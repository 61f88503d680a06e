//! The multi-generation chain and its classical counterpart.
//!
//! One generation of the indirect-selection chain with `n` males, a fraction
//! `x` of them white, and `floor(s n)` females:
//!
//! 1. run a season with `w = x n`, `b = (1 - x) n`, `f = floor(s n)`;
//! 2. weight white reproductions by `1 + beta'` to get
//!    `Z = (1 + beta') X / ((1 + beta') X + Y)`;
//! 3. draw the next generation's white count from `Binomial(n, Z)`.
//!
//! `beta'` is `beta / n` by default, or `beta / N` with `N = (1 + s) n`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{RngStream, StreamRng};
use crate::season_exact::UrnState;
use crate::season_mc::SeasonSampler;

/// Population size used to scale the selection coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BetaDenominator {
    /// `beta / n`, `n` the number of males.
    #[default]
    Males,
    /// `beta / N`, `N = (1 + s) n` the whole population.
    Population,
}

/// Which one-generation update the chain uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ChainModel {
    #[default]
    Indirect,
    /// Plain binomial resampling with selection, no season.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n: usize,
    pub s: f64,
    pub beta: f64,
    pub x0: f64,
    pub generations: usize,
    pub seed: u64,
    pub beta_denominator: BetaDenominator,
    pub model: ChainModel,
}

/// Number of females `floor(s n)`.
///
/// The product is nudged up by a few ulps so that values such as
/// `0.29 * 100 = 28.999999999999996` land on the intended integer.
pub fn females(n: usize, s: f64) -> usize {
    let sn = s * n as f64;
    (sn + sn * 8.0 * f64::EPSILON).floor() as usize
}

/// Map a frequency on the grid `{0, 1/n, ..., 1}` to its count.
pub fn grid_count(x: f64, n: usize) -> Result<usize> {
    let k = x * n as f64;
    let r = k.round();
    if !(0.0..=1.0).contains(&x) || (k - r).abs() > 1e-9 * n.max(1) as f64 {
        return domain(format!("x = {x} is not on the grid with n = {n}"));
    }
    Ok(r as usize)
}

impl ChainConfig {
    pub fn new(n: usize, s: f64, beta: f64, x0: f64, generations: usize, seed: u64) -> Self {
        Self {
            n,
            s,
            beta,
            x0,
            generations,
            seed,
            beta_denominator: BetaDenominator::default(),
            model: ChainModel::default(),
        }
    }

    pub fn with_beta_denominator(mut self, d: BetaDenominator) -> Self {
        self.beta_denominator = d;
        self
    }

    pub fn with_model(mut self, model: ChainModel) -> Self {
        self.model = model;
        self
    }

    pub fn females(&self) -> usize {
        females(self.n, self.s)
    }

    /// Selection weight per reproduction, `beta'`.
    pub fn beta_scaled(&self) -> f64 {
        match (self.model, self.beta_denominator) {
            (ChainModel::Classical, _) | (_, BetaDenominator::Males) => self.beta / self.n as f64,
            (ChainModel::Indirect, BetaDenominator::Population) => {
                self.beta / ((1.0 + self.s) * self.n as f64)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return domain("n must be at least 1");
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return domain(format!("s = {} must be positive and finite", self.s));
        }
        if self.model == ChainModel::Indirect && self.females() == 0 {
            return Err(Error::DegenerateUrn { draws: 0 });
        }
        if !self.beta.is_finite() || 1.0 + self.beta_scaled() < 0.0 {
            return domain(format!("beta = {} gives a negative weight", self.beta));
        }
        grid_count(self.x0, self.n).map(|_| ())
    }
}

fn binomial<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<usize> {
    let dist = Binomial::new(n as u64, p).map_err(|e| Error::Domain(format!("binomial({n}, {p}): {e}")))?;
    Ok(dist.sample(rng) as usize)
}

/// Egg fraction `(1 + beta') X / ((1 + beta') X + Y)`.
pub fn weighted_fraction(x_count: usize, y_count: usize, beta_scaled: f64) -> Option<f64> {
    let wx = (1.0 + beta_scaled) * x_count as f64;
    let total = wx + y_count as f64;
    (total > 0.0).then(|| wx / total)
}

/// One indirect-selection generation from `k` white males; returns the next
/// white count.
pub fn chain_step_count<R: Rng + ?Sized>(k: usize, cfg: &ChainConfig, rng: &mut R) -> Result<usize> {
    let state = UrnState::new(k, cfg.n - k, cfg.females());
    let season = SeasonSampler::new(state)?.sample(rng).outcome;
    let z = weighted_fraction(season.x_count, season.y_count, cfg.beta_scaled())
        .ok_or(Error::NoReproduction { w: state.w, b: state.b, f: state.f })?;
    let next = binomial(cfg.n, z, rng)?;
    debug_assert!(k != 0 || next == 0);
    debug_assert!(k != cfg.n || next == cfg.n);
    Ok(next)
}

/// One indirect-selection generation on frequencies.
pub fn chain_step<R: Rng + ?Sized>(x: f64, cfg: &ChainConfig, rng: &mut R) -> Result<f64> {
    cfg.validate()?;
    let k = grid_count(x, cfg.n)?;
    Ok(chain_step_count(k, cfg, rng)? as f64 / cfg.n as f64)
}

/// Success probability of the classical step,
/// `(1 + beta/n) x / (1 - x + (1 + beta/n) x)`.
pub fn classical_step_prob(x: f64, n: usize, beta: f64) -> f64 {
    let wx = (1.0 + beta / n as f64) * x;
    let total = 1.0 - x + wx;
    if total == 0.0 {
        0.0
    } else {
        wx / total
    }
}

/// One classical Wright–Fisher generation: `Binomial(n, p) / n`.
pub fn classical_wf_step<R: Rng + ?Sized>(x: f64, n: usize, beta: f64, rng: &mut R) -> Result<f64> {
    if n == 0 {
        return domain("n must be at least 1");
    }
    grid_count(x, n)?;
    Ok(binomial(n, classical_step_prob(x, n, beta), rng)? as f64 / n as f64)
}

/// One generation of either model on counts.
pub fn step_count<R: Rng + ?Sized>(k: usize, cfg: &ChainConfig, rng: &mut R) -> Result<usize> {
    match cfg.model {
        ChainModel::Indirect => chain_step_count(k, cfg, rng),
        ChainModel::Classical => {
            let p = classical_step_prob(k as f64 / cfg.n as f64, cfg.n, cfg.beta);
            binomial(cfg.n, p, rng)
        }
    }
}

/// First generation at which the chain sits on a boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Absorption {
    pub generation: usize,
    /// `0.0` (white lost) or `1.0` (white fixed).
    pub boundary: f64,
}

/// Frequencies at generations `0..=generations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<f64>,
    pub absorbed_at: Option<Absorption>,
}

impl Trajectory {
    pub fn last(&self) -> f64 {
        *self.states.last().expect("a trajectory holds at least its start")
    }

    pub fn state_at(&self, generation: usize) -> Option<f64> {
        self.states.get(generation).copied()
    }
}

/// Run the chain on the given generator. After absorption the remaining
/// states repeat the boundary value without drawing further numbers.
pub fn run_chain_with<R: Rng + ?Sized>(cfg: &ChainConfig, rng: &mut R) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.n;
    let mut k = grid_count(cfg.x0, n)?;
    let mut states = Vec::with_capacity(cfg.generations + 1);
    states.push(k as f64 / n as f64);
    let mut absorbed_at = None;
    let boundary = |k: usize| (k == 0 || k == n).then(|| k as f64 / n as f64);
    if let Some(b) = boundary(k) {
        absorbed_at = Some(Absorption { generation: 0, boundary: b });
    }
    for g in 1..=cfg.generations {
        if absorbed_at.is_none() {
            k = step_count(k, cfg, rng)?;
            if let Some(b) = boundary(k) {
                absorbed_at = Some(Absorption { generation: g, boundary: b });
            }
        }
        states.push(k as f64 / n as f64);
    }
    Ok(Trajectory { states, absorbed_at })
}

/// Run replica `stream_id` of the chain described by `cfg`.
pub fn run_chain_stream(cfg: &ChainConfig, stream_id: u64) -> Result<Trajectory> {
    let mut rng: StreamRng = RngStream::new(cfg.seed, stream_id).rng();
    run_chain_with(cfg, &mut rng)
}

/// Run the chain on stream 0 of `cfg.seed`.
pub fn run_chain(cfg: &ChainConfig) -> Result<Trajectory> {
    run_chain_stream(cfg, 0)
}
