use serde::{Deserialize, Serialize};

use crate::diffusion::{em_sample_steps, SdeConfig, SdeModel, DEFAULT_DT};
use crate::error::{domain, Result};
use crate::rng::{job_seed, par_replicas};
use crate::stats::SampleMoments;
use crate::wf_chain::{run_chain_stream, ChainConfig, ChainModel};

/// Chain against diffusion at one time horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub n: usize,
    pub s: f64,
    pub beta: f64,
    pub x0: f64,
    pub t: f64,
    pub reps: usize,
    pub seed: u64,
    pub dt: f64,
    /// Classical pairs the classical chain with the classical diffusion.
    pub model: SdeModel,
}

impl CompareConfig {
    pub fn new(n: usize, s: f64, beta: f64, x0: f64, t: f64, reps: usize, seed: u64) -> Self {
        Self { n, s, beta, x0, t, reps, seed, dt: DEFAULT_DT, model: SdeModel::Indirect }
    }

    pub fn with_model(mut self, model: SdeModel) -> Self {
        self.model = model;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Generation `k` of the chain corresponds to time `k / n`.
    pub fn generations(&self) -> usize {
        let g = self.t * self.n as f64;
        (g - g * 8.0 * f64::EPSILON).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentComparison {
    pub chain: f64,
    pub chain_se: f64,
    pub diffusion: f64,
    pub diffusion_se: f64,
    /// `max(0.02, 5 pooled SE)`.
    pub tolerance: f64,
    pub pass: bool,
}

impl MomentComparison {
    fn new(chain: f64, chain_se: f64, diffusion: f64, diffusion_se: f64) -> Self {
        let tolerance = (5.0 * chain_se.hypot(diffusion_se)).max(0.02);
        Self { chain, chain_se, diffusion, diffusion_se, tolerance, pass: (chain - diffusion).abs() <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub config: CompareConfig,
    pub generations: usize,
    pub mean: MomentComparison,
    pub variance: MomentComparison,
    pub boundary_validated: bool,
}

impl CompareReport {
    pub fn pass(&self) -> bool {
        self.mean.pass && self.variance.pass
    }
}

/// Terminal mean and variance of `reps` chains run for `ceil(t n)`
/// generations against `reps` diffusion paths run to time `t`.
pub fn chain_vs_diffusion(cfg: &CompareConfig) -> Result<CompareReport> {
    if cfg.reps < 2 {
        return domain("at least two replicas per side are needed");
    }
    if !(cfg.t >= 0.0 && cfg.t.is_finite()) {
        return domain(format!("t = {} must be nonnegative", cfg.t));
    }
    let generations = cfg.generations();
    let chain_model = match cfg.model {
        SdeModel::Indirect => ChainModel::Indirect,
        SdeModel::Classical => ChainModel::Classical,
    };
    let chain_cfg = ChainConfig::new(cfg.n, cfg.s, cfg.beta, cfg.x0, generations, job_seed(cfg.seed, 0))
        .with_model(chain_model);
    chain_cfg.validate()?;
    let chain_end = par_replicas(cfg.reps, |i| run_chain_stream(&chain_cfg, i).map(|t| t.last()))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;

    let sde = SdeConfig {
        s: cfg.s,
        beta: cfg.beta,
        x0: cfg.x0,
        dt: cfg.dt.min(cfg.t.max(f64::MIN_POSITIVE)),
        t_end: cfg.t,
        seed: job_seed(cfg.seed, 1),
        model: cfg.model,
    };
    sde.validate()?;
    let last = [sde.steps()];
    let sde_end = par_replicas(cfg.reps, |i| em_sample_steps(&sde, i, &last).map(|v| v[0]))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;

    let a = SampleMoments::from_slice(&chain_end);
    let b = SampleMoments::from_slice(&sde_end);
    Ok(CompareReport {
        config: *cfg,
        generations,
        mean: MomentComparison::new(a.mean, a.std_error_of_mean(), b.mean, b.std_error_of_mean()),
        variance: MomentComparison::new(a.variance, a.std_error_of_variance(), b.variance, b.std_error_of_variance()),
        boundary_validated: sde.boundary_validated(),
    })
}
