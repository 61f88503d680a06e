//! Euler–Maruyama integration of the limiting diffusions
//!
//! ```text
//! dX = b(X) dt + sqrt(a(X)) dB
//! ```
//!
//! on `[0, 1]`. Each step is clamped back into `[0, 1]`; once a path reaches
//! 0 or 1 it stays there, both coefficients vanishing on the boundary.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::limit_analytic::{diffusion_coeffs, DiffusionCoeffs};
use crate::rng::{par_replicas, RngStream};
use crate::stats::SampleMoments;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SdeModel {
    /// `a = x(1-x)/v_s(x)`, `b = x(1-x)(beta - v_s'(x)/v_s(x)^2)`.
    #[default]
    Indirect,
    /// `a = x(1-x)`, `b = beta x(1-x)`.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub s: f64,
    pub beta: f64,
    pub x0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub model: SdeModel,
}

impl SdeConfig {
    pub fn new(model: SdeModel, s: f64, beta: f64, x0: f64, seed: u64) -> Self {
        Self { s, beta, x0, dt: DEFAULT_DT, t_end: DEFAULT_T_END, seed, model }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return domain(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return domain(format!("t_end = {} must be nonnegative", self.t_end));
        }
        if self.t_end > 0.0 && self.dt > self.t_end {
            return domain(format!("dt = {} exceeds t_end = {}", self.dt, self.t_end));
        }
        if !(0.0..=1.0).contains(&self.x0) {
            return domain(format!("x0 = {} outside [0, 1]", self.x0));
        }
        if !self.beta.is_finite() {
            return domain("beta must be finite");
        }
        if self.model == SdeModel::Indirect && !(self.s > 0.0 && self.s.is_finite()) {
            return domain(format!("s = {} must be positive", self.s));
        }
        Ok(())
    }

    /// Number of Euler steps; the last one is shortened to end at `t_end`.
    pub fn steps(&self) -> usize {
        let r = self.t_end / self.dt;
        let k = r.round();
        if (r - k).abs() <= 1e-9 * r.max(1.0) {
            k as usize
        } else {
            r.ceil() as usize
        }
    }

    /// Time after `k` steps.
    pub fn time_at(&self, k: usize) -> f64 {
        if k >= self.steps() {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }

    /// Whether boundary behaviour of this model is covered by the limit
    /// theorem; for `s >= 1` the behaviour at `x = 1` is not.
    pub fn boundary_validated(&self) -> bool {
        self.model == SdeModel::Classical || self.s < 1.0
    }

    pub fn coefficients(&self, x: f64) -> Result<DiffusionCoeffs> {
        match self.model {
            SdeModel::Indirect => diffusion_coeffs(self.s, x, self.beta),
            SdeModel::Classical => {
                let het = x * (1.0 - x);
                Ok(DiffusionCoeffs { a: het, b: self.beta * het })
            }
        }
    }
}

/// First time a path reaches a boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeAbsorption {
    pub time: f64,
    pub boundary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub absorbed_at: Option<SdeAbsorption>,
}

impl SdePath {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("a path holds at least its start")
    }
}

/// Drive one path with the supplied standard normals and hand every state
/// `(step, x)` to `observe`. Returns the absorption event, if any.
pub fn em_drive<G, O>(cfg: &SdeConfig, mut normal: G, mut observe: O) -> Result<Option<SdeAbsorption>>
where
    G: FnMut() -> f64,
    O: FnMut(usize, f64),
{
    cfg.validate()?;
    let steps = cfg.steps();
    let mut x = cfg.x0;
    let on_boundary = |x: f64| x == 0.0 || x == 1.0;
    let mut absorbed = on_boundary(x).then_some(SdeAbsorption { time: 0.0, boundary: x });
    observe(0, x);
    for k in 0..steps {
        if absorbed.is_none() {
            let h = cfg.time_at(k + 1) - cfg.time_at(k);
            let c = cfg.coefficients(x)?;
            x = (x + c.b * h + (c.a.max(0.0) * h).sqrt() * normal()).clamp(0.0, 1.0);
            if on_boundary(x) {
                absorbed = Some(SdeAbsorption { time: cfg.time_at(k + 1), boundary: x });
            }
        }
        observe(k + 1, x);
    }
    Ok(absorbed)
}

/// Simulate path `stream_id` of `cfg`, recording every step.
pub fn em_simulate_stream(cfg: &SdeConfig, stream_id: u64) -> Result<SdePath> {
    let mut rng = RngStream::new(cfg.seed, stream_id).rng();
    let mut values = Vec::with_capacity(cfg.steps() + 1);
    let absorbed_at = em_drive(cfg, || rng.sample(StandardNormal), |_, x| values.push(x))?;
    let times = (0..values.len()).map(|k| cfg.time_at(k)).collect();
    Ok(SdePath { times, values, absorbed_at })
}

/// Simulate one path on stream 0 of `cfg.seed`.
pub fn em_simulate(cfg: &SdeConfig) -> Result<SdePath> {
    em_simulate_stream(cfg, 0)
}

/// Values of path `stream_id` at the given step indices (ascending).
pub fn em_sample_steps(cfg: &SdeConfig, stream_id: u64, steps: &[usize]) -> Result<Vec<f64>> {
    let mut rng = RngStream::new(cfg.seed, stream_id).rng();
    let mut out = Vec::with_capacity(steps.len());
    let mut next = 0;
    em_drive(cfg, || rng.sample(StandardNormal), |k, x| {
        while next < steps.len() && steps[next] == k {
            out.push(x);
            next += 1;
        }
    })?;
    Ok(out)
}

/// Mean and variance across paths at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathMomentRow {
    pub t: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    /// Fraction of paths sitting on 0 or 1.
    pub absorbed: f64,
    pub reps: usize,
    pub boundary_validated: bool,
}

/// Step index closest to time `t`.
fn step_index(cfg: &SdeConfig, t: f64) -> Result<usize> {
    if !(0.0..=cfg.t_end * (1.0 + 1e-12)).contains(&t) {
        return domain(format!("time {t} outside [0, {}]", cfg.t_end));
    }
    Ok(((t / cfg.dt).round() as usize).min(cfg.steps()))
}

/// Per-time moments over `reps` independent paths (path `i` on stream `i`).
pub fn path_moments(cfg: &SdeConfig, reps: usize, t_grid: &[f64]) -> Result<Vec<PathMomentRow>> {
    cfg.validate()?;
    if reps == 0 {
        return domain("reps must be at least 1");
    }
    let mut order: Vec<(usize, usize)> = t_grid
        .iter()
        .map(|&t| step_index(cfg, t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    order.sort_unstable();
    let steps: Vec<usize> = order.iter().map(|&(k, _)| k).collect();

    let samples = par_replicas(reps, |i| em_sample_steps(cfg, i, &steps))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut rows = vec![None; t_grid.len()];
    for (col, &(k, original)) in order.iter().enumerate() {
        let xs: Vec<f64> = samples.iter().map(|v| v[col]).collect();
        let m = SampleMoments::from_slice(&xs);
        let absorbed = xs.iter().filter(|&&x| x == 0.0 || x == 1.0).count() as f64 / reps as f64;
        rows[original] = Some(PathMomentRow {
            t: cfg.time_at(k),
            mean: m.mean,
            mean_se: m.std_error_of_mean(),
            variance: m.variance,
            variance_se: m.std_error_of_variance(),
            absorbed,
            reps,
            boundary_validated: cfg.boundary_validated(),
        });
    }
    Ok(rows.into_iter().map(|r| r.expect("every time is filled")).collect())
}
