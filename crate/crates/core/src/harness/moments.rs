use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::limit_analytic::diffusion_coeffs;
use crate::rng::{job_seed, par_replicas, RngStream};
use crate::stats::SampleMoments;
use crate::wf_chain::{grid_count, step_count, ChainConfig};

/// Monte-Carlo infinitesimal drift and variance of the chain at one
/// `(n, x)`, against the diffusion coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfinitesimalRow {
    pub n: usize,
    pub x: f64,
    pub beta: f64,
    /// `n (E[X_1] - x)`.
    pub drift: f64,
    pub drift_se: f64,
    pub drift_limit: f64,
    /// `n Var(X_1)`.
    pub variance: f64,
    pub variance_se: f64,
    pub variance_limit: f64,
    pub reps: usize,
}

impl InfinitesimalRow {
    pub fn drift_error(&self) -> f64 {
        (self.drift - self.drift_limit).abs()
    }

    pub fn variance_error(&self) -> f64 {
        (self.variance - self.variance_limit).abs()
    }
}

/// Seed of the `(n, x)` cell; independent of `beta`, so runs that differ
/// only in `beta` are paired replica by replica.
fn cell_seed(seed: u64, n_index: usize, x_index: usize) -> u64 {
    job_seed(seed, ((n_index as u64) << 32) | x_index as u64)
}

/// `X_1 - x` for `reps` replicas started at `x`.
fn increments(cfg: &ChainConfig, x: f64, seed: u64, reps: usize) -> Result<Vec<f64>> {
    let k = grid_count(x, cfg.n)?;
    let n = cfg.n as f64;
    par_replicas(reps, |i| {
        let mut rng = RngStream::new(seed, i).rng();
        step_count(k, cfg, &mut rng).map(|next| next as f64 / n - x)
    })
    .into_iter()
    .collect()
}

fn check_inputs(n_list: &[usize], x_grid: &[f64], s: f64, reps: usize) -> Result<()> {
    if reps < 2 {
        return domain("at least two replicas are needed for a variance");
    }
    if n_list.is_empty() || x_grid.is_empty() {
        return domain("empty n or x grid");
    }
    if s >= 1.0 && x_grid.iter().any(|&x| x >= 1.0) {
        return domain("for s >= 1 the coefficients are only checked away from x = 1");
    }
    Ok(())
}

fn chain_config(n: usize, s: f64, beta: f64, x: f64) -> Result<ChainConfig> {
    let cfg = ChainConfig::new(n, s, beta, x, 1, 0);
    cfg.validate()?;
    Ok(cfg)
}

/// Estimate `n (E[X_1] - x)` and `n Var(X_1)` on every `(n, x)` pair.
pub fn infinitesimal_check(
    n_list: &[usize],
    x_grid: &[f64],
    s: f64,
    beta: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<InfinitesimalRow>> {
    check_inputs(n_list, x_grid, s, reps)?;
    let mut rows = Vec::with_capacity(n_list.len() * x_grid.len());
    for (ni, &n) in n_list.iter().enumerate() {
        for (xi, &x) in x_grid.iter().enumerate() {
            let cfg = chain_config(n, s, beta, x)?;
            let inc = increments(&cfg, x, cell_seed(seed, ni, xi), reps)?;
            let m = SampleMoments::from_slice(&inc);
            let limit = diffusion_coeffs(s, x, beta)?;
            let nf = n as f64;
            rows.push(InfinitesimalRow {
                n,
                x,
                beta,
                drift: nf * m.mean,
                drift_se: nf * m.std_error_of_mean(),
                drift_limit: limit.b,
                variance: nf * m.variance,
                variance_se: nf * m.std_error_of_variance(),
                variance_limit: limit.a,
                reps,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coefficient {
    Drift,
    Variance,
}

/// Check of one estimate against `4 SE + C n^{-1/2}`, where `C` is fitted on
/// the smallest `n` of its `(x, beta, coefficient)` series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub coefficient: Coefficient,
    pub n: usize,
    pub x: f64,
    pub beta: f64,
    pub error: f64,
    pub std_error: f64,
    pub c_fit: f64,
    pub allowed: f64,
    pub pass: bool,
}

/// Envelope checks of both coefficients.
///
/// On the smallest `n` of each series, `C = max(|err| - 4 SE, 0) sqrt(n)`:
/// the part of the error not explained by noise. The larger `n` must then
/// satisfy `|err| <= 4 SE + C / sqrt(n)`, i.e. the systematic error has to
/// decay at least like `n^{-1/2}`.
pub fn envelope_checks(rows: &[InfinitesimalRow]) -> Vec<EnvelopeRow> {
    let mut out = Vec::new();
    for coefficient in [Coefficient::Drift, Coefficient::Variance] {
        let pick = |r: &InfinitesimalRow| match coefficient {
            Coefficient::Drift => (r.drift_error(), r.drift_se),
            Coefficient::Variance => (r.variance_error(), r.variance_se),
        };
        let mut keys: Vec<(u64, u64)> = Vec::new();
        for r in rows {
            let key = (r.x.to_bits(), r.beta.to_bits());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        for key in keys {
            let mut series: Vec<&InfinitesimalRow> =
                rows.iter().filter(|r| (r.x.to_bits(), r.beta.to_bits()) == key).collect();
            series.sort_by_key(|r| r.n);
            let first = series[0];
            let (err0, se0) = pick(first);
            let c_fit = (err0 - 4.0 * se0).max(0.0) * (first.n as f64).sqrt();
            for r in series {
                let (error, std_error) = pick(r);
                let allowed = 4.0 * std_error + c_fit / (r.n as f64).sqrt();
                out.push(EnvelopeRow {
                    coefficient,
                    n: r.n,
                    x: r.x,
                    beta: r.beta,
                    error,
                    std_error,
                    c_fit,
                    allowed,
                    pass: error <= allowed,
                });
            }
        }
    }
    out
}

/// Paired comparison of the drift under `beta` and under `0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaShiftRow {
    pub n: usize,
    pub x: f64,
    pub beta: f64,
    /// Mean of `n (X_1^beta - X_1^0)` over paired replicas.
    pub shift: f64,
    pub shift_se: f64,
    /// `beta x (1 - x)`.
    pub expected: f64,
    pub pass: bool,
}

/// The drift under `beta` exceeds the neutral drift by `beta x (1 - x)`,
/// within 4 standard errors of the paired differences.
pub fn beta_shift_check(
    n_list: &[usize],
    x_grid: &[f64],
    s: f64,
    beta: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<BetaShiftRow>> {
    check_inputs(n_list, x_grid, s, reps)?;
    let mut rows = Vec::new();
    for (ni, &n) in n_list.iter().enumerate() {
        for (xi, &x) in x_grid.iter().enumerate() {
            let js = cell_seed(seed, ni, xi);
            let selected = increments(&chain_config(n, s, beta, x)?, x, js, reps)?;
            let neutral = increments(&chain_config(n, s, 0.0, x)?, x, js, reps)?;
            let nf = n as f64;
            let diffs: Vec<f64> = selected.iter().zip(&neutral).map(|(a, b)| nf * (a - b)).collect();
            let m = SampleMoments::from_slice(&diffs);
            let expected = beta * x * (1.0 - x);
            let shift_se = m.std_error_of_mean();
            rows.push(BetaShiftRow {
                n,
                x,
                beta,
                shift: m.mean,
                shift_se,
                expected,
                pass: (m.mean - expected).abs() <= 4.0 * shift_se,
            });
        }
    }
    Ok(rows)
}
