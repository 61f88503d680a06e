//! Forward simulation of one reproductive season.
//!
//! The urn holds `w` white and `b` black balls. Each of the `f` draws picks a
//! uniform ball among those present; a white ball is marked and removed, a
//! black ball is marked and put back. `X` and `Y` count the marked balls of
//! each colour. If every ball has been removed (only possible with `b = 0`),
//! the remaining draws do nothing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{par_replicas, RngStream};
use crate::season_exact::{repro_probs, UrnState};
use crate::stats::{EstimateWithError, SampleMoments};

/// Realized reproduction counts of one season.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeasonOutcome {
    pub x_count: usize,
    pub y_count: usize,
}

/// A season together with the fate of white ball 0 and black ball 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackedSeason {
    pub outcome: SeasonOutcome,
    pub first_white_marked: bool,
    pub first_black_marked: bool,
}

/// Reusable buffers for simulating many seasons from the same state.
#[derive(Debug, Clone)]
pub struct SeasonSampler {
    state: UrnState,
    whites: Vec<u32>,
    black_marked: Vec<bool>,
}

impl SeasonSampler {
    pub fn new(state: UrnState) -> Result<Self> {
        if state.w + state.b == 0 && state.f > 0 {
            return Err(Error::DegenerateUrn { draws: state.f });
        }
        if state.w > u32::MAX as usize {
            return domain(format!("w = {} is too large", state.w));
        }
        Ok(Self {
            state,
            whites: Vec::with_capacity(state.w),
            black_marked: vec![false; state.b],
        })
    }

    pub fn state(&self) -> UrnState {
        self.state
    }

    /// Simulate one season.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> TrackedSeason {
        let UrnState { w, b, f } = self.state;
        self.whites.clear();
        self.whites.extend(0..w as u32);
        self.black_marked.fill(false);

        let mut first_white_marked = false;
        let (mut x_count, mut y_count) = (0, 0);
        for _ in 0..f {
            let present = self.whites.len() + b;
            if present == 0 {
                break;
            }
            let k = rng.random_range(0..present);
            if k < self.whites.len() {
                let id = self.whites.swap_remove(k);
                first_white_marked |= id == 0;
                x_count += 1;
            } else {
                let j = k - self.whites.len();
                if !self.black_marked[j] {
                    self.black_marked[j] = true;
                    y_count += 1;
                }
            }
        }
        TrackedSeason {
            outcome: SeasonOutcome { x_count, y_count },
            first_white_marked,
            first_black_marked: b > 0 && self.black_marked[0],
        }
    }
}

/// Simulate one season from `state`.
pub fn simulate_season<R: Rng + ?Sized>(state: UrnState, rng: &mut R) -> Result<SeasonOutcome> {
    Ok(SeasonSampler::new(state)?.sample(rng).outcome)
}

/// Run the two-urn coupling once and report whether the red ball was drawn
/// in each urn.
///
/// Balls are numbered `0..w+b`. Urn 1 holds whites `0..w`, blacks
/// `w..w+b-1` and the red ball `w+b-1`; urn 2 is identical except that ball
/// `w-1` is black. Both urns read one shared sequence of uniform numbers:
/// a number whose ball is present in both urns selects it in both; a number
/// whose ball is gone from both is skipped; a number whose ball is present in
/// one urn only selects it there, and the other urn keeps reading numbers
/// until it finds a present ball. Drawing the red ball stops that urn.
pub fn simulate_coupled_urns<R: Rng + ?Sized>(state: UrnState, rng: &mut R) -> Result<(bool, bool)> {
    let UrnState { w, b, f } = state;
    if w == 0 || b == 0 {
        return domain(format!("the coupling needs w >= 1 and b >= 1, got ({w}, {b})"));
    }
    let total = w + b;
    let red = total - 1;
    // Index 0 is urn 1, index 1 is urn 2.
    let mut present = [vec![true; total], vec![true; total]];
    let is_white = |urn: usize, i: usize| if urn == 0 { i < w } else { i + 1 < w };
    let mut active = [true, true];

    for _ in 0..f {
        if !active[0] && !active[1] {
            break;
        }
        let mut chosen: [Option<usize>; 2] = [None, None];
        while (0..2).any(|u| active[u] && chosen[u].is_none()) {
            let k = rng.random_range(0..total);
            for u in 0..2 {
                if active[u] && chosen[u].is_none() && present[u][k] {
                    chosen[u] = Some(k);
                }
            }
        }
        for u in 0..2 {
            if let Some(k) = chosen[u] {
                if k == red {
                    active[u] = false;
                } else if is_white(u, k) {
                    present[u][k] = false;
                }
            }
        }
        // While both urns run, every ball left in urn 1 is also in urn 2.
        debug_assert!(!(active[0] && active[1]) || (0..total).all(|i| !present[0][i] || present[1][i]));
    }
    Ok((!active[0], !active[1]))
}

fn require_both_colours(state: UrnState) -> Result<()> {
    if state.w == 0 || state.b == 0 {
        return domain(format!("needs w >= 1 and b >= 1, got ({}, {})", state.w, state.b));
    }
    Ok(())
}

/// Frequency estimates of `p_w` and `p_b` from `reps` seasons, replica `i`
/// using stream `i` of `seed`.
pub fn estimate_probs(
    state: UrnState,
    reps: usize,
    seed: u64,
) -> Result<(EstimateWithError, EstimateWithError)> {
    require_both_colours(state)?;
    if reps == 0 {
        return domain("reps must be at least 1");
    }
    let sampler = SeasonSampler::new(state)?;
    let draws = par_replicas(reps, |i| {
        let mut rng = RngStream::new(seed, i).rng();
        sampler.clone().sample(&mut rng)
    });
    let white: Vec<f64> = draws.iter().map(|d| d.first_white_marked as u8 as f64).collect();
    let black: Vec<f64> = draws.iter().map(|d| d.first_black_marked as u8 as f64).collect();
    Ok((EstimateWithError::mean_of(&white), EstimateWithError::mean_of(&black)))
}

/// Outcomes of `reps` independent seasons, replica `i` on stream `i`.
pub fn sample_outcomes(state: UrnState, reps: usize, seed: u64) -> Result<Vec<SeasonOutcome>> {
    let sampler = SeasonSampler::new(state)?;
    Ok(par_replicas(reps, |i| {
        let mut rng = RngStream::new(seed, i).rng();
        sampler.clone().sample(&mut rng).outcome
    }))
}

/// Which reproduction count a concentration row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Count {
    X,
    Y,
}

/// Empirical `P(|C - E C| >= D)` against `exp(-D^2 / (4 n))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub count: Count,
    pub d: f64,
    /// Number of indicators summed (`w` for `X`, `b` for `Y`).
    pub n: usize,
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
    /// Empirical tail above `bound + 3 SE`.
    pub violated: bool,
}

fn tail_bound(d: f64, n: usize) -> f64 {
    if d <= 0.0 {
        1.0
    } else {
        (-(d * d) / (4.0 * n as f64)).exp()
    }
}

fn exact_means(state: UrnState) -> (f64, f64) {
    let p = repro_probs(state);
    (
        state.w as f64 * p.p_w.unwrap_or(0.0),
        state.b as f64 * p.p_b.unwrap_or(0.0),
    )
}

/// Compare empirical tails of `X` and `Y` with the concentration bound, for
/// each threshold. Centring uses the exact means.
pub fn tail_check(state: UrnState, reps: usize, thresholds: &[f64], seed: u64) -> Result<Vec<TailRow>> {
    if reps == 0 {
        return domain("reps must be at least 1");
    }
    let outcomes = sample_outcomes(state, reps, seed)?;
    let (mean_x, mean_y) = exact_means(state);
    let mut rows = Vec::with_capacity(2 * thresholds.len());
    for (count, n, mean) in [(Count::X, state.w, mean_x), (Count::Y, state.b, mean_y)] {
        for &d in thresholds {
            let hits = outcomes
                .iter()
                .filter(|o| {
                    let c = if count == Count::X { o.x_count } else { o.y_count };
                    (c as f64 - mean).abs() >= d
                })
                .count();
            let p = hits as f64 / reps as f64;
            let std_error = (p * (1.0 - p) / reps as f64).sqrt();
            let bound = tail_bound(d, n);
            rows.push(TailRow { count, d, n, empirical: p, std_error, bound, violated: p > bound + 3.0 * std_error });
        }
    }
    Ok(rows)
}

/// Empirical `E|C - E C|^3` against `12 e n^{3/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThirdMomentRow {
    pub count: Count,
    pub n: usize,
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
    pub violated: bool,
}

pub fn third_moment_bound(n: usize) -> f64 {
    12.0 * std::f64::consts::E * (n as f64).powf(1.5)
}

pub fn third_moment_check(state: UrnState, reps: usize, seed: u64) -> Result<[ThirdMomentRow; 2]> {
    if reps == 0 {
        return domain("reps must be at least 1");
    }
    let outcomes = sample_outcomes(state, reps, seed)?;
    let (mean_x, mean_y) = exact_means(state);
    let row = |count: Count, n: usize, mean: f64| {
        let cubes: Vec<f64> = outcomes
            .iter()
            .map(|o| {
                let c = if count == Count::X { o.x_count } else { o.y_count };
                (c as f64 - mean).abs().powi(3)
            })
            .collect();
        let m = SampleMoments::from_slice(&cubes);
        let std_error = m.std_error_of_mean();
        let bound = third_moment_bound(n);
        ThirdMomentRow { count, n, empirical: m.mean, std_error, bound, violated: m.mean > bound + 3.0 * std_error }
    };
    Ok([row(Count::X, state.w, mean_x), row(Count::Y, state.b, mean_y)])
}
