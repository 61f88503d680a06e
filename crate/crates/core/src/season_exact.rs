//! Exact single-season probabilities.
//!
//! Everything here derives from two recurrences obtained by conditioning on
//! the first draw. For an urn holding `w` white balls, `b` black balls and
//! `r` tagged red balls,
//!
//! ```text
//! q_r(w, b, f) = [w q_r(w-1, b, f-1) + b q_r(w, b, f-1)] / (w + b + r),   q_r(., ., 0) = 1
//! ```
//!
//! is the probability that no red ball is drawn in `f` draws. `r = 1` gives
//! [`exact_q`], `r = 2` gives [`exact_q_tilde`]. Reproduction probabilities of
//! a designated male follow by recolouring him red, and pair probabilities by
//! inclusion-exclusion on two red balls.

mod oracle;
mod table;

pub use oracle::{
    enumerate_oracle, enumerate_oracle_with_bound, to_f64 as rational_to_f64, OracleReport, RationalMoments,
    DEFAULT_ORACLE_BOUND,
};
pub use table::{QTable, Slab, TableMode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts of white balls, black balls and remaining draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UrnState {
    pub w: usize,
    pub b: usize,
    pub f: usize,
}

impl UrnState {
    pub const fn new(w: usize, b: usize, f: usize) -> Self {
        Self { w, b, f }
    }

    /// Discretisation scale `N = w + b + f`.
    pub const fn size(&self) -> usize {
        self.w + self.b + self.f
    }
}

/// Which no-draw probability a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QKind {
    /// One red ball: `q`.
    Q,
    /// Two red balls: `q~`.
    QTilde,
}

impl QKind {
    pub const fn red_balls(self) -> usize {
        match self {
            QKind::Q => 1,
            QKind::QTilde => 2,
        }
    }
}

/// One cell of the recurrence. `q_left` is the value at `w - 1` (ignored when
/// `w == 0`, since its weight vanishes), `q_same` the value at `w`, both on the
/// previous draw layer.
#[inline(always)]
pub(crate) fn recurrence_cell(w: usize, b: usize, red: usize, q_left: f64, q_same: f64) -> f64 {
    (w as f64 * q_left + b as f64 * q_same) / (w + b + red) as f64
}

/// `q_r(w, b, f)` for a single state.
///
/// The recurrence never changes `b`, so one state only needs a column over
/// `w' <= w` advanced `f` times: `O(w f)` work.
pub fn exact_no_draw(kind: QKind, state: UrnState) -> f64 {
    let UrnState { w, b, f } = state;
    let red = kind.red_balls();
    if f == 0 {
        return 1.0;
    }
    let mut col = vec![1.0f64; w + 1];
    for _ in 0..f {
        // Descending w so that col[w - 1] still holds the previous layer.
        for wi in (0..=w).rev() {
            let left = if wi > 0 { col[wi - 1] } else { 0.0 };
            col[wi] = recurrence_cell(wi, b, red, left, col[wi]);
        }
    }
    col[w]
}

/// Probability that the single red ball is never drawn in `f` draws.
pub fn exact_q(state: UrnState) -> f64 {
    exact_no_draw(QKind::Q, state)
}

/// Probability that neither of two red balls is drawn in `f` draws.
pub fn exact_q_tilde(state: UrnState) -> f64 {
    exact_no_draw(QKind::QTilde, state)
}

/// Reproduction probabilities of a designated white and a designated black
/// male. A component is `None` when the urn has no male of that colour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReproProbs {
    pub p_w: Option<f64>,
    pub p_b: Option<f64>,
}

impl ReproProbs {
    pub fn p_w(&self) -> Result<f64> {
        self.p_w.ok_or_else(|| Error::Domain("p_w needs at least one white ball".into()))
    }

    pub fn p_b(&self) -> Result<f64> {
        self.p_b.ok_or_else(|| Error::Domain("p_b needs at least one black ball".into()))
    }
}

/// `p_w = 1 - q(w-1, b, f)` and `p_b = 1 - q(w, b-1, f)`.
pub fn repro_probs(state: UrnState) -> ReproProbs {
    let UrnState { w, b, f } = state;
    ReproProbs {
        p_w: (w >= 1).then(|| 1.0 - exact_q(UrnState::new(w - 1, b, f))),
        p_b: (b >= 1).then(|| 1.0 - exact_q(UrnState::new(w, b - 1, f))),
    }
}

/// Probabilities that two given distinct males are both drawn.
///
/// Components are `None` when the urn lacks the balls for that pair; use the
/// accessors to turn that into an error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairProbs {
    pub p_ww: Option<f64>,
    pub p_wb: Option<f64>,
    pub p_bb: Option<f64>,
}

impl PairProbs {
    pub fn ww(&self) -> Result<f64> {
        self.p_ww.ok_or_else(|| Error::Domain("p_ww needs at least two white balls".into()))
    }

    pub fn wb(&self) -> Result<f64> {
        self.p_wb
            .ok_or_else(|| Error::Domain("p_wb needs a white and a black ball".into()))
    }

    pub fn bb(&self) -> Result<f64> {
        self.p_bb.ok_or_else(|| Error::Domain("p_bb needs at least two black balls".into()))
    }
}

/// Pair probabilities via `P(A and B) = P(neither) - 1 + P(A) + P(B)`, where
/// "neither drawn" is `q~` on the urn with the two males removed.
pub fn pair_probs(state: UrnState) -> PairProbs {
    let UrnState { w, b, f } = state;
    let probs = repro_probs(state);
    let qt = |w, b| exact_q_tilde(UrnState::new(w, b, f));
    let p_ww = match probs.p_w {
        Some(pw) if w >= 2 => Some(qt(w - 2, b) - 1.0 + 2.0 * pw),
        _ => None,
    };
    let p_wb = match (probs.p_w, probs.p_b) {
        (Some(pw), Some(pb)) => Some(qt(w - 1, b - 1) - 1.0 + pw + pb),
        _ => None,
    };
    let p_bb = match probs.p_b {
        Some(pb) if b >= 2 => Some(qt(w, b - 2) - 1.0 + 2.0 * pb),
        _ => None,
    };
    PairProbs { p_ww, p_wb, p_bb }
}

/// One-step differences `(delta_x q, delta_y q)` read from a table.
///
/// The table must cover `(w+1, b, f)` and `(w, b+1, f)`.
pub fn finite_diffs(table: &QTable, state: UrnState) -> Result<(f64, f64)> {
    let UrnState { w, b, f } = state;
    let here = table.get(state)?;
    let dx = table.get(UrnState::new(w + 1, b, f))? - here;
    let dy = table.get(UrnState::new(w, b + 1, f))? - here;
    Ok((dx, dy))
}

/// Mean, variance and covariance of the reproduction counts `(X, Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonMoments {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
}

/// Exact moments of `(X, Y)` from the single and pair probabilities:
///
/// ```text
/// Var X     = w p_w (1 - p_w) + w (w-1) (p_ww - p_w^2)
/// Cov(X, Y) = w b (p_wb - p_w p_b)
/// ```
///
/// and symmetrically for `Y`. Terms whose count prefactor vanishes are
/// skipped, so the undefined pair probabilities are never touched.
pub fn season_moments_exact(state: UrnState) -> SeasonMoments {
    let UrnState { w, b, .. } = state;
    let probs = repro_probs(state);
    let pairs = pair_probs(state);
    let (wf, bf) = (w as f64, b as f64);
    let pw = probs.p_w.unwrap_or(0.0);
    let pb = probs.p_b.unwrap_or(0.0);

    let var_one = |n: f64, p: f64, pair: Option<f64>| {
        let mut v = n * p * (1.0 - p);
        if let Some(pp) = pair {
            v += n * (n - 1.0) * (pp - p * p);
        }
        v
    };
    let var_x = if w == 0 { 0.0 } else { var_one(wf, pw, pairs.p_ww) };
    let var_y = if b == 0 { 0.0 } else { var_one(bf, pb, pairs.p_bb) };
    let cov_xy = match pairs.p_wb {
        Some(pwb) => wf * bf * (pwb - pw * pb),
        None => 0.0,
    };
    SeasonMoments {
        mean_x: wf * pw,
        mean_y: bf * pb,
        var_x,
        var_y,
        cov_xy,
    }
}
