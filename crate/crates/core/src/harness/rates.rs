use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Region;
use crate::error::{domain, Error, Result};
use crate::limit_analytic::{eval_limit, LimitPoint};
use crate::season_exact::{QKind, QTable, Slab, TableMode, UrnState};
use crate::stats::linear_fit;

/// Quantity whose supremum error over a region is tracked against `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateTarget {
    /// `|q - u|`.
    QVsU,
    /// `|N delta_x q - d_x u|`.
    DxqVsUx,
    /// `|N delta_y q - d_y u|`.
    DyqVsUy,
    /// `|q~ - u^2|`.
    QtildeVsU2,
    /// `N |p_b - p_w - (d_x v - d_y v) / N|`.
    FitnessGap,
}

impl RateTarget {
    pub const ALL: [RateTarget; 5] = [
        RateTarget::QVsU,
        RateTarget::DxqVsUx,
        RateTarget::DyqVsUy,
        RateTarget::QtildeVsU2,
        RateTarget::FitnessGap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RateTarget::QVsU => "q_vs_u",
            RateTarget::DxqVsUx => "dxq_vs_ux",
            RateTarget::DyqVsUy => "dyq_vs_uy",
            RateTarget::QtildeVsU2 => "qtilde_vs_u2",
            RateTarget::FitnessGap => "fitness_gap",
        }
    }

    fn index(&self) -> usize {
        Self::ALL.iter().position(|t| t == self).expect("listed in ALL")
    }
}

impl std::str::FromStr for RateTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown rate target {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Largest `N` accepted.
    pub max_n: usize,
    /// Every lattice point is visited up to this `N`; beyond it the lattice
    /// is thinned by a common stride in `w`, `b` and `f`.
    pub exhaustive_up_to: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { max_n: 4000, exhaustive_up_to: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub sup_error: f64,
    /// Lattice point where the supremum is attained.
    pub argmax: UrnState,
    pub points_visited: usize,
    pub points_in_region: usize,
}

impl RateRow {
    pub fn coverage(&self) -> f64 {
        self.points_visited as f64 / self.points_in_region as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub target: RateTarget,
    pub region: Region,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `ln sup_error` against `ln N`.
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub fit_r2: f64,
}

impl RateTable {
    fn from_rows(target: RateTarget, region: Region, rows: Vec<RateRow>) -> Self {
        let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.sup_error.ln()).collect();
        let fit = linear_fit(&xs, &ys);
        Self { target, region, rows, fitted_slope: fit.slope, fitted_intercept: fit.intercept, fit_r2: fit.r2 }
    }

    /// The constant `C` of the fitted law `sup_error = C N^slope`.
    pub fn fitted_constant(&self) -> f64 {
        self.fitted_intercept.exp()
    }

    pub fn slope_within(&self, lo: f64, hi: f64) -> bool {
        self.fitted_slope >= lo && self.fitted_slope <= hi
    }

    /// `sup_error` is nonincreasing in `N`, except for at most one step that
    /// grows by less than `rel_tol`.
    pub fn nonincreasing_within(&self, rel_tol: f64) -> bool {
        let mut inversions = 0;
        for pair in self.rows.windows(2) {
            let (a, b) = (pair[0].sup_error, pair[1].sup_error);
            if b > a {
                if b > a * (1.0 + rel_tol) {
                    return false;
                }
                inversions += 1;
            }
        }
        inversions <= 1
    }
}

#[derive(Debug, Clone, Copy)]
struct Sup {
    err: f64,
    at: UrnState,
}

impl Sup {
    const NONE: Sup = Sup { err: 0.0, at: UrnState::new(0, 0, 0) };

    fn offer(&mut self, err: f64, at: UrnState) {
        // NaN compares false, so make sure it wins.
        if err > self.err || err.is_nan() {
            self.err = err;
            self.at = at;
        }
    }

    fn merge(self, other: Sup) -> Sup {
        if other.err > self.err || other.err.is_nan() {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerScan {
    sups: [Sup; 5],
    visited: usize,
}

impl LayerScan {
    const EMPTY: LayerScan = LayerScan { sups: [Sup::NONE; 5], visited: 0 };

    fn merge(self, other: LayerScan) -> LayerScan {
        let mut sups = self.sups;
        for (s, o) in sups.iter_mut().zip(other.sups) {
            *s = s.merge(o);
        }
        LayerScan { sups, visited: self.visited + other.visited }
    }
}

/// Smallest `b` such that `(w, b, f) / n` lies in the region (membership is
/// monotone in `b` for both region kinds), or `None`.
fn lowest_b(region: &Region, n: usize, w: usize, f: usize) -> Option<usize> {
    let top = n.checked_sub(w + f)?;
    let inside = |b: usize| b >= 1 && region.contains(&LimitPoint::from_lattice(w, b, f, n));
    if !inside(top) {
        return None;
    }
    let (mut lo, mut hi) = (0usize, top);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if inside(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

fn scan_layer(region: &Region, n: usize, f: usize, stride: usize, q: &Slab, qt: &Slab) -> Result<LayerScan> {
    let nf = n as f64;
    let rows: Vec<usize> = (0..=n - f).step_by(stride).collect();
    let scans = rows
        .into_par_iter()
        .map(|w| -> Result<LayerScan> {
            let mut scan = LayerScan::EMPTY;
            let Some(b_lo) = lowest_b(region, n, w, f) else {
                return Ok(scan);
            };
            let b_start = b_lo.div_ceil(stride) * stride;
            let here = q.row(w);
            let right = q.row(w + 1);
            let left = (w >= 1).then(|| q.row(w - 1));
            let tilde = qt.row(w);
            for b in (b_start..=n - f - w).step_by(stride) {
                let at = UrnState::new(w, b, f);
                let e = eval_limit(&LimitPoint::from_lattice(w, b, f, n))?;
                let q0 = here[b];
                scan.sups[0].offer((q0 - e.u).abs(), at);
                scan.sups[1].offer((nf * (right[b] - q0) - e.grad_u[0]).abs(), at);
                scan.sups[2].offer((nf * (here[b + 1] - q0) - e.grad_u[1]).abs(), at);
                scan.sups[3].offer((tilde[b] - e.u * e.u).abs(), at);
                if let Some(left) = left {
                    // p_b - p_w = q(w-1, b, f) - q(w, b-1, f)
                    let gap = left[b] - here[b - 1];
                    scan.sups[4].offer(nf * (gap - (e.grad_v[0] - e.grad_v[1]) / nf).abs(), at);
                }
                scan.visited += 1;
            }
            Ok(scan)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scans.into_iter().fold(LayerScan::EMPTY, LayerScan::merge))
}

fn count_region(region: &Region, n: usize) -> usize {
    (0..=n)
        .into_par_iter()
        .map(|f| {
            (0..=n - f)
                .filter_map(|w| lowest_b(region, n, w, f).map(|b| n - f - w - b + 1))
                .sum::<usize>()
        })
        .sum()
}

/// Supremum errors of all five targets at one `N`.
fn sweep_one(region: &Region, n: usize, opts: &SweepOptions) -> Result<[RateRow; 5]> {
    let stride = if n <= opts.exhaustive_up_to { 1 } else { n.div_ceil(opts.exhaustive_up_to) };
    // The finite differences reach one step beyond the lattice.
    let mut q = QTable::new(QKind::Q, n + 1, TableMode::Rolling);
    let mut qt = QTable::new(QKind::QTilde, n + 1, TableMode::Rolling);
    let mut total = LayerScan::EMPTY;
    for f in 0..=n {
        if f % stride == 0 {
            total = total.merge(scan_layer(region, n, f, stride, q.current(), qt.current())?);
        }
        q.advance();
        qt.advance();
    }
    if total.visited == 0 {
        return Err(Error::EmptyRegion { region: region.name(), n });
    }
    let points_in_region = if stride == 1 { total.visited } else { count_region(region, n) };
    Ok(total.sups.map(|s| RateRow {
        n,
        sup_error: s.err,
        argmax: s.at,
        points_visited: total.visited,
        points_in_region,
    }))
}

fn check_ns(ns: &[usize], opts: &SweepOptions) -> Result<()> {
    if ns.is_empty() {
        return domain("no population sizes given");
    }
    if ns.windows(2).any(|p| p[0] >= p[1]) {
        return domain("population sizes must be strictly increasing");
    }
    if let Some(&n) = ns.iter().find(|&&n| n == 0 || n > opts.max_n) {
        return Err(Error::InfeasibleN { n, limit: opts.max_n });
    }
    Ok(())
}

/// Rate tables of every target over the region, one DP pass per `N`.
pub fn sweep_all_targets(region: Region, ns: &[usize], opts: &SweepOptions) -> Result<Vec<RateTable>> {
    region.validate()?;
    check_ns(ns, opts)?;
    let mut per_target: Vec<Vec<RateRow>> = vec![Vec::with_capacity(ns.len()); RateTarget::ALL.len()];
    for &n in ns {
        for (rows, row) in per_target.iter_mut().zip(sweep_one(&region, n, opts)?) {
            rows.push(row);
        }
    }
    Ok(RateTarget::ALL
        .into_iter()
        .zip(per_target)
        .map(|(t, rows)| RateTable::from_rows(t, region, rows))
        .collect())
}

/// Rate table of one target.
pub fn rate_sweep_q(region: Region, ns: &[usize], target: RateTarget, opts: &SweepOptions) -> Result<RateTable> {
    let mut all = sweep_all_targets(region, ns, opts)?;
    Ok(all.swap_remove(target.index()))
}
