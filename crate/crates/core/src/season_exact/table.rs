use rayon::prelude::*;

use super::{recurrence_cell, QKind, UrnState};
use crate::error::{Error, Result};

/// Values of one draw layer over the triangle `w + b <= m`, packed row by row
/// (row `w` holds `b = 0..=m-w`).
#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    m: usize,
    values: Vec<f64>,
}

impl Slab {
    fn filled(m: usize, value: f64) -> Self {
        Self { m, values: vec![value; Self::len_for(m)] }
    }

    fn len_for(m: usize) -> usize {
        (m + 1) * (m + 2) / 2
    }

    #[inline]
    fn offset(m: usize, w: usize) -> usize {
        w * (m + 1) - w * (w.saturating_sub(1)) / 2
    }

    /// Largest `w + b` covered.
    pub fn extent(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, w: usize) -> &[f64] {
        let start = Self::offset(self.m, w);
        &self.values[start..start + self.m - w + 1]
    }

    #[inline]
    pub fn get(&self, w: usize, b: usize) -> Option<f64> {
        (w + b <= self.m).then(|| self.values[Self::offset(self.m, w) + b])
    }

    /// Iterate `(w, b, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.m).flat_map(move |w| self.row(w).iter().enumerate().map(move |(b, &v)| (w, b, v)))
    }

    /// Build the next draw layer (extent `m - 1`) from this one.
    fn next_layer(&self, red: usize, into: &mut Vec<f64>) -> Slab {
        let m = self.m - 1;
        into.clear();
        into.resize(Self::len_for(m), 0.0);
        let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(m + 1);
        let mut rest: &mut [f64] = into.as_mut_slice();
        for w in 0..=m {
            let (row, tail) = rest.split_at_mut(m - w + 1);
            rows.push((w, row));
            rest = tail;
        }
        let fill = |(w, row): (usize, &mut [f64])| {
            let same = self.row(w);
            if w == 0 {
                for (b, cell) in row.iter_mut().enumerate() {
                    *cell = recurrence_cell(0, b, red, 0.0, same[b]);
                }
            } else {
                let left = self.row(w - 1);
                for (b, cell) in row.iter_mut().enumerate() {
                    *cell = recurrence_cell(w, b, red, left[b], same[b]);
                }
            }
        };
        if m >= 256 {
            rows.into_par_iter().for_each(fill);
        } else {
            rows.into_iter().for_each(fill);
        }
        Slab { m, values: std::mem::take(into) }
    }
}

/// Whether a [`QTable`] keeps every draw layer or only the last two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMode {
    /// `O(N^2)` memory: current and previous layer only.
    Rolling,
    /// `O(N^3)` memory: all layers, for random access by `f`.
    Full,
}

/// Dynamic-programming table of `q` or `q~` over `w + b + f <= max_n`.
///
/// The table advances one draw layer at a time. Layer `f` covers
/// `w + b <= max_n - f`, which is exactly what the recurrence needs to
/// produce layer `f + 1`.
#[derive(Debug, Clone)]
pub struct QTable {
    kind: QKind,
    max_n: usize,
    f_current: usize,
    current: Slab,
    previous: Option<Slab>,
    history: Option<Vec<Slab>>,
    spare: Vec<f64>,
}

impl QTable {
    /// A table positioned at layer `f = 0` (identically one).
    pub fn new(kind: QKind, max_n: usize, mode: TableMode) -> Self {
        Self {
            kind,
            max_n,
            f_current: 0,
            current: Slab::filled(max_n, 1.0),
            previous: None,
            history: (mode == TableMode::Full).then(Vec::new),
            spare: Vec::new(),
        }
    }

    /// A table advanced through every layer up to `f = max_n`.
    pub fn build(kind: QKind, max_n: usize, mode: TableMode) -> Self {
        let mut table = Self::new(kind, max_n, mode);
        while table.advance() {}
        table
    }

    pub fn kind(&self) -> QKind {
        self.kind
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn f_current(&self) -> usize {
        self.f_current
    }

    /// Largest `w` (and `b`) stored in the current layer.
    pub fn max_w(&self) -> usize {
        self.current.extent()
    }

    pub fn max_b(&self) -> usize {
        self.current.extent()
    }

    pub fn current(&self) -> &Slab {
        &self.current
    }

    pub fn previous(&self) -> Option<&Slab> {
        match &self.history {
            Some(h) => h.last(),
            None => self.previous.as_ref(),
        }
    }

    /// Move to layer `f_current + 1`. Returns `false` once the last layer
    /// (`f = max_n`) has been reached.
    pub fn advance(&mut self) -> bool {
        if self.f_current == self.max_n {
            return false;
        }
        let next = self.current.next_layer(self.kind.red_balls(), &mut self.spare);
        let old = std::mem::replace(&mut self.current, next);
        match &mut self.history {
            Some(h) => h.push(old),
            None => {
                if let Some(prev) = self.previous.replace(old) {
                    self.spare = prev.values;
                }
            }
        }
        self.f_current += 1;
        true
    }

    /// Value at `state`, available for the current and previous layer, or for
    /// any layer in [`TableMode::Full`].
    pub fn get(&self, state: UrnState) -> Result<f64> {
        let UrnState { w, b, f } = state;
        let oob = Error::OutOfRange { w, b, f };
        let slab = if f == self.f_current {
            Some(&self.current)
        } else if f < self.f_current {
            match &self.history {
                Some(h) => h.get(f),
                None if f + 1 == self.f_current => self.previous.as_ref(),
                None => None,
            }
        } else {
            None
        };
        slab.and_then(|s| s.get(w, b)).ok_or(oob)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::season_exact::{exact_q, exact_q_tilde};

    #[test]
    fn layer_zero_is_one() {
        let t = QTable::new(QKind::Q, 6, TableMode::Rolling);
        assert!(t.current().iter().all(|(_, _, v)| v == 1.0));
        assert_eq!(t.current().iter().count(), 7 * 8 / 2);
    }

    #[test]
    fn rolling_table_matches_point_evaluation() {
        for kind in [QKind::Q, QKind::QTilde] {
            let n = 30;
            let mut t = QTable::new(kind, n, TableMode::Rolling);
            loop {
                let f = t.f_current();
                for (w, b, v) in t.current().iter() {
                    let s = UrnState::new(w, b, f);
                    let point = match kind {
                        QKind::Q => exact_q(s),
                        QKind::QTilde => exact_q_tilde(s),
                    };
                    assert_eq!(v, point, "{kind:?} at {s:?}");
                }
                if !t.advance() {
                    break;
                }
            }
            assert_eq!(t.f_current(), n);
        }
    }

    #[test]
    fn parallel_rows_match_sequential_kernel() {
        // Extent >= 256 switches the layer build to rayon.
        let t = QTable::build(QKind::Q, 300, TableMode::Rolling);
        let prev = t.previous().unwrap();
        assert_eq!(prev.extent(), 1);
        let mut probe = QTable::new(QKind::Q, 300, TableMode::Rolling);
        for _ in 0..3 {
            probe.advance();
        }
        for (w, b) in [(0, 0), (5, 100), (150, 140), (296, 1), (0, 297)] {
            assert_eq!(probe.get(UrnState::new(w, b, 3)).unwrap(), exact_q(UrnState::new(w, b, 3)));
        }
    }

    #[test]
    fn full_mode_keeps_every_layer() {
        let t = QTable::build(QKind::QTilde, 10, TableMode::Full);
        for f in 0..=10 {
            for w in 0..=(10 - f) {
                for b in 0..=(10 - f - w) {
                    let s = UrnState::new(w, b, f);
                    assert_eq!(t.get(s).unwrap(), exact_q_tilde(s));
                }
            }
        }
        assert!(t.get(UrnState::new(1, 0, 10)).is_err());
    }

    #[test]
    fn rolling_mode_forgets_old_layers() {
        let mut t = QTable::new(QKind::Q, 8, TableMode::Rolling);
        t.advance();
        t.advance();
        assert!(t.get(UrnState::new(0, 0, 2)).is_ok());
        assert!(t.get(UrnState::new(0, 0, 1)).is_ok());
        assert!(matches!(t.get(UrnState::new(0, 0, 0)), Err(Error::OutOfRange { .. })));
        assert!(t.get(UrnState::new(0, 0, 3)).is_err());
        assert!(t.get(UrnState::new(4, 3, 2)).is_err());
    }
}
