//! Exhaustive enumeration of draw sequences with exact rational arithmetic.
//!
//! Every ball is labelled and every ordered sequence of draws is visited, so
//! nothing here relies on exchangeability or on the recurrences used by the
//! dynamic programme. It is meant for tiny urns only.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::{PairProbs, ReproProbs, SeasonMoments, UrnState};
use crate::error::{Error, Result};

/// Largest `w + b + f` the enumerator accepts by default.
pub const DEFAULT_ORACLE_BOUND: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ball {
    White,
    Black,
    Red,
}

/// Exact moments of the reproduction counts.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMoments {
    pub mean_x: BigRational,
    pub mean_y: BigRational,
    pub var_x: BigRational,
    pub var_y: BigRational,
    pub cov_xy: BigRational,
}

impl RationalMoments {
    pub fn to_f64(&self) -> SeasonMoments {
        SeasonMoments {
            mean_x: to_f64(&self.mean_x),
            mean_y: to_f64(&self.mean_y),
            var_x: to_f64(&self.var_x),
            var_y: to_f64(&self.var_y),
            cov_xy: to_f64(&self.cov_xy),
        }
    }
}

/// Everything the enumerator knows about one urn state.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub state: UrnState,
    /// No draw hits the red ball (urn with one extra red ball).
    pub q: BigRational,
    /// No draw hits either red ball (urn with two extra red balls).
    pub q_tilde: BigRational,
    pub p_w: Option<BigRational>,
    pub p_b: Option<BigRational>,
    pub p_ww: Option<BigRational>,
    pub p_wb: Option<BigRational>,
    pub p_bb: Option<BigRational>,
    /// Joint law of `(X, Y)` in the basic urn.
    pub joint: BTreeMap<(usize, usize), BigRational>,
    pub moments: RationalMoments,
}

impl OracleReport {
    pub fn repro_probs(&self) -> ReproProbs {
        ReproProbs {
            p_w: self.p_w.as_ref().map(to_f64),
            p_b: self.p_b.as_ref().map(to_f64),
        }
    }

    pub fn pair_probs(&self) -> PairProbs {
        PairProbs {
            p_ww: self.p_ww.as_ref().map(to_f64),
            p_wb: self.p_wb.as_ref().map(to_f64),
            p_bb: self.p_bb.as_ref().map(to_f64),
        }
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("probabilities are finite")
}

fn ratio(n: usize, d: usize) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Law of the set of marked balls after `draws` draws.
///
/// White balls are marked and removed, black balls are marked and kept, a red
/// ball is marked and ends the experiment. Once the urn is empty the remaining
/// draws do nothing.
fn marked_set_law(balls: &[Ball], draws: usize) -> BTreeMap<u32, BigRational> {
    fn walk(
        balls: &[Ball],
        present: u32,
        marked: u32,
        draws_left: usize,
        prob: BigRational,
        out: &mut BTreeMap<u32, BigRational>,
    ) {
        let size = present.count_ones() as usize;
        if draws_left == 0 || size == 0 {
            *out.entry(marked).or_insert_with(BigRational::zero) += prob;
            return;
        }
        let step = &prob * ratio(1, size);
        for (i, ball) in balls.iter().enumerate() {
            let bit = 1u32 << i;
            if present & bit == 0 {
                continue;
            }
            match ball {
                Ball::White => walk(balls, present & !bit, marked | bit, draws_left - 1, step.clone(), out),
                Ball::Black => walk(balls, present, marked | bit, draws_left - 1, step.clone(), out),
                Ball::Red => {
                    *out.entry(marked | bit).or_insert_with(BigRational::zero) += step.clone();
                }
            }
        }
    }

    assert!(balls.len() <= 32);
    let present = if balls.is_empty() { 0 } else { u32::MAX >> (32 - balls.len()) };
    let mut out = BTreeMap::new();
    walk(balls, present, 0, draws, BigRational::one(), &mut out);
    out
}

fn urn(w: usize, b: usize, red: usize) -> Vec<Ball> {
    let mut balls = vec![Ball::White; w];
    balls.extend(std::iter::repeat_n(Ball::Black, b));
    balls.extend(std::iter::repeat_n(Ball::Red, red));
    balls
}

/// Probability that none of the balls in `mask` ends up marked.
fn none_marked(law: &BTreeMap<u32, BigRational>, mask: u32) -> BigRational {
    law.iter()
        .filter(|(m, _)| *m & mask == 0)
        .fold(BigRational::zero(), |acc, (_, p)| acc + p)
}

/// Probability that all balls in `mask` end up marked.
fn all_marked(law: &BTreeMap<u32, BigRational>, mask: u32) -> BigRational {
    law.iter()
        .filter(|(m, _)| *m & mask == mask)
        .fold(BigRational::zero(), |acc, (_, p)| acc + p)
}

/// Enumerate with the default size bound.
pub fn enumerate_oracle(state: UrnState) -> Result<OracleReport> {
    enumerate_oracle_with_bound(state, DEFAULT_ORACLE_BOUND)
}

pub fn enumerate_oracle_with_bound(state: UrnState, bound: usize) -> Result<OracleReport> {
    let UrnState { w, b, f } = state;
    if state.size() > bound {
        return Err(Error::TooLarge { size: state.size(), bound });
    }

    let red_one = 1u32 << (w + b);
    let q = none_marked(&marked_set_law(&urn(w, b, 1), f), red_one);
    let red_two = red_one | (red_one << 1);
    let q_tilde = none_marked(&marked_set_law(&urn(w, b, 2), f), red_two);

    // Basic urn: whites are balls 0..w, blacks w..w+b.
    let law = marked_set_law(&urn(w, b, 0), f);
    let white_bit = |i: usize| 1u32 << i;
    let black_bit = |j: usize| 1u32 << (w + j);
    let p_w = (w >= 1).then(|| all_marked(&law, white_bit(0)));
    let p_b = (b >= 1).then(|| all_marked(&law, black_bit(0)));
    let p_ww = (w >= 2).then(|| all_marked(&law, white_bit(0) | white_bit(1)));
    let p_wb = (w >= 1 && b >= 1).then(|| all_marked(&law, white_bit(0) | black_bit(0)));
    let p_bb = (b >= 2).then(|| all_marked(&law, black_bit(0) | black_bit(1)));

    let white_mask: u32 = (0..w).map(white_bit).fold(0, |a, m| a | m);
    let black_mask: u32 = (0..b).map(black_bit).fold(0, |a, m| a | m);
    let mut joint: BTreeMap<(usize, usize), BigRational> = BTreeMap::new();
    for (mask, p) in &law {
        let key = (
            (mask & white_mask).count_ones() as usize,
            (mask & black_mask).count_ones() as usize,
        );
        *joint.entry(key).or_insert_with(BigRational::zero) += p;
    }

    let moments = joint_moments(&joint);
    Ok(OracleReport { state, q, q_tilde, p_w, p_b, p_ww, p_wb, p_bb, joint, moments })
}

fn joint_moments(joint: &BTreeMap<(usize, usize), BigRational>) -> RationalMoments {
    let int = |n: usize| BigRational::from_integer(BigInt::from(n));
    let expect = |g: &dyn Fn(usize, usize) -> BigRational| {
        joint
            .iter()
            .fold(BigRational::zero(), |acc, (&(x, y), p)| acc + g(x, y) * p)
    };
    let mean_x = expect(&|x, _| int(x));
    let mean_y = expect(&|_, y| int(y));
    let exx = expect(&|x, _| int(x * x));
    let eyy = expect(&|_, y| int(y * y));
    let exy = expect(&|x, y| int(x * y));
    RationalMoments {
        var_x: exx - &mean_x * &mean_x,
        var_y: eyy - &mean_y * &mean_y,
        cov_xy: exy - &mean_x * &mean_y,
        mean_x,
        mean_y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn known_small_values() {
        let o = enumerate_oracle(UrnState::new(1, 1, 1)).unwrap();
        assert_eq!(o.q, r(2, 3));
        assert_eq!(o.q_tilde, r(1, 2));
        assert_eq!(o.p_w, Some(r(1, 2)));
        assert_eq!(o.p_b, Some(r(1, 2)));

        let o = enumerate_oracle(UrnState::new(1, 1, 2)).unwrap();
        assert_eq!(o.q, r(7, 18));
        assert_eq!(o.p_w, Some(r(3, 4)));
        assert_eq!(o.p_b, Some(r(1, 1)));
        assert_eq!(o.moments.var_x, r(3, 16));
        assert_eq!(o.moments.var_y, r(0, 1));
        assert_eq!(o.moments.cov_xy, r(0, 1));

        assert_eq!(enumerate_oracle(UrnState::new(0, 1, 1)).unwrap().q_tilde, r(1, 3));
        assert_eq!(enumerate_oracle(UrnState::new(2, 0, 2)).unwrap().p_ww, Some(r(1, 1)));
        assert_eq!(enumerate_oracle(UrnState::new(2, 0, 1)).unwrap().p_ww, Some(r(0, 1)));
    }

    #[test]
    fn red_ball_alone_is_drawn_at_once() {
        for f in 1..5 {
            let o = enumerate_oracle(UrnState::new(0, 0, f)).unwrap();
            assert!(o.q.is_zero());
            assert!(o.q_tilde.is_zero());
        }
        assert!(enumerate_oracle(UrnState::new(0, 0, 0)).unwrap().q.is_one());
    }

    #[test]
    fn joint_law_sums_to_one() {
        let o = enumerate_oracle(UrnState::new(3, 3, 4)).unwrap();
        let total = o.joint.values().fold(BigRational::zero(), |a, p| a + p);
        assert!(total.is_one());
        assert!(o.joint.keys().all(|&(x, y)| x <= 3 && y <= 3 && x + y <= 4 && x + y >= 1));
    }

    #[test]
    fn refuses_large_instances() {
        assert_eq!(
            enumerate_oracle(UrnState::new(4, 4, 3)),
            Err(Error::TooLarge { size: 11, bound: 10 })
        );
        assert!(enumerate_oracle_with_bound(UrnState::new(4, 4, 3), 11).is_ok());
    }
}
