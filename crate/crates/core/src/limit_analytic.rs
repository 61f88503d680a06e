//! Large-population limits of the season probabilities.
//!
//! With proportions `(x, y, z)` of white males, black males and females, the
//! limit of the no-reproduction probability is `u = exp(-T)`, where `T` is
//! the unique root of
//!
//! ```text
//! phi(t) = x (1 - e^{-t}) + y t - z.
//! ```
//!
//! `phi` is increasing and concave with `phi(0) = -z <= 0 <= phi(z / y)`, so
//! the root is bracketed by `[0, z / y]` and Newton iterates started on the
//! left approach it monotonically.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Default residual tolerance of [`solve_t`].
pub const DEFAULT_TOL: f64 = 1e-13;

/// Slack allowed when checking simplex and region membership of points
/// computed as ratios of integers.
const MEMBERSHIP_SLACK: f64 = 1e-12;

/// Above this abscissa `v_s'` is taken from a one-sided difference instead of
/// the closed form, whose last factor is 0/0 at `x = 1`.
const VS_EDGE: f64 = 1.0 - 1e-6;

/// A point of the simplex `x, y, z >= 0, x + y + z <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LimitPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let p = Self { x, y, z };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return domain(format!("non-finite point ({x}, {y}, {z})"));
        }
        if x < 0.0 || y < 0.0 || z < 0.0 || x + y + z > 1.0 + MEMBERSHIP_SLACK {
            return domain(format!("({x}, {y}, {z}) lies outside the simplex"));
        }
        Ok(p)
    }

    /// Lattice point `(w, b, f) / n`.
    pub fn from_lattice(w: usize, b: usize, f: usize, n: usize) -> Self {
        let nf = n as f64;
        Self { x: w as f64 / nf, y: b as f64 / nf, z: f as f64 / nf }
    }

    /// Membership in `Omega(y0) = {y >= y0}`.
    pub fn in_omega_y0(&self, y0: f64) -> bool {
        self.y >= y0 - MEMBERSHIP_SLACK
    }

    /// Membership in `Omega(s) = {z <= s (x + y), x - z >= (1 - s) / (2 + 2 s)}`.
    pub fn in_omega_s(&self, s: f64) -> bool {
        self.z <= s * (self.x + self.y) + MEMBERSHIP_SLACK
            && self.x - self.z >= (1.0 - s) / (2.0 + 2.0 * s) - MEMBERSHIP_SLACK
    }
}

#[inline]
fn phi(p: &LimitPoint, t: f64) -> f64 {
    -p.x * (-t).exp_m1() + p.y * t - p.z
}

#[inline]
fn phi_prime(p: &LimitPoint, t: f64) -> f64 {
    p.x * (-t).exp() + p.y
}

/// Root `T` of `x (1 - e^{-t}) + y t = z`, with `|phi(T)| <= tol`.
///
/// Safeguarded Newton: a bisection step replaces any Newton step that leaves
/// the current bracket or fails to halve the residual.
pub fn solve_t(point: &LimitPoint, tol: f64) -> Result<f64> {
    let p = LimitPoint::new(point.x, point.y, point.z)?;
    if p.y <= 0.0 {
        return domain(format!("T is undefined for y = {} <= 0", p.y));
    }
    if p.z == 0.0 {
        return Ok(0.0);
    }
    if p.x == 0.0 {
        return Ok(p.z / p.y);
    }

    let (mut lo, mut hi) = (0.0f64, p.z / p.y);
    let mut t = 0.0;
    let mut r = phi(&p, t);
    for _ in 0..400 {
        if r.abs() <= tol {
            // One more Newton step costs nothing and lands at machine
            // precision once we are in the quadratic regime.
            let polished = t - r / phi_prime(&p, t);
            if polished >= lo && polished <= hi {
                let rp = phi(&p, polished);
                if rp.abs() < r.abs() {
                    return Ok(polished);
                }
            }
            return Ok(t);
        }
        if r < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - r / phi_prime(&p, t);
        let candidate = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let rc = phi(&p, candidate);
        if rc.abs() > 0.5 * r.abs() && newton == candidate {
            // Newton stalled; check the midpoint too and keep the better one.
            let mid = 0.5 * (lo + hi);
            let rm = phi(&p, mid);
            if rm.abs() < rc.abs() {
                t = mid;
                r = rm;
                continue;
            }
        }
        t = candidate;
        r = rc;
        if hi - lo <= 4.0 * f64::EPSILON * hi.max(1.0) {
            break;
        }
    }
    Ok(t)
}

/// `T`, `u = e^{-T}`, `v = 1 - u` and their gradients in `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitEval {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub grad_t: [f64; 3],
    pub grad_u: [f64; 3],
    pub grad_v: [f64; 3],
}

/// Evaluate the limit functions and their first derivatives.
///
/// Implicit differentiation of `phi(T) = 0` gives, with `D = x e^{-T} + y`,
/// `dT/dx = (e^{-T} - 1) / D`, `dT/dy = -T / D`, `dT/dz = 1 / D`.
pub fn eval_limit(point: &LimitPoint) -> Result<LimitEval> {
    let t = solve_t(point, DEFAULT_TOL)?;
    let u = (-t).exp();
    let denom = point.x * u + point.y;
    let grad_t = [(u - 1.0) / denom, -t / denom, 1.0 / denom];
    let grad_u = grad_t.map(|g| -u * g);
    let grad_v = grad_u.map(|g| -g);
    Ok(LimitEval { t, u, v: -(-t).exp_m1(), grad_t, grad_u, grad_v })
}

/// Limit of the two-red-ball probability: `u~ = u^2`.
pub fn eval_u_tilde(point: &LimitPoint) -> Result<f64> {
    let t = solve_t(point, DEFAULT_TOL)?;
    Ok((-2.0 * t).exp())
}

/// `v_s` and its first two derivatives at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VsEval {
    pub s: f64,
    pub x: f64,
    pub v_s: f64,
    pub v_s_prime: f64,
    pub v_s_second: f64,
}

fn check_vs_args(s: f64, x: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return domain(format!("sex ratio s = {s} must be positive and finite"));
    }
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("frequency x = {x} outside [0, 1]"));
    }
    Ok(())
}

/// `v_s(x) = v(x / (1+s), (1-x) / (1+s), s / (1+s))`, extended by
/// `v_s(1) = min(s, 1)`. At `x = 0` the root is `T = s`.
pub fn v_s(s: f64, x: f64) -> Result<f64> {
    check_vs_args(s, x)?;
    if x == 1.0 {
        return Ok(s.min(1.0));
    }
    if x == 0.0 {
        // T = s exactly; going through z / y would round.
        return Ok(-(-s).exp_m1());
    }
    let k = 1.0 + s;
    let point = LimitPoint { x: x / k, y: (1.0 - x) / k, z: s / k };
    let t = solve_t(&point, DEFAULT_TOL)?;
    Ok(-(-t).exp_m1())
}

#[inline]
fn vs_prime_closed(s: f64, x: f64, v: f64) -> f64 {
    (1.0 - v) / (1.0 - x * v) * ((s - v) / (1.0 - x))
}

/// Evaluate `v_s`, `v_s'` and `v_s''`.
///
/// `v_s' = (1-v)/(1-xv) * (s-v)/(1-x)` and `v_s''/v_s' = (3v - 2xv^2 - s)/(1-xv)^2`.
/// For `x > 1 - 1e-6` the derivative comes from a backward difference of
/// `v_s` with step `1e-6`, the limit being finite.
pub fn eval_vs(s: f64, x: f64) -> Result<VsEval> {
    let v = v_s(s, x)?;
    let v_prime = if x <= VS_EDGE {
        vs_prime_closed(s, x, v)
    } else {
        let h = 1e-6;
        (v - v_s(s, x - h)?) / h
    };
    let one_minus_xv = 1.0 - x * v;
    let v_second = v_prime * (-2.0 * x * v * v + 3.0 * v - s) / (one_minus_xv * one_minus_xv);
    Ok(VsEval { s, x, v_s: v, v_s_prime: v_prime, v_s_second: v_second })
}

/// Infinitesimal variance `a` and drift `b` of the limiting diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionCoeffs {
    pub a: f64,
    pub b: f64,
}

/// `a(x) = x(1-x) / v_s(x)` and `b(x) = x(1-x) (beta - v_s'(x) / v_s(x)^2)`.
pub fn diffusion_coeffs(s: f64, x: f64, beta: f64) -> Result<DiffusionCoeffs> {
    check_vs_args(s, x)?;
    if x == 0.0 || x == 1.0 {
        return Ok(DiffusionCoeffs { a: 0.0, b: 0.0 });
    }
    let e = eval_vs(s, x)?;
    let het = x * (1.0 - x);
    Ok(DiffusionCoeffs {
        a: het / e.v_s,
        b: het * (beta - e.v_s_prime / (e.v_s * e.v_s)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn pt(x: f64, y: f64, z: f64) -> LimitPoint {
        LimitPoint::new(x, y, z).unwrap()
    }

    /// Plain bisection on the increasing function `phi`.
    fn bisect_t(p: &LimitPoint) -> f64 {
        let (mut lo, mut hi) = (0.0, p.z / p.y);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(p, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn closed_form_cases() {
        assert_eq!(solve_t(&pt(0.3, 0.2, 0.0), DEFAULT_TOL).unwrap(), 0.0);
        assert_eq!(solve_t(&pt(0.0, 0.4, 0.3), DEFAULT_TOL).unwrap(), 0.3 / 0.4);
    }

    #[test]
    fn symmetric_point_matches_bisection() {
        // t - e^{-t} = 1
        let p = pt(0.25, 0.25, 0.5);
        let t = solve_t(&p, DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!(t, bisect_t(&p), epsilon = 1e-10);
        assert_abs_diff_eq!(t, 1.27846, epsilon = 1e-5);
    }

    #[test]
    fn domain_errors() {
        assert!(solve_t(&LimitPoint { x: 0.5, y: 0.0, z: 0.2 }, DEFAULT_TOL).is_err());
        assert!(LimitPoint::new(0.5, 0.5, 0.5).is_err());
        assert!(LimitPoint::new(-0.1, 0.5, 0.2).is_err());
        assert!(eval_vs(0.0, 0.5).is_err());
        assert!(eval_vs(0.5, 1.2).is_err());
        assert!(diffusion_coeffs(-1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn eval_limit_at_x_zero() {
        let e = eval_limit(&pt(0.0, 0.5, 0.25)).unwrap();
        assert_relative_eq!(e.t, 0.5);
        assert_relative_eq!(e.u, (-0.5f64).exp());
        assert_relative_eq!(e.grad_t[2], 2.0);
    }

    #[test]
    fn eval_limit_at_z_zero() {
        let e = eval_limit(&pt(0.3, 0.2, 0.0)).unwrap();
        assert_eq!((e.u, e.v, e.grad_t[0]), (1.0, 0.0, 0.0));
        assert_relative_eq!(e.grad_t[2], 2.0);
    }

    #[test]
    fn u_tilde_special_values() {
        assert_eq!(eval_u_tilde(&pt(0.4, 0.3, 0.0)).unwrap(), 1.0);
        assert_relative_eq!(eval_u_tilde(&pt(0.0, 0.5, 0.3)).unwrap(), (-1.2f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn vs_endpoints() {
        for s in [0.1, 0.5, 0.9, 1.0, 2.0] {
            assert_relative_eq!(v_s(s, 0.0).unwrap(), -(-s).exp_m1(), max_relative = 1e-14);
            assert_eq!(v_s(s, 1.0).unwrap(), s.min(1.0));
        }
    }

    #[test]
    fn vs_matches_implicit_relation_by_bisection() {
        let (s, x) = (0.5, 0.5);
        let g = |v: f64| x * v - (1.0 - x) * (-v).ln_1p() - s;
        let (mut lo, mut hi) = (0.0, 1.0 - 1e-15);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let e = eval_vs(s, x).unwrap();
        assert_abs_diff_eq!(e.v_s, 0.5 * (lo + hi), epsilon = 1e-12);
        let h = 1e-6;
        let fd = (v_s(s, x + h).unwrap() - v_s(s, x - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(e.v_s_prime, fd, max_relative = 1e-6);
    }

    #[test]
    fn edge_derivative_is_finite_and_continuous() {
        let s = 0.5;
        let inner = eval_vs(s, VS_EDGE - 1e-7).unwrap();
        let outer = eval_vs(s, 1.0).unwrap();
        assert!(outer.v_s_prime.is_finite() && outer.v_s_second.is_finite());
        assert_relative_eq!(inner.v_s_prime, outer.v_s_prime, max_relative = 1e-4);
    }

    #[test]
    fn coefficients() {
        for x in [0.0, 1.0] {
            assert_eq!(diffusion_coeffs(0.5, x, 3.0).unwrap(), DiffusionCoeffs { a: 0.0, b: 0.0 });
        }
        for i in 1..100 {
            let x = i as f64 / 100.0;
            let c = diffusion_coeffs(0.5, x, 0.0).unwrap();
            assert!(c.b < 0.0, "drift at {x}");
            assert!(c.a > x * (1.0 - x), "variance at {x}");
        }
    }

    #[test]
    fn region_membership_on_boundaries() {
        assert!(pt(0.3, 0.2, 0.1).in_omega_y0(0.2));
        assert!(!pt(0.3, 0.19, 0.1).in_omega_y0(0.2));
        // z = s (x + y) and x - z = (1 - s) / (2 + 2s) = 1/6 at s = 1/2
        let x = 0.5;
        let z = x - 1.0 / 6.0;
        let y = 2.0 * z - x;
        assert!(pt(x, y, z).in_omega_s(0.5));
        assert!(!pt(x, y - 0.01, z).in_omega_s(0.5));
        assert!(!pt(x - 0.01, y + 0.01, z).in_omega_s(0.5));
    }

    proptest! {
        #[test]
        fn residual_and_bounds(a in 0.0f64..1.0, b in 1e-3f64..1.0, c in 0.0f64..1.0, total in 0.01f64..1.0) {
            let k = total / (a + b + c);
            let (x, y, z) = (a * k, b * k, c * k);
            let p = pt(x, y, z.min(1.0 - x - y).max(0.0));
            let t = solve_t(&p, DEFAULT_TOL).unwrap();
            prop_assert!(phi(&p, t).abs() <= 1e-12);
            prop_assert!(t >= 0.0 && t <= z / y * (1.0 + 1e-12));
            let e = eval_limit(&p).unwrap();
            prop_assert!((e.u + e.v - 1.0).abs() < 1e-15);
            prop_assert_eq!(eval_u_tilde(&p).unwrap(), (-2.0 * t).exp());
        }

        #[test]
        fn implicit_relation_for_vs(s in 0.1f64..2.0, x in 0.0f64..0.999) {
            let v = v_s(s, x).unwrap();
            // ln(1 - v) loses relative accuracy as v approaches 1
            let tol = 1e-10 * (1.0 + 1.0 / (1.0 - v));
            prop_assert!((x * v - (1.0 - x) * (-v).ln_1p() - s).abs() <= tol);
            prop_assert!(v >= -(-s).exp_m1() - 1e-14 && v <= s.min(1.0));
        }
    }
}
