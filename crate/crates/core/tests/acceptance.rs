//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! process exits non-zero if any check fails.

use std::time::{Duration, Instant};

use indirect_wf::diffusion::SdeModel;
use indirect_wf::harness::{
    beta_shift_check, chain_vs_diffusion, envelope_checks, infinitesimal_check, sweep_all_targets, CompareConfig,
    Region, SweepOptions,
};
use indirect_wf::limit_analytic::{eval_limit, eval_vs, solve_t, v_s, LimitPoint, DEFAULT_TOL};
use indirect_wf::rng::RngStream;
use indirect_wf::season_exact::{
    enumerate_oracle, exact_q, exact_q_tilde, pair_probs, repro_probs, season_moments_exact, QKind, QTable,
    TableMode,
};
use indirect_wf::season_mc::{sample_outcomes, simulate_coupled_urns, tail_check, Count};
use indirect_wf::UrnState;
use rand::Rng;

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn states_up_to(total: usize) -> impl Iterator<Item = UrnState> {
    (0..=total).flat_map(move |w| {
        (0..=total - w).flat_map(move |b| (0..=total - w - b).map(move |f| UrnState::new(w, b, f)))
    })
}

fn close_opt(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

fn oracle_equivalence() -> Outcome {
    let tol = 1e-12;
    let mut checked = 0;
    let mut bad = Vec::new();
    for state in states_up_to(8) {
        let o = enumerate_oracle(state).expect("within the enumeration bound");
        let (ro, po, mo) = (o.repro_probs(), o.pair_probs(), o.moments.to_f64());
        let (r, p, m) = (repro_probs(state), pair_probs(state), season_moments_exact(state));
        let to = indirect_wf::season_exact::rational_to_f64;
        let ok = (exact_q(state) - to(&o.q)).abs() <= tol
            && (exact_q_tilde(state) - to(&o.q_tilde)).abs() <= tol
            && close_opt(r.p_w, ro.p_w, tol)
            && close_opt(r.p_b, ro.p_b, tol)
            && close_opt(p.p_ww, po.p_ww, tol)
            && close_opt(p.p_wb, po.p_wb, tol)
            && close_opt(p.p_bb, po.p_bb, tol)
            && (m.mean_x - mo.mean_x).abs() <= tol
            && (m.mean_y - mo.mean_y).abs() <= tol
            && (m.var_x - mo.var_x).abs() <= tol
            && (m.var_y - mo.var_y).abs() <= tol
            && (m.cov_xy - mo.cov_xy).abs() <= tol;
        if !ok {
            bad.push(state);
        }
        checked += 1;
    }
    outcome(bad.is_empty(), format!("{checked} states, mismatches: {bad:?}"))
}

fn black_advantage() -> Outcome {
    let (mut weak, mut strict_fail, mut points) = (0, 0, 0);
    for w in 1..=30 {
        for b in 1..=30 {
            for f in 0..=30 {
                let r = repro_probs(UrnState::new(w, b, f));
                let (pw, pb) = (r.p_w.unwrap(), r.p_b.unwrap());
                points += 1;
                if pb < pw {
                    weak += 1;
                }
                if f >= 2 && pb <= pw {
                    strict_fail += 1;
                }
            }
        }
    }
    outcome(
        weak == 0 && strict_fail == 0,
        format!("{points} states, p_b < p_w: {weak}, not strict with f >= 2: {strict_fail}"),
    )
}

fn coupling_dominance() -> Outcome {
    let state = UrnState::new(5, 5, 5);
    let runs = 1_000_000u64;
    let forbidden: usize = indirect_wf::rng::par_replicas(runs as usize, |i| {
        let mut rng = RngStream::new(2024, i).rng();
        let (one, two) = simulate_coupled_urns(state, &mut rng).unwrap();
        (!one && two) as usize
    })
    .into_iter()
    .sum();
    outcome(forbidden == 0, format!("{runs} coupled runs, forbidden outcome {forbidden} times"))
}

fn concentration() -> Outcome {
    let thresholds: Vec<f64> = (1..=6).map(|k| 10.0 * k as f64).collect();
    let rows = tail_check(UrnState::new(100, 100, 100), 100_000, &thresholds, 77).unwrap();
    let x_rows: Vec<_> = rows.iter().filter(|r| r.count == Count::X).collect();
    let detail = x_rows
        .iter()
        .map(|r| format!("D={}: {:.2e} <= {:.2e}", r.d, r.empirical, r.bound))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(x_rows.iter().all(|r| !r.violated), detail)
}

fn solver_residuals() -> Outcome {
    let k = 50;
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for i in 0..k {
        let x = i as f64 / (k - 1) as f64;
        for j in 0..k {
            let y = 1e-3 + j as f64 * (1.0 - 1e-3) / (k - 1) as f64;
            for l in 0..k {
                let z = l as f64 / (k - 1) as f64;
                if x + y + z > 1.0 {
                    continue;
                }
                let p = LimitPoint::new(x, y, z).unwrap();
                let t = solve_t(&p, DEFAULT_TOL).unwrap();
                let r = (x * (1.0 - (-t).exp()) + y * t - z).abs();
                worst = worst.max(r);
                points += 1;
            }
        }
    }
    let mut closed_form: f64 = 0.0;
    for j in 1..=k {
        let y = j as f64 / k as f64;
        for l in 0..=k - j {
            let z = l as f64 / k as f64;
            let t = solve_t(&LimitPoint::new(0.0, y, z).unwrap(), DEFAULT_TOL).unwrap();
            closed_form = closed_form.max((t - z / y).abs());
        }
    }
    outcome(
        worst <= 1e-12 && closed_form <= 1e-13,
        format!("{points} points, max residual {worst:.2e}, max |T - z/y| at x = 0: {closed_form:.2e}"),
    )
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs()
}

fn gradients() -> Outcome {
    let h = 1e-6;
    let mut rng = RngStream::new(6, 0).rng();
    let mut worst: f64 = 0.0;
    let mut points = 0;
    while points < 1000 {
        let (x, y, z) = (rng.random_range(0.05..0.9), rng.random_range(0.05..0.9), rng.random_range(0.05..0.9));
        if x + y + z > 0.95 {
            continue;
        }
        let e = eval_limit(&LimitPoint::new(x, y, z).unwrap()).unwrap();
        for axis in 0..3 {
            let shifted = |d: f64| {
                let mut c = [x, y, z];
                c[axis] += d;
                eval_limit(&LimitPoint::new(c[0], c[1], c[2]).unwrap()).unwrap()
            };
            let (plus, minus) = (shifted(h), shifted(-h));
            worst = worst.max(rel_err(e.grad_t[axis], (plus.t - minus.t) / (2.0 * h)));
            worst = worst.max(rel_err(e.grad_u[axis], (plus.u - minus.u) / (2.0 * h)));
        }
        let s = rng.random_range(0.1..0.9);
        let xv = rng.random_range(0.01..0.99);
        let ev = eval_vs(s, xv).unwrap();
        let vp = (v_s(s, xv + h).unwrap() - v_s(s, xv - h).unwrap()) / (2.0 * h);
        let vpp = (eval_vs(s, xv + h).unwrap().v_s_prime - eval_vs(s, xv - h).unwrap().v_s_prime) / (2.0 * h);
        worst = worst.max(rel_err(ev.v_s_prime, vp));
        worst = worst.max(rel_err(ev.v_s_second, vpp));
        points += 1;
    }
    outcome(worst <= 1e-5, format!("{points} interior points, max relative error {worst:.2e}"))
}

fn vs_bounds() -> Outcome {
    let grid = 10_000;
    let mut failures = Vec::new();
    let mut second_lower = Vec::new();
    for si in 1..=9 {
        let s = si as f64 / 10.0;
        let es = (-s).exp();
        // 1 - e^{-s} and e^{-s} + s - 1 without cancellation
        let lower_v = -(-s).exp_m1();
        let es_s_1 = (-s).exp_m1() + s;
        let d_low = (1.0 - s) * es_s_1;
        let d_high = es * (-s - (-s).ln_1p()) / (1.0 - s);
        let dd_low = s * (1.0 - s).powi(2) * es_s_1;
        let dd_high = 2.0 * s * es * (-s - (-s).ln_1p()) / (1.0 - s).powi(3);
        for i in 0..grid {
            let x = i as f64 / (grid - 1) as f64;
            let e = eval_vs(s, x).unwrap();
            let mut fail = |what: &str| failures.push(format!("s={s} x={x}: {what} {e:?}"));
            if !(e.v_s >= lower_v && e.v_s <= s.min(1.0)) {
                fail("range");
            }
            if x < 1.0 && !(e.v_s < s.min(1.0) && e.v_s_prime > 0.0) {
                fail("strict bound or monotonicity");
            }
            if !(e.v_s_prime >= d_low && e.v_s_prime <= d_high) {
                fail("first derivative bounds");
            }
            if e.v_s_second > dd_high {
                fail("second derivative upper bound");
            }
            if e.v_s_second < dd_low {
                second_lower.push((s, x));
            }
        }
    }
    if !second_lower.is_empty() {
        eprintln!(
            "note: second-derivative lower bound missed at {} grid points, first {:?}",
            second_lower.len(),
            second_lower.first()
        );
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} points, failures: {}, second-derivative lower-bound misses (logged only): {}",
            9 * grid,
            failures.len(),
            second_lower.len()
        ) + &failures.first().map(|f| format!(", first: {f}")).unwrap_or_default(),
    )
}

fn rate_sweeps() -> Outcome {
    let ns = [50, 100, 200, 400];
    let mut pass = true;
    let mut parts = Vec::new();
    for region in [Region::OmegaY0(0.2), Region::OmegaS(0.5)] {
        let tables = sweep_all_targets(region, &ns, &SweepOptions::default()).unwrap();
        for t in tables {
            let ok = t.slope_within(-1.3, -0.7);
            pass &= ok;
            parts.push(format!(
                "{}/{}: {:.3}{}",
                region,
                t.target.name(),
                t.fitted_slope,
                if ok { "" } else { " (out of band)" }
            ));
        }
    }
    outcome(pass, parts.join(", "))
}

fn infinitesimal_coefficients() -> Outcome {
    let (ns, xs, s, reps, seed) = ([200, 800, 3200], [0.25, 0.5, 0.75], 0.5, 100_000, 31);
    let mut rows = infinitesimal_check(&ns, &xs, s, 0.0, reps, seed).unwrap();
    rows.extend(infinitesimal_check(&ns, &xs, s, 2.0, reps, seed).unwrap());
    let env = envelope_checks(&rows);
    let env_fail: Vec<_> = env.iter().filter(|e| !e.pass).collect();
    let shift = beta_shift_check(&ns, &xs, s, 2.0, reps, seed).unwrap();
    let shift_fail: Vec<_> = shift.iter().filter(|r| !r.pass).collect();
    for e in &env_fail {
        eprintln!("envelope miss: {e:?}");
    }
    for r in &shift_fail {
        eprintln!("beta shift miss: {r:?}");
    }
    outcome(
        env_fail.is_empty() && shift_fail.is_empty(),
        format!(
            "{} envelope checks ({} failed), {} paired beta shifts ({} failed)",
            env.len(),
            env_fail.len(),
            shift.len(),
            shift_fail.len()
        ),
    )
}

fn chain_against_diffusion() -> Outcome {
    let base = CompareConfig::new(500, 0.5, 0.0, 0.5, 0.5, 10_000, 41).with_dt(1e-3);
    let mut pass = true;
    let mut parts = Vec::new();
    for model in [SdeModel::Indirect, SdeModel::Classical] {
        let r = chain_vs_diffusion(&base.with_model(model)).unwrap();
        pass &= r.pass();
        parts.push(format!(
            "{:?}: mean {:.4} vs {:.4} (tol {:.4}), var {:.5} vs {:.5} (tol {:.4})",
            model,
            r.mean.chain,
            r.mean.diffusion,
            r.mean.tolerance,
            r.variance.chain,
            r.variance.diffusion,
            r.variance.tolerance
        ));
    }
    outcome(pass, parts.join("; "))
}

fn performance() -> Outcome {
    let start = Instant::now();
    let table = QTable::build(QKind::Q, 2000, TableMode::Rolling);
    let build = start.elapsed();
    assert_eq!(table.f_current(), 2000);

    let reps = 400_000;
    let start = Instant::now();
    let outcomes = sample_outcomes(UrnState::new(100, 100, 100), reps, 5).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(outcomes.len(), reps);
    let rate = reps as f64 / elapsed.as_secs_f64();
    outcome(
        build < Duration::from_secs(60) && rate >= 1e5,
        format!(
            "N = 2000 rolling build {:.2?}, {:.3e} seasons/s at (100,100,100) on {} worker(s)",
            build,
            rate,
            rayon::current_num_threads()
        ),
    )
}

fn main() {
    let checks: [(&str, Check); 11] = [
        ("oracle equivalence", oracle_equivalence),
        ("black males reproduce more", black_advantage),
        ("coupling dominance", coupling_dominance),
        ("concentration tails", concentration),
        ("solver residuals", solver_residuals),
        ("analytic gradients", gradients),
        ("v_s bounds", vs_bounds),
        ("convergence rates", rate_sweeps),
        ("infinitesimal coefficients", infinitesimal_coefficients),
        ("chain against diffusion", chain_against_diffusion),
        ("performance", performance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{:>2}] {name} ({:.1?}): {}", i + 1, start.elapsed(), o.detail);
        failed += !o.pass as usize;
    }
    println!("{} of {} acceptance checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
