use std::path::Path;

use anyhow::{bail, Result};
use serde::Serialize;

use indirect_wf::diffusion::{em_simulate_stream, SdeConfig, SdeModel};
use indirect_wf::harness::{
    beta_shift_check, chain_vs_diffusion, envelope_checks, infinitesimal_check, sweep_all_targets, Coefficient,
    CompareConfig, RateTarget, Region, SweepOptions,
};
use indirect_wf::limit_analytic::{diffusion_coeffs, eval_limit, eval_u_tilde, eval_vs, LimitPoint};
use indirect_wf::rng::{par_replicas, RngStream};
use indirect_wf::season_exact::{repro_probs, QKind, QTable, TableMode};
use indirect_wf::season_mc::{simulate_coupled_urns, SeasonSampler};
use indirect_wf::stats::EstimateWithError;
use indirect_wf::wf_chain::{run_chain_stream, BetaDenominator, ChainConfig, ChainModel};
use indirect_wf::UrnState;

use crate::output::{Format, Report, RunManifest};
use crate::row;
use crate::{
    ChainSimArgs, CompareArgs, ConvergeArgs, DenominatorArg, DiffusionSimArgs, ExactTableArgs, KindArg, LimitEvalArgs,
    ModelArg, MomentsArgs, SeasonSimArgs, VsCurveArgs,
};

pub struct Context<'a> {
    pub out: Option<&'a Path>,
    pub json: bool,
}

impl Context<'_> {
    fn report<A: Serialize>(
        &self,
        subcommand: &str,
        args: &A,
        seed: Option<u64>,
        columns: &[&'static str],
    ) -> Result<Report> {
        self.report_as(Format::Csv, subcommand, args, seed, columns)
    }

    fn report_as<A: Serialize>(
        &self,
        plain: Format,
        subcommand: &str,
        args: &A,
        seed: Option<u64>,
        columns: &[&'static str],
    ) -> Result<Report> {
        let manifest = RunManifest::new(subcommand, serde_json::to_value(args)?, seed);
        let format = if self.json { Format::Json } else { plain };
        Report::new(columns, format, self.out, manifest)
    }
}

impl From<ModelArg> for SdeModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Indirect => SdeModel::Indirect,
            ModelArg::Classical => SdeModel::Classical,
        }
    }
}

impl From<ModelArg> for ChainModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Indirect => ChainModel::Indirect,
            ModelArg::Classical => ChainModel::Classical,
        }
    }
}

fn require_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        bail!("--reps must be at least 1");
    }
    Ok(())
}

pub fn exact_table(ctx: &Context, a: &ExactTableArgs) -> Result<bool> {
    let kind = match a.kind {
        KindArg::Q => QKind::Q,
        KindArg::Qtilde => QKind::QTilde,
    };
    let mut report = ctx.report("exact-table", a, None, &["w", "b", "f", "value"])?;
    let mut table = QTable::new(kind, a.max_n, TableMode::Rolling);
    loop {
        let f = table.f_current();
        for (w, b, v) in table.current().iter() {
            report.row(row![w, b, f, v])?;
        }
        if !table.advance() {
            break;
        }
    }
    report.finish()
}

pub fn season_sim(ctx: &Context, a: &SeasonSimArgs) -> Result<bool> {
    require_reps(a.reps)?;
    let state = UrnState::new(a.w, a.b, a.f);
    let seed = a.seed.seed;
    if a.coupled {
        let runs = par_replicas(a.reps, |i| simulate_coupled_urns(state, &mut RngStream::new(seed, i).rng()))
            .into_iter()
            .collect::<indirect_wf::Result<Vec<_>>>()?;
        if a.aggregate {
            let mut report = ctx.report(
                "season-sim",
                a,
                Some(seed),
                &["reps", "drawn_urn1", "drawn_urn1_se", "drawn_urn2", "drawn_urn2_se", "forbidden"],
            )?;
            let one: Vec<f64> = runs.iter().map(|r| r.0 as u8 as f64).collect();
            let two: Vec<f64> = runs.iter().map(|r| r.1 as u8 as f64).collect();
            let (e1, e2) = (EstimateWithError::mean_of(&one), EstimateWithError::mean_of(&two));
            let forbidden = runs.iter().filter(|r| !r.0 && r.1).count();
            report.row(row![a.reps, e1.value, e1.std_error, e2.value, e2.std_error, forbidden])?;
            report.check("coupling order", forbidden == 0, format!("{forbidden} forbidden outcomes"));
            return report.finish();
        }
        let mut report = ctx.report("season-sim", a, Some(seed), &["replica", "drawn_urn1", "drawn_urn2"])?;
        for (i, (one, two)) in runs.into_iter().enumerate() {
            report.row(row![i, one, two])?;
        }
        return report.finish();
    }

    let sampler = SeasonSampler::new(state)?;
    let seasons = par_replicas(a.reps, |i| sampler.clone().sample(&mut RngStream::new(seed, i).rng()));
    if a.aggregate {
        let mut report = ctx.report(
            "season-sim",
            a,
            Some(seed),
            &[
                "reps", "mean_x", "mean_x_se", "mean_y", "mean_y_se", "p_w_hat", "p_w_se", "p_w", "p_b_hat", "p_b_se",
                "p_b",
            ],
        )?;
        let col = |f: &dyn Fn(&indirect_wf::season_mc::TrackedSeason) -> f64| {
            EstimateWithError::mean_of(&seasons.iter().map(f).collect::<Vec<_>>())
        };
        let x = col(&|s| s.outcome.x_count as f64);
        let y = col(&|s| s.outcome.y_count as f64);
        let pw = col(&|s| s.first_white_marked as u8 as f64);
        let pb = col(&|s| s.first_black_marked as u8 as f64);
        let exact = repro_probs(state);
        report.row(row![
            a.reps,
            x.value,
            x.std_error,
            y.value,
            y.std_error,
            pw.value,
            pw.std_error,
            exact.p_w.unwrap_or(f64::NAN),
            pb.value,
            pb.std_error,
            exact.p_b.unwrap_or(f64::NAN),
        ])?;
        return report.finish();
    }
    let mut report = ctx.report(
        "season-sim",
        a,
        Some(seed),
        &["replica", "x_count", "y_count", "first_white_marked", "first_black_marked"],
    )?;
    for (i, s) in seasons.iter().enumerate() {
        report.row(row![i, s.outcome.x_count, s.outcome.y_count, s.first_white_marked, s.first_black_marked])?;
    }
    report.finish()
}

pub fn limit_eval(ctx: &Context, a: &LimitEvalArgs) -> Result<bool> {
    let p = LimitPoint::new(a.x, a.y, a.z)?;
    let e = eval_limit(&p)?;
    let u_tilde = eval_u_tilde(&p)?;
    let mut report = ctx.report_as(
        Format::KeyValue,
        "limit-eval",
        a,
        None,
        &["T", "u", "v", "u_tilde", "dT_dx", "dT_dy", "dT_dz", "du_dx", "du_dy", "du_dz", "dv_dx", "dv_dy", "dv_dz"],
    )?;
    let [tx, ty, tz] = e.grad_t;
    let [ux, uy, uz] = e.grad_u;
    let [vx, vy, vz] = e.grad_v;
    report.row(row![e.t, e.u, e.v, u_tilde, tx, ty, tz, ux, uy, uz, vx, vy, vz])?;
    report.finish()
}

pub fn vs_curve(ctx: &Context, a: &VsCurveArgs) -> Result<bool> {
    if a.points < 2 {
        bail!("--points must be at least 2");
    }
    let mut report = ctx.report("vs-curve", a, None, &["x", "v_s", "v_s_prime", "v_s_second", "a", "b"])?;
    for i in 0..a.points {
        let x = i as f64 / (a.points - 1) as f64;
        let v = eval_vs(a.s, x)?;
        let c = diffusion_coeffs(a.s, x, a.beta)?;
        report.row(row![x, v.v_s, v.v_s_prime, v.v_s_second, c.a, c.b])?;
    }
    report.finish()
}

pub fn chain_sim(ctx: &Context, a: &ChainSimArgs) -> Result<bool> {
    require_reps(a.reps)?;
    let denominator = match a.beta_denominator {
        DenominatorArg::Males => BetaDenominator::Males,
        DenominatorArg::Population => BetaDenominator::Population,
    };
    let cfg = ChainConfig::new(a.n, a.s, a.beta, a.x0, a.gens, a.seed.seed)
        .with_beta_denominator(denominator)
        .with_model(a.model.into());
    cfg.validate()?;
    let paths = par_replicas(a.reps, |i| run_chain_stream(&cfg, i))
        .into_iter()
        .collect::<indirect_wf::Result<Vec<_>>>()?;
    let mut report = ctx.report("chain-sim", a, Some(a.seed.seed), &["replica", "gen", "x"])?;
    for (i, path) in paths.iter().enumerate() {
        for (g, &x) in path.states.iter().enumerate() {
            report.row(row![i, g, x])?;
        }
    }
    report.finish()
}

pub fn diffusion_sim(ctx: &Context, a: &DiffusionSimArgs) -> Result<bool> {
    require_reps(a.reps)?;
    if a.every == 0 {
        bail!("--every must be at least 1");
    }
    let cfg = SdeConfig::new(a.model.into(), a.s, a.beta, a.x0, a.seed.seed).with_dt(a.dt).with_t_end(a.t_end);
    cfg.validate()?;
    if !cfg.boundary_validated() {
        eprintln!("warning: s >= 1, boundary behaviour of the diffusion is not validated");
    }
    let paths = par_replicas(a.reps, |i| em_simulate_stream(&cfg, i))
        .into_iter()
        .collect::<indirect_wf::Result<Vec<_>>>()?;
    let mut report = ctx.report("diffusion-sim", a, Some(a.seed.seed), &["replica", "t", "x"])?;
    for (i, path) in paths.iter().enumerate() {
        let last = path.values.len() - 1;
        for (k, (&t, &x)) in path.times.iter().zip(&path.values).enumerate() {
            if k % a.every == 0 || k == last {
                report.row(row![i, t, x])?;
            }
        }
    }
    report.finish()
}

pub fn converge(ctx: &Context, a: &ConvergeArgs) -> Result<bool> {
    let region = match (a.y0, a.s) {
        (Some(y0), None) => Region::OmegaY0(y0),
        (None, Some(s)) => Region::OmegaS(s),
        _ => bail!("exactly one of --y0 and --s is required"),
    };
    let targets: Vec<RateTarget> = if a.target == "all" {
        RateTarget::ALL.to_vec()
    } else {
        vec![a.target.parse().map_err(|e| anyhow::anyhow!("--target: {e}"))?]
    };
    let opts = SweepOptions { exhaustive_up_to: a.exhaustive_up_to, ..SweepOptions::default() };
    let tables = sweep_all_targets(region, &a.ns, &opts)?;
    let mut report = ctx.report(
        "converge",
        a,
        None,
        &[
            "region",
            "target",
            "n",
            "sup_error",
            "argmax_w",
            "argmax_b",
            "argmax_f",
            "points_visited",
            "points_in_region",
            "coverage",
        ],
    )?;
    for table in tables.iter().filter(|t| targets.contains(&t.target)) {
        for r in &table.rows {
            report.row(row![
                region.name(),
                table.target.name(),
                r.n,
                r.sup_error,
                r.argmax.w,
                r.argmax.b,
                r.argmax.f,
                r.points_visited,
                r.points_in_region,
                r.coverage(),
            ])?;
        }
        report.check(
            format!("{region} {}", table.target.name()),
            table.slope_within(a.slope_min, a.slope_max),
            format!(
                "slope {:.3} in [{}, {}], C {:.3e}, r2 {:.4}",
                table.fitted_slope,
                a.slope_min,
                a.slope_max,
                table.fitted_constant(),
                table.fit_r2
            ),
        );
    }
    report.finish()
}

pub fn moments(ctx: &Context, a: &MomentsArgs) -> Result<bool> {
    let mut rows = Vec::new();
    for &beta in &a.beta {
        rows.extend(infinitesimal_check(&a.ns, &a.xs, a.s, beta, a.reps, a.seed.seed)?);
    }
    let envelope = envelope_checks(&rows);
    let mut report = ctx.report(
        "moments",
        a,
        Some(a.seed.seed),
        &[
            "coefficient",
            "n",
            "x",
            "beta",
            "estimate",
            "std_error",
            "limit",
            "error",
            "c_fit",
            "allowed",
            "pass",
        ],
    )?;
    for e in &envelope {
        let r = rows
            .iter()
            .find(|r| r.n == e.n && r.x == e.x && r.beta == e.beta)
            .expect("envelope rows come from the estimates");
        let (name, estimate, limit) = match e.coefficient {
            Coefficient::Drift => ("drift", r.drift, r.drift_limit),
            Coefficient::Variance => ("variance", r.variance, r.variance_limit),
        };
        report.row(row![name, e.n, e.x, e.beta, estimate, e.std_error, limit, e.error, e.c_fit, e.allowed, e.pass])?;
    }
    for (coefficient, name) in [(Coefficient::Drift, "drift"), (Coefficient::Variance, "variance")] {
        let series: Vec<_> = envelope.iter().filter(|e| e.coefficient == coefficient).collect();
        let misses = series.iter().filter(|e| !e.pass).count();
        report.check(
            format!("{name} envelope s={}", a.s),
            misses == 0,
            format!("{misses} of {} cells outside 4 SE + C n^-1/2", series.len()),
        );
    }
    for &beta in a.beta.iter().filter(|&&b| b != 0.0) {
        let shifts = beta_shift_check(&a.ns, &a.xs, a.s, beta, a.reps, a.seed.seed)?;
        let worst = shifts
            .iter()
            .map(|r| (r.shift - r.expected).abs() / r.shift_se)
            .fold(0.0f64, f64::max);
        report.check(
            format!("beta shift beta={beta}"),
            shifts.iter().all(|r| r.pass),
            format!("largest deviation {worst:.2} SE over {} cells", shifts.len()),
        );
    }
    report.finish()
}

pub fn compare(ctx: &Context, a: &CompareArgs) -> Result<bool> {
    let cfg = CompareConfig::new(a.n, a.s, a.beta, a.x0, a.t, a.reps, a.seed.seed)
        .with_dt(a.dt)
        .with_model(a.model.into());
    let r = chain_vs_diffusion(&cfg)?;
    let mut report = ctx.report(
        "compare",
        a,
        Some(a.seed.seed),
        &[
            "moment",
            "chain",
            "chain_se",
            "diffusion",
            "diffusion_se",
            "tolerance",
            "pass",
            "generations",
            "boundary_validated",
        ],
    )?;
    for (name, m) in [("mean", r.mean), ("variance", r.variance)] {
        report.row(row![
            name,
            m.chain,
            m.chain_se,
            m.diffusion,
            m.diffusion_se,
            m.tolerance,
            m.pass,
            r.generations,
            r.boundary_validated,
        ])?;
    }
    let model = match a.model {
        ModelArg::Indirect => "indirect",
        ModelArg::Classical => "classical",
    };
    report.check(
        format!("chain vs diffusion ({model}, n={}, t={})", a.n, a.t),
        r.pass(),
        format!(
            "mean diff {:.4} (tol {:.4}), variance diff {:.4} (tol {:.4})",
            (r.mean.chain - r.mean.diffusion).abs(),
            r.mean.tolerance,
            (r.variance.chain - r.variance.diffusion).abs(),
            r.variance.tolerance
        ),
    );
    report.finish()
}
