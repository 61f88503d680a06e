//! `iwf`: exact tables, simulations and convergence experiments for the
//! indirect-selection Wright-Fisher model.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "iwf", version, about = "Indirect-selection Wright-Fisher toolkit")]
struct Cli {
    /// Output file; a `<out>.manifest.json` is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit a JSON report instead of CSV.
    #[arg(long, global = true)]
    json: bool,
    /// Number of worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact q or q~ over w + b + f <= max-n, rows w,b,f,value.
    ExactTable(ExactTableArgs),
    /// Simulate seasons of the urn, per replica or aggregated.
    SeasonSim(SeasonSimArgs),
    /// T, u, v and their gradients at one point of the simplex.
    LimitEval(LimitEvalArgs),
    /// v_s and the diffusion coefficients on a grid of x.
    VsCurve(VsCurveArgs),
    /// Trajectories of the Wright-Fisher chain.
    ChainSim(ChainSimArgs),
    /// Euler-Maruyama paths of the diffusion.
    DiffusionSim(DiffusionSimArgs),
    /// Convergence-rate sweep of the exact probabilities.
    Converge(ConvergeArgs),
    /// Monte-Carlo infinitesimal mean and variance of the chain.
    Moments(MomentsArgs),
    /// Terminal moments of chain against diffusion.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Q,
    Qtilde,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum DenominatorArg {
    /// beta / n, n males.
    #[value(name = "n")]
    #[serde(rename = "n")]
    Males,
    /// beta / N, N = (1 + s) n.
    #[value(name = "N")]
    #[serde(rename = "N")]
    Population,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Indirect,
    Classical,
}

#[derive(Debug, Args, Serialize)]
pub struct SeedArg {
    /// Master seed.
    #[arg(long, env = "IWF_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ExactTableArgs {
    #[arg(long)]
    pub max_n: usize,
    #[arg(long, value_enum, default_value = "q")]
    pub kind: KindArg,
}

#[derive(Debug, Args, Serialize)]
pub struct SeasonSimArgs {
    #[arg(long)]
    pub w: usize,
    #[arg(long)]
    pub b: usize,
    #[arg(long)]
    pub f: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    /// Run the two-urn coupling instead of a plain season.
    #[arg(long)]
    pub coupled: bool,
    /// One summary row instead of one row per replica.
    #[arg(long)]
    pub aggregate: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct LimitEvalArgs {
    #[arg(long)]
    pub x: f64,
    #[arg(long)]
    pub y: f64,
    #[arg(long)]
    pub z: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VsCurveArgs {
    #[arg(long)]
    pub s: f64,
    /// Number of equally spaced x in [0, 1].
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ChainSimArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub s: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long)]
    pub x0: f64,
    #[arg(long)]
    pub gens: usize,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[arg(long, value_enum, default_value = "n")]
    pub beta_denominator: DenominatorArg,
    #[arg(long, value_enum, default_value = "indirect")]
    pub model: ModelArg,
}

#[derive(Debug, Args, Serialize)]
pub struct DiffusionSimArgs {
    #[arg(long, value_enum, default_value = "indirect")]
    pub model: ModelArg,
    #[arg(long)]
    pub s: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long)]
    pub x0: f64,
    #[arg(long, default_value_t = indirect_wf::diffusion::DEFAULT_DT)]
    pub dt: f64,
    #[arg(long, default_value_t = indirect_wf::diffusion::DEFAULT_T_END)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    /// Record every k-th step (the final time is always recorded).
    #[arg(long, default_value_t = 1)]
    pub every: usize,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("region").required(true).args(["y0", "s"]))]
pub struct ConvergeArgs {
    /// A target name (q_vs_u, dxq_vs_ux, dyq_vs_uy, qtilde_vs_u2, fitness_gap) or `all`.
    #[arg(long, default_value = "all")]
    pub target: String,
    /// Region {y >= y0}.
    #[arg(long)]
    pub y0: Option<f64>,
    /// Region Omega(s).
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = -1.3, allow_negative_numbers = true)]
    pub slope_min: f64,
    #[arg(long, default_value_t = -0.7, allow_negative_numbers = true)]
    pub slope_max: f64,
    /// Largest N swept point by point; larger N are thinned.
    #[arg(long, default_value_t = 400)]
    pub exhaustive_up_to: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct MomentsArgs {
    #[arg(long, value_delimiter = ',', default_value = "200,800,3200")]
    pub ns: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    pub xs: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub s: f64,
    /// Selection strengths; each nonzero one is also checked against beta = 0.
    #[arg(long, value_delimiter = ',', default_value = "0,2", allow_negative_numbers = true)]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub s: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub x0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[arg(long, default_value_t = indirect_wf::diffusion::DEFAULT_DT)]
    pub dt: f64,
    #[arg(long, value_enum, default_value = "indirect")]
    pub model: ModelArg,
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = commands::Context { out: cli.out.as_deref(), json: cli.json };
    let result = match &cli.command {
        Command::ExactTable(a) => commands::exact_table(&ctx, a),
        Command::SeasonSim(a) => commands::season_sim(&ctx, a),
        Command::LimitEval(a) => commands::limit_eval(&ctx, a),
        Command::VsCurve(a) => commands::vs_curve(&ctx, a),
        Command::ChainSim(a) => commands::chain_sim(&ctx, a),
        Command::DiffusionSim(a) => commands::diffusion_sim(&ctx, a),
        Command::Converge(a) => commands::converge(&ctx, a),
        Command::Moments(a) => commands::moments(&ctx, a),
        Command::Compare(a) => commands::compare(&ctx, a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// A reader such as `head` closing stdout early is not a failure.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c
            .downcast_ref::<std::io::Error>()
            .or_else(|| c.downcast_ref::<csv::Error>().and_then(|ce| match ce.kind() {
                csv::ErrorKind::Io(io) => Some(io),
                _ => None,
            }));
        io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}
