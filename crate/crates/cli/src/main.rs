//! `trigroots`: command-line front end for simulations, constants, probes and
//! the acceptance suite.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "trigroots", version = config::BUILD_ID, about = "Root statistics of random trigonometric polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON file with any of the flags below as keys; flags given on the
    /// command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (0 or unset: all cores).
    #[arg(long, global = true, env = "THREADS")]
    threads: Option<usize>,

    /// Write the primary output here instead of stdout.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the Gaussian variance constant c_G by adaptive quadrature.
    Cg(CgArgs),
    /// Monte Carlo root counts for one ensemble and degree (JSON record).
    Simulate(SimulateArgs),
    /// Var(N_n)/n over ensembles and degrees.
    #[command(after_help = "CSV columns: dist,n,trials,mean,var_over_n,se,flagged")]
    Sweep(SweepArgs),
    /// Edgeworth corrector checks against their closed-form limits (JSON).
    Edgeworth(EdgeworthArgs),
    /// Non-resonance conditions and bad-set fractions.
    #[command(
        after_help = "CSV columns: n,tau,threshold,l_max,intervals,total_pairs,bad_pairs,fraction\n\
                      with --t or --pair also: satisfied,witness_k,witness_l,witness_distance"
    )]
    Conditions(ConditionsArgs),
    /// Characteristic function of the coefficient vector against its bound.
    #[command(after_help = "CSV columns with --scan: radius,log_abs_charfn,bound,in_regime")]
    Charfn(CharfnArgs),
    /// Small-ball frequencies of the normalized coefficient vector.
    #[command(after_help = "CSV columns: center,probability,se,hits,trials,gaussian")]
    Smallball(SmallballArgs),
    /// Per-trial comparison of root counts with the Kac-Rice integral.
    #[command(after_help = "CSV columns: trial,count,kacrice,difference,uncertain,flags")]
    KacriceAudit(AuditArgs),
    /// Check that Var(N_n) grows linearly (JSON).
    Scaling(ScalingArgs),
    /// Run the acceptance suite; exits nonzero when any criterion fails.
    Verify(VerifyArgs),
}

#[derive(Args, Serialize)]
struct CgArgs {
    /// Absolute tolerance of the quadrature.
    #[arg(long)]
    tol: Option<f64>,
    /// Upper limit of the explicit integration.
    #[arg(long)]
    tmax: Option<f64>,
    /// Switch point from series to closed forms.
    #[arg(long)]
    t0: Option<f64>,
    /// Tail model: 0 none, 1 c/t², 2 c/t² + d/t³.
    #[arg(long)]
    tail_order: Option<u32>,
}

#[derive(Args, Serialize)]
struct Ensemble {
    /// gaussian | rademacher | uniform | discrete:v1:p1,v2:p2,...
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    ens: Ensemble,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    /// full = [−πn, πn], half = [0, πn].
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    /// Comma-separated ensembles.
    #[arg(long, value_delimiter = ',')]
    dist: Vec<String>,
    /// Comma-separated, strictly increasing degrees.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a line chart of var_over_n against n.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EdgeworthArgs {
    /// cn-limits | psi-limits | q-normalization
    #[arg(long)]
    check: Option<String>,
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Evaluation points in the scale of P; default is n times a fixed
    /// generic pair in [0, π].
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    /// Smoothing width for psi-limits; unset gives the δ → 0 limit.
    #[arg(long)]
    delta: Option<f64>,
    /// Gauss-Hermite nodes per axis for q-normalization.
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args, Serialize)]
struct ConditionsArgs {
    /// Comma-separated degrees.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Interval length of the bad-set partition.
    #[arg(long)]
    eps: Option<f64>,
    /// Test a single point t.
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Test a pair s t.
    #[arg(long, num_args = 2, value_names = ["S", "T"], allow_hyphen_values = true)]
    pair: Option<Vec<f64>>,
}

#[derive(Args, Serialize)]
struct CharfnArgs {
    /// Scan log-spaced radii instead of evaluating at --x.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    scan: bool,
    #[command(flatten)]
    #[serde(flatten)]
    ens: Ensemble,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Second point; switches to the four-dimensional vector.
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    /// Evaluation point, comma-separated (2 or 4 coordinates).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    /// Number of radii.
    #[arg(long)]
    radii: Option<usize>,
    /// Random directions per radius.
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Upper exponent of the scanned regime n^{C*}.
    #[arg(long)]
    c_star: Option<f64>,
    /// unit (e^{iy}) or two_pi (e^{2πiy}).
    #[arg(long)]
    convention: Option<String>,
}

#[derive(Args, Serialize)]
struct SmallballArgs {
    #[command(flatten)]
    #[serde(flatten)]
    ens: Ensemble,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Ball center, comma-separated; repeat for several (default: origin).
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    center: Vec<Vec<f64>>,
}

fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"))).collect()
}

#[derive(Args, Serialize)]
struct AuditArgs {
    #[command(flatten)]
    #[serde(flatten)]
    ens: Ensemble,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    window: Option<String>,
    /// Kac-Rice smoothing width.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args, Serialize)]
struct ScalingArgs {
    #[arg(long, value_delimiter = ',')]
    dist: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    /// full or quick.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Scalar flags become one-element lists where the config holds lists.
fn listify(mut v: serde_json::Value, keys: &[&str]) -> serde_json::Value {
    if let Some(m) = v.as_object_mut() {
        for k in keys {
            if let Some(x) = m.get_mut(*k) {
                if !x.is_array() && !x.is_null() {
                    *x = serde_json::Value::Array(vec![x.take()]);
                }
            }
        }
    }
    v
}

fn flags<T: Serialize>(name: &str, args: &T) -> serde_json::Value {
    let mut v = listify(serde_json::to_value(args).expect("flags serialize"), &["dist", "n"]);
    v["command"] = name.into();
    v
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(trigroots::Error),
    Io(std::io::Error),
    /// The command ran but its checks did not pass.
    Failed(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Run(_) => "computation",
            Self::Io(_) => "io",
            Self::Failed(_) => "failed",
        }
    }

    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Failed(m) => f.write_str(m),
            Self::Run(e) => write!(f, "{e}"),
            Self::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<trigroots::Error> for CliError {
    fn from(e: trigroots::Error) -> Self {
        Self::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

fn fail(e: &CliError) -> ExitCode {
    let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
    eprintln!("{body}");
    ExitCode::from(e.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.render().to_string().trim_end().to_string())),
    };
    let mut v = match &cli.command {
        Command::Cg(a) => flags("cg", a),
        Command::Simulate(a) => flags("simulate", a),
        Command::Sweep(a) => flags("sweep", a),
        Command::Edgeworth(a) => flags("edgeworth", a),
        Command::Conditions(a) => flags("conditions", a),
        Command::Charfn(a) => flags("charfn", a),
        Command::Smallball(a) => flags("smallball", a),
        Command::KacriceAudit(a) => flags("kacrice-audit", a),
        Command::Scaling(a) => flags("scaling", a),
        Command::Verify(a) => flags("verify", a),
    };
    v["threads"] = serde_json::to_value(cli.threads).unwrap();
    v["out"] = serde_json::to_value(&cli.out).unwrap();
    let cfg = match RunConfig::resolve(cli.config.as_deref(), v) {
        Ok(c) => c,
        Err(m) => return fail(&CliError::Usage(m)),
    };
    match commands::run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
