mod model;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use delayrobust::constant_delay::{
    figure1_sweep_parallel, p_grid, rightmost_root, write_sweep_csv, write_sweep_csv_to, CharForm,
    DelayPencil, MIN_NODES,
};
use delayrobust::ddesim::{
    compatibility_residual, fit_decay, make_compatible_history, simulate_closed_loop,
    write_trace_csv, DelaySignal, PartialTrace, Signal, SimTrace,
};
use delayrobust::margin::{
    certify_sigma_with, closed_loop_margin, closed_loop_system, contraction_gain, max_epsilon,
    small_gain_check,
};
use delayrobust::{Error, PlantModel};
use serde::Serialize;
use serde_json::json;

const EXIT_INPUT: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

/// Robustness margins, simulations and stability windows for predictor
/// feedback under input-delay perturbations.
#[derive(Parser)]
#[command(name = "delayrobust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Small-gain check at a given ε, or the largest certified ε.
    Margin(MarginArgs),
    /// Simulate the closed loop and fit its decay.
    Simulate(SimulateArgs),
    /// Certified (measurable) and exact (constant) delay windows over a gain grid.
    Figure1(Figure1Args),
    /// Emit a decay-rate certificate at a given ε.
    Certify(CertifyArgs),
    /// Rightmost characteristic root for a constant delay τ.
    AnalyzeConstant(AnalyzeArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// JSON model file {"A", "B", "K", "r"}.
    #[arg(conflicts_with = "gain", required_unless_present = "gain")]
    model: Option<PathBuf>,
    /// Use the scalar plant ẋ = x + u(t-1) with feedback u = -p·(predictor).
    #[arg(long, value_name = "P")]
    gain: Option<f64>,
}

#[derive(Args)]
struct MarginArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Perturbation magnitude to check.
    #[arg(long, conflicts_with = "find_max", required_unless_present = "find_max")]
    eps: Option<f64>,
    /// Report the largest certified ε instead.
    #[arg(long)]
    find_max: bool,
    /// Lyapunov rate for the decay envelope (default: optimized).
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// const:c | pwc:seed:dwell | sin:freq[:phase]
    #[arg(long, default_value = "const:0")]
    signal: Signal,
    /// Initial state, comma separated (default: first coordinate 1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Constant seed of the input history, comma separated (default: zero).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    u0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20.0)]
    tfinal: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Start of the decay fit (default: 2(r+ε)).
    #[arg(long)]
    burn_in: Option<f64>,
    /// Trace CSV destination.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Figure1Args {
    #[arg(long, default_value_t = 1.5)]
    pmin: f64,
    #[arg(long, default_value_t = 5.0)]
    pmax: f64,
    #[arg(long, default_value_t = 8)]
    steps: usize,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    tau: f64,
    /// Collocation degree.
    #[arg(long = "N", default_value_t = 64)]
    n: usize,
    /// Reduction used for the characteristic matrix: x or p.
    #[arg(long, default_value = "x")]
    form: String,
    #[arg(long)]
    json: bool,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) => EXIT_INFEASIBLE,
            Error::Divergence { .. } => EXIT_DIVERGED,
            Error::Singular | Error::NoConvergence { .. } => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(format!("i/o error: {e}"))
    }
}

type Outcome = Result<u8, Failure>;

fn load_model(args: &ModelArgs) -> Result<PlantModel, Failure> {
    match (&args.model, args.gain) {
        (_, Some(p)) => Ok(PlantModel::scalar_example(p)?),
        (Some(path), None) => model::load(path).map_err(Failure::input),
        (None, None) => Err(Failure::input("give a model file or --gain")),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::input(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_margin(args: MarginArgs) -> Outcome {
    let model = load_model(&args.model)?;
    if args.find_max {
        let found = match args.mu {
            Some(mu) => {
                let sys = closed_loop_system(&model, Some(mu))?;
                let rep = small_gain_check(&sys, 0.0, model.n() == 1)?;
                delayrobust::margin::MaxEpsilon {
                    epsilon: rep.epsilon_max,
                    unconstrained: rep.unconstrained,
                    scalar_path: rep.scalar_path,
                }
            }
            None => max_epsilon(&model)?,
        };
        if args.json {
            print_json(&found)?;
        } else {
            println!("epsilon_max = {:.12e}", found.epsilon);
            println!("unconstrained = {}", found.unconstrained);
            println!("scalar_path = {}", found.scalar_path);
        }
        return Ok(0);
    }
    let eps = args.eps.expect("clap requires --eps without --find-max");
    let report = closed_loop_margin(&model, eps, args.mu)?;
    if args.json {
        print_json(&report)?;
    } else {
        println!("epsilon = {:.12e}", report.epsilon);
        println!("lhs = {:.12e}", report.lhs);
        println!("rhs = {:.12e}", report.rhs);
        println!("feasible = {}", report.feasible);
        println!("sigma = {:.12e}", report.sigma);
        println!("delta = {:.12e}", report.delta);
        println!("epsilon_max = {:.12e}", report.epsilon_max);
        println!("theta = {:.12e}", report.theta);
        println!("lambda = {:.12e}", report.lambda);
        println!("scalar_path = {}", report.scalar_path);
    }
    Ok(if report.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn vector_arg(name: &str, given: Option<Vec<f64>>, len: usize, default: impl Fn(usize) -> f64) -> Result<Vec<f64>, Failure> {
    match given {
        Some(v) if v.len() != len => Err(Failure::input(format!(
            "--{name} needs {len} comma-separated values, got {}",
            v.len()
        ))),
        Some(v) => Ok(v),
        None => Ok((0..len).map(default).collect()),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Outcome {
    let model = load_model(&args.model)?;
    let x0 = vector_arg("x0", args.x0, model.n(), |i| if i == 0 { 1.0 } else { 0.0 })?;
    let u0 = vector_arg("u0", args.u0, model.m(), |_| 0.0)?;
    let signal = DelaySignal::new(args.signal, args.eps)?;
    let history = make_compatible_history(&model, args.eps, &x0, |_| u0.clone(), args.dt)?;
    let residual = compatibility_residual(&model, &history)?;

    let (trace, diverged_at) = match simulate_closed_loop(&model, &signal, &history, args.tfinal, args.dt) {
        Ok(trace) => (trace, None),
        Err(Error::Divergence { t, partial }) => match *partial {
            PartialTrace::ClosedLoop(trace) => (trace, Some(t)),
            PartialTrace::Comparison(_) => unreachable!("closed-loop run returned a comparison trace"),
        },
        Err(e) => return Err(e.into()),
    };
    write_trace_csv(&trace, &args.out)?;

    let burn_in = args.burn_in.unwrap_or(2.0 * (model.r() + args.eps));
    let fit = summary_fit(&trace, burn_in);
    let summary = json!({
        "epsilon": args.eps,
        "signal": args.signal.to_string(),
        "dt": args.dt,
        "t_final": trace.final_time(),
        "points": trace.len(),
        "burn_in": burn_in,
        "compatibility_residual": residual,
        "diverged": diverged_at.is_some(),
        "diverged_at": diverged_at,
        "trace": args.out.display().to_string(),
        "fit": fit,
    });
    print_json(&summary)?;
    match diverged_at {
        Some(t) => {
            eprintln!("error: solution diverged at t = {t}; partial trace written");
            Ok(EXIT_DIVERGED)
        }
        None => Ok(0),
    }
}

fn summary_fit(trace: &SimTrace, burn_in: f64) -> serde_json::Value {
    match fit_decay(trace, burn_in) {
        Ok(fit) => json!({
            // serde_json has no infinity; an exact zero trace reports null
            "sigma_hat": if fit.sigma_hat.is_finite() { Some(fit.sigma_hat) } else { None },
            "q_hat": fit.q_hat,
            "estimate_holds": fit.estimate_holds,
            "exact_zero": fit.exact_zero,
            "fitted_points": fit.fitted_points,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn cmd_figure1(args: Figure1Args) -> Outcome {
    let grid = p_grid(args.pmin, args.pmax, args.steps)?;
    let rows = figure1_sweep_parallel(&grid, args.jobs.max(1))?;
    match &args.out {
        Some(path) => {
            write_sweep_csv(&rows, path)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => write_sweep_csv_to(&rows, std::io::stdout().lock())?,
    }
    let open: Vec<f64> = rows
        .iter()
        .filter(|r| r.blue_lower_open || r.blue_upper_open)
        .map(|r| r.p)
        .collect();
    if !open.is_empty() {
        eprintln!("warning: constant-delay window is open-ended for p in {open:?}");
    }
    Ok(0)
}

#[derive(Serialize)]
struct Certificate {
    epsilon: f64,
    theta: f64,
    lambda: f64,
    sigma: f64,
    delta: f64,
    scalar_path: bool,
    feasible: bool,
}

fn cmd_certify(args: CertifyArgs) -> Outcome {
    let model = load_model(&args.model)?;
    let scalar = model.n() == 1;
    let sys = closed_loop_system(&model, args.mu)?;
    let check = small_gain_check(&sys, args.eps, scalar)?;
    if !check.feasible {
        eprintln!(
            "infeasible at epsilon = {}: lhs = {:.12e} is not below rhs = {:.12e}",
            args.eps, check.lhs, check.rhs
        );
        return Ok(EXIT_INFEASIBLE);
    }
    let cert = certify_sigma_with(&sys, args.eps, scalar)?;

    // Re-verify every defining inequality before emitting.
    let env = sys.envelope();
    let delta = contraction_gain(&sys, args.eps, cert.sigma, scalar)?;
    let valid = env.theta >= 1.0
        && env.lambda > 0.0
        && cert.sigma > 0.0
        && cert.sigma < env.lambda
        && delta < 1.0
        && delta == cert.delta;
    if !valid {
        return Err(Failure {
            code: EXIT_NUMERICAL,
            message: format!(
                "certificate failed re-verification (sigma = {}, delta = {delta})",
                cert.sigma
            ),
        });
    }
    let out = Certificate {
        epsilon: args.eps,
        theta: env.theta,
        lambda: env.lambda,
        sigma: cert.sigma,
        delta,
        scalar_path: scalar,
        feasible: true,
    };
    if args.json {
        print_json(&out)?;
    } else {
        println!("epsilon = {:.12e}", out.epsilon);
        println!("theta = {:.12e}", out.theta);
        println!("lambda = {:.12e}", out.lambda);
        println!("sigma = {:.12e}", out.sigma);
        println!("delta = {:.12e}", out.delta);
        println!("scalar_path = {}", out.scalar_path);
        println!("feasible = {}", out.feasible);
    }
    Ok(0)
}

fn cmd_analyze(args: AnalyzeArgs) -> Outcome {
    let model = load_model(&args.model)?;
    let form = match args.form.as_str() {
        "x" => CharForm::ReducedX,
        "p" => CharForm::ReducedP,
        other => return Err(Failure::input(format!("--form must be x or p, got {other}"))),
    };
    if args.n < MIN_NODES {
        return Err(Failure::input(format!("--N must be at least {MIN_NODES}")));
    }
    let pencil = DelayPencil::from_model(&model, args.tau, form)?;
    let root = rightmost_root(&pencil, args.n)?;
    let verdict = if root.is_stable() { "stable" } else { "unstable" };
    if args.json {
        print_json(&json!({
            "tau": args.tau,
            "re": root.root.re,
            "im": root.root.im,
            "estimate_re": root.estimate.re,
            "estimate_im": root.estimate.im,
            "residual": root.residual,
            "refined": root.refined,
            "verdict": verdict,
        }))?;
    } else {
        println!("tau = {}", args.tau);
        println!("rightmost root = {:.12e} {:+.12e}i", root.root.re, root.root.im);
        println!("residual = {:.3e}", root.residual);
        println!("refined = {}", root.refined);
        println!("verdict = {verdict}");
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Margin(a) => cmd_margin(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Figure1(a) => cmd_figure1(a),
        Command::Certify(a) => cmd_certify(a),
        Command::AnalyzeConstant(a) => cmd_analyze(a),
    };
    let _ = std::io::stdout().flush();
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
