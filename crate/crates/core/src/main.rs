use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use fclms::design::{
    dlms_stability_bound, dnlms_stability_bound, min_weighted_square, optimal_weights_snr, optimal_weights_speed,
    DesignInput, WeightMode,
};
use fclms::harness::{
    compare_stability, describe_builtin, resolve_spec, run_experiment, spec_to_toml, write_outputs, ExperimentSpec,
    RunOptions, StabilityOptions, TheoryModel, BUILTIN_NAMES,
};
use fclms::{Error, Result};

/// Environment variable holding the default worker count.
const WORKERS_ENV: &str = "FCLMS_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "fclms", version, about = "Diffusion LMS/NLMS with a fusion center: simulation and MSD models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo only.
    Simulate(RunArgs),
    /// Analytical models only.
    Theory(RunArgs),
    /// Models and Monte Carlo side by side, with a comparison report.
    Experiment(RunArgs),
    /// Stability bounds and combination weights.
    #[command(subcommand)]
    Design(DesignCommand),
    /// Sweep step sizes over multiples of the isolated-node bound.
    Stability(StabilityArgs),
    /// List the built-in experiments.
    ListBuiltins {
        /// Print the named builtin as a TOML spec.
        #[arg(long, value_name = "NAME")]
        dump: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    General,
    Slow,
    Both,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Builtin name or path to a TOML spec.
    spec: String,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix; `.csv` is appended.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo (defaults to $FCLMS_WORKERS, then all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Override the spec's theory model.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Exit with status 2 if the steady-state gap exceeds this many dB.
    #[arg(long, value_name = "DB")]
    assert_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Dlms,
    Dnlms,
}

#[derive(Debug, Subcommand)]
enum DesignCommand {
    /// Step-size stability bound.
    Bounds(BoundsArgs),
    /// Optimal combination weights.
    Weights(WeightsArgs),
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long = "M", value_name = "M")]
    nodes: usize,
    #[arg(long = "N", value_name = "N")]
    taps: usize,
    /// One kurtosis for all nodes, or one per node.
    #[arg(long, value_delimiter = ',', required = true)]
    kurtosis: Vec<f64>,
    /// Use c_j = 1/M (the default when --weights is absent).
    #[arg(long, conflicts_with = "weights")]
    uniform_weights: bool,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "dlms")]
    algorithm: AlgorithmArg,
    /// DNLMS only: report the bound at the bound-maximizing weights.
    #[arg(long)]
    optimal: bool,
    #[arg(long, default_value_t = 4)]
    digits: usize,
}

#[derive(Debug, Args)]
struct WeightsArgs {
    /// Nodal SNRs; gives the steady-state optimal weights.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["eta", "kurtosis"])]
    snr: Option<Vec<f64>>,
    /// Kurtoses; gives the convergence-speed optimal weights (needs --N).
    #[arg(long, value_delimiter = ',', requires = "taps", conflicts_with = "eta")]
    kurtosis: Option<Vec<f64>>,
    /// Generic positive vector: minimizes sum c_j^2 / eta_j.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    #[arg(long = "N", value_name = "N")]
    taps: Option<usize>,
    #[arg(long, default_value_t = 4)]
    digits: usize,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    /// Builtin name or path to a TOML spec.
    spec: String,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4")]
    multipliers: Vec<f64>,
    /// Also simulate each multiplier with this many runs.
    #[arg(long)]
    mc_runs: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn default_workers(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::InvalidParameter {
                name: WORKERS_ENV.to_string(),
                reason: format!("`{v}` is not a worker count"),
            }),
        Err(_) => Ok(None),
    }
}

fn apply_overrides(args: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = resolve_spec(&args.spec)?;
    if let Some(r) = args.runs {
        if r == 0 {
            return Err(Error::InvalidParameter {
                name: "--runs".into(),
                reason: "need at least one run".into(),
            });
        }
        spec.runs = r;
    }
    if let Some(h) = args.horizon {
        if h == 0 {
            return Err(Error::InvalidParameter {
                name: "--horizon".into(),
                reason: "need at least one sample".into(),
            });
        }
        spec.horizon = h;
    }
    if let Some(s) = args.seed {
        spec.master_seed = s;
    }
    if let Some(out) = &args.out {
        spec.outputs = out.clone();
    }
    if let Some(m) = args.model {
        spec.theory_model = match m {
            ModelArg::General => TheoryModel::General,
            ModelArg::Slow => TheoryModel::Slow,
            ModelArg::Both => TheoryModel::Both,
        };
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => run_spec(&args, true, false),
        Command::Theory(args) => run_spec(&args, false, true),
        Command::Experiment(args) => run_spec(&args, true, true),
        Command::Design(cmd) => design(cmd),
        Command::Stability(args) => stability(args),
        Command::ListBuiltins { dump } => {
            match dump {
                Some(name) => print!("{}", spec_to_toml(&resolve_spec(&name)?)),
                None => {
                    for name in BUILTIN_NAMES {
                        println!("{name:<6} {}", describe_builtin(name).unwrap_or_default());
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_spec(args: &RunArgs, monte_carlo: bool, theory: bool) -> Result<ExitCode> {
    let Format::Csv = args.format;
    let spec = apply_overrides(args)?;
    let opts = RunOptions {
        monte_carlo,
        theory,
        workers: default_workers(args.workers)?,
    };
    info!("running {} ({} runs, horizon {})", spec.name, spec.runs, spec.horizon);
    let out = run_experiment(&spec, &opts)?;
    for path in write_outputs(&out, &spec.outputs)? {
        println!("wrote {}", path.display());
    }
    if let Some(mc) = &out.mc {
        if mc.diverged_runs > 0 {
            println!("{}: {} of {} runs diverged", spec.name, mc.diverged_runs, mc.runs);
        }
    }
    for t in &out.theory {
        if let Some(n) = t.diverged_at {
            println!("{}: {:?} model diverged at n = {n}", spec.name, t.kind);
        }
    }
    if let Some(r) = &out.report {
        let ripple = r.ripple_period_detected.map_or_else(|| "none".to_string(), |p| p.to_string());
        println!(
            "{}: steady_state_gap_db={:.3} max_transient_gap_db={:.3} burn_in={} window={} ripple_period={} diverged={} theory_db={:.2} mc_db={:.2}",
            spec.name,
            r.steady_state_gap_db,
            r.max_transient_gap_db,
            r.burn_in,
            r.window,
            ripple,
            r.diverged,
            r.theory_steady_state_db,
            r.mc_steady_state_db
        );
        if let Some(limit) = args.assert_gap {
            if !(r.steady_state_gap_db <= limit) {
                eprintln!(
                    "{}: steady-state gap {:.3} dB exceeds {limit} dB",
                    spec.name, r.steady_state_gap_db
                );
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn per_node(values: Vec<f64>, nodes: usize, flag: &str) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; nodes]),
        n if n == nodes => Ok(values),
        n => Err(Error::InvalidParameter {
            name: flag.into(),
            reason: format!("expected 1 or {nodes} values, got {n}"),
        }),
    }
}

fn fmt_num(x: f64, digits: usize) -> String {
    if x == 0.0 || (1e-3..1e4).contains(&x.abs()) {
        format!("{x:.digits$}")
    } else {
        format!("{x:.digits$e}")
    }
}

fn join(xs: &[f64], digits: usize) -> String {
    xs.iter().map(|x| format!("{x:.digits$}")).collect::<Vec<_>>().join(",")
}

fn design(cmd: DesignCommand) -> Result<ExitCode> {
    match cmd {
        DesignCommand::Bounds(a) => {
            let mut d = DesignInput::new(a.taps, per_node(a.kurtosis, a.nodes, "--kurtosis")?)?;
            if let Some(w) = a.weights {
                d = d.with_weights(w)?;
            }
            let digits = a.digits;
            let bound = match a.algorithm {
                AlgorithmArg::Dlms => dlms_stability_bound(&d),
                AlgorithmArg::Dnlms => {
                    let mode = if a.optimal { WeightMode::Optimal } else { WeightMode::Given };
                    dnlms_stability_bound(&d, mode)
                }
            };
            println!("{bound:.digits$}");
            eprintln!("note: supremum of stable steps, WSS-slow-power regime");
        }
        DesignCommand::Weights(a) => {
            let digits = a.digits;
            let (weights, min) = if let Some(snr) = a.snr {
                let nodes = snr.len();
                let d = DesignInput::new(a.taps.unwrap_or(1), vec![1.0; nodes])?.with_snrs(snr)?;
                let w = optimal_weights_snr(&d)?;
                (w.weights, w.min_weighted_inverse_snr)
            } else if let Some(k) = a.kurtosis {
                let taps = a.taps.expect("clap enforces --N with --kurtosis");
                let w = optimal_weights_speed(&DesignInput::new(taps, k)?)?;
                (w.weights, w.min_spread)
            } else if let Some(eta) = a.eta {
                min_weighted_square(&eta)?
            } else {
                return Err(Error::InvalidParameter {
                    name: "design weights".into(),
                    reason: "give one of --snr, --kurtosis or --eta".into(),
                });
            };
            println!("weights {}", join(&weights, digits));
            println!("minimum {}", fmt_num(min, digits));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn stability(a: StabilityArgs) -> Result<ExitCode> {
    let spec = resolve_spec(&a.spec)?;
    let opts = StabilityOptions {
        mc_runs: a.mc_runs,
        mc_horizon: a.horizon,
        workers: default_workers(a.workers)?,
        ..StabilityOptions::default()
    };
    let rows = compare_stability(&spec, &a.multipliers, &opts)?;
    println!("multiplier,theory_growth,theory_diverged,predicted_stable,mc_diverged,agree");
    for r in rows {
        let mc = r.mc_diverged.map_or_else(String::new, |d| d.to_string());
        println!(
            "{},{:.9},{},{},{},{}",
            r.multiplier,
            r.theory_growth,
            r.theory_diverged,
            r.predicted_stable,
            mc,
            r.agrees()
        );
    }
    Ok(ExitCode::SUCCESS)
}
