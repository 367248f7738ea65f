//! `meixner` — reproducible experiments on free Meixner laws.
//!
//! Subcommands compute moment tables by several routes, evaluate the
//! closed-form density, dump non-crossing partitions, evaluate operator
//! words on the truncated Fock model, run the random-matrix experiments
//! from declarative config files, and check conditional freeness. Every
//! run with an output directory writes a manifest that replays exactly.

mod report;
mod rmt_run;
mod run;

use clap::{Args, Parser, Subcommand};

use run::{AppError, CommandSpec};

#[derive(Parser)]
#[command(name = "meixner", version, about = "Free Meixner law toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Moment table by the combinatorial, tridiagonal, and Fock routes.
    Moments(MomentsArgs),
    /// Closed-form density curve with a quadrature mass/moment report.
    Density(DensityArgs),
    /// Evaluate an operator word on the truncated Fock model.
    Fock(FockArgs),
    /// Dump non-crossing partitions with their depth vectors.
    Nc(NcArgs),
    /// Random-matrix experiments driven by a TOML config file.
    Rmt(RmtArgs),
    /// Conditional-freeness kernel test (and freeness-violation witness).
    Cfree(CfreeArgs),
    /// Re-run a previous invocation from its manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct ParamArgs {
    /// First diagonal Jacobi coefficient.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a1: f64,
    /// Tail diagonal Jacobi coefficient.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a2: f64,
    /// First off-diagonal Jacobi coefficient (non-negative).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    b1: f64,
    /// Tail off-diagonal Jacobi coefficient (non-negative).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    b2: f64,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory; when set, results and a manifest are written there.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Stdout rendering: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Largest moment order.
    #[arg(long, default_value_t = 8)]
    mmax: usize,
    /// Fock truncation depth (default: smallest exact depth).
    #[arg(long)]
    depth: Option<usize>,
    /// Comma-separated subset of {comb,tridiag,fock}.
    #[arg(long, default_value = "comb,tridiag,fock")]
    methods: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Grid start (default: left support edge).
    #[arg(long, allow_negative_numbers = true)]
    xmin: Option<f64>,
    /// Grid end (default: right support edge).
    #[arg(long, allow_negative_numbers = true)]
    xmax: Option<f64>,
    /// Number of grid points.
    #[arg(long, default_value_t = 401)]
    steps: usize,
    /// Simpson panels for the quadrature report.
    #[arg(long, default_value_t = 2000)]
    panels: usize,
    /// Evaluate the formula for non-standardized parameters anyway
    /// (unsupported; skips the quadrature report).
    #[arg(long)]
    nonstandard_ok: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct FockArgs {
    /// Operator word, e.g. "p1* p2* p2 p1" or "y y y".
    #[arg(long)]
    word: String,
    #[command(flatten)]
    params: ParamArgs,
    /// Truncation depth (default: smallest exact depth for the word).
    #[arg(long)]
    depth: Option<usize>,
    /// Vacuum state: 1 or 2.
    #[arg(long, default_value_t = 1)]
    state: u8,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct NcArgs {
    /// Ground-set size.
    #[arg(long)]
    m: usize,
    /// Restrict to pair partitions.
    #[arg(long)]
    pairs_only: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct RmtArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: std::path::PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with code 3 if any estimate misses its acceptance band.
    #[arg(long)]
    check: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CfreeArgs {
    /// Alternating word of label names, e.g. "s,u,s".
    #[arg(long, default_value = "s,u,s")]
    word: String,
    /// Per-position polynomial degrees, e.g. "3,3,3".
    #[arg(long, default_value = "3,3,3")]
    degrees: String,
    /// Random coefficient draws.
    #[arg(long, default_value_t = 200)]
    draws: usize,
    /// Seed for the coefficient draws.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    params: ParamArgs,
    /// Truncation depth (default: smallest exact depth).
    #[arg(long)]
    depth: Option<usize>,
    /// Also compute the freeness-violation witness pair.
    #[arg(long)]
    witness: bool,
    /// Matrix-model estimate of the witness pair (requires --witness).
    #[arg(long)]
    matrix: bool,
    /// Matrix size for --matrix.
    #[arg(long, default_value_t = 512)]
    n: usize,
    /// Block exponent for --matrix.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Trials for --matrix.
    #[arg(long, default_value_t = 400)]
    trials: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ReplayArgs {
    /// Manifest written by a previous run.
    #[arg(long)]
    manifest: std::path::PathBuf,
    /// Output directory for the replayed run.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Stdout rendering: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Moments(args) => {
            let spec = CommandSpec::Moments {
                a1: args.params.a1,
                a2: args.params.a2,
                b1: args.params.b1,
                b2: args.params.b2,
                mmax: args.mmax,
                depth: args.depth,
                methods: run::parse_methods(&args.methods)?,
            };
            run::execute(&spec, args.out.out.as_deref(), &args.out.format, false)
        }
        Command::Density(args) => {
            let spec = CommandSpec::Density {
                a1: args.params.a1,
                a2: args.params.a2,
                b1: args.params.b1,
                b2: args.params.b2,
                xmin: args.xmin,
                xmax: args.xmax,
                steps: args.steps,
                panels: args.panels,
                nonstandard_ok: args.nonstandard_ok,
            };
            run::execute(&spec, args.out.out.as_deref(), &args.out.format, false)
        }
        Command::Fock(args) => {
            let spec = CommandSpec::Fock {
                word: args.word,
                a1: args.params.a1,
                a2: args.params.a2,
                b1: args.params.b1,
                b2: args.params.b2,
                depth: args.depth,
                state: args.state,
            };
            run::execute(&spec, args.out.out.as_deref(), &args.out.format, false)
        }
        Command::Nc(args) => {
            let spec = CommandSpec::Nc {
                m: args.m,
                pairs_only: args.pairs_only,
            };
            run::execute(&spec, args.out.out.as_deref(), &args.out.format, false)
        }
        Command::Rmt(args) => {
            let mut config = rmt_run::load_config(&args.config)?;
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            let spec = CommandSpec::Rmt {
                config,
                check: args.check,
            };
            run::execute(&spec, args.out.out.as_deref(), &args.out.format, false)
        }
        Command::Cfree(args) => {
            let word: Vec<String> = args.word.split(',').map(|s| s.trim().to_string()).collect();
            let degrees = run::parse_degrees(&args.degrees)?;
            let spec = CommandSpec::Cfree {
                word,
                degrees,
                draws: args.draws,
                seed: args.seed,
                a1: args.params.a1,
                a2: args.params.a2,
                b1: args.params.b1,
                b2: args.params.b2,
                depth: args.depth,
                witness: args.witness,
                matrix: args.matrix,
                n: args.n,
                rho: args.rho,
                trials: args.trials,
            };
            run::execute(&spec, args.out.out.as_deref(), &args.out.format, false)
        }
        Command::Replay(args) => {
            let spec = run::load_manifest(&args.manifest)?;
            run::execute(&spec, args.out.as_deref(), &args.format, true)
        }
    }
}
