use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use snmf_core::parallel::Selection;
use snmf_core::simgen::{generate, initialize, GeneratorSpec, Method};
use snmf_core::{
    mtx, run_parallel, run_solver, BlockOrderPolicy, Engine, FactorMatrix, ParallelConfig,
    SimilarityMatrix, SolverConfig, StationarityReport, StepsizeRule, StopReason, TraceRecord,
};

/// Symmetric nonnegative matrix factorization by block successive
/// upper-bound minimization.
#[derive(Parser)]
#[command(name = "snmf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic similarity matrix in MatrixMarket format.
    Generate {
        #[command(flatten)]
        spec: GenArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Factorize a matrix and write trace, factor and summary files.
    Solve(SolveArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ck,
    Sgk,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long = "gen-method", value_enum)]
    method: Option<MethodArg>,
    #[arg(long = "gen-n")]
    n: Option<usize>,
    /// Columns of the latent data (defaults to the rank when solving).
    #[arg(long = "gen-m")]
    m: Option<usize>,
    #[arg(long = "gen-sparsity", default_value_t = 0.0)]
    sparsity: f64,
    #[arg(long = "gen-noise", default_value_t = 0.1)]
    noise: f64,
    #[arg(long = "gen-knn")]
    knn: Option<usize>,
    #[arg(long = "gen-scale-neighbor", default_value_t = 7)]
    scale_neighbor: usize,
}

impl GenArgs {
    fn spec(&self, default_m: Option<usize>, seed: u64) -> Result<GeneratorSpec> {
        let method = match self.method {
            Some(MethodArg::Ck) => Method::Ck,
            Some(MethodArg::Sgk) => Method::Sgk,
            None => bail!("--gen-method is required"),
        };
        let Some(n) = self.n else { bail!("--gen-n is required") };
        let Some(m) = self.m.or(default_m) else { bail!("--gen-m is required") };
        Ok(GeneratorSpec {
            method,
            n,
            m,
            sparsity: self.sparsity,
            noise_sigma: self.noise,
            knn_k: self.knn,
            scale_neighbor: self.scale_neighbor,
            seed,
        })
    }

    fn given(&self) -> bool {
        self.method.is_some() || self.n.is_some() || self.m.is_some() || self.knn.is_some()
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Sbsum,
    Vbsum,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Cyclic,
    Permute,
}

#[derive(Args)]
struct SolveArgs {
    /// MatrixMarket file; mutually exclusive with the --gen-* flags.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long, value_enum, default_value = "vbsum")]
    engine: EngineArg,
    /// Block order; with --workers it picks each worker's blocks instead.
    #[arg(long, value_enum, default_value = "cyclic")]
    policy: PolicyArg,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 10)]
    imax: usize,
    #[arg(long, default_value_t = 1000)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 1e-4)]
    gap_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run the parallel solver with this many worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Blocks each worker updates per round (default: all of its blocks).
    #[arg(long)]
    blocks_per_round: Option<usize>,
    #[arg(long)]
    stepsize: Option<f64>,
    /// Use stepsize / sqrt(1 + round) instead of a constant.
    #[arg(long)]
    stepsize_decay: bool,
    /// Output prefix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    n: usize,
    rank: usize,
    engine: &'static str,
    workers: Option<usize>,
    stop: StopReason,
    sweeps: usize,
    objective: f64,
    relative_residual_pct: f64,
    optimality_gap: f64,
    wall_time_s: f64,
}

fn load_matrix(args: &SolveArgs) -> Result<SimilarityMatrix> {
    match (&args.input, args.gen.given()) {
        (Some(_), true) => bail!("--input and --gen-* flags are mutually exclusive"),
        (None, false) => bail!("either --input or --gen-method/--gen-n is required"),
        (Some(path), false) => Ok(mtx::read_path(path)?),
        (None, true) => Ok(generate(&args.gen.spec(Some(args.rank), args.seed)?)?),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    w.write_record(["sweep", "elapsed_s", "objective", "rel_residual_pct", "opt_gap", "blocks"])?;
    for t in trace {
        w.serialize(t)?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn write_factor(path: &Path, x: &FactorMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    for i in 0..x.n() {
        w.write_record(x.row(i).iter().map(|v| format!("{v:?}")))?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<StopReason> {
    if args.rank == 0 {
        bail!("--rank must be at least 1");
    }
    if args.workers.is_none()
        && (args.blocks_per_round.is_some() || args.stepsize.is_some() || args.stepsize_decay)
    {
        bail!("--blocks-per-round, --stepsize and --stepsize-decay require --workers");
    }
    let m = load_matrix(args)?;
    let n = m.n();
    if args.rank > n {
        log::warn!("rank {} exceeds matrix size {n}", args.rank);
    }
    // one seed drives generation, initialization and block selection
    let x0 = initialize(&m, args.rank, args.seed.wrapping_add(1));
    let engine = match args.engine {
        EngineArg::Sbsum => Engine::Scalar,
        EngineArg::Vbsum => Engine::Vector { i_max: args.imax },
    };
    let order_seed = args.seed.wrapping_add(2);

    let start = Instant::now();
    let outcome = match args.workers {
        None => run_solver(
            &m,
            x0,
            &SolverConfig {
                engine,
                policy: match args.policy {
                    PolicyArg::Cyclic => BlockOrderPolicy::cyclic(),
                    PolicyArg::Permute => BlockOrderPolicy::random_permutation(order_seed),
                },
                max_sweeps: args.max_sweeps,
                gap_tol: args.gap_tol,
                ..SolverConfig::default()
            },
        )?,
        Some(workers) => {
            let gamma = args.stepsize.unwrap_or(1.0);
            let stepsize = if args.stepsize_decay {
                StepsizeRule::Diminishing { gamma0: gamma }
            } else {
                StepsizeRule::Constant { gamma }
            };
            run_parallel(
                &m,
                x0,
                &ParallelConfig {
                    engine,
                    workers,
                    blocks_per_round: args.blocks_per_round,
                    stepsize,
                    selection: match args.policy {
                        PolicyArg::Cyclic => Selection::Cyclic,
                        PolicyArg::Permute => Selection::Random,
                    },
                    seed: order_seed,
                    max_rounds: args.max_sweeps,
                    gap_tol: args.gap_tol,
                    ..ParallelConfig::default()
                },
            )?
            .outcome
        }
    };
    let wall = start.elapsed().as_secs_f64();

    write_trace(&with_suffix(&args.out, "_trace.csv"), &outcome.trace)?;
    write_factor(&with_suffix(&args.out, "_factor.csv"), &outcome.x)?;
    let StationarityReport {
        objective,
        relative_residual_percent,
        optimality_gap,
        ..
    } = outcome.report;
    let summary = Summary {
        n,
        rank: args.rank,
        engine: match args.engine {
            EngineArg::Sbsum => "sbsum",
            EngineArg::Vbsum => "vbsum",
        },
        workers: args.workers,
        stop: outcome.stop,
        sweeps: outcome.trace.len(),
        objective,
        relative_residual_pct: relative_residual_percent,
        optimality_gap,
        wall_time_s: wall,
    };
    let path = with_suffix(&args.out, "_summary.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    log::info!(
        "{:?} after {} sweeps: objective {objective:.6e}, gap {optimality_gap:.3e}",
        outcome.stop,
        summary.sweeps
    );
    Ok(outcome.stop)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { spec, seed, out } => {
            let m = generate(&spec.spec(None, seed)?)?;
            mtx::write_path(&m, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve(args) => Ok(match solve(&args)? {
            StopReason::GapTolerance => ExitCode::SUCCESS,
            StopReason::MaxSweeps | StopReason::ObjectiveStalled => ExitCode::from(2),
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
