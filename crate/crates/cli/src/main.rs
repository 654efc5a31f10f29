mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Simulation and verification toolkit for empirical processes of locally
/// stationary time series.
#[derive(Parser, Debug)]
#[command(name = "lsemp", version, about)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "LSEMP_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

/// A process specification as `key=value` pairs separated by `;`, e.g.
/// `family=tvar1;coef=affine(0.2,0.6);innovation=gaussian`.
///
/// Keys: family (iid | tvar1 | tvma | tvarch1), coef, innovation
/// (gaussian | student_t(df) | uniform), scale, ma_decay
/// (poly(gamma) | geom(rho)), ma_scale, arch_a0, arch_a1. Coefficient
/// functions: const(c), affine(a,b), sin(mean,amplitude,frequency,phase).
#[derive(Args, Debug, Clone)]
struct ProcessArg {
    #[arg(long = "process", value_name = "SPEC")]
    process: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Bin,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RateOp {
    Beta,
    Qstar,
    R,
    Vnorm,
    Psi,
    Bound,
    Submult,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FitKind {
    Poly,
    Exp,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate paths (CSV `replicate,index,value` or LSE1 binary).
    Simulate {
        #[command(flatten)]
        process: ProcessArg,
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Burn-in length; defaults to the model's own choice.
        #[arg(long)]
        burnin: Option<usize>,
        /// Simulate the frozen-coefficient process at rescaled time U.
        #[arg(long, value_name = "U", conflicts_with = "coupled_lag")]
        stationary_at: Option<f64>,
        /// Also emit the copy with the innovation K steps back replaced.
        #[arg(long, value_name = "K")]
        coupled_lag: Option<usize>,
        /// Output file; CSV goes to standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Monte Carlo functional dependence measure δ̂_ν(k), k = 0..=kmax.
    Depmeasure {
        #[command(flatten)]
        process: ProcessArg,
        #[arg(short, long)]
        n: usize,
        #[arg(long)]
        kmax: usize,
        #[arg(long, default_value_t = 2.0)]
        nu: f64,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fit a decay law and add a `fitted` column.
        #[arg(long, value_enum)]
        fit: Option<FitKind>,
    },
    /// Rate calculus: β(q), q*(x), r(δ), V_n, ψ, the variance bound and the
    /// submultiplicativity check.
    Rates {
        /// zero | poly:c,alpha | exp:c,rho | polylog:c,alpha | explicit:FILE
        #[arg(long)]
        decay: Option<String>,
        #[arg(long, value_enum)]
        op: RateOp,
        /// Comma-separated arguments. bound takes M,|F|,n,sigma,C_delta
        /// (optionally q); submult takes Q.
        #[arg(long, allow_hyphen_values = true)]
        args: String,
        /// Weight D_n for vnorm and bound.
        #[arg(long, default_value_t = 1.0)]
        dn: f64,
        /// Weight D_n^∞ for bound.
        #[arg(long, default_value_t = 1.0)]
        dinf: f64,
    },
    /// Empirical distribution function of a stored path, optionally localized.
    Edf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        /// Grid as `a,b,c` or `lo:hi:count`.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// Localize at rescaled time V (requires --h).
        #[arg(long, requires = "h")]
        v: Option<f64>,
        #[arg(long, requires = "v")]
        h: Option<f64>,
        #[arg(long, default_value = "epanechnikov")]
        kernel: String,
    },
    /// Time-localized kernel density estimate of a stored path.
    Kde {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        v: String,
        #[arg(long)]
        h1: f64,
        #[arg(long)]
        h2: f64,
        #[arg(long, default_value = "epanechnikov")]
        kernel: String,
    },
    /// Long-run covariance of indicators and Gaussian-limit sup statistics.
    Limit {
        #[command(flatten)]
        process: ProcessArg,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// Frozen rescaled time; ignored with --global.
        #[arg(long, default_value_t = 0.5)]
        v: f64,
        /// Average Σ(u) over u in [0, 1] instead of freezing at v.
        #[arg(long)]
        global: bool,
        #[arg(long, default_value_t = 100_000)]
        pathlen: usize,
        #[arg(long)]
        lagmax: Option<usize>,
        /// Multiply by ∫K² of this kernel (local case).
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of Gaussian-limit draws for the sup statistic.
        #[arg(long, default_value_t = 0)]
        draws: usize,
        /// One-column CSV of sup statistics.
        #[arg(long, requires = "draws")]
        sup_out: Option<PathBuf>,
    },
    /// Run a verification experiment from a configuration file.
    ///
    /// The file has sections [experiment] (kind, name, seed, reps,
    /// pilot_factor, pilot_reps), [process] (see --process), [grids] (x, v,
    /// class_sizes, decays, arg_lo, arg_hi, points_per_decade), [schedule]
    /// (n, h, h1, h2 as c*n^(p) or lists, kernel, lagmax, longrun_pathlen,
    /// limit_draws, side_alpha, side_s) and [tolerances] (variance_rel,
    /// cov_se, ks, sd_halving, slope_lo, slope_hi, trend_violations,
    /// ratio_drift, zero, h_term, corridor, drift). Kinds: fclt_edf,
    /// fclt_local_edf, kde_rate, variance_bound_scaling, table_sandwich.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start {} worker threads: {e}", cli.threads);
        return ExitCode::from(2);
    }
    match commands::run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
