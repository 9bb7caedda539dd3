//! `ktcs`: figure recipes and ad-hoc queries over ktcs-core.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 1 I/O.

mod commands;
mod figures;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ktcs_core::KtcsError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] KtcsError),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) | CliError::Numerical(_) => 3,
            CliError::Invalid(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "ktcs", version, about = "K-dimensional trio coherent states: statistics, phase space, completeness, ion-trap generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// State labels shared by most subcommands. Signed so that negative
/// charges reach validation instead of the argument parser.
#[derive(Args, Debug, Clone)]
pub struct StateArgs {
    #[arg(long = "K", default_value_t = 1, allow_hyphen_values = true)]
    pub k: i64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub j: i64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub p: i64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub q: i64,
    #[arg(long = "xi-re", allow_hyphen_values = true)]
    pub xi_re: Option<f64>,
    #[arg(long = "xi-im", default_value_t = 0.0, allow_hyphen_values = true)]
    pub xi_im: f64,
}

/// A single `--z` or an evenly spaced grid.
#[derive(Args, Debug, Clone)]
pub struct ZArgs {
    #[arg(long, conflicts_with_all = ["z_min", "z_max"])]
    pub z: Option<f64>,
    #[arg(long = "z-min", default_value_t = 1e-3)]
    pub z_min: f64,
    #[arg(long = "z-max", default_value_t = 40.0)]
    pub z_max: f64,
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Number distribution P_n of one state.
    Numdist {
        #[command(flatten)]
        state: StateArgs,
        /// Radius squared; alternative to --xi-re.
        #[arg(long)]
        z: Option<f64>,
        #[arg(long = "n-max")]
        n_max: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mandel parameters (z, Ma, Mb, Mc).
    Mandel {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        z: ZArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cauchy-Schwarz measures (z, G_ab, G_ac, G_bc).
    Csi {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        z: ZArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// pi^3 Q on the alpha=beta=gamma slice, with a metadata sidecar.
    Qfunc {
        #[command(flatten)]
        state: StateArgs,
        /// Grid points per axis.
        #[arg(long, default_value_t = ktcs_core::phase_space::DEFAULT_GRID_N)]
        n: usize,
        /// Half-width of the square window; chosen from xi when absent.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Weight function W~(x) and W(x) of the resolution of unity.
    Weight {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        z: ZArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolution-of-unity matrix on the first levels of a residue class.
    Unity {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long = "n-max", default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 200)]
        radial: usize,
        #[arg(long, default_value_t = 64)]
        angular: usize,
    },
    /// Carleman/logarithmic uniqueness test.
    Carleman {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long = "n-probe", default_value_t = 1_000_000)]
        n_probe: u64,
    },
    /// Fourteen-laser operator identity on random vectors.
    Identity {
        #[arg(long = "n-max", default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Trapped-ion run from a JSON config: trajectories, optionally the
    /// density-matrix oracle.
    Mcwf {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        oracle: bool,
        /// Overrides the seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Data behind one of the twelve figures, from the bundled recipes.
    Figure {
        id: u32,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the trajectory count of stochastic recipes.
        #[arg(long = "n-traj")]
        n_traj: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("KTCS_THREADS") {
        let n: usize = v.parse().map_err(|_| CliError::Invalid(format!("KTCS_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(CliError::Invalid("KTCS_THREADS must be at least 1".into()));
        }
        // a second initialisation in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    use commands as c;
    match cli.command {
        Command::Numdist { state, z, n_max, out } => c::numdist(&state, z, n_max, out.as_deref()),
        Command::Mandel { state, z, out } => c::mandel(&state, &z, out.as_deref()),
        Command::Csi { state, z, out } => c::csi(&state, &z, out.as_deref()),
        Command::Qfunc { state, n, radius, out } => c::qfunc(&state, n, radius, &out),
        Command::Weight { state, z, out } => c::weight(&state, &z, out.as_deref()),
        Command::Unity { state, n_max, radial, angular } => c::unity(&state, n_max, radial, angular),
        Command::Carleman { state, n_probe } => c::carleman(&state, n_probe),
        Command::Identity { n_max, trials, seed } => c::identity(n_max, trials, seed),
        Command::Mcwf { config, oracle, seed, out } => c::mcwf(&config, oracle, seed, &out),
        Command::Figure { id, out, n_traj, seed } => figures::run_figure(id, &out, n_traj, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
