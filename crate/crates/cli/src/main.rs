//! `specfact`: seeded, reproducible runs of the spectrum factorization
//! pipeline with CSV/JSON outputs and per-run manifests.

mod commands;
mod manifest;
mod output;

use clap::{Args, Parser, Subcommand};
use std::process::ExitCode;

/// Exit codes: 1 usage, 2 input, 3 numerical failure.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<specfact_core::Error> for CliError {
    fn from(e: specfact_core::Error) -> Self {
        use specfact_core::Error as E;
        match e {
            E::Parse(_) | E::InvalidSpectrum(_) => CliError::Input(e.to_string()),
            E::Numerical(_)
            | E::ZeroVariance
            | E::DegenerateRange
            | E::NormViolation(_)
            | E::MultisetMismatch(_)
            | E::NonPositiveTemperature(_)
            | E::NonMonotoneEnergy(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "specfact",
    version,
    about = "Decompose spectra into outer sums, count subsystems from DOS moments, \
             and verify partitions by entanglement growth",
    after_help = "Outputs are written atomically and accompanied by a \
                  <output>.manifest.json recording the exact parameters. \
                  Relative output paths resolve against $SPECFACT_DATA_DIR when set. \
                  A JSON config file (--config) can substitute for any flag."
)]
struct Cli {
    /// Bound worker parallelism for ensemble sweeps and restarts.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a spectrum (GOE, chain model, or free couplings).
    Generate(commands::GenerateArgs),
    /// Standardized moments and Gaussian deviations of a spectrum.
    Moments(commands::MomentsArgs),
    /// Estimate the number of elementary subsystems from a spectrum.
    Count(commands::CountArgs),
    /// Factor a spectrum into two factor spectra by outer-sum matching.
    Partition(commands::PartitionArgs),
    /// Recursively bipartition a spectrum down to small leaves.
    Recurse(commands::RecurseArgs),
    /// Entanglement-growth comparison between the optimized partition and a
    /// random arrangement of the same spectrum.
    Entangle(commands::EntangleArgs),
    /// Forward thermodynamics, DOS reconstruction and the heated-box count.
    Thermo(commands::ThermoArgs),
}

/// Shared optimizer flags.
#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Independent optimizer restarts.
    #[arg(long, default_value_t = 8)]
    restarts: usize,

    /// Iteration cap per restart.
    #[arg(long, default_value_t = 4000)]
    max_iterations: usize,

    /// Gradient tolerance (relative to 1 + |cost|).
    #[arg(long, default_value_t = 1e-12)]
    gradient_tolerance: f64,

    /// RNG seed for restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Initialization scheme: random-gaussian or quantile-block.
    #[arg(long, default_value = "random-gaussian")]
    init: String,
}

impl SolverArgs {
    pub fn to_options(&self) -> CliResult<specfact_core::PartitionOptions> {
        let init_scheme = match self.init.as_str() {
            "random-gaussian" => specfact_core::InitScheme::RandomGaussian,
            "quantile-block" => specfact_core::InitScheme::QuantileBlock,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown init scheme `{other}` (expected random-gaussian or quantile-block)"
                )))
            }
        };
        Ok(specfact_core::PartitionOptions {
            restarts: self.restarts,
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            seed: self.seed,
            init_scheme,
        })
    }
}

fn main() -> ExitCode {
    let args = match output::apply_config(std::env::args().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return ExitCode::from(e.code());
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    if let Some(jobs) = cli.jobs {
        // Ignore failure if a pool already exists (e.g. repeat invocation in
        // tests within one process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }

    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Moments(a) => commands::moments(a),
        Command::Count(a) => commands::count(a),
        Command::Partition(a) => commands::partition(a),
        Command::Recurse(a) => commands::recurse(a),
        Command::Entangle(a) => commands::entangle(a),
        Command::Thermo(a) => commands::thermo(a),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
