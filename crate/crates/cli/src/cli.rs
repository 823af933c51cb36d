use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mbasis", version, about = "Build and verify almost-Auerbach biorthogonal systems")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Epsilon source: const:<v>, power:<p>, geometric:<r> or file:<path>
    #[arg(long, global = true, default_value = "const:1")]
    pub eps: String,
    /// Drop zero epsilons and sort instead of rejecting them
    #[arg(long, global = true)]
    pub normalize: bool,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Largest ambient dimension a construction may produce
    #[arg(long, global = true, default_value_t = mbasis::systems::DEFAULT_MAX_DIM)]
    pub max_dim: usize,
    /// Relative tolerance for iterative spectral norms
    #[arg(long, global = true, default_value_t = mbasis::analysis::DEFAULT_TOL)]
    pub tol: f64,
    /// Output path; stdout when omitted
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a system and write it as JSON
    #[command(subcommand)]
    Construct(Construct),
    /// Residuals, boundedness profile and optional basis constant of a system file
    Analyze(Analyze),
    /// Run the lower-bound witness over adversarial and seeded orderings
    Witness(Witness),
    /// Exhaustive basis-constant search over all orderings of a small system
    Search(Search),
}

#[derive(Subcommand, Debug)]
pub enum Construct {
    /// Truncation of the bounded non-strong system
    T1 {
        #[arg(long)]
        n: usize,
        /// Keep the raw duals instead of projecting onto the primal span
        #[arg(long)]
        raw_duals: bool,
    },
    /// System whose basis constant is at least C under every ordering
    T2 {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = mbasis::systems::DEFAULT_SCAN_CAP)]
        scan_cap: usize,
    },
    /// Direct sum of T2 blocks built on consecutive stretches of epsilon
    Blocks {
        #[arg(long, value_delimiter = ',', required = true)]
        c: Vec<f64>,
        #[arg(long, default_value_t = mbasis::systems::DEFAULT_SCAN_CAP)]
        scan_cap: usize,
    },
}

#[derive(Args, Debug)]
pub struct Analyze {
    pub file: PathBuf,
    /// Ordering for the basis constant: natural, reversed, evens_first, odds_first,
    /// interleave_reversed, random, or explicit images like 3,1,2
    #[arg(long)]
    pub basis_constant: Option<String>,
    /// Prefix length for frame bounds
    #[arg(long)]
    pub frame_prefix: Option<usize>,
    /// Also write the boundedness profile as CSV
    #[arg(long)]
    pub profile_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Witness {
    pub file: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct Search {
    pub file: PathBuf,
    #[arg(long, default_value_t = mbasis::permutations::DEFAULT_EXHAUSTIVE_LIMIT)]
    pub limit: usize,
}
