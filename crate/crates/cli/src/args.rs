use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "permsft",
    version,
    about = "Entropy, pressure and permanent estimates for restricted-permutation shifts on Z^d"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalOpts,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Worker threads for the data-parallel kernels (1 runs sequentially).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Node budget for the exact permanent kernels.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    /// Permanent kernel.
    #[arg(long, value_enum, default_value_t = BackendArg::Auto, global = true)]
    pub backend: BackendArg,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Auto,
    Ryser,
    Backtrack,
    Profile,
    InclusionExclusion,
}

/// Where the element comes from.
#[derive(Args, Debug, Clone, Default)]
pub struct ElementArgs {
    /// JSON element file: {"dim": d, "terms": [{"exp": [..], "coef": c}, ..]}.
    #[arg(long, conflicts_with_all = ["inline", "set"])]
    pub input: Option<PathBuf>,
    /// The element as inline JSON.
    #[arg(long, conflicts_with = "set")]
    pub inline: Option<String>,
    /// Indicator of a point set: points separated by ';', coordinates by ','.
    /// Without ';' the integers are grouped by --dim.
    #[arg(long, allow_hyphen_values = true)]
    pub set: Option<String>,
    /// Lattice dimension for --set.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
}

#[derive(Args, Debug, Clone)]
pub struct QuadratureArgs {
    /// Points per dimension on the coarsest quadrature grid.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Grid doublings after the coarsest grid.
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    /// Smallest floor of the log-singularity sweep.
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Topological entropy bracket for the indicator of the support.
    Entropy {
        #[command(flatten)]
        element: ElementArgs,
        /// Cube sides `lo..hi` (inclusive) for the window upper bounds.
        #[arg(long, default_value = "2..8")]
        windows: String,
        /// Tori, e.g. "4x4,5x5", or a side range "4..8" for cubes.
        #[arg(long)]
        tori: Option<String>,
    },
    /// Pressure `per(f)` of a nonnegative weighted element.
    Pressure {
        #[command(flatten)]
        element: ElementArgs,
        #[arg(long, default_value = "2..8")]
        windows: String,
        #[arg(long)]
        tori: Option<String>,
        /// Add the determinant lower bound (requires a quadrature).
        #[arg(long)]
        with_det: bool,
        #[command(flatten)]
        quadrature: QuadratureArgs,
    },
    /// `per` and `iper` of one element on one window.
    Permanent {
        #[command(flatten)]
        element: ElementArgs,
        /// Window as JSON ({"box": {..}} or {"points": [..]}) or a cube side.
        #[arg(long)]
        window: String,
        /// Alphabet as a point list (same syntax as --set); defaults to the support.
        #[arg(long, allow_hyphen_values = true)]
        alphabet: Option<String>,
    },
    /// Logarithmic Mahler measure (Fuglede-Kadison determinant) of a signed element.
    Mahler {
        #[command(flatten)]
        element: ElementArgs,
        #[command(flatten)]
        quadrature: QuadratureArgs,
        /// Also report finite sections on cubes `lo..hi`.
        #[arg(long)]
        sections: Option<String>,
    },
    /// Permanent side against determinant side for an example family.
    Compare {
        /// quad-Z2, dimer, affine-Z2, trinomial-Z, three-point-Z or four-point-Z.
        #[arg(long)]
        family: String,
        /// Comma-separated parameters; repeat the flag for a sweep.
        #[arg(long, required = true)]
        params: Vec<String>,
        /// Exponent K of the three- and four-point families.
        #[arg(long)]
        k: Option<usize>,
        /// Cube sides for the window upper bounds of planar families.
        #[arg(long, default_value = "6..6")]
        windows: String,
        /// Square torus sides for the heuristic torus values of planar families.
        #[arg(long)]
        tori: Option<String>,
        /// Report both determinant representatives and their difference.
        #[arg(long)]
        representatives: bool,
        #[command(flatten)]
        quadrature: QuadratureArgs,
    },
    /// Periodic-point (torus) values.
    Periodic {
        #[command(flatten)]
        element: ElementArgs,
        #[arg(long)]
        tori: String,
    },
    /// Runs the invariant suite on a seeded random corpus.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Random instances per check.
        #[arg(long, default_value_t = 60)]
        cases: usize,
    },
}
