use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "freebound", version, about = "Free-boundary minimal surfaces: generate, relax, spectra, checks")]
pub struct Cli {
    /// Worker threads for the numerical kernels.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Seed for random perturbations.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Validate every emitted or loaded report against the report schema.
    #[arg(long, global = true)]
    pub schema_check: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exemplar {
    Disk,
    Catenoid,
}

/// Mesh construction shared by `generate` and `pipeline`.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct MeshArgs {
    #[arg(long, value_enum)]
    pub exemplar: Exemplar,
    /// Disk rings.
    #[arg(long, default_value_t = 4)]
    pub n_radial: usize,
    /// Disk boundary vertices.
    #[arg(long, default_value_t = 16)]
    pub n_angular: usize,
    /// Catenoid vertices per ring.
    #[arg(long, default_value_t = 128)]
    pub n_theta: usize,
    /// Catenoid ring count; chosen for near-square cells when omitted.
    #[arg(long)]
    pub n_s: Option<usize>,
    /// Midpoint refinements, with boundary midpoints projected to the sphere.
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    /// Amplitude of a seeded smooth perturbation applied after refinement.
    #[arg(long)]
    pub perturb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    /// Ambient JSON config; the unit ball when omitted.
    #[arg(long)]
    pub ambient: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-3)]
    pub tol_h: f64,
    #[arg(long, default_value_t = 0.017)]
    pub tol_orth: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long)]
    pub no_smoothing: bool,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Write an exemplar mesh as OFF or OBJ.
    Generate {
        #[command(flatten)]
        #[serde(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relax a mesh to a free-boundary minimal surface.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        #[serde(flatten)]
        solver: SolveArgs,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Steklov eigenvalues of a mesh.
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        num_eigs: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Curvature and eigenvalue checks with signed margins.
    Verify {
        #[arg(long)]
        input: PathBuf,
        /// Ambient JSON config; the unit ball when omitted.
        #[arg(long)]
        ambient: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Summarize a saved report, optionally rerunning its configuration.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Rerun the embedded configuration and compare every number.
        #[arg(long)]
        replay: bool,
        /// Relative tolerance for `--replay`.
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Generate, solve, compute the spectrum and verify in one run.
    Pipeline {
        #[command(flatten)]
        #[serde(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        #[serde(flatten)]
        solver: SolveArgs,
        #[arg(long, default_value_t = 5)]
        num_eigs: usize,
        /// Where to write the relaxed mesh.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub command: Command,
}

impl RunConfig {
    pub fn new(cli: &Cli) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cli.seed,
            threads: cli.threads,
            command: cli.command.clone(),
        }
    }
}
