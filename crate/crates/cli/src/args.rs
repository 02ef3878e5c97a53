//! Command-line arguments. Every command-specific field is optional so that
//! the config file can supply it; defaults are applied after merging.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "selftest", version, about = "Self-testing with generalized tilted-CHSH inequalities")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Global {
    /// Output file (stdout if absent). CSV outputs also get `<out>.meta.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON config file; flags take precedence over its entries.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Solver tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classical and quantum bounds of a family member.
    Bounds(BoundsArgs),
    /// Check the closed-form sum-of-squares certificates.
    SosVerify(SosArgs),
    /// Simulate the ideal (or noisy) realization of a target state.
    Simulate(SimulateArgs),
    /// Fidelity lower bounds along a violation grid.
    Robustness(SweepArgs),
    /// Min-entropy bounds along a violation grid.
    Randomness(SweepArgs),
    /// Bounds along the family sharing one measurement angle.
    BoundCurve(CurveArgs),
    /// Family parameters suited to key distribution or private queries.
    AppParams(AppArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bounds(_) => "bounds",
            Command::SosVerify(_) => "sos-verify",
            Command::Simulate(_) => "simulate",
            Command::Robustness(_) => "robustness",
            Command::Randomness(_) => "randomness",
            Command::BoundCurve(_) => "bound-curve",
            Command::AppParams(_) => "app-params",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BoundsArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Sos1,
    Sos2,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SosArgs {
    /// α as an integer, fraction `p/q` or decimal.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<String>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Perturb the first coefficient of each certificate (negative control).
    #[arg(long, hide = true, num_args = 0..=1, default_missing_value = "true")]
    pub corrupt: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// White-noise visibility of the shared state.
    #[arg(long)]
    pub visibility: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseArg {
    Case0,
    Case1,
    Case2,
    Chsh,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SweepArgs {
    /// A reference case; otherwise give --theta and --mu.
    #[arg(long, value_enum)]
    pub case: Option<CaseArg>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Override the family derived from (θ, μ).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Normalized violations, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub grid: Option<Vec<f64>>,
    /// Uniform grid on [0, 1] when --grid is absent.
    #[arg(long)]
    pub points: Option<usize>,
    /// Impose ⟨B⟩ ≥ observed instead of equality.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub inequality: Option<bool>,
    /// Input pair `x,y` for randomness.
    #[arg(long, value_delimiter = ',')]
    pub input: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CurveArgs {
    /// Measurement angle in radians.
    #[arg(long, conflicts_with = "tan_mu")]
    pub mu: Option<f64>,
    /// tan μ instead of μ.
    #[arg(long)]
    pub tan_mu: Option<f64>,
    /// β values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolArg {
    Qkd,
    Qpq,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AppArgs {
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolArg>,
}
