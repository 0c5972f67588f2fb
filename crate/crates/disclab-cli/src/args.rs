//! Command-line and config-file parameter blocks. Every field is optional
//! so a flag can be told apart from a config value; defaults are applied
//! after merging.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "disclab", version, about = "Growth-construction experiments in the unit disc")]
pub struct Cli {
    /// TOML config with sections [scaffold], [profile], [riesz], [series],
    /// [logderiv], [ode].
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the irregular scaffold.
    Scaffold(ScaffoldArgs),
    /// Sample the radial profile and its junctions.
    Profile(ProfileArgs),
    /// Partition one generation into mass-2 cells and check masses and arcs.
    Riesz(RieszArgs),
    /// Sparse series with prescribed tie radii.
    Series(SeriesArgs),
    /// Logarithmic-derivative windows, integrals and certificates.
    Logderiv(LogDerivArgs),
    /// Linear ODE solver, predictors and order audit.
    Ode(OdeArgs),
    /// Collate JSON outputs into a pass/fail table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub p2: Option<f64>,
    /// Defaults to p2.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub log_c: Option<f64>,
    #[arg(long)]
    pub g1: Option<f64>,
    /// Explicit spacing factors, comma separated; default `n + 1`.
    #[arg(long, value_delimiter = ',')]
    pub eta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ScaffoldArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Generation table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ProfileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Evenly spaced sample log-gaps over the constructed range.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RieszArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub generation: Option<usize>,
    /// Partition stops at this log-gap.
    #[arg(long)]
    pub g_max: Option<f64>,
    /// Randomly chosen cells whose mass is checked by quadrature.
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exclusion radii for the arc measure, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Number of circles for the arc measure.
    #[arg(long)]
    pub circles: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesOp {
    Prop43,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    A,
    B,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SeriesArgs {
    #[arg(value_enum, required = true)]
    #[serde(skip)]
    pub op: Option<SeriesOp>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Number of tie radii after the first.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Trace rows between the first and last tie radius.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Indicator trace CSV: g, log_mu, nu, K_log.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogDerivOp {
    /// Low-order windows for g_n = base^n and their upper density.
    Density,
    /// `I_α` for the model `log M = (1-t)^{-s}`.
    IAlpha,
    /// Zero-free certificate for `exp((1-z)^{-p})`.
    Certificate,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct LogDerivArgs {
    #[arg(value_enum, required = true)]
    #[serde(skip)]
    pub op: Option<LogDerivOp>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub base: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub j: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Log-gap windows `lo:hi`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdeOp {
    /// Closed-form orders from (k, p1, p2, p).
    Predict,
    /// The root ξ and exponent β with the identity residual.
    Xi,
    /// Orders of the test function h_α.
    Halpha,
    /// Deviation of (ρ/r)^{1/(1-r)} from e.
    Pmppvk,
    /// Taylor solution for A = -q(1-z)^{-(q+1)} and its audit.
    Solve,
    /// HKR majorant of a profile-built coefficient and its audit.
    Majorant,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct OdeArgs {
    #[arg(value_enum, required = true)]
    #[serde(skip)]
    pub op: Option<OdeOp>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub kappa1: Option<f64>,
    #[arg(long)]
    pub kappa2: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Pole order of the solved coefficient.
    #[arg(long)]
    pub pole: Option<u32>,
    #[arg(long)]
    pub g_lo: Option<f64>,
    #[arg(long)]
    pub g_hi: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Minimum g-range accepted by the order estimator.
    #[arg(long)]
    pub min_range: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Radial samples CSV: g, log_logM, ratio.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ReportArgs {
    /// JSON-lines files written by the other subcommands.
    pub inputs: Vec<PathBuf>,
    /// Markdown table; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
