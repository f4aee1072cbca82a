use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "narrowline",
    version,
    about = "Saturated atom-cavity spectroscopy: steady states, stability, lock budgets, lineshapes"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Global {
    /// Emit JSON instead of CSV/text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the result here (plus a `.manifest.json` sidecar) instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Seed for stochastic subcommands.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Species from the catalog (built-in unless --config is given).
    #[arg(long, global = true)]
    pub species: Option<String>,
    /// Catalog or single species record (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Also write a gnuplot script next to --out.
    #[arg(long, global = true)]
    pub gnuplot: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived rates and the dimensionless operating point of a system.
    Params(SystemArgs),
    /// Intracavity intensity against drive.
    Bistability(BistabilityArgs),
    /// Intracavity intensity against atomic detuning.
    Spectrum(SpectrumArgs),
    /// Intensity over the (delta, theta) plane.
    Surface(SurfaceArgs),
    /// Jacobian verdicts, optionally with time-domain escape tests.
    Stability(StabilityArgs),
    /// Quasi-static drive ramp up and down.
    Hysteresis(HysteresisArgs),
    /// Shot-noise-limited lock budget.
    Metrology(SystemArgs),
    /// Lock budget summary for every catalog species.
    Table1,
    /// Lock-point shift from a cavity offset.
    Pulling(PullingArgs),
    /// Monte-Carlo lineshape of a white-frequency-noise lock.
    Locksim(LocksimArgs),
    /// Re-run the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SystemArgs {
    /// Override the atom number.
    #[arg(long)]
    pub atoms: Option<u64>,
    #[arg(long)]
    pub finesse: Option<f64>,
    /// Drive parameter `4 I_in / C^2`.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PointArgs {
    /// Collective cooperativity (defaults to the selected species, else 100).
    #[arg(long = "C")]
    pub cooperativity: Option<f64>,
    /// Scaled atomic detuning `T2 (omega_a - omega_L)`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "delta_hz")]
    pub delta_scaled: Option<f64>,
    /// Atomic detuning in Hz; needs a species for T2.
    #[arg(long, allow_hyphen_values = true)]
    pub delta_hz: Option<f64>,
    /// Cavity offset in units of kappa.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub theta: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BistabilityArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Single drive instead of a grid.
    #[arg(long = "I", conflicts_with = "beta")]
    pub drive: Option<f64>,
    /// Single drive given as `beta`.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub i_min: f64,
    #[arg(long, default_value_t = 1e5)]
    pub i_max: f64,
    #[arg(long, default_value_t = 400)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DriveArgs {
    #[arg(long = "C")]
    pub cooperativity: Option<f64>,
    #[arg(long = "I", conflicts_with = "beta")]
    pub drive: Option<f64>,
    /// Drive as `beta` (default 2).
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub drive: DriveArgs,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub theta: f64,
    /// Half-width of the scaled detuning axis.
    #[arg(long, conflicts_with = "span_hz")]
    pub span_scaled: Option<f64>,
    /// Half-width of the detuning axis in Hz; needs a species.
    #[arg(long)]
    pub span_hz: Option<f64>,
    #[arg(long, default_value_t = 1201)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SurfaceArgs {
    #[command(flatten)]
    pub drive: DriveArgs,
    #[arg(long, default_value_t = 300.0)]
    pub span_scaled: f64,
    #[arg(long, default_value_t = 5.0)]
    pub theta_span: f64,
    #[arg(long, default_value_t = 301)]
    pub delta_points: usize,
    #[arg(long, default_value_t = 301)]
    pub theta_points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DynamicsArgs {
    /// Stiffness `kappa T2` (defaults to the species value, else 1e3).
    #[arg(long = "K")]
    pub stiffness: Option<f64>,
    /// `gamma T2` in (0, 2] (defaults to the species value, else 2).
    #[arg(long)]
    pub gamma_t2: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub point: PointArgs,
    #[arg(long = "I", conflicts_with = "beta")]
    pub drive: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    /// Also kick each branch along its leading mode and integrate.
    #[arg(long)]
    pub escape: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub kick: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HysteresisArgs {
    #[arg(long = "C", default_value_t = 100.0)]
    pub cooperativity: f64,
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    #[arg(long)]
    pub i_min: Option<f64>,
    #[arg(long)]
    pub i_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Integration time per drive step, in T2.
    #[arg(long)]
    pub dwell: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PullingArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Cavity offsets in units of kappa (repeatable).
    #[arg(long, allow_hyphen_values = true, default_values_t = [1e-4])]
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LocksimArgs {
    /// White frequency-noise level (Hz^2/Hz); without it the level comes from the species budget.
    #[arg(long)]
    pub h0: Option<f64>,
    /// Sample rate (Hz); default 200 FWHM.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Duration (s); default 3200 / FWHM.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub segments: usize,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Multiplier on the budget's h0.
    #[arg(long, default_value_t = 1e6)]
    pub scale: f64,
    /// Local-oscillator power (W).
    #[arg(long, default_value_t = 1e-3)]
    pub lo_power: f64,
    /// Estimate from a recorded `t,re,im` series instead of synthesizing.
    #[arg(long, value_name = "CSV", conflicts_with_all = ["h0", "rate", "duration"])]
    pub input: Option<PathBuf>,
    /// Also write the synthesized series.
    #[arg(long, value_name = "CSV")]
    pub series_out: Option<PathBuf>,
}
