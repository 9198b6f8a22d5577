use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "atomsim", version, about = "Two-level atoms in a standing-wave laser field")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a single trajectory
    Simulate(SimulateArgs),
    /// Maximum Lyapunov exponent of one initial condition
    Lyap(LyapArgs),
    /// Lyapunov map over detuning and initial momentum
    Map(MapArgs),
    /// Classify the regime of motion
    Classify(ClassifyArgs),
    /// Monte Carlo ensemble in a Gaussian beam
    Ensemble(EnsembleArgs),
    /// Convert laboratory units to dimensionless parameters
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat `key = value` config file
    #[arg(long, env = "ATOMSIM_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, env = "ATOMSIM_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "ATOMSIM_SEED")]
    pub seed: Option<u64>,
    /// Sequential execution and no wall-clock fields, for bitwise-identical output
    #[arg(long, env = "ATOMSIM_DETERMINISTIC")]
    pub deterministic: bool,
    /// Worker threads for parallel sweeps
    #[arg(long, env = "ATOMSIM_JOBS")]
    pub jobs: Option<usize>,
    /// Integrator relative and absolute tolerance
    #[arg(long, env = "ATOMSIM_TOL")]
    pub tol: Option<f64>,
    /// Also emit a gnuplot script
    #[arg(long, env = "ATOMSIM_GNUPLOT")]
    pub gnuplot: bool,
    /// Do not print the result summary on stdout
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct PhysicsArgs {
    #[arg(long, env = "ATOMSIM_DELTA", allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, env = "ATOMSIM_P0", allow_hyphen_values = true)]
    pub p0: Option<f64>,
    #[arg(long, env = "ATOMSIM_X0", allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, env = "ATOMSIM_OMEGA_R")]
    pub omega_r: Option<f64>,
    /// Gaussian field profile with this interaction time; constant field if absent
    #[arg(long, env = "ATOMSIM_SIGMA_TAU")]
    pub sigma_tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fig2Case {
    Rf,
    Cf,
    Cw,
    T,
}

impl Fig2Case {
    pub const ALL: [Fig2Case; 4] = [Fig2Case::Rf, Fig2Case::Cf, Fig2Case::Cw, Fig2Case::T];

    /// `(delta, p0)` of the case.
    pub fn params(self) -> (f64, f64) {
        match self {
            Fig2Case::Rf => (0.8, 45.0),
            Fig2Case::Cf => (0.2, 45.0),
            Fig2Case::Cw => (0.2, 10.0),
            Fig2Case::T => (-0.2, 5.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Fig2Case::Rf => "RF",
            Fig2Case::Cf => "CF",
            Fig2Case::Cw => "CW",
            Fig2Case::T => "T",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[arg(long, env = "ATOMSIM_TAU")]
    pub tau: Option<f64>,
    #[arg(long, env = "ATOMSIM_SAMPLE_DT")]
    pub sample_dt: Option<f64>,
    /// Abort when norm or energy drifts beyond this
    #[arg(long, env = "ATOMSIM_DRIFT_ABORT")]
    pub drift_abort: Option<f64>,
    /// Project (g, G) back to unit norm after each step
    #[arg(long, env = "ATOMSIM_PROJECT_NORM")]
    pub project_norm: bool,
    /// Compare against the closed-form solution (resonance or frozen position)
    #[arg(long)]
    pub check_analytic: bool,
    /// Write (g1, g2) portraits truncated at these comma-separated times
    #[arg(long, env = "ATOMSIM_PORTRAIT", num_args = 0..=1, default_missing_value = "100,500,1000")]
    pub portrait: Option<String>,
    /// Parameters of one of the four regime examples
    #[arg(long, value_enum, conflicts_with = "paper_fig3")]
    pub paper_fig2: Option<Fig2Case>,
    /// Fifty trajectories with p0 spread over [0, 50]
    #[arg(long)]
    pub paper_fig3: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Variational,
    TwoTrajectory,
}

#[derive(Debug, Args)]
pub struct LyapArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[arg(long, env = "ATOMSIM_TAU_TOTAL")]
    pub tau_total: Option<f64>,
    #[arg(long, value_enum, env = "ATOMSIM_METHOD")]
    pub method: Option<MethodArg>,
    #[arg(long, env = "ATOMSIM_RENORM_INTERVAL")]
    pub renorm_interval: Option<f64>,
    /// Initial separation for the two-trajectory method
    #[arg(long, env = "ATOMSIM_SEPARATION")]
    pub separation: Option<f64>,
    /// Confidence interval for the predictability time
    #[arg(long)]
    pub dx_confidence: Option<f64>,
    /// Initial position uncertainty for the predictability time
    #[arg(long)]
    pub dx0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Detuning axis `start:end:count`
    #[arg(long, env = "ATOMSIM_DELTA_RANGE", allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// Initial momentum axis `start:end:count`
    #[arg(long, env = "ATOMSIM_P0_RANGE", allow_hyphen_values = true)]
    pub p0: Option<String>,
    #[arg(long, env = "ATOMSIM_X0", allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, env = "ATOMSIM_OMEGA_R")]
    pub omega_r: Option<f64>,
    #[arg(long, env = "ATOMSIM_SIGMA_TAU")]
    pub sigma_tau: Option<f64>,
    #[arg(long, env = "ATOMSIM_TAU_TOTAL")]
    pub tau_total: Option<f64>,
    #[arg(long, value_enum, env = "ATOMSIM_METHOD")]
    pub method: Option<MethodArg>,
    /// Full detuning/momentum map at omega_r = 1e-3
    #[arg(long)]
    pub paper_fig1: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[arg(long, env = "ATOMSIM_TAU")]
    pub tau: Option<f64>,
    #[arg(long, env = "ATOMSIM_LAMBDA_THRESHOLD")]
    pub lambda_threshold: Option<f64>,
    /// Momentum band ignored when counting reversals
    #[arg(long, env = "ATOMSIM_P_HYST")]
    pub p_hyst: Option<f64>,
    /// Run all four regime examples
    #[arg(long, conflicts_with_all = ["delta", "p0"])]
    pub paper_fig2: bool,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[arg(long, env = "ATOMSIM_N_ATOMS")]
    pub n_atoms: Option<usize>,
    #[arg(long, env = "ATOMSIM_SIGMA_X")]
    pub sigma_x: Option<f64>,
    #[arg(long, env = "ATOMSIM_SIGMA_P")]
    pub sigma_p: Option<f64>,
    #[arg(long, env = "ATOMSIM_TAU")]
    pub tau: Option<f64>,
    /// Histogram bin width in wavelengths
    #[arg(long, env = "ATOMSIM_BIN_WIDTH")]
    pub bin_width: Option<f64>,
    /// Histogram range `lo:hi` in wavelengths
    #[arg(long, env = "ATOMSIM_RANGE", allow_hyphen_values = true)]
    pub range: Option<String>,
    /// Chaotic (delta = 0.2) and regular (delta = 1) beams of 10^4 atoms
    #[arg(long, conflicts_with = "delta")]
    pub paper_fig10b: bool,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Transition wavelength in meters
    #[arg(long, env = "ATOMSIM_WAVELENGTH")]
    pub wavelength: Option<f64>,
    /// Recoil frequency in Hz; derived from wavelength and mass if absent
    #[arg(long, env = "ATOMSIM_RECOIL")]
    pub recoil: Option<f64>,
    /// Atomic mass in kg (default: lithium-7)
    #[arg(long, env = "ATOMSIM_MASS")]
    pub mass: Option<f64>,
    /// Peak Rabi frequency over 2π, in Hz
    #[arg(long, env = "ATOMSIM_RABI")]
    pub rabi: Option<f64>,
    /// Beam radius in meters
    #[arg(long, env = "ATOMSIM_RADIUS")]
    pub radius: Option<f64>,
    /// Longitudinal atom velocity in m/s
    #[arg(long, env = "ATOMSIM_VELOCITY", conflicts_with = "sigma_tau")]
    pub velocity: Option<f64>,
    /// Target interaction time; the velocity is solved for
    #[arg(long, env = "ATOMSIM_SIGMA_TAU")]
    pub sigma_tau: Option<f64>,
}
