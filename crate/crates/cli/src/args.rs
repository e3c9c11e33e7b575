use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fluxkit", version, about = "Dissipation-engineered fluxonium workbench")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct GlobalArgs {
    /// Device JSON file; the built-in reference device when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory for data files and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads for sweeps and Monte Carlo (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Random seed; overrides FLUXKIT_SEED and the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transition frequencies and matrix elements.
    Spectrum(SpectrumArgs),
    /// Synthesise the stub filter and sweep its S-parameters.
    Filter(FilterArgs),
    /// Jump-channel rates of the device.
    Rates(RatesArgs),
    /// Fluorescence readout simulations.
    #[command(subcommand)]
    Readout(ReadoutCommand),
    /// Two-tone unconditional reset.
    #[command(subcommand)]
    Reset(ResetCommand),
    /// Correct a window-averaged ground population for the readout transient.
    Correct(CorrectArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, default_value_t = 6)]
    pub levels: usize,
    /// Oscillator basis size; the config value or 60 when omitted.
    #[arg(long)]
    pub basis: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Passband center (GHz); the config value when omitted.
    #[arg(long)]
    pub fc: Option<f64>,
    /// -3 dB bandwidth (GHz); the config value when omitted.
    #[arg(long)]
    pub bw: Option<f64>,
    /// Port reference impedance (ohm).
    #[arg(long, default_value_t = 50.0)]
    pub z0: f64,
    /// Upper sweep frequency (GHz).
    #[arg(long, default_value_t = 12.0)]
    pub fmax: f64,
    /// Sweep step (MHz).
    #[arg(long, default_value_t = 5.0)]
    pub step_mhz: f64,
    /// Also write a Touchstone-style file.
    #[arg(long)]
    pub touchstone: bool,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    /// Quasiparticle density; the config value when omitted.
    #[arg(long)]
    pub x_qp: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ReadoutCommand {
    /// Steady-state reflection versus drive detuning.
    Spectroscopy(SpectroscopyArgs),
    /// Single-shot Monte Carlo with fitted histograms.
    Histogram(HistogramArgs),
    /// QND figures from T1 and T1 under readout.
    Qnd(QndArgs),
    /// Same as the top-level `correct`.
    Correct(CorrectArgs),
}

#[derive(Debug, Args)]
pub struct SpectroscopyArgs {
    /// Drive amplitude Omega/2pi (MHz); gamma_r/sqrt(2) when omitted.
    #[arg(long)]
    pub omega_mhz: Option<f64>,
    /// Population of the e-f manifold; thermal when omitted.
    #[arg(long)]
    pub p_ef: Option<f64>,
    /// Half span of the detuning sweep (MHz).
    #[arg(long, default_value_t = 30.0)]
    pub span_mhz: f64,
    #[arg(long, default_value_t = 121)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[arg(long, default_value_t = 10_000)]
    pub shots: usize,
    /// Target SNR used to calibrate the noise width.
    #[arg(long, default_value_t = 6.3)]
    pub snr: f64,
    /// Integration time (us).
    #[arg(long, default_value_t = 15.0)]
    pub tau: f64,
    /// Disable state transitions during the readout window.
    #[arg(long)]
    pub no_transitions: bool,
    /// Soft amplifier compression scale (off when omitted).
    #[arg(long)]
    pub saturation: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ResetCommand {
    /// Two-stage grid calibration of the reset tones.
    Calibrate(CalibrateArgs),
    /// One reset pulse with its population trajectory.
    Run(RunArgs),
    /// Raw and corrected residual excitation versus pulse length.
    Curve(CurveArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Pulse length at which residuals are compared (ns).
    #[arg(long, default_value_t = 200.0)]
    pub duration_ns: f64,
    #[arg(long, default_value_t = 17)]
    pub amplitude_points: usize,
    #[arg(long, default_value_t = 61)]
    pub detuning_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Initial {
    G,
    E,
    F,
    H,
    Thermal,
}

#[derive(Debug, Args, Clone)]
pub struct ToneArgs {
    /// Reset configuration JSON written by `reset calibrate`.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub omega_ef_mhz: Option<f64>,
    #[arg(long)]
    pub omega_fh_mhz: Option<f64>,
    #[arg(long)]
    pub detuning_ef_mhz: Option<f64>,
    #[arg(long)]
    pub detuning_fh_mhz: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub tones: ToneArgs,
    #[arg(long, default_value_t = 200.0)]
    pub duration_ns: f64,
    #[arg(long, value_enum, default_value_t = Initial::E)]
    pub initial: Initial,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub tones: ToneArgs,
    /// Comma-separated pulse lengths (ns).
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 500.0, 1000.0])]
    pub durations_ns: Vec<f64>,
    /// Readout window (us).
    #[arg(long, default_value_t = 15.0)]
    pub tau: f64,
    /// Ground population long after the readout starts.
    #[arg(long, default_value_t = 0.794)]
    pub pginf: f64,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    /// Window-averaged ground population.
    #[arg(long)]
    pub raw: f64,
    /// Readout window (us).
    #[arg(long, default_value_t = 15.0)]
    pub tau: f64,
    /// Relaxation time under readout (us); the config value when omitted.
    #[arg(long)]
    pub t1meas: Option<f64>,
    /// Ground population long after the readout starts.
    #[arg(long, default_value_t = 0.794)]
    pub pginf: f64,
}

#[derive(Debug, Args)]
pub struct QndArgs {
    /// One-sigma uncertainty of T1 (us).
    #[arg(long, default_value_t = 1.0)]
    pub dt1: f64,
    /// One-sigma uncertainty of T1 under readout (us).
    #[arg(long, default_value_t = 1.0)]
    pub dt1meas: f64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Directory for the replayed outputs; the recorded one when omitted.
    #[arg(long)]
    pub into: Option<PathBuf>,
}
