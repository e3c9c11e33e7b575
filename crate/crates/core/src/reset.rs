//! Two-tone unconditional reset.
//!
//! Simultaneous e-f and f-h drives move any excitation into h, which decays
//! straight to g through the filtered channel. The module simulates one
//! reset pulse, calibrates the tones by grid search and evaluates the
//! residual excitation versus pulse length through the same readout
//! correction applied to measured data.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissipation::ChannelSet;
use crate::dynamics::{self, DensityMatrix, DriveTone, Trajectory};
use crate::error::{Error, Result};
use crate::qubit::{EigenSystem, E, F, G, H};
use crate::readout;
use crate::units;

/// Levels kept by the reset model.
pub const RESET_LEVELS: usize = 4;

/// Largest integration step used for reset pulses (us).
const MAX_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    Level(usize),
    /// Undriven stationary state of the channel set.
    Thermal,
    /// Explicit populations of g, e, f, h.
    Populations(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetConfig {
    pub omega_ef: f64,
    pub omega_fh: f64,
    pub detuning_ef: f64,
    pub detuning_fh: f64,
    pub duration: f64,
    pub initial_state: InitialState,
}

impl ResetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_ef >= 0.0 && self.omega_fh >= 0.0) {
            return Err(Error::Domain("reset amplitudes must be non-negative".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Domain(format!("reset duration must be positive, got {}", self.duration)));
        }
        if !(self.detuning_ef.is_finite() && self.detuning_fh.is_finite()) {
            return Err(Error::Domain("reset detunings must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ResetResult {
    pub residual_excitation: f64,
    pub trajectory: Trajectory,
}

fn reset_eig(eig: &EigenSystem) -> Result<EigenSystem> {
    if eig.levels < RESET_LEVELS {
        return Err(Error::Domain(format!(
            "reset needs {RESET_LEVELS} levels, got {}",
            eig.levels
        )));
    }
    eig.truncate(RESET_LEVELS)
}

fn check_channels(channels: &ChannelSet) -> Result<ChannelSet> {
    let set = channels.restrict(RESET_LEVELS);
    if set.rate(H, G) <= 0.0 {
        return Err(Error::Config("reset needs the filtered h->g decay channel".into()));
    }
    Ok(set)
}

/// Rotating-frame Hamiltonian of the two reset tones.
pub fn reset_hamiltonian(cfg: &ResetConfig, eig: &EigenSystem) -> Result<DMatrix<Complex64>> {
    let eig = reset_eig(eig)?;
    let ef = DriveTone::new(&eig, E, F, cfg.detuning_ef, cfg.omega_ef)?;
    let fh = DriveTone::new(&eig, F, H, cfg.detuning_fh, cfg.omega_fh)?;
    dynamics::rwa_hamiltonian(&eig, &[ef, fh])
}

fn initial_density(state: &InitialState, channels: &ChannelSet) -> Result<DensityMatrix> {
    match state {
        InitialState::Level(l) => DensityMatrix::pure(RESET_LEVELS, *l),
        InitialState::Thermal => {
            let zero = DMatrix::from_element(RESET_LEVELS, RESET_LEVELS, Complex64::new(0.0, 0.0));
            dynamics::steady_state(&zero, channels)
        }
        InitialState::Populations(p) => {
            if p.len() != RESET_LEVELS {
                return Err(Error::Domain(format!(
                    "initial populations need {RESET_LEVELS} entries, got {}",
                    p.len()
                )));
            }
            DensityMatrix::from_populations(p)
        }
    }
}

fn step_for(h: &DMatrix<Complex64>, channels: &ChannelSet) -> Result<f64> {
    Ok((0.25 * dynamics::max_stable_step(h, channels)?).min(MAX_STEP))
}

fn residual_of(rho: &DensityMatrix) -> f64 {
    (1.0 - rho.population(G)).clamp(0.0, 1.0)
}

fn run(
    cfg: &ResetConfig,
    eig: &EigenSystem,
    channels: &ChannelSet,
    rho0: &DensityMatrix,
    keep_trajectory: bool,
) -> Result<ResetResult> {
    cfg.validate()?;
    let h = reset_hamiltonian(cfg, eig)?;
    let step = step_for(&h, channels)?;
    if keep_trajectory {
        let trajectory = dynamics::evolve(rho0, &h, channels, cfg.duration, step)?;
        let residual_excitation = residual_of(trajectory.last().unwrap());
        Ok(ResetResult { residual_excitation, trajectory })
    } else {
        let rho = dynamics::evolve_final(rho0, &h, channels, cfg.duration, step)?;
        Ok(ResetResult { residual_excitation: residual_of(&rho), trajectory: Trajectory::default() })
    }
}

/// Evolve one reset pulse on the four lowest levels.
pub fn simulate_reset(cfg: &ResetConfig, eig: &EigenSystem, channels: &ChannelSet) -> Result<ResetResult> {
    let set = check_channels(channels)?;
    let rho0 = initial_density(&cfg.initial_state, &set)?;
    run(cfg, eig, &set, &rho0, true)
}

/// Residual excitation only, skipping the stored trajectory.
pub fn reset_residual(cfg: &ResetConfig, eig: &EigenSystem, channels: &ChannelSet) -> Result<f64> {
    let set = check_channels(channels)?;
    let rho0 = initial_density(&cfg.initial_state, &set)?;
    Ok(run(cfg, eig, &set, &rho0, false)?.residual_excitation)
}

/// Sweep ranges for [`calibrate_reset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub omegas_ef: Vec<f64>,
    pub omegas_fh: Vec<f64>,
    pub detunings_fh: Vec<f64>,
    /// Amplitude of both tones during the frequency sweep.
    pub probe_amplitude: f64,
    /// Pulse length at which residuals are compared (us).
    pub duration: f64,
    pub initial_state: InitialState,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

impl CalibrationGrid {
    /// 17 log-spaced amplitudes over 2pi x [1, 80] MHz per tone, 61 f-h
    /// detunings over 2pi x [-30, 30] MHz, probe tones at gamma_r / sqrt(2)
    /// and a 200 ns pulse starting from e.
    pub fn standard(gamma_r: f64) -> Self {
        let omegas = log_space(units::mhz_to_rad_per_us(1.0), units::mhz_to_rad_per_us(80.0), 17);
        Self {
            omegas_ef: omegas.clone(),
            omegas_fh: omegas,
            detunings_fh: lin_space(units::mhz_to_rad_per_us(-30.0), units::mhz_to_rad_per_us(30.0), 61),
            probe_amplitude: gamma_r / 2f64.sqrt(),
            duration: 0.2,
            initial_state: InitialState::Level(E),
        }
    }

    /// Grid `points` wide around `center`, spanning one original step each side.
    pub fn refined_around(&self, center: &ResetConfig, points: usize) -> Self {
        let around = |values: &[f64], c: f64, log: bool| -> Vec<f64> {
            let idx = values
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - c).abs().total_cmp(&(b.1 - c).abs()))
                .map(|p| p.0)
                .unwrap_or(0);
            let lo = values[idx.saturating_sub(1)];
            let hi = values[(idx + 1).min(values.len() - 1)];
            let mut v = if log && lo > 0.0 { log_space(lo, hi, points) } else { lin_space(lo, hi, points) };
            if !v.contains(&c) {
                v.push(c);
                v.sort_by(f64::total_cmp);
            }
            v
        };
        Self {
            omegas_ef: around(&self.omegas_ef, center.omega_ef, true),
            omegas_fh: around(&self.omegas_fh, center.omega_fh, true),
            detunings_fh: around(&self.detunings_fh, center.detuning_fh, false),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.omegas_ef.is_empty() || self.omegas_fh.is_empty() || self.detunings_fh.is_empty() {
            return Err(Error::Domain("calibration grids must be non-empty".into()));
        }
        if !(self.duration > 0.0) {
            return Err(Error::Domain("calibration duration must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub config: ResetConfig,
    /// (detuning_fh, residual) at the probe amplitude.
    pub frequency_sweep: Vec<(f64, f64)>,
    /// (omega_ef, omega_fh, residual) at the chosen f-h detuning.
    pub amplitude_sweep: Vec<(f64, f64, f64)>,
    /// Undriven residual after the same pulse length.
    pub undriven_residual: f64,
}

fn argmin<T>(items: &[T], key: impl Fn(&T) -> f64) -> usize {
    let mut best = 0;
    for (k, item) in items.iter().enumerate() {
        if key(item) < key(&items[best]) {
            best = k;
        }
    }
    best
}

/// Two-stage grid calibration: f-h frequency at fixed probe amplitudes,
/// then a joint 2-D amplitude sweep at the chosen frequency.
pub fn calibrate_reset(eig: &EigenSystem, channels: &ChannelSet, grid: &CalibrationGrid) -> Result<Calibration> {
    grid.validate()?;
    let set = check_channels(channels)?;
    let rho0 = initial_density(&grid.initial_state, &set)?;
    let base = ResetConfig {
        omega_ef: 0.0,
        omega_fh: 0.0,
        detuning_ef: 0.0,
        detuning_fh: 0.0,
        duration: grid.duration,
        initial_state: grid.initial_state.clone(),
    };
    let residual = |cfg: &ResetConfig| run(cfg, eig, &set, &rho0, false).map(|r| r.residual_excitation);
    let undriven = residual(&base)?;

    let frequency_sweep: Vec<(f64, f64)> = grid
        .detunings_fh
        .par_iter()
        .map(|&d| {
            let cfg = ResetConfig {
                omega_ef: grid.probe_amplitude,
                omega_fh: grid.probe_amplitude,
                detuning_fh: d,
                ..base.clone()
            };
            residual(&cfg).map(|r| (d, r))
        })
        .collect::<Result<_>>()?;
    let detuning_fh = frequency_sweep[argmin(&frequency_sweep, |p| p.1)].0;

    let pairs: Vec<(f64, f64)> = grid
        .omegas_ef
        .iter()
        .flat_map(|&a| grid.omegas_fh.iter().map(move |&b| (a, b)))
        .collect();
    let amplitude_sweep: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let cfg = ResetConfig { omega_ef: a, omega_fh: b, detuning_fh, ..base.clone() };
            residual(&cfg).map(|r| (a, b, r))
        })
        .collect::<Result<_>>()?;
    let best = amplitude_sweep[argmin(&amplitude_sweep, |p| p.2)];

    let tol = 1e-9;
    if !(best.2 < undriven - tol) {
        return Err(Error::Calibration(format!(
            "no grid point improves on the undriven residual {undriven:.4}"
        )));
    }
    Ok(Calibration {
        config: ResetConfig { omega_ef: best.0, omega_fh: best.1, detuning_fh, ..base },
        frequency_sweep,
        amplitude_sweep,
        undriven_residual: undriven,
    })
}

/// Readout transient used to turn simulated populations into the values
/// an experiment would report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutTransient {
    pub tau: f64,
    pub t1_meas: f64,
    pub p_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub duration: f64,
    pub raw_residual: f64,
    pub corrected_residual: f64,
}

/// Length of the preparation reset before the pi flip (us).
pub const PREPARATION_RESET: f64 = 1.0;

/// Benchmark state: a calibrated preparation reset from the thermal state,
/// then an ideal g <-> e swap.
pub fn benchmark_state(cfg: &ResetConfig, eig: &EigenSystem, channels: &ChannelSet) -> Result<DensityMatrix> {
    let set = check_channels(channels)?;
    let thermal = initial_density(&InitialState::Thermal, &set)?;
    let prep = ResetConfig { duration: PREPARATION_RESET, ..cfg.clone() };
    prep.validate()?;
    let h = reset_hamiltonian(&prep, eig)?;
    let step = step_for(&h, &set)?;
    let rho = dynamics::evolve_final(&thermal, &h, &set, PREPARATION_RESET, step)?;
    let mut perm = DMatrix::identity(RESET_LEVELS, RESET_LEVELS);
    perm.swap_rows(G, E);
    let perm = perm.map(|x: f64| Complex64::new(x, 0.0));
    let flipped = &perm * rho.entries() * perm.transpose();
    DensityMatrix::new(flipped)
}

/// Residual excitation versus reset length from the benchmark state.
///
/// The simulated ground population is passed through the window average
/// of the readout (raw value) and then through the correction (corrected
/// value), mirroring the analysis of measured data.
pub fn reset_fidelity_curve(
    cfg: &ResetConfig,
    durations: &[f64],
    eig: &EigenSystem,
    channels: &ChannelSet,
    transient: &ReadoutTransient,
) -> Result<Vec<CurvePoint>> {
    if durations.is_empty() {
        return Err(Error::Domain("duration list is empty".into()));
    }
    if durations.windows(2).any(|w| w[1] < w[0]) || durations[0] < 0.0 {
        return Err(Error::Domain("durations must be non-negative and ascending".into()));
    }
    let set = check_channels(channels)?;
    let rho0 = benchmark_state(cfg, eig, &set)?;
    durations
        .par_iter()
        .map(|&t| {
            let p_g = if t == 0.0 {
                rho0.population(G)
            } else {
                let pulse = ResetConfig { duration: t, ..cfg.clone() };
                1.0 - run(&pulse, eig, &set, &rho0, false)?.residual_excitation
            };
            let raw = readout::forward_average(p_g, transient.tau, transient.t1_meas, transient.p_inf)?;
            let corrected = readout::correct_population(raw, transient.tau, transient.t1_meas, transient.p_inf)?;
            Ok(CurvePoint { duration: t, raw_residual: 1.0 - raw, corrected_residual: 1.0 - corrected })
        })
        .collect()
}

/// Classical rate-equation model of the reset valid for weak drives.
///
/// Each tone becomes an incoherent transfer rate (Omega^2/2) gamma /
/// (gamma^2 + Delta^2) with gamma the mean out-rate of the two levels; the
/// populations are propagated with a matrix exponential. Returns the
/// residual excitation after `cfg.duration` from `p0`.
pub fn incoherent_residual(cfg: &ResetConfig, channels: &ChannelSet, p0: &[f64]) -> Result<f64> {
    cfg.validate()?;
    let set = channels.restrict(RESET_LEVELS);
    let n = RESET_LEVELS;
    if p0.len() != n {
        return Err(Error::Domain(format!("need {n} initial populations")));
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for c in set.iter() {
        m[(c.to, c.from)] += c.rate;
        m[(c.from, c.from)] -= c.rate;
    }
    for (i, j, omega, delta) in [(E, F, cfg.omega_ef, cfg.detuning_ef), (F, H, cfg.omega_fh, cfg.detuning_fh)] {
        let gamma = 0.5 * (set.out_rate(i) + set.out_rate(j));
        let w = 0.5 * omega * omega * gamma / (gamma * gamma + delta * delta);
        m[(j, i)] += w;
        m[(i, i)] -= w;
        m[(i, j)] += w;
        m[(j, j)] -= w;
    }
    let prop = (m * cfg.duration).exp();
    let p = prop * nalgebra::DVector::from_column_slice(p0);
    Ok(1.0 - p[G])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipation::ChannelOrigin;
    use crate::qubit::{solve, DeviceParams};
    use crate::units::mhz_to_rad_per_us;

    fn eig() -> EigenSystem {
        solve(&DeviceParams::table_one(), 60, 6).unwrap().truncate(4).unwrap()
    }

    fn channels(thermal: bool) -> ChannelSet {
        let mut set = ChannelSet::new();
        set.push(F, E, mhz_to_rad_per_us(5.4), ChannelOrigin::FilteredExternal).unwrap();
        set.push(H, G, mhz_to_rad_per_us(6.5), ChannelOrigin::FilteredExternal).unwrap();
        set.push(E, G, 0.77 / 51.0, ChannelOrigin::Intrinsic).unwrap();
        if thermal {
            set.push(G, E, 0.23 / 51.0, ChannelOrigin::Intrinsic).unwrap();
        }
        set
    }

    fn cfg(omega: f64, duration: f64, initial: InitialState) -> ResetConfig {
        ResetConfig {
            omega_ef: omega,
            omega_fh: omega,
            detuning_ef: 0.0,
            detuning_fh: 0.0,
            duration,
            initial_state: initial,
        }
    }

    #[test]
    fn undriven_keeps_excitation() {
        let r = simulate_reset(&cfg(0.0, 0.05, InitialState::Level(E)), &eig(), &channels(true)).unwrap();
        assert!(r.residual_excitation > 0.999);
    }

    #[test]
    fn ground_stays_reset_without_thermal_channels() {
        let r = simulate_reset(&cfg(mhz_to_rad_per_us(20.0), 0.3, InitialState::Level(G)), &eig(), &channels(false))
            .unwrap();
        assert!(r.residual_excitation < 1e-15);
    }

    #[test]
    fn thermal_initial_state() {
        let rho = initial_density(&InitialState::Thermal, &channels(true)).unwrap();
        assert!((rho.population(G) - 0.77).abs() < 1e-10);
    }

    #[test]
    fn missing_hg_channel_is_rejected() {
        let mut set = ChannelSet::new();
        set.push(F, E, 1.0, ChannelOrigin::FilteredExternal).unwrap();
        assert!(matches!(
            simulate_reset(&cfg(1.0, 0.1, InitialState::Level(E)), &eig(), &set),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn driven_reset_removes_excitation() {
        let r = reset_residual(&cfg(mhz_to_rad_per_us(40.0), 1.0, InitialState::Level(E)), &eig(), &channels(true))
            .unwrap();
        assert!(r < 0.01, "{r}");
    }

    #[test]
    fn flat_landscape_fails_calibration() {
        let mut grid = CalibrationGrid::standard(mhz_to_rad_per_us(5.4));
        grid.omegas_ef = vec![0.0];
        grid.omegas_fh = vec![0.0];
        grid.detunings_fh = vec![0.0];
        grid.probe_amplitude = 0.0;
        assert!(matches!(calibrate_reset(&eig(), &channels(true), &grid), Err(Error::Calibration(_))));
    }

    #[test]
    fn grids_are_log_and_linear() {
        let g = CalibrationGrid::standard(1.0);
        assert_eq!(g.omegas_ef.len(), 17);
        assert_eq!(g.detunings_fh.len(), 61);
        assert!((g.omegas_ef[16] / g.omegas_ef[0] - 80.0).abs() < 1e-9);
        assert!(g.detunings_fh[30].abs() < 1e-12);
    }

    #[test]
    fn curve_rejects_unsorted() {
        let t = ReadoutTransient { tau: 15.0, t1_meas: 46.0, p_inf: 0.794 };
        let c = cfg(10.0, 0.1, InitialState::Level(E));
        assert!(reset_fidelity_curve(&c, &[0.2, 0.1], &eig(), &channels(true), &t).is_err());
        assert!(reset_fidelity_curve(&c, &[], &eig(), &channels(true), &t).is_err());
    }
}
