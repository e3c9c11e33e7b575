use std::fmt::Write as _;
use std::path::Path;

use clap::Parser;
use fluxkit_core::dissipation::{self, ChannelOrigin, ChannelSet};
use fluxkit_core::filter::{self, FilterNetwork};
use fluxkit_core::qubit::{self, EigenSystem, E, F, G, H};
use fluxkit_core::readout::{self, ReadoutConfig, ShotHistogram};
use fluxkit_core::reset::{self, CalibrationGrid, InitialState, ReadoutTransient, ResetConfig};
use fluxkit_core::units::{mhz_to_rad_per_us, rad_per_us_to_ghz, rad_per_us_to_mhz};
use fluxkit_core::Error;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;
use crate::session::{self, CliError, CliResult, RunManifest, Session};

/// Run a command and return the stem used for its manifest.
pub fn dispatch(cmd: &Command, s: &mut Session) -> CliResult<String> {
    match cmd {
        Command::Spectrum(a) => spectrum(a, s).map(|_| "spectrum".into()),
        Command::Filter(a) => filter_cmd(a, s).map(|_| "filter".into()),
        Command::Rates(a) => rates(a, s).map(|_| "rates".into()),
        Command::Readout(ReadoutCommand::Spectroscopy(a)) => spectroscopy(a, s).map(|_| "readout_spectroscopy".into()),
        Command::Readout(ReadoutCommand::Histogram(a)) => histogram(a, s).map(|_| "readout_histogram".into()),
        Command::Readout(ReadoutCommand::Qnd(a)) => qnd(a, s).map(|_| "readout_qnd".into()),
        Command::Readout(ReadoutCommand::Correct(a)) | Command::Correct(a) => correct(a, s).map(|_| "correct".into()),
        Command::Reset(ResetCommand::Calibrate(a)) => calibrate(a, s).map(|_| "reset_calibrate".into()),
        Command::Reset(ResetCommand::Run(a)) => reset_run(a, s).map(|_| "reset_run".into()),
        Command::Reset(ResetCommand::Curve(a)) => curve(a, s).map(|_| "reset_curve".into()),
        Command::Replay(_) => Err(CliError::Usage("replay cannot be nested".into())),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn eigensystem(s: &Session, levels: usize) -> CliResult<EigenSystem> {
    Ok(qubit::solve(&s.device.params, s.device.basis_size, levels)?)
}

fn network(s: &Session) -> CliResult<FilterNetwork> {
    Ok(filter::synthesize_single_stage(s.device.filter_center_hz, s.device.filter_bandwidth_hz, 50.0)?)
}

/// Engineered channels of the device with the measured qubit lifetime
/// substituted for the g <-> e pair.
fn device_channels(s: &Session, eig: &EigenSystem) -> CliResult<ChannelSet> {
    let d = &s.device;
    let set = dissipation::build_channels(eig, &network(s)?, &d.params, d.x_qp, d.gap)?;
    Ok(dissipation::with_measured_qubit_t1(&set, d.t1, d.p_g_thermal)?)
}

fn gamma_r(s: &Session) -> CliResult<f64> {
    let eig = eigensystem(s, qubit::DEFAULT_LEVELS)?;
    let d = &s.device;
    let set = dissipation::build_channels(&eig, &network(s)?, &d.params, 0.0, d.gap)?;
    let gr = set.rate_of(F, E, ChannelOrigin::FilteredExternal);
    if gr > 0.0 {
        Ok(gr)
    } else {
        Err(Error::Config("device has no f->e decay channel".into()).into())
    }
}

fn spectrum(a: &SpectrumArgs, s: &mut Session) -> CliResult<()> {
    if a.levels < 2 {
        return Err(usage("--levels must be at least 2"));
    }
    let basis = a.basis.unwrap_or(s.device.basis_size);
    let eig = qubit::solve(&s.device.params, basis, a.levels)?;
    let mut csv = String::from("lower,upper,freq_GHz,freq_MHz,abs_n,abs_sin_half_phi\n");
    for i in 0..a.levels {
        for j in i + 1..a.levels {
            let w = qubit::transition_frequency(&eig, j, i)?;
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                qubit::level_label(i),
                qubit::level_label(j),
                rad_per_us_to_ghz(w),
                rad_per_us_to_mhz(w),
                eig.charge(i, j)?,
                eig.qp(i, j)?
            )
            .unwrap();
        }
    }
    s.write("spectrum.csv", &csv)
}

fn db(x: f64) -> f64 {
    20.0 * x.log10()
}

fn filter_cmd(a: &FilterArgs, s: &mut Session) -> CliResult<()> {
    let fc = a.fc.map(|f| f * 1e9).unwrap_or(s.device.filter_center_hz);
    let bw = a.bw.map(|b| b * 1e9).unwrap_or(s.device.filter_bandwidth_hz);
    let step = a.step_mhz * 1e6;
    if !(step > 0.0 && a.fmax > 0.0) {
        return Err(usage("--step-mhz and --fmax must be positive"));
    }
    let net = filter::synthesize_single_stage(fc, bw, a.z0)?;
    let grid = filter::frequency_grid(step, a.fmax * 1e9, step);
    let mut csv = String::from("freq_GHz,s21_db,s11_db\n");
    let mut trans = Vec::with_capacity(grid.len());
    for &f in &grid {
        let sm = filter::s_parameters(&net, f)?;
        trans.push(sm.s21.norm_sqr());
        writeln!(csv, "{},{},{}", f / 1e9, db(sm.s21.norm()), db(sm.s11.norm())).unwrap();
    }
    s.write("filter.csv", &csv)?;
    let band = filter::measure_passband(&grid, &trans, fc, bw);
    let below_1ghz = grid
        .iter()
        .zip(&trans)
        .filter(|(f, _)| **f <= 1e9)
        .map(|(_, t)| 10.0 * t.log10())
        .fold(f64::NEG_INFINITY, f64::max);
    let report = json!({
        "network": net,
        "passband": band.map(|b| json!({
            "peak_GHz": b.peak_hz / 1e9,
            "lower_edge_GHz": b.lower_edge_hz / 1e9,
            "upper_edge_GHz": b.upper_edge_hz / 1e9,
            "width_GHz": b.width() / 1e9,
            "midpoint_GHz": b.midpoint() / 1e9,
        })),
        "max_s21_db_below_1GHz": if below_1ghz.is_finite() { Some(below_1ghz) } else { None },
    });
    s.write_json("filter.json", &report)?;
    if a.touchstone {
        let text = filter::touchstone(&net, &grid)?;
        s.write("filter.s2p", &text)?;
    }
    Ok(())
}

fn rates(a: &RatesArgs, s: &mut Session) -> CliResult<()> {
    if a.levels < 2 || a.levels > qubit::DEFAULT_LEVELS {
        return Err(usage(format!("--levels must lie in 2..={}", qubit::DEFAULT_LEVELS)));
    }
    let eig = eigensystem(s, qubit::DEFAULT_LEVELS)?;
    let d = &s.device;
    let x_qp = a.x_qp.unwrap_or(d.x_qp);
    let set = dissipation::build_channels(&eig, &network(s)?, &d.params, x_qp, d.gap)?.restrict(a.levels);
    let mut csv = String::from("from,to,origin,rate_MHz_over_2pi\n");
    for c in set.iter() {
        writeln!(
            csv,
            "{},{},{},{}",
            qubit::level_label(c.from),
            qubit::level_label(c.to),
            c.origin.as_str(),
            rad_per_us_to_mhz(c.rate)
        )
        .unwrap();
    }
    s.write("rates.csv", &csv)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn spectroscopy(a: &SpectroscopyArgs, s: &mut Session) -> CliResult<()> {
    if a.points == 0 || !(a.span_mhz > 0.0) {
        return Err(usage("--points and --span-mhz must be positive"));
    }
    let gr = gamma_r(s)?;
    let cfg = ReadoutConfig {
        omega: a.omega_mhz.map(mhz_to_rad_per_us).unwrap_or(gr / 2f64.sqrt()),
        ..ReadoutConfig::optimal(gr)
    };
    let p_ef = match a.p_ef {
        Some(p) => p,
        None => {
            let pops = qubit::thermal_population(&eigensystem(s, qubit::DEFAULT_LEVELS)?, s.device.params.temperature)?;
            pops[E] + pops[F]
        }
    };
    let span = mhz_to_rad_per_us(a.span_mhz);
    let dets = linspace(-span, span, a.points);
    let r = readout::spectroscopy(&cfg, p_ef, &dets)?;
    let mut csv = String::from("detuning_MHz,re_r,im_r\n");
    for (d, z) in dets.iter().zip(&r) {
        writeln!(csv, "{},{},{}", rad_per_us_to_mhz(*d), z.re, z.im).unwrap();
    }
    s.write("spectroscopy.csv", &csv)?;
    let fitted = readout::fit_gamma_r(&cfg, p_ef, &dets, &r)?;
    s.write_json(
        "spectroscopy_fit.json",
        &json!({
            "gamma_r_over_2pi_MHz": rad_per_us_to_mhz(gr),
            "fitted_gamma_r_over_2pi_MHz": rad_per_us_to_mhz(fitted),
            "omega_over_2pi_MHz": rad_per_us_to_mhz(cfg.omega),
            "p_ef": p_ef,
        }),
    )
}

fn shots_csv(samples: &[Complex64]) -> String {
    let mut csv = String::from("shot_index,re,im\n");
    for (k, z) in samples.iter().enumerate() {
        writeln!(csv, "{k},{},{}", z.re, z.im).unwrap();
    }
    csv
}

fn histogram(a: &HistogramArgs, s: &mut Session) -> CliResult<()> {
    let gr = gamma_r(s)?;
    let mut cfg = ReadoutConfig {
        shots: a.shots,
        seed: s.seed,
        integration_time: a.tau,
        saturation: a.saturation,
        ..ReadoutConfig::optimal(gr)
    };
    cfg.noise_sigma = readout::noise_sigma_for_snr(&cfg, a.snr)?;
    let channels = if a.no_transitions {
        let mut set = ChannelSet::new();
        set.push(F, E, gr, ChannelOrigin::FilteredExternal)?;
        set
    } else {
        device_channels(s, &eigensystem(s, qubit::DEFAULT_LEVELS)?)?.restrict(3)
    };
    let g = readout::simulate_shots(&cfg, G, &channels)?;
    let e = readout::simulate_shots(&cfg, E, &channels)?;
    s.write("histogram_g.csv", &shots_csv(&g))?;
    s.write("histogram_e.csv", &shots_csv(&e))?;
    let hist = ShotHistogram::fit(g, e, cfg.detuning)?;
    let (observed, predicted) = hist.inter_peak_mass(0.1);
    s.write_json(
        "histogram_fit.json",
        &json!({
            "mu_g": [hist.mu_g.re, hist.mu_g.im],
            "mu_e": [hist.mu_e.re, hist.mu_e.im],
            "sigma_g": hist.sigma_g,
            "sigma_e": hist.sigma_e,
            "snr": hist.snr(),
            "noise_sigma": cfg.noise_sigma,
            "shots": cfg.shots,
            "seed": cfg.seed,
            "transitions": !a.no_transitions,
            "mid_gap_mass": observed,
            "mid_gap_mass_two_gaussian": predicted,
        }),
    )
}

fn qnd(a: &QndArgs, s: &mut Session) -> CliResult<()> {
    let gr = gamma_r(s)?;
    let d = &s.device;
    let report = readout::qnd_metrics(d.t1, d.t1_meas, gr)?;
    let interval = readout::pure_meas_time_interval(d.t1, a.dt1, d.t1_meas, a.dt1meas).ok();
    s.write_json(
        "qnd.json",
        &json!({
            "t1_us": report.t1,
            "t1_meas_us": report.t1_meas,
            "n_qnd": report.n_qnd,
            "pure_meas_time_us": report.pure_meas_time,
            "pure_meas_time_interval_us": interval.map(|(lo, hi)| [lo, hi]),
            "status": report.status,
            "gamma_r_over_2pi_MHz": rad_per_us_to_mhz(gr),
        }),
    )
}

fn correct(a: &CorrectArgs, s: &mut Session) -> CliResult<()> {
    let t1m = a.t1meas.unwrap_or(s.device.t1_meas);
    let p0 = readout::correct_population(a.raw, a.tau, t1m, a.pginf)?;
    println!("corrected P_g(0) = {p0:.4} (residual excitation {:.2}%)", 100.0 * (1.0 - p0));
    s.write_json(
        "correct.json",
        &json!({
            "raw_p_ground": a.raw,
            "corrected_p_ground": p0,
            "residual_excitation": 1.0 - p0,
            "tau_us": a.tau,
            "t1_meas_us": t1m,
            "p_ground_inf": a.pginf,
        }),
    )
}

/// Reset tones in user-facing units, as written by `reset calibrate`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToneFile {
    omega_ef_MHz: f64,
    omega_fh_MHz: f64,
    detuning_ef_MHz: f64,
    detuning_fh_MHz: f64,
}

impl ToneFile {
    fn from_config(c: &ResetConfig) -> Self {
        Self {
            omega_ef_MHz: rad_per_us_to_mhz(c.omega_ef),
            omega_fh_MHz: rad_per_us_to_mhz(c.omega_fh),
            detuning_ef_MHz: rad_per_us_to_mhz(c.detuning_ef),
            detuning_fh_MHz: rad_per_us_to_mhz(c.detuning_fh),
        }
    }
}

fn read_tone_file(path: &Path) -> CliResult<ToneFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?)
}

fn tones(t: &ToneArgs, duration_us: f64, initial: InitialState) -> CliResult<ResetConfig> {
    let base = t.calibration.as_deref().map(read_tone_file).transpose()?;
    let pick = |flag: Option<f64>, stored: Option<f64>, name: &str| {
        flag.or(stored).ok_or_else(|| usage(format!("{name} is required without --calibration")))
    };
    let cfg = ResetConfig {
        omega_ef: mhz_to_rad_per_us(pick(t.omega_ef_mhz, base.as_ref().map(|b| b.omega_ef_MHz), "--omega-ef-mhz")?),
        omega_fh: mhz_to_rad_per_us(pick(t.omega_fh_mhz, base.as_ref().map(|b| b.omega_fh_MHz), "--omega-fh-mhz")?),
        detuning_ef: mhz_to_rad_per_us(t.detuning_ef_mhz.or(base.as_ref().map(|b| b.detuning_ef_MHz)).unwrap_or(0.0)),
        detuning_fh: mhz_to_rad_per_us(t.detuning_fh_mhz.or(base.as_ref().map(|b| b.detuning_fh_MHz)).unwrap_or(0.0)),
        duration: duration_us,
        initial_state: initial,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn reset_setup(s: &Session) -> CliResult<(EigenSystem, ChannelSet)> {
    let eig = eigensystem(s, qubit::DEFAULT_LEVELS)?;
    let set = device_channels(s, &eig)?.restrict(reset::RESET_LEVELS);
    Ok((eig.truncate(reset::RESET_LEVELS)?, set))
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

fn calibrate(a: &CalibrateArgs, s: &mut Session) -> CliResult<()> {
    if a.amplitude_points == 0 || a.detuning_points == 0 || !(a.duration_ns > 0.0) {
        return Err(usage("grid sizes and --duration-ns must be positive"));
    }
    let (eig, set) = reset_setup(s)?;
    let omegas = log_space(mhz_to_rad_per_us(1.0), mhz_to_rad_per_us(80.0), a.amplitude_points);
    let grid = CalibrationGrid {
        omegas_ef: omegas.clone(),
        omegas_fh: omegas,
        detunings_fh: linspace(mhz_to_rad_per_us(-30.0), mhz_to_rad_per_us(30.0), a.detuning_points),
        duration: a.duration_ns * 1e-3,
        ..CalibrationGrid::standard(set.rate(F, E))
    };
    let cal = reset::calibrate_reset(&eig, &set, &grid)?;
    let mut freq = String::from("param1,param2,residual\n");
    for (d, r) in &cal.frequency_sweep {
        writeln!(freq, "{},{},{}", rad_per_us_to_mhz(*d), rad_per_us_to_mhz(grid.probe_amplitude), r).unwrap();
    }
    s.write("reset_calibration_frequency.csv", &freq)?;
    let mut amp = String::from("param1,param2,residual\n");
    for (ef, fh, r) in &cal.amplitude_sweep {
        writeln!(amp, "{},{},{}", rad_per_us_to_mhz(*ef), rad_per_us_to_mhz(*fh), r).unwrap();
    }
    s.write("reset_calibration_amplitude.csv", &amp)?;
    s.write_json("reset_config.json", &ToneFile::from_config(&cal.config))?;
    s.write_json(
        "reset_calibration.json",
        &json!({
            "duration_ns": a.duration_ns,
            "residual_excitation": cal.amplitude_sweep.iter().map(|p| p.2).fold(f64::INFINITY, f64::min),
            "undriven_residual": cal.undriven_residual,
            "tones": ToneFile::from_config(&cal.config),
        }),
    )
}

fn reset_run(a: &RunArgs, s: &mut Session) -> CliResult<()> {
    let initial = match a.initial {
        Initial::G => InitialState::Level(G),
        Initial::E => InitialState::Level(E),
        Initial::F => InitialState::Level(F),
        Initial::H => InitialState::Level(H),
        Initial::Thermal => InitialState::Thermal,
    };
    let cfg = tones(&a.tones, a.duration_ns * 1e-3, initial)?;
    let (eig, set) = reset_setup(s)?;
    let result = reset::simulate_reset(&cfg, &eig, &set)?;
    s.write("reset_trajectory.csv", &result.trajectory.to_csv())?;
    s.write_json(
        "reset_run.json",
        &json!({
            "duration_ns": a.duration_ns,
            "residual_excitation": result.residual_excitation,
            "tones": ToneFile::from_config(&cfg),
        }),
    )
}

fn curve(a: &CurveArgs, s: &mut Session) -> CliResult<()> {
    let (eig, set) = reset_setup(s)?;
    let cfg = tones(&a.tones, reset::PREPARATION_RESET, InitialState::Thermal)?;
    let durations: Vec<f64> = a.durations_ns.iter().map(|d| d * 1e-3).collect();
    let transient = ReadoutTransient { tau: a.tau, t1_meas: s.device.t1_meas, p_inf: a.pginf };
    let points = reset::reset_fidelity_curve(&cfg, &durations, &eig, &set, &transient)?;
    let mut csv = String::from("duration_ns,raw_residual,corrected_residual\n");
    for (ns, p) in a.durations_ns.iter().zip(&points) {
        writeln!(csv, "{ns},{},{}", p.raw_residual, p.corrected_residual).unwrap();
    }
    s.write("reset_curve.csv", &csv)
}

/// Re-run the command recorded in a manifest and check that every output
/// is reproduced byte for byte.
pub fn replay(a: &ReplayArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.manifest)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", a.manifest.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", a.manifest.display())))?;
    let mut cli = Cli::try_parse_from(&manifest.argv)
        .map_err(|e| usage(format!("recorded command line does not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(usage("manifest records a replay"));
    }
    cli.global.config = manifest.config_path.clone();
    cli.global.seed = Some(manifest.seed);
    let out = a.into.clone().unwrap_or_else(|| manifest.out_dir.clone());
    cli.global.out = out.clone();

    let mut session = Session::open(&cli.global, manifest.argv.clone())?;
    if session.config_digest() != manifest.config_digest {
        return Err(Error::Config(format!(
            "device file digest {} differs from the recorded {}",
            session.config_digest(),
            manifest.config_digest
        ))
        .into());
    }
    let name = dispatch(&cli.command, &mut session)?;
    session.finish(&name)?;
    for o in &manifest.outputs {
        let path = out.join(&o.path);
        let bytes = std::fs::read(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if session::sha256_hex(&bytes) != o.sha256 {
            return Err(CliError::Mismatch(format!("{} differs from the recorded run", o.path)));
        }
    }
    println!("replay reproduced {} output(s)", manifest.outputs.len());
    Ok(())
}
