//! Acceptance checks for the reference device.
//!
//! Runs without the libtest harness so every criterion prints exactly one
//! PASS/FAIL line, whether or not it succeeds. The process exits non-zero
//! if any criterion fails.

use std::f64::consts::SQRT_2;
use std::time::{Duration, Instant};

use fluxkit_core::dissipation::{self, ChannelOrigin, ChannelSet};
use fluxkit_core::dynamics::{self, DensityMatrix, DriveTone};
use fluxkit_core::filter::{self, FilterNetwork};
use fluxkit_core::qubit::{self, DeviceParams, EigenSystem, E, F, G, H};
use fluxkit_core::readout::{self, ReadoutConfig};
use fluxkit_core::reset::{self, CalibrationGrid, InitialState, ReadoutTransient};
use fluxkit_core::units::{ghz_to_rad_per_us, mhz_to_rad_per_us, rad_per_us_to_ghz, rad_per_us_to_mhz};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn gamma_r() -> f64 {
    mhz_to_rad_per_us(5.4)
}

fn reference() -> (DeviceParams, EigenSystem) {
    let p = DeviceParams::table_one();
    let eig = qubit::solve(&p, qubit::DEFAULT_BASIS_SIZE, qubit::DEFAULT_LEVELS).unwrap();
    (p, eig)
}

fn network() -> FilterNetwork {
    filter::synthesize_single_stage(4.6e9, 1.0e9, 50.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn require(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn c1_spectrum() -> Outcome {
    let (_, eig) = reference();
    let f = |i, j| rad_per_us_to_ghz(qubit::transition_frequency(&eig, i, j).unwrap());
    let rows = [("ge", f(E, G), 0.255), ("ef", f(F, E), 5.369), ("fh", f(H, F), 2.215), ("gh", f(H, G), 7.814)];
    let mut parts = Vec::new();
    for (name, got, want) in rows {
        require(rel(got, want) <= 0.05, format!("{name} = {got:.4} GHz, expected {want} +-5%"))?;
        parts.push(format!("{name}={got:.4}GHz"));
    }
    Ok(parts.join(" "))
}

fn c2_selection_rule() -> Outcome {
    let (_, eig) = reference();
    let n_gf = eig.charge(G, F).unwrap();
    let n_eh = eig.charge(E, H).unwrap();
    let s_gf = eig.qp(G, F).unwrap();
    require(n_gf < 1e-8 && n_eh < 1e-8, format!("|n_gf|={n_gf:e} |n_eh|={n_eh:e} not below 1e-8"))?;
    require(s_gf > 1e-3, format!("|sin_gf|={s_gf:e} not above 1e-3"))?;
    Ok(format!("|n_gf|={n_gf:.1e} |n_eh|={n_eh:.1e} |sin_gf|={s_gf:.4}"))
}

fn c3_filter() -> Outcome {
    let net = network();
    let grid = filter::frequency_grid(0.0, 12.0e9, 1.0e6);
    let t = filter::sweep(&net, &grid).unwrap();
    let band = filter::measure_passband(&grid, &t, 4.6e9, 0.5e9).ok_or("no passband")?;
    require(rel(band.peak_hz, 4.6e9) <= 0.02, format!("peak at {:.4} GHz", band.peak_hz / 1e9))?;
    require(rel(band.width(), 1.0e9) <= 0.10, format!("-3 dB width {:.4} GHz", band.width() / 1e9))?;
    let low = filter::frequency_grid(0.0, 1.0e9, 1.0e5);
    let worst = filter::sweep(&net, &low).unwrap().into_iter().fold(0.0, f64::max);
    let worst_db = 10.0 * worst.max(1e-300).log10();
    require(worst_db <= -30.0, format!("stopband reaches {worst_db:.2} dB below 1 GHz"))?;
    let mut unitarity = 0.0_f64;
    let mut reciprocity = 0.0_f64;
    for k in 0..10_000 {
        let f = 1.0e7 + k as f64 * 1.2e6;
        let s = filter::s_parameters(&net, f).unwrap();
        unitarity = unitarity.max(s.unitarity_error());
        reciprocity = reciprocity.max((s.s12 - s.s21).norm());
    }
    require(unitarity < 1e-9 && reciprocity < 1e-9, format!("unitarity {unitarity:e} reciprocity {reciprocity:e}"))?;
    Ok(format!(
        "peak={:.3}GHz mid={:.3}GHz width={:.3}GHz stopband={worst_db:.1}dB unitarity={unitarity:.0e}",
        band.peak_hz / 1e9,
        band.midpoint() / 1e9,
        band.width() / 1e9
    ))
}

fn c4_rates() -> Outcome {
    let (p, eig) = reference();
    let set = dissipation::build_channels(&eig, &network(), &p, 0.0, ghz_to_rad_per_us(44.0)).unwrap();
    let hg = rad_per_us_to_mhz(set.rate_of(H, G, ChannelOrigin::FilteredExternal));
    require(rel(hg, 6.5) <= 0.30, format!("Gamma_hg/2pi = {hg:.3} MHz"))?;
    let fe = set.rate_of(F, E, ChannelOrigin::FilteredExternal);
    require((fe - gamma_r()).abs() < 1e-12 * gamma_r(), format!("anchor not reproduced: {fe}"))?;
    let contrast = 51.0 * fe;
    require(rel(contrast, 1.7e3) <= 0.05, format!("T1 Gamma_r = {contrast:.0}"))?;
    let ratio = set.rate(E, G) / fe;
    require(ratio < 1e-3, format!("rate(e->g)/rate(f->e) = {ratio:e}"))?;
    Ok(format!("Gamma_hg/2pi={hg:.3}MHz T1*Gamma_r={contrast:.0} contrast={ratio:.1e}"))
}

fn c5_steady_state() -> Outcome {
    let gr = gamma_r();
    let (_, eig) = reference();
    let eig3 = eig.truncate(3).unwrap();
    let mut two = ChannelSet::new();
    two.push(1, 0, gr, ChannelOrigin::FilteredExternal).unwrap();
    let mut three = ChannelSet::new();
    three.push(F, E, gr, ChannelOrigin::FilteredExternal).unwrap();
    let rho0 = DensityMatrix::pure(3, E).unwrap();
    let mut worst_ss = 0.0_f64;
    let mut worst_ev = 0.0_f64;
    for i in 0..20 {
        let delta = gr * (-3.0 + 6.0 * i as f64 / 19.0);
        for j in 0..20 {
            let omega = gr * (0.05 + 4.95 * j as f64 / 19.0);
            let h3 = dynamics::rwa_hamiltonian(&eig3, &[DriveTone::new(&eig3, E, F, delta, omega).unwrap()]).unwrap();
            let h2 = h3.view((1, 1), (2, 2)).into_owned();
            let (ee, ff, ef) = dynamics::analytic_ef_steady_state(1.0, delta, omega, gr).unwrap();
            let ss = dynamics::steady_state(&h2, &two).map_err(|e| e.to_string())?;
            worst_ss = worst_ss
                .max((ss.population(0) - ee).abs())
                .max((ss.population(1) - ff).abs())
                .max((ss.get(0, 1) - ef).norm());
            let step = 0.5 * dynamics::max_stable_step(&h3, &three).unwrap();
            let rho = dynamics::evolve_final(&rho0, &h3, &three, 60.0 / gr, step).unwrap();
            worst_ev = worst_ev
                .max((rho.population(E) - ee).abs())
                .max((rho.population(F) - ff).abs())
                .max((rho.get(E, F) - ef).norm())
                .max((rho.get(E, F) - ss.get(0, 1)).norm());
        }
    }
    require(worst_ss < 1e-8, format!("null space vs closed form: {worst_ss:e}"))?;
    require(worst_ev < 1e-8, format!("long-time evolution vs closed form: {worst_ev:e}"))?;
    let cfg = ReadoutConfig::optimal(gr);
    let mut worst_r = 0.0_f64;
    for k in 0..=100 {
        let p = k as f64 / 100.0;
        let r = readout::reflection_coefficient(p, &cfg).unwrap();
        worst_r = worst_r.max((r - Complex64::new(1.0 - p, 0.0)).norm());
    }
    require(worst_r < 1e-15, format!("r - (1 - P_ef) = {worst_r:e}"))?;
    Ok(format!("400 points: null-space {worst_ss:.1e}, evolution {worst_ev:.1e}, |r-(1-P_ef)|={worst_r:.0e}"))
}

fn c6_qnd() -> Outcome {
    let report = readout::qnd_metrics(51.0, 46.0, gamma_r()).unwrap();
    require(rel(report.n_qnd, 1.56e3) < 0.005, format!("N_QND = {:.1}", report.n_qnd))?;
    let rounded = (report.n_qnd / 100.0).round() * 100.0;
    require(rounded == 1600.0, format!("N_QND rounds to {rounded}"))?;
    let pure_ms = report.pure_meas_time.ok_or("pure measurement time absent")? / 1e3;
    require((pure_ms - 0.47).abs() < 0.005, format!("pure measurement time {pure_ms:.4} ms"))?;
    let (lo, hi) = readout::pure_meas_time_interval(51.0, 1.0, 46.0, 1.0).unwrap();
    let (lo, hi) = (lo / 1e3, hi / 1e3);
    require(lo <= 0.55 && 0.55 <= hi, format!("interval [{lo:.3}, {hi:.3}] ms misses 0.55 ms"))?;
    require((hi - 0.60).abs() < 0.01, format!("upper bound {hi:.3} ms"))?;
    Ok(format!("N_QND={:.1} pure={pure_ms:.3}ms interval=[{lo:.3},{hi:.3}]ms", report.n_qnd))
}

fn c7_quasiparticles() -> Outcome {
    let (p, eig) = reference();
    let cfg = ReadoutConfig::optimal(gamma_r());
    let (eg, ge) = dissipation::split_t1(51.0, 0.77).unwrap();
    let fg = readout::gamma_fg_from_meas(1.0 / 46.0, ge, eg, &cfg).unwrap();
    require(rel(1.0 / fg, 41.6) <= 0.05, format!("1/Gamma_fg = {:.2} us", 1.0 / fg))?;
    let gap = ghz_to_rad_per_us(44.0);
    let x = dissipation::x_qp_from_rate(&eig, F, G, fg, gap, &p).unwrap();
    require(rel(x, 4e-7) <= 0.30, format!("x_qp = {x:.3e}"))?;
    let forward = dissipation::quasiparticle_rate(&eig, F, G, 4e-7, gap, &p).unwrap();
    Ok(format!("1/Gamma_fg={:.2}us x_qp={x:.2e} (x_qp=4e-7 gives {:.1}us)", 1.0 / fg, 1.0 / forward))
}

fn c8_correction() -> Outcome {
    let raw = [25.4, 8.4, 4.1, 3.7];
    let want = [26.2, 6.2, 1.2, 0.7];
    let mut got = Vec::new();
    for (r, w) in raw.iter().zip(want) {
        let p = readout::correct_population(1.0 - r / 100.0, 15.0, 46.0, 0.794).unwrap();
        let c = 100.0 * (1.0 - p);
        require((c - w).abs() <= 0.2, format!("{r}% -> {c:.3}%, expected {w} +-0.2"))?;
        got.push(format!("{c:.2}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let p0: f64 = rng.random();
        let tau = rng.random_range(0.1..100.0);
        let t1m = rng.random_range(1.0..200.0);
        let pinf: f64 = rng.random();
        let avg = readout::forward_average(p0, tau, t1m, pinf).unwrap();
        worst = worst.max((readout::correct_population(avg, tau, t1m, pinf).unwrap() - p0).abs());
    }
    require(worst < 1e-12, format!("round trip error {worst:e}"))?;
    Ok(format!("corrected=[{}]% round-trip={worst:.0e}", got.join(", ")))
}

/// Least-squares slope of ln(y) against t.
fn log_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mt = t.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(&ly).map(|(a, b)| (a - mt) * (b - my)).sum();
    let den: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    num / den
}

fn c9_rate_model() -> Outcome {
    let gr = gamma_r();
    let (_, eig) = reference();
    let eig3 = eig.truncate(3).unwrap();
    let (eg, ge) = dissipation::split_t1(51.0, 0.77).unwrap();
    let fg = 1.0 / 42.33;
    let mut set = ChannelSet::new();
    set.push(F, E, gr, ChannelOrigin::FilteredExternal).unwrap();
    set.push(E, G, eg, ChannelOrigin::Intrinsic).unwrap();
    set.push(G, E, ge, ChannelOrigin::Intrinsic).unwrap();
    set.push(F, G, fg, ChannelOrigin::Quasiparticle).unwrap();
    let mut parts = Vec::new();
    for omega in [gr / SQRT_2, gr, 2.0 * gr] {
        let cfg = ReadoutConfig { omega, ..ReadoutConfig::optimal(gr) };
        let predicted = readout::gamma1_meas(ge, eg, fg, &cfg).unwrap();
        let h = dynamics::rwa_hamiltonian(&eig3, &[DriveTone::new(&eig3, E, F, 0.0, omega).unwrap()]).unwrap();
        let ss = dynamics::steady_state(&h, &set).unwrap();
        let step = 0.5 * dynamics::max_stable_step(&h, &set).unwrap();
        let traj = dynamics::evolve_sampled(&DensityMatrix::pure(3, E).unwrap(), &h, &set, 120.0, step, 50).unwrap();
        traj.check_invariants().map_err(|e| e.to_string())?;
        let ratio_expected = (gr / omega).powi(2) + 1.0;
        let mut worst_ratio = 0.0_f64;
        let (mut ts, mut ys) = (Vec::new(), Vec::new());
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            if *t < 10.0 / gr {
                continue;
            }
            worst_ratio = worst_ratio.max(rel(rho.population(E) / rho.population(F), ratio_expected));
            ts.push(*t);
            ys.push(ss.population(G) - rho.population(G));
        }
        let fitted = -log_slope(&ts, &ys);
        require(rel(fitted, predicted) <= 0.02, format!("Omega={omega:.2}: fitted {fitted:.5} vs {predicted:.5}"))?;
        require(worst_ratio <= 0.02, format!("Omega={omega:.2}: P_e/P_f off by {worst_ratio:.3}"))?;
        parts.push(format!("1/G1m={:.2}us(fit {:.2}) ratio dev {:.1e}", 1.0 / predicted, 1.0 / fitted, worst_ratio));
    }
    Ok(parts.join("; "))
}

fn c10_monte_carlo() -> Outcome {
    let gr = gamma_r();
    let mut cfg = ReadoutConfig { shots: 10_000, seed: 2024, ..ReadoutConfig::optimal(gr) };
    cfg.noise_sigma = readout::noise_sigma_for_snr(&cfg, 6.3).unwrap();
    let mut quiet = ChannelSet::new();
    quiet.push(F, E, gr, ChannelOrigin::FilteredExternal).unwrap();
    let hist = readout::calibration_histogram(&cfg, &quiet).unwrap();
    let snr = hist.snr();
    require(rel(snr, 6.3) <= 0.05, format!("SNR {snr:.3} without transitions"))?;
    let mut busy = dissipation::measured_qubit_channels(51.0, 0.77).unwrap();
    busy.extend(&quiet);
    busy.push(F, G, 1.0 / 42.33, ChannelOrigin::Quasiparticle).unwrap();
    let hist_busy = readout::calibration_histogram(&cfg, &busy).unwrap();
    // Mass near the midpoint in excess of the two fitted Gaussians.
    let (obs_q, pred_q) = hist.inter_peak_mass(0.1);
    let (obs_b, pred_b) = hist_busy.inter_peak_mass(0.1);
    let (excess_q, excess_b) = (obs_q - pred_q, obs_b - pred_b);
    require(excess_q.abs() < 0.005, format!("static histograms show inter-peak excess {excess_q:.4}"))?;
    require(excess_b > 0.01, format!(
        "inter-peak mass {obs_b:.4} with transitions vs two-Gaussian {pred_b:.4}"
    ))?;
    let again = readout::calibration_histogram(&cfg, &busy).unwrap();
    require(again == hist_busy, "identical seed gave different histograms".into())?;
    Ok(format!(
        "SNR={snr:.3} (with transitions {:.3}); mid-gap mass {obs_q:.4} (Gaussian {pred_q:.4}) -> {obs_b:.4} (Gaussian {pred_b:.4})",
        hist_busy.snr()
    ))
}

fn reset_channels(p: &DeviceParams, eig: &EigenSystem) -> ChannelSet {
    let set = dissipation::build_channels(eig, &network(), p, 4e-7, ghz_to_rad_per_us(44.0)).unwrap();
    dissipation::with_measured_qubit_t1(&set, 51.0, 0.77).unwrap().restrict(reset::RESET_LEVELS)
}

fn c11_reset() -> Outcome {
    let (p, eig) = reference();
    let eig4 = eig.truncate(4).unwrap();
    let set = reset_channels(&p, &eig);
    let gr = set.rate(F, E);
    let cal = reset::calibrate_reset(&eig4, &set, &CalibrationGrid::standard(gr)).map_err(|e| e.to_string())?;
    let cfg = cal.config.clone();
    let transient = ReadoutTransient { tau: 15.0, t1_meas: 46.0, p_inf: 0.794 };
    let durations = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
    let curve = reset::reset_fidelity_curve(&cfg, &durations, &eig4, &set, &transient).unwrap();
    for w in curve.windows(2) {
        require(
            w[1].corrected_residual < w[0].corrected_residual,
            format!("residual not decreasing at {} us", w[1].duration),
        )?;
    }
    let r0 = curve[0].corrected_residual;
    let fastest = [E, F, H].iter().map(|&l| set.rate(l, G)).fold(0.0, f64::max);
    for pt in &curve {
        let bound = r0 * (-fastest * pt.duration).exp();
        require(pt.corrected_residual >= bound * (1.0 - 1e-9), format!(
            "residual {:.4} below decay bound {bound:.4} at {} us",
            pt.corrected_residual, pt.duration
        ))?;
    }
    let best = curve.iter().find(|pt| pt.corrected_residual < 0.01);
    let best = best.ok_or_else(|| {
        format!("residual at 300 ns is {:.4}", curve.last().unwrap().corrected_residual)
    })?;

    // Weak drives: the Lindblad residual follows the incoherent rate model.
    let weak = 0.05 * set.rate(H, G);
    let weak_cfg = reset::ResetConfig {
        omega_ef: weak,
        omega_fh: weak,
        detuning_ef: 0.0,
        detuning_fh: 0.0,
        duration: 2.0,
        initial_state: InitialState::Level(E),
    };
    let lindblad = reset::reset_residual(&weak_cfg, &eig4, &set).unwrap();
    let classical = reset::incoherent_residual(&weak_cfg, &set, &[0.0, 1.0, 0.0, 0.0]).unwrap();
    let dev = rel(1.0 - lindblad, 1.0 - classical);
    require(dev <= 0.05, format!("weak drive: Lindblad {lindblad:.5} vs rate model {classical:.5}"))?;

    let ratio = cfg.omega_ef / (gr / SQRT_2);
    require((3.0..=30.0).contains(&ratio), format!("Omega_ef is {ratio:.1} x the readout drive"))?;
    let fh_min = cal.frequency_sweep.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let step = cal.frequency_sweep[1].0 - cal.frequency_sweep[0].0;
    require(fh_min.abs() <= step, format!("f-h sweep minimum at {:.2} MHz", rad_per_us_to_mhz(fh_min)))?;

    let pts: Vec<String> =
        curve.iter().skip(1).map(|p| format!("{:.0}ns:{:.2}%", p.duration * 1e3, 100.0 * p.corrected_residual)).collect();
    Ok(format!(
        "Omega_ef/2pi={:.1}MHz Omega_fh/2pi={:.1}MHz; {}; <1% at {:.0} ns; weak-drive dev {:.1}%",
        rad_per_us_to_mhz(cfg.omega_ef),
        rad_per_us_to_mhz(cfg.omega_fh),
        pts.join(" "),
        best.duration * 1e3,
        100.0 * dev
    ))
}

fn c12_hygiene() -> Outcome {
    let (p, eig) = reference();
    let eig4 = eig.truncate(4).unwrap();
    let set = reset_channels(&p, &eig);
    let mut checked = 0;
    let cfg = reset::ResetConfig {
        omega_ef: mhz_to_rad_per_us(40.0),
        omega_fh: mhz_to_rad_per_us(60.0),
        detuning_ef: mhz_to_rad_per_us(1.0),
        detuning_fh: mhz_to_rad_per_us(-2.0),
        duration: 1.0,
        initial_state: InitialState::Thermal,
    };
    let r = reset::simulate_reset(&cfg, &eig4, &set).unwrap();
    r.trajectory.check_invariants().map_err(|e| e.to_string())?;
    checked += r.trajectory.len();
    let h = reset::reset_hamiltonian(&cfg, &eig4).unwrap();
    let step = 0.25 * dynamics::max_stable_step(&h, &set).unwrap();
    let traj = dynamics::evolve_sampled(&DensityMatrix::pure(4, E).unwrap(), &h, &set, 100.0, step, 100).unwrap();
    traj.check_invariants().map_err(|e| e.to_string())?;
    checked += traj.len();
    let drift = traj.states.iter().map(|s| (s.trace() - 1.0).norm()).fold(0.0, f64::max);
    require(drift < 1e-9, format!("trace drift {drift:e} over 100 us"))?;

    // Order check against the exact propagator exp(L t).
    let l = dynamics::liouvillian(&h, &set).unwrap();
    let rho0 = DensityMatrix::pure(4, E).unwrap();
    let t = 0.2;
    let exact_vec = (l * Complex64::new(t, 0.0)).exp() * vec_of(&rho0);
    let limit = dynamics::max_stable_step(&h, &set).unwrap();
    let err = |step: f64| {
        let rho = dynamics::evolve_final(&rho0, &h, &set, t, step).unwrap();
        (vec_of(&rho) - &exact_vec).iter().map(|z| z.norm()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(limit), err(limit / 2.0));
    let ratio = e1 / e2;
    require(ratio >= 12.0, format!("halving the step reduced the error only {ratio:.2}x"))?;
    Ok(format!("{checked} states checked, trace drift {drift:.0e}, step-halving ratio {ratio:.1}"))
}

fn vec_of(rho: &DensityMatrix) -> nalgebra::DVector<Complex64> {
    let n = rho.dim();
    nalgebra::DVector::from_fn(n * n, |k, _| rho.get(k / n, k % n))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 12] = [
        ("spectrum", c1_spectrum, Duration::from_secs(1)),
        ("selection rule", c2_selection_rule, Duration::from_secs(1)),
        ("filter", c3_filter, Duration::from_secs(5)),
        ("engineered rates", c4_rates, Duration::from_secs(1)),
        ("steady state", c5_steady_state, Duration::from_secs(30)),
        ("QND arithmetic", c6_qnd, Duration::from_secs(1)),
        ("quasiparticle chain", c7_quasiparticles, Duration::from_secs(5)),
        ("correction pipeline", c8_correction, Duration::from_secs(1)),
        ("rate-model validation", c9_rate_model, Duration::from_secs(60)),
        ("Monte Carlo SNR", c10_monte_carlo, Duration::from_secs(30)),
        ("reset", c11_reset, Duration::from_secs(300)),
        ("solver hygiene", c12_hygiene, Duration::from_secs(30)),
    ];
    let mut failures = 0;
    for (k, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > *limit => Err(format!("{msg}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS criterion {:>2} ({name}) [{elapsed:.2?}]: {msg}", k + 1),
            Err(msg) => {
                failures += 1;
                println!("FAIL criterion {:>2} ({name}) [{elapsed:.2?}]: {msg}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
