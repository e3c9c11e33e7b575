//! Fluorescence readout on the e-f transition.
//!
//! Reflection of a drive near the e-f frequency, the separation that sets
//! the SNR, single-shot Monte Carlo, the population estimator, the
//! drive-modified relaxation rate and the readout-transient correction.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissipation::ChannelSet;
use crate::error::{Error, Result};
use crate::qubit::{E, F, G};

/// Readout drive and detection settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfig {
    pub gamma_r: f64,
    pub detuning: f64,
    pub omega: f64,
    /// Integration window tau (us).
    pub integration_time: f64,
    pub shots: usize,
    pub seed: u64,
    /// Per-quadrature noise of a unit-length window; the integrated sample
    /// sees noise_sigma / sqrt(tau).
    pub noise_sigma: f64,
    /// Optional soft compression scale of the amplifier chain.
    pub saturation: Option<f64>,
}

impl ReadoutConfig {
    /// Resonant drive at the SNR optimum Omega = gamma_r / sqrt(2), 15 us window.
    pub fn optimal(gamma_r: f64) -> Self {
        Self {
            gamma_r,
            detuning: 0.0,
            omega: gamma_r / 2f64.sqrt(),
            integration_time: 15.0,
            shots: 10_000,
            seed: 0,
            noise_sigma: 0.0,
            saturation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_r > 0.0 && self.gamma_r.is_finite()) {
            return Err(Error::Domain(format!("gamma_r must be positive, got {}", self.gamma_r)));
        }
        if !(self.integration_time > 0.0 && self.integration_time.is_finite()) {
            return Err(Error::Domain(format!(
                "integration time must be positive, got {}",
                self.integration_time
            )));
        }
        if self.shots == 0 {
            return Err(Error::Domain("shot count must be at least 1".into()));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) || !self.detuning.is_finite() {
            return Err(Error::Domain("drive amplitude must be non-negative and finite".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Domain(format!("noise_sigma must be non-negative, got {}", self.noise_sigma)));
        }
        if let Some(s) = self.saturation {
            if !(s > 0.0) {
                return Err(Error::Domain(format!("saturation scale must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Omega^2 / (gamma_r^2 + 2 Omega^2), the time fraction spent in f.
    fn shelving_weight(&self) -> f64 {
        let o2 = self.omega * self.omega;
        o2 / (self.gamma_r * self.gamma_r + 2.0 * o2)
    }
}

/// Steady-state reflection with population `p_ef` in the e-f manifold.
pub fn reflection_coefficient(p_ef: f64, cfg: &ReadoutConfig) -> Result<Complex64> {
    if !(0.0..=1.0).contains(&p_ef) {
        return Err(Error::Domain(format!("p_ef must be in [0, 1], got {p_ef}")));
    }
    if !(cfg.gamma_r > 0.0) {
        return Err(Error::Domain(format!("gamma_r must be positive, got {}", cfg.gamma_r)));
    }
    let g = cfg.gamma_r;
    let d = cfg.detuning;
    let denom = d * d + 0.25 * g * g + 0.5 * cfg.omega * cfg.omega;
    Ok(Complex64::new(1.0, 0.0) - Complex64::new(0.5 * g, d) * (p_ef * g / denom))
}

/// |beta_out^g - beta_out^e|^2 per unit time.
pub fn snr_distance(cfg: &ReadoutConfig) -> Result<f64> {
    if !(cfg.gamma_r > 0.0) {
        return Err(Error::Domain(format!("gamma_r must be positive, got {}", cfg.gamma_r)));
    }
    let g = cfg.gamma_r;
    let o2 = cfg.omega * cfg.omega;
    let d0 = cfg.detuning * cfg.detuning + 0.25 * g * g;
    let denom = d0 + 0.5 * o2;
    Ok(0.25 * g * o2 * d0 / (denom * denom))
}

/// Reflection spectrum over a set of detunings.
pub fn spectroscopy(cfg: &ReadoutConfig, p_ef: f64, detunings: &[f64]) -> Result<Vec<Complex64>> {
    detunings
        .iter()
        .map(|&d| reflection_coefficient(p_ef, &ReadoutConfig { detuning: d, ..*cfg }))
        .collect()
}

/// Least-squares gamma_r from a measured spectrum at known drive and p_ef.
pub fn fit_gamma_r(
    cfg: &ReadoutConfig,
    p_ef: f64,
    detunings: &[f64],
    measured: &[Complex64],
) -> Result<f64> {
    if detunings.len() != measured.len() || detunings.is_empty() {
        return Err(Error::Domain("spectrum needs matching, non-empty detuning and data lists".into()));
    }
    let cost = |ln_g: f64| -> f64 {
        let c = ReadoutConfig { gamma_r: ln_g.exp(), ..*cfg };
        detunings
            .iter()
            .zip(measured)
            .map(|(&d, m)| {
                let r = reflection_coefficient(p_ef, &ReadoutConfig { detuning: d, ..c }).unwrap();
                (r - m).norm_sqr()
            })
            .sum()
    };
    // Coarse log scan, then golden-section refinement.
    let (lo, hi) = (1e-3f64.ln(), 1e4f64.ln());
    let n = 400;
    let best = (0..=n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .unwrap();
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = (best - step, best + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// Noise width that makes the static bright/dark histograms reach `snr`.
pub fn noise_sigma_for_snr(cfg: &ReadoutConfig, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::Domain(format!("target SNR must be positive, got {snr}")));
    }
    let contrast = (Complex64::new(1.0, 0.0) - reflection_coefficient(1.0, cfg)?).norm();
    Ok(contrast * cfg.integration_time.sqrt() / snr)
}

/// Bright-to-dark and dark-to-bright rates of the two-state shot model.
///
/// Returns (gamma_ge, effective bright-state decay) from the channel set.
fn shot_rates(cfg: &ReadoutConfig, channels: &ChannelSet) -> Result<(f64, f64)> {
    if channels.rate(F, E) <= 0.0 {
        return Err(Error::Config("channel set lacks the f->e readout decay".into()));
    }
    let up = channels.rate(G, E);
    let down = gamma1_meas(up, channels.rate(E, G), channels.rate(F, G), cfg)? - up;
    Ok((up, down.max(0.0)))
}

fn compress(z: Complex64, scale: Option<f64>) -> Complex64 {
    match scale {
        Some(s) if z.norm() > 0.0 => {
            let a = z.norm();
            z * (s * (a / s).tanh() / a)
        }
        _ => z,
    }
}

/// Integrated single-shot amplitudes for a preparation in g or e.
///
/// Each shot follows a two-state bright/dark path with exponential waiting
/// times, so the integrated signal is the time-weighted mean of the two
/// steady-state reflections plus complex Gaussian noise. Shot k draws from
/// its own ChaCha stream, so the output is independent of thread count.
pub fn simulate_shots(cfg: &ReadoutConfig, initial_state: usize, channels: &ChannelSet) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if initial_state != G && initial_state != E {
        return Err(Error::Domain(format!(
            "shots start in g or e, got level {initial_state}"
        )));
    }
    let (up, down) = shot_rates(cfg, channels)?;
    let bright = reflection_coefficient(1.0, cfg)?;
    let dark = Complex64::new(1.0, 0.0);
    let tau = cfg.integration_time;
    let width = cfg.noise_sigma / tau.sqrt();
    let noise = Normal::new(0.0, width).map_err(|e| Error::Domain(e.to_string()))?;
    let stream_base = (initial_state as u64) << 48;

    let samples = (0..cfg.shots)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream_base | k as u64);
            let mut state = initial_state;
            let mut t = 0.0;
            let mut acc = Complex64::new(0.0, 0.0);
            loop {
                let (rate, level_r) = if state == E { (down, bright) } else { (up, dark) };
                let wait = if rate > 0.0 {
                    Exp::new(rate).unwrap().sample(&mut rng)
                } else {
                    f64::INFINITY
                };
                if t + wait >= tau {
                    acc += level_r * (tau - t);
                    break;
                }
                acc += level_r * wait;
                t += wait;
                state = if state == E { G } else { E };
            }
            let mut z = acc / tau;
            if width > 0.0 {
                z += Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng));
            }
            compress(z, cfg.saturation)
        })
        .collect();
    Ok(samples)
}

/// Two-peak fit of the g- and e-prepared histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotHistogram {
    pub samples_g: Vec<Complex64>,
    pub samples_e: Vec<Complex64>,
    pub mu_g: Complex64,
    pub mu_e: Complex64,
    pub sigma_g: f64,
    pub sigma_e: f64,
}

/// Clip level of the robust fit in units of sigma.
const CLIP: f64 = 2.5;

/// Standard deviation of a unit normal truncated to +-CLIP.
fn truncated_std() -> f64 {
    let phi = (-0.5 * CLIP * CLIP).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mass = erf(CLIP / 2f64.sqrt());
    (1.0 - 2.0 * CLIP * phi / mass).sqrt()
}

/// Error function by its Taylor series, accurate for the small arguments used here.
fn erf(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-17 {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

/// Error function for any argument; the series is used below 3 and the
/// tail is below 2e-5 beyond it.
fn erf_signed(x: f64) -> f64 {
    let a = x.abs();
    let v = if a < 3.0 { erf(a) } else { 1.0 - erfc_tail(a) };
    v.copysign(x)
}

/// Asymptotic erfc for large arguments.
fn erfc_tail(x: f64) -> f64 {
    let x2 = x * x;
    (-x2).exp() / (x * std::f64::consts::PI.sqrt()) * (1.0 - 0.5 / x2 + 0.75 / (x2 * x2))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sigma-clipped Gaussian estimate of the peak of `samples` along `axis`.
///
/// Returns the complex mean of the retained samples and the width along the
/// axis, corrected for the clipping.
fn clipped_peak(samples: &[Complex64], axis: Complex64) -> Result<(Complex64, f64)> {
    let proj: Vec<f64> = samples.iter().map(|z| (z * axis.conj()).re).collect();
    let mut tmp = proj.clone();
    let mut center = median(&mut tmp);
    let mut dev: Vec<f64> = proj.iter().map(|x| (x - center).abs()).collect();
    let mut sigma = 1.4826 * median(&mut dev);
    let mut mean = samples.iter().sum::<Complex64>() / samples.len() as f64;
    if sigma == 0.0 {
        // Noise-free: every sample in the peak is identical to the median.
        let kept: Vec<&Complex64> =
            samples.iter().zip(&proj).filter(|(_, x)| **x == center).map(|(z, _)| z).collect();
        mean = kept.iter().copied().sum::<Complex64>() / kept.len() as f64;
        return Ok((mean, 0.0));
    }
    let correction = truncated_std();
    for _ in 0..50 {
        let kept: Vec<usize> =
            (0..proj.len()).filter(|&k| (proj[k] - center).abs() <= CLIP * sigma).collect();
        if kept.len() < 3 {
            return Err(Error::Calibration("too few samples in histogram peak".into()));
        }
        let m = kept.len() as f64;
        let c = kept.iter().map(|&k| proj[k]).sum::<f64>() / m;
        let var = kept.iter().map(|&k| (proj[k] - c).powi(2)).sum::<f64>() / (m - 1.0);
        let s = var.sqrt() / correction;
        mean = kept.iter().map(|&k| samples[k]).sum::<Complex64>() / m;
        let done = (c - center).abs() < 1e-12 * (1.0 + c.abs()) && (s - sigma).abs() < 1e-12 * s;
        center = c;
        sigma = s;
        if done {
            break;
        }
    }
    Ok((mean, sigma))
}

impl ShotHistogram {
    /// Fit both peaks. At zero detuning the real axis is used; otherwise
    /// the axis joining the two medians.
    pub fn fit(samples_g: Vec<Complex64>, samples_e: Vec<Complex64>, detuning: f64) -> Result<Self> {
        if samples_g.is_empty() || samples_e.is_empty() {
            return Err(Error::Domain("histogram fit needs samples from both preparations".into()));
        }
        let axis = if detuning == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            let med = |s: &[Complex64]| {
                let mut re: Vec<f64> = s.iter().map(|z| z.re).collect();
                let mut im: Vec<f64> = s.iter().map(|z| z.im).collect();
                Complex64::new(median(&mut re), median(&mut im))
            };
            let d = med(&samples_g) - med(&samples_e);
            if d.norm() == 0.0 {
                return Err(Error::Calibration("g and e histograms coincide".into()));
            }
            d / d.norm()
        };
        let (mu_g, sigma_g) = clipped_peak(&samples_g, axis)?;
        let (mu_e, sigma_e) = clipped_peak(&samples_e, axis)?;
        Ok(Self { samples_g, samples_e, mu_g, mu_e, sigma_g, sigma_e })
    }

    /// |mu_g - mu_e| / ((sigma_g + sigma_e) / 2).
    pub fn snr(&self) -> f64 {
        (self.mu_g - self.mu_e).norm() / (0.5 * (self.sigma_g + self.sigma_e))
    }

    /// Observed and two-Gaussian-predicted fractions of all samples whose
    /// projection lies within `half_width` (in units of the peak separation)
    /// of the midpoint between the peaks.
    pub fn inter_peak_mass(&self, half_width: f64) -> (f64, f64) {
        let sep = (self.mu_g - self.mu_e).norm();
        let axis = (self.mu_g - self.mu_e) / sep;
        let pg = (self.mu_g * axis.conj()).re;
        let pe = (self.mu_e * axis.conj()).re;
        let mid = 0.5 * (pg + pe);
        let (lo, hi) = (mid - half_width * sep, mid + half_width * sep);
        let total = (self.samples_g.len() + self.samples_e.len()) as f64;
        let observed = self
            .samples_g
            .iter()
            .chain(&self.samples_e)
            .filter(|z| {
                let x = (*z * axis.conj()).re;
                x > lo && x < hi
            })
            .count() as f64
            / total;
        let cdf = |x: f64, mu: f64, s: f64| 0.5 * (1.0 + erf_signed((x - mu) / (s * 2f64.sqrt())));
        let mass = |mu: f64, s: f64| if s > 0.0 { cdf(hi, mu, s) - cdf(lo, mu, s) } else { 0.0 };
        let predicted = (mass(pg, self.sigma_g) * self.samples_g.len() as f64
            + mass(pe, self.sigma_e) * self.samples_e.len() as f64)
            / total;
        (observed, predicted)
    }
}

/// Simulate both preparations with one configuration and fit them.
pub fn calibration_histogram(cfg: &ReadoutConfig, channels: &ChannelSet) -> Result<ShotHistogram> {
    let g = simulate_shots(cfg, G, channels)?;
    let e = simulate_shots(cfg, E, channels)?;
    ShotHistogram::fit(g, e, cfg.detuning)
}

/// Ground population from an ensemble-averaged amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationEstimate {
    pub p_ground: f64,
    /// False when noise pushed the unclamped estimate outside [0, 1].
    pub in_range: bool,
}

pub fn estimate_population(r_avg: Complex64, mu_g: Complex64, mu_e: Complex64) -> Result<PopulationEstimate> {
    let d = mu_g - mu_e;
    if d.norm() <= 1e-12 * (1.0 + mu_g.norm().max(mu_e.norm())) {
        return Err(Error::Calibration("calibration means coincide".into()));
    }
    let p = ((r_avg - mu_e) / d).re;
    Ok(PopulationEstimate { p_ground: p, in_range: (0.0..=1.0).contains(&p) })
}

/// Relaxation rate of the qubit while the readout drive is on.
pub fn gamma1_meas(gamma_ge: f64, gamma_eg: f64, gamma_fg: f64, cfg: &ReadoutConfig) -> Result<f64> {
    for (name, v) in [("gamma_ge", gamma_ge), ("gamma_eg", gamma_eg), ("gamma_fg", gamma_fg)] {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("{name} must be non-negative, got {v}")));
        }
    }
    if !(cfg.gamma_r > 0.0) {
        return Err(Error::Domain(format!("gamma_r must be positive, got {}", cfg.gamma_r)));
    }
    Ok(gamma_ge + gamma_eg + (gamma_fg - gamma_eg) * cfg.shelving_weight())
}

/// Invert [`gamma1_meas`] for the f -> g rate.
pub fn gamma_fg_from_meas(gamma1_meas: f64, gamma_ge: f64, gamma_eg: f64, cfg: &ReadoutConfig) -> Result<f64> {
    if !(cfg.omega > 0.0) {
        return Err(Error::Domain("the f->g rate is invisible without a readout drive".into()));
    }
    gamma1_meas_check(gamma1_meas)?;
    let w = cfg.shelving_weight();
    let fg = gamma_eg + (gamma1_meas - gamma_ge - gamma_eg) / w;
    if fg < 0.0 {
        return Err(Error::Domain(format!("inferred f->g rate is negative ({fg})")));
    }
    Ok(fg)
}

fn gamma1_meas_check(v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("measured relaxation rate must be positive, got {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QndStatus {
    MeasurementInduced,
    NoMeasurementDecay,
    ReadoutExtendsLifetime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QndReport {
    pub t1: f64,
    pub t1_meas: f64,
    pub n_qnd: f64,
    /// (1/T1^meas - 1/T1)^-1; absent when the two lifetimes coincide.
    pub pure_meas_time: Option<f64>,
    pub status: QndStatus,
}

pub fn qnd_metrics(t1: f64, t1_meas: f64, gamma_r: f64) -> Result<QndReport> {
    if !(t1 > 0.0 && t1_meas > 0.0) {
        return Err(Error::Domain(format!("lifetimes must be positive, got {t1} and {t1_meas}")));
    }
    let excess = 1.0 / t1_meas - 1.0 / t1;
    let (pure, status) = if excess == 0.0 {
        (None, QndStatus::NoMeasurementDecay)
    } else if excess > 0.0 {
        (Some(1.0 / excess), QndStatus::MeasurementInduced)
    } else {
        (Some(1.0 / excess), QndStatus::ReadoutExtendsLifetime)
    };
    Ok(QndReport { t1, t1_meas, n_qnd: gamma_r * t1_meas, pure_meas_time: pure, status })
}

/// One-sigma interval of the pure measurement time from independent
/// uncertainties of T1 and T1^meas, by linear error propagation.
pub fn pure_meas_time_interval(t1: f64, dt1: f64, t1_meas: f64, dt1_meas: f64) -> Result<(f64, f64)> {
    if !(t1 > t1_meas && t1_meas > 0.0) {
        return Err(Error::Domain("interval needs T1 > T1^meas > 0".into()));
    }
    let gap = t1 - t1_meas;
    let center = t1 * t1_meas / gap;
    let d_t1 = t1_meas * t1_meas / (gap * gap);
    let d_t1m = t1 * t1 / (gap * gap);
    let sigma = ((d_t1 * dt1).powi(2) + (d_t1m * dt1_meas).powi(2)).sqrt();
    Ok((center - sigma, center + sigma))
}

fn check_transient(tau: f64, t1_meas: f64) -> Result<()> {
    if !(tau > 0.0 && t1_meas > 0.0) {
        return Err(Error::Domain(format!(
            "tau and T1^meas must be positive, got {tau} and {t1_meas}"
        )));
    }
    Ok(())
}

/// (T/tau)(1 - exp(-tau/T)), the weight of the initial deviation in the
/// window average.
fn window_weight(tau: f64, t1_meas: f64) -> f64 {
    let x = tau / t1_meas;
    -(-x).exp_m1() / x
}

/// Window-averaged ground population for relaxation towards `p_inf`.
pub fn forward_average(p0: f64, tau: f64, t1_meas: f64, p_inf: f64) -> Result<f64> {
    check_transient(tau, t1_meas)?;
    Ok(p_inf + (p0 - p_inf) * window_weight(tau, t1_meas))
}

/// Initial ground population from a window-averaged measurement.
pub fn correct_population(p_meas: f64, tau: f64, t1_meas: f64, p_inf: f64) -> Result<f64> {
    check_transient(tau, t1_meas)?;
    for (name, p) in [("measured population", p_meas), ("asymptotic population", p_inf)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    Ok(p_inf + (p_meas - p_inf) / window_weight(tau, t1_meas))
}
