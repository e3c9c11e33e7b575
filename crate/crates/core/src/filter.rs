//! Ideal lossless TEM two-port network for the coplanar stub filter.
//!
//! Elements are described by their characteristic impedance and the
//! frequency at which they are a quarter wave long, so the electrical
//! length at `f` is theta = (pi/2) f / f_q.

use std::f64::consts::FRAC_PI_2;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// |sin theta| below which a shorted stub is treated as a short to ground.
const SHORT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TwoPortElement {
    SeriesLine { z0: f64, quarter_wave_hz: f64 },
    ShortedStub { z0: f64, quarter_wave_hz: f64 },
}

impl TwoPortElement {
    pub fn series_line(z0: f64, quarter_wave_hz: f64) -> Result<Self> {
        check_element(z0, quarter_wave_hz)?;
        Ok(TwoPortElement::SeriesLine { z0, quarter_wave_hz })
    }

    pub fn shorted_stub(z0: f64, quarter_wave_hz: f64) -> Result<Self> {
        check_element(z0, quarter_wave_hz)?;
        Ok(TwoPortElement::ShortedStub { z0, quarter_wave_hz })
    }

    pub fn z0(&self) -> f64 {
        match *self {
            TwoPortElement::SeriesLine { z0, .. } | TwoPortElement::ShortedStub { z0, .. } => z0,
        }
    }

    pub fn quarter_wave_hz(&self) -> f64 {
        match *self {
            TwoPortElement::SeriesLine { quarter_wave_hz, .. }
            | TwoPortElement::ShortedStub { quarter_wave_hz, .. } => quarter_wave_hz,
        }
    }

    /// Electrical length at `frequency`.
    pub fn theta(&self, frequency: f64) -> f64 {
        FRAC_PI_2 * frequency / self.quarter_wave_hz()
    }
}

fn check_element(z0: f64, fq: f64) -> Result<()> {
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(Error::Domain(format!("element impedance must be positive, got {z0}")));
    }
    if !(fq > 0.0 && fq.is_finite()) {
        return Err(Error::Domain(format!("quarter-wave frequency must be positive, got {fq}")));
    }
    Ok(())
}

/// 2x2 chain (ABCD) matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abcd {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Abcd {
    pub fn identity() -> Self {
        Abcd { a: ONE, b: ZERO, c: ZERO, d: ONE }
    }

    pub fn determinant(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn max_abs_diff(&self, other: &Abcd) -> f64 {
        [self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

impl Mul for Abcd {
    type Output = Abcd;
    fn mul(self, r: Abcd) -> Abcd {
        Abcd {
            a: self.a * r.a + self.b * r.c,
            b: self.a * r.b + self.b * r.d,
            c: self.c * r.a + self.d * r.c,
            d: self.c * r.b + self.d * r.d,
        }
    }
}

/// Result of evaluating an element or cascade at one frequency.
///
/// A shorted stub at theta = k pi shorts the line to ground; its chain
/// matrix has an infinite shunt admittance and is reported separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chain {
    Finite(Abcd),
    /// Shunt short at element `index` of the cascade.
    Shorted { index: usize },
}

/// Chain matrix of one element.
pub fn abcd_element(element: &TwoPortElement, frequency: f64) -> Result<Chain> {
    if !(frequency >= 0.0) {
        return Err(Error::Domain(format!("frequency must be non-negative, got {frequency}")));
    }
    let theta = element.theta(frequency);
    let (s, c) = theta.sin_cos();
    Ok(match *element {
        TwoPortElement::SeriesLine { z0, .. } => Chain::Finite(Abcd {
            a: Complex64::new(c, 0.0),
            b: I * (z0 * s),
            c: I * (s / z0),
            d: Complex64::new(c, 0.0),
        }),
        TwoPortElement::ShortedStub { z0, .. } => {
            if s.abs() < SHORT_TOLERANCE {
                Chain::Shorted { index: 0 }
            } else {
                // Y = 1 / (i z0 tan theta) = -i cot(theta) / z0; finite at resonance.
                let y = -I * (c / (z0 * s));
                Chain::Finite(Abcd { a: ONE, b: ZERO, c: y, d: ONE })
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterNetwork {
    pub elements: Vec<TwoPortElement>,
    pub reference_impedance: f64,
}

impl FilterNetwork {
    pub fn new(elements: Vec<TwoPortElement>, reference_impedance: f64) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Domain("filter network must contain at least one element".into()));
        }
        if !(reference_impedance > 0.0 && reference_impedance.is_finite()) {
            return Err(Error::Domain(format!(
                "reference impedance must be positive, got {reference_impedance}"
            )));
        }
        Ok(Self { elements, reference_impedance })
    }

    pub fn has_stub(&self) -> bool {
        self.elements.iter().any(|e| matches!(e, TwoPortElement::ShortedStub { .. }))
    }
}

/// Ordered product of the element chain matrices.
pub fn cascade(network: &FilterNetwork, frequency: f64) -> Result<Chain> {
    let mut acc = Abcd::identity();
    for (index, el) in network.elements.iter().enumerate() {
        match abcd_element(el, frequency)? {
            Chain::Finite(m) => acc = acc * m,
            Chain::Shorted { .. } => return Ok(Chain::Shorted { index }),
        }
    }
    Ok(Chain::Finite(acc))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SMatrix {
    pub s11: Complex64,
    pub s21: Complex64,
    pub s12: Complex64,
    pub s22: Complex64,
}

impl SMatrix {
    /// Largest entry of |S^dagger S - I|; zero for a lossless two-port.
    pub fn unitarity_error(&self) -> f64 {
        let c11 = self.s11.norm_sqr() + self.s21.norm_sqr() - 1.0;
        let c22 = self.s12.norm_sqr() + self.s22.norm_sqr() - 1.0;
        let c12 = (self.s11.conj() * self.s12 + self.s21.conj() * self.s22).norm();
        c11.abs().max(c22.abs()).max(c12)
    }
}

fn finite_product(elements: &[TwoPortElement], frequency: f64) -> Result<Abcd> {
    let mut acc = Abcd::identity();
    for el in elements {
        match abcd_element(el, frequency)? {
            Chain::Finite(m) => acc = acc * m,
            Chain::Shorted { .. } => {
                return Err(Error::Numeric("unexpected second shunt short".into()))
            }
        }
    }
    Ok(acc)
}

/// Reflection seen through a finite two-port terminated in a short.
fn reflection_into_short(m: &Abcd, z0: f64) -> Result<Complex64> {
    if m.d.norm() == 0.0 {
        // Z_in infinite: open circuit.
        return Ok(ONE);
    }
    let zin = m.b / m.d;
    let den = zin + z0;
    if den.norm() == 0.0 {
        return Err(Error::Numeric("singular reflection denominator".into()));
    }
    Ok((zin - z0) / den)
}

/// Scattering parameters at the network reference impedance.
pub fn s_parameters(network: &FilterNetwork, frequency: f64) -> Result<SMatrix> {
    let z0 = network.reference_impedance;
    match cascade(network, frequency)? {
        Chain::Finite(m) => {
            let den = m.a + m.b / z0 + m.c * z0 + m.d;
            if den.norm() < 1e-300 {
                return Err(Error::Numeric(format!(
                    "singular chain-to-scattering conversion at {frequency} Hz"
                )));
            }
            Ok(SMatrix {
                s11: (m.a + m.b / z0 - m.c * z0 - m.d) / den,
                s21: Complex64::new(2.0, 0.0) / den,
                s12: m.determinant() * 2.0 / den,
                s22: (-m.a + m.b / z0 - m.c * z0 + m.d) / den,
            })
        }
        Chain::Shorted { index } => {
            let left = finite_product(&network.elements[..index], frequency)?;
            // Looking in from port 2 the right-hand section is traversed backwards;
            // a reciprocal symmetric-per-element cascade reverses by swapping A and D.
            let mut right = Abcd::identity();
            for el in network.elements[index + 1..].iter().rev() {
                match abcd_element(el, frequency)? {
                    Chain::Finite(m) => right = right * m,
                    Chain::Shorted { .. } => break,
                }
            }
            Ok(SMatrix {
                s11: reflection_into_short(&left, z0)?,
                s21: ZERO,
                s12: ZERO,
                s22: reflection_into_short(&right, z0)?,
            })
        }
    }
}

/// Power transmittance |s21|^2, clamped to [0, 1].
pub fn transmittance(network: &FilterNetwork, frequency: f64) -> Result<f64> {
    let s = s_parameters(network, frequency)?;
    let t = s.s21.norm_sqr();
    if t > 1.0 + 1e-12 {
        return Err(Error::Numeric(format!("transmittance {t} exceeds unity at {frequency} Hz")));
    }
    Ok(t.clamp(0.0, 1.0))
}

/// Uniform frequency grid `[start, stop]` with spacing `step` (Hz).
pub fn frequency_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|k| start + step * k as f64).collect()
}

/// Grid used for synthesis and verification: 0 to 12 GHz in 5 MHz steps.
pub fn default_grid() -> Vec<f64> {
    frequency_grid(0.0, 12.0e9, 5.0e6)
}

/// Main passband of a transmittance curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Passband {
    pub peak_hz: f64,
    pub peak_transmittance: f64,
    pub lower_edge_hz: f64,
    pub upper_edge_hz: f64,
}

impl Passband {
    pub fn width(&self) -> f64 {
        self.upper_edge_hz - self.lower_edge_hz
    }
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower_edge_hz + self.upper_edge_hz)
    }
}

/// Locate the lobe whose maximum lies within `search` of `near` and its
/// half-power crossings (linearly interpolated between grid points).
pub fn measure_passband(
    grid: &[f64],
    trans: &[f64],
    near: f64,
    search: f64,
) -> Option<Passband> {
    let ip = (0..grid.len())
        .filter(|&k| (grid[k] - near).abs() <= search)
        .max_by(|&a, &b| trans[a].total_cmp(&trans[b]))?;
    let peak = trans[ip];
    let half = 0.5 * peak;
    let cross = |k0: usize, k1: usize| {
        let (f0, f1, t0, t1) = (grid[k0], grid[k1], trans[k0], trans[k1]);
        if t1 == t0 {
            f0
        } else {
            f0 + (half - t0) * (f1 - f0) / (t1 - t0)
        }
    };
    let mut lo = ip;
    while lo > 0 && trans[lo] > half {
        lo -= 1;
    }
    let lower = if trans[lo] > half { grid[lo] } else { cross(lo, lo + 1) };
    let mut hi = ip;
    while hi + 1 < grid.len() && trans[hi] > half {
        hi += 1;
    }
    let upper = if trans[hi] > half { grid[hi] } else { cross(hi - 1, hi) };
    Some(Passband { peak_hz: grid[ip], peak_transmittance: peak, lower_edge_hz: lower, upper_edge_hz: upper })
}

pub fn sweep(network: &FilterNetwork, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().map(|&f| transmittance(network, f)).collect()
}

/// Free parameters of the single-stage topology that the bandwidth
/// bisection does not fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    /// Connecting-line quarter-wave frequency as a multiple of the center.
    pub line_quarter_wave_ratio: f64,
    /// Impedance of both connecting lines (ohm).
    pub line_impedance: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        // Low-impedance lines slightly shorter than an eighth wave at the
        // center give a high-pass-like response whose upper replica band
        // covers the 7-10 GHz range.
        Self { line_quarter_wave_ratio: 1.95, line_impedance: 10.0 }
    }
}

/// Line-stub-line network with a perfect match at `center`.
///
/// For a symmetric lossless cascade, s11 vanishes when the stub susceptance
/// cancels twice the imaginary part of the admittance presented by the
/// output line; this fixes the stub length for any stub impedance.
fn matched_line_stub_line(
    center: f64,
    z0: f64,
    stub_z: f64,
    opts: &SynthesisOptions,
) -> Result<FilterNetwork> {
    let zl = opts.line_impedance;
    let line_fq = opts.line_quarter_wave_ratio * center;
    let t = (FRAC_PI_2 * center / line_fq).tan();
    let zin = Complex64::new(zl, 0.0) * (Complex64::new(z0, zl * t)) / Complex64::new(zl, z0 * t);
    let susceptance = -2.0 * zin.inv().im;
    // -cot(theta_s) / Z_s = B  ->  theta_s = atan2(1, -B Z_s) in (0, pi)
    let theta_s = 1.0_f64.atan2(-susceptance * stub_z);
    let stub_fq = center * FRAC_PI_2 / theta_s;
    let line = TwoPortElement::series_line(zl, line_fq)?;
    FilterNetwork::new(vec![line, TwoPortElement::shorted_stub(stub_z, stub_fq)?, line], z0)
}

fn passband_of(network: &FilterNetwork, grid: &[f64], center: f64, bandwidth: f64) -> Result<Passband> {
    let t = sweep(network, grid)?;
    measure_passband(grid, &t, center, bandwidth)
        .ok_or_else(|| Error::Numeric("no passband found near the center".into()))
}

/// Synthesise a single-stage line-stub-line band-pass filter with default options.
pub fn synthesize_single_stage(center: f64, bandwidth: f64, z0: f64) -> Result<FilterNetwork> {
    synthesize_single_stage_with(center, bandwidth, z0, &SynthesisOptions::default())
}

/// Bisect the stub impedance until the measured -3 dB width of the lobe at
/// `center` equals `bandwidth`; the stub length is re-matched at every step.
pub fn synthesize_single_stage_with(
    center: f64,
    bandwidth: f64,
    z0: f64,
    opts: &SynthesisOptions,
) -> Result<FilterNetwork> {
    if !(bandwidth > 0.0 && bandwidth < center) {
        return Err(Error::Domain(format!(
            "bandwidth must satisfy 0 < bandwidth < center, got {bandwidth} and {center}"
        )));
    }
    if !(z0 > 0.0) {
        return Err(Error::Domain(format!("reference impedance must be positive, got {z0}")));
    }
    if !(opts.line_impedance > 0.0 && opts.line_quarter_wave_ratio > 1.0) {
        return Err(Error::Config(
            "line impedance must be positive and the line quarter-wave ratio above 1".into(),
        ));
    }
    let stop = (12.0e9_f64).max(3.0 * center);
    let grid = frequency_grid(0.0, stop, (bandwidth / 200.0).min(5.0e6));
    let width_at = |zs: f64| -> Result<f64> {
        let net = matched_line_stub_line(center, z0, zs, opts)?;
        Ok(passband_of(&net, &grid, center, 0.5 * bandwidth)?.width())
    };

    let (mut lo, mut hi) = (0.01 * z0 / 50.0, 4.0 * z0);
    let (w_lo, w_hi) = (width_at(lo)?, width_at(hi)?);
    if !(w_lo < bandwidth && bandwidth < w_hi) {
        return Err(Error::Synthesis { requested_hz: bandwidth, min_hz: w_lo, max_hz: w_hi });
    }
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if width_at(mid)? > bandwidth {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 < 1e-10 {
            break;
        }
    }
    matched_line_stub_line(center, z0, (lo * hi).sqrt(), opts)
}

/// Touchstone-style text (`# GHz S DB R <z0>`), magnitude in dB and angle in degrees.
pub fn touchstone(network: &FilterNetwork, grid: &[f64]) -> Result<String> {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "# GHz S DB R {}", network.reference_impedance).unwrap();
    let db_ang = |z: Complex64| (20.0 * z.norm().max(1e-15).log10(), z.arg().to_degrees());
    for &f in grid {
        let s = s_parameters(network, f)?;
        let (m11, a11) = db_ang(s.s11);
        let (m21, a21) = db_ang(s.s21);
        let (m12, a12) = db_ang(s.s12);
        let (m22, a22) = db_ang(s.s22);
        writeln!(
            out,
            "{} {m11} {a11} {m21} {a21} {m12} {a12} {m22} {a22}",
            f / 1e9
        )
        .unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(z: f64, fq: f64) -> TwoPortElement {
        TwoPortElement::series_line(z, fq).unwrap()
    }

    fn finite(c: Chain) -> Abcd {
        match c {
            Chain::Finite(m) => m,
            Chain::Shorted { .. } => panic!("unexpected short"),
        }
    }

    #[test]
    fn zero_length_line_is_identity() {
        let m = finite(abcd_element(&line(50.0, 4.6e9), 0.0).unwrap());
        assert!(m.max_abs_diff(&Abcd::identity()) < 1e-15);
    }

    #[test]
    fn quarter_wave_line_closed_form() {
        let m = finite(abcd_element(&line(50.0, 4.6e9), 4.6e9).unwrap());
        let expect = Abcd {
            a: ZERO,
            b: Complex64::new(0.0, 50.0),
            c: Complex64::new(0.0, 1.0 / 50.0),
            d: ZERO,
        };
        assert!(m.max_abs_diff(&expect) < 1e-12);
        assert!((m.determinant() - ONE).norm() < 1e-12);
    }

    #[test]
    fn stub_transparent_at_quarter_wave() {
        let stub = TwoPortElement::shorted_stub(20.0, 4.6e9).unwrap();
        let m = finite(abcd_element(&stub, 4.6e9).unwrap());
        assert!(m.c.norm() < 1e-12);
        assert!(matches!(abcd_element(&stub, 0.0).unwrap(), Chain::Shorted { .. }));
        assert!(matches!(abcd_element(&stub, 9.2e9).unwrap(), Chain::Shorted { .. }));
    }

    #[test]
    fn line_phases_add() {
        // theta = pi/4 at 4.6 GHz means quarter wave at 9.2 GHz.
        let half = FilterNetwork::new(vec![line(50.0, 9.2e9), line(50.0, 9.2e9)], 50.0).unwrap();
        let full = FilterNetwork::new(vec![line(50.0, 4.6e9)], 50.0).unwrap();
        let a = finite(cascade(&half, 4.6e9).unwrap());
        let b = finite(cascade(&full, 4.6e9).unwrap());
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn through_connection() {
        let net = FilterNetwork::new(vec![line(50.0, 1e9)], 50.0).unwrap();
        let s = s_parameters(&net, 0.0).unwrap();
        assert!((s.s21 - ONE).norm() < 1e-15);
        assert!(s.s11.norm() < 1e-15);
    }

    #[test]
    fn dc_short_blocks_transmission() {
        let net = synthesize_single_stage(4.6e9, 1.0e9, 50.0).unwrap();
        assert_eq!(transmittance(&net, 0.0).unwrap(), 0.0);
        let s = s_parameters(&net, 0.0).unwrap();
        assert!((s.s11.norm() - 1.0).abs() < 1e-12);
        assert!((s.s22.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn synthesis_hits_center_and_width() {
        let net = synthesize_single_stage(4.6e9, 1.0e9, 50.0).unwrap();
        let grid = default_grid();
        let t = sweep(&net, &grid).unwrap();
        let pb = measure_passband(&grid, &t, 4.6e9, 0.5e9).unwrap();
        assert!((pb.peak_hz - 4.6e9).abs() <= 0.02 * 4.6e9);
        assert!((pb.width() - 1.0e9).abs() <= 0.1e9, "width {}", pb.width());
        assert!(transmittance(&net, 4.6e9).unwrap() >= 0.99);
        assert!(transmittance(&net, 0.255e9).unwrap() <= 1e-3);
    }

    #[test]
    fn synthesis_rejects_bad_targets() {
        assert!(matches!(synthesize_single_stage(4.6e9, 5.0e9, 50.0), Err(Error::Domain(_))));
        assert!(matches!(
            synthesize_single_stage(4.6e9, 4.5e9, 50.0),
            Err(Error::Synthesis { .. })
        ));
        assert!(FilterNetwork::new(vec![], 50.0).is_err());
        assert!(TwoPortElement::series_line(-1.0, 1e9).is_err());
    }

    #[test]
    fn touchstone_header() {
        let net = synthesize_single_stage(4.6e9, 1.0e9, 50.0).unwrap();
        let s = touchstone(&net, &[1e9, 2e9]).unwrap();
        assert!(s.starts_with("# GHz S DB R 50\n"));
        assert_eq!(s.lines().count(), 3);
    }
}
