//! Jump channels from the spectrum, the filter, temperature and quasiparticles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{self, FilterNetwork};
use crate::qubit::{self, DeviceParams, EigenSystem, E, F, G};
use crate::units;

/// Charge elements at or below this magnitude are treated as forbidden.
pub const SELECTION_THRESHOLD: f64 = 1e-6;

/// Default superconducting gap Delta/h of thin-film aluminium (GHz).
pub const DEFAULT_GAP_GHZ: f64 = 44.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelOrigin {
    FilteredExternal,
    ThermalExcitation,
    Quasiparticle,
    /// Measured energy relaxation not explained by the engineered channels.
    Intrinsic,
}

impl ChannelOrigin {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelOrigin::FilteredExternal => "filtered-external",
            ChannelOrigin::ThermalExcitation => "thermal-excitation",
            ChannelOrigin::Quasiparticle => "quasiparticle",
            ChannelOrigin::Intrinsic => "intrinsic",
        }
    }
}

/// Jump |to><from| with rate `rate` (rad/us).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
    pub origin: ChannelOrigin,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub channels: Vec<Channel>,
}

impl ChannelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, from: usize, to: usize, rate: f64, origin: ChannelOrigin) -> Result<()> {
        if from == to {
            return Err(Error::Domain(format!("channel {from}->{to} is not a transition")));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!("channel rate must be non-negative, got {rate}")));
        }
        self.channels.push(Channel { from, to, rate, origin });
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Channel> {
        self.channels.iter()
    }

    /// Total rate i -> j summed over all origins.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.channels.iter().filter(|c| c.from == from && c.to == to).map(|c| c.rate).sum()
    }

    pub fn rate_of(&self, from: usize, to: usize, origin: ChannelOrigin) -> f64 {
        self.channels
            .iter()
            .filter(|c| c.from == from && c.to == to && c.origin == origin)
            .map(|c| c.rate)
            .sum()
    }

    pub fn contains(&self, from: usize, to: usize, origin: ChannelOrigin) -> bool {
        self.channels.iter().any(|c| c.from == from && c.to == to && c.origin == origin)
    }

    pub fn max_rate(&self) -> f64 {
        self.channels.iter().map(|c| c.rate).fold(0.0, f64::max)
    }

    /// Total out-rate of level `i`.
    pub fn out_rate(&self, i: usize) -> f64 {
        self.channels.iter().filter(|c| c.from == i).map(|c| c.rate).sum()
    }

    /// Channels acting entirely inside the lowest `levels` states.
    pub fn restrict(&self, levels: usize) -> ChannelSet {
        ChannelSet {
            channels: self
                .channels
                .iter()
                .filter(|c| c.from < levels && c.to < levels)
                .copied()
                .collect(),
        }
    }

    /// Channels whose origin passes `keep`.
    pub fn filter_origin(&self, keep: impl Fn(ChannelOrigin) -> bool) -> ChannelSet {
        ChannelSet { channels: self.channels.iter().filter(|c| keep(c.origin)).copied().collect() }
    }

    pub fn extend(&mut self, other: &ChannelSet) {
        self.channels.extend_from_slice(&other.channels);
    }

    /// Highest level index touched, plus one.
    pub fn dimension(&self) -> usize {
        self.channels.iter().map(|c| c.from.max(c.to) + 1).max().unwrap_or(0)
    }

    /// Worst relative violation of detailed balance over decay/excitation pairs
    /// of the given origins. Missing excitation channels count as rate zero.
    pub fn detailed_balance_error(&self, eig: &EigenSystem, temperature: f64) -> f64 {
        let mut worst = 0.0_f64;
        for c in self.channels.iter().filter(|c| c.origin == ChannelOrigin::FilteredExternal) {
            let up = self.rate_of(c.to, c.from, ChannelOrigin::ThermalExcitation);
            let omega = eig.energies[c.from] - eig.energies[c.to];
            let expected = (-units::hbar_omega_over_kt(omega, temperature)).exp();
            if c.rate > 0.0 {
                let ratio = up / c.rate;
                let err = if expected > 0.0 {
                    (ratio / expected - 1.0).abs()
                } else {
                    ratio
                };
                worst = worst.max(err);
            }
        }
        worst
    }
}

/// |coth(x/2) + 1| for signed x = hbar omega / k_B T, written through the
/// Bose occupation so that both signs and T -> 0 stay finite.
pub fn thermal_factor(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 2.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == 0.0 {
        return f64::INFINITY;
    }
    let nbar = 1.0 / x.abs().exp_m1();
    if x > 0.0 {
        2.0 * (nbar + 1.0)
    } else {
        2.0 * nbar
    }
}

/// Unnormalised external rate |T(omega) omega| |n_ij|^2 |coth + 1|.
fn external_weight(
    eig: &EigenSystem,
    i: usize,
    j: usize,
    network: &FilterNetwork,
    temperature: f64,
) -> Result<f64> {
    if i == j {
        return Err(Error::Domain(format!("external rate needs distinct levels, got {i}->{j}")));
    }
    let omega = qubit::transition_frequency(eig, i, j)?;
    let t = filter::transmittance(network, units::rad_per_us_to_hz(omega.abs()))?;
    let n = eig.charge(i, j)?;
    let x = units::hbar_omega_over_kt(omega, temperature);
    Ok((t * omega).abs() * n * n * thermal_factor(x))
}

/// Filtered external decay (i above j) or thermal excitation (i below j),
/// scaled so that the f -> e channel equals the device's gamma_r anchor.
pub fn external_rate(
    eig: &EigenSystem,
    i: usize,
    j: usize,
    network: &FilterNetwork,
    params: &DeviceParams,
) -> Result<f64> {
    let scale = coupling_scale(eig, network, params)?;
    Ok(scale * external_weight(eig, i, j, network, params.temperature)?)
}

/// Proportionality constant fixed by the measured readout decay rate.
pub fn coupling_scale(eig: &EigenSystem, network: &FilterNetwork, params: &DeviceParams) -> Result<f64> {
    let anchor = params.gamma_r_anchor.ok_or_else(|| {
        Error::Config(
            "absolute coupling is not set: supply gamma_r_over_2pi_MHz (the measured e-f decay rate)"
                .into(),
        )
    })?;
    if eig.levels <= F {
        return Err(Error::Config("anchoring the coupling needs at least 3 levels".into()));
    }
    let w = external_weight(eig, F, E, network, params.temperature)?;
    if !(w > 0.0) {
        return Err(Error::Numeric("readout transition has zero filtered weight".into()));
    }
    Ok(anchor / w)
}

/// Quasiparticle tunnelling rate through the small junction, i above j:
/// (8 E_J / pi) x_qp sqrt(2 Delta / omega_ij) |<i|sin((phi+phi_ext)/2)|j>|^2.
pub fn quasiparticle_rate(
    eig: &EigenSystem,
    i: usize,
    j: usize,
    x_qp: f64,
    gap: f64,
    params: &DeviceParams,
) -> Result<f64> {
    Ok(x_qp * quasiparticle_rate_per_density(eig, i, j, gap, params)?)
}

/// Rate per unit quasiparticle density.
pub fn quasiparticle_rate_per_density(
    eig: &EigenSystem,
    i: usize,
    j: usize,
    gap: f64,
    params: &DeviceParams,
) -> Result<f64> {
    let omega = qubit::transition_frequency(eig, i, j)?;
    if !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "quasiparticle relaxation needs level {i} above level {j}"
        )));
    }
    if !(gap > 0.0) {
        return Err(Error::Domain(format!("superconducting gap must be positive, got {gap}")));
    }
    let s = eig.qp(i, j)?;
    Ok(8.0 * params.e_j / PI * (2.0 * gap / omega).sqrt() * s * s)
}

/// Quasiparticle density that produces `rate` on the i -> j transition.
pub fn x_qp_from_rate(
    eig: &EigenSystem,
    i: usize,
    j: usize,
    rate: f64,
    gap: f64,
    params: &DeviceParams,
) -> Result<f64> {
    if !(rate >= 0.0) {
        return Err(Error::Domain(format!("rate must be non-negative, got {rate}")));
    }
    Ok(rate / quasiparticle_rate_per_density(eig, i, j, gap, params)?)
}

/// Assemble every engineered channel of the retained levels.
///
/// One filtered decay per parity-allowed pair, its detailed-balance partner
/// (omitted when zero), and downward quasiparticle channels for pairs with a
/// non-vanishing sin((phi+phi_ext)/2) element.
pub fn build_channels(
    eig: &EigenSystem,
    network: &FilterNetwork,
    params: &DeviceParams,
    x_qp: f64,
    gap: f64,
) -> Result<ChannelSet> {
    if eig.levels < 2 {
        return Err(Error::Domain("channel construction needs at least 2 levels".into()));
    }
    if !(x_qp >= 0.0) {
        return Err(Error::Domain(format!("x_qp must be non-negative, got {x_qp}")));
    }
    // Two-level systems have no readout transition to anchor on; they use the
    // gamma_r anchor directly as the e -> g scale.
    let scale = if eig.levels > F {
        coupling_scale(eig, network, params)?
    } else {
        let anchor = params.gamma_r_anchor.ok_or_else(|| {
            Error::Config("absolute coupling is not set: supply gamma_r_over_2pi_MHz".into())
        })?;
        anchor / external_weight(eig, E, G, network, 0.0)?.max(f64::MIN_POSITIVE)
    };
    let mut set = ChannelSet::new();
    for upper in 1..eig.levels {
        for lower in 0..upper {
            if eig.charge_elements[(upper, lower)] <= SELECTION_THRESHOLD {
                continue;
            }
            let down = scale * external_weight(eig, upper, lower, network, params.temperature)?;
            let up = scale * external_weight(eig, lower, upper, network, params.temperature)?;
            set.push(upper, lower, down, ChannelOrigin::FilteredExternal)?;
            if up > 0.0 {
                set.push(lower, upper, up, ChannelOrigin::ThermalExcitation)?;
            }
        }
    }
    if x_qp > 0.0 {
        for upper in 1..eig.levels {
            for lower in 0..upper {
                if eig.qp_elements[(upper, lower)] <= SELECTION_THRESHOLD {
                    continue;
                }
                let rate = quasiparticle_rate(eig, upper, lower, x_qp, gap, params)?;
                set.push(upper, lower, rate, ChannelOrigin::Quasiparticle)?;
            }
        }
    }
    Ok(set)
}

/// Qubit relaxation from a measured T1 split by detailed balance with the
/// thermal ground population: Gamma_eg = P_g / T1, Gamma_ge = (1 - P_g) / T1.
pub fn measured_qubit_channels(t1: f64, p_ground: f64) -> Result<ChannelSet> {
    let (down, up) = split_t1(t1, p_ground)?;
    let mut set = ChannelSet::new();
    set.push(E, G, down, ChannelOrigin::Intrinsic)?;
    set.push(G, E, up, ChannelOrigin::Intrinsic)?;
    Ok(set)
}

/// Replace the engineered g-e channels of `set` by the measured T1 split.
///
/// The measured lifetime already contains every g-e process, so the
/// filtered and thermal g-e channels are dropped to avoid double counting.
pub fn with_measured_qubit_t1(set: &ChannelSet, t1: f64, p_ground: f64) -> Result<ChannelSet> {
    let mut out = ChannelSet {
        channels: set
            .channels
            .iter()
            .filter(|c| !((c.from == E && c.to == G) || (c.from == G && c.to == E)))
            .copied()
            .collect(),
    };
    out.extend(&measured_qubit_channels(t1, p_ground)?);
    Ok(out)
}

/// (Gamma_eg, Gamma_ge) from T1 and the thermal ground population.
pub fn split_t1(t1: f64, p_ground: f64) -> Result<(f64, f64)> {
    if !(t1 > 0.0) {
        return Err(Error::Domain(format!("T1 must be positive, got {t1}")));
    }
    if !(0.0..=1.0).contains(&p_ground) {
        return Err(Error::Domain(format!("ground population must be in [0, 1], got {p_ground}")));
    }
    Ok((p_ground / t1, (1.0 - p_ground) / t1))
}
