//! Device configuration files.
//!
//! A device is described by a flat JSON object in user-facing units (GHz,
//! MHz, mK, us). Only the circuit energies and the flux bias are required;
//! everything else falls back to the reference device.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{self, DeviceParams};
use crate::units;

/// Reference device shipped with the crate.
pub const DEFAULT_DEVICE_JSON: &str = include_str!("../data/device.json");

/// Ground population used to infer the environment temperature.
pub const DEFAULT_P_G_THERMAL: f64 = 0.77;

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceFile {
    pub EJ_GHz: f64,
    pub EC_GHz: f64,
    pub EL_GHz: f64,
    pub phi_ext_over_2pi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_mK: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_r_over_2pi_MHz: Option<f64>,
    /// Thermal ground population; sets the temperature when it is omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_g_thermal: Option<f64>,
    /// Superconducting gap Delta/h.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_GHz: Option<f64>,
    /// Quasiparticle density near the small junction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_qp: Option<f64>,
    /// Quasiparticle density in the junction array (reported only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_qp_array: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_meas_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_center_GHz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_bandwidth_GHz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemperatureSource {
    Configured,
    DerivedFromGroundPopulation,
}

/// Parsed device with every default resolved, in internal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub params: DeviceParams,
    pub temperature_source: TemperatureSource,
    pub p_g_thermal: f64,
    pub gap: f64,
    pub x_qp: f64,
    pub x_qp_array: Option<f64>,
    pub t1: f64,
    pub t1_meas: f64,
    pub filter_center_hz: f64,
    pub filter_bandwidth_hz: f64,
    pub basis_size: usize,
    pub seed: u64,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{name} must be strictly positive, got {v}")))
    }
}

impl DeviceConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: DeviceFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("device JSON: {e}")))?;
        Self::from_file(&file)
    }

    pub fn from_file(f: &DeviceFile) -> Result<Self> {
        let mut params = DeviceParams {
            e_j: units::ghz_to_rad_per_us(positive("EJ_GHz", f.EJ_GHz)?),
            e_c: units::ghz_to_rad_per_us(positive("EC_GHz", f.EC_GHz)?),
            e_l: units::ghz_to_rad_per_us(positive("EL_GHz", f.EL_GHz)?),
            phi_ext: 2.0 * std::f64::consts::PI * f.phi_ext_over_2pi,
            temperature: 0.0,
            gamma_r_anchor: f
                .gamma_r_over_2pi_MHz
                .map(|g| positive("gamma_r_over_2pi_MHz", g).map(units::mhz_to_rad_per_us))
                .transpose()?,
        };
        if !f.phi_ext_over_2pi.is_finite() {
            return Err(Error::Domain("phi_ext_over_2pi must be finite".into()));
        }
        let basis_size = f.basis_size.unwrap_or(qubit::DEFAULT_BASIS_SIZE);
        if basis_size < qubit::MIN_BASIS_SIZE {
            return Err(Error::Domain(format!(
                "basis_size must be at least {}, got {basis_size}",
                qubit::MIN_BASIS_SIZE
            )));
        }
        let p_g_thermal = f.p_g_thermal.unwrap_or(DEFAULT_P_G_THERMAL);
        if !(p_g_thermal > 0.0 && p_g_thermal < 1.0) {
            return Err(Error::Domain(format!("p_g_thermal must lie in (0, 1), got {p_g_thermal}")));
        }
        let temperature_source = match f.temperature_mK {
            Some(t) => {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(Error::Domain(format!("temperature_mK must be non-negative, got {t}")));
                }
                params.temperature = t * 1e-3;
                TemperatureSource::Configured
            }
            None => {
                let eig = qubit::solve(&params, basis_size, qubit::DEFAULT_LEVELS)?;
                params.temperature = qubit::temperature_for_ground_population(&eig, p_g_thermal)?;
                TemperatureSource::DerivedFromGroundPopulation
            }
        };
        params.validate()?;
        let x_qp = f.x_qp.unwrap_or(4e-7);
        if !(x_qp >= 0.0) {
            return Err(Error::Domain(format!("x_qp must be non-negative, got {x_qp}")));
        }
        let t1 = positive("t1_us", f.t1_us.unwrap_or(51.0))?;
        let t1_meas = positive("t1_meas_us", f.t1_meas_us.unwrap_or(46.0))?;
        Ok(Self {
            params,
            temperature_source,
            p_g_thermal,
            gap: units::ghz_to_rad_per_us(positive("gap_GHz", f.gap_GHz.unwrap_or(44.0))?),
            x_qp,
            x_qp_array: f.x_qp_array,
            t1,
            t1_meas,
            filter_center_hz: positive("filter_center_GHz", f.filter_center_GHz.unwrap_or(4.6))? * 1e9,
            filter_bandwidth_hz: positive("filter_bandwidth_GHz", f.filter_bandwidth_GHz.unwrap_or(1.0))? * 1e9,
            basis_size,
            seed: f.seed.unwrap_or(0),
        })
    }

    pub fn reference() -> Self {
        Self::from_json_str(DEFAULT_DEVICE_JSON).expect("shipped device file is valid")
    }
}

/// Read and validate a device file.
pub fn load_device_config(path: &Path) -> Result<DeviceConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    DeviceConfig::from_json_str(&text)
}
