//! Unit conversions between user-facing units and the internal convention.
//!
//! Internally every frequency, energy and rate is an angular frequency in
//! rad/us and every time is in microseconds (hbar = 1).

use std::f64::consts::PI;

/// hbar / k_B in kelvin-seconds.
pub const HBAR_OVER_KB: f64 = 7.638_232_577_577_11e-12;

pub fn ghz_to_rad_per_us(ghz: f64) -> f64 {
    2.0 * PI * 1.0e3 * ghz
}

pub fn mhz_to_rad_per_us(mhz: f64) -> f64 {
    2.0 * PI * mhz
}

pub fn rad_per_us_to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1.0e3)
}

pub fn rad_per_us_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Ordinary frequency in Hz of an angular frequency given in rad/us.
pub fn rad_per_us_to_hz(omega: f64) -> f64 {
    omega * 1.0e6 / (2.0 * PI)
}

pub fn hz_to_rad_per_us(hz: f64) -> f64 {
    2.0 * PI * hz * 1.0e-6
}

/// Dimensionless ratio hbar*omega / (k_B * T) for omega in rad/us.
///
/// Returns `+inf` (with the sign of `omega`) at zero temperature.
pub fn hbar_omega_over_kt(omega: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        if omega == 0.0 {
            return 0.0;
        }
        return omega.signum() * f64::INFINITY;
    }
    HBAR_OVER_KB * omega * 1.0e6 / temperature
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let w = ghz_to_rad_per_us(5.369);
        assert!((rad_per_us_to_ghz(w) - 5.369).abs() < 1e-12);
        assert!((rad_per_us_to_hz(w) - 5.369e9).abs() < 1e-3);
        assert!((mhz_to_rad_per_us(5.4) - 2.0 * PI * 5.4).abs() < 1e-12);
    }

    #[test]
    fn thermal_ratio_at_ten_millikelvin() {
        // h * 1 GHz / k_B = 47.99 mK
        let x = hbar_omega_over_kt(ghz_to_rad_per_us(1.0), 0.04799243);
        assert!((x - 1.0).abs() < 1e-5);
    }
}
