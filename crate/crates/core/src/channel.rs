//! Sub-terahertz air-to-ground channel: spherical spreading, water-vapor
//! absorption, and LoS link capacity.
//!
//! The absorption coefficient follows a six-line pocket model of the
//! 100-450 GHz window: each water line contributes a Lorentzian-shaped term
//! whose strength and width are polynomials in the volume mixing ratio, plus
//! a continuum term that grows steeply with frequency. Channel gain is an
//! amplitude (field) factor; capacity assumes the receiver sees
//! `tx_power * gain^2` of signal against flat noise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Frequency window where the six-line absorption model is trustworthy.
pub const VALID_BAND_HZ: std::ops::RangeInclusive<f64> = 100e9..=450e9;

/// Wavenumbers of the modelled water lines, 1/cm.
const LINE_CENTERS_INV_CM: [f64; 6] = [3.96, 6.11, 10.84, 12.68, 14.65, 14.94];

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("link distance must be positive and finite, got {0}")]
    DegenerateLink(f64),
    #[error("link parameter {name} must be positive and finite, got {value}")]
    BadParameter { name: &'static str, value: f64 },
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

pub fn dbi_to_linear(dbi: f64) -> f64 {
    10f64.powf(dbi / 10.0)
}

/// Atmospheric state the mixing ratio is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atmosphere {
    pub temperature_c: f64,
    pub pressure_hpa: f64,
    pub relative_humidity_pct: f64,
}

impl Default for Atmosphere {
    /// Temperate reference: 25 C, sea-level pressure, 20% humidity.
    fn default() -> Self {
        Self { temperature_c: 25.0, pressure_hpa: 1013.25, relative_humidity_pct: 20.0 }
    }
}

impl Atmosphere {
    pub fn mixing_ratio(&self) -> f64 {
        mixing_ratio(self.temperature_c, self.pressure_hpa, self.relative_humidity_pct)
    }
}

/// Volume mixing ratio of water vapor from temperature (C), total pressure
/// (hPa), and relative humidity (percent). Saturation pressure uses the
/// Alduchov-Eskridge coefficients.
pub fn mixing_ratio(temperature_c: f64, pressure_hpa: f64, relative_humidity_pct: f64) -> f64 {
    let saturation_hpa = 6.1094 * (17.625 * temperature_c / (243.04 + temperature_c)).exp();
    (relative_humidity_pct / 100.0) * saturation_hpa / pressure_hpa
}

/// Medium absorption coefficient (1/m) at frequency `f_hz` for the given
/// water-vapor mixing ratio.
pub fn absorption_coefficient(f_hz: f64, mixing_ratio: f64) -> f64 {
    let mu = mixing_ratio;
    let strengths = [
        5.159e-5 * (1.0 - mu) * (-6.65e-5 * (1.0 - mu) + 0.0159),
        0.1925 * mu * (0.1350 * mu + 0.0318),
        0.2251 * mu * (0.1314 * mu + 0.0297),
        2.053 * mu * (0.1717 * mu + 0.0306),
        0.177 * mu * (0.0832 * mu + 0.0213),
        2.146 * mu * (0.1206 * mu + 0.0277),
    ];
    let widths = [
        (-2.09e-4 * (1.0 - mu) + 0.05).powi(2),
        (0.4241 * mu + 0.0998).powi(2),
        (0.4127 * mu + 0.0932).powi(2),
        (0.5394 * mu + 0.0961).powi(2),
        (0.2615 * mu + 0.0668).powi(2),
        (0.3789 * mu + 0.0871).powi(2),
    ];
    let wavenumber = f_hz / (100.0 * SPEED_OF_LIGHT);
    let lines: f64 = LINE_CENTERS_INV_CM
        .iter()
        .zip(strengths.iter().zip(widths.iter()))
        .map(|(&p, (&a, &b))| a / (b + (wavenumber - p) * (wavenumber - p)))
        .sum();
    let continuum = mu / 0.0157 * (2e-4 + 0.915e-112 * f_hz.powf(9.42));
    lines + continuum
}

/// Amplitude attenuation from molecular absorption over `distance_m`.
pub fn molecular_loss(f_hz: f64, mixing_ratio: f64, distance_m: f64) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(ChannelError::DegenerateLink(distance_m));
    }
    Ok((-absorption_coefficient(f_hz, mixing_ratio) * distance_m / 2.0).exp())
}

/// Free-space spreading amplitude factor.
pub fn spreading_loss(f_hz: f64, distance_m: f64) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(ChannelError::DegenerateLink(distance_m));
    }
    Ok(SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * f_hz * distance_m))
}

/// Radio parameters shared by every link of a deployment. Gains are linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub frequency_hz: f64,
    pub tx_power_w: f64,
    pub noise_power_w: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
}

impl Default for LinkParams {
    /// 188 GHz carrier, 5 mW transmit power, -85 dBm noise, 30 dBi per side.
    fn default() -> Self {
        Self {
            frequency_hz: 188e9,
            tx_power_w: 5e-3,
            noise_power_w: dbm_to_watts(-85.0),
            tx_gain: dbi_to_linear(30.0),
            rx_gain: dbi_to_linear(30.0),
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let fields = [
            ("frequency_hz", self.frequency_hz),
            ("tx_power_w", self.tx_power_w),
            ("noise_power_w", self.noise_power_w),
            ("tx_gain", self.tx_gain),
            ("rx_gain", self.rx_gain),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ChannelError::BadParameter { name, value });
            }
        }
        Ok(())
    }

    /// Non-fatal advisories, currently only the model band guard.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !VALID_BAND_HZ.contains(&self.frequency_hz) {
            out.push(format!(
                "carrier {:.3} GHz is outside the 100-450 GHz absorption model band",
                self.frequency_hz / 1e9
            ));
        }
        out
    }
}

/// Amplitude channel gain over a LoS link of length `distance_m`.
pub fn channel_gain(
    link: &LinkParams,
    mixing_ratio: f64,
    distance_m: f64,
) -> Result<f64, ChannelError> {
    let spread = spreading_loss(link.frequency_hz, distance_m)?;
    let absorb = molecular_loss(link.frequency_hz, mixing_ratio, distance_m)?;
    Ok(spread * absorb * (link.tx_gain * link.rx_gain).sqrt())
}

/// Spectral efficiency (bits/s/Hz) of a LoS link of length `distance_m`.
pub fn link_capacity(
    link: &LinkParams,
    mixing_ratio: f64,
    distance_m: f64,
) -> Result<f64, ChannelError> {
    let h = channel_gain(link, mixing_ratio, distance_m)?;
    Ok((1.0 + link.tx_power_w * h * h / link.noise_power_w).log2())
}

/// Center frequencies (Hz) of the modelled absorption lines.
pub fn line_centers_hz() -> [f64; 6] {
    LINE_CENTERS_INV_CM.map(|p| p * 100.0 * SPEED_OF_LIGHT)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REL: f64 = 1e-12;

    fn assert_rel(actual: f64, expected: f64) {
        assert!(
            (actual - expected).abs() <= REL * expected.abs(),
            "{actual} != {expected} (rel {})",
            ((actual - expected) / expected).abs()
        );
    }

    #[test]
    fn mixing_ratio_reference_point() {
        assert_rel(mixing_ratio(25.0, 1013.25, 20.0), 0.0062407817136870295);
    }

    #[test]
    fn spreading_loss_reference_point() {
        assert_rel(spreading_loss(188e9, 100.0).unwrap(), 1.268974776392804e-6);
    }

    #[test]
    fn absorption_and_loss_reference_points() {
        let mu = 0.0062407817136870295;
        assert_rel(absorption_coefficient(188e9, mu), 0.001174382107499064);
        assert_rel(molecular_loss(188e9, mu, 100.0).unwrap(), 0.9429716076156596);
    }

    #[test]
    fn capacity_reference_point() {
        let link = LinkParams::default();
        let mu = mixing_ratio(25.0, 1013.25, 20.0);
        assert_rel(link_capacity(&link, mu, 100.0).unwrap(), 11.145284690234169);
        let gain = channel_gain(&link, mu, 100.0).unwrap();
        assert_rel(gain, 0.0011966071849188445);
    }

    #[test]
    fn molecular_loss_stays_in_unit_interval_and_decays() {
        let mu = 0.006;
        let mut f = 100e9;
        while f <= 450e9 {
            let l = molecular_loss(f, mu, 200.0).unwrap();
            assert!(l > 0.0 && l <= 1.0, "loss {l} at {f}");
            f += 1e9;
        }
        let near = molecular_loss(380e9, mu, 50.0).unwrap();
        let far = molecular_loss(380e9, mu, 500.0).unwrap();
        assert!(far < near);
    }

    /// Each resonance term peaks exactly at its own line center; the total
    /// coefficient also peaks at every center except 439.2 GHz, which rides
    /// the shoulder of the much stronger 447.9 GHz line.
    #[test]
    fn line_peaks() {
        let mu = 0.006;
        let centers = line_centers_hz();
        for (i, &fc) in centers.iter().enumerate() {
            if i == 4 {
                continue;
            }
            let k0 = absorption_coefficient(fc, mu);
            assert!(k0 > absorption_coefficient(fc - 2e9, mu), "line {i} left");
            assert!(k0 > absorption_coefficient(fc + 2e9, mu), "line {i} right");
        }
        // The 439.2 GHz shoulder: total absorption keeps increasing toward
        // the 447.9 GHz line.
        assert!(absorption_coefficient(centers[4] + 2e9, mu) > absorption_coefficient(centers[4], mu));
    }

    #[test]
    fn capacity_decreases_with_distance() {
        let link = LinkParams::default();
        let mu = 0.00624;
        let mut last = f64::INFINITY;
        for d in [20.0, 50.0, 100.0, 200.0, 400.0] {
            let c = link_capacity(&link, mu, d).unwrap();
            assert!(c < last && c > 0.0);
            last = c;
        }
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let link = LinkParams::default();
        assert_eq!(
            link_capacity(&link, 0.006, 0.0).unwrap_err(),
            ChannelError::DegenerateLink(0.0)
        );
        let bad = LinkParams { tx_power_w: -1.0, ..LinkParams::default() };
        assert_eq!(
            bad.validate().unwrap_err(),
            ChannelError::BadParameter { name: "tx_power_w", value: -1.0 }
        );
        assert!(LinkParams::default().validate().is_ok());
    }

    #[test]
    fn unit_conversions_round_trip() {
        assert_rel(dbm_to_watts(-85.0), 3.1622776601683794e-12);
        assert_rel(watts_to_dbm(dbm_to_watts(7.0)), 7.0);
        assert_rel(dbi_to_linear(30.0), 1000.0);
    }

    #[test]
    fn band_guard_warns_without_failing() {
        let mut link = LinkParams::default();
        assert!(link.warnings().is_empty());
        link.frequency_hz = 500e9;
        assert_eq!(link.warnings().len(), 1);
        assert!(link.validate().is_ok());
    }
}
