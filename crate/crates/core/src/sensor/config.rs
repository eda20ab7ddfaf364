use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label for the emulated sensor family. Metadata only: behavior is set by
/// the numeric fields of [`SensorConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SensorKind {
    #[serde(rename = "QIS")]
    Qis,
    #[serde(rename = "CIS")]
    Cis,
}

impl SensorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Qis => "QIS",
            SensorKind::Cis => "CIS",
        }
    }
}

impl std::str::FromStr for SensorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qis" => Ok(SensorKind::Qis),
            "cis" => Ok(SensorKind::Cis),
            other => Err(Error::InvalidParameter(format!(
                "unknown sensor {other:?} (expected qis or cis)"
            ))),
        }
    }
}

impl std::fmt::Display for SensorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the ADC maps an analog value to an integer before clamping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AdcMode {
    /// Truncate toward negative infinity.
    #[default]
    Floor,
    /// Round half away from zero.
    Round,
}

/// Physical parameters of one simulated sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// Photons per unit linear intensity.
    pub gain_alpha: f64,
    /// Read noise, electrons RMS.
    pub read_noise_sigma: f64,
    pub adc_bits: u8,
    /// Electrons per pixel per second.
    pub dark_current_rate: f64,
    /// Seconds.
    pub exposure_time: f64,
    /// Relative RMS of the PRNU gain field; 0 disables it.
    pub prnu_strength: f64,
    pub prnu_seed: u64,
    pub sensor_kind: SensorKind,
    #[serde(default)]
    pub adc_mode: AdcMode,
}

impl SensorConfig {
    /// Sub-electron read noise photon counter with a 5-bit ADC.
    pub fn qis() -> Self {
        Self {
            gain_alpha: 1.0,
            read_noise_sigma: 0.25,
            adc_bits: 5,
            dark_current_rate: 0.068,
            exposure_time: 75e-6,
            prnu_strength: 0.0,
            prnu_seed: 0,
            sensor_kind: SensorKind::Qis,
            adc_mode: AdcMode::Floor,
        }
    }

    /// Conventional CMOS sensor: same ADC depth as [`SensorConfig::qis`] so the
    /// read noise is the only default difference in the signal chain.
    pub fn cis() -> Self {
        Self {
            read_noise_sigma: 2.0,
            exposure_time: 250e-6,
            sensor_kind: SensorKind::Cis,
            ..Self::qis()
        }
    }

    pub fn for_kind(kind: SensorKind) -> Self {
        match kind {
            SensorKind::Qis => Self::qis(),
            SensorKind::Cis => Self::cis(),
        }
    }

    pub fn with_gain(mut self, alpha: f64) -> Self {
        self.gain_alpha = alpha;
        self
    }

    /// Maximum ADC output `L = 2^bits - 1`.
    pub fn max_level(&self) -> u32 {
        max_level(self.adc_bits)
    }

    /// Expected dark electrons accumulated during one exposure.
    pub fn dark_electrons(&self) -> f64 {
        self.dark_current_rate * self.exposure_time
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.gain_alpha.is_finite() && self.gain_alpha > 0.0) {
            return bad("gain_alpha must be finite and > 0");
        }
        if !(self.read_noise_sigma.is_finite() && self.read_noise_sigma >= 0.0) {
            return bad("read_noise_sigma must be finite and >= 0");
        }
        if self.adc_bits == 0 || self.adc_bits > 16 {
            return bad("adc_bits must be in 1..=16");
        }
        if !(self.dark_current_rate.is_finite() && self.dark_current_rate >= 0.0) {
            return bad("dark_current_rate must be finite and >= 0");
        }
        if !(self.exposure_time.is_finite() && self.exposure_time > 0.0) {
            return bad("exposure_time must be finite and > 0");
        }
        if !(self.prnu_strength.is_finite() && self.prnu_strength >= 0.0) {
            return bad("prnu_strength must be finite and >= 0");
        }
        Ok(())
    }
}

pub(crate) fn max_level(bits: u8) -> u32 {
    ((1u64 << bits) - 1) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let q = SensorConfig::qis();
        assert_eq!(q.read_noise_sigma, 0.25);
        assert_eq!(q.adc_bits, 5);
        assert_eq!(q.dark_current_rate, 0.068);
        assert_eq!(q.max_level(), 31);
        let c = SensorConfig::cis();
        assert_eq!(c.read_noise_sigma, 2.0);
        assert_eq!(c.adc_bits, q.adc_bits);
        assert_eq!(c.exposure_time, 250e-6);
        assert_eq!(q.exposure_time, 75e-6);
    }

    #[test]
    fn validation() {
        assert!(SensorConfig::qis().validate().is_ok());
        assert!(SensorConfig::qis().with_gain(0.0).validate().is_err());
        let mut c = SensorConfig::qis();
        c.adc_bits = 0;
        assert!(c.validate().is_err());
        c.adc_bits = 16;
        assert!(c.validate().is_ok());
        assert_eq!(c.max_level(), 65535);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("QIS".parse::<SensorKind>().unwrap(), SensorKind::Qis);
        assert_eq!("cis".parse::<SensorKind>().unwrap(), SensorKind::Cis);
        assert!("ccd".parse::<SensorKind>().is_err());
    }
}
