//! Scenario configuration: physical constants, geometry and budgets.

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Physical constants, service-region geometry and power/noise budgets for
/// one downlink scenario.
///
/// Derived quantities: the free-space wavelength `lambda = c / f_c`, the
/// guided wavelength `lambda_g = lambda / kappa` and the path-loss constant
/// `eta = (c / (4 pi f_c))^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Carrier frequency f_c (Hz).
    pub carrier_freq_hz: f64,
    /// Effective refractive index of the dielectric waveguide (>= 1).
    pub kappa: f64,
    /// Height d of the waveguide above the user plane (m).
    pub waveguide_height_m: f64,
    /// x-coordinate of the waveguide feed point (m).
    pub feed_x_m: f64,
    /// Service rectangle side length D1 along the waveguide (m).
    pub region_d1_m: f64,
    /// Service rectangle side length D2 across the waveguide (m).
    pub region_d2_m: f64,
    /// Total transmit power budget P (W).
    pub total_power_w: f64,
    /// Noise power sigma^2 (W).
    pub noise_power_w: f64,
    /// Number of pinching antennas M.
    pub antennas: usize,
    /// Number of users K.
    pub users: usize,
}

impl Default for SystemConfig {
    /// Baseline scenario: 28 GHz carrier, kappa = 1.4, 3 m waveguide
    /// height, feed at the origin, 10 m x 10 m region, -90 dBm noise and a
    /// 10 dB transmit SNR, four antennas serving four users.
    fn default() -> Self {
        let noise_power_w = dbm_to_watts(-90.0);
        SystemConfig {
            carrier_freq_hz: 28.0e9,
            kappa: 1.4,
            waveguide_height_m: 3.0,
            feed_x_m: 0.0,
            region_d1_m: 10.0,
            region_d2_m: 10.0,
            total_power_w: noise_power_w * 10f64.powf(10.0 / 10.0),
            noise_power_w,
            antennas: 4,
            users: 4,
        }
    }
}

impl SystemConfig {
    /// Validate all invariants and return the config unchanged.
    pub fn validated(self) -> Result<Self> {
        fn check(ok: bool, what: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(what.to_string()))
            }
        }
        check(
            self.carrier_freq_hz > 0.0 && self.carrier_freq_hz.is_finite(),
            "carrier_freq_hz must be positive",
        )?;
        check(self.kappa >= 1.0 && self.kappa.is_finite(), "kappa must be >= 1")?;
        check(
            self.waveguide_height_m > 0.0 && self.waveguide_height_m.is_finite(),
            "waveguide_height_m must be positive",
        )?;
        check(self.feed_x_m.is_finite(), "feed_x_m must be finite")?;
        check(
            self.region_d1_m >= 0.0 && self.region_d1_m.is_finite(),
            "region_d1_m must be non-negative",
        )?;
        check(
            self.region_d2_m >= 0.0 && self.region_d2_m.is_finite(),
            "region_d2_m must be non-negative",
        )?;
        check(
            self.total_power_w > 0.0 && self.total_power_w.is_finite(),
            "total_power_w must be positive",
        )?;
        check(
            self.noise_power_w > 0.0 && self.noise_power_w.is_finite(),
            "noise_power_w must be positive",
        )?;
        check(self.antennas >= 1, "antennas must be >= 1")?;
        check(self.users >= 1, "users must be >= 1")?;
        let derived = [self.lambda(), self.lambda_guide(), self.eta()];
        check(
            derived.iter().all(|v| v.is_finite() && *v > 0.0),
            "derived lambda, lambda_g, eta must be finite and positive",
        )?;
        Ok(self)
    }

    /// Free-space wavelength lambda = c / f_c (m).
    pub fn lambda(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Guided wavelength lambda_g = lambda / kappa (m).
    pub fn lambda_guide(&self) -> f64 {
        self.lambda() / self.kappa
    }

    /// Free-space path-loss constant eta = (c / (4 pi f_c))^2 (m^2).
    pub fn eta(&self) -> f64 {
        let a = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * self.carrier_freq_hz);
        a * a
    }

    /// Transmit SNR P / sigma^2 expressed in dB.
    pub fn transmit_snr_db(&self) -> f64 {
        10.0 * (self.total_power_w / self.noise_power_w).log10()
    }

    /// Replace the power budget so the transmit SNR equals `snr_db`.
    pub fn with_transmit_snr_db(mut self, snr_db: f64) -> Self {
        self.total_power_w = self.noise_power_w * 10f64.powf(snr_db / 10.0);
        self
    }
}

/// dBm-to-watts conversion: p_w = 10^((dbm - 30) / 10).
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Watts-to-dBm conversion, inverse of [`dbm_to_watts`].
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}
