use std::f64::consts::FRAC_PI_2;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::constants::{optical_frequency, ELEMENTARY_CHARGE, PLANCK};
use crate::error::{require_finite, require_positive, Error, Result};
use crate::metrology::LockBudget;
use crate::model::PhysicalSystem;

/// LO-to-signal power ratio below which `P_sig + P_LO ~ P_LO` is flagged.
pub const DOMINANT_LO_RATIO: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneConfig {
    pub signal_power: f64,
    pub lo_power: f64,
    pub quantum_efficiency: f64,
    /// Optical frequency (Hz).
    pub optical_frequency: f64,
    /// LO phase (rad); `pi / 2` makes the difference current linear in the phase.
    pub lo_phase: f64,
    /// `dphi/dnu` (rad/Hz).
    pub phase_slope_per_hz: f64,
}

impl HomodyneConfig {
    /// Detector chain for a system at its lock budget, with the LO phase in quadrature.
    pub fn from_budget(sys: &PhysicalSystem, budget: &LockBudget, lo_power: f64) -> Self {
        HomodyneConfig {
            signal_power: budget.signal_power_w,
            lo_power,
            quantum_efficiency: sys.quantum_efficiency,
            optical_frequency: optical_frequency(sys.wavelength),
            lo_phase: FRAC_PI_2,
            phase_slope_per_hz: budget.phase_slope_per_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("lo_power", self.lo_power)?;
        require_positive("optical_frequency", self.optical_frequency)?;
        require_finite("signal_power", self.signal_power)?;
        require_finite("lo_phase", self.lo_phase)?;
        require_finite("phase_slope_per_hz", self.phase_slope_per_hz)?;
        if self.signal_power < 0.0 {
            return Err(Error::invalid("signal_power", "must be >= 0"));
        }
        if !(self.quantum_efficiency >= 0.0 && self.quantum_efficiency <= 1.0) {
            return Err(Error::invalid("quantum_efficiency", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn lo_dominant(&self) -> bool {
        self.lo_power >= DOMINANT_LO_RATIO * self.signal_power
    }

    fn responsivity(&self) -> f64 {
        ELEMENTARY_CHARGE * self.quantum_efficiency / (PLANCK * self.optical_frequency)
    }
}

/// Mean currents `(i1, i2)` (A) for an extra signal phase `dphi`.
pub fn photocurrents(cfg: &HomodyneConfig, dphi: f64) -> (f64, f64) {
    let r = cfg.responsivity();
    let dc = 0.5 * (cfg.signal_power + cfg.lo_power);
    let beat = (cfg.signal_power * cfg.lo_power).sqrt() * (dphi - cfg.lo_phase).cos();
    (r * (dc + beat), r * (dc - beat))
}

/// Difference-current slope (A/Hz) with respect to laser frequency at lock.
pub fn discriminant_slope(cfg: &HomodyneConfig) -> f64 {
    2.0 * cfg.responsivity() * (cfg.signal_power * cfg.lo_power).sqrt() * cfg.phase_slope_per_hz
}

/// Two-sided shot-noise PSD of the difference current (A^2/Hz) in the
/// dominant-LO limit, `e^2 eta P_LO / (h nu)`.
pub fn shot_noise_psd(cfg: &HomodyneConfig) -> Result<f64> {
    cfg.validate()?;
    if !cfg.lo_dominant() {
        warn!(
            "P_LO / P_sig = {:.3} is below {DOMINANT_LO_RATIO}; shot-noise PSD underestimates",
            cfg.lo_power / cfg.signal_power
        );
    }
    Ok(ELEMENTARY_CHARGE * cfg.responsivity() * cfg.lo_power)
}

/// Same with the signal's own shot noise kept, `e^2 eta (P_sig + P_LO) / (h nu)`.
pub fn shot_noise_psd_exact(cfg: &HomodyneConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(ELEMENTARY_CHARGE * cfg.responsivity() * (cfg.lo_power + cfg.signal_power))
}

/// Two-sided PSD of the lock's frequency error (Hz^2/Hz),
/// `h nu / (4 eta P_sig (dphi/dnu)^2)`, via current noise over discriminant slope squared.
pub fn frequency_error_psd(cfg: &HomodyneConfig) -> Result<f64> {
    cfg.validate()?;
    if cfg.phase_slope_per_hz == 0.0 {
        return Err(Error::invalid("phase_slope_per_hz", "zero slope gives no frequency discrimination"));
    }
    if cfg.signal_power == 0.0 || cfg.quantum_efficiency == 0.0 {
        return Err(Error::invalid("signal_power", "no detected signal"));
    }
    Ok(shot_noise_psd(cfg)? / discriminant_slope(cfg).powi(2))
}

/// White frequency-noise level `h0 = 4 S` in the linewidth law `FWHM = pi h0 / 2`.
pub fn h0_from_homodyne(cfg: &HomodyneConfig) -> Result<f64> {
    Ok(4.0 * frequency_error_psd(cfg)?)
}
