//! SI constants (exact values of the 2019 SI redefinition, CODATA 2018 for
//! the measured ones).

use std::f64::consts::PI;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Optical frequency in Hz for a vacuum wavelength in metres.
pub fn optical_frequency(wavelength_m: f64) -> f64 {
    SPEED_OF_LIGHT / wavelength_m
}

/// Photon energy h*nu in joules.
pub fn photon_energy(wavelength_m: f64) -> f64 {
    PLANCK * optical_frequency(wavelength_m)
}
