//! Physical parameters of an atom–cavity realization and their reduction to the
//! universal dimensionless variables used everywhere else in the crate.
//!
//! Units ledger:
//!
//! * all rates and detunings are angular (rad/s) internally;
//! * `kappa` is the cavity *field* decay rate, `kappa = pi c / (2 L F)`, so the
//!   intensity FWHM of the empty cavity is `kappa / pi` Hz;
//! * the mode volume is `V_eff = L * A` with `A = pi (100 um)^2` by default;
//! * the transition dipole is eliminated through
//!   `p^2 = 3 pi eps0 hbar c^3 gamma / omega^3`, giving
//!   `g^2 = 3 lambda^2 c gamma / (8 pi V_eff)`;
//! * dimensionless time is `tau = t / T2`, intensities are in units of the
//!   saturation photon number `n0`, the atomic detuning is
//!   `delta = T2 (omega_a - omega_L)` and the cavity offset is
//!   `theta = (omega_c - omega_L) / kappa`.

use std::f64::consts::PI;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::constants::SPEED_OF_LIGHT;
use crate::error::{require_finite, require_non_negative, require_positive, Error, Result};

/// Default mode cross-section, `pi * (100 um)^2`.
pub const DEFAULT_MODE_AREA: f64 = PI * 100e-6 * 100e-6;
/// Default cavity length. Nothing dimensionless depends on it.
pub const DEFAULT_CAVITY_LENGTH: f64 = 0.1;
/// Default drive parameter `beta = 4 I_in / C^2`.
pub const DEFAULT_BETA: f64 = 2.0;

/// Dipole coherence of the transition: either a fixed `T2` or the radiative
/// limit `T2 = 2 / gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coherence {
    Radiative,
    T2(f64),
}

impl Coherence {
    pub fn t2(&self, gamma: f64) -> f64 {
        match *self {
            Coherence::Radiative => 2.0 / gamma,
            Coherence::T2(t2) => t2,
        }
    }

    pub fn dipole_decay(&self, gamma: f64) -> f64 {
        match *self {
            Coherence::Radiative => gamma / 2.0,
            Coherence::T2(t2) => 1.0 / t2,
        }
    }
}

impl Serialize for Coherence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Coherence::Radiative => s.serialize_str("radiative"),
            Coherence::T2(t2) => s.serialize_f64(t2),
        }
    }
}

impl<'de> Deserialize<'de> for Coherence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Seconds(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Seconds(t2) => Ok(Coherence::T2(t2)),
            Raw::Tag(tag) if tag.eq_ignore_ascii_case("radiative") => Ok(Coherence::Radiative),
            Raw::Tag(tag) => {
                Err(serde::de::Error::custom(format!("expected T2 in seconds or \"radiative\", got \"{tag}\"")))
            }
        }
    }
}

/// One atom–cavity realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSystem {
    /// Transition wavelength (m).
    pub wavelength: f64,
    /// Spontaneous decay rate (rad/s).
    pub gamma: f64,
    pub coherence: Coherence,
    pub atom_number: u64,
    pub finesse: f64,
    /// Cavity length (m).
    pub length: f64,
    /// Mode cross-section (m^2).
    pub mode_area: f64,
    pub quantum_efficiency: f64,
    /// Drive parameter `4 I_in / C^2`.
    pub beta: f64,
}

impl PhysicalSystem {
    pub fn new(wavelength: f64, gamma: f64, coherence: Coherence, atom_number: u64, finesse: f64) -> Self {
        PhysicalSystem {
            wavelength,
            gamma,
            coherence,
            atom_number,
            finesse,
            length: DEFAULT_CAVITY_LENGTH,
            mode_area: DEFAULT_MODE_AREA,
            quantum_efficiency: 1.0,
            beta: DEFAULT_BETA,
        }
    }

    pub fn t2(&self) -> f64 {
        self.coherence.t2(self.gamma)
    }

    /// `Gamma_2 = 1 / T2` (1/s).
    pub fn dipole_decay(&self) -> f64 {
        self.coherence.dipole_decay(self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("wavelength", self.wavelength)?;
        require_positive("gamma", self.gamma)?;
        require_positive("finesse", self.finesse)?;
        require_positive("length", self.length)?;
        require_positive("mode_area", self.mode_area)?;
        require_positive("beta", self.beta)?;
        if let Coherence::T2(t2) = self.coherence {
            require_positive("T2", t2)?;
        }
        let qe = self.quantum_efficiency;
        if !(qe.is_finite() && qe > 0.0 && qe <= 1.0) {
            return Err(Error::invalid("quantum_efficiency", format!("must lie in (0, 1], got {qe}")));
        }
        let gamma2 = self.dipole_decay();
        let limit = self.gamma / 2.0;
        if gamma2 < limit * (1.0 - 1e-12) {
            return Err(Error::DephasingBelowRadiative { gamma2, limit });
        }
        Ok(())
    }
}

/// Rates and couplings that follow from a [`PhysicalSystem`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Single-atom coupling `g` (rad/s), half the vacuum Rabi frequency.
    pub coupling: f64,
    /// Cavity field decay rate (1/s).
    pub kappa: f64,
    /// Dipole decay rate `Gamma_2 = 1/T2` (1/s).
    pub dipole_decay: f64,
    /// Saturation photon number `gamma Gamma_2 / (4 g^2)`.
    pub saturation_photons: f64,
    /// Single-atom cooperativity `g^2 / (kappa Gamma_2)`.
    pub single_atom_cooperativity: f64,
    /// Collective cooperativity `N C0`.
    pub cooperativity: f64,
    /// Laser angular frequency `2 pi c / lambda` (rad/s).
    pub laser_angular_frequency: f64,
    /// Stiffness ratio `kappa T2` of the time-domain model.
    pub stiffness: f64,
    /// `gamma T2`, equal to 2 in the radiative limit.
    pub gamma_t2: f64,
}

/// Closed form of the single-atom cooperativity, `3 lambda^2 gamma T2 F / (4 pi^2 A)`.
///
/// The cavity length cancels between `g^2` and `kappa`, so this is the value
/// used for `C0`; [`derive_params`] keeps the factored rates alongside it.
pub fn single_atom_cooperativity(sys: &PhysicalSystem) -> f64 {
    3.0 * sys.wavelength.powi(2) * sys.gamma * sys.t2() * sys.finesse / (4.0 * PI * PI * sys.mode_area)
}

pub fn derive_params(sys: &PhysicalSystem) -> Result<DerivedParams> {
    sys.validate()?;
    let c = SPEED_OF_LIGHT;
    let volume = sys.length * sys.mode_area;
    let g2 = 3.0 * sys.wavelength.powi(2) * c * sys.gamma / (8.0 * PI * volume);
    let kappa = PI * c / (2.0 * sys.length * sys.finesse);
    let gamma2 = sys.dipole_decay();
    let c0 = single_atom_cooperativity(sys);
    Ok(DerivedParams {
        coupling: g2.sqrt(),
        kappa,
        dipole_decay: gamma2,
        saturation_photons: sys.gamma * gamma2 / (4.0 * g2),
        single_atom_cooperativity: c0,
        cooperativity: sys.atom_number as f64 * c0,
        laser_angular_frequency: 2.0 * PI * c / sys.wavelength,
        stiffness: kappa * sys.t2(),
        gamma_t2: sys.gamma * sys.t2(),
    })
}

/// The four numbers every steady-state and dynamical result depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessPoint {
    /// Collective cooperativity `C`.
    pub cooperativity: f64,
    /// In-coupled intensity `I_in = eta^2 / (n0 kappa^2)`.
    pub drive: f64,
    /// Scaled atom–laser detuning `T2 (omega_a - omega_L)`.
    pub delta: f64,
    /// Cavity–laser detuning in units of `kappa`.
    pub theta: f64,
}

impl DimensionlessPoint {
    pub fn new(cooperativity: f64, drive: f64, delta: f64, theta: f64) -> Self {
        DimensionlessPoint { cooperativity, drive, delta, theta }
    }

    /// On-resonance point driven at `beta` times the upper-threshold asymptote.
    pub fn at_beta(cooperativity: f64, beta: f64) -> Self {
        Self::new(cooperativity, drive_for_beta(cooperativity, beta), 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        require_non_negative("C", self.cooperativity)?;
        require_non_negative("I_in", self.drive)?;
        require_finite("delta", self.delta)?;
        require_finite("theta", self.theta)
    }

    /// `beta = 4 I_in / C^2`; infinite for an empty cavity with nonzero drive.
    pub fn beta(&self) -> f64 {
        4.0 * self.drive / (self.cooperativity * self.cooperativity)
    }
}

pub fn drive_for_beta(cooperativity: f64, beta: f64) -> f64 {
    beta * cooperativity * cooperativity / 4.0
}

/// Physical drive and detunings corresponding to a dimensionless point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalDrive {
    /// Drive amplitude `eta` (1/s, field amplitude units).
    pub eta: f64,
    /// Atom–cavity detuning `omega_a - omega_c` (rad/s).
    pub atom_cavity: f64,
    /// Cavity–laser detuning `omega_c - omega_L` (rad/s).
    pub cavity_laser: f64,
}

/// Maps a physical drive onto the dimensionless variables.
///
/// `atom_cavity` is `omega_a - omega_c`; the atomic detuning entering the
/// steady state is the one seen by the laser, `omega_a - omega_L =
/// atom_cavity + cavity_laser`. With the cavity locked to the laser both
/// coincide.
pub fn to_dimensionless(
    sys: &PhysicalSystem,
    eta: f64,
    atom_cavity: f64,
    cavity_laser: f64,
) -> Result<DimensionlessPoint> {
    let d = derive_params(sys)?;
    require_finite("eta", eta)?;
    require_finite("atom_cavity", atom_cavity)?;
    require_finite("cavity_laser", cavity_laser)?;
    Ok(DimensionlessPoint {
        cooperativity: d.cooperativity,
        drive: eta * eta / (d.saturation_photons * d.kappa * d.kappa),
        delta: sys.t2() * (atom_cavity + cavity_laser),
        theta: cavity_laser / d.kappa,
    })
}

/// Inverse of [`to_dimensionless`]; the cooperativity of `point` is ignored
/// (it is fixed by `sys`). Returns the non-negative drive amplitude.
pub fn from_dimensionless(sys: &PhysicalSystem, point: &DimensionlessPoint) -> Result<PhysicalDrive> {
    let d = derive_params(sys)?;
    point.validate()?;
    let cavity_laser = point.theta * d.kappa;
    Ok(PhysicalDrive {
        eta: d.kappa * (point.drive * d.saturation_photons).sqrt(),
        atom_cavity: point.delta / sys.t2() - cavity_laser,
        cavity_laser,
    })
}
