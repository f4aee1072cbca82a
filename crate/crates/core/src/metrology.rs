//! Lock budget of a laser stabilized to the saturated transmission phase.
//!
//! The operating point is the resonant top branch at `I_in = beta C^2 / 4`.
//! Rates follow the identity `kappa C^2 n0 = N^2 C0 gamma / 4`, so every
//! power-like quantity below is independent of the cavity length.
//!
//! Slopes are in seconds (radians of phase per rad/s of detuning) unless the
//! name says `per_hz`; linewidths are FWHM in Hz.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::constants::HBAR;
use crate::error::{require_finite, Error, Result};
use crate::fmt::num;
use crate::model::{derive_params, DerivedParams, DimensionlessPoint, PhysicalSystem};
use crate::steady_state::{phase_zero_crossing, solve_branches, SteadyStateBranch};

pub const TABLE1_CSV_HEADER: &str = "species,C0,P_W,SNR,linewidth_Hz";

fn check_beta(beta: f64) -> Result<()> {
    require_finite("beta", beta)?;
    if beta < 1.0 {
        return Err(Error::invalid(
            "beta",
            format!("metrology needs beta >= 1 (above the upper threshold), got {beta}"),
        ));
    }
    Ok(())
}

/// Resonant saturated branch at `I_in = beta C^2 / 4`.
pub fn operating_point(cooperativity: f64, beta: f64) -> Result<(DimensionlessPoint, SteadyStateBranch)> {
    check_beta(beta)?;
    let point = DimensionlessPoint::at_beta(cooperativity, beta);
    let set = solve_branches(&point)?;
    Ok((point, set.top().clone()))
}

fn derived_and_branch(sys: &PhysicalSystem, beta: f64) -> Result<(DerivedParams, SteadyStateBranch)> {
    let d = derive_params(sys)?;
    let (_, branch) = operating_point(d.cooperativity, beta)?;
    Ok((d, branch))
}

/// Power leaving the cavity, `2 hbar omega kappa n0 u`, at the operating point.
pub fn signal_power(sys: &PhysicalSystem, beta: f64) -> Result<f64> {
    let (d, branch) = derived_and_branch(sys, beta)?;
    Ok(2.0 * HBAR * d.laser_angular_frequency * d.kappa * d.saturation_photons * branch.intensity)
}

/// Leading order in `1/C`: `hbar omega N^2 C0 gamma beta / 8`.
pub fn signal_power_leading(sys: &PhysicalSystem, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let d = derive_params(sys)?;
    let n = sys.atom_number as f64;
    Ok(HBAR * d.laser_angular_frequency * n * n * d.single_atom_cooperativity * sys.gamma * beta / 8.0)
}

/// Bandwidth-normalized shot-noise SNR (sqrt Hz), `sqrt(eta N^2 C0 gamma beta / 4)`.
pub fn snr(sys: &PhysicalSystem, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let d = derive_params(sys)?;
    let n = sys.atom_number as f64;
    Ok((sys.quantum_efficiency * n * n * d.single_atom_cooperativity * sys.gamma * beta / 4.0).sqrt())
}

/// SNR from the exact operating-point power, `sqrt(2 eta P / (hbar omega))`.
pub fn snr_at_operating_point(sys: &PhysicalSystem, beta: f64) -> Result<f64> {
    let d = derive_params(sys)?;
    let p = signal_power(sys, beta)?;
    Ok((2.0 * sys.quantum_efficiency * p / (HBAR * d.laser_angular_frequency)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSlope {
    /// `T2 C sigma_z / (C sigma_z - 1)`.
    pub exact: f64,
    /// `4 T2 / (beta C)`.
    pub leading: f64,
}

impl PhaseSlope {
    pub fn exact_per_hz(&self) -> f64 {
        2.0 * PI * self.exact
    }

    pub fn relative_gap(&self) -> f64 {
        (self.leading / self.exact - 1.0).abs()
    }
}

pub fn phase_slope(t2: f64, cooperativity: f64, beta: f64, inversion: f64) -> PhaseSlope {
    let cz = cooperativity * inversion;
    PhaseSlope { exact: t2 * cz / (cz - 1.0), leading: 4.0 * t2 / (beta * cooperativity) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linewidth {
    /// `C0 beta / (16 pi gamma T2^2 eta)`.
    pub closed_form: f64,
    /// `pi / (SNR 2 pi dphi/dDelta)^2` with the exact power and slope.
    pub full: f64,
}

pub fn quantum_limited_linewidth(sys: &PhysicalSystem, beta: f64) -> Result<Linewidth> {
    let (d, branch) = derived_and_branch(sys, beta)?;
    let t2 = sys.t2();
    let closed_form = d.single_atom_cooperativity * beta / (16.0 * PI * sys.gamma * t2 * t2 * sys.quantum_efficiency);
    let slope = phase_slope(t2, d.cooperativity, beta, branch.inversion);
    let s = snr_at_operating_point(sys, beta)?;
    let full = PI / (s * slope.exact_per_hz()).powi(2);
    Ok(Linewidth { closed_form, full })
}

/// `kappa C^2 n0 beta = N^2 C0 gamma beta / 4` (Hz).
pub fn lock_bandwidth(sys: &PhysicalSystem, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let d = derive_params(sys)?;
    let n = sys.atom_number as f64;
    Ok(n * n * d.single_atom_cooperativity * sys.gamma * beta / 4.0)
}

/// Lock-point shift per unit `theta`, `C beta / (8 pi T2)` (Hz).
pub fn pulling_coefficient(sys: &PhysicalSystem, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let d = derive_params(sys)?;
    Ok(d.cooperativity * beta / (8.0 * PI * sys.t2()))
}

pub fn line_pulling(sys: &PhysicalSystem, beta: f64, theta: f64) -> Result<f64> {
    require_finite("theta", theta)?;
    Ok(pulling_coefficient(sys, beta)? * theta)
}

/// Lock-point shift (Hz) from the located zero of the transmitted phase.
pub fn line_pulling_numeric(cooperativity: f64, drive: f64, theta: f64, t2: f64) -> Result<f64> {
    Ok(phase_zero_crossing(cooperativity, drive, theta)? / (2.0 * PI * t2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveDipole {
    /// `(N^2 / C^2) (gamma T2 / beta)`.
    pub closed_form: f64,
    /// `N^2 |sigma_-|^2` on the operating branch.
    pub from_branch: f64,
}

pub fn collective_dipole(sys: &PhysicalSystem, beta: f64) -> Result<CollectiveDipole> {
    let (d, branch) = derived_and_branch(sys, beta)?;
    let n = sys.atom_number as f64;
    if sys.atom_number == 0 {
        return Ok(CollectiveDipole { closed_form: 0.0, from_branch: 0.0 });
    }
    let closed_form = n * n / (d.cooperativity * d.cooperativity) * d.gamma_t2 / beta;
    let from_branch = n * n * branch.sigma_minus(d.gamma_t2).norm_sqr();
    Ok(CollectiveDipole { closed_form, from_branch })
}

/// Linewidth quoted for the active (lasing) counterpart, `C0 gamma / pi`.
pub fn laser_reference_linewidth(sys: &PhysicalSystem) -> Result<f64> {
    let d = derive_params(sys)?;
    Ok(d.single_atom_cooperativity * sys.gamma / PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockBudget {
    pub beta: f64,
    pub cooperativity: f64,
    pub single_atom_cooperativity: f64,
    pub drive: f64,
    pub intensity: f64,
    pub inversion: f64,
    pub signal_power_w: f64,
    pub signal_power_leading_w: f64,
    pub snr: f64,
    pub snr_operating_point: f64,
    pub phase_slope_s: f64,
    pub phase_slope_leading_s: f64,
    pub phase_slope_per_hz: f64,
    pub linewidth_hz: f64,
    pub linewidth_full_hz: f64,
    pub lock_bandwidth_hz: f64,
    pub pulling_hz_per_theta: f64,
    pub collective_dipole: f64,
    pub collective_dipole_branch: f64,
    pub laser_reference_linewidth_hz: f64,
}

pub fn lock_budget(sys: &PhysicalSystem, beta: f64) -> Result<LockBudget> {
    let (d, branch) = derived_and_branch(sys, beta)?;
    let slope = phase_slope(sys.t2(), d.cooperativity, beta, branch.inversion);
    let lw = quantum_limited_linewidth(sys, beta)?;
    let dip = collective_dipole(sys, beta)?;
    Ok(LockBudget {
        beta,
        cooperativity: d.cooperativity,
        single_atom_cooperativity: d.single_atom_cooperativity,
        drive: DimensionlessPoint::at_beta(d.cooperativity, beta).drive,
        intensity: branch.intensity,
        inversion: branch.inversion,
        signal_power_w: signal_power(sys, beta)?,
        signal_power_leading_w: signal_power_leading(sys, beta)?,
        snr: snr(sys, beta)?,
        snr_operating_point: snr_at_operating_point(sys, beta)?,
        phase_slope_s: slope.exact,
        phase_slope_leading_s: slope.leading,
        phase_slope_per_hz: slope.exact_per_hz(),
        linewidth_hz: lw.closed_form,
        linewidth_full_hz: lw.full,
        lock_bandwidth_hz: lock_bandwidth(sys, beta)?,
        pulling_hz_per_theta: pulling_coefficient(sys, beta)?,
        collective_dipole: dip.closed_form,
        collective_dipole_branch: dip.from_branch,
        laser_reference_linewidth_hz: laser_reference_linewidth(sys)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub species: String,
    pub c0: f64,
    pub power_w: f64,
    pub snr: f64,
    pub linewidth_hz: f64,
}

/// One row per catalog species, each at its own `beta`.
pub fn table1(catalog: &Catalog) -> Result<Vec<Table1Row>> {
    catalog
        .species
        .par_iter()
        .map(|rec| {
            let sys = rec.system()?;
            let b = lock_budget(&sys, sys.beta)?;
            Ok(Table1Row {
                species: rec.name.clone(),
                c0: b.single_atom_cooperativity,
                power_w: b.signal_power_w,
                snr: b.snr,
                linewidth_hz: b.linewidth_hz,
            })
        })
        .collect()
}

/// Budgets keyed by species name.
pub fn budgets(catalog: &Catalog) -> Result<BTreeMap<String, LockBudget>> {
    catalog
        .species
        .par_iter()
        .map(|rec| {
            let sys = rec.system()?;
            Ok((rec.name.clone(), lock_budget(&sys, sys.beta)?))
        })
        .collect()
}

pub fn write_table1_text<W: Write>(rows: &[Table1Row], mut w: W) -> Result<()> {
    let width = rows.iter().map(|r| r.species.len()).max().unwrap_or(0).max(7);
    writeln!(w, "{:<width$}  {:>10}  {:>10}  {:>10}  {:>12}", "species", "C0", "P (W)", "SNR", "linewidth (Hz)")?;
    for r in rows {
        writeln!(
            w,
            "{:<width$}  {:>10.3e}  {:>10.3e}  {:>10.3e}  {:>14.3e}",
            r.species, r.c0, r.power_w, r.snr, r.linewidth_hz
        )?;
    }
    Ok(())
}

pub fn write_table1_csv<W: Write>(rows: &[Table1Row], mut w: W) -> Result<()> {
    writeln!(w, "{TABLE1_CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.species, num(r.c0), num(r.power_w), num(r.snr), num(r.linewidth_hz))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Coherence;
    use crate::steady_state::transmitted_phase;

    fn sr() -> PhysicalSystem {
        Catalog::builtin().get("Sr-87").unwrap().system().unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a / b - 1.0).abs() < rel
    }

    #[test]
    fn length_cancels() {
        let mut s = sr();
        let d = derive_params(&s).unwrap();
        let n = s.atom_number as f64;
        let lhs = d.kappa * d.cooperativity.powi(2) * d.saturation_photons;
        assert!(close(lhs, n * n * d.single_atom_cooperativity * s.gamma / 4.0, 1e-12));
        let p1 = signal_power(&s, 2.0).unwrap();
        s.length = 0.37;
        assert!(close(signal_power(&s, 2.0).unwrap(), p1, 1e-12));
    }

    #[test]
    fn sr_row() {
        let s = sr();
        assert!(close(signal_power(&s, 2.0).unwrap(), 3e-15, 0.1));
        assert!(close(snr(&s, 2.0).unwrap(), 1.5e2, 0.1));
        assert!(close(quantum_limited_linewidth(&s, 2.0).unwrap().closed_form, 4.7e-3, 0.1));
        assert!(close(lock_bandwidth(&s, 2.0).unwrap(), 2.3e4, 0.05));
    }

    #[test]
    fn leading_power_overshoots_at_moderate_c() {
        let s = sr();
        let ratio = signal_power_leading(&s, 2.0).unwrap() / signal_power(&s, 2.0).unwrap();
        assert!(ratio > 1.0 && ratio < 1.0 + 8.0 / 74.0);
    }

    #[test]
    fn efficiency_scaling() {
        let mut s = sr();
        let a = snr(&s, 2.0).unwrap();
        let w = quantum_limited_linewidth(&s, 2.0).unwrap();
        s.quantum_efficiency = 0.25;
        assert!(close(snr(&s, 2.0).unwrap(), 0.5 * a, 1e-12));
        assert!(close(quantum_limited_linewidth(&s, 2.0).unwrap().full, 4.0 * w.full, 1e-12));
    }

    #[test]
    fn empty_cavity_budget() {
        let mut s = sr();
        s.atom_number = 0;
        assert_eq!(signal_power(&s, 2.0).unwrap(), 0.0);
        assert_eq!(lock_bandwidth(&s, 2.0).unwrap(), 0.0);
        assert_eq!(collective_dipole(&s, 2.0).unwrap().closed_form, 0.0);
    }

    #[test]
    fn slope_exact_vs_numeric() {
        let (c, beta) = (100.0, 2.0);
        let (p, b) = operating_point(c, beta).unwrap();
        let slope = phase_slope(1.0, c, beta, b.inversion);
        let h = 1e-5;
        let phase = |d: f64| {
            let q = DimensionlessPoint { delta: d, ..p };
            transmitted_phase(&q, solve_branches(&q).unwrap().top())
        };
        let numeric = (phase(h) - phase(-h)) / (2.0 * h);
        assert!(close(numeric.abs(), slope.exact, 1e-6), "{numeric} {}", slope.exact);
        assert!(close(slope.leading, 0.02, 1e-12));
        assert!(slope.relative_gap() < 3.0 / c);
    }

    #[test]
    fn slope_vanishes_when_bleached() {
        let big = phase_slope(1.0, 1e8, 2.0, operating_point(1e8, 2.0).unwrap().1.inversion);
        assert!(big.exact < 1e-7);
    }

    #[test]
    fn full_and_closed_linewidth_agree() {
        for &f in &[1e5, 1e6, 1e7] {
            let mut s = sr();
            s.finesse = f;
            let c = derive_params(&s).unwrap().cooperativity;
            let lw = quantum_limited_linewidth(&s, 2.0).unwrap();
            assert!(close(lw.full, lw.closed_form, 3.0 / c), "C = {c}");
        }
    }

    #[test]
    fn radiative_reduction() {
        let s = Catalog::builtin().get("Sr-87-radiative").unwrap().system().unwrap();
        let d = derive_params(&s).unwrap();
        let lw = quantum_limited_linewidth(&s, 2.0).unwrap().closed_form;
        assert!(close(lw, 2.0 * d.single_atom_cooperativity * s.gamma / (64.0 * PI), 1e-12));
    }

    #[test]
    fn linewidth_monotone() {
        let s = sr();
        let w = |s: &PhysicalSystem, b: f64| quantum_limited_linewidth(s, b).unwrap().closed_form;
        assert!(w(&s, 3.0) > w(&s, 2.0));
        let longer = PhysicalSystem { coherence: Coherence::T2(2.0), finesse: s.finesse / 2.0, ..s.clone() };
        // same C0, longer T2
        assert!(close(
            derive_params(&longer).unwrap().single_atom_cooperativity,
            derive_params(&s).unwrap().single_atom_cooperativity,
            1e-12
        ));
        assert!(w(&longer, 2.0) < w(&s, 2.0));
    }

    #[test]
    fn pulling_below_millihertz() {
        let s = PhysicalSystem { atom_number: 135_000, ..sr() };
        let c = derive_params(&s).unwrap().cooperativity;
        assert!((c - 100.0).abs() < 1.0);
        let shift = line_pulling(&s, 2.0, 1e-4).unwrap();
        assert!(shift < 1e-3 && shift > 7e-4);
        assert_eq!(line_pulling(&s, 2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn collective_dipole_example() {
        // C = 100, gamma T2 = 2, N = 1e4
        let mut s = Catalog::builtin().get("Sr-87-radiative").unwrap().system().unwrap();
        let c0 = derive_params(&s).unwrap().single_atom_cooperativity;
        s.finesse *= 100.0 / (1e4 * c0);
        let dip = collective_dipole(&s, 2.0).unwrap();
        assert!(close(dip.closed_form, 1e4, 1e-9));
        // gap is (I_in / u) (u / (1 + u))^2 - 1, about 8 / (beta C)
        let (p, b) = operating_point(100.0, 2.0).unwrap();
        let u = b.intensity;
        let expect = p.drive / u * (u / (1.0 + u)).powi(2) - 1.0;
        let gap = dip.from_branch / dip.closed_form - 1.0;
        assert!((gap - expect).abs() < 1e-9, "gap {gap} vs {expect}");
        assert!(gap > 0.0 && gap < 10.0 / (2.0 * 100.0));
        s.finesse *= 10.0;
        let dip = collective_dipole(&s, 2.0).unwrap();
        let gap_1000 = dip.from_branch / dip.closed_form - 1.0;
        assert!(gap_1000 < 0.11 * gap, "gap at C = 1000: {gap_1000}");
    }

    #[test]
    fn beta_below_one_rejected() {
        assert!(signal_power(&sr(), 0.5).is_err());
    }

    #[test]
    fn table_formats() {
        let rows = table1(&Catalog::builtin()).unwrap();
        assert_eq!(rows.len(), 5);
        let mut buf = Vec::new();
        write_table1_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with(TABLE1_CSV_HEADER));
        let mut buf = Vec::new();
        write_table1_text(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
    }
}
