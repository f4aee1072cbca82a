use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_branches, BranchSet, SteadyStateBranch};
use crate::error::{require_non_negative, Error, Result};
use crate::fmt::num;
use crate::model::DimensionlessPoint;

/// Drive axis of the intensity-vs-drive figure: log-spaced `1 ..= 1e5`.
pub const DEFAULT_DRIVE_GRID: (f64, f64, usize) = (1.0, 1e5, 400);
/// Detuning axis of the spectra: linear `-300 ..= 300`.
pub const DEFAULT_DELTA_GRID: (f64, f64, usize) = (-300.0, 300.0, 1201);
/// Cavity-offset axis of the surface.
pub const DEFAULT_THETA_GRID: (f64, f64, usize) = (-5.0, 5.0, 301);
/// Points per axis of the surface.
pub const DEFAULT_SURFACE_POINTS: usize = 301;

pub fn linear_grid(start: f64, stop: f64, n: usize) -> Result<Vec<f64>> {
    check_axis(start, stop, n)?;
    if n == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (n - 1) as f64;
    Ok((0..n).map(|k| if k == n - 1 { stop } else { start + step * k as f64 }).collect())
}

pub fn log_grid(start: f64, stop: f64, n: usize) -> Result<Vec<f64>> {
    check_axis(start, stop, n)?;
    if !(start > 0.0 && stop > 0.0) {
        return Err(Error::InvalidGrid { name: "log grid", reason: "bounds must be positive".into() });
    }
    if n == 1 {
        return Ok(vec![start]);
    }
    let (a, b) = (start.ln(), stop.ln());
    let step = (b - a) / (n - 1) as f64;
    Ok((0..n)
        .map(|k| match k {
            0 => start,
            k if k == n - 1 => stop,
            k => (a + step * k as f64).exp(),
        })
        .collect())
}

fn check_axis(start: f64, stop: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidGrid { name: "grid", reason: "needs at least one point".into() });
    }
    if !(start.is_finite() && stop.is_finite()) {
        return Err(Error::InvalidGrid { name: "grid", reason: "bounds must be finite".into() });
    }
    if n > 1 && start == stop {
        return Err(Error::InvalidGrid { name: "grid", reason: "empty range".into() });
    }
    Ok(())
}

/// Non-empty, finite and strictly monotone.
pub fn validate_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid { name, reason: "empty".into() });
    }
    if let Some(bad) = grid.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid { name, reason: format!("non-finite value {bad}") });
    }
    let up = grid.windows(2).all(|w| w[1] > w[0]);
    let down = grid.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::InvalidGrid { name, reason: "not strictly monotone".into() });
    }
    Ok(())
}

/// Intensity versus in-coupled drive.
pub fn scan_drive(cooperativity: f64, delta: f64, theta: f64, drives: &[f64]) -> Result<Vec<BranchSet>> {
    validate_grid("drive", drives)?;
    require_non_negative("C", cooperativity)?;
    drives.par_iter().map(|&i| solve_branches(&DimensionlessPoint::new(cooperativity, i, delta, theta))).collect()
}

/// Intensity versus atomic detuning at fixed drive and cavity offset.
pub fn scan_spectrum(cooperativity: f64, drive: f64, theta: f64, deltas: &[f64]) -> Result<Vec<BranchSet>> {
    validate_grid("delta", deltas)?;
    require_non_negative("C", cooperativity)?;
    require_non_negative("I_in", drive)?;
    deltas.par_iter().map(|&d| solve_branches(&DimensionlessPoint::new(cooperativity, drive, d, theta))).collect()
}

/// Largest-intensity steady state on a `delta x theta` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub cooperativity: f64,
    pub drive: f64,
    pub deltas: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Row-major: `cells[row * deltas.len() + col]` is at
    /// `(deltas[col], thetas[row])`.
    pub cells: Vec<SteadyStateBranch>,
}

impl Surface {
    pub fn cell(&self, delta_index: usize, theta_index: usize) -> &SteadyStateBranch {
        &self.cells[theta_index * self.deltas.len() + delta_index]
    }

    pub fn row(&self, theta_index: usize) -> &[SteadyStateBranch] {
        let n = self.deltas.len();
        &self.cells[theta_index * n..(theta_index + 1) * n]
    }
}

pub fn scan_surface(cooperativity: f64, drive: f64, deltas: &[f64], thetas: &[f64]) -> Result<Surface> {
    validate_grid("delta", deltas)?;
    validate_grid("theta", thetas)?;
    require_non_negative("C", cooperativity)?;
    require_non_negative("I_in", drive)?;
    let cells = thetas
        .par_iter()
        .flat_map_iter(|&t| deltas.iter().map(move |&d| (d, t)))
        .map(|(d, t)| {
            let set = solve_branches(&DimensionlessPoint::new(cooperativity, drive, d, t))?;
            Ok(set.top().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Surface { cooperativity, drive, deltas: deltas.to_vec(), thetas: thetas.to_vec(), cells })
}

/// Weak-drive resonance locus at one atomic detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalModePoint {
    pub delta: f64,
    /// Cavity offset minimizing `|1 + C / (1 + i delta) + i theta|`:
    /// `C delta / (1 + delta^2)`.
    pub theta: f64,
    /// Lossless normal-mode hyperbola `theta = C / delta`, which the locus
    /// approaches for `|delta| >> 1`; infinite at `delta = 0`.
    pub theta_lossless: f64,
}

pub fn normal_mode_overlay(cooperativity: f64, deltas: &[f64]) -> Result<Vec<NormalModePoint>> {
    validate_grid("delta", deltas)?;
    require_non_negative("C", cooperativity)?;
    Ok(deltas
        .iter()
        .map(|&d| NormalModePoint {
            delta: d,
            theta: cooperativity * d / (1.0 + d * d),
            theta_lossless: if d == 0.0 { f64::INFINITY } else { cooperativity / d },
        })
        .collect())
}

/// Weak-drive resonances along a laser scan with the atom held on the cavity
/// resonance (`delta = K theta`, `K = kappa T2`): the two normal modes,
/// split by the scaled vacuum Rabi splitting `~ 2 sqrt(C / K)` in units of
/// `kappa`. Empty when the response has a single maximum at `theta = 0`.
pub fn vacuum_rabi_resonances(cooperativity: f64, stiffness: f64) -> Result<Vec<f64>> {
    require_non_negative("C", cooperativity)?;
    if !(stiffness > 0.0 && stiffness.is_finite()) {
        return Err(Error::invalid("K", "must be finite and > 0"));
    }
    let c = cooperativity;
    let k = stiffness;
    // |D|^2 along the line, with delta = K theta.
    let modulus = |t: f64| {
        let num = (1.0 + c - k * t * t).powi(2) + (t * (1.0 + k)).powi(2);
        num / (1.0 + k * k * t * t)
    };
    let guess = ((1.0 + c) / k).sqrt();
    let (mut a, mut b) = (0.0, 4.0 * guess + 1.0);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..300 {
        let x1 = b - ratio * (b - a);
        let x2 = a + ratio * (b - a);
        if modulus(x1) < modulus(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let t = 0.5 * (a + b);
    if t <= 1e-9 * guess || modulus(t) >= modulus(0.0) {
        return Ok(Vec::new());
    }
    Ok(vec![-t, t])
}

pub const BRANCH_CSV_HEADER: &str = "C,I_in,delta,theta,branch_index,u,re_x,im_x,sigma_z,stability";

/// One CSV line per (grid point, branch).
pub fn write_branch_csv<W: Write>(out: &mut W, sets: &[BranchSet]) -> Result<()> {
    writeln!(out, "{BRANCH_CSV_HEADER}")?;
    for set in sets {
        let p = &set.point;
        for (k, b) in set.branches.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                num(p.cooperativity),
                num(p.drive),
                num(p.delta),
                num(p.theta),
                k,
                num(b.intensity),
                num(b.field.re),
                num(b.field.im),
                num(b.inversion),
                b.stability
            )?;
        }
    }
    Ok(())
}

pub fn write_surface_csv<W: Write>(out: &mut W, surface: &Surface) -> Result<()> {
    writeln!(out, "{BRANCH_CSV_HEADER}")?;
    for (row, &t) in surface.thetas.iter().enumerate() {
        for (col, &d) in surface.deltas.iter().enumerate() {
            let b = surface.cell(col, row);
            writeln!(
                out,
                "{},{},{},{},0,{},{},{},{},{}",
                num(surface.cooperativity),
                num(surface.drive),
                num(d),
                num(t),
                num(b.intensity),
                num(b.field.re),
                num(b.field.im),
                num(b.inversion),
                b.stability
            )?;
        }
    }
    Ok(())
}

/// Dense JSON form of a surface: one matrix per quantity, rows indexed by theta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    #[serde(rename = "C")]
    pub cooperativity: f64,
    #[serde(rename = "I_in")]
    pub drive: f64,
    pub delta: Vec<f64>,
    pub theta: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub re_x: Vec<Vec<f64>>,
    pub im_x: Vec<Vec<f64>>,
    pub sigma_z: Vec<Vec<f64>>,
}

impl From<&Surface> for SurfaceGrid {
    fn from(s: &Surface) -> Self {
        let rows = |f: &dyn Fn(&SteadyStateBranch) -> f64| -> Vec<Vec<f64>> {
            (0..s.thetas.len()).map(|r| s.row(r).iter().map(f).collect()).collect()
        };
        SurfaceGrid {
            cooperativity: s.cooperativity,
            drive: s.drive,
            delta: s.deltas.clone(),
            theta: s.thetas.clone(),
            u: rows(&|b| b.intensity),
            re_x: rows(&|b| b.field.re),
            im_x: rows(&|b| b.field.im),
            sigma_z: rows(&|b| b.inversion),
        }
    }
}

/// Scan value in a CSV-friendly flat record, shared by the JSON outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    #[serde(rename = "C")]
    pub cooperativity: f64,
    #[serde(rename = "I_in")]
    pub drive: f64,
    pub delta: f64,
    pub theta: f64,
    pub branch_index: usize,
    pub u: f64,
    pub re_x: f64,
    pub im_x: f64,
    pub sigma_z: f64,
    pub stability: super::Stability,
}

pub fn branch_records(sets: &[BranchSet]) -> Vec<BranchRecord> {
    sets.iter()
        .flat_map(|set| {
            set.branches.iter().enumerate().map(move |(k, b)| BranchRecord {
                cooperativity: set.point.cooperativity,
                drive: set.point.drive,
                delta: set.point.delta,
                theta: set.point.theta,
                branch_index: k,
                u: b.intensity,
                re_x: b.field.re,
                im_x: b.field.im,
                sigma_z: b.inversion,
                stability: b.stability,
            })
        })
        .collect()
}
