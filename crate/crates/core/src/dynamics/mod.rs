//! Time-domain semiclassical model and fixed-point stability.
//!
//! Time is scaled as `tau = t T2`. With `K = kappa T2`, `r = sqrt(gamma T2)`
//! and the per-atom dipole `s = <sigma_->`, the flow is
//!
//! ```text
//! dx/dtau = K [ y - (1 + i theta) x + (2 C / r) s ]
//! ds/dtau = -(1 + i delta) s + (r / 2) x z
//! dz/dtau = -r^2 (1 + z) - 2 r Re(x s*)
//! ```
//!
//! Its fixed points are `s = (r/2) x z / (1 + i delta)`, `z = -(1 + delta^2) / (1 + |x|^2 + delta^2)`,
//! which reproduces the steady-state equation for every `K` and `gamma T2`.
//! The state is handled as the real 5-vector `(Re x, Im x, Re s, Im s, z)`.

mod hysteresis;
mod integrator;

pub use hysteresis::*;
pub use integrator::*;

use nalgebra::{Matrix5, SMatrix, SVector, Vector5};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_non_negative, require_positive, Error, Result};
use crate::model::DimensionlessPoint;
use crate::steady_state::{BranchSet, Stability, SteadyStateBranch};

pub const DEFAULT_STIFFNESS: f64 = 1e3;
/// Radiatively limited: `T2 = 2 / gamma`.
pub const DEFAULT_GAMMA_T2: f64 = 2.0;
/// Width of the marginal band in units of `K`.
pub const MARGINAL_BAND: f64 = 1e-9;
/// Fixed-point acceptance, scaled by the flow magnitude `max(1, K sqrt(I_in))`.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub cooperativity: f64,
    /// `K = kappa T2`.
    pub stiffness: f64,
    pub drive: f64,
    pub delta: f64,
    pub theta: f64,
    /// `gamma T2`, in `(0, 2]`.
    pub gamma_t2: f64,
}

impl FlowParams {
    pub fn new(point: &DimensionlessPoint, stiffness: f64, gamma_t2: f64) -> Result<Self> {
        let fp = FlowParams {
            cooperativity: point.cooperativity,
            stiffness,
            drive: point.drive,
            delta: point.delta,
            theta: point.theta,
            gamma_t2,
        };
        fp.validate()?;
        Ok(fp)
    }

    pub fn point(&self) -> DimensionlessPoint {
        DimensionlessPoint::new(self.cooperativity, self.drive, self.delta, self.theta)
    }

    pub fn validate(&self) -> Result<()> {
        self.point().validate()?;
        require_positive("stiffness", self.stiffness)?;
        require_positive("gamma_t2", self.gamma_t2)?;
        if self.gamma_t2 > 2.0 * (1.0 + 1e-12) {
            return Err(Error::invalid("gamma_t2", format!("must be <= 2, got {}", self.gamma_t2)));
        }
        Ok(())
    }

    fn r(&self) -> f64 {
        self.gamma_t2.sqrt()
    }

    /// Natural magnitude of the flow, used to scale fixed-point tolerances.
    pub fn flow_scale(&self) -> f64 {
        (self.stiffness * self.drive.sqrt()).max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalState {
    pub field: Complex64,
    /// Per-atom `sigma_-`.
    pub dipole: Complex64,
    pub inversion: f64,
}

impl SemiclassicalState {
    /// Empty cavity, all atoms in the ground state.
    pub fn ground() -> Self {
        SemiclassicalState { field: Complex64::new(0.0, 0.0), dipole: Complex64::new(0.0, 0.0), inversion: -1.0 }
    }

    pub fn from_branch(branch: &SteadyStateBranch, gamma_t2: f64) -> Self {
        SemiclassicalState { field: branch.field, dipole: branch.sigma_minus(gamma_t2), inversion: branch.inversion }
    }

    pub fn from_vector(v: &Vector5<f64>) -> Self {
        SemiclassicalState { field: Complex64::new(v[0], v[1]), dipole: Complex64::new(v[2], v[3]), inversion: v[4] }
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.field.re, self.field.im, self.dipole.re, self.dipole.im, self.inversion)
    }

    pub fn intensity(&self) -> f64 {
        self.field.norm_sqr()
    }

    /// Excess over the Bloch bounds `|z| <= 1`, `|s| <= 1/2`; zero when valid.
    pub fn bloch_violation(&self) -> f64 {
        (self.inversion.abs() - 1.0).max(0.0).max(self.dipole.norm() - 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("field.re", self.field.re),
            ("field.im", self.field.im),
            ("dipole.re", self.dipole.re),
            ("dipole.im", self.dipole.im),
            ("inversion", self.inversion),
        ] {
            require_finite(name, v)?;
        }
        let excess = self.bloch_violation();
        if excess > 1e-6 {
            return Err(Error::invalid("state", format!("outside the Bloch ball by {excess:e}")));
        }
        Ok(())
    }
}

pub fn rhs(state: &SemiclassicalState, fp: &FlowParams) -> Vector5<f64> {
    rhs_vec(&state.to_vector(), fp)
}

pub(crate) fn rhs_vec(v: &Vector5<f64>, fp: &FlowParams) -> Vector5<f64> {
    let (xr, xi, sr, si, z) = (v[0], v[1], v[2], v[3], v[4]);
    let k = fp.stiffness;
    let r = fp.r();
    let y = fp.drive.sqrt();
    let g = 2.0 * fp.cooperativity / r;
    Vector5::new(
        k * (y - xr + fp.theta * xi + g * sr),
        k * (-xi - fp.theta * xr + g * si),
        -sr + fp.delta * si + 0.5 * r * xr * z,
        -si - fp.delta * sr + 0.5 * r * xi * z,
        -r * r * (1.0 + z) - 2.0 * r * (xr * sr + xi * si),
    )
}

/// Analytic Jacobian of the flow at an arbitrary state.
pub fn jacobian_at(v: &Vector5<f64>, fp: &FlowParams) -> Matrix5<f64> {
    let (xr, xi, sr, si, z) = (v[0], v[1], v[2], v[3], v[4]);
    let k = fp.stiffness;
    let r = fp.r();
    let kg = 2.0 * k * fp.cooperativity / r;
    let (th, de) = (fp.theta, fp.delta);
    #[rustfmt::skip]
    let j = Matrix5::new(
        -k,            k * th,        kg,            0.0,           0.0,
        -k * th,       -k,            0.0,           kg,            0.0,
        0.5 * r * z,   0.0,           -1.0,          de,            0.5 * r * xr,
        0.0,           0.5 * r * z,   -de,           -1.0,          0.5 * r * xi,
        -2.0 * r * sr, -2.0 * r * si, -2.0 * r * xr, -2.0 * r * xi, -r * r,
    );
    j
}

/// Jacobian at a fixed point; rejects states that do not satisfy the flow.
pub fn jacobian(state: &SemiclassicalState, fp: &FlowParams) -> Result<Matrix5<f64>> {
    let v = state.to_vector();
    let residual = rhs_vec(&v, fp).norm();
    let tolerance = FIXED_POINT_TOLERANCE * fp.flow_scale();
    if !(residual <= tolerance) {
        return Err(Error::NotFixedPoint { residual, tolerance });
    }
    Ok(jacobian_at(&v, fp))
}

/// Eigenvalues sorted by decreasing real part.
pub fn eigenvalues(j: &Matrix5<f64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = j.complex_eigenvalues().iter().map(|c| Complex64::new(c.re, c.im)).collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    ev
}

pub fn verdict(eigenvalues: &[Complex64], stiffness: f64) -> Stability {
    let band = MARGINAL_BAND * stiffness;
    let max_re = eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re < -band {
        Stability::Stable
    } else if max_re > band {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}

/// Attach eigenvalues and verdicts to every branch. Tangencies flagged by the
/// solver stay marginal.
pub fn classify_stability(set: &BranchSet, stiffness: f64, gamma_t2: f64) -> Result<BranchSet> {
    let fp = FlowParams::new(&set.point, stiffness, gamma_t2)?;
    let mut out = set.clone();
    for branch in &mut out.branches {
        let state = SemiclassicalState::from_branch(branch, gamma_t2);
        let ev = eigenvalues(&jacobian(&state, &fp)?);
        if branch.stability != Stability::Marginal {
            branch.stability = verdict(&ev, stiffness);
        }
        branch.eigenvalues = ev;
    }
    Ok(out)
}

/// Most unstable eigenvalue and a real unit direction of its eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadingMode {
    pub eigenvalue: Complex64,
    pub direction: Vector5<f64>,
}

pub fn leading_mode(j: &Matrix5<f64>) -> LeadingMode {
    let lambda = eigenvalues(j)[0];
    let scale = j.norm().max(1.0);
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let a: SMatrix<Complex64, 5, 5> =
        j.map(|e| Complex64::new(e, 0.0)) - SMatrix::<Complex64, 5, 5>::identity() * shift;
    let lu = a.lu();
    let mut v = SVector::<Complex64, 5>::from_element(Complex64::new(1.0, 0.3));
    for _ in 0..8 {
        if let Some(w) = lu.solve(&v) {
            let n = w.norm();
            if n > 0.0 && n.is_finite() {
                v = w / Complex64::new(n, 0.0);
            }
        }
    }
    // rotate so the real part carries as much of the vector as possible
    let (mut best, mut best_norm) = (Vector5::zeros(), -1.0);
    for k in 0..64 {
        let phase = Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 / 64.0);
        let re = (v * phase).map(|c| c.re);
        if re.norm() > best_norm {
            best_norm = re.norm();
            best = re;
        }
    }
    LeadingMode { eigenvalue: lambda, direction: best / best_norm }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum EscapeOutcome {
    /// Perturbation decayed; `distance` is the final state-space distance.
    Returned { distance: f64 },
    /// Trajectory left; `branch` is the index of the fixed point it settled near.
    Departed { intensity: f64, branch: Option<usize> },
    /// Neither clearly decayed nor departed within the horizon.
    Undecided { distance: f64 },
}

/// Time-domain stability oracle: kick branch `index` along its leading mode
/// by `kick` (relative to the state norm) and follow the flow.
pub fn escape_test(set: &BranchSet, index: usize, stiffness: f64, gamma_t2: f64, kick: f64) -> Result<EscapeOutcome> {
    require_positive("kick", kick)?;
    let fp = FlowParams::new(&set.point, stiffness, gamma_t2)?;
    let branch = set
        .branches
        .get(index)
        .ok_or_else(|| Error::invalid("index", format!("no branch {index} (have {})", set.len())))?;
    let origin = SemiclassicalState::from_branch(branch, gamma_t2).to_vector();
    let mode = leading_mode(&jacobian(&SemiclassicalState::from_vector(&origin), &fp)?);
    let amplitude = kick * origin.norm().max(1.0);
    let start = origin + mode.direction * amplitude;

    let rate = mode.eigenvalue.re.abs().max(1e-6);
    let tau_end = (40.0 / rate).clamp(50.0, 1e5);
    let opts = IntegratorOptions { tol: 1e-9, store_steps: false, ..IntegratorOptions::default() };
    let traj = integrate_with(&SemiclassicalState::from_vector(&start), &fp, tau_end, &opts)?;
    let end = traj.final_vector();
    let distance = (end - origin).norm();
    if distance < 0.1 * amplitude {
        return Ok(EscapeOutcome::Returned { distance });
    }
    if distance > 10.0 * amplitude {
        let u = end[0] * end[0] + end[1] * end[1];
        let branch = set
            .branches
            .iter()
            .enumerate()
            .map(|(i, b)| (i, (b.intensity - u).abs() / b.intensity.max(1e-12)))
            .filter(|&(_, rel)| rel < 1e-3)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        return Ok(EscapeOutcome::Departed { intensity: u, branch });
    }
    Ok(EscapeOutcome::Undecided { distance })
}

pub(crate) fn check_tolerance(tol: f64) -> Result<()> {
    require_non_negative("tol", tol)?;
    if !(1e-12..=1e-3).contains(&tol) {
        return Err(Error::invalid("tol", format!("must lie in [1e-12, 1e-3], got {tol:e}")));
    }
    Ok(())
}
