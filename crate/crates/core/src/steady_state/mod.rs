//! Driven steady states of the optical-bistability equation
//!
//! ```text
//! y = x (1 + C (1 - i delta) / (1 + |x|^2 + delta^2) + i theta),   |y|^2 = I_in
//! ```
//!
//! Writing `u = |x|^2` and `s = 1 + u + delta^2`, every steady state is a
//! non-negative real root of the cubic
//! `I_in s^2 = u [(s + C)^2 + (theta s - C delta)^2]`.

mod scan;

pub use scan::*;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DimensionlessPoint;

/// Imaginary-part filter for companion eigenvalues, relative to `1 + |re|`.
const REAL_ROOT_FILTER: f64 = 1e-8;
/// Relative separation below which two roots are treated as one tangency.
pub const TANGENCY_TOLERANCE: f64 = 1e-6;
/// Eigenvalues closer than this (relative) are examined together.
const CLUSTER_RADIUS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Unclassified,
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Unclassified => "unclassified",
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
    }
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One self-consistent steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateBranch {
    /// `u = |x|^2`, the intracavity intensity in units of `n0`.
    pub intensity: f64,
    /// Scaled field `x = <a> / sqrt(n0)`, phase referenced to a real drive `y`.
    pub field: Complex64,
    /// Inversion `sigma_z = -1 / (1 + u / (1 + delta^2))`.
    pub inversion: f64,
    /// Reduced dipole `x sigma_z / (1 + i delta)`; the per-atom
    /// `sigma_-` is this times `sqrt(gamma T2) / 2`.
    pub dipole: Complex64,
    pub stability: Stability,
    /// Jacobian eigenvalues, filled by [`crate::dynamics::classify_stability`].
    pub eigenvalues: Vec<Complex64>,
}

impl SteadyStateBranch {
    /// Per-atom `sigma_-` for a given `gamma T2`.
    pub fn sigma_minus(&self, gamma_t2: f64) -> Complex64 {
        self.dipole * (0.5 * gamma_t2.sqrt())
    }

    fn at(point: &DimensionlessPoint, u: f64, stability: Stability) -> Self {
        let y = Complex64::new(point.drive.sqrt(), 0.0);
        let field = y / linear_response(point, u);
        let q = 1.0 + point.delta * point.delta;
        let inversion = -q / (q + u);
        let dipole = field * inversion / Complex64::new(1.0, point.delta);
        SteadyStateBranch { intensity: u, field, inversion, dipole, stability, eigenvalues: Vec::new() }
    }
}

/// All steady states at one point, ascending in intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSet {
    pub point: DimensionlessPoint,
    pub branches: Vec<SteadyStateBranch>,
}

impl BranchSet {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Largest-intensity branch.
    pub fn top(&self) -> &SteadyStateBranch {
        self.branches.last().expect("branch set is never empty")
    }

    pub fn bottom(&self) -> &SteadyStateBranch {
        &self.branches[0]
    }
}

/// `D(u) = 1 + C (1 - i delta) / s + i theta`, so that `y = x D`.
pub fn linear_response(point: &DimensionlessPoint, u: f64) -> Complex64 {
    let s = 1.0 + u + point.delta * point.delta;
    Complex64::new(1.0 + point.cooperativity / s, point.theta - point.cooperativity * point.delta / s)
}

/// `u |D(u)|^2 - I_in`; zero exactly on a steady state.
pub fn bistability_residual(point: &DimensionlessPoint, u: f64) -> f64 {
    u * linear_response(point, u).norm_sqr() - point.drive
}

/// Accepted magnitude of [`bistability_residual`] at a returned root.
pub fn residual_tolerance(point: &DimensionlessPoint) -> f64 {
    1e-9 * point.drive.max(1.0)
}

fn residual_derivative(point: &DimensionlessPoint, u: f64) -> f64 {
    let c = point.cooperativity;
    let d = point.delta;
    let s = 1.0 + u + d * d;
    let re = 1.0 + c / s;
    let im = point.theta - c * d / s;
    re * re + im * im - 2.0 * u * c * (re - im * d) / (s * s)
}

/// Coefficients `[c3, c2, c1, c0]` of the steady-state cubic in `u`.
pub fn cubic_coefficients(point: &DimensionlessPoint) -> [f64; 4] {
    let (c, i, d, t) = (point.cooperativity, point.drive, point.delta, point.theta);
    let q = 1.0 + d * d;
    let a = q + c;
    let b = t * q - c * d;
    [1.0 + t * t, 2.0 * (a + t * b) - i, a * a + b * b - 2.0 * q * i, -i * q * q]
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    u: f64,
    /// Value before polishing.
    raw: f64,
    marginal: bool,
}

/// Solves for every steady state at `point`.
pub fn solve_branches(point: &DimensionlessPoint) -> Result<BranchSet> {
    point.validate()?;
    if point.drive == 0.0 {
        return Ok(BranchSet {
            point: *point,
            branches: vec![SteadyStateBranch::at(point, 0.0, Stability::Unclassified)],
        });
    }

    let candidates = cubic_candidates(point);
    let tol = residual_tolerance(point);
    let mut roots: Vec<Candidate> = Vec::with_capacity(3);
    for cand in candidates {
        let u = if cand.marginal { cand.u } else { polish(point, cand.u) };
        if !(u >= 0.0 && u <= point.drive * (1.0 + 1e-12)) {
            continue;
        }
        if bistability_residual(point, u).abs() <= tol {
            roots.push(Candidate { u, raw: cand.raw, marginal: cand.marginal });
        }
    }
    roots.sort_by(|a, b| a.u.total_cmp(&b.u));

    // Polished roots that coincide collapse into one. They form a tangency only
    // if the unpolished candidates were already clustered; otherwise Newton
    // simply carried a non-physical root onto a physical one.
    let mut merged: Vec<Candidate> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last_mut() {
            Some(prev) if (r.u - prev.u).abs() <= TANGENCY_TOLERANCE * r.u.abs().max(prev.u.abs()) => {
                let near = |a: f64, b: f64| (a - b).abs() <= CLUSTER_RADIUS * a.abs().max(b.abs());
                let tangency = near(r.raw, prev.raw) && near(r.raw, r.u) && near(prev.raw, prev.u);
                if tangency || r.marginal {
                    if !prev.marginal {
                        prev.u = if r.marginal { r.u } else { 0.5 * (prev.u + r.u) };
                    }
                    prev.marginal = true;
                }
            }
            _ => merged.push(r),
        }
    }

    if merged.is_empty() {
        // g(0) = -I < 0 <= g(I): a root always exists; fall back to bracketing.
        let u = bisect_residual(point, 0.0, point.drive)?;
        merged.push(Candidate { u, raw: u, marginal: false });
    }

    let mut branches: Vec<SteadyStateBranch> = merged
        .iter()
        .map(|c| {
            let stability = if c.marginal { Stability::Marginal } else { Stability::Unclassified };
            SteadyStateBranch::at(point, c.u, stability)
        })
        .collect();
    branches.sort_by(|a, b| a.intensity.total_cmp(&b.intensity).then(a.inversion.total_cmp(&b.inversion)));
    Ok(BranchSet { point: *point, branches })
}

/// Real-root candidates from the companion-matrix eigenvalues of the cubic.
fn cubic_candidates(point: &DimensionlessPoint) -> Vec<Candidate> {
    let [c3, c2, c1, c0] = cubic_coefficients(point);
    let (m2, m1, m0) = (c2 / c3, c1 / c3, c0 / c3);
    // Fujiwara-type scale so that the scaled roots are O(1).
    let scale = m2.abs().max(m1.abs().sqrt()).max(m0.abs().cbrt()).max(f64::MIN_POSITIVE);
    let (a2, a1, a0) = (m2 / scale, m1 / (scale * scale), m0 / (scale * scale * scale));
    #[rustfmt::skip]
    let companion = Matrix3::new(
        0.0, 0.0, -a0,
        1.0, 0.0, -a1,
        0.0, 1.0, -a2,
    );
    let mut eig: Vec<Complex64> = companion.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let close = |a: Complex64, b: Complex64| (a - b).norm() <= CLUSTER_RADIUS * a.norm().max(b.norm());
    let is_real = |z: Complex64| z.im.abs() < REAL_ROOT_FILTER * (1.0 + z.re.abs());

    let mut out = Vec::with_capacity(3);
    if close(eig[0], eig[1]) && close(eig[1], eig[2]) {
        // Triple root (cusp): the trace gives the centroid to full precision.
        let u = -a2 / 3.0 * scale;
        out.push(Candidate { u, raw: u, marginal: true });
        return out;
    }
    let mut used = [false; 3];
    for i in 0..3 {
        for j in (i + 1)..3 {
            if used[i] || used[j] || !close(eig[i], eig[j]) {
                continue;
            }
            let pair_is_real = is_real(eig[i]) && is_real(eig[j]);
            if pair_is_real {
                continue;
            }
            used[i] = true;
            used[j] = true;
            // Near-double root returned as a conjugate pair: keep its centroid
            // when the pair is a tangency within tolerance.
            let k = 3 - i - j;
            let centroid = -a2 - eig[k].re;
            let half_gap = eig[i].im.abs().max(eig[j].im.abs());
            if half_gap <= TANGENCY_TOLERANCE * 0.5 * centroid.abs() {
                let u = 0.5 * centroid * scale;
                out.push(Candidate { u, raw: u, marginal: true });
            }
        }
    }
    for (k, z) in eig.iter().enumerate() {
        if !used[k] && is_real(*z) {
            out.push(Candidate { u: z.re * scale, raw: z.re * scale, marginal: false });
        }
    }
    out
}

/// Newton refinement of a root of the residual, clamped to `[0, I_in]`.
fn polish(point: &DimensionlessPoint, u0: f64) -> f64 {
    let hi = point.drive;
    let mut u = u0.clamp(0.0, hi);
    let mut best = (bistability_residual(point, u).abs(), u);
    for _ in 0..80 {
        let g = bistability_residual(point, u);
        let dg = residual_derivative(point, u);
        if g == 0.0 || dg == 0.0 || !dg.is_finite() {
            break;
        }
        let next = (u - g / dg).clamp(0.0, hi);
        let step = (next - u).abs();
        u = next;
        let r = bistability_residual(point, u).abs();
        if r < best.0 {
            best = (r, u);
        }
        if step <= 4.0 * f64::EPSILON * u.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    best.1
}

fn bisect_residual(point: &DimensionlessPoint, mut lo: f64, mut hi: f64) -> Result<f64> {
    let glo = bistability_residual(point, lo);
    let ghi = bistability_residual(point, hi);
    if glo.signum() == ghi.signum() && glo != 0.0 && ghi != 0.0 {
        return Err(Error::NoRoot(format!("residual does not change sign on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if bistability_residual(point, mid).signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// On-resonance drive needed for intracavity intensity `u`:
/// `I_in(u) = u (1 + C / (1 + u))^2`.
pub fn resonant_drive(cooperativity: f64, u: f64) -> f64 {
    let f = 1.0 + cooperativity / (1.0 + u);
    u * f * f
}

/// A fold (saddle-node) of the on-resonance response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldPoint {
    pub intensity: f64,
    pub drive: f64,
}

/// Folds of the `delta = theta = 0` response: roots of
/// `u^2 + (2 - C) u + (1 + C) = 0`. Two for `C > 8`, the single tangency
/// `u = 3` at `C = 8`, none below.
pub fn fold_points(cooperativity: f64) -> Vec<FoldPoint> {
    let c = cooperativity;
    if !(c.is_finite() && c >= 0.0) {
        return Vec::new();
    }
    let disc = c * (c - 8.0);
    if disc < 0.0 {
        return Vec::new();
    }
    let big = 0.5 * ((c - 2.0) + disc.sqrt());
    if big <= 0.0 {
        return Vec::new();
    }
    let small = (1.0 + c) / big;
    let mut us = vec![small, big];
    if disc == 0.0 {
        us.truncate(1);
    }
    us.into_iter().map(|u| FoldPoint { intensity: u, drive: resonant_drive(c, u) }).collect()
}

/// Drive window of on-resonance bistability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Fold on the high-intensity side; the lower drive threshold.
    pub lower: FoldPoint,
    /// Fold on the low-intensity side; the upper drive threshold.
    pub upper: FoldPoint,
    /// Large-C asymptote `4 C` of the lower threshold.
    pub asymptotic_lower: f64,
    /// Large-C asymptote `C^2 / 4` of the upper threshold.
    pub asymptotic_upper: f64,
}

/// Exact on-resonance bistability thresholds, or `None` for `C <= 8`.
pub fn bistability_thresholds(cooperativity: f64) -> Option<Thresholds> {
    if !(cooperativity > 8.0) {
        return None;
    }
    let folds = fold_points(cooperativity);
    let [a, b] = folds.as_slice() else { return None };
    let (lower, upper) = if a.drive < b.drive { (*a, *b) } else { (*b, *a) };
    if !(lower.drive < upper.drive) {
        return None;
    }
    Some(Thresholds {
        lower,
        upper,
        asymptotic_lower: 4.0 * cooperativity,
        asymptotic_upper: cooperativity * cooperativity / 4.0,
    })
}

/// Phase of the transmitted field relative to the drive, `Arg[x / y]`.
pub fn transmitted_phase(point: &DimensionlessPoint, branch: &SteadyStateBranch) -> f64 {
    -linear_response(point, branch.intensity).arg()
}

/// Exact on-resonance slope `d(phase)/d(delta) = C sigma_z / (C sigma_z - 1)`
/// (in units of `T2`) on a branch of intensity `u`.
pub fn resonant_phase_slope(cooperativity: f64, u: f64) -> f64 {
    let cs = -cooperativity / (1.0 + u);
    cs / (cs - 1.0)
}

/// Atomic detuning at which the transmitted phase of the saturated branch
/// vanishes for a given cavity offset `theta`. This is the lock point.
pub fn phase_zero_crossing(cooperativity: f64, drive: f64, theta: f64) -> Result<f64> {
    if theta == 0.0 {
        return Ok(0.0);
    }
    let phase = |delta: f64| -> Result<f64> {
        let p = DimensionlessPoint::new(cooperativity, drive, delta, theta);
        let set = solve_branches(&p)?;
        Ok(transmitted_phase(&p, set.top()))
    };
    let sign = theta.signum();
    let guess = (theta * (1.0 + drive) / cooperativity.max(f64::MIN_POSITIVE)).abs();
    let mut lo = 0.0;
    let mut hi = guess.max(1e-300) * 2.0;
    let mut expansions = 0;
    while phase(sign * hi)? * sign < 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NoRoot("transmitted phase has no zero crossing".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if phase(sign * mid)? * sign < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(sign * 0.5 * (lo + hi))
}
