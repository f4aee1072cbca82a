//! Adaptive Rosenbrock integration (Shampine's L-stable order-2(3) pair).

use std::io::Write;

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use super::{check_tolerance, jacobian_at, rhs_vec, FlowParams, SemiclassicalState};
use crate::error::{require_non_negative, Error, Result};
use crate::fmt::num;

const D: f64 = 0.292_893_218_813_452_5; // 1 / (2 + sqrt 2)
const E32: f64 = 7.414_213_562_373_095; // 6 + sqrt 2

pub const TRAJECTORY_CSV_HEADER: &str = "tau,re_x,im_x,re_s,im_s,z";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Mixed absolute/relative local error target.
    pub tol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
    pub max_step: f64,
    /// Keep every accepted step (needed for dense output) or only the end points.
    pub store_steps: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            tol: 1e-8,
            max_steps: 5_000_000,
            initial_step: None,
            max_step: f64::INFINITY,
            store_steps: true,
        }
    }
}

/// Accepted steps with the stage slopes used for interpolation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub tau: Vec<f64>,
    pub states: Vec<Vector5<f64>>,
    k1: Vec<Vector5<f64>>,
    k2: Vec<Vector5<f64>>,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn final_vector(&self) -> Vector5<f64> {
        *self.states.last().expect("trajectory has a start point")
    }

    pub fn final_state(&self) -> SemiclassicalState {
        SemiclassicalState::from_vector(&self.final_vector())
    }

    pub fn end_tau(&self) -> f64 {
        *self.tau.last().expect("trajectory has a start point")
    }

    /// Dense output at any `tau` inside the integrated range.
    pub fn sample(&self, tau: f64) -> Option<Vector5<f64>> {
        let (t0, t1) = (self.tau[0], self.end_tau());
        if !(tau >= t0 && tau <= t1) {
            return None;
        }
        let i = match self.tau.partition_point(|&t| t <= tau) {
            0 => 0,
            n if n >= self.tau.len() => return Some(self.final_vector()),
            n => n - 1,
        };
        let h = self.tau[i + 1] - self.tau[i];
        if self.k1.len() < self.tau.len() - 1 || h <= 0.0 {
            return Some(self.states[i]);
        }
        let s = (tau - self.tau[i]) / h;
        let a = s * (1.0 - s) / (1.0 - 2.0 * D);
        let b = s * (s - 2.0 * D) / (1.0 - 2.0 * D);
        Some(self.states[i] + (self.k1[i] * a + self.k2[i] * b) * h)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for (t, v) in self.tau.iter().zip(&self.states) {
            writeln!(w, "{},{},{},{},{},{}", num(*t), num(v[0]), num(v[1]), num(v[2]), num(v[3]), num(v[4]))?;
        }
        Ok(())
    }

    /// Resample on a uniform grid of `n` points using dense output.
    pub fn resample(&self, n: usize) -> Trajectory {
        let (t0, t1) = (self.tau[0], self.end_tau());
        let n = n.max(2);
        let tau: Vec<f64> = (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect();
        let states = tau.iter().map(|&t| self.sample(t).unwrap_or_else(|| self.final_vector())).collect();
        Trajectory { tau, states, k1: Vec::new(), k2: Vec::new(), rejected_steps: self.rejected_steps }
    }
}

pub fn integrate(state0: &SemiclassicalState, fp: &FlowParams, tau_end: f64, tol: f64) -> Result<Trajectory> {
    integrate_with(state0, fp, tau_end, &IntegratorOptions { tol, ..IntegratorOptions::default() })
}

pub fn integrate_with(
    state0: &SemiclassicalState,
    fp: &FlowParams,
    tau_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    fp.validate()?;
    state0.validate()?;
    check_tolerance(opts.tol)?;
    require_non_negative("tau_end", tau_end)?;

    let mut y = state0.to_vector();
    let mut t = 0.0;
    let mut traj = Trajectory { tau: vec![0.0], states: vec![y], k1: Vec::new(), k2: Vec::new(), rejected_steps: 0 };
    if tau_end == 0.0 {
        return Ok(traj);
    }

    let tol = opts.tol;
    let mut f0 = rhs_vec(&y, fp);
    let mut h = opts.initial_step.unwrap_or_else(|| {
        let sc = y.abs().add_scalar(1.0) * tol;
        let rate = f0.component_div(&sc).amax().max(1e-300);
        (tol.cbrt() / rate.max(1.0 / tau_end)).min(tau_end) * 0.1
    });
    h = h.min(opts.max_step).max(1e-14 * tau_end);

    let mut steps = 0usize;
    while t < tau_end {
        if steps >= opts.max_steps {
            return Err(Error::TooManySteps { max_steps: opts.max_steps, tau: t, tau_end });
        }
        let min_h = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < min_h {
            return Err(Error::StepSizeUnderflow { tau: t, step: h });
        }
        let last_step = t + h >= tau_end;
        if last_step {
            h = tau_end - t;
        }

        let j = jacobian_at(&y, fp);
        let w = Matrix5::identity() - j * (h * D);
        let lu = w.lu();
        let solve = |b: Vector5<f64>| lu.solve(&b);
        let Some(k1) = solve(f0) else {
            h *= 0.25;
            traj.rejected_steps += 1;
            continue;
        };
        let f1 = rhs_vec(&(y + k1 * (0.5 * h)), fp);
        let Some(k2) = solve(f1 - k1).map(|v| v + k1) else {
            h *= 0.25;
            traj.rejected_steps += 1;
            continue;
        };
        let y_new = y + k2 * h;
        let f2 = rhs_vec(&y_new, fp);
        let Some(k3) = solve(f2 - (k2 - f1) * E32 - (k1 - f0) * 2.0) else {
            h *= 0.25;
            traj.rejected_steps += 1;
            continue;
        };
        let err = (k1 - k2 * 2.0 + k3) * (h / 6.0);
        let mut ratio: f64 = 0.0;
        for i in 0..5 {
            let sc = tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            ratio = ratio.max(err[i].abs() / sc);
        }
        if !ratio.is_finite() {
            h *= 0.25;
            traj.rejected_steps += 1;
            continue;
        }
        steps += 1;

        if ratio <= 1.0 {
            let t_new = if last_step { tau_end } else { t + h };
            if opts.store_steps {
                traj.tau.push(t_new);
                traj.states.push(y_new);
                traj.k1.push(k1);
                traj.k2.push(k2);
            }
            t = t_new;
            y = y_new;
            f0 = f2;
            if last_step {
                break;
            }
        } else {
            traj.rejected_steps += 1;
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.8 * ratio.powf(-1.0 / 3.0)).clamp(0.2, 5.0) };
        h = (h * factor).min(opts.max_step);
    }

    if !opts.store_steps {
        traj.tau.push(t);
        traj.states.push(y);
    }
    Ok(traj)
}
