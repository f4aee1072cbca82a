//! Quasi-static drive ramps.
//!
//! The drive is stepped along a log grid, up then down, and the flow is
//! followed for a fixed dwell at each value, carrying the state over.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{check_tolerance, integrate_with, FlowParams, IntegratorOptions, SemiclassicalState};
use super::{DEFAULT_GAMMA_T2, DEFAULT_STIFFNESS};
use crate::error::{require_finite, require_positive, Error, Result};
use crate::fmt::num;
use crate::model::DimensionlessPoint;
use crate::steady_state::{bistability_thresholds, log_grid};

pub const HYSTERESIS_CSV_HEADER: &str = "I_in,u,direction";
/// Intensity ratio between consecutive ramp points that counts as a jump.
pub const JUMP_RATIO: f64 = 2.0;
/// Dwell (in units of `1 / gamma`) below which the ramp is not quasi-static.
pub const QUASI_STATIC_DWELL: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisConfig {
    pub cooperativity: f64,
    pub delta: f64,
    pub theta: f64,
    pub stiffness: f64,
    pub gamma_t2: f64,
    pub drive_min: f64,
    pub drive_max: f64,
    /// Ramp points per direction.
    pub points: usize,
    /// Scaled time spent at each drive value.
    pub dwell: f64,
    pub tol: f64,
}

impl HysteresisConfig {
    /// Default ramp spanning the bistable window (or a comparable range when there is none).
    pub fn for_cooperativity(cooperativity: f64) -> Self {
        let (lo, hi) = match bistability_thresholds(cooperativity) {
            Some(t) => (0.5 * t.lower.drive, 2.0 * t.upper.drive),
            None => (0.1, 100.0 * cooperativity.max(1.0)),
        };
        HysteresisConfig {
            cooperativity,
            delta: 0.0,
            theta: 0.0,
            stiffness: DEFAULT_STIFFNESS,
            gamma_t2: DEFAULT_GAMMA_T2,
            drive_min: lo,
            drive_max: hi,
            points: 241,
            dwell: 40.0,
            tol: 1e-7,
        }
    }

    /// Log-decades of drive per unit scaled time.
    pub fn ramp_rate(&self) -> f64 {
        (self.drive_max / self.drive_min).log10() / (self.dwell * (self.points - 1) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("drive_min", self.drive_min)?;
        require_positive("drive_max", self.drive_max)?;
        require_positive("dwell", self.dwell)?;
        require_finite("delta", self.delta)?;
        require_finite("theta", self.theta)?;
        check_tolerance(self.tol)?;
        if self.drive_max <= self.drive_min {
            return Err(Error::invalid("drive_max", "must exceed drive_min"));
        }
        if self.points < 3 {
            return Err(Error::invalid("points", "need at least 3 ramp points"));
        }
        Ok(())
    }

    /// Problems with the quasi-static interpretation; empty when the ramp is slow enough.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let relax = self.dwell * self.gamma_t2.min(1.0);
        if relax < QUASI_STATIC_DWELL {
            out.push(format!(
                "dwell of {} T2 is only {:.3} relaxation times; the ramp is not quasi-static (want >= {QUASI_STATIC_DWELL})",
                self.dwell, relax
            ));
        }
        let step = (self.drive_max / self.drive_min).powf(1.0 / (self.points - 1) as f64) - 1.0;
        if step > 0.02 {
            out.push(format!("drive step of {:.1}% limits jump location accuracy", 100.0 * step));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisPoint {
    pub drive: f64,
    pub intensity: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HysteresisLoop {
    pub config: HysteresisConfig,
    pub up: Vec<HysteresisPoint>,
    pub down: Vec<HysteresisPoint>,
    /// First drive on the upper branch during the up-ramp.
    pub up_jump: Option<f64>,
    /// First drive on the lower branch during the down-ramp.
    pub down_jump: Option<f64>,
    pub warnings: Vec<String>,
}

impl HysteresisLoop {
    pub fn points(&self) -> impl Iterator<Item = &HysteresisPoint> {
        self.up.iter().chain(&self.down)
    }

    pub fn has_loop(&self) -> bool {
        self.up_jump.is_some() && self.down_jump.is_some()
    }

    /// Largest relative gap between the up and down traces at equal drive.
    pub fn max_trace_gap(&self) -> f64 {
        self.up
            .iter()
            .zip(self.down.iter().rev())
            .map(|(a, b)| (a.intensity - b.intensity).abs() / a.intensity.max(b.intensity).max(1e-300))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{HYSTERESIS_CSV_HEADER}")?;
        for p in self.points() {
            writeln!(w, "{},{},{}", num(p.drive), num(p.intensity), p.direction.as_str())?;
        }
        Ok(())
    }
}

pub fn hysteresis_sweep(cfg: &HysteresisConfig) -> Result<HysteresisLoop> {
    cfg.validate()?;
    let warnings = cfg.warnings();
    for w in &warnings {
        warn!("{w}");
    }
    let grid = log_grid(cfg.drive_min, cfg.drive_max, cfg.points)?;
    let opts = IntegratorOptions { tol: cfg.tol, store_steps: false, ..IntegratorOptions::default() };

    let mut state = SemiclassicalState::ground();
    let mut run = |drives: &mut dyn Iterator<Item = f64>, direction: Direction| -> Result<Vec<HysteresisPoint>> {
        let mut out = Vec::new();
        for drive in drives {
            let point = DimensionlessPoint::new(cfg.cooperativity, drive, cfg.delta, cfg.theta);
            let fp = FlowParams::new(&point, cfg.stiffness, cfg.gamma_t2)?;
            state = integrate_with(&state, &fp, cfg.dwell, &opts)?.final_state();
            out.push(HysteresisPoint { drive, intensity: state.intensity(), direction });
        }
        Ok(out)
    };
    // settle on the lower branch before the ramp starts
    let up = run(&mut std::iter::once(grid[0]).chain(grid.iter().copied()), Direction::Up)?[1..].to_vec();
    let down = run(&mut grid.iter().rev().copied(), Direction::Down)?;

    let up_jump = find_jump(&up, |a, b| b / a);
    let down_jump = find_jump(&down, |a, b| a / b);
    Ok(HysteresisLoop { config: *cfg, up, down, up_jump, down_jump, warnings })
}

fn find_jump(trace: &[HysteresisPoint], ratio: impl Fn(f64, f64) -> f64) -> Option<f64> {
    trace
        .windows(2)
        .map(|w| (w[1].drive, ratio(w[0].intensity.max(1e-300), w[1].intensity.max(1e-300))))
        .filter(|&(_, r)| r > JUMP_RATIO)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(d, _)| d)
}
