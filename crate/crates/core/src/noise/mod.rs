//! Shot-noise-limited lock noise and the lineshape it produces.
//!
//! Spectral bookkeeping: frequency-noise PSDs are two-sided unless named
//! otherwise. The level `h0` used throughout is the one in `FWHM = pi h0 / 2`
//! and `D(tau) = pi^2 h0 tau`; it equals four times the two-sided PSD (twice
//! the usual one-sided PSD). Phase accumulates as `dphi/dt = 2 pi dnu`.

mod homodyne;
mod lineshape;
mod synth;

pub use homodyne::*;
pub use lineshape::*;
pub use synth::*;

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::fmt::num;
use crate::metrology::lock_budget;
use crate::model::PhysicalSystem;

pub const SERIES_CSV_HEADER: &str = "t,re,im";
pub const LINESHAPE_CSV_HEADER: &str = "f_Hz,psd";

/// Uniformly sampled complex baseband field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    pub sample_rate: f64,
    pub samples: Vec<Complex64>,
}

impl FieldSeries {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SERIES_CSV_HEADER}")?;
        let dt = 1.0 / self.sample_rate;
        for (k, z) in self.samples.iter().enumerate() {
            writeln!(w, "{},{},{}", num(k as f64 * dt), num(z.re), num(z.im))?;
        }
        Ok(())
    }

    /// Reads `t,re,im` rows; the sample rate comes from the first time step.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let mut t = Vec::new();
        let mut samples = Vec::new();
        for (line, rec) in rdr.deserialize::<(f64, f64, f64)>().enumerate() {
            let (ti, re, im) = rec.map_err(|e| Error::Io(format!("row {}: {e}", line + 2)))?;
            t.push(ti);
            samples.push(Complex64::new(re, im));
        }
        if t.len() < 2 {
            return Err(Error::Io("time series needs at least two rows".into()));
        }
        let dt = t[1] - t[0];
        require_positive("time step", dt)?;
        for (k, w) in t.windows(2).enumerate() {
            if ((w[1] - w[0]) / dt - 1.0).abs() > 1e-6 {
                return Err(Error::Io(format!("non-uniform sampling at row {}", k + 3)));
            }
        }
        Ok(FieldSeries { sample_rate: 1.0 / dt, samples })
    }
}

pub fn write_lineshape_csv<W: Write>(est: &LineshapeEstimate, mut w: W) -> Result<()> {
    writeln!(w, "{LINESHAPE_CSV_HEADER}")?;
    for (f, p) in &est.lineshape {
        writeln!(w, "{},{}", num(*f), num(*p))?;
    }
    Ok(())
}

/// JSON summary of a lineshape run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineshapeSummary {
    pub fwhm_hz: f64,
    pub err_hz: f64,
    pub h0_hz2_per_hz: f64,
    pub seed: u64,
    pub predicted_fwhm_hz: f64,
    pub resolution_hz: f64,
    pub resolution_limited: bool,
    pub structure_slope: Option<f64>,
    pub rng: String,
}

impl LineshapeSummary {
    pub fn new(est: &LineshapeEstimate, cfg: &NoiseSimConfig) -> Self {
        LineshapeSummary {
            fwhm_hz: est.fwhm_hz,
            err_hz: est.fwhm_err_hz,
            h0_hz2_per_hz: cfg.h0,
            seed: cfg.seed,
            predicted_fwhm_hz: cfg.expected_fwhm(),
            resolution_hz: est.resolution_hz,
            resolution_limited: est.resolution_limited,
            structure_slope: est.structure_slope,
            rng: RNG_ALGORITHM.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockSimOptions {
    /// Multiplier on `h0`, so sub-mHz lines can be simulated over desk-scale durations.
    pub scale: f64,
    pub seed: u64,
    pub segments: usize,
    pub lo_power: f64,
}

impl Default for LockSimOptions {
    fn default() -> Self {
        LockSimOptions { scale: 1e6, seed: 0, segments: 64, lo_power: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockSimResult {
    /// Unscaled `h0` of the lock.
    pub h0: f64,
    pub scale: f64,
    /// `scale x` the quantum-limited linewidth.
    pub predicted_fwhm_hz: f64,
    pub config: NoiseSimConfig,
    pub estimate: LineshapeEstimate,
}

impl LockSimResult {
    pub fn relative_error(&self) -> f64 {
        self.estimate.fwhm_hz / self.predicted_fwhm_hz - 1.0
    }

    /// Estimated linewidth mapped back to the physical (unscaled) system.
    pub fn unscaled_fwhm_hz(&self) -> f64 {
        self.estimate.fwhm_hz / self.scale
    }
}

/// Budget, detector noise, synthesis and estimation chained together.
pub fn end_to_end_lock_sim(sys: &PhysicalSystem, beta: f64, opts: &LockSimOptions) -> Result<LockSimResult> {
    require_positive("scale", opts.scale)?;
    let budget = lock_budget(sys, beta)?;
    let homodyne = HomodyneConfig::from_budget(sys, &budget, opts.lo_power);
    let h0 = h0_from_homodyne(&homodyne)?;
    let config = NoiseSimConfig { segments: opts.segments, ..NoiseSimConfig::auto(h0 * opts.scale, opts.seed) };
    let field = synthesize_locked_field(&config)?;
    let estimate = estimate_lineshape(&field, config.segments)?;
    Ok(LockSimResult {
        h0,
        scale: opts.scale,
        predicted_fwhm_hz: budget.linewidth_full_hz * opts.scale,
        config,
        estimate,
    })
}
