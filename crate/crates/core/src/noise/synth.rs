use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FieldSeries;
use crate::error::{require_non_negative, require_positive, Error, Result};

/// Generator used for every synthesized series: one ChaCha20 stream seeded
/// through `seed_from_u64`, consumed sequentially.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64), single sequential stream";

/// Largest series accepted, to keep runs at desk scale.
pub const MAX_SAMPLES: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSimConfig {
    /// White frequency-noise level `h0` (Hz^2/Hz) as used by the `pi h0 / 2`
    /// linewidth law; equals four times the two-sided PSD.
    pub h0: f64,
    pub sample_rate: f64,
    pub duration: f64,
    pub seed: u64,
    /// Segments averaged in the periodogram.
    pub segments: usize,
}

impl NoiseSimConfig {
    /// Sampling and duration chosen relative to the expected linewidth.
    pub fn auto(h0: f64, seed: u64) -> Self {
        let fwhm = 0.5 * PI * h0;
        let (sample_rate, duration) = if fwhm > 0.0 { (200.0 * fwhm, 3200.0 / fwhm) } else { (1.0, 1024.0) };
        NoiseSimConfig { h0, sample_rate, duration, seed, segments: 64 }
    }

    pub fn expected_fwhm(&self) -> f64 {
        0.5 * PI * self.h0
    }

    pub fn sample_count(&self) -> usize {
        (self.sample_rate * self.duration).round() as usize
    }

    /// Two-sided frequency-noise PSD `h0 / 4`.
    pub fn two_sided_psd(&self) -> f64 {
        0.25 * self.h0
    }

    pub fn validate(&self) -> Result<()> {
        require_non_negative("h0", self.h0)?;
        require_positive("sample_rate", self.sample_rate)?;
        require_positive("duration", self.duration)?;
        if self.segments == 0 {
            return Err(Error::invalid("segments", "must be at least 1"));
        }
        let n = self.sample_count();
        if n > MAX_SAMPLES {
            return Err(Error::invalid("duration", format!("{n} samples exceeds the limit of {MAX_SAMPLES}")));
        }
        let mut violations = Vec::new();
        if n / self.segments < 16 {
            violations.push(format!("{n} samples cannot fill {} segments of 16 points", self.segments));
        }
        let fwhm = self.expected_fwhm();
        if fwhm > 0.0 {
            if self.sample_rate <= 100.0 * fwhm {
                violations.push(format!(
                    "sample rate {} Hz must exceed 100 x FWHM = {} Hz",
                    self.sample_rate,
                    100.0 * fwhm
                ));
            }
            if self.duration * fwhm <= 100.0 {
                violations.push(format!("duration x FWHM = {} must exceed 100", self.duration * fwhm));
            }
            let seg = self.duration / self.segments as f64;
            if seg * fwhm < 5.0 {
                violations.push(format!("segment length {seg} s leaves under 5 bins per FWHM"));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Unresolvable { violations })
        }
    }
}

/// White Gaussian frequency deviations (Hz) with two-sided PSD `h0 / 4`.
pub fn synthesize_frequency_noise(cfg: &NoiseSimConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = cfg.sample_count();
    let sigma = (cfg.two_sided_psd() * cfg.sample_rate).sqrt();
    if sigma == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("h0", e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

/// Baseband field `exp(i phi)` with `phi_{k+1} = phi_k + 2 pi dnu_k / fs`.
pub fn synthesize_locked_field(cfg: &NoiseSimConfig) -> Result<FieldSeries> {
    let dnu = synthesize_frequency_noise(cfg)?;
    let step = 2.0 * PI / cfg.sample_rate;
    let mut phi = 0.0;
    let samples = dnu
        .iter()
        .map(|d| {
            let e = Complex64::from_polar(1.0, phi);
            phi += step * d;
            e
        })
        .collect();
    Ok(FieldSeries { sample_rate: cfg.sample_rate, samples })
}
