use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::FieldSeries;
use crate::error::{require_positive, Error, Result};

/// Two-sided power spectral density on an ascending frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    /// Integral over the full band.
    pub fn total_power(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.resolution()
    }
}

/// Averaged periodogram of non-overlapping rectangular segments, `|X_k|^2 / (fs L)`.
///
/// `remove_mean` subtracts each segment's mean first. It must stay off for a
/// field whose line sits at zero frequency, since the mean is the line itself.
pub fn welch_psd(samples: &[Complex64], sample_rate: f64, segments: usize, remove_mean: bool) -> Result<Psd> {
    require_positive("sample_rate", sample_rate)?;
    if segments == 0 {
        return Err(Error::invalid("segments", "must be at least 1"));
    }
    let len = samples.len() / segments;
    if len < 4 {
        return Err(Error::invalid("segments", format!("{} samples cannot fill {segments} segments", samples.len())));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let spectra: Vec<Vec<f64>> = samples
        .par_chunks_exact(len)
        .map(|chunk| {
            let mut buf = chunk.to_vec();
            if remove_mean {
                let mean = buf.iter().sum::<Complex64>() / len as f64;
                buf.iter_mut().for_each(|z| *z -= mean);
            }
            fft.process(&mut buf);
            buf.iter().map(|z| z.norm_sqr()).collect()
        })
        .collect();
    // summed in segment order so the result does not depend on scheduling
    let mut acc = vec![0.0; len];
    for s in &spectra {
        for (a, v) in acc.iter_mut().zip(s) {
            *a += v;
        }
    }
    let norm = 1.0 / (segments as f64 * sample_rate * len as f64);
    let df = sample_rate / len as f64;
    let signed = |k: usize| if k <= (len - 1) / 2 { k as f64 } else { k as f64 - len as f64 };
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| signed(a).total_cmp(&signed(b)));
    Ok(Psd {
        frequencies: order.iter().map(|&k| signed(k) * df).collect(),
        values: order.iter().map(|&k| acc[k] * norm).collect(),
    })
}

/// `amplitude / (1 + 4 (f - center)^2 / fwhm^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorentzian {
    pub amplitude: f64,
    pub center: f64,
    pub fwhm: f64,
}

impl Lorentzian {
    pub fn eval(&self, f: f64) -> f64 {
        let d = 2.0 * (f - self.center) / self.fwhm;
        self.amplitude / (1.0 + d * d)
    }

    fn gradient(&self, f: f64) -> Vector3<f64> {
        let w = self.fwhm;
        let x = f - self.center;
        let den = 1.0 + 4.0 * x * x / (w * w);
        Vector3::new(
            1.0 / den,
            self.amplitude * 8.0 * x / (w * w) / (den * den),
            self.amplitude * 8.0 * x * x / (w * w * w) / (den * den),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzFit {
    pub model: Lorentzian,
    /// One-sigma parameter errors from the scaled covariance.
    pub errors: Lorentzian,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Levenberg-Marquardt least squares.
pub fn fit_lorentzian(freqs: &[f64], values: &[f64], guess: Lorentzian) -> Result<LorentzFit> {
    let n = freqs.len();
    if n < 4 || values.len() != n {
        return Err(Error::FitFailed {
            reason: format!("need >= 4 matching points, got {n}"),
            residual_norm: f64::NAN,
        });
    }
    let ssr = |m: &Lorentzian| freqs.iter().zip(values).map(|(f, v)| (v - m.eval(*f)).powi(2)).sum::<f64>();
    let mut m = guess;
    let mut cost = ssr(&m);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (f, v) in freqs.iter().zip(values) {
            let g = m.gradient(*f);
            jtj += g * g.transpose();
            jtr += g * (v - m.eval(*f));
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for d in 0..3 {
                a[(d, d)] *= 1.0 + lambda;
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial =
                Lorentzian { amplitude: m.amplitude + step[0], center: m.center + step[1], fwhm: m.fwhm + step[2] };
            if trial.fwhm > 0.0 && trial.amplitude > 0.0 {
                let c = ssr(&trial);
                if c < cost {
                    let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                    m = trial;
                    cost = c;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    if rel < 1e-12 {
                        lambda = -1.0; // converged
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved || lambda < 0.0 {
            break;
        }
    }
    let residual_norm = cost.sqrt();
    if !(m.fwhm.is_finite() && m.fwhm > 0.0 && m.amplitude.is_finite()) {
        return Err(Error::FitFailed { reason: "non-finite parameters".into(), residual_norm });
    }
    let mut jtj = Matrix3::zeros();
    for f in freqs {
        let g = m.gradient(*f);
        jtj += g * g.transpose();
    }
    let s2 = cost / (n as f64 - 3.0).max(1.0);
    let cov =
        jtj.try_inverse().ok_or_else(|| Error::FitFailed { reason: "singular normal matrix".into(), residual_norm })?;
    let err = |i: usize| (cov[(i, i)] * s2).max(0.0).sqrt();
    Ok(LorentzFit {
        model: m,
        errors: Lorentzian { amplitude: err(0), center: err(1), fwhm: err(2) },
        residual_norm,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineshapeEstimate {
    pub fwhm_hz: f64,
    pub fwhm_err_hz: f64,
    pub center_hz: f64,
    pub residual_norm: f64,
    /// Bin spacing of the periodogram.
    pub resolution_hz: f64,
    /// True when the line is narrower than one bin and the width is the bin spacing.
    pub resolution_limited: bool,
    /// Fitted `D(tau) / tau` in rad^2/s, when the phase could be followed.
    pub structure_slope: Option<f64>,
    /// `(frequency, psd)` pairs of the averaged periodogram.
    pub lineshape: Vec<(f64, f64)>,
}

/// Widest line, as a fraction of the sample rate, the estimator will report.
pub const MAX_BAND_FRACTION: f64 = 0.05;

/// Lorentzian width of a baseband field's power spectrum.
pub fn estimate_lineshape(series: &FieldSeries, segments: usize) -> Result<LineshapeEstimate> {
    let psd = welch_psd(&series.samples, series.sample_rate, segments, false)?;
    let df = psd.resolution();
    let (peak, &amp) = psd
        .values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::FitFailed { reason: "empty spectrum".into(), residual_norm: f64::NAN })?;
    if !(amp > 0.0 && amp.is_finite()) {
        return Err(Error::FitFailed { reason: "spectrum carries no power".into(), residual_norm: f64::NAN });
    }
    let half = 0.5 * amp;
    let mut lo = peak;
    while lo > 0 && psd.values[lo - 1] > half {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < psd.values.len() && psd.values[hi + 1] > half {
        hi += 1;
    }
    let width0 = ((hi - lo + 1) as f64) * df;
    let center0 = psd.frequencies[peak];
    let lineshape: Vec<(f64, f64)> = psd.frequencies.iter().copied().zip(psd.values.iter().copied()).collect();
    let structure_slope = structure_function(series, 64).ok().and_then(|d| structure_slope(&d));

    let floor = |residual_norm: f64| LineshapeEstimate {
        fwhm_hz: df,
        fwhm_err_hz: df,
        center_hz: center0,
        residual_norm,
        resolution_hz: df,
        resolution_limited: true,
        structure_slope,
        lineshape: lineshape.clone(),
    };
    if hi == lo {
        return Ok(floor(0.0));
    }

    let span = (4.0 * width0).max(5.0 * df);
    let (fs, vs): (Vec<f64>, Vec<f64>) =
        lineshape.iter().filter(|(f, _)| (f - center0).abs() <= span).map(|&(f, v)| (f, v)).unzip();
    let fit = fit_lorentzian(&fs, &vs, Lorentzian { amplitude: amp, center: center0, fwhm: width0 })?;
    if fit.model.fwhm < df {
        return Ok(floor(fit.residual_norm));
    }
    // the band must hold the line and its wings; synthesis asks for 100 widths
    if fit.model.fwhm > MAX_BAND_FRACTION * series.sample_rate {
        return Err(Error::FitFailed {
            reason: format!(
                "fitted width {:e} Hz exceeds {MAX_BAND_FRACTION} x the {:e} Hz band; no resolved line",
                fit.model.fwhm, series.sample_rate
            ),
            residual_norm: fit.residual_norm,
        });
    }
    Ok(LineshapeEstimate {
        fwhm_hz: fit.model.fwhm,
        fwhm_err_hz: fit.errors.fwhm.max(f64::MIN_POSITIVE),
        center_hz: fit.model.center,
        residual_norm: fit.residual_norm,
        resolution_hz: df,
        resolution_limited: false,
        structure_slope,
        lineshape,
    })
}

/// Phase structure function `D(tau) = <[phi(t + tau) - phi(t)]^2>` for lags
/// `1..=max_lag` samples, as `(tau, D)` pairs. The phase is unwrapped from
/// the field, so per-sample increments must stay below pi.
pub fn structure_function(series: &FieldSeries, max_lag: usize) -> Result<Vec<(f64, f64)>> {
    let n = series.samples.len();
    if max_lag == 0 || n <= 2 * max_lag {
        return Err(Error::invalid("max_lag", format!("need 0 < max_lag < {} samples / 2", n)));
    }
    let mut phase = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut prev = series.samples[0];
    phase.push(0.0);
    for z in &series.samples[1..] {
        acc += (z * prev.conj()).arg();
        prev = *z;
        phase.push(acc);
    }
    let dt = 1.0 / series.sample_rate;
    Ok((1..=max_lag)
        .into_par_iter()
        .map(|k| {
            let m = n - k;
            let d = (0..m).map(|i| (phase[i + k] - phase[i]).powi(2)).sum::<f64>() / m as f64;
            (k as f64 * dt, d)
        })
        .collect())
}

/// Least-squares slope through the origin.
pub fn structure_slope(points: &[(f64, f64)]) -> Option<f64> {
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), (t, d)| (a + t * d, b + t * t));
    (den > 0.0).then(|| num / den)
}

/// `h0` implied by a structure-function slope, `slope / pi^2`.
pub fn h0_from_structure_slope(slope: f64) -> f64 {
    slope / (PI * PI)
}
