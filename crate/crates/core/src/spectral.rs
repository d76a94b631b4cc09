//! Power spectral density estimates and peak extraction.
//!
//! One-sided PSD with the normalisation `S(f) = |FFT{x}|^2 dt / N` (doubled off
//! DC and Nyquist), so that `sum_k S_k * df` equals the mean square of the
//! (detrended) input. Frequencies are in MHz and densities in units^2/MHz;
//! input sample intervals are in ns.

use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    /// Bin frequencies, MHz, ascending from zero.
    pub freqs: Vec<f64>,
    /// Spectral density, units^2 / MHz.
    pub power: Vec<f64>,
    /// Bin spacing, MHz.
    pub resolution: f64,
}

impl Psd {
    /// `sum_k S_k * df`.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.resolution
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Csv(e.to_string());
        out.write_record(["freq_MHz", "power"]).map_err(err)?;
        for (f, p) in self.freqs.iter().zip(&self.power) {
            out.write_record(&[f.to_string(), p.to_string()])
                .map_err(err)?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

/// Trend removed from each segment before transforming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detrend {
    None,
    #[default]
    Mean,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // periodic Hann
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Removes the requested trend in place.
pub fn detrend(x: &mut [f64], mode: Detrend) {
    let n = x.len();
    if n == 0 {
        return;
    }
    match mode {
        Detrend::None => {}
        Detrend::Mean => {
            let m = x.iter().sum::<f64>() / n as f64;
            x.iter_mut().for_each(|v| *v -= m);
        }
        Detrend::Linear => {
            if n < 2 {
                x[0] = 0.0;
                return;
            }
            let nf = n as f64;
            let tm = (nf - 1.0) / 2.0;
            let xm = x.iter().sum::<f64>() / nf;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (k, v) in x.iter().enumerate() {
                let dtk = k as f64 - tm;
                sxy += dtk * (v - xm);
                sxx += dtk * dtk;
            }
            let slope = sxy / sxx;
            for (k, v) in x.iter_mut().enumerate() {
                *v -= xm + slope * (k as f64 - tm);
            }
        }
    }
}

fn one_sided(spectrum: &[Complex64], dt_us: f64, norm: f64) -> Vec<f64> {
    let n = spectrum.len();
    let half = n / 2;
    (0..=half)
        .map(|k| {
            let p = spectrum[k].norm_sqr() * dt_us / norm;
            if k == 0 || (n.is_multiple_of(2) && k == half) {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}

/// Raw periodogram with a rectangular window.
pub fn periodogram(x: &[f64], dt: f64, detrend_mode: Detrend) -> Result<Psd> {
    welch_psd(x, dt, x.len(), 0.0, Window::Rectangular, detrend_mode)
}

/// Welch estimate: averaged windowed periodograms of overlapping segments,
/// each normalised by the window power `sum w^2`.
pub fn welch_psd(
    x: &[f64],
    dt: f64,
    segment_length: usize,
    overlap_fraction: f64,
    window: Window,
    detrend_mode: Detrend,
) -> Result<Psd> {
    if x.len() < MIN_SAMPLES {
        return Err(Error::TooShort {
            needed: MIN_SAMPLES,
            got: x.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::Segmentation(format!(
            "sample interval must be positive, got {dt}"
        )));
    }
    if segment_length < MIN_SAMPLES || segment_length > x.len() {
        return Err(Error::Segmentation(format!(
            "segment length {segment_length} must lie in [{MIN_SAMPLES}, {}]",
            x.len()
        )));
    }
    if !(0.0..=0.9).contains(&overlap_fraction) {
        return Err(Error::Segmentation(format!(
            "overlap {overlap_fraction} outside [0, 0.9]"
        )));
    }
    let overlap = (overlap_fraction * segment_length as f64).round() as usize;
    let step = (segment_length - overlap).max(1);
    let n_segments = (x.len() - segment_length) / step + 1;

    let w = window.coefficients(segment_length);
    let norm: f64 = w.iter().map(|v| v * v).sum();
    let dt_us = dt * 1e-3;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_length);

    let mut acc = vec![0.0; segment_length / 2 + 1];
    let mut seg = vec![0.0; segment_length];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_length];
    for s in 0..n_segments {
        seg.copy_from_slice(&x[s * step..s * step + segment_length]);
        detrend(&mut seg, detrend_mode);
        for (b, (v, wk)) in buf.iter_mut().zip(seg.iter().zip(&w)) {
            *b = Complex64::new(v * wk, 0.0);
        }
        fft.process(&mut buf);
        for (a, p) in acc.iter_mut().zip(one_sided(&buf, dt_us, norm)) {
            *a += p;
        }
    }
    let power = acc.into_iter().map(|p| p / n_segments as f64).collect();
    let resolution = 1e3 / (segment_length as f64 * dt);
    let freqs = (0..=segment_length / 2)
        .map(|k| k as f64 * resolution)
        .collect();
    Ok(Psd {
        freqs,
        power,
        resolution,
    })
}

/// A spectral peak located by parabolic interpolation around the maximum bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq: f64,
    pub power: f64,
    pub bin: usize,
}

/// Largest bin with `f_lo <= f <= f_hi`, DC excluded. Ties resolve to the
/// first (lowest-frequency) bin.
pub fn dominant_peak(psd: &Psd, band: (f64, f64)) -> Result<Peak> {
    dominant_peak_with(psd, band, false)
}

pub fn dominant_peak_with(psd: &Psd, band: (f64, f64), include_dc: bool) -> Result<Peak> {
    let (lo, hi) = band;
    let mut best: Option<usize> = None;
    for (k, (&f, &p)) in psd.freqs.iter().zip(&psd.power).enumerate() {
        if (k == 0 && !include_dc) || f < lo || f > hi {
            continue;
        }
        if best.is_none_or(|b| p > psd.power[b]) {
            best = Some(k);
        }
    }
    let k = best.ok_or(Error::EmptyBand { lo, hi })?;
    let beta = psd.power[k];
    let (mut delta, mut power) = (0.0, beta);
    if k > 0 && k + 1 < psd.power.len() {
        let (alpha, gamma) = (psd.power[k - 1], psd.power[k + 1]);
        let denom = alpha - 2.0 * beta + gamma;
        if denom != 0.0 {
            delta = (0.5 * (alpha - gamma) / denom).clamp(-0.5, 0.5);
            power = beta - 0.25 * (alpha - gamma) * delta;
        }
    }
    Ok(Peak {
        freq: psd.freqs[k] + delta * psd.resolution,
        power,
        bin: k,
    })
}

/// Centred moving average with a triangular kernel spanning `width` samples
/// (rounded up to odd). Edges use the truncated, renormalised kernel.
pub fn smooth_triangular(x: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    if half == 0 {
        return x.to_vec();
    }
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|j| (half + 1) as f64 - (j as f64 - half as f64).abs())
        .collect();
    (0..x.len())
        .map(|i| {
            let (mut s, mut wsum) = (0.0, 0.0);
            for (j, &w) in kernel.iter().enumerate() {
                let idx = i as isize + j as isize - half as isize;
                if idx >= 0 && (idx as usize) < x.len() {
                    s += w * x[idx as usize];
                    wsum += w;
                }
            }
            s / wsum
        })
        .collect()
}

/// Central-difference derivative, one-sided at the ends.
pub fn derivative(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (x[1] - x[0]) / dt
            } else if i == n - 1 {
                (x[n - 1] - x[n - 2]) / dt
            } else {
                (x[i + 1] - x[i - 1]) / (2.0 * dt)
            }
        })
        .collect()
}
