//! Primitive signal operations shared by the feature extractors.
//!
//! All transforms are exact-length DFTs: the harmonic window length is
//! data dependent and rarely a power of two, and zero-padding would break
//! the alignment between bins and shaft harmonics.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest window any extractor will accept.
pub const MIN_WINDOW: usize = 8;

/// A single-channel, uniformly sampled acceleration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    fs: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, fs })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// One-sided spectrum of a real window.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<f64>,
    /// Hz per bin.
    pub resolution: f64,
}

/// How the per-segment spectrum is read before scaling.
///
/// `Magnitude` keeps the peak value of a fixed-amplitude tone independent
/// of the window length once the window energy correction and the `N/2`
/// division are applied. `Power` squares the magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumScale {
    #[default]
    Magnitude,
    Power,
}

impl SpectrumScale {
    pub fn apply(self, magnitude: f64) -> f64 {
        match self {
            SpectrumScale::Magnitude => magnitude,
            SpectrumScale::Power => magnitude * magnitude,
        }
    }
}

/// Window length that puts shaft harmonic `k/d` of `fo` exactly on bin `k`.
///
/// `N = round(fs * d / fo)`, rounding half away from zero.
pub fn window_size(fs: f64, fo: f64, d: usize) -> Result<usize> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::InvalidCondition(format!(
            "sampling rate must be positive, got {fs}"
        )));
    }
    if !(fo > 0.0 && fo.is_finite()) {
        return Err(Error::InvalidCondition(format!(
            "operating frequency must be positive, got {fo}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidCondition(
            "harmonic bin d must be >= 1".into(),
        ));
    }
    let n = (fs * d as f64 / fo).round();
    if n < MIN_WINDOW as f64 {
        return Err(Error::InvalidCondition(format!(
            "window of {n} samples at fo={fo} Hz is too coarse (minimum {MIN_WINDOW})"
        )));
    }
    Ok(n as usize)
}

/// Symmetric Blackman window of length `n`.
pub fn blackman_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Blackman window needs at least 2 points, got {n}"
        )));
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let x = 2.0 * PI * i as f64 / denom;
            0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
        })
        .collect())
}

/// `sqrt(N / sum(w^2))`: restores the energy removed by the taper.
pub fn window_energy_correction(w: &[f64]) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    let energy: f64 = w.iter().map(|v| v * v).sum();
    if energy <= 0.0 {
        return Err(Error::InvalidArgument("window is all zeros".into()));
    }
    Ok((w.len() as f64 / energy).sqrt())
}

/// Subtracts the mean.
pub fn dc_remove(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot remove DC from an empty vector".into(),
        ));
    }
    let mut out = x.to_vec();
    dc_remove_in_place(&mut out);
    Ok(out)
}

pub(crate) fn dc_remove_in_place(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Reusable DFT plans. Extraction calls the same length many times per
/// recording, so plans are cached per length.
pub struct Fourier {
    planner: FftPlanner<f64>,
    forward: Option<(usize, Arc<dyn Fft<f64>>)>,
    inverse: Option<(usize, Arc<dyn Fft<f64>>)>,
    buf: Vec<Complex<f64>>,
}

impl Default for Fourier {
    fn default() -> Self {
        Self::new()
    }
}

impl Fourier {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
            forward: None,
            inverse: None,
            buf: Vec::new(),
        }
    }

    fn forward_plan(&mut self, n: usize) -> Arc<dyn Fft<f64>> {
        match &self.forward {
            Some((len, plan)) if *len == n => plan.clone(),
            _ => {
                let plan = self.planner.plan_fft_forward(n);
                self.forward = Some((n, plan.clone()));
                plan
            }
        }
    }

    fn inverse_plan(&mut self, n: usize) -> Arc<dyn Fft<f64>> {
        match &self.inverse {
            Some((len, plan)) if *len == n => plan.clone(),
            _ => {
                let plan = self.planner.plan_fft_inverse(n);
                self.inverse = Some((n, plan.clone()));
                plan
            }
        }
    }

    fn load(&mut self, x: &[f64]) {
        self.buf.clear();
        self.buf.extend(x.iter().map(|&v| Complex::new(v, 0.0)));
    }

    /// Full two-sided DFT (unnormalised).
    pub fn dft(&mut self, x: &[f64]) -> Vec<Complex<f64>> {
        self.load(x);
        let plan = self.forward_plan(x.len());
        plan.process(&mut self.buf);
        self.buf.clone()
    }

    /// `|DFT(x)[k]|` for `k = 0..floor(N/2)`.
    pub fn magnitude_spectrum(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() < MIN_WINDOW {
            return Err(Error::InvalidArgument(format!(
                "spectrum needs at least {MIN_WINDOW} samples, got {}",
                x.len()
            )));
        }
        self.load(x);
        let plan = self.forward_plan(x.len());
        plan.process(&mut self.buf);
        Ok(self.buf[..x.len() / 2].iter().map(|c| c.norm()).collect())
    }

    /// Magnitude of the analytic signal (frequency-domain method).
    pub fn envelope(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        if n < 4 {
            return Err(Error::InvalidArgument(format!(
                "Hilbert envelope needs at least 4 samples, got {n}"
            )));
        }
        self.load(x);
        let fwd = self.forward_plan(n);
        fwd.process(&mut self.buf);
        // Keep DC (and Nyquist for even n), double positive, zero negative.
        let half = n / 2;
        let upper = if n.is_multiple_of(2) { half } else { half + 1 };
        for v in &mut self.buf[1..upper] {
            *v *= 2.0;
        }
        for v in &mut self.buf[half + 1..] {
            *v = Complex::new(0.0, 0.0);
        }
        let inv = self.inverse_plan(n);
        inv.process(&mut self.buf);
        let scale = 1.0 / n as f64;
        Ok(self.buf.iter().map(|c| c.norm() * scale).collect())
    }
}

/// Envelope of `x` via the analytic signal.
pub fn hilbert_envelope(x: &[f64]) -> Result<Vec<f64>> {
    Fourier::new().envelope(x)
}

/// One-sided magnitude spectrum with `floor(N/2)` bins.
pub fn one_sided_spectrum(x: &[f64], fs: f64) -> Result<Spectrum> {
    let bins = Fourier::new().magnitude_spectrum(x)?;
    Ok(Spectrum {
        bins,
        resolution: fs / x.len() as f64,
    })
}
