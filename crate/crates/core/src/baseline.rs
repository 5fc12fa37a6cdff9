//! Fixed-window FFT (frequency analysis) and HFFT (envelope analysis)
//! baselines. They share the taper and normalisation of the harmonic
//! extractor; only the window length differs.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::to_decibels;
use crate::harmonic::{combine_channels, segment_spectra};
use crate::signal::{Fourier, Signal, SpectrumScale, MIN_WINDOW};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub window: usize,
    pub lowpass_hz: f64,
    pub use_hilbert: bool,
    pub db_floor: f64,
    pub scale: SpectrumScale,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            window: 8196,
            lowpass_hz: 6000.0,
            use_hilbert: false,
            db_floor: 1e-12,
            scale: SpectrumScale::Magnitude,
        }
    }
}

impl BaselineConfig {
    /// Highest retained bin index for sampling rate `fs`.
    pub fn last_bin(&self, fs: f64) -> usize {
        (self.lowpass_hz / (fs / self.window as f64)).floor() as usize
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.window < MIN_WINDOW {
            return Err(Error::InvalidConfig(format!(
                "baseline window {} is shorter than {MIN_WINDOW}",
                self.window
            )));
        }
        if !(self.lowpass_hz > 0.0 && self.lowpass_hz < fs / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "baseline low-pass {} Hz must lie below Nyquist {} Hz",
                self.lowpass_hz,
                fs / 2.0
            )));
        }
        if self.last_bin(fs) == 0 || self.last_bin(fs) >= self.window / 2 {
            return Err(Error::InvalidConfig(format!(
                "baseline low-pass {} Hz keeps no usable bins",
                self.lowpass_hz
            )));
        }
        Ok(())
    }

    pub fn column_labels(&self, fs: f64) -> Vec<String> {
        let res = fs / self.window as f64;
        (1..=self.last_bin(fs))
            .map(|k| format!("{:.3}Hz", k as f64 * res))
            .collect()
    }

    fn db_factor(&self) -> f64 {
        match self.scale {
            SpectrumScale::Magnitude => 20.0,
            SpectrumScale::Power => 10.0,
        }
    }
}

/// Raw fixed-window spectra of one channel (`floor(window/2)` columns).
pub fn extract_baseline_raw(x: &Signal, cfg: &BaselineConfig) -> Result<Array2<f64>> {
    segment_spectra(
        x.samples(),
        cfg.window,
        cfg.use_hilbert,
        cfg.scale,
        &mut Fourier::new(),
    )
}

/// Drops DC, keeps bins up to the low-pass frequency and converts to dB.
pub fn baseline_postprocess(
    raw: &Array2<f64>,
    cfg: &BaselineConfig,
    fs: f64,
) -> Result<Array2<f64>> {
    cfg.validate(fs)?;
    let last = cfg.last_bin(fs);
    if last >= raw.ncols() {
        return Err(Error::InvalidArgument(format!(
            "raw rows have {} columns, bin {last} requested",
            raw.ncols()
        )));
    }
    let factor = cfg.db_factor();
    Ok(raw
        .slice(s![.., 1..=last])
        .mapv(|v| to_decibels(v, cfg.db_floor, factor)))
}

/// Baseline feature rows of a single channel.
pub fn extract_baseline_rows(x: &Signal, cfg: &BaselineConfig) -> Result<Array2<f64>> {
    cfg.validate(x.fs())?;
    let raw = extract_baseline_raw(x, cfg)?;
    baseline_postprocess(&raw, cfg, x.fs())
}

/// Baseline rows for a multi-channel recording, channels combined by
/// Euclidean magnitude before dB conversion.
pub fn recording_features(channels: &[Signal], cfg: &BaselineConfig) -> Result<Array2<f64>> {
    let Some(first) = channels.first() else {
        return Err(Error::InvalidArgument("recording has no channels".into()));
    };
    cfg.validate(first.fs())?;
    let mut fourier = Fourier::new();
    let raw = channels
        .iter()
        .map(|ch| {
            segment_spectra(
                ch.samples(),
                cfg.window,
                cfg.use_hilbert,
                cfg.scale,
                &mut fourier,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    baseline_postprocess(&combine_channels(&raw)?, cfg, first.fs())
}
