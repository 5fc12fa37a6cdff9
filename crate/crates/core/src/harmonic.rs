//! Harmonic feature space extraction (HAR and HARH).
//!
//! The FFT window is sized from the shaft frequency so that column `k` of
//! every row always holds harmonic `k/d` of the shaft, whatever the speed.
//! Rows from different speeds are then trimmed to a common width, the DC
//! column is dropped, and values are converted to decibels.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::to_decibels;
use crate::signal::{
    blackman_window, window_energy_correction, window_size, Fourier, Signal, SpectrumScale,
};

/// Parameters of the harmonic transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicConfig {
    /// Bins per shaft harmonic.
    pub d: usize,
    pub fs: f64,
    /// Highest operating frequency (Hz) in the dataset; fixes the feature count.
    pub fo_max: f64,
    /// Envelope (HARH) or plain (HAR) spectrum.
    pub use_hilbert: bool,
    pub max_harmonics: usize,
    pub db_floor: f64,
    pub scale: SpectrumScale,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        Self {
            d: 4,
            fs: 48_000.0,
            fo_max: 100.0,
            use_hilbert: true,
            max_harmonics: 60,
            db_floor: 1e-12,
            scale: SpectrumScale::Magnitude,
        }
    }
}

impl HarmonicConfig {
    /// Shortest window in the dataset (at `fo_max`).
    pub fn n_min(&self) -> Result<usize> {
        window_size(self.fs, self.fo_max, self.d)
    }

    /// Columns kept by [`postprocess`]: harmonics `1/d ..= max_harmonics`.
    pub fn feature_count(&self) -> usize {
        self.max_harmonics * self.d
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidConfig("harmonic bin d must be >= 1".into()));
        }
        if !(self.fo_max > 0.0) {
            return Err(Error::InvalidConfig("fo_max must be positive".into()));
        }
        if self.max_harmonics == 0 {
            return Err(Error::InvalidConfig("max_harmonics must be >= 1".into()));
        }
        if !(self.db_floor > 0.0) {
            return Err(Error::InvalidConfig("db_floor must be positive".into()));
        }
        let n_min = self
            .n_min()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if self.feature_count() >= n_min / 2 {
            return Err(Error::InvalidConfig(format!(
                "{} harmonics at d={} need {} columns after DC but only {} are available at fo_max={} Hz",
                self.max_harmonics,
                self.d,
                self.feature_count(),
                n_min / 2 - 1,
                self.fo_max
            )));
        }
        Ok(())
    }

    /// Labels for the retained columns in harmonic units.
    pub fn column_labels(&self) -> Vec<String> {
        (1..=self.feature_count())
            .map(|k| format!("h{}", k as f64 / self.d as f64))
            .collect()
    }

    pub(crate) fn db_factor(&self) -> f64 {
        match self.scale {
            SpectrumScale::Magnitude => 20.0,
            SpectrumScale::Power => 10.0,
        }
    }
}

/// Windowed spectra of consecutive non-overlapping segments of length `n`.
///
/// Per segment: taper, remove the mean, optionally take the Hilbert
/// envelope, then `c * spectrum / (n/2)`. Tail samples that do not fill a
/// whole window are dropped.
pub(crate) fn segment_spectra(
    x: &[f64],
    n: usize,
    use_hilbert: bool,
    scale: SpectrumScale,
    fourier: &mut Fourier,
) -> Result<Array2<f64>> {
    if x.len() < n {
        return Err(Error::EmptyExtraction {
            len: x.len(),
            window: n,
        });
    }
    let w = blackman_window(n)?;
    let c = window_energy_correction(&w)?;
    let half = n as f64 / 2.0;
    let rows = x.len() / n;
    let cols = n / 2;
    let mut out = Array2::zeros((rows, cols));
    let mut z = vec![0.0; n];
    for i in 0..rows {
        let seg = &x[i * n..(i + 1) * n];
        for ((zk, &xk), &wk) in z.iter_mut().zip(seg).zip(&w) {
            *zk = wk * xk;
        }
        crate::signal::dc_remove_in_place(&mut z);
        let spectrum = if use_hilbert {
            let h = fourier.envelope(&z)?;
            fourier.magnitude_spectrum(&h)?
        } else {
            fourier.magnitude_spectrum(&z)?
        };
        for (dst, mag) in out.row_mut(i).iter_mut().zip(spectrum) {
            *dst = c * scale.apply(mag) / half;
        }
    }
    Ok(out)
}

/// Raw harmonic rows of one channel: `floor(len/N)` rows by `floor(N/2)`
/// columns, where column `k` is harmonic `k/d` of `fo`.
pub fn extract_harmonic_rows(x: &Signal, fo: f64, cfg: &HarmonicConfig) -> Result<Array2<f64>> {
    let n = window_size(x.fs(), fo, cfg.d)?;
    segment_spectra(
        x.samples(),
        n,
        cfg.use_hilbert,
        cfg.scale,
        &mut Fourier::new(),
    )
}

/// Euclidean magnitude across channels, bin by bin.
pub fn combine_channels(rows_per_channel: &[Array2<f64>]) -> Result<Array2<f64>> {
    let Some(first) = rows_per_channel.first() else {
        return Err(Error::InvalidArgument("no channels to combine".into()));
    };
    if rows_per_channel.len() == 1 {
        return Ok(first.clone());
    }
    let mut acc = Array2::<f64>::zeros(first.dim());
    for (ch, rows) in rows_per_channel.iter().enumerate() {
        if rows.dim() != first.dim() {
            return Err(Error::InvalidArgument(format!(
                "channel {ch} has shape {:?}, expected {:?}",
                rows.dim(),
                first.dim()
            )));
        }
        acc.zip_mut_with(rows, |a, &v| *a += v * v);
    }
    acc.mapv_inplace(f64::sqrt);
    Ok(acc)
}

/// Keeps the first `floor(n_min/2)` columns so every speed yields the same
/// feature count.
pub fn trim_features(rows: Array2<f64>, n_min: usize) -> Result<Array2<f64>> {
    let keep = n_min / 2;
    if rows.ncols() < keep {
        return Err(Error::InvalidArgument(format!(
            "rows have {} columns but {keep} are required; operating frequency exceeds fo_max",
            rows.ncols()
        )));
    }
    if rows.ncols() == keep {
        return Ok(rows);
    }
    Ok(rows.slice(s![.., ..keep]).to_owned())
}

/// Drops the DC column, keeps harmonics up to `max_harmonics` inclusive and
/// converts to dB.
pub fn postprocess(rows: &Array2<f64>, cfg: &HarmonicConfig) -> Result<Array2<f64>> {
    let last = cfg.feature_count();
    if last >= rows.ncols() {
        return Err(Error::InvalidConfig(format!(
            "{} harmonics at d={} need column {last}, only {} available",
            cfg.max_harmonics,
            cfg.d,
            rows.ncols()
        )));
    }
    let factor = cfg.db_factor();
    Ok(rows
        .slice(s![.., 1..=last])
        .mapv(|v| to_decibels(v, cfg.db_floor, factor)))
}

/// Full harmonic feature rows for one multi-channel recording.
pub fn recording_features(
    channels: &[Signal],
    fo: f64,
    cfg: &HarmonicConfig,
) -> Result<Array2<f64>> {
    if fo > cfg.fo_max * (1.0 + 1e-9) {
        return Err(Error::InvalidCondition(format!(
            "operating frequency {fo} Hz exceeds fo_max {} Hz",
            cfg.fo_max
        )));
    }
    let mut fourier = Fourier::new();
    let per_channel = channels
        .iter()
        .map(|ch| {
            let n = window_size(ch.fs(), fo, cfg.d)?;
            segment_spectra(ch.samples(), n, cfg.use_hilbert, cfg.scale, &mut fourier)
        })
        .collect::<Result<Vec<_>>>()?;
    let combined = combine_channels(&per_channel)?;
    let trimmed = trim_features(combined, cfg.n_min()?)?;
    postprocess(&trimmed, cfg)
}
