//! Declarative run configuration (TOML, at most two levels deep).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::BaselineConfig;
use crate::error::{Error, Result};
use crate::features::Condition;
use crate::harmonic::HarmonicConfig;
use crate::signal::SpectrumScale;
use crate::synth::{default_bearings, BearingSpec, ConditionGrid, Physics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "FFT")]
    Fft,
    #[serde(rename = "HFFT")]
    Hfft,
    #[serde(rename = "HAR")]
    Har,
    #[serde(rename = "HARH")]
    Harh,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Fft, Method::Hfft, Method::Har, Method::Harh];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fft => "FFT",
            Method::Hfft => "HFFT",
            Method::Har => "HAR",
            Method::Harh => "HARH",
        }
    }

    /// Harmonic-space methods (adjusted by default).
    pub fn is_harmonic(self) -> bool {
        matches!(self, Method::Har | Method::Harh)
    }

    pub fn uses_hilbert(self) -> bool {
        matches!(self, Method::Hfft | Method::Harh)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidConfig(format!("unknown method {s:?} (FFT, HFFT, HAR, HARH)"))
            })
    }
}

/// Accelerometers whose spectra are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChannelSet {
    A1,
    A2,
    #[serde(rename = "A1+A2")]
    Both,
}

impl ChannelSet {
    pub const ALL: [ChannelSet; 3] = [ChannelSet::A1, ChannelSet::A2, ChannelSet::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelSet::A1 => "A1",
            ChannelSet::A2 => "A2",
            ChannelSet::Both => "A1+A2",
        }
    }

    /// Zero-based channel indices in a recording.
    pub fn indices(self) -> &'static [usize] {
        match self {
            ChannelSet::A1 => &[0],
            ChannelSet::A2 => &[1],
            ChannelSet::Both => &[0, 1],
        }
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelSet::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidConfig(format!("unknown channel set {s:?} (A1, A2, A1+A2)"))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub out: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarmonicSection {
    pub d: usize,
    pub fo_max_hz: f64,
    pub max_harmonics: usize,
    pub db_floor: f64,
    pub spectrum: SpectrumScale,
}

impl Default for HarmonicSection {
    fn default() -> Self {
        let h = HarmonicConfig::default();
        Self {
            d: h.d,
            fo_max_hz: h.fo_max,
            max_harmonics: h.max_harmonics,
            db_floor: h.db_floor,
            spectrum: h.scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub window: usize,
    pub lowpass_hz: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let b = BaselineConfig::default();
        Self {
            window: b.window,
            lowpass_hz: b.lowpass_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    /// Set to 0 to skip the zero-phase low-pass.
    pub cutoff_hz: f64,
    pub order: usize,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        Self {
            cutoff_hz: 6000.0,
            order: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub pca_components: usize,
    /// `[rpm, Nm]` pairs held out from training.
    pub test_conditions: Vec<[f64; 2]>,
    /// Overrides the per-method default (harmonic methods adjust).
    pub adjust: Option<bool>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            pca_components: 2,
            test_conditions: vec![[2000.0, 5.0], [3000.0, 5.0], [4000.0, 5.0]],
            adjust: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub fs: f64,
    pub duration_s: f64,
    pub channels: usize,
    pub runs_per_cell: usize,
    /// Defect impact amplitude relative to the shaft fundamental.
    pub severity: f64,
    pub snr_db: f64,
    /// Random resonance excitation RMS relative to the fundamental.
    pub resonance_noise: f64,
    /// Shaft-harmonic gain `1 + trend[0] fo + trend[1] to + trend[2] fo^2`.
    pub trend: [f64; 3],
    /// `[rpm, Nm]` grid cells.
    pub cells: Vec<[f64; 2]>,
    /// Overrides the default six bearings when non-empty.
    pub bearings: Vec<BearingSpec>,
}

impl Default for SynthSection {
    fn default() -> Self {
        let grid = ConditionGrid::fifteen_cells();
        let physics = Physics::default();
        Self {
            fs: grid.fs,
            duration_s: grid.duration_s,
            channels: grid.channels,
            runs_per_cell: 1,
            severity: crate::synth::DEFAULT_SEVERITY,
            snr_db: physics.snr_db,
            resonance_noise: physics.resonance_noise,
            trend: [physics.trend_fo, physics.trend_to, physics.trend_fo2],
            cells: grid
                .cells
                .iter()
                .map(|c| [c.speed_rpm, c.load_nm])
                .collect(),
            bearings: Vec::new(),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub channels: ChannelSet,
    pub seed: u64,
    pub paths: PathsSection,
    pub harmonic: HarmonicSection,
    pub baseline: BaselineSection,
    pub preprocess: PreprocessSection,
    pub eval: EvalSection,
    pub synth: SynthSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Harh,
            channels: ChannelSet::Both,
            seed: 2024,
            paths: PathsSection::default(),
            harmonic: HarmonicSection::default(),
            baseline: BaselineSection::default(),
            preprocess: PreprocessSection::default(),
            eval: EvalSection::default(),
            synth: SynthSection::default(),
        }
    }
}

fn pairs(list: &[[f64; 2]]) -> Vec<Condition> {
    list.iter()
        .map(|[rpm, nm]| Condition::new(*rpm, *nm))
        .collect()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Hex SHA-256 prefix of the canonical serialisation.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let as_config = |e: Error| match e {
            Error::InvalidConfig(_) => e,
            other => Error::InvalidConfig(other.to_string()),
        };
        self.harmonic_config(self.synth.fs, self.method.uses_hilbert())
            .validate()
            .map_err(as_config)?;
        self.baseline_config(self.method.uses_hilbert())
            .validate(self.synth.fs)
            .map_err(as_config)?;
        if self.eval.pca_components == 0 {
            return Err(Error::InvalidConfig("pca_components must be >= 1".into()));
        }
        if self.eval.test_conditions.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one test condition is required".into(),
            ));
        }
        if self.preprocess.cutoff_hz < 0.0 || self.preprocess.cutoff_hz >= self.synth.fs / 2.0 {
            return Err(Error::InvalidConfig(format!(
                "pre-processing cutoff {} Hz must be below Nyquist",
                self.preprocess.cutoff_hz
            )));
        }
        if self.preprocess.cutoff_hz > 0.0 && self.preprocess.order == 0 {
            return Err(Error::InvalidConfig(
                "pre-processing order must be >= 1".into(),
            ));
        }
        if self
            .channels
            .indices()
            .iter()
            .any(|&c| c >= self.synth.channels)
        {
            return Err(Error::InvalidConfig(format!(
                "channel set {} needs more than {} channels",
                self.channels, self.synth.channels
            )));
        }
        self.grid().validate()?;
        Ok(())
    }

    pub fn harmonic_config(&self, fs: f64, use_hilbert: bool) -> HarmonicConfig {
        HarmonicConfig {
            d: self.harmonic.d,
            fs,
            fo_max: self.harmonic.fo_max_hz,
            use_hilbert,
            max_harmonics: self.harmonic.max_harmonics,
            db_floor: self.harmonic.db_floor,
            scale: self.harmonic.spectrum,
        }
    }

    pub fn baseline_config(&self, use_hilbert: bool) -> BaselineConfig {
        BaselineConfig {
            window: self.baseline.window,
            lowpass_hz: self.baseline.lowpass_hz,
            use_hilbert,
            db_floor: self.harmonic.db_floor,
            scale: self.harmonic.spectrum,
        }
    }

    pub fn test_conditions(&self) -> Vec<Condition> {
        pairs(&self.eval.test_conditions)
    }

    /// Whether the adjustment runs for `method`.
    pub fn adjusts(&self, method: Method) -> bool {
        self.eval.adjust.unwrap_or(method.is_harmonic())
    }

    pub fn grid(&self) -> ConditionGrid {
        ConditionGrid {
            cells: pairs(&self.synth.cells),
            held_out: self.test_conditions(),
            duration_s: self.synth.duration_s,
            fs: self.synth.fs,
            channels: self.synth.channels,
        }
    }

    pub fn bearings(&self) -> Vec<BearingSpec> {
        if self.synth.bearings.is_empty() {
            default_bearings(self.synth.severity)
        } else {
            self.synth.bearings.clone()
        }
    }

    pub fn physics(&self) -> Physics {
        Physics {
            snr_db: self.synth.snr_db,
            resonance_noise: self.synth.resonance_noise,
            trend_fo: self.synth.trend[0],
            trend_to: self.synth.trend[1],
            trend_fo2: self.synth.trend[2],
            ..Physics::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::from_toml(
            "method = \"FFT\"\nchannels = \"A2\"\n[eval]\npca_components = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.method, Method::Fft);
        assert_eq!(cfg.channels, ChannelSet::A2);
        assert_eq!(cfg.eval.pca_components, 3);
        assert_eq!(cfg.baseline.window, 8196);
        assert!(!cfg.adjusts(Method::Fft));
        assert!(cfg.adjusts(Method::Har));
    }

    #[test]
    fn bad_files_are_config_errors() {
        assert!(RunConfig::from_toml("method = \"DCT\"")
            .unwrap_err()
            .is_config_error());
        assert!(RunConfig::from_toml("bogus = 1")
            .unwrap_err()
            .is_config_error());
        assert!(RunConfig::from_toml("[harmonic]\nfo_max_hz = 1000.0")
            .unwrap_err()
            .is_config_error());
        assert!(RunConfig::from_toml("[eval]\ntest_conditions = [[2500.0, 5.0]]").is_err());
    }

    #[test]
    fn names_parse() {
        assert_eq!("harh".parse::<Method>().unwrap(), Method::Harh);
        assert_eq!("A1+A2".parse::<ChannelSet>().unwrap(), ChannelSet::Both);
        assert!("A3".parse::<ChannelSet>().is_err());
    }
}
