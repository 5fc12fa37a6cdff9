//! Deterministic synthetic bearing vibration.
//!
//! Each channel is a sum of shaft harmonics whose amplitude follows a
//! degree-2 trend in speed and load, plus (for faulty bearings) impulse
//! trains at non-integer defect orders exciting a damped structural
//! resonance, plus white Gaussian noise tied to the shaft fundamental.
//! Every random draw comes from a ChaCha stream seeded per recording, so
//! output depends only on `(spec, condition, seed)`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Class, Condition};
use crate::io::{write_manifest, write_recording, ManifestEntry};
use crate::signal::Signal;

/// Outer-race-like defect order (impacts per shaft revolution).
pub const OUTER_RACE_ORDER: f64 = 3.57;
/// Inner-race-like defect order.
pub const INNER_RACE_ORDER: f64 = 5.43;
/// Ball-spin-like defect order.
pub const BALL_ORDER: f64 = 2.32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    /// Impact rate as a multiple of the shaft frequency.
    pub order: f64,
    /// Impact amplitude relative to the shaft fundamental.
    pub severity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BearingSpec {
    pub id: String,
    pub class: Class,
    #[serde(default)]
    pub defects: Vec<Defect>,
    pub resonance_hz: f64,
    pub resonance_q: f64,
}

impl BearingSpec {
    pub fn healthy(id: &str, resonance_hz: f64) -> Self {
        Self {
            id: id.into(),
            class: Class::Healthy,
            defects: Vec::new(),
            resonance_hz,
            resonance_q: 20.0,
        }
    }

    pub fn faulty(id: &str, defects: Vec<Defect>, resonance_hz: f64) -> Self {
        Self {
            id: id.into(),
            class: Class::Faulty,
            defects,
            resonance_hz,
            resonance_q: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class == Class::Healthy && !self.defects.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "healthy bearing {} lists defects",
                self.id
            )));
        }
        for d in &self.defects {
            if !(d.order > 1.0) || !(d.severity >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "bearing {}: defect order must exceed 1 and severity be >= 0",
                    self.id
                )));
            }
        }
        if !(self.resonance_hz > 0.0 && self.resonance_q > 0.5) {
            return Err(Error::InvalidConfig(format!(
                "bearing {}: invalid resonance",
                self.id
            )));
        }
        Ok(())
    }
}

/// Defect severity of the stock faulty bearings.
pub const DEFAULT_SEVERITY: f64 = 10.0;

/// Three healthy and three faulty bearings; the faulty ones combine two
/// defect types each.
pub fn default_bearings(severity: f64) -> Vec<BearingSpec> {
    let d = |order| Defect { order, severity };
    vec![
        BearingSpec::healthy("AM-01", 3000.0),
        BearingSpec::healthy("AM-02", 3200.0),
        BearingSpec::healthy("AM-03", 2900.0),
        BearingSpec::faulty("F3-01", vec![d(OUTER_RACE_ORDER), d(BALL_ORDER)], 3100.0),
        BearingSpec::faulty("F5-01", vec![d(INNER_RACE_ORDER), d(BALL_ORDER)], 2800.0),
        BearingSpec::faulty(
            "F7-01",
            vec![d(INNER_RACE_ORDER), d(OUTER_RACE_ORDER)],
            3300.0,
        ),
    ]
}

/// Operating points recorded for every bearing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionGrid {
    pub cells: Vec<Condition>,
    pub held_out: Vec<Condition>,
    pub duration_s: f64,
    pub fs: f64,
    pub channels: usize,
}

impl ConditionGrid {
    /// Fifteen cells over 1000-6000 RPM and 0-20 Nm with 5 Nm at 2000,
    /// 3000 and 4000 RPM held out.
    pub fn fifteen_cells() -> Self {
        let mut cells = Vec::new();
        for (rpm, loads) in [
            (1000.0, &[0.0, 5.0][..]),
            (2000.0, &[0.0, 5.0, 10.0]),
            (3000.0, &[0.0, 5.0, 10.0, 20.0]),
            (4000.0, &[0.0, 5.0, 10.0]),
            (5000.0, &[0.0, 10.0]),
            (6000.0, &[0.0]),
        ] {
            for &load in loads {
                cells.push(Condition::new(rpm, load));
            }
        }
        Self {
            cells,
            held_out: vec![
                Condition::new(2000.0, 5.0),
                Condition::new(3000.0, 5.0),
                Condition::new(4000.0, 5.0),
            ],
            duration_s: 1.0,
            fs: 48_000.0,
            channels: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidConfig("condition grid is empty".into()));
        }
        if let Some(c) = self
            .cells
            .iter()
            .find(|c| !(c.speed_rpm > 0.0) || c.load_nm < 0.0)
        {
            return Err(Error::InvalidConfig(format!("invalid grid cell {c}")));
        }
        if let Some(c) = self.held_out.iter().find(|c| !self.cells.contains(c)) {
            return Err(Error::InvalidConfig(format!(
                "held-out condition {c} is not a grid cell"
            )));
        }
        if !(self.duration_s > 0.0 && self.fs > 0.0) || self.channels == 0 {
            return Err(Error::InvalidConfig(
                "duration, fs and channels must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration_s * self.fs).round() as usize
    }
}

/// Signal-model parameters shared by every bearing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    /// Number of shaft harmonics.
    pub harmonics: usize,
    /// Fundamental amplitude at zero speed and load.
    pub fundamental: f64,
    /// Harmonic `h` has amplitude `fundamental * rolloff^(h-1)`.
    pub rolloff: f64,
    /// Trend `1 + b_fo*fo + b_to*to + b_fo2*fo^2`, `fo` in Hz, `to` in Nm.
    pub trend_fo: f64,
    pub trend_to: f64,
    pub trend_fo2: f64,
    /// Noise level relative to the fundamental, in dB.
    pub snr_db: f64,
    /// RMS of random (non-periodic) excitation of the bearing's resonance,
    /// relative to the fundamental. Present in every bearing, it follows
    /// the same condition trend as the shaft harmonics.
    pub resonance_noise: f64,
    /// Per-channel gain of the shaft-harmonic and impulse paths.
    pub channel_gain: Vec<f64>,
    pub impulse_gain: Vec<f64>,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            harmonics: 12,
            fundamental: 1.0,
            rolloff: 0.8,
            trend_fo: 0.02,
            trend_to: 0.1,
            trend_fo2: 3e-4,
            snr_db: 20.0,
            resonance_noise: 1.0,
            channel_gain: vec![1.0, 0.7],
            impulse_gain: vec![1.0, 0.5],
        }
    }
}

impl Physics {
    pub fn trend(&self, c: &Condition) -> f64 {
        let fo = c.fo_hz();
        1.0 + self.trend_fo * fo + self.trend_to * c.load_nm + self.trend_fo2 * fo * fo
    }

    fn gain(list: &[f64], ch: usize) -> f64 {
        list.get(ch)
            .copied()
            .unwrap_or_else(|| list.last().copied().unwrap_or(1.0))
    }
}

/// Impact instants (s) of a defect at `order` times the shaft frequency,
/// starting at `phase` (fraction of one impact period).
pub fn impulse_times(order: f64, fo: f64, duration_s: f64, phase: f64) -> Vec<f64> {
    let period = 1.0 / (order * fo);
    let mut times = Vec::new();
    let mut j = 0usize;
    loop {
        let t = (j as f64 + phase) * period;
        if t >= duration_s {
            break;
        }
        times.push(t);
        j += 1;
    }
    times
}

/// Adds a decaying resonance of `amplitude` excited at each of `times`.
fn add_impulse_train(x: &mut [f64], fs: f64, times: &[f64], amplitude: f64, res_hz: f64, q: f64) {
    let omega = 2.0 * PI * res_hz;
    let zeta = 1.0 / (2.0 * q);
    let decay = zeta * omega;
    let omega_d = omega * (1.0 - zeta * zeta).sqrt();
    // Ring until the envelope falls below 1e-4.
    let ring = ((1e4f64).ln() / decay * fs).ceil() as usize;
    for &t0 in times {
        let start = (t0 * fs).ceil() as usize;
        for n in start..(start + ring).min(x.len()) {
            let tau = n as f64 / fs - t0;
            x[n] += amplitude * (-decay * tau).exp() * (omega_d * tau).sin();
        }
    }
}

/// White noise through the two-pole resonator of `add_impulse_train`,
/// scaled to the requested RMS.
fn resonance_noise(
    rng: &mut ChaCha8Rng,
    len: usize,
    fs: f64,
    res_hz: f64,
    q: f64,
    rms: f64,
) -> Vec<f64> {
    let omega = 2.0 * PI * res_hz;
    let zeta = 1.0 / (2.0 * q);
    let r = (-zeta * omega / fs).exp();
    let a1 = 2.0 * r * (omega * (1.0 - zeta * zeta).sqrt() / fs).cos();
    let a2 = -r * r;
    let white = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut y1, mut y2) = (0.0, 0.0);
    let mut y: Vec<f64> = (0..len)
        .map(|_| {
            let v = white.sample(rng) + a1 * y1 + a2 * y2;
            y2 = y1;
            y1 = v;
            v
        })
        .collect();
    let current = (y.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if current > 0.0 {
        y.iter_mut().for_each(|v| *v *= rms / current);
    }
    y
}

/// Multi-channel recording of one bearing at one operating condition.
pub fn generate_recording(
    spec: &BearingSpec,
    condition: &Condition,
    grid: &ConditionGrid,
    physics: &Physics,
    seed: u64,
) -> Result<Vec<Signal>> {
    spec.validate()?;
    let fs = grid.fs;
    let len = grid.samples();
    let fo = condition.fo_hz();
    let trend = physics.trend(condition);
    let noise_sd = physics.fundamental * trend / 2f64.sqrt() / 10f64.powf(physics.snr_db / 20.0);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    // Separate streams: the fault stream never perturbs the others.
    let mut base_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fault_rng = ChaCha8Rng::seed_from_u64(mix(seed, 0xfa17));
    let mut resonance_rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x5e5));

    let mut channels = Vec::with_capacity(grid.channels);
    for ch in 0..grid.channels {
        let gain = Physics::gain(&physics.channel_gain, ch);
        let phases: Vec<f64> = (0..physics.harmonics)
            .map(|_| base_rng.random::<f64>() * 2.0 * PI)
            .collect();
        let mut x: Vec<f64> = (0..len)
            .map(|n| {
                let t = n as f64 / fs;
                let mut v = 0.0;
                let mut amp = physics.fundamental * trend * gain;
                for (h, phase) in phases.iter().enumerate() {
                    v += amp * (2.0 * PI * (h + 1) as f64 * fo * t + phase).cos();
                    amp *= physics.rolloff;
                }
                v
            })
            .collect();
        for v in x.iter_mut() {
            *v += noise.sample(&mut base_rng);
        }
        if physics.resonance_noise > 0.0 {
            let rms = physics.resonance_noise
                * physics.fundamental
                * trend
                * Physics::gain(&physics.impulse_gain, ch);
            let hum = resonance_noise(
                &mut resonance_rng,
                len,
                fs,
                spec.resonance_hz,
                spec.resonance_q,
                rms,
            );
            x.iter_mut().zip(hum).for_each(|(v, h)| *v += h);
        }
        channels.push(x);
    }

    for defect in &spec.defects {
        let phase: f64 = fault_rng.random();
        if defect.severity == 0.0 {
            continue;
        }
        let times = impulse_times(defect.order, fo, grid.duration_s, phase);
        for (ch, x) in channels.iter_mut().enumerate() {
            let amplitude = defect.severity
                * physics.fundamental
                * trend
                * Physics::gain(&physics.impulse_gain, ch);
            add_impulse_train(
                x,
                fs,
                &times,
                amplitude,
                spec.resonance_hz,
                spec.resonance_q,
            );
        }
    }

    channels.into_iter().map(|x| Signal::new(x, fs)).collect()
}

/// SplitMix64 finaliser over `seed ^ salt`.
fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one recording, derived from the master seed and its position in
/// the dataset so that generation order does not matter.
pub fn cell_seed(master: u64, bearing: usize, cell: usize, run: usize) -> u64 {
    mix(
        mix(mix(master, bearing as u64 + 1), cell as u64 + 1),
        run as u64 + 1,
    )
}

pub fn channel_set_label(channels: usize) -> String {
    (1..=channels)
        .map(|c| format!("A{c}"))
        .collect::<Vec<_>>()
        .join("+")
}

/// Writes every (bearing, condition, run) recording under `out` and the
/// manifest at `out/manifest.csv`. Returns the manifest path.
pub fn generate_dataset(
    specs: &[BearingSpec],
    grid: &ConditionGrid,
    physics: &Physics,
    runs_per_cell: usize,
    seed: u64,
    out: &Path,
) -> Result<PathBuf> {
    if specs.is_empty() || runs_per_cell == 0 {
        return Err(Error::InvalidConfig(
            "need at least one bearing and one run per cell".into(),
        ));
    }
    grid.validate()?;
    for s in specs {
        s.validate()?;
    }
    let rec_dir = out.join("recordings");
    std::fs::create_dir_all(&rec_dir).map_err(|e| Error::io(&rec_dir, e))?;

    let jobs: Vec<(usize, usize, usize)> = (0..specs.len())
        .flat_map(|b| {
            (0..grid.cells.len()).flat_map(move |c| (0..runs_per_cell).map(move |r| (b, c, r)))
        })
        .collect();
    let channels = channel_set_label(grid.channels);
    let entries = jobs
        .par_iter()
        .map(|&(b, c, r)| {
            let spec = &specs[b];
            let cond = grid.cells[c];
            let signals = generate_recording(spec, &cond, grid, physics, cell_seed(seed, b, c, r))?;
            let name = format!(
                "{}_{}rpm_{}nm_r{}.f32",
                spec.id, cond.speed_rpm, cond.load_nm, r
            );
            write_recording(&rec_dir.join(&name), &signals)?;
            Ok(ManifestEntry {
                path: PathBuf::from("recordings").join(name),
                bearing_id: spec.id.clone(),
                class: spec.class,
                speed_rpm: cond.speed_rpm,
                load_nm: cond.load_nm,
                run: r as u32,
                channel: channels.clone(),
                held_out: grid.held_out.contains(&cond),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = out.join("manifest.csv");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}
