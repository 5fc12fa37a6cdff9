//! Zero-phase Butterworth low-pass used to pre-process every recording.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Second-order section in transposed direct form II; `a0` is implied 1.
/// First-order sections carry `b2 = a2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Section {
    b: [f64; 3],
    a: [f64; 2],
}

impl Section {
    /// State that makes a constant input `u` pass through without transient.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let gain = self.b.iter().sum::<f64>() / (1.0 + self.a[0] + self.a[1]);
        let y = gain * u;
        let s2 = self.b[2] * u - self.a[1] * y;
        let s1 = self.b[1] * u - self.a[0] * y + s2;
        [s1, s2]
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / (1.0 + self.a[0] + self.a[1])
    }
}

/// Digital Butterworth low-pass designed by the bilinear transform with
/// pre-warping, stored as cascaded sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    sections: Vec<Section>,
    order: usize,
}

impl Butterworth {
    pub fn lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("filter order must be >= 1".into()));
        }
        if !(fs > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
                fs / 2.0
            )));
        }
        let k = (PI * cutoff_hz / fs).tan();
        let k2 = k * k;
        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for i in 1..=order / 2 {
            // s^2 + 2 sin(theta) s + 1 for each conjugate pole pair
            let damp = 2.0 * (PI * (2 * i - 1) as f64 / (2 * order) as f64).sin();
            let norm = 1.0 / (1.0 + damp * k + k2);
            let b0 = k2 * norm;
            sections.push(Section {
                b: [b0, 2.0 * b0, b0],
                a: [2.0 * (k2 - 1.0) * norm, (1.0 - damp * k + k2) * norm],
            });
        }
        if order % 2 == 1 {
            let norm = 1.0 / (1.0 + k);
            let b0 = k * norm;
            sections.push(Section {
                b: [b0, b0, 0.0],
                a: [(k - 1.0) * norm, 0.0],
            });
        }
        Ok(Self { sections, order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Causal filtering with each section started in the steady state of a
    /// constant input equal to `x[0]`.
    fn filter_steady(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let mut u = x0;
        for s in &self.sections {
            let [mut z1, mut z2] = s.steady_state(u);
            u *= s.dc_gain();
            for v in x.iter_mut() {
                let input = *v;
                let y = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * y + z2;
                z2 = s.b[2] * input - s.a[1] * y;
                *v = y;
            }
        }
    }

    /// Samples until the slowest pole has decayed by 1e-9.
    fn settling_samples(&self) -> usize {
        let radius = self
            .sections
            .iter()
            .map(|s| {
                if s.a[1] != 0.0 {
                    s.a[1].abs().sqrt()
                } else {
                    s.a[0].abs()
                }
            })
            .fold(0.0f64, f64::max);
        if radius <= 0.0 || radius >= 1.0 {
            return 0;
        }
        ((1e-9f64).ln() / radius.ln()).ceil() as usize
    }

    /// Forward-backward filtering. Both ends are padded by mirroring the
    /// signal about its end samples, long enough for the start-up transient
    /// to die out before reaching the data.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        if n <= 3 * self.order {
            return Err(Error::InvalidArgument(format!(
                "zero-phase filtering of order {} needs more than {} samples, got {n}",
                self.order,
                3 * self.order
            )));
        }
        let pad = (3 * (2 * self.sections.len() + 1))
            .max(self.settling_samples())
            .min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| x[n - 1 - i]));

        self.filter_steady(&mut ext);
        ext.reverse();
        self.filter_steady(&mut ext);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

/// Zero-phase low-pass: the effective magnitude response is the square of
/// an order-`order` Butterworth.
pub fn butterworth_zero_phase_lowpass(x: &Signal, cutoff_hz: f64, order: usize) -> Result<Signal> {
    let filter = Butterworth::lowpass(order, cutoff_hz, x.fs())?;
    Signal::new(filter.filtfilt(x.samples())?, x.fs())
}
