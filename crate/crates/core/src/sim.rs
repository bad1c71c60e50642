//! Virtual sensor board.
//!
//! A [`GestureScript`] describes what the wearer does, in sensor units, as
//! a list of timed segments. [`synthesize`] samples it at a fixed rate with
//! optional noise, tremor and dropouts; [`stream_over_wire`] encodes the
//! result and can inject byte corruption for decoder fuzzing.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::{encode_frame, SensorFrame, FRAME_LEN, STRETCH_MAX};

pub const MIN_RATE_HZ: f64 = 10.0;
pub const MAX_RATE_HZ: f64 = 1000.0;
pub const DEFAULT_RATE_HZ: f64 = 100.0;
/// Resting vertical acceleration, milli-g.
pub const GRAVITY_MG: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sample rate {0} Hz outside {MIN_RATE_HZ}..={MAX_RATE_HZ}")]
    InvalidRate(f64),
    #[error("segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("script parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    #[default]
    Hold,
    /// Ramp from the previous segment's targets (rest for the first).
    Linear,
}

/// One timed piece of a gesture. Targets are in sensor units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration_ms: u32,
    #[serde(default)]
    pub ax: f64,
    #[serde(default)]
    pub ay: f64,
    #[serde(default = "default_az")]
    pub az: f64,
    #[serde(default)]
    pub stretch: f64,
    #[serde(default)]
    pub button: bool,
    #[serde(default)]
    pub interp: Interp,
}

fn default_az() -> f64 {
    GRAVITY_MG
}

impl Segment {
    pub fn hold(duration_ms: u32, ax: f64, ay: f64, stretch: f64) -> Self {
        Self {
            duration_ms,
            ax,
            ay,
            az: GRAVITY_MG,
            stretch,
            button: false,
            interp: Interp::Hold,
        }
    }

    pub fn ramp(duration_ms: u32, ax: f64, ay: f64, stretch: f64) -> Self {
        Self {
            interp: Interp::Linear,
            ..Self::hold(duration_ms, ax, ay, stretch)
        }
    }

    pub fn with_button(mut self, pressed: bool) -> Self {
        self.button = pressed;
        self
    }
}

/// Script file format: a JSON array of [`Segment`] records. Omitted fields
/// default to `ax = ay = stretch = 0`, `az = 1000`, `button = false`,
/// `interp = "hold"`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GestureScript {
    pub segments: Vec<Segment>,
}

impl GestureScript {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let script: Self = serde_json::from_str(text)?;
        script.validate()?;
        Ok(script)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("segments always serialize")
    }

    pub fn duration_ms(&self) -> u64 {
        self.segments.iter().map(|s| s.duration_ms as u64).sum()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let range = i16::MIN as f64..=i16::MAX as f64;
        for (index, s) in self.segments.iter().enumerate() {
            let bad = |reason: &str| SimError::InvalidSegment {
                index,
                reason: reason.to_string(),
            };
            if s.duration_ms == 0 {
                return Err(bad("duration must be positive"));
            }
            if !(range.contains(&s.ax) && range.contains(&s.ay) && range.contains(&s.az)) {
                return Err(bad("acceleration target outside the i16 milli-g range"));
            }
            if !(0.0..=STRETCH_MAX as f64).contains(&s.stretch) {
                return Err(bad("stretch target outside 0..=1023"));
            }
        }
        Ok(())
    }

    /// Noise-free channel values at `t_ms` (segments cover `(start, end]`).
    pub fn sample(&self, t_ms: f64) -> Option<[f64; 4]> {
        let mut start = 0.0;
        let mut prev = [0.0, 0.0, GRAVITY_MG, 0.0];
        for s in &self.segments {
            let end = start + s.duration_ms as f64;
            let target = [s.ax, s.ay, s.az, s.stretch];
            if t_ms <= end {
                return Some(match s.interp {
                    Interp::Hold => target,
                    Interp::Linear => {
                        let u = ((t_ms - start) / s.duration_ms as f64).clamp(0.0, 1.0);
                        std::array::from_fn(|i| prev[i] + (target[i] - prev[i]) * u)
                    }
                });
            }
            prev = target;
            start = end;
        }
        None
    }

    fn button_at(&self, t_ms: f64) -> bool {
        let mut end = 0.0;
        for s in &self.segments {
            end += s.duration_ms as f64;
            if t_ms <= end {
                return s.button;
            }
        }
        false
    }
}

/// Disturbances layered on top of the script.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Gaussian sigma for ax, ay, az (milli-g) and stretch (counts).
    pub sigma: [f64; 4],
    /// Tremor on ax/ay, milli-g.
    pub tremor_amplitude: f64,
    pub tremor_hz: f64,
    /// Probability that a sampled frame never reaches the host.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none(0)
    }
}

impl NoiseModel {
    pub fn none(seed: u64) -> Self {
        Self {
            sigma: [0.0; 4],
            tremor_amplitude: 0.0,
            tremor_hz: 0.0,
            dropout: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(SimError::InvalidNoise(
                "sigma must be finite and >= 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(SimError::InvalidNoise("dropout must lie in [0, 1)".into()));
        }
        if !(self.tremor_amplitude >= 0.0 && self.tremor_hz >= 0.0) {
            return Err(SimError::InvalidNoise("tremor must be non-negative".into()));
        }
        Ok(())
    }
}

fn check_rate(rate_hz: f64) -> Result<(), SimError> {
    if (MIN_RATE_HZ..=MAX_RATE_HZ).contains(&rate_hz) {
        Ok(())
    } else {
        Err(SimError::InvalidRate(rate_hz))
    }
}

/// Samples the script at `rate_hz`. Frame `i` is stamped at the end of its
/// sample period, `(i + 1) / rate`, so the last frame of each segment
/// carries that segment's target. Sequence numbers count sampled frames,
/// dropped or not.
pub fn synthesize(
    script: &GestureScript,
    noise: &NoiseModel,
    rate_hz: f64,
) -> Result<Vec<SensorFrame>, SimError> {
    check_rate(rate_hz)?;
    script.validate()?;
    noise.validate()?;

    let n = (script.duration_ms() as f64 * rate_hz / 1000.0).round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(n as usize);
    for i in 0..n {
        let t_ms = (i + 1) as f64 * 1000.0 / rate_hz;
        let Some(mut v) = script.sample(t_ms) else {
            break;
        };
        // Draw order is fixed so identical seeds give identical streams.
        let drop = rng.random::<f64>() < noise.dropout;
        for (c, sigma) in noise.sigma.iter().enumerate() {
            let z: f64 = unit.sample(&mut rng);
            v[c] += sigma * z;
        }
        if noise.tremor_amplitude > 0.0 {
            let tremor =
                noise.tremor_amplitude * (2.0 * PI * noise.tremor_hz * t_ms / 1000.0).sin();
            v[0] += tremor;
            v[1] += tremor;
        }
        if drop {
            continue;
        }
        let acc = |x: f64| x.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.push(SensorFrame {
            seq: i as u16,
            t_ms: t_ms.round() as u32,
            ax: acc(v[0]),
            ay: acc(v[1]),
            az: acc(v[2]),
            stretch: v[3].round().clamp(0.0, STRETCH_MAX as f64) as u16,
            button: script.button_at(t_ms),
        });
    }
    Ok(out)
}

/// Byte corruption applied while streaming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    /// Probability that a frame carries one corrupted byte.
    pub rate: f64,
    pub seed: u64,
}

/// Encoded stream plus the ground truth the fuzz harness checks against.
#[derive(Debug, Clone, Default)]
pub struct WireStream {
    pub bytes: Vec<u8>,
    /// Indices (into the input frames) of frames that were corrupted.
    pub corrupted: Vec<usize>,
    /// For each corrupted frame, the byte offset within the frame that was hit.
    pub corrupted_offsets: Vec<usize>,
}

/// Concatenates the encoded frames. With `corruption`, each frame is hit
/// with probability `rate`: one uniformly chosen byte is XORed with a
/// random non-zero mask.
pub fn stream_over_wire(frames: &[SensorFrame], corruption: Option<Corruption>) -> WireStream {
    let mut bytes = Vec::with_capacity(frames.len() * FRAME_LEN);
    let mut corrupted = Vec::new();
    let mut corrupted_offsets = Vec::new();
    let mut rng = corruption.map(|c| (c.rate, ChaCha8Rng::seed_from_u64(c.seed)));
    for (i, f) in frames.iter().enumerate() {
        let Ok(mut rec) = encode_frame(f) else {
            // Frames from `synthesize` are always in range; anything else is skipped.
            continue;
        };
        if let Some((rate, rng)) = rng.as_mut() {
            if rng.random::<f64>() < *rate {
                let at = rng.random_range(0..FRAME_LEN);
                let mask = rng.random_range(1..=255u8);
                rec[at] ^= mask;
                corrupted.push(i);
                corrupted_offsets.push(at);
            }
        }
        bytes.extend_from_slice(&rec);
    }
    WireStream {
        bytes,
        corrupted,
        corrupted_offsets,
    }
}

/// A [`std::io::Read`] over a synthesized stream, for code that consumes a
/// byte source.
pub fn simulator_source(frames: &[SensorFrame]) -> std::io::Cursor<Vec<u8>> {
    std::io::Cursor::new(stream_over_wire(frames, None).bytes)
}
