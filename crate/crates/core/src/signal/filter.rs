//! One-euro adaptive low-pass smoothing.
//!
//! Each channel runs a first-order low-pass whose cutoff rises with the
//! (separately smoothed) speed of the signal: `cutoff = min_cutoff +
//! beta * |dx/dt|`. Slow drifts are heavily smoothed; fast deliberate
//! movements pass with little lag.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::wire::SensorFrame;

/// Cutoff of the derivative smoother, Hz.
pub const DERIVATIVE_CUTOFF_HZ: f64 = 1.0;

#[inline]
fn smoothing_factor(cutoff_hz: f64, dt_s: f64) -> f64 {
    let tau = 1.0 / (2.0 * PI * cutoff_hz);
    1.0 / (1.0 + tau / dt_s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneEuro {
    min_cutoff: f64,
    beta: f64,
    state: Option<(f64, f64)>, // (value, derivative)
}

impl OneEuro {
    pub fn new(min_cutoff: f64, beta: f64) -> Self {
        Self {
            min_cutoff,
            beta,
            state: None,
        }
    }

    pub fn set_params(&mut self, min_cutoff: f64, beta: f64) {
        self.min_cutoff = min_cutoff;
        self.beta = beta;
    }

    pub fn reset(&mut self) {
        self.state = None;
    }

    pub fn value(&self) -> Option<f64> {
        self.state.map(|(x, _)| x)
    }

    /// `dt_s` must be positive.
    pub fn filter(&mut self, x: f64, dt_s: f64) -> f64 {
        let Some((prev, prev_dx)) = self.state else {
            self.state = Some((x, 0.0));
            return x;
        };
        let dx = (x - prev) / dt_s;
        let a_d = smoothing_factor(DERIVATIVE_CUTOFF_HZ, dt_s);
        let edx = prev_dx + a_d * (dx - prev_dx);
        let cutoff = self.min_cutoff + self.beta * edx.abs();
        let a = smoothing_factor(cutoff, dt_s);
        let y = prev + a * (x - prev);
        self.state = Some((y, edx));
        y
    }
}

/// Smoothed view of one [`SensorFrame`]; the button passes through raw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilteredFrame {
    pub t_ms: u32,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub stretch: f64,
    pub button: bool,
}

impl FilteredFrame {
    pub fn from_raw(f: &SensorFrame) -> Self {
        Self {
            t_ms: f.t_ms,
            ax: f.ax as f64,
            ay: f.ay as f64,
            az: f.az as f64,
            stretch: f.stretch as f64,
            button: f.button,
        }
    }
}

/// Per-channel one-euro bank for the four analog channels.
#[derive(Debug, Clone)]
pub struct Smoother {
    channels: [OneEuro; 4],
    last_t: Option<u32>,
    dropped: u64,
}

impl Smoother {
    pub fn new(min_cutoff: f64, beta: f64) -> Self {
        Self {
            channels: [OneEuro::new(min_cutoff, beta); 4],
            last_t: None,
            dropped: 0,
        }
    }

    /// Parameters change without resetting filter memory.
    pub fn set_params(&mut self, min_cutoff: f64, beta: f64) {
        for c in &mut self.channels {
            c.set_params(min_cutoff, beta);
        }
    }

    /// Frames whose timestamp did not advance.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Returns the filtered frame and the time step since the previous
    /// accepted frame (zero for the first). `None` when the frame's clock
    /// does not move forward; such frames are dropped and counted.
    pub fn smooth(&mut self, frame: &SensorFrame) -> Option<(FilteredFrame, f64)> {
        let dt_s = match self.last_t {
            Some(prev) if frame.t_ms <= prev => {
                self.dropped += 1;
                return None;
            }
            Some(prev) => (frame.t_ms - prev) as f64 / 1000.0,
            None => 0.0,
        };
        self.last_t = Some(frame.t_ms);
        let raw = FilteredFrame::from_raw(frame);
        // The first sample only seeds the filters; its step is irrelevant.
        let step = if dt_s > 0.0 { dt_s } else { 1.0 };
        let [cx, cy, cz, cs] = &mut self.channels;
        let out = FilteredFrame {
            ax: cx.filter(raw.ax, step),
            ay: cy.filter(raw.ay, step),
            az: cz.filter(raw.az, step),
            stretch: cs.filter(raw.stretch, step),
            ..raw
        };
        Some((out, dt_s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(filter: &mut OneEuro, xs: impl IntoIterator<Item = f64>, dt: f64) -> Vec<f64> {
        xs.into_iter().map(|x| filter.filter(x, dt)).collect()
    }

    #[test]
    fn constant_input_converges() {
        let mut f = OneEuro::new(1.0, 0.0);
        f.filter(0.0, 0.01);
        let ys = run(&mut f, std::iter::repeat_n(250.0, 100), 0.01);
        let last = *ys.last().unwrap();
        assert!((last - 250.0).abs() <= 0.01 * 250.0, "{last}");
    }

    #[test]
    fn step_is_monotone_without_overshoot() {
        for beta in [0.0, 0.01, 1.0] {
            let mut f = OneEuro::new(1.0, beta);
            f.filter(0.0, 0.01);
            let ys = run(&mut f, std::iter::repeat_n(800.0, 300), 0.01);
            for w in ys.windows(2) {
                assert!(w[1] >= w[0]);
            }
            assert!(ys.iter().all(|&y| y <= 800.0));
        }
    }

    #[test]
    fn beta_reduces_lag() {
        let mut slow = OneEuro::new(1.0, 0.0);
        let mut fast = OneEuro::new(1.0, 0.05);
        slow.filter(0.0, 0.01);
        fast.filter(0.0, 0.01);
        let s = run(&mut slow, std::iter::repeat_n(800.0, 5), 0.01);
        let q = run(&mut fast, std::iter::repeat_n(800.0, 5), 0.01);
        assert!(q[4] > s[4]);
    }

    // Amplitude of a steady-state response, measured over the last `n` samples.
    fn amplitude(ys: &[f64], n: usize) -> f64 {
        let tail = &ys[ys.len() - n..];
        let max = tail.iter().cloned().fold(f64::MIN, f64::max);
        let min = tail.iter().cloned().fold(f64::MAX, f64::min);
        (max - min) / 2.0
    }

    #[test]
    fn high_frequency_attenuated_far_more_than_low() {
        let dt = 0.001;
        let n = 20_000;
        let sine = |hz: f64| (0..n).map(move |i| (2.0 * PI * hz * i as f64 * dt).sin());

        // Direct-form reference: y[k] = y[k-1] + a (x[k] - y[k-1]) with a fixed
        // cutoff, written independently of `OneEuro`.
        let reference = |hz: f64| {
            let tau = 1.0 / (2.0 * PI * 1.0);
            let a = dt / (dt + tau);
            let mut y = 0.0;
            sine(hz)
                .map(|x| {
                    y = y + a * (x - y);
                    y
                })
                .collect::<Vec<_>>()
        };

        let mut lo = OneEuro::new(1.0, 0.0);
        let mut hi = OneEuro::new(1.0, 0.0);
        let y_lo = run(&mut lo, sine(0.5), dt);
        let y_hi = run(&mut hi, sine(20.0), dt);
        let att_lo = 1.0 / amplitude(&y_lo, 4000);
        let att_hi = 1.0 / amplitude(&y_hi, 4000);
        assert!(att_hi >= 10.0 * att_lo, "lo {att_lo} hi {att_hi}");

        let r_lo = amplitude(&reference(0.5), 4000);
        let r_hi = amplitude(&reference(20.0), 4000);
        assert!((1.0 / att_lo - r_lo).abs() < 1e-3);
        assert!((1.0 / att_hi - r_hi).abs() < 1e-3);
    }

    #[test]
    fn non_monotone_frames_dropped() {
        let mut s = Smoother::new(1.0, 0.0);
        let f = |t| SensorFrame {
            t_ms: t,
            ..Default::default()
        };
        assert!(s.smooth(&f(10)).is_some());
        assert!(s.smooth(&f(20)).is_some());
        assert!(s.smooth(&f(15)).is_none());
        assert!(s.smooth(&f(20)).is_none());
        let (_, dt) = s.smooth(&f(30)).unwrap();
        assert_eq!(dt, 0.01);
        assert_eq!(s.dropped(), 2);
    }
}
