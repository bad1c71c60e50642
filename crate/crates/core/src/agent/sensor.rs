//! Pointing agent that acts through the sensor: it tilts and stretches,
//! one frame at a time, and watches the task to close the loop.
//!
//! Tilt is all-or-nothing, so moves are planned as bursts of tilted frames.
//! How far a burst of `k` frames carries the pointer once the smoother's
//! lag is included is measured up front by running the real signal chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::scatter::RadialLadder;
use super::{AgentError, AgentParams, MIN_TRIAL_S};
use crate::signal::{ActiveMode, CalibrationProfile, EventKind, SignalChain};
use crate::sim::{GestureScript, Interp, Segment};
use crate::task::PointingView;
use crate::wire::SensorFrame;

const TILT: f64 = 800.0;
const STRETCH_REST: f64 = 300.0;
const STRETCH_PRESS: f64 = 800.0;
const MAX_BURST: usize = 40;
/// Quiet frames required before a correction or a click.
const SETTLE_FRAMES: usize = 12;
const MAX_CORRECTIONS: usize = 6;
const RIM_MARGIN: f64 = 1.0;

fn rest_frame(t_ms: u32) -> SensorFrame {
    SensorFrame {
        seq: 0,
        t_ms,
        ax: 0,
        ay: 0,
        az: 1000,
        stretch: STRETCH_REST as u16,
        button: false,
    }
}

/// Steps of pointer motion produced by `k` tilted frames starting from rest.
fn burst_table(profile: &CalibrationProfile, period_ms: u32) -> Result<Vec<usize>, AgentError> {
    let mut table = vec![0];
    for k in 1..=MAX_BURST {
        let mut chain = SignalChain::new(profile.clone(), ActiveMode::Pointing)
            .map_err(|e| AgentError::Invalid(e.to_string()))?;
        let mut events = Vec::new();
        let mut steps = 0;
        for i in 0..(40 + k + 60) {
            let mut f = rest_frame(i as u32 * period_ms);
            if (40..40 + k).contains(&i) {
                f.ax = TILT as i16;
            }
            events.clear();
            chain.process(&f, &mut events);
            steps += events
                .iter()
                .filter(|e| matches!(e.kind, EventKind::PointerDelta { dx, .. } if dx > 0.0))
                .count();
        }
        table.push(steps);
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Idle,
    Moving,
    Holding,
    Pressing,
}

#[derive(Debug, Clone)]
pub struct SensorPointingAgent {
    params: AgentParams,
    period_ms: u32,
    step_px: f64,
    table: Vec<usize>,
    rng: ChaCha8Rng,
    ladder: RadialLadder,
    frame: u32,
    trial: Option<usize>,
    phase: Phase,
    aim: [f64; 2],
    click_at: u32,
    bursts: [i32; 2],
    last_pointer: [f64; 2],
    quiet: usize,
    corrections: usize,
    recorded: Vec<Segment>,
}

impl SensorPointingAgent {
    pub fn new(
        params: AgentParams,
        profile: &CalibrationProfile,
        rate_hz: u32,
    ) -> Result<Self, AgentError> {
        params.validate()?;
        if rate_hz == 0 || 1000 % rate_hz != 0 {
            return Err(AgentError::Invalid("rate must divide 1000 Hz".into()));
        }
        let period_ms = 1000 / rate_hz;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            params,
            period_ms,
            step_px: profile.speed_xy * period_ms as f64 / 1000.0,
            table: burst_table(profile, period_ms)?,
            ladder: RadialLadder::new(),
            frame: 0,
            trial: None,
            phase: Phase::Idle,
            aim: [0.0; 2],
            click_at: 0,
            bursts: [0; 2],
            last_pointer: [f64::NAN; 2],
            quiet: 0,
            corrections: 0,
            recorded: Vec::new(),
        })
    }

    /// Timestamp of the next frame.
    pub fn next_t_ms(&self) -> u32 {
        (self.frame + 1) * self.period_ms
    }

    /// Everything emitted so far, as a replayable script.
    pub fn script(&self) -> GestureScript {
        GestureScript::new(self.recorded.clone())
    }

    fn burst_for(&self, steps: usize) -> usize {
        (0..self.table.len())
            .min_by_key(|&k| (self.table[k] as i64 - steps as i64).abs())
            .unwrap_or(0)
    }

    fn plan(&mut self, view: &PointingView) {
        let p = self.params;
        let d = view.condition.distance;
        let w = view.target.width;
        let z: f64 = self.rng.sample(StandardNormal);
        let t_s = (p.mean_time(d, w) * (1.0 + p.time_noise * z)).max(MIN_TRIAL_S);
        let off = self.ladder.next_offset(
            &mut self.rng,
            (d.to_bits(), w.to_bits()),
            p.endpoint_sigma_ratio * w,
            w / 2.0 - RIM_MARGIN - self.step_px,
        );
        self.aim = [view.target_pos[0] + off[0], view.target_pos[1] + off[1]];
        self.click_at = view.onset_t + (t_s * 1000.0).round() as u32;
        self.phase = Phase::Moving;
        self.bursts = [0; 2];
        self.quiet = 0;
        self.corrections = 0;
    }

    fn inside(view: &PointingView, p: [f64; 2]) -> bool {
        (p[0] - view.target_pos[0]).hypot(p[1] - view.target_pos[1])
            < view.target.width / 2.0 - RIM_MARGIN
    }

    /// The frame to send next, given what the task shows now.
    pub fn next_frame(&mut self, view: Option<&PointingView>) -> SensorFrame {
        let t = self.next_t_ms();
        let seq = self.frame as u16;
        self.frame += 1;
        let mut f = rest_frame(t);
        f.seq = seq;

        if let Some(v) = view {
            if self.trial != Some(v.trial) {
                self.trial = Some(v.trial);
                self.plan(v);
            }
            if v.pointer == self.last_pointer {
                self.quiet += 1;
            } else {
                self.quiet = 0;
            }
            self.last_pointer = v.pointer;

            let bursting = self.bursts.iter().any(|&b| b != 0);
            if self.phase == Phase::Moving
                && !bursting
                && (self.quiet >= SETTLE_FRAMES || self.corrections == 0)
            {
                let e = [self.aim[0] - v.pointer[0], self.aim[1] - v.pointer[1]];
                let steps = e.map(|x| (x.abs() / self.step_px).round() as usize);
                if steps == [0, 0] || self.corrections >= MAX_CORRECTIONS {
                    self.phase = Phase::Holding;
                } else {
                    for axis in 0..2 {
                        let k = self.burst_for(steps[axis]) as i32;
                        self.bursts[axis] = if e[axis] > 0.0 { k } else { -k };
                    }
                    self.corrections += 1;
                }
            }
            if self.phase == Phase::Holding && self.quiet >= SETTLE_FRAMES {
                if !Self::inside(v, v.pointer) {
                    self.aim = v.target_pos;
                    self.phase = Phase::Moving;
                    self.corrections = 1;
                } else if t >= self.click_at {
                    self.phase = Phase::Pressing;
                }
            }

            for axis in 0..2 {
                let b = &mut self.bursts[axis];
                if *b != 0 {
                    let tilt = (TILT * b.signum() as f64) as i16;
                    if axis == 0 {
                        f.ax = tilt;
                    } else {
                        f.ay = tilt;
                    }
                    *b -= b.signum();
                }
            }
            if self.phase == Phase::Pressing {
                f.stretch = STRETCH_PRESS as u16;
            }
        }

        self.recorded.push(Segment {
            duration_ms: self.period_ms,
            ax: f.ax as f64,
            ay: f.ay as f64,
            az: f.az as f64,
            stretch: f.stretch as f64,
            button: f.button,
            interp: Interp::Hold,
        });
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bursts_grow_monotonically() {
        let t = burst_table(&CalibrationProfile::default(), 10).unwrap();
        assert_eq!(t[0], 0);
        assert!(t[1] >= 1);
        assert!(t.windows(2).all(|w| w[1] >= w[0]));
        // Long bursts move roughly one step per tilted frame plus the lag.
        assert!(t[MAX_BURST] >= MAX_BURST && t[MAX_BURST] <= MAX_BURST + 10);
    }
}
