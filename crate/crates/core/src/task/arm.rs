//! Center-out-center reach-and-hold in a 1 m³ workspace.
//!
//! A trial holds the endpoint inside the target sphere for a full dwell,
//! then inside the start sphere for another. Leaving a sphere resets its
//! dwell timer. Time only moves when an input arrives, so callers feed
//! [`TaskInput::Clock`] ticks while the endpoint is still.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::targets::{generate_target_set_3d, TargetSpec3D, WORKSPACE_M};
use super::{TaskError, TaskInput};
use crate::signal::EventKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    /// Meters per pixel of pointer delta.
    pub gain_m_per_px: f64,
    pub trials: usize,
    /// Leading trials flagged as practice.
    pub practice_trials: usize,
    pub dwell_ms: u32,
    pub seed: u64,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            gain_m_per_px: 1.0 / 500.0,
            trials: 20,
            practice_trials: 1,
            dwell_ms: 1000,
            seed: 0,
        }
    }
}

impl ArmConfig {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.trials == 0 || self.practice_trials >= self.trials {
            return Err(TaskError::Config(
                "need at least one non-practice trial".into(),
            ));
        }
        if !(self.gain_m_per_px > 0.0) || self.dwell_ms == 0 {
            return Err(TaskError::Config("gain and dwell must be positive".into()));
        }
        Ok(())
    }

    /// Target order: shuffled passes over the 18-sphere layout.
    pub fn schedule(&self) -> Vec<TargetSpec3D> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let layout = generate_target_set_3d();
        let mut out = Vec::with_capacity(self.trials);
        while out.len() < self.trials {
            let mut pass = layout.clone();
            pass.shuffle(&mut rng);
            out.extend(pass);
        }
        out.truncate(self.trials);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sphere {
    Target,
    Start,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    Enter,
    Leave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereEvent {
    pub t_ms: u32,
    pub sphere: Sphere,
    pub crossing: Crossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord3D {
    pub trial: usize,
    pub practice: bool,
    pub target: TargetSpec3D,
    pub onset_t: u32,
    pub sphere_events: Vec<SphereEvent>,
    pub outbound_done_t: u32,
    pub return_done_t: u32,
    pub completion_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    Outbound,
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmView {
    pub trial: usize,
    pub endpoint: [f64; 3],
    pub target: TargetSpec3D,
    pub start: TargetSpec3D,
    pub leg: Leg,
    /// Fraction of the current dwell completed, 0..=1.
    pub dwell_progress: f64,
    pub onset_t: u32,
}

#[derive(Debug, Clone)]
struct Active {
    target: TargetSpec3D,
    onset_t: u32,
    leg: Leg,
    inside_since: Option<u32>,
    events: Vec<SphereEvent>,
    outbound_done_t: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct ArmTask {
    config: ArmConfig,
    schedule: Vec<TargetSpec3D>,
    start_sphere: TargetSpec3D,
    pos: [f64; 3],
    next_trial: usize,
    active: Option<Active>,
    started: bool,
    now: u32,
}

impl ArmTask {
    pub fn new(config: ArmConfig) -> Result<Self, TaskError> {
        config.validate()?;
        let start_sphere = TargetSpec3D::start();
        Ok(Self {
            schedule: config.schedule(),
            start_sphere,
            pos: start_sphere.center,
            config,
            next_trial: 0,
            active: None,
            started: false,
            now: 0,
        })
    }

    pub fn config(&self) -> &ArmConfig {
        &self.config
    }

    pub fn endpoint(&self) -> [f64; 3] {
        self.pos
    }

    pub fn is_finished(&self) -> bool {
        self.started && self.active.is_none()
    }

    pub fn view(&self) -> Option<ArmView> {
        let a = self.active.as_ref()?;
        let progress = a.inside_since.map_or(0.0, |s| {
            ((self.now - s) as f64 / self.config.dwell_ms as f64).min(1.0)
        });
        Some(ArmView {
            trial: self.next_trial - 1,
            endpoint: self.pos,
            target: a.target,
            start: self.start_sphere,
            leg: a.leg,
            dwell_progress: progress,
            onset_t: a.onset_t,
        })
    }

    /// Whether a clock input at `t` would complete the current dwell.
    pub fn dwell_due(&self, t: u32) -> bool {
        self.active
            .as_ref()
            .and_then(|a| a.inside_since)
            .is_some_and(|s| t >= s + self.config.dwell_ms)
    }

    pub fn start(&mut self, t_ms: u32) -> Result<(), TaskError> {
        if self.started {
            return Err(TaskError::AlreadyStarted);
        }
        self.started = true;
        self.now = t_ms;
        self.open_trial(t_ms);
        Ok(())
    }

    fn open_trial(&mut self, onset_t: u32) {
        if self.next_trial >= self.config.trials {
            self.active = None;
            return;
        }
        let target = self.schedule[self.next_trial];
        self.next_trial += 1;
        let mut a = Active {
            target,
            onset_t,
            leg: Leg::Outbound,
            inside_since: None,
            events: Vec::new(),
            outbound_done_t: None,
        };
        if target.contains(self.pos) {
            a.inside_since = Some(onset_t);
            a.events.push(SphereEvent {
                t_ms: onset_t,
                sphere: Sphere::Target,
                crossing: Crossing::Enter,
            });
        }
        self.active = Some(a);
    }

    fn current_sphere(&self, a: &Active) -> (Sphere, TargetSpec3D) {
        match a.leg {
            Leg::Outbound => (Sphere::Target, a.target),
            Leg::Return => (Sphere::Start, self.start_sphere),
        }
    }

    /// Completes any dwell that has run its full length by time `t`.
    fn settle_dwell(&mut self, t: u32) -> Option<TrialRecord3D> {
        let dwell = self.config.dwell_ms;
        loop {
            let a = self.active.as_mut()?;
            let since = a.inside_since?;
            let done = since + dwell;
            if t < done {
                return None;
            }
            match a.leg {
                Leg::Outbound => {
                    a.outbound_done_t = Some(done);
                    a.leg = Leg::Return;
                    a.inside_since = None;
                    if self.start_sphere.contains(self.pos) {
                        a.inside_since = Some(done);
                    }
                }
                Leg::Return => {
                    let a = self.active.take().expect("active trial");
                    let trial = self.next_trial - 1;
                    let record = TrialRecord3D {
                        trial,
                        practice: trial < self.config.practice_trials,
                        target: a.target,
                        onset_t: a.onset_t,
                        sphere_events: a.events,
                        outbound_done_t: a.outbound_done_t.expect("outbound leg done"),
                        return_done_t: done,
                        completion_time_s: (done - a.onset_t) as f64 / 1000.0,
                    };
                    self.open_trial(done);
                    return Some(record);
                }
            }
        }
    }

    /// At most one trial can complete per input: a fresh trial never starts
    /// inside its target's dwell.
    pub fn step(&mut self, input: &TaskInput) -> Result<Option<TrialRecord3D>, TaskError> {
        if !self.started {
            return Err(TaskError::NotStarted);
        }
        let t = input.t_ms();
        if t < self.now {
            return Err(TaskError::TimeReversed {
                last: self.now,
                got: t,
            });
        }
        if self.active.is_none() {
            return Err(TaskError::Finished);
        }
        self.now = t;
        let completed = self.settle_dwell(t);
        if self.active.is_none() {
            return Ok(completed);
        }

        let gain = self.config.gain_m_per_px;
        let moved = match input {
            TaskInput::Event(ev) => match ev.kind {
                EventKind::PointerDelta { dx, dy } => {
                    self.pos[0] += dx * gain;
                    self.pos[1] += dy * gain;
                    true
                }
                EventKind::ZDelta { dz } => {
                    self.pos[2] += dz;
                    true
                }
                _ => false,
            },
            TaskInput::Clock { .. } => false,
        };
        if moved {
            for c in &mut self.pos {
                *c = c.clamp(0.0, WORKSPACE_M);
            }
            let pos = self.pos;
            let a = self.active.as_ref().expect("active trial");
            let (which, sphere) = self.current_sphere(a);
            let a = self.active.as_mut().expect("active trial");
            let inside = sphere.contains(pos);
            match (inside, a.inside_since) {
                (true, None) => {
                    a.inside_since = Some(t);
                    a.events.push(SphereEvent {
                        t_ms: t,
                        sphere: which,
                        crossing: Crossing::Enter,
                    });
                }
                (false, Some(_)) => {
                    a.inside_since = None;
                    a.events.push(SphereEvent {
                        t_ms: t,
                        sphere: which,
                        crossing: Crossing::Leave,
                    });
                }
                _ => {}
            }
        }
        Ok(completed)
    }
}

/// Mean completion time over the non-practice trials.
pub fn mean_completion_time(
    records: &[TrialRecord3D],
    config: &ArmConfig,
) -> Result<f64, TaskError> {
    if records.len() < config.trials {
        return Err(TaskError::Incomplete {
            expected: config.trials,
            got: records.len(),
        });
    }
    let scored: Vec<f64> = records
        .iter()
        .filter(|r| !r.practice)
        .map(|r| r.completion_time_s)
        .collect();
    if scored.is_empty() {
        return Err(TaskError::Incomplete {
            expected: config.trials,
            got: 0,
        });
    }
    Ok(scored.iter().sum::<f64>() / scored.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ControlEvent;

    fn task() -> ArmTask {
        let mut t = ArmTask::new(ArmConfig {
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        t.start(0).unwrap();
        t
    }

    fn jump(task: &ArmTask, t: u32, to: [f64; 3]) -> Vec<TaskInput> {
        let p = task.endpoint();
        let g = task.config().gain_m_per_px;
        vec![
            TaskInput::Event(ControlEvent::new(
                t,
                EventKind::PointerDelta {
                    dx: (to[0] - p[0]) / g,
                    dy: (to[1] - p[1]) / g,
                },
            )),
            TaskInput::Event(ControlEvent::new(t, EventKind::ZDelta { dz: to[2] - p[2] })),
        ]
    }

    fn goto(task: &mut ArmTask, t: u32, to: [f64; 3]) {
        let inputs = jump(task, t, to);
        feed(task, &inputs);
    }

    fn feed(task: &mut ArmTask, inputs: &[TaskInput]) -> Vec<TrialRecord3D> {
        inputs
            .iter()
            .filter_map(|i| task.step(i).unwrap())
            .collect()
    }

    #[test]
    fn hold_target_then_start() {
        let mut t = task();
        let target = t.view().unwrap().target.center;
        goto(&mut t, 3000, target);
        feed(&mut t, &[TaskInput::Clock { t_ms: 4000 }]);
        assert_eq!(t.view().unwrap().leg, Leg::Return);
        goto(&mut t, 7000, [0.5, 0.5, 0.5]);
        let done = feed(&mut t, &[TaskInput::Clock { t_ms: 8000 }]);
        assert_eq!(done.len(), 1);
        let r = &done[0];
        assert_eq!(r.outbound_done_t, 4000);
        assert_eq!(r.return_done_t, 8000);
        // 6 s of travel plus two 1 s dwells.
        assert_eq!(r.completion_time_s, 8.0);
        assert!(r.practice);
    }

    #[test]
    fn leaving_resets_the_dwell() {
        let mut t = task();
        let target = t.view().unwrap().target.center;
        goto(&mut t, 1000, target);
        feed(&mut t, &[TaskInput::Clock { t_ms: 1900 }]);
        goto(&mut t, 1900, [0.5, 0.5, 0.5]);
        assert_eq!(t.view().unwrap().leg, Leg::Outbound);
        goto(&mut t, 2500, target);
        feed(&mut t, &[TaskInput::Clock { t_ms: 3400 }]);
        assert_eq!(t.view().unwrap().leg, Leg::Outbound);
        feed(&mut t, &[TaskInput::Clock { t_ms: 3500 }]);
        let v = t.view().unwrap();
        assert_eq!(v.leg, Leg::Return);
        assert_eq!(v.dwell_progress, 0.0);
    }

    #[test]
    fn dwell_completes_at_exact_time_even_if_seen_late() {
        let mut t = task();
        let target = t.view().unwrap().target.center;
        goto(&mut t, 500, target);
        // Next input arrives well after the dwell ran out.
        goto(&mut t, 2700, [0.5, 0.5, 0.5]);
        let done = feed(&mut t, &[TaskInput::Clock { t_ms: 3700 }]);
        assert_eq!(done[0].outbound_done_t, 1500);
        assert_eq!(done[0].return_done_t, 3700);
    }

    #[test]
    fn endpoint_clamped_to_cube() {
        let mut t = task();
        feed(
            &mut t,
            &[
                TaskInput::Event(ControlEvent::new(
                    10,
                    EventKind::PointerDelta { dx: 1e5, dy: -1e5 },
                )),
                TaskInput::Event(ControlEvent::new(10, EventKind::ZDelta { dz: 7.0 })),
            ],
        );
        assert_eq!(t.endpoint(), [1.0, 0.0, 1.0]);
    }

    #[test]
    fn mean_excludes_practice() {
        let cfg = ArmConfig::default();
        let rec = |i: usize, s: f64| TrialRecord3D {
            trial: i,
            practice: i == 0,
            target: TargetSpec3D::start(),
            onset_t: 0,
            sphere_events: vec![],
            outbound_done_t: 0,
            return_done_t: 0,
            completion_time_s: s,
        };
        let flat: Vec<_> = (0..20).map(|i| rec(i, 10.0)).collect();
        assert_eq!(mean_completion_time(&flat, &cfg).unwrap(), 10.0);
        let mut slow_first = flat.clone();
        slow_first[0].completion_time_s = 100.0;
        assert_eq!(mean_completion_time(&slow_first, &cfg).unwrap(), 10.0);
        assert!(mean_completion_time(&flat[..12], &cfg).is_err());
    }
}
