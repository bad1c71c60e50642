//! Center-out-center reach-and-click.
//!
//! Reaches alternate peripheral → center. Each reach is one trial, ended
//! only by a click inside the visible target. A click elsewhere is logged
//! as a misclick and freezes the pointer until the cord is released; the
//! selection clock keeps running.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::targets::{peripheral_targets, Condition, Screen, TargetSpec2D};
use super::{TaskError, TaskInput};
use crate::signal::EventKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingConfig {
    pub screen: Screen,
    pub runs: usize,
    /// Must be even: half peripheral reaches, half returns.
    pub trials_per_run: usize,
    pub seed: u64,
}

impl Default for PointingConfig {
    fn default() -> Self {
        Self {
            screen: Screen::default(),
            runs: 2,
            trials_per_run: 50,
            seed: 0,
        }
    }
}

impl PointingConfig {
    pub fn total_trials(&self) -> usize {
        self.runs * self.trials_per_run
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if self.runs == 0 || self.trials_per_run == 0 || self.trials_per_run % 2 != 0 {
            return Err(TaskError::Config(
                "trials_per_run must be even and positive".into(),
            ));
        }
        if self.trials_per_run / 2 > 48 {
            return Err(TaskError::Config(
                "a run cannot draw more than 48 peripheral targets without replacement".into(),
            ));
        }
        Ok(())
    }

    /// Peripheral targets for every outbound reach, drawn without
    /// replacement within each run.
    pub fn schedule(&self) -> Vec<TargetSpec2D> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let pool = peripheral_targets();
        let mut out = Vec::with_capacity(self.total_trials() / 2);
        for _ in 0..self.runs {
            let mut run = pool.clone();
            run.shuffle(&mut rng);
            out.extend(run.into_iter().take(self.trials_per_run / 2));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Misclick {
    pub pos: [f64; 2],
    pub t_ms: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t_ms: u32,
    pub pos: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord2D {
    pub trial: usize,
    pub run: usize,
    pub target: TargetSpec2D,
    pub target_pos: [f64; 2],
    /// Nominal cell; a return reach inherits the preceding peripheral
    /// distance and is drawn at that reach's width.
    pub condition: Condition,
    pub start_pos: [f64; 2],
    pub end_pos: [f64; 2],
    pub onset_t: u32,
    pub success_click_t: u32,
    pub misclicks: Vec<Misclick>,
    pub selection_time_s: f64,
    pub path: Vec<PathSample>,
}

impl TrialRecord2D {
    pub fn is_outbound(&self) -> bool {
        !self.target.is_center
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Active {
    target: TargetSpec2D,
    condition: Condition,
    onset_t: u32,
    start_pos: [f64; 2],
    misclicks: Vec<Misclick>,
    path: Vec<PathSample>,
}

/// What an operator sees at any instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingView {
    pub trial: usize,
    pub pointer: [f64; 2],
    pub target: TargetSpec2D,
    pub target_pos: [f64; 2],
    pub condition: Condition,
    pub onset_t: u32,
    pub halted: bool,
}

#[derive(Debug, Clone)]
pub struct PointingTask {
    config: PointingConfig,
    schedule: Vec<TargetSpec2D>,
    pos: [f64; 2],
    halted: bool,
    next_trial: usize,
    active: Option<Active>,
    last_t: Option<u32>,
    started: bool,
}

impl PointingTask {
    pub fn new(config: PointingConfig) -> Result<Self, TaskError> {
        config.validate()?;
        Ok(Self {
            schedule: config.schedule(),
            pos: config.screen.center(),
            config,
            halted: false,
            next_trial: 0,
            active: None,
            last_t: None,
            started: false,
        })
    }

    pub fn config(&self) -> &PointingConfig {
        &self.config
    }

    pub fn pointer(&self) -> [f64; 2] {
        self.pos
    }

    pub fn is_finished(&self) -> bool {
        self.started && self.active.is_none()
    }

    pub fn trials_done(&self) -> usize {
        self.next_trial
            .saturating_sub(usize::from(self.active.is_some()))
    }

    pub fn view(&self) -> Option<PointingView> {
        self.active.as_ref().map(|a| PointingView {
            trial: self.next_trial - 1,
            pointer: self.pos,
            target: a.target,
            target_pos: a.target.position(&self.config.screen),
            condition: a.condition,
            onset_t: a.onset_t,
            halted: self.halted,
        })
    }

    /// Shows the first target at `t_ms`.
    pub fn start(&mut self, t_ms: u32) -> Result<(), TaskError> {
        if self.started {
            return Err(TaskError::AlreadyStarted);
        }
        self.started = true;
        self.last_t = Some(t_ms);
        self.open_trial(t_ms);
        Ok(())
    }

    fn open_trial(&mut self, onset_t: u32) {
        let i = self.next_trial;
        if i >= self.config.total_trials() {
            self.active = None;
            return;
        }
        let peripheral = self.schedule[i / 2];
        let condition = Condition {
            distance: peripheral.distance,
            width: peripheral.width,
        };
        let target = if i % 2 == 0 {
            peripheral
        } else {
            TargetSpec2D::center_target(peripheral.width)
        };
        self.next_trial += 1;
        self.active = Some(Active {
            target,
            condition,
            onset_t,
            start_pos: self.pos,
            misclicks: Vec::new(),
            path: vec![PathSample {
                t_ms: onset_t,
                pos: self.pos,
            }],
        });
    }

    pub fn step(&mut self, input: &TaskInput) -> Result<Option<TrialRecord2D>, TaskError> {
        if !self.started {
            return Err(TaskError::NotStarted);
        }
        let t = input.t_ms();
        if let Some(last) = self.last_t {
            if t < last {
                return Err(TaskError::TimeReversed { last, got: t });
            }
        }
        self.last_t = Some(t);
        let screen = self.config.screen;
        let Some(active) = self.active.as_mut() else {
            return Err(TaskError::Finished);
        };
        let TaskInput::Event(ev) = input else {
            return Ok(None);
        };
        match ev.kind {
            EventKind::PointerDelta { dx, dy } if !self.halted => {
                self.pos = screen.clamp([self.pos[0] + dx, self.pos[1] + dy]);
                active.path.push(PathSample {
                    t_ms: t,
                    pos: self.pos,
                });
            }
            EventKind::ClickPress => {
                if active.target.contains(&screen, self.pos) {
                    let a = self.active.take().expect("active trial");
                    let trial = self.next_trial - 1;
                    let record = TrialRecord2D {
                        trial,
                        run: trial / self.config.trials_per_run,
                        target: a.target,
                        target_pos: a.target.position(&screen),
                        condition: a.condition,
                        start_pos: a.start_pos,
                        end_pos: self.pos,
                        onset_t: a.onset_t,
                        success_click_t: t,
                        misclicks: a.misclicks,
                        selection_time_s: (t - a.onset_t) as f64 / 1000.0,
                        path: a.path,
                    };
                    // The press that selected the target is still held.
                    self.halted = false;
                    self.open_trial(t);
                    return Ok(Some(record));
                }
                active.misclicks.push(Misclick {
                    pos: self.pos,
                    t_ms: t,
                });
                self.halted = true;
            }
            EventKind::ClickRelease => self.halted = false,
            _ => {}
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ControlEvent;

    fn ev(t: u32, kind: EventKind) -> TaskInput {
        TaskInput::Event(ControlEvent::new(t, kind))
    }

    fn move_to(task: &PointingTask, t: u32, p: [f64; 2]) -> TaskInput {
        let cur = task.pointer();
        ev(
            t,
            EventKind::PointerDelta {
                dx: p[0] - cur[0],
                dy: p[1] - cur[1],
            },
        )
    }

    fn task() -> PointingTask {
        let mut t = PointingTask::new(PointingConfig {
            seed: 5,
            ..Default::default()
        })
        .unwrap();
        t.start(1000).unwrap();
        t
    }

    #[test]
    fn event_before_start_rejected() {
        let mut t = PointingTask::new(PointingConfig::default()).unwrap();
        assert_eq!(
            t.step(&ev(0, EventKind::ClickPress)),
            Err(TaskError::NotStarted)
        );
    }

    #[test]
    fn clean_hit() {
        let mut t = task();
        let goal = t.view().unwrap().target_pos;
        assert!(t.step(&move_to(&t, 1500, goal)).unwrap().is_none());
        let rec = t.step(&ev(2250, EventKind::ClickPress)).unwrap().unwrap();
        assert!(rec.misclicks.is_empty());
        assert_eq!(rec.selection_time_s, 1.25);
        assert_eq!(rec.end_pos, goal);
        assert!(rec.is_outbound());
        // Next reach is back to the center, same width and distance cell.
        let v = t.view().unwrap();
        assert!(v.target.is_center);
        assert_eq!(v.condition, rec.condition);
        assert_eq!(v.target.width, rec.target.width);
    }

    #[test]
    fn rim_click_is_a_misclick() {
        let mut t = task();
        let v = t.view().unwrap();
        let r = v.target.width / 2.0;
        let goal = [v.target_pos[0] + r + 1.0, v.target_pos[1]];
        t.step(&move_to(&t, 1100, goal)).unwrap();
        assert!(t.step(&ev(1200, EventKind::ClickPress)).unwrap().is_none());
        assert!(t.view().unwrap().halted);
    }

    #[test]
    fn misclicks_halt_and_keep_the_clock() {
        // Hand-built tape; timeline: onset 1000, misclick 1400 (release 1500),
        // ignored motion at 1450, misclick 1800 (release 1900), hit 2600.
        let mut t = task();
        let v = t.view().unwrap();
        let off = [v.target_pos[0] + v.target.width, v.target_pos[1]];
        t.step(&move_to(&t, 1300, off)).unwrap();
        t.step(&ev(1400, EventKind::ClickPress)).unwrap();
        t.step(&ev(
            1450,
            EventKind::PointerDelta {
                dx: -500.0,
                dy: 0.0,
            },
        ))
        .unwrap();
        assert_eq!(
            t.pointer(),
            off,
            "pointer frozen while the misclick is held"
        );
        t.step(&ev(1500, EventKind::ClickRelease)).unwrap();
        t.step(&ev(1800, EventKind::ClickPress)).unwrap();
        t.step(&ev(1900, EventKind::ClickRelease)).unwrap();
        t.step(&move_to(&t, 2300, v.target_pos)).unwrap();
        let rec = t.step(&ev(2600, EventKind::ClickPress)).unwrap().unwrap();
        assert_eq!(rec.misclicks.len(), 2);
        assert_eq!(rec.misclicks[0].t_ms, 1400);
        assert_eq!(rec.selection_time_s, 1.6);
    }

    #[test]
    fn pointer_clamped_to_screen() {
        let mut t = task();
        t.step(&ev(1100, EventKind::PointerDelta { dx: -1e6, dy: 1e6 }))
            .unwrap();
        assert_eq!(t.pointer(), [0.0, 800.0]);
    }

    #[test]
    fn schedule_without_replacement_per_run() {
        let cfg = PointingConfig {
            seed: 99,
            ..Default::default()
        };
        let s = cfg.schedule();
        assert_eq!(s.len(), 50);
        for run in s.chunks(25) {
            for (i, a) in run.iter().enumerate() {
                assert!(!run[i + 1..].contains(a));
            }
        }
    }

    #[test]
    fn full_session_alternates_and_finishes() {
        let mut t = task();
        let mut now = 1000;
        let mut records = Vec::new();
        while let Some(v) = t.view() {
            now += 700;
            t.step(&move_to(&t, now, v.target_pos)).unwrap();
            now += 100;
            records.extend(t.step(&ev(now, EventKind::ClickPress)).unwrap());
            now += 50;
            if !t.is_finished() {
                t.step(&ev(now, EventKind::ClickRelease)).unwrap();
            }
        }
        assert_eq!(records.len(), 100);
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.is_outbound(), i % 2 == 0);
            assert_eq!(r.run, i / 50);
            assert!(r.selection_time_s > 0.0);
        }
        assert_eq!(
            t.step(&ev(now + 1, EventKind::ClickPress)),
            Err(TaskError::Finished)
        );
    }
}
