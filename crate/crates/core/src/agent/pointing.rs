use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::scatter::RadialLadder;
use super::{AgentError, AgentParams, MIN_TRIAL_S};
use crate::signal::{ControlEvent, EventKind};
use crate::task::{PointingView, TaskInput};

const RELEASE_LAG_MS: u32 = 50;
const MOVE_STEPS: usize = 10;
const SETTLE_MS: u32 = 50;
const MISCLICK_HOLD_MS: u32 = 150;
/// Endpoints stay this far inside the rim, px.
const RIM_MARGIN: f64 = 0.5;
/// Misclicks land at least this far outside the rim, px.
const MISS_CLEARANCE: f64 = 2.0;

/// Event-level pointing agent: one tape per trial.
#[derive(Debug, Clone)]
pub struct PointingAgent {
    params: AgentParams,
    rng: ChaCha8Rng,
    ladder: RadialLadder,
    holding_click: bool,
}

impl PointingAgent {
    pub fn new(params: AgentParams) -> Result<Self, AgentError> {
        params.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            params,
            ladder: RadialLadder::new(),
            holding_click: false,
        })
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    /// Inputs for the trial shown in `view`, ending with the in-target
    /// click. Per-trial draw order: time noise, stall, misclick, endpoint.
    pub fn act(&mut self, view: &PointingView) -> Vec<TaskInput> {
        let p = self.params;
        let d = view.condition.distance;
        let w = view.target.width;

        let z: f64 = self.rng.sample(StandardNormal);
        let mut t_s = p.mean_time(d, w) * (1.0 + p.time_noise * z);
        let stall_u: f64 = self.rng.random();
        if let Some(stall) = p.stall {
            let id = (d / w + 1.0).log2();
            if stall_u < (stall.rate_per_bit2 * id * id).min(1.0) {
                t_s += Exp::new(1.0 / stall.mean_s)
                    .expect("positive rate")
                    .sample(&mut self.rng);
            }
        }
        let t_s = t_s.max(MIN_TRIAL_S);
        let misclick = self.rng.random::<f64>() < p.misclick_rate;
        let cell = (d.to_bits(), w.to_bits());
        let off = self.ladder.next_offset(
            &mut self.rng,
            cell,
            p.endpoint_sigma_ratio * w,
            w / 2.0 - RIM_MARGIN,
        );

        let t0 = view.onset_t;
        let mut total_ms = (t_s * 1000.0).round() as u32;
        if misclick {
            total_ms += (p.misclick_penalty_s * 1000.0).round() as u32;
        }
        let t_click = t0 + total_ms;
        let goal = [view.target_pos[0] + off[0], view.target_pos[1] + off[1]];
        let start = view.pointer;

        let mut tape = Vec::with_capacity(2 * MOVE_STEPS + 6);
        let ev = |t: u32, kind: EventKind| TaskInput::Event(ControlEvent::new(t, kind));
        if self.holding_click {
            tape.push(ev(t0 + RELEASE_LAG_MS, EventKind::ClickRelease));
        }
        let move_start = t0 + (total_ms / 5).max(2 * RELEASE_LAG_MS);
        let move_end = t_click - SETTLE_MS;

        let push_moves =
            |tape: &mut Vec<TaskInput>, from: [f64; 2], to: [f64; 2], t_a: u32, t_b: u32| {
                let dx = (to[0] - from[0]) / MOVE_STEPS as f64;
                let dy = (to[1] - from[1]) / MOVE_STEPS as f64;
                for k in 1..=MOVE_STEPS {
                    let t = t_a + ((t_b - t_a) as u64 * k as u64 / MOVE_STEPS as u64) as u32;
                    tape.push(ev(t, EventKind::PointerDelta { dx, dy }));
                }
            };

        if misclick {
            // Stop short, 60% of the way, and click there; never inside the
            // target, which a short reach would otherwise allow.
            let mut miss = [
                start[0] + 0.6 * (goal[0] - start[0]),
                start[1] + 0.6 * (goal[1] - start[1]),
            ];
            let c = view.target_pos;
            let clear = w / 2.0 + MISS_CLEARANCE;
            if (miss[0] - c[0]).hypot(miss[1] - c[1]) <= clear {
                let (ux, uy) = (start[0] - c[0], start[1] - c[1]);
                let len = ux.hypot(uy);
                miss = [c[0] + ux / len * clear, c[1] + uy / len * clear];
            }
            let span = move_end - move_start;
            let t_miss = move_start + span / 3;
            push_moves(&mut tape, start, miss, move_start, t_miss);
            tape.push(ev(t_miss, EventKind::ClickPress));
            tape.push(ev(t_miss + MISCLICK_HOLD_MS, EventKind::ClickRelease));
            push_moves(&mut tape, miss, goal, t_miss + MISCLICK_HOLD_MS, move_end);
        } else {
            push_moves(&mut tape, start, goal, move_start, move_end);
        }
        tape.push(ev(t_click, EventKind::ClickPress));
        self.holding_click = true;
        tape
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{PointingConfig, PointingTask};

    fn run(params: AgentParams, trials: usize) -> Vec<crate::task::TrialRecord2D> {
        let mut task = PointingTask::new(PointingConfig {
            seed: params.seed,
            ..Default::default()
        })
        .unwrap();
        task.start(0).unwrap();
        let mut agent = PointingAgent::new(params).unwrap();
        let mut out = Vec::new();
        while out.len() < trials {
            let view = task.view().unwrap();
            for input in agent.act(&view) {
                if let Some(r) = task.step(&input).unwrap() {
                    out.push(r);
                }
            }
        }
        out
    }

    #[test]
    fn zero_scatter_hits_centers_on_schedule() {
        let params = AgentParams {
            endpoint_sigma_ratio: 0.0,
            time_model: super::super::TimeModel::Nominal,
            time_noise: 0.0,
            ..Default::default()
        };
        for r in run(params, 20) {
            assert!((r.end_pos[0] - r.target_pos[0]).abs() < 1e-9);
            assert!((r.end_pos[1] - r.target_pos[1]).abs() < 1e-9);
            let expect = params.mean_time(r.condition.distance, r.target.width);
            assert!((r.selection_time_s - expect).abs() <= 0.0005 + 1e-12);
            assert!(r.misclicks.is_empty());
        }
    }

    #[test]
    fn misclicks_add_penalty_not_termination() {
        let params = AgentParams {
            misclick_rate: 0.5,
            seed: 4,
            ..Default::default()
        };
        let rs = run(params, 100);
        let missed = rs.iter().filter(|r| !r.misclicks.is_empty()).count();
        assert!((30..=70).contains(&missed), "{missed}");
        assert!(rs.iter().all(|r| r.misclicks.len() <= 1));
    }

    #[test]
    fn same_seed_same_tape() {
        let mut a = PointingAgent::new(AgentParams::default()).unwrap();
        let mut b = PointingAgent::new(AgentParams::default()).unwrap();
        let mut task = PointingTask::new(PointingConfig::default()).unwrap();
        task.start(0).unwrap();
        let v = task.view().unwrap();
        assert_eq!(a.act(&v), b.act(&v));
    }
}
