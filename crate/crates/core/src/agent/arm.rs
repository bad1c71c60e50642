use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::signal::{ControlEvent, EventKind};
use crate::task::{dist3, ArmView, Leg, TaskInput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmAgentParams {
    /// Endpoint speed, m/s. Infinite means each leg is one step.
    pub speed_m_s: f64,
    /// Pause after each trial onset, s.
    pub reaction_s: f64,
    /// Control period, ms.
    pub step_ms: u32,
    /// XY pixel-to-meter gain of the task.
    pub gain_m_per_px: f64,
}

impl Default for ArmAgentParams {
    fn default() -> Self {
        Self {
            speed_m_s: 0.03,
            reaction_s: 0.5,
            step_ms: 20,
            gain_m_per_px: 1.0 / 500.0,
        }
    }
}

/// Closed-loop reach-and-hold agent: straight to the target center, wait
/// out the dwell, straight back, wait again.
#[derive(Debug, Clone)]
pub struct ArmAgent {
    params: ArmAgentParams,
}

impl ArmAgent {
    pub fn new(params: ArmAgentParams) -> Result<Self, AgentError> {
        if !(params.speed_m_s > 0.0)
            || !(params.reaction_s >= 0.0)
            || params.step_ms == 0
            || !(params.gain_m_per_px > 0.0)
        {
            return Err(AgentError::Invalid(
                "arm agent needs positive speed, step and gain".into(),
            ));
        }
        Ok(Self { params })
    }

    /// Next inputs given the current view and task time `now`.
    pub fn act(&mut self, view: &ArmView, now: u32) -> Vec<TaskInput> {
        let p = self.params;
        let react_until = view.onset_t + (p.reaction_s * 1000.0).round() as u32;
        if now < react_until && view.leg == Leg::Outbound {
            return vec![TaskInput::Clock { t_ms: react_until }];
        }
        let t = now + p.step_ms;
        let goal = match view.leg {
            Leg::Outbound => view.target.center,
            Leg::Return => view.start.center,
        };
        let e = view.endpoint;
        let d = dist3(e, goal);
        if d == 0.0 {
            return vec![TaskInput::Clock { t_ms: t }];
        }
        let reach = p.speed_m_s * p.step_ms as f64 / 1000.0;
        let f = if reach >= d { 1.0 } else { reach / d };
        let delta = [
            (goal[0] - e[0]) * f,
            (goal[1] - e[1]) * f,
            (goal[2] - e[2]) * f,
        ];
        // Land exactly on the goal on the final step.
        let delta = if f == 1.0 {
            [goal[0] - e[0], goal[1] - e[1], goal[2] - e[2]]
        } else {
            delta
        };
        vec![
            TaskInput::Event(ControlEvent::new(
                t,
                EventKind::PointerDelta {
                    dx: delta[0] / p.gain_m_per_px,
                    dy: delta[1] / p.gain_m_per_px,
                },
            )),
            TaskInput::Event(ControlEvent::new(t, EventKind::ZDelta { dz: delta[2] })),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{ArmConfig, ArmTask, TrialRecord3D};

    fn session(params: ArmAgentParams) -> Vec<TrialRecord3D> {
        let mut task = ArmTask::new(ArmConfig::default()).unwrap();
        task.start(0).unwrap();
        let mut agent = ArmAgent::new(params).unwrap();
        let mut now = 0;
        let mut out = Vec::new();
        while let Some(view) = task.view() {
            for input in agent.act(&view, now) {
                now = input.t_ms();
                out.extend(task.step(&input).unwrap());
            }
        }
        out
    }

    #[test]
    fn fast_agent_takes_two_dwells_plus_overhead() {
        let params = ArmAgentParams {
            speed_m_s: f64::INFINITY,
            ..Default::default()
        };
        let rs = session(params);
        assert_eq!(rs.len(), 20);
        for r in &rs {
            // Reaction, one step out and one step back.
            assert!(
                (r.completion_time_s - 2.54).abs() < 0.021,
                "{}",
                r.completion_time_s
            );
        }
    }
}
