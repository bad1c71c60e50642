//! Task engines for the 2D pointing and 3D reach-and-hold evaluations.

mod arm;
mod log;
mod pointing;
mod targets;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arm::{
    mean_completion_time, ArmConfig, ArmTask, ArmView, Crossing, Leg, Sphere, SphereEvent,
    TrialRecord3D,
};
pub use log::{
    replay, EndReason, LogError, LogRecord, SessionEnd, SessionHeader, SessionLog,
    SessionLogWriter, TaskSetup, SCHEMA_VERSION,
};
pub use pointing::{
    Misclick, PathSample, PointingConfig, PointingTask, PointingView, TrialRecord2D,
};
pub use targets::{
    dist3, generate_target_set_2d, generate_target_set_3d, peripheral_targets, Condition, Screen,
    TargetSpec2D, TargetSpec3D, ANGLES_DEG, DISTANCES_PX, SPHERE_RADIUS_M, START_CENTER_M,
    WIDTHS_PX, WORKSPACE_M,
};

use crate::signal::ControlEvent;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("input before the task was started")]
    NotStarted,
    #[error("task already started")]
    AlreadyStarted,
    #[error("input after the last trial")]
    Finished,
    #[error("time went backwards: {got} ms after {last} ms")]
    TimeReversed { last: u32, got: u32 },
    #[error("invalid task config: {0}")]
    Config(String),
    #[error("session incomplete: {got} of {expected} trials")]
    Incomplete { expected: usize, got: usize },
}

/// What a task consumes: translated control events, plus bare clock ticks
/// so time-based rules (dwell) can fire while nothing moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskInput {
    Event(ControlEvent),
    Clock { t_ms: u32 },
}

impl TaskInput {
    pub fn t_ms(&self) -> u32 {
        match self {
            TaskInput::Event(e) => e.t_ms,
            TaskInput::Clock { t_ms } => *t_ms,
        }
    }
}

impl From<ControlEvent> for TaskInput {
    fn from(e: ControlEvent) -> Self {
        TaskInput::Event(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialRecord {
    Pointing(TrialRecord2D),
    Arm3d(TrialRecord3D),
}

/// Either task behind one interface.
#[derive(Debug, Clone)]
pub enum Task {
    Pointing(PointingTask),
    Arm3d(ArmTask),
}

impl Task {
    pub fn from_setup(setup: &TaskSetup) -> Result<Option<Self>, TaskError> {
        Ok(match setup {
            TaskSetup::Pointing(c) => Some(Task::Pointing(PointingTask::new(*c)?)),
            TaskSetup::Arm3d(c) => Some(Task::Arm3d(ArmTask::new(*c)?)),
            TaskSetup::CalibrationOnly => None,
        })
    }

    pub fn start(&mut self, t_ms: u32) -> Result<(), TaskError> {
        match self {
            Task::Pointing(t) => t.start(t_ms),
            Task::Arm3d(t) => t.start(t_ms),
        }
    }

    pub fn step(&mut self, input: &TaskInput) -> Result<Option<TrialRecord>, TaskError> {
        Ok(match self {
            Task::Pointing(t) => t.step(input)?.map(TrialRecord::Pointing),
            Task::Arm3d(t) => t.step(input)?.map(TrialRecord::Arm3d),
        })
    }

    pub fn is_finished(&self) -> bool {
        match self {
            Task::Pointing(t) => t.is_finished(),
            Task::Arm3d(t) => t.is_finished(),
        }
    }
}
