//! Core of the chin-operated body-machine interface: the sensor wire
//! format, the signal chain that turns head and lip motion into pointer
//! events, the two evaluation tasks, Fitts' law analytics, a synthetic
//! operator and the session pipeline that ties them together.

// `!(x > 0.0)` is how parameter checks reject NaN along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod analytics;
pub mod session;
pub mod signal;
pub mod sim;
pub mod task;
pub mod wire;

pub use session::{run_session, ClientCommand, LiveMessage, SessionConfig, SessionSummary, Source};
pub use signal::{
    ActiveMode, CalibrationProfile, ControlEvent, EventKind, ProfilePatch, SignalChain,
};
pub use task::{SessionLog, TaskInput, TrialRecord2D, TrialRecord3D};
pub use wire::{SensorFrame, StreamDecoder};
