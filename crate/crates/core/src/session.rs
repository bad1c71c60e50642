//! One session: frames or agent inputs in, a JSON-lines log and a stream
//! of live messages out.
//!
//! The pipeline is single-threaded and owns all state. Client commands
//! arrive on a channel and are drained between frames, so a calibration
//! change never splits a frame and updates apply in arrival order.
//!
//! Live messages, tagged by `type`:
//!
//! ```text
//! {"type":"trace","t_ms":120,"ax":12.5,"ay":-3.0,"az":998.1,"stretch":301.2,"button":false}
//! {"type":"calib_ack","accepted":true,"profile":{...}}
//! {"type":"calib_ack","accepted":false,"reason":"stretch_release ...","profile":{...}}
//! {"type":"task_state","t_ms":120,"trial":3,"pointer":[640.0,400.0],"target":[762.0,400.0],"target_radius":15.0,...}
//! {"type":"event","event":{"t_ms":120,"type":"click_press"}}
//! {"type":"session_end","summary":{...}}
//! ```
//!
//! Client commands:
//!
//! ```text
//! {"type":"calib_update","patch":{"stretch_press":700.0}}
//! {"type":"stop"}
//! ```

use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::mpsc::{Receiver, TryRecvError};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    AgentError, AgentParams, ArmAgent, ArmAgentParams, PointingAgent, SensorPointingAgent,
};
use crate::signal::{
    ActiveMode, CalibrationProfile, ControlEvent, FilteredFrame, ProfileError, ProfilePatch,
    SignalChain,
};
use crate::sim::{self, Corruption, GestureScript, NoiseModel, SimError};
use crate::task::{
    mean_completion_time, ArmView, EndReason, LogRecord, PointingConfig, PointingView, SessionEnd,
    SessionHeader, SessionLog, SessionLogWriter, Task, TaskError, TaskInput, TaskSetup,
};
use crate::wire::{DecoderStats, FrameReader, SensorFrame, StreamDecoder};

/// Upper bound on trace and task-state messages per second of stream time.
pub const LIVE_RATE_HZ: u32 = 30;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("source: {0}")]
    Source(String),
    #[error("log I/O: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid session config: {0}")]
    Config(String),
}

/// Where frames or inputs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    /// Synthesized from a gesture script, optionally sent through a lossy
    /// wire.
    Script {
        script: GestureScript,
        #[serde(default)]
        noise: NoiseModel,
        rate_hz: f64,
        #[serde(default)]
        corruption: Option<Corruption>,
    },
    /// A recorded byte stream of wire frames.
    Recording { path: PathBuf },
    /// A serial device node; needs the `serial` feature.
    Serial { path: PathBuf },
    /// Event-level pointing agent.
    PointingAgent { params: AgentParams },
    /// Sensor-level pointing agent at `rate_hz`.
    SensorAgent { params: AgentParams, rate_hz: u32 },
    /// Event-level reach-and-hold agent.
    ArmAgent { params: ArmAgentParams },
}

impl Source {
    fn describe(&self) -> String {
        match self {
            Source::Script { rate_hz, .. } => format!("script@{rate_hz}Hz"),
            Source::Recording { path } => format!("recording:{}", path.display()),
            Source::Serial { path } => format!("serial:{}", path.display()),
            Source::PointingAgent { params } => format!("pointing-agent:seed={}", params.seed),
            Source::SensorAgent { params, rate_hz } => {
                format!("sensor-agent:seed={}@{rate_hz}Hz", params.seed)
            }
            Source::ArmAgent { .. } => "arm-agent".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub session_id: String,
    #[serde(default)]
    pub participant: Option<String>,
    #[serde(default)]
    pub cohort: Option<String>,
    pub setup: TaskSetup,
    pub source: Source,
    pub profile: CalibrationProfile,
    /// Pace frames to wall-clock time instead of running flat out.
    #[serde(default)]
    pub realtime: bool,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        self.profile.validate()?;
        if Task::from_setup(&self.setup)?.is_none() && !self.source.is_frame_source() {
            return Err(SessionError::Config(
                "calibration-only sessions need a frame source".into(),
            ));
        }
        match (&self.source, &self.setup) {
            (Source::PointingAgent { .. } | Source::SensorAgent { .. }, TaskSetup::Pointing(_)) => {
                Ok(())
            }
            (Source::ArmAgent { .. }, TaskSetup::Arm3d(_)) => Ok(()),
            (
                Source::PointingAgent { .. } | Source::SensorAgent { .. } | Source::ArmAgent { .. },
                _,
            ) => Err(SessionError::Config("agent does not match the task".into())),
            _ => Ok(()),
        }
    }

    fn header(&self) -> SessionHeader {
        let mut h = SessionHeader::new(
            self.session_id.clone(),
            self.source.describe(),
            self.setup.clone(),
            self.profile.clone(),
        );
        h.participant = self.participant.clone();
        h.cohort = self.cohort.clone();
        h
    }
}

impl Source {
    fn is_frame_source(&self) -> bool {
        matches!(
            self,
            Source::Script { .. }
                | Source::Recording { .. }
                | Source::Serial { .. }
                | Source::SensorAgent { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientCommand {
    CalibUpdate { patch: ProfilePatch },
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskState {
    pub t_ms: u32,
    pub trial: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointer: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<[f64; 3]>,
    /// Active target center: pixels in pointing, meters in the arm task.
    pub target: Vec<f64>,
    /// Pixels or meters, matching `target`.
    pub target_radius: f64,
    pub dwell_progress: f64,
    pub halted: bool,
}

impl TaskState {
    fn pointing(t_ms: u32, v: &PointingView) -> Self {
        Self {
            t_ms,
            trial: v.trial,
            pointer: Some(v.pointer),
            endpoint: None,
            target: v.target_pos.to_vec(),
            target_radius: v.target.width / 2.0,
            dwell_progress: 0.0,
            halted: v.halted,
        }
    }

    fn arm(t_ms: u32, v: &ArmView) -> Self {
        let goal = match v.leg {
            crate::task::Leg::Outbound => v.target,
            crate::task::Leg::Return => v.start,
        };
        Self {
            t_ms,
            trial: v.trial,
            pointer: None,
            endpoint: Some(v.endpoint),
            target: goal.center.to_vec(),
            target_radius: goal.radius,
            dwell_progress: v.dwell_progress,
            halted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub reason: EndReason,
    pub t_ms: u32,
    pub trials: usize,
    pub frames: u64,
    pub decoder: DecoderStats,
    /// Frames the smoother refused for non-increasing time.
    pub dropped_frames: u64,
    pub calibration_updates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_completion_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LiveMessage {
    Trace {
        t_ms: u32,
        ax: f64,
        ay: f64,
        az: f64,
        stretch: f64,
        button: bool,
    },
    CalibAck {
        accepted: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
        /// The profile in effect after the update.
        profile: CalibrationProfile,
    },
    TaskState(TaskState),
    Event {
        event: ControlEvent,
    },
    SessionEnd {
        summary: SessionSummary,
    },
}

impl LiveMessage {
    fn trace(f: &FilteredFrame) -> Self {
        LiveMessage::Trace {
            t_ms: f.t_ms,
            ax: f.ax,
            ay: f.ay,
            az: f.az,
            stretch: f.stretch,
            button: f.button,
        }
    }
}

/// Receiver of live messages. Must not block for long: the pipeline waits.
pub trait LiveSink {
    fn send(&mut self, msg: LiveMessage);
}

impl LiveSink for Vec<LiveMessage> {
    fn send(&mut self, msg: LiveMessage) {
        self.push(msg);
    }
}

impl<F: FnMut(LiveMessage)> LiveSink for F {
    fn send(&mut self, msg: LiveMessage) {
        self(msg)
    }
}

/// Discards everything.
pub struct NoSink;

impl LiveSink for NoSink {
    fn send(&mut self, _: LiveMessage) {}
}

/// Applies a partial profile to the running chain. On rejection the chain
/// keeps its current profile.
pub fn apply_calibration(chain: &mut SignalChain, patch: &ProfilePatch) -> LiveMessage {
    match chain.profile().merged(patch) {
        Ok(next) => match chain.set_profile(next) {
            Ok(()) => LiveMessage::CalibAck {
                accepted: true,
                reason: None,
                profile: chain.profile().clone(),
            },
            Err(e) => reject(chain, e),
        },
        Err(e) => reject(chain, e),
    }
}

fn reject(chain: &SignalChain, e: ProfileError) -> LiveMessage {
    LiveMessage::CalibAck {
        accepted: false,
        reason: Some(e.to_string()),
        profile: chain.profile().clone(),
    }
}

struct Runner<'a, W: Write> {
    log: SessionLogWriter<W>,
    records: Vec<LogRecord>,
    task: Option<Task>,
    started: bool,
    trials: usize,
    live: &'a mut dyn LiveSink,
    commands: Option<&'a Receiver<ClientCommand>>,
    last_live_slot: Option<u64>,
    calibration_updates: usize,
    stop: bool,
    now: u32,
}

impl<W: Write> Runner<'_, W> {
    fn record(&mut self, r: LogRecord) -> io::Result<()> {
        self.log.write(&r)?;
        self.records.push(r);
        Ok(())
    }

    fn start(&mut self, t: u32) -> Result<(), SessionError> {
        if self.started {
            return Ok(());
        }
        self.started = true;
        self.now = t;
        if let Some(task) = self.task.as_mut() {
            task.start(t)?;
        }
        self.record(LogRecord::Start { t_ms: t })?;
        self.publish_state(t, true);
        Ok(())
    }

    fn finished(&self) -> bool {
        self.task.as_ref().is_some_and(Task::is_finished)
    }

    fn feed(&mut self, input: TaskInput) -> Result<(), SessionError> {
        self.now = input.t_ms();
        self.record(LogRecord::input(&input))?;
        if let TaskInput::Event(e) = input {
            self.live.send(LiveMessage::Event { event: e });
        }
        let Some(task) = self.task.as_mut() else {
            return Ok(());
        };
        if let Some(done) = task.step(&input)? {
            self.trials += 1;
            self.record(LogRecord::trial(done))?;
            self.publish_state(input.t_ms(), true);
        }
        Ok(())
    }

    /// At most one live update per 1/30 s slot of stream time.
    fn live_due(&mut self, t: u32) -> bool {
        let slot = t as u64 * LIVE_RATE_HZ as u64 / 1000;
        let due = self.last_live_slot.is_none_or(|last| slot > last);
        if due {
            self.last_live_slot = Some(slot);
        }
        due
    }

    fn publish_state(&mut self, t: u32, force: bool) {
        let state = match self.task.as_ref() {
            Some(Task::Pointing(p)) => p.view().map(|v| TaskState::pointing(t, &v)),
            Some(Task::Arm3d(a)) => a.view().map(|v| TaskState::arm(t, &v)),
            None => None,
        };
        if let Some(s) = state {
            if force || self.live_due(t) {
                self.live.send(LiveMessage::TaskState(s));
            }
        }
    }

    /// Drains pending client commands. Called between frames only.
    fn drain_commands(&mut self, chain: Option<&mut SignalChain>) -> io::Result<()> {
        let Some(rx) = self.commands else {
            return Ok(());
        };
        let mut chain = chain;
        loop {
            match rx.try_recv() {
                Ok(ClientCommand::Stop) => self.stop = true,
                Ok(ClientCommand::CalibUpdate { patch }) => {
                    let Some(c) = chain.as_deref_mut() else {
                        self.live.send(LiveMessage::CalibAck {
                            accepted: false,
                            reason: Some("this session has no signal chain".into()),
                            profile: CalibrationProfile::default(),
                        });
                        continue;
                    };
                    let ack = apply_calibration(c, &patch);
                    if let LiveMessage::CalibAck {
                        accepted: true,
                        profile,
                        ..
                    } = &ack
                    {
                        self.calibration_updates += 1;
                        let t = self.now;
                        self.record(LogRecord::Calibration {
                            t_ms: t,
                            profile: profile.clone(),
                        })?;
                    }
                    self.live.send(ack);
                }
                Err(TryRecvError::Empty | TryRecvError::Disconnected) => return Ok(()),
            }
        }
    }

    /// One sensor frame through the chain and into the task.
    fn frame(
        &mut self,
        chain: &mut SignalChain,
        frame: &SensorFrame,
        events: &mut Vec<ControlEvent>,
    ) -> Result<(), SessionError> {
        events.clear();
        let Some(filtered) = chain.process(frame, events) else {
            return Ok(());
        };
        let t = filtered.t_ms;
        self.start(t)?;
        for e in events.iter() {
            if self.finished() {
                break;
            }
            self.feed(TaskInput::Event(*e))?;
        }
        // Dwell completion is only observed on input; a clock tick stands in
        // for the frames where nothing moved.
        if let Some(Task::Arm3d(a)) = self.task.as_ref() {
            if a.dwell_due(t) {
                self.feed(TaskInput::Clock { t_ms: t })?;
            }
        }
        if self.live_due(t) {
            self.live.send(LiveMessage::trace(&filtered));
            self.publish_state(t, true);
        }
        Ok(())
    }
}

/// Runs a session to completion, a stop command, or the end of its source.
/// The log is written and flushed record by record, so a crash leaves a
/// parseable prefix.
pub fn run_session<W: Write>(
    config: &SessionConfig,
    log_out: W,
    live: &mut dyn LiveSink,
    commands: Option<&Receiver<ClientCommand>>,
) -> Result<(SessionLog, SessionSummary), SessionError> {
    config.validate()?;
    let header = config.header();
    let mut runner = Runner {
        log: SessionLogWriter::new(log_out),
        records: Vec::new(),
        task: Task::from_setup(&config.setup)?,
        started: false,
        trials: 0,
        live,
        commands,
        last_live_slot: None,
        calibration_updates: 0,
        stop: false,
        now: 0,
    };
    runner.record(LogRecord::Header(header.clone()))?;

    let active = match config.setup {
        TaskSetup::Arm3d(_) => ActiveMode::Arm3d,
        _ => ActiveMode::Pointing,
    };
    let mut chain = SignalChain::new(config.profile.clone(), active)?;
    let mut frames_seen = 0u64;
    let mut decoder_stats = DecoderStats::default();
    let wall_start = Instant::now();
    let pace = |t_ms: u32| {
        if config.realtime {
            let due = Duration::from_millis(t_ms as u64);
            let elapsed = wall_start.elapsed();
            if due > elapsed {
                std::thread::sleep(due - elapsed);
            }
        }
    };

    let outcome: Result<EndReason, SessionError> = (|| {
        let mut events = Vec::new();
        match &config.source {
            Source::PointingAgent { params } => {
                let mut agent = PointingAgent::new(*params)?;
                runner.start(0)?;
                while !runner.finished() {
                    runner.drain_commands(None)?;
                    if runner.stop {
                        return Ok(EndReason::Stopped);
                    }
                    let Some(Task::Pointing(p)) = runner.task.as_ref() else {
                        unreachable!("validated");
                    };
                    let view = p.view().expect("active trial");
                    for input in agent.act(&view) {
                        if runner.finished() {
                            break;
                        }
                        pace(input.t_ms());
                        runner.feed(input)?;
                    }
                }
                Ok(EndReason::Completed)
            }
            Source::ArmAgent { params } => {
                let mut agent = ArmAgent::new(*params)?;
                runner.start(0)?;
                while !runner.finished() {
                    runner.drain_commands(None)?;
                    if runner.stop {
                        return Ok(EndReason::Stopped);
                    }
                    let Some(Task::Arm3d(a)) = runner.task.as_ref() else {
                        unreachable!("validated");
                    };
                    let view = a.view().expect("active trial");
                    for input in agent.act(&view, runner.now) {
                        if runner.finished() {
                            break;
                        }
                        pace(input.t_ms());
                        runner.feed(input)?;
                        runner.publish_state(input.t_ms(), false);
                    }
                }
                Ok(EndReason::Completed)
            }
            Source::SensorAgent { params, rate_hz } => {
                let mut agent = SensorPointingAgent::new(*params, &config.profile, *rate_hz)?;
                let mut decoder = StreamDecoder::new();
                let mut decoded = Vec::new();
                while !runner.finished() {
                    runner.drain_commands(Some(&mut chain))?;
                    if runner.stop {
                        return Ok(EndReason::Stopped);
                    }
                    let view = match runner.task.as_ref() {
                        Some(Task::Pointing(p)) => p.view(),
                        _ => None,
                    };
                    let frame = agent.next_frame(view.as_ref());
                    pace(frame.t_ms);
                    let bytes = crate::wire::encode_frame(&frame)
                        .map_err(|e| SessionError::Source(e.to_string()))?;
                    decoded.clear();
                    decoder.push_into(&bytes, &mut decoded);
                    for f in &decoded {
                        frames_seen += 1;
                        runner.frame(&mut chain, f, &mut events)?;
                    }
                }
                decoder_stats = decoder.stats();
                Ok(EndReason::Completed)
            }
            Source::Script {
                script,
                noise,
                rate_hz,
                corruption,
            } => {
                let frames = sim::synthesize(script, noise, *rate_hz)?;
                let wire = sim::stream_over_wire(&frames, *corruption);
                let mut decoder = StreamDecoder::new();
                let mut decoded = Vec::new();
                for chunk in wire.bytes.chunks(crate::wire::FRAME_LEN) {
                    runner.drain_commands(Some(&mut chain))?;
                    if runner.stop {
                        decoder_stats = decoder.stats();
                        return Ok(EndReason::Stopped);
                    }
                    decoded.clear();
                    decoder.push_into(chunk, &mut decoded);
                    for f in &decoded {
                        frames_seen += 1;
                        pace(f.t_ms);
                        runner.frame(&mut chain, f, &mut events)?;
                        if runner.finished() {
                            decoder_stats = decoder.stats();
                            return Ok(EndReason::Completed);
                        }
                    }
                }
                decoder_stats = decoder.stats();
                Ok(EndReason::SourceExhausted)
            }
            Source::Recording { path } | Source::Serial { path } => {
                let file = std::fs::File::open(path)
                    .map_err(|e| SessionError::Source(format!("{}: {e}", path.display())))?;
                let mut reader = FrameReader::new(io::BufReader::new(file));
                while let Some(f) = reader
                    .next_frame()
                    .map_err(|e| SessionError::Source(e.to_string()))?
                {
                    runner.drain_commands(Some(&mut chain))?;
                    if runner.stop {
                        decoder_stats = reader.stats();
                        return Ok(EndReason::Stopped);
                    }
                    frames_seen += 1;
                    pace(f.t_ms);
                    runner.frame(&mut chain, &f, &mut events)?;
                    if runner.finished() {
                        decoder_stats = reader.stats();
                        return Ok(EndReason::Completed);
                    }
                }
                decoder_stats = reader.stats();
                Ok(EndReason::SourceExhausted)
            }
        }
    })();

    let (reason, detail, failure) = match outcome {
        Ok(r) => (r, None, None),
        Err(e) => (EndReason::Error, Some(e.to_string()), Some(e)),
    };
    let end = SessionEnd {
        t_ms: runner.now,
        reason,
        trials: runner.trials,
        detail,
    };
    // A failed log write cannot be recorded in the log itself.
    if !matches!(failure, Some(SessionError::Io(_))) {
        runner.record(LogRecord::End(end))?;
    }
    if let Some(e) = failure {
        return Err(e);
    }

    let log = SessionLog {
        header,
        records: std::mem::take(&mut runner.records),
        partial: false,
    };
    let mean_completion_s = match &config.setup {
        TaskSetup::Arm3d(cfg) => {
            let trials: Vec<_> = log.arm_trials().cloned().collect();
            mean_completion_time(&trials, cfg).ok()
        }
        _ => None,
    };
    let summary = SessionSummary {
        session_id: config.session_id.clone(),
        reason,
        t_ms: runner.now,
        trials: runner.trials,
        frames: frames_seen,
        decoder: decoder_stats,
        dropped_frames: chain.dropped(),
        calibration_updates: runner.calibration_updates,
        mean_completion_s,
    };
    runner.live.send(LiveMessage::SessionEnd {
        summary: summary.clone(),
    });
    Ok((log, summary))
}

/// Seed of the `index`-th participant in a cohort derived from `base`.
pub fn participant_seed(base: u64, index: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(index as u64 + 1)
}

/// Runs one event-level pointing session per participant and returns the
/// logs. Participant `i` is `P01`, `P02`, ... with its own agent and
/// schedule seed.
pub fn run_pointing_cohort(
    cohort: &str,
    base: AgentParams,
    participants: usize,
    setup: PointingConfig,
) -> Result<Vec<SessionLog>, SessionError> {
    (0..participants)
        .map(|i| {
            let seed = participant_seed(base.seed, i);
            let config = SessionConfig {
                session_id: format!("{cohort}-P{:02}", i + 1),
                participant: Some(format!("P{:02}", i + 1)),
                cohort: Some(cohort.to_string()),
                setup: TaskSetup::Pointing(PointingConfig { seed, ..setup }),
                source: Source::PointingAgent {
                    params: AgentParams { seed, ..base },
                },
                profile: CalibrationProfile::default(),
                realtime: false,
            };
            run_session(&config, io::sink(), &mut NoSink, None).map(|(log, _)| log)
        })
        .collect()
}
