//! Session logs as JSON lines.
//!
//! ```text
//! {"record":"header","schema_version":1,"session_id":"p01","setup":{"mode":"pointing",...},"profile":{...},...}
//! {"record":"start","t_ms":0}
//! {"record":"event","t_ms":12,"type":"pointer_delta","dx":5.0,"dy":0.0}
//! {"record":"clock","t_ms":20}
//! {"record":"calibration","t_ms":40,"profile":{...}}
//! {"record":"pointing_trial",...}      one per completed 2D reach
//! {"record":"arm_trial",...}           one per completed 3D trial
//! {"record":"end","t_ms":81230,"reason":"completed","trials":100}
//! ```
//!
//! Every task input is logged before the trial it completes, so the event
//! tape alone regenerates every trial record. A log without an end record,
//! or whose last line was cut off mid-write, parses as partial.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::arm::TrialRecord3D;
use super::pointing::TrialRecord2D;
use super::targets::WORKSPACE_M;
use super::{ArmConfig, PointingConfig, Task, TaskError, TaskInput, TrialRecord};
use crate::signal::{CalibrationProfile, ControlEvent};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("I/O: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("first record is not a header")]
    MissingHeader,
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error("line {line}: {reason}")]
    Structure { line: usize, reason: String },
    #[error("trial {trial}: {reason}")]
    Invalid { trial: usize, reason: String },
    #[error(transparent)]
    Task(#[from] TaskError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TaskSetup {
    Pointing(PointingConfig),
    Arm3d(ArmConfig),
    CalibrationOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub schema_version: u32,
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohort: Option<String>,
    /// Free-form description of the frame source.
    pub source: String,
    pub setup: TaskSetup,
    pub profile: CalibrationProfile,
}

impl SessionHeader {
    pub fn new(
        session_id: impl Into<String>,
        source: impl Into<String>,
        setup: TaskSetup,
        profile: CalibrationProfile,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            session_id: session_id.into(),
            participant: None,
            cohort: None,
            source: source.into(),
            setup,
            profile,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Completed,
    Stopped,
    SourceExhausted,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEnd {
    pub t_ms: u32,
    pub reason: EndReason,
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header(SessionHeader),
    Start {
        t_ms: u32,
    },
    Event(ControlEvent),
    Clock {
        t_ms: u32,
    },
    Calibration {
        t_ms: u32,
        profile: CalibrationProfile,
    },
    PointingTrial(TrialRecord2D),
    ArmTrial(TrialRecord3D),
    End(SessionEnd),
}

impl LogRecord {
    pub fn input(input: &TaskInput) -> Self {
        match *input {
            TaskInput::Event(e) => LogRecord::Event(e),
            TaskInput::Clock { t_ms } => LogRecord::Clock { t_ms },
        }
    }

    pub fn trial(record: TrialRecord) -> Self {
        match record {
            TrialRecord::Pointing(r) => LogRecord::PointingTrial(r),
            TrialRecord::Arm3d(r) => LogRecord::ArmTrial(r),
        }
    }
}

/// Appends records one line at a time, flushing after each.
pub struct SessionLogWriter<W: Write> {
    out: W,
    line: Vec<u8>,
}

impl<W: Write> SessionLogWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            line: Vec::new(),
        }
    }

    pub fn write(&mut self, record: &LogRecord) -> io::Result<()> {
        self.line.clear();
        serde_json::to_writer(&mut self.line, record).map_err(io::Error::other)?;
        self.line.push(b'\n');
        self.out.write_all(&self.line)?;
        self.out.flush()
    }

    pub fn get_ref(&self) -> &W {
        &self.out
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: SessionHeader,
    pub records: Vec<LogRecord>,
    /// No end record, or the final line was cut off.
    pub partial: bool,
}

impl SessionLog {
    pub fn parse(text: &str) -> Result<Self, LogError> {
        let mut lines: Vec<&str> = text.split('\n').collect();
        let complete_tail = lines.last().is_some_and(|l| l.is_empty());
        if complete_tail {
            lines.pop();
        }
        let mut records = Vec::with_capacity(lines.len());
        let mut truncated = false;
        let last = lines.len().saturating_sub(1);
        for (i, raw) in lines.iter().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<LogRecord>(raw) {
                Ok(r) => records.push(r),
                // A half-written last line is what a crash leaves behind.
                Err(_) if i == last && !complete_tail => truncated = true,
                Err(source) => {
                    return Err(LogError::Json {
                        line: i + 1,
                        source,
                    })
                }
            }
        }
        let header = match records.first() {
            Some(LogRecord::Header(h)) => h.clone(),
            _ => return Err(LogError::MissingHeader),
        };
        if header.schema_version != SCHEMA_VERSION {
            return Err(LogError::SchemaVersion(header.schema_version));
        }
        for (i, r) in records.iter().enumerate().skip(1) {
            if matches!(r, LogRecord::Header(_)) {
                return Err(LogError::Structure {
                    line: i + 1,
                    reason: "second header".into(),
                });
            }
            if matches!(r, LogRecord::End(_)) && i + 1 != records.len() {
                return Err(LogError::Structure {
                    line: i + 1,
                    reason: "records after end".into(),
                });
            }
        }
        let ended = matches!(records.last(), Some(LogRecord::End(_)));
        Ok(Self {
            header,
            records,
            partial: truncated || !ended,
        })
    }

    pub fn read(path: &std::path::Path) -> Result<Self, LogError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_jsonl(&self) -> String {
        let mut w = SessionLogWriter::new(Vec::new());
        for r in &self.records {
            w.write(r).expect("writing to memory");
        }
        String::from_utf8(w.into_inner()).expect("JSON is UTF-8")
    }

    pub fn end(&self) -> Option<&SessionEnd> {
        match self.records.last() {
            Some(LogRecord::End(e)) => Some(e),
            _ => None,
        }
    }

    pub fn inputs(&self) -> impl Iterator<Item = TaskInput> + '_ {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Event(e) => Some(TaskInput::Event(*e)),
            LogRecord::Clock { t_ms } => Some(TaskInput::Clock { t_ms: *t_ms }),
            _ => None,
        })
    }

    pub fn pointing_trials(&self) -> impl Iterator<Item = &TrialRecord2D> + '_ {
        self.records.iter().filter_map(|r| match r {
            LogRecord::PointingTrial(t) => Some(t),
            _ => None,
        })
    }

    pub fn arm_trials(&self) -> impl Iterator<Item = &TrialRecord3D> + '_ {
        self.records.iter().filter_map(|r| match r {
            LogRecord::ArmTrial(t) => Some(t),
            _ => None,
        })
    }

    /// Index of the first trial of each run.
    pub fn run_boundaries(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut prev = None;
        for t in self.pointing_trials() {
            if prev != Some(t.run) {
                out.push(t.trial);
                prev = Some(t.run);
            }
        }
        out
    }

    /// Re-checks the task invariants on loaded data. A complete log must
    /// also hold the full trial count.
    pub fn validate(&self) -> Result<(), LogError> {
        match &self.header.setup {
            TaskSetup::Pointing(cfg) => {
                let trials: Vec<_> = self.pointing_trials().collect();
                if self.arm_trials().next().is_some() {
                    return Err(LogError::Invalid {
                        trial: 0,
                        reason: "arm trial in a pointing session".into(),
                    });
                }
                for (i, t) in trials.iter().enumerate() {
                    let bad = |reason: &str| LogError::Invalid {
                        trial: i,
                        reason: reason.into(),
                    };
                    if t.trial != i || t.run != i / cfg.trials_per_run {
                        return Err(bad("trial numbering"));
                    }
                    if t.target.is_center != (i % 2 == 1) {
                        return Err(bad("reaches must alternate peripheral and center"));
                    }
                    if !(t.selection_time_s > 0.0) {
                        return Err(bad("non-positive selection time"));
                    }
                    if !t.target.contains(&cfg.screen, t.end_pos) {
                        return Err(bad("final click outside target"));
                    }
                    let within = |p: [f64; 2]| {
                        (0.0..=cfg.screen.width).contains(&p[0])
                            && (0.0..=cfg.screen.height).contains(&p[1])
                    };
                    if !within(t.start_pos) || !t.path.iter().all(|s| within(s.pos)) {
                        return Err(bad("pointer left the screen"));
                    }
                    if t.misclicks
                        .iter()
                        .any(|m| m.t_ms < t.onset_t || m.t_ms > t.success_click_t)
                    {
                        return Err(bad("misclick outside the trial window"));
                    }
                }
                if !self.partial && trials.len() != cfg.total_trials() && self.ended_complete() {
                    return Err(TaskError::Incomplete {
                        expected: cfg.total_trials(),
                        got: trials.len(),
                    }
                    .into());
                }
            }
            TaskSetup::Arm3d(cfg) => {
                let trials: Vec<_> = self.arm_trials().collect();
                if self.pointing_trials().next().is_some() {
                    return Err(LogError::Invalid {
                        trial: 0,
                        reason: "pointing trial in an arm session".into(),
                    });
                }
                let min_s = 2.0 * cfg.dwell_ms as f64 / 1000.0;
                for (i, t) in trials.iter().enumerate() {
                    let bad = |reason: &str| LogError::Invalid {
                        trial: i,
                        reason: reason.into(),
                    };
                    if t.trial != i || t.practice != (i < cfg.practice_trials) {
                        return Err(bad("trial numbering"));
                    }
                    if t.completion_time_s < min_s {
                        return Err(bad("shorter than two dwells"));
                    }
                    if t.outbound_done_t < t.onset_t + cfg.dwell_ms
                        || t.return_done_t < t.outbound_done_t + cfg.dwell_ms
                    {
                        return Err(bad("dwell completed too early"));
                    }
                    if !t
                        .target
                        .center
                        .iter()
                        .all(|c| (0.0..=WORKSPACE_M).contains(c))
                    {
                        return Err(bad("target outside the workspace"));
                    }
                }
                if !self.partial && trials.len() != cfg.trials && self.ended_complete() {
                    return Err(TaskError::Incomplete {
                        expected: cfg.trials,
                        got: trials.len(),
                    }
                    .into());
                }
            }
            TaskSetup::CalibrationOnly => {
                if self.pointing_trials().next().is_some() || self.arm_trials().next().is_some() {
                    return Err(LogError::Invalid {
                        trial: 0,
                        reason: "trials in a calibration-only session".into(),
                    });
                }
            }
        }
        Ok(())
    }

    fn ended_complete(&self) -> bool {
        self.end().is_some_and(|e| e.reason == EndReason::Completed)
    }
}

/// Re-runs the task over the logged inputs and rebuilds the log. Trial
/// records are regenerated, everything else is carried over, so a faithful
/// log replays to identical bytes.
pub fn replay(log: &SessionLog) -> Result<SessionLog, LogError> {
    let mut task = Task::from_setup(&log.header.setup)?;
    let mut out = Vec::with_capacity(log.records.len());
    for r in &log.records {
        match r {
            LogRecord::PointingTrial(_) | LogRecord::ArmTrial(_) => {}
            LogRecord::Start { t_ms } => {
                if let Some(t) = task.as_mut() {
                    t.start(*t_ms)?;
                }
                out.push(r.clone());
            }
            LogRecord::Event(_) | LogRecord::Clock { .. } => {
                out.push(r.clone());
                if let Some(t) = task.as_mut() {
                    let input = match r {
                        LogRecord::Event(e) => TaskInput::Event(*e),
                        LogRecord::Clock { t_ms } => TaskInput::Clock { t_ms: *t_ms },
                        _ => unreachable!(),
                    };
                    if let Some(done) = t.step(&input)? {
                        out.push(LogRecord::trial(done));
                    }
                }
            }
            other => out.push(other.clone()),
        }
    }
    Ok(SessionLog {
        header: log.header.clone(),
        records: out,
        partial: log.partial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::EventKind;

    fn header() -> SessionHeader {
        SessionHeader::new(
            "s1",
            "test",
            TaskSetup::Pointing(PointingConfig::default()),
            CalibrationProfile::default(),
        )
    }

    #[test]
    fn record_json_shape() {
        let r = LogRecord::Event(ControlEvent::new(12, EventKind::ClickPress));
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"record":"event","t_ms":12,"type":"click_press"}"#
        );
        let c = LogRecord::Clock { t_ms: 5 };
        assert_eq!(
            serde_json::to_string(&c).unwrap(),
            r#"{"record":"clock","t_ms":5}"#
        );
        let h = serde_json::to_string(&LogRecord::Header(header())).unwrap();
        assert!(h.starts_with(r#"{"record":"header","schema_version":1,"#));
        assert!(h.contains(r#""setup":{"mode":"pointing","#));
    }

    #[test]
    fn round_trip_and_partial_flag() {
        let recs = vec![
            LogRecord::Header(header()),
            LogRecord::Start { t_ms: 0 },
            LogRecord::Event(ControlEvent::new(
                3,
                EventKind::PointerDelta { dx: 0.1, dy: -2.5 },
            )),
        ];
        let log = SessionLog {
            header: header(),
            records: recs,
            partial: true,
        };
        let text = log.to_jsonl();
        let back = SessionLog::parse(&text).unwrap();
        assert_eq!(back, log);
        assert!(back.partial);

        let mut ended = log.clone();
        ended.records.push(LogRecord::End(SessionEnd {
            t_ms: 3,
            reason: EndReason::Stopped,
            trials: 0,
            detail: None,
        }));
        ended.partial = false;
        assert_eq!(SessionLog::parse(&ended.to_jsonl()).unwrap(), ended);
    }

    #[test]
    fn cut_tail_tolerated_but_corrupt_middle_rejected() {
        let log = SessionLog {
            header: header(),
            records: vec![LogRecord::Header(header()), LogRecord::Start { t_ms: 0 }],
            partial: true,
        };
        let text = log.to_jsonl();
        let cut = format!("{text}{{\"record\":\"ev");
        let back = SessionLog::parse(&cut).unwrap();
        assert!(back.partial);
        assert_eq!(back.records.len(), 2);

        let broken = format!("{{\"record\":\"ev\n{text}");
        assert!(matches!(
            SessionLog::parse(&broken),
            Err(LogError::Json { line: 1, .. })
        ));
        assert!(matches!(
            SessionLog::parse(""),
            Err(LogError::MissingHeader)
        ));
    }

    #[test]
    fn newer_schema_rejected() {
        let mut h = header();
        h.schema_version = 99;
        let text = serde_json::to_string(&LogRecord::Header(h)).unwrap();
        assert!(matches!(
            SessionLog::parse(&text),
            Err(LogError::SchemaVersion(99))
        ));
    }
}
