use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};

use chinpoint_core::agent::{AgentParams, ArmAgentParams};
use chinpoint_core::analytics::{
    build_report, cohorts_from_logs, ReachSelection, Report, ReportOptions, ReportRow,
};
use chinpoint_core::session::{
    participant_seed, run_session, NoSink, SessionConfig, SessionSummary, Source,
};
use chinpoint_core::signal::{ActiveMode, EventKind, SignalChain};
use chinpoint_core::sim::{stream_over_wire, synthesize, Corruption, GestureScript, NoiseModel};
use chinpoint_core::task::{ArmConfig, PointingConfig, SessionLog, TaskSetup};
use chinpoint_core::wire::FrameReader;
use chinpoint_core::ProfilePatch;

use crate::config::Config;
use crate::{
    AnalyzeArgs, CalibrateArgs, Level, ReportArgs, RunArmArgs, RunPointingArgs, SimulateArgs,
};

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let text =
        fs::read_to_string(&a.script).with_context(|| format!("reading {}", a.script.display()))?;
    let script = GestureScript::from_json(&text)
        .with_context(|| format!("parsing {}", a.script.display()))?;
    let noise = NoiseModel {
        sigma: [a.sigma; 4],
        tremor_amplitude: a.tremor,
        tremor_hz: a.tremor_hz,
        dropout: a.dropout,
        seed: a.seed,
    };
    let frames = synthesize(&script, &noise, a.rate)?;
    let corruption = (a.corrupt > 0.0).then_some(Corruption {
        rate: a.corrupt,
        seed: a.seed.wrapping_add(1),
    });
    let wire = stream_over_wire(&frames, corruption);
    fs::write(&a.out, &wire.bytes).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "{} frames ({} ms of script at {} Hz), {} bytes, {} corrupted -> {}",
        frames.len(),
        script.duration_ms(),
        a.rate,
        wire.bytes.len(),
        wire.corrupted.len(),
        a.out.display()
    );
    Ok(())
}

pub fn calibrate(cfg: &Config, a: CalibrateArgs) -> Result<()> {
    let mut profile = cfg.profile.clone();
    if !a.set.is_empty() {
        let patch = ProfilePatch::from_assignments(a.set.iter().map(String::as_str))?;
        profile = profile
            .merged(&patch)
            .context("rejected calibration change")?;
        let out = a.out.clone().unwrap_or_else(|| cfg.profile_path());
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(&out, profile.to_text()).with_context(|| format!("writing {}", out.display()))?;
        eprintln!("saved {}", out.display());
    }
    match &a.from {
        Some(stream) => inspect_stream(&profile, stream),
        None => {
            print!("{}", profile.to_text());
            Ok(())
        }
    }
}

/// Filtered channel ranges and the events the profile would produce.
fn inspect_stream(profile: &chinpoint_core::CalibrationProfile, path: &Path) -> Result<()> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = FrameReader::new(BufReader::new(file));
    let mut chain = SignalChain::new(profile.clone(), ActiveMode::Pointing)?;
    let mut events = Vec::new();
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    let mut sum = [0.0; 4];
    let mut n = 0u64;
    let mut counts = [0usize; 4];
    while let Some(frame) = reader.next_frame()? {
        events.clear();
        let Some(f) = chain.process(&frame, &mut events) else {
            continue;
        };
        for (k, v) in [f.ax, f.ay, f.az, f.stretch].into_iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
            sum[k] += v;
        }
        n += 1;
        for e in &events {
            let i = match e.kind {
                EventKind::PointerDelta { .. } => 0,
                EventKind::ClickPress => 1,
                EventKind::ClickRelease => 2,
                EventKind::ModeToggle => 3,
                EventKind::ZDelta { .. } => continue,
            };
            counts[i] += 1;
        }
    }
    ensure!(n > 0, "no frames decoded from {}", path.display());
    println!("{n} frames, decoder {:?}", reader.stats());
    println!(
        "{:<8} {:>10} {:>10} {:>10}",
        "channel", "min", "mean", "max"
    );
    for (k, name) in ["ax", "ay", "az", "stretch"].iter().enumerate() {
        println!(
            "{name:<8} {:>10.1} {:>10.1} {:>10.1}",
            lo[k],
            sum[k] / n as f64,
            hi[k]
        );
    }
    println!(
        "with this profile: {} pointer deltas, {} presses, {} releases, {} mode toggles",
        counts[0], counts[1], counts[2], counts[3]
    );
    Ok(())
}

fn print_summary(path: &Path, s: &SessionSummary) {
    let mean = s
        .mean_completion_s
        .map(|m| format!(", mean completion {m:.2} s"))
        .unwrap_or_default();
    println!(
        "{}: {:?}, {} trials, {:.1} s{mean}",
        path.display(),
        s.reason,
        s.trials,
        s.t_ms as f64 / 1000.0
    );
}

fn run_to_file(config: &SessionConfig, path: &Path) -> Result<SessionSummary> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let out =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let (_, summary) = run_session(config, out, &mut NoSink, None)?;
    print_summary(path, &summary);
    Ok(summary)
}

pub fn run_pointing(cfg: &Config, a: RunPointingArgs) -> Result<()> {
    ensure!(a.participants > 0, "need at least one participant");
    let mut logs = Vec::new();
    for i in 0..a.participants {
        let seed = participant_seed(a.agent.seed, i);
        let params = AgentParams { seed, ..a.agent };
        let id = format!("P{:02}", i + 1);
        let config = SessionConfig {
            session_id: format!("{}-{id}", a.cohort),
            participant: Some(id),
            cohort: Some(a.cohort.clone()),
            setup: TaskSetup::Pointing(PointingConfig {
                runs: a.runs,
                trials_per_run: a.trials_per_run,
                seed,
                ..Default::default()
            }),
            source: match a.level {
                Level::Event => Source::PointingAgent { params },
                Level::Sensor => Source::SensorAgent {
                    params,
                    rate_hz: a.rate,
                },
            },
            profile: cfg.profile.clone(),
            realtime: false,
        };
        let path = a.out_dir.join(format!("{}.jsonl", config.session_id));
        run_to_file(&config, &path)?;
        logs.push(SessionLog::read(&path)?);
    }
    match build_report(&cohorts_from_logs(&logs), ReportOptions::default()) {
        Ok(r) => print!("\n{}", r.to_text()),
        Err(e) => eprintln!("no summary: {e}"),
    }
    Ok(())
}

pub fn run_arm(cfg: &Config, a: RunArmArgs) -> Result<()> {
    let config = SessionConfig {
        session_id: "arm".into(),
        participant: None,
        cohort: None,
        setup: TaskSetup::Arm3d(ArmConfig {
            trials: a.trials,
            dwell_ms: a.dwell_ms,
            seed: a.seed,
            ..Default::default()
        }),
        source: Source::ArmAgent {
            params: ArmAgentParams {
                speed_m_s: a.speed,
                reaction_s: a.reaction,
                ..Default::default()
            },
        },
        profile: cfg.profile.clone(),
        realtime: false,
    };
    run_to_file(&config, &a.out)?;
    Ok(())
}

/// Expands directories into their `*.jsonl` files, sorted by name.
fn log_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    ensure!(!out.is_empty(), "no session logs found");
    Ok(out)
}

fn load_logs(inputs: &[PathBuf]) -> Result<Vec<SessionLog>> {
    log_paths(inputs)?
        .iter()
        .map(|p| {
            let log = SessionLog::read(p).with_context(|| format!("reading {}", p.display()))?;
            if log.partial {
                eprintln!(
                    "warning: {} is incomplete; using its finished trials",
                    p.display()
                );
            }
            log.validate()
                .with_context(|| format!("validating {}", p.display()))?;
            Ok(log)
        })
        .collect()
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let logs = load_logs(&a.inputs)?;
    let options = ReportOptions {
        exclude_over_s: a.exclude_over,
        selection: if a.outbound_only {
            ReachSelection::OutboundOnly
        } else {
            ReachSelection::Both
        },
    };
    let cohorts = cohorts_from_logs(&logs);
    if cohorts.is_empty() {
        bail!("no pointing sessions among {} logs", logs.len());
    }
    let report = build_report(&cohorts, options)?;
    if let Some(out) = &a.out {
        let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
        report.write_csv(BufWriter::new(file))?;
        eprintln!("wrote {}", out.display());
    }
    print!("{}", report.to_text());
    Ok(())
}

pub fn report(a: ReportArgs) -> Result<()> {
    if let [single] = a.inputs.as_slice() {
        if single.extension().is_some_and(|x| x == "csv") {
            let file =
                File::open(single).with_context(|| format!("opening {}", single.display()))?;
            let rows = Report::read_csv(file)?;
            print_rows(&rows)?;
            return Ok(());
        }
    }
    let cohorts = cohorts_from_logs(&load_logs(&a.inputs)?);
    for exclude_over_s in [None, Some(a.exclude_over)] {
        let r = build_report(
            &cohorts,
            ReportOptions {
                exclude_over_s,
                ..Default::default()
            },
        )?;
        println!("{}", r.to_text());
    }
    Ok(())
}

fn print_rows(rows: &[ReportRow]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    for r in rows {
        let limit = r
            .exclude_over_s
            .map(|l| format!(", trials over {l} s excluded"))
            .unwrap_or_default();
        writeln!(out, "{}{limit}", r.cohort)?;
        writeln!(
            out,
            "  a = {:.2} ± {:.2} s, b = {:.2} ± {:.2} s/bit",
            r.a, r.a_se, r.b, r.b_se
        )?;
        writeln!(
            out,
            "  R² = {:.2}, F = {:.1}, N = {}, d.f. = {}, p = {:.2e}",
            r.r_squared, r.f_stat, r.n, r.df, r.p_value
        )?;
        writeln!(
            out,
            "  TP = {:.2} ± {:.2} bits/s, error rate {:.2} ± {:.2} %, excluded {:.1} ± {:.1} %, {} participants",
            r.throughput,
            r.throughput_sem,
            r.error_rate,
            r.error_rate_sem,
            r.excluded_percent,
            r.excluded_percent_sem,
            r.participants
        )?;
    }
    Ok(())
}
