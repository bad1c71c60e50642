mod commands;
mod config;
mod serve;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use chinpoint_core::agent::AgentParams;

/// Hardware-free chin-operated pointing interface: simulator, task
/// sessions, synthetic operators and Fitts' law analysis.
#[derive(Debug, Parser)]
#[command(name = "chinpoint", version)]
struct Cli {
    /// Directory holding `profile.txt`. Falls back to
    /// $XDG_CONFIG_HOME/chinpoint, then ~/.config/chinpoint.
    #[arg(long, global = true, env = "CHINPOINT_CONFIG_DIR")]
    config_dir: Option<PathBuf>,

    /// Calibration profile to use instead of the one in the config dir.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one session and stream live messages over a WebSocket at /ws.
    Serve(ServeArgs),
    /// Synthesize a sensor byte stream from a gesture script.
    Simulate(SimulateArgs),
    /// Show, edit or inspect the calibration profile.
    Calibrate(CalibrateArgs),
    /// Run a cohort of synthetic operators through the pointing task.
    RunPointing(RunPointingArgs),
    /// Run the synthetic operator through the reach-and-hold task.
    RunArm(RunArmArgs),
    /// Fit and summarize pointing logs into a CSV report.
    Analyze(AnalyzeArgs),
    /// Print report tables from logs or from a saved CSV report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8765)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// Session config (JSON). Without it, a sensor-level agent runs a
    /// pointing session in real time.
    #[arg(long)]
    session: Option<PathBuf>,
    /// Where to write the session log.
    #[arg(long, default_value = "session.jsonl")]
    log: PathBuf,
    /// Run frames as fast as possible instead of in real time.
    #[arg(long)]
    fast: bool,
    /// Hold the session until the first client connects.
    #[arg(long)]
    wait_client: bool,
    /// Shut down once the session has ended.
    #[arg(long)]
    exit_on_end: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Gesture script: a JSON array of segments.
    #[arg(long)]
    script: PathBuf,
    /// Frame rate, Hz.
    #[arg(long, default_value_t = 100.0)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Gaussian noise on ax, ay, az (milli-g) and stretch (counts).
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Tremor amplitude on ax/ay, milli-g.
    #[arg(long, default_value_t = 0.0)]
    tremor: f64,
    #[arg(long, default_value_t = 8.0)]
    tremor_hz: f64,
    /// Probability that a frame is lost.
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// Probability that a frame has one corrupted byte.
    #[arg(long, default_value_t = 0.0)]
    corrupt: f64,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// `key=value` changes to apply; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Summarize filtered channels of a recorded stream against the profile.
    #[arg(long, value_name = "STREAM")]
    from: Option<PathBuf>,
    /// Write the profile here instead of the config dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Level {
    /// The agent emits control events directly.
    Event,
    /// The agent drives sensor frames through the wire and signal chain.
    Sensor,
}

#[derive(Debug, Args)]
struct RunPointingArgs {
    /// Agent parameters, e.g. `a=0.5,b=2.0,sigma=0.12,seed=7`; also
    /// `misclick`, `penalty`, `noise`, `model=nominal|effective`, `stall=RATE:MEAN`.
    #[arg(long, default_value = "")]
    agent: AgentParams,
    #[arg(long, default_value_t = 8)]
    participants: usize,
    #[arg(long, default_value = "agent")]
    cohort: String,
    #[arg(long, default_value = "logs")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Level::Event)]
    level: Level,
    /// Frame rate for sensor-level agents, Hz.
    #[arg(long, default_value_t = 100)]
    rate: u32,
    #[arg(long, default_value_t = 2)]
    runs: usize,
    #[arg(long, default_value_t = 50)]
    trials_per_run: usize,
}

#[derive(Debug, Args)]
struct RunArmArgs {
    /// Endpoint speed, m/s.
    #[arg(long, default_value_t = 0.03)]
    speed: f64,
    /// Reaction time, s.
    #[arg(long, default_value_t = 0.5)]
    reaction: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 1000)]
    dwell_ms: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "logs/arm.jsonl")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Log files or directories of `*.jsonl` logs.
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// Drop trials with selection times above this many seconds.
    #[arg(long)]
    exclude_over: Option<f64>,
    /// Use only center-to-periphery reaches.
    #[arg(long)]
    outbound_only: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Log files, log directories, or one CSV report.
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// Exclusion limit for the second table when reading logs.
    #[arg(long, default_value_t = 25.0)]
    exclude_over: f64,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = config::Config::resolve(cli.config_dir, cli.profile)?;
    match cli.command {
        Command::Serve(a) => serve::run(&cfg, a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Calibrate(a) => commands::calibrate(&cfg, a),
        Command::RunPointing(a) => commands::run_pointing(&cfg, a),
        Command::RunArm(a) => commands::run_arm(&cfg, a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Report(a) => commands::report(a),
    }
}
