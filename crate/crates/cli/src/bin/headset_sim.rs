use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use tissuelink_cli::sim::{run_scenario, Scenario, SimError};
use tissuelink_core::gesture::GestureConfig;
use tissuelink_core::protocol::SessionCode;
use tissuelink_core::trace::{load_trace, trace_stats};

/// Replays recorded hand traces into a live session.
#[derive(Debug, Parser)]
#[command(version, args_conflicts_with_subcommands = true)]
struct Args {
    #[command(subcommand)]
    command: Option<Command>,
    #[arg(long, default_value = "ws://127.0.0.1:8787")]
    url: String,
    /// Four-digit session code to join.
    #[arg(long, conflicts_with = "create", required_unless_present = "create")]
    code: Option<SessionCode>,
    /// Create a new session (its code is printed) and join it.
    #[arg(long)]
    create: bool,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Expected final state; exits 2 on any differing path.
    #[arg(long)]
    assert: Option<PathBuf>,
    /// Writes the ordered event and delta log as JSON lines.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    quiescence_ms: u64,
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Prints frame count, duration, hand presence and pinch count.
    Stats { trace: PathBuf },
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors exit 4 so they cannot be mistaken for an assertion
    // failure (2).
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };

    if let Some(Command::Stats { trace }) = args.command {
        return match load_trace(&trace) {
            Ok(frames) => {
                let stats = trace_stats(&frames, &GestureConfig::default());
                println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(4)
            }
        };
    }

    let scenario = Scenario {
        code: args.code,
        trace: args.trace,
        scene: args.scene,
        speed: args.speed,
        assert: args.assert,
        record: args.record,
        quiescence: Duration::from_millis(args.quiescence_ms),
        delay: Duration::from_millis(args.delay_ms),
        ..Scenario::new(args.url)
    };
    match run_scenario(&scenario).await {
        Ok(outcome) => {
            // A closed stdout (e.g. piped into `head`) is not a failure.
            let mut out = std::io::stdout().lock();
            let _ =
                writeln!(out, "session {}: {} deltas sent, final state", outcome.code, outcome.deltas_sent);
            let _ =
                writeln!(out, "{}", serde_json::to_string_pretty(&outcome.state).expect("state serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let SimError::AssertionFailed(diffs) = &e {
                for d in diffs {
                    eprintln!(
                        "  {}: expected {}, got {}",
                        d.path,
                        d.expected.as_ref().map_or("(absent)".into(), |v| v.to_string()),
                        d.actual.as_ref().map_or("(absent)".into(), |v| v.to_string()),
                    );
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
