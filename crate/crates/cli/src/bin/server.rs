use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;

use tissuelink_cli::server::{Server, ServerOptions};
use tissuelink_core::session::HubConfig;

/// Session server for shared 2D/headset viewing.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "TISSUELINK_PORT", default_value_t = 8787)]
    port: u16,
    /// Scene directory holding scene.json and entities.obj.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0, value_parser = positive)]
    heartbeat_sec: f64,
    /// Heartbeat intervals of silence before a client is dropped.
    #[arg(long, default_value_t = 3)]
    missed_pongs: u32,
    #[arg(long, default_value_t = 600.0, value_parser = positive)]
    session_grace_sec: f64,
    #[arg(long, default_value_t = 32)]
    max_members: usize,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("{s} is not a positive number")),
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let options = ServerOptions {
        host: args.host,
        port: args.port,
        scene: args.scene,
        hub: HubConfig {
            heartbeat: Duration::from_secs_f64(args.heartbeat_sec),
            missed_pongs_limit: args.missed_pongs.max(1),
            session_grace: Duration::from_secs_f64(args.session_grace_sec),
            max_members: args.max_members,
        },
        seed: None,
    };
    let server = match Server::bind(options).await {
        Ok(s) => s,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::FAILURE;
        }
    };
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match server.run(shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
