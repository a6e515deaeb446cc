use std::path::PathBuf;
use std::process::ExitCode;

use belief_core::construction::MockFixture;
use belief_server::{run_blocking, AppState};
use clap::Parser;

/// Belief engine HTTP service.
#[derive(Parser)]
#[command(name = "beliefd", version)]
struct Args {
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8750")]
    listen: String,
    /// Mock oracle tables served under /v1/oracle.
    #[arg(long)]
    oracle_fixture: Option<PathBuf>,
}

fn state(args: &Args) -> Result<AppState, String> {
    let fixture: Option<MockFixture> = match &args.oracle_fixture {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            Some(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
        }
        None => None,
    };
    AppState::with_fixture(fixture.as_ref()).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let state = match state(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_blocking(&args.listen, state) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", args.listen);
            ExitCode::from(5)
        }
    }
}
