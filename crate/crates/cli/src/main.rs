//! `belief`: build, reason over and inspect belief graphs through an engine.
//!
//! Every command talks to an engine over HTTP. Without `--server` one is
//! started inside the process on a free local port.

mod commands;
mod error;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use belief_core::metrics::{RuleClass, TauScope};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "belief", version, about = "Belief graph reasoning client")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Global {
    /// Engine base URL. An in-process engine is used when omitted.
    #[arg(long, global = true)]
    pub server: Option<String>,
    /// Run configuration (JSON). Flags below override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// `mock:<fixture.json>` or `remote:<url>`.
    #[arg(long, global = true)]
    pub oracle: Option<String>,
    #[arg(long, global = true)]
    pub d_max: Option<u32>,
    /// Rule classes to leave out when reasoning: entailment, xor, mc.
    #[arg(long, global = true, value_delimiter = ',')]
    pub ablate: Vec<RuleClass>,
    /// Questions the resolve command may ask.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub tau_scope: Option<Scope>,
    /// Directory for cached remote oracle answers.
    #[arg(long, global = true)]
    pub oracle_cache: Option<PathBuf>,
    /// Also write the result as a Graphviz file.
    #[arg(long, global = true)]
    pub export_dot: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Scope {
    All,
    Entailment,
}

impl From<Scope> for TauScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::All => TauScope::AllRules,
            Scope::Entailment => TauScope::EntailmentOnly,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a belief graph for one question.
    Build {
        /// Question file: {"hypotheses": [...], "gold_index": .., "question_id": ..}.
        input: Option<PathBuf>,
        /// Candidate answer; repeat for each one. Used instead of a file.
        #[arg(long = "hypothesis")]
        hypotheses: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Make a graph self-consistent and report the answer.
    Reason {
        graph: PathBuf,
        /// Outcome document path.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print the outcome document instead of the summary.
        #[arg(long)]
        json: bool,
    },
    /// Like reason, asking yes/no questions on stdin to settle conflicts.
    Resolve {
        graph: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Consistency of a graph's own labels.
    Tau { graph: PathBuf },
    /// Graphviz text for a graph or outcome document.
    ExportDot {
        document: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Weighted CNF for a graph.
    ExportWcnf {
        graph: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Aggregate metrics over questions or graphs.
    Evaluate {
        /// JSON-lines file of questions, built with --oracle.
        #[arg(long)]
        questions: Option<PathBuf>,
        /// Graph documents.
        graphs: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Seeded synthetic graph with planted conflicts.
    Synth {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the engine in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8750")]
        listen: String,
        /// Mock oracle tables served under /v1/oracle.
        #[arg(long)]
        oracle_fixture: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Build { input, hypotheses, output } => commands::build(g, input, hypotheses, output),
        Command::Reason { graph, output, json } => commands::reason(g, &graph, output, json),
        Command::Resolve { graph, output } => commands::resolve(g, &graph, output),
        Command::Tau { graph } => commands::tau(g, &graph),
        Command::ExportDot { document, output } => commands::export_dot(g, &document, output),
        Command::ExportWcnf { graph, output } => commands::export_wcnf(g, &graph, output),
        Command::Evaluate { questions, graphs, output } => commands::evaluate(g, questions, graphs, output),
        Command::Synth { output } => commands::synth(g, output),
        Command::Serve { listen, oracle_fixture } => commands::serve(&listen, oracle_fixture),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
