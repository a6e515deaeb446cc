use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};

use belief_client::api::*;
use belief_core::construction::MockFixture;
use belief_core::document::OutcomeDocument;
use belief_core::{HypothesisSet, Label};
use belief_server::AppState;

use crate::error::CliError;
use crate::inputs::*;
use crate::Global;

fn json_text<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn export_dot_for(g: &Global, engine: &Engine, outcome: &OutcomeDocument) -> Result<(), CliError> {
    if let Some(path) = &g.export_dot {
        let text = engine.client.export_dot(&DotRequest { graph: None, outcome: Some(outcome.clone()) })?;
        write_output(Some(path), &text)?;
    }
    Ok(())
}

pub fn build(g: &Global, input: Option<PathBuf>, hypotheses: Vec<String>, output: Option<PathBuf>) -> Result<(), CliError> {
    let question = match (input, hypotheses.is_empty()) {
        (Some(path), true) => {
            let q: HypothesisSet = read_json(&path)?;
            q.validate().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            q
        }
        (None, false) => HypothesisSet::new(hypotheses).map_err(|e| CliError::Input(e.to_string()))?,
        _ => return Err(CliError::Input("give a question file or --hypothesis values, not both".into())),
    };
    let config = run_config(g)?;
    let oracle = oracle_spec(g)?;
    let engine = engine(g)?;
    let doc = engine.client.build(&BuildRequest { question, oracle, config })?;
    if let Some(path) = &g.export_dot {
        let text = engine.client.export_dot(&DotRequest { graph: Some(doc.clone()), outcome: None })?;
        write_output(Some(path), &text)?;
    }
    write_output(output.as_deref(), &doc.to_json())
}

pub fn reason(g: &Global, graph: &Path, output: Option<PathBuf>, json: bool) -> Result<(), CliError> {
    let graph = read_graph(graph)?;
    let config = run_config(g)?;
    let engine = engine(g)?;
    let ablate = g.ablate.iter().copied().collect();
    let outcome = engine.client.reason(&ReasonRequest { graph, ablate, config })?;
    if let Some(path) = &output {
        write_output(Some(path), &outcome.to_json())?;
    }
    export_dot_for(g, &engine, &outcome)?;
    if json {
        write_output(None, &outcome.to_json())
    } else {
        write_output(None, &outcome.summary_text())
    }
}

fn parse_verdict(line: &str) -> Option<Label> {
    match line.trim().to_ascii_lowercase().as_str() {
        "y" | "yes" | "t" | "true" => Some(Label::True),
        "n" | "no" | "f" | "false" => Some(Label::False),
        _ => None,
    }
}

pub fn resolve(g: &Global, graph: &Path, output: Option<PathBuf>) -> Result<(), CliError> {
    if !g.ablate.is_empty() {
        return Err(CliError::Input("--ablate does not apply to resolve".into()));
    }
    let graph = read_graph(graph)?;
    let config = run_config(g)?;
    let engine = engine(g)?;
    let stdin = std::io::stdin();
    if !stdin.is_terminal() {
        log::warn!("input is not a terminal; answers are read line by line and the loop stops at end of input");
    }
    let mut lines = stdin.lock().lines();
    let mut out = std::io::stdout();

    let mut state = engine.client.start_resolution(&ResolveRequest { graph, config })?;
    let mut fallback = false;
    while let Some(query) = state.pending.clone() {
        let verdict = loop {
            let _ = write!(out, "Is this true? {} [y/n] ", query.text);
            let _ = out.flush();
            match lines.next() {
                Some(Ok(line)) => match parse_verdict(&line) {
                    Some(v) => {
                        let _ = writeln!(out, "{}", if v.is_true() { "yes" } else { "no" });
                        break Some(v);
                    }
                    None => {
                        let _ = writeln!(out, "\nplease answer y or n");
                    }
                },
                Some(Err(e)) => return Err(CliError::Input(format!("reading answers: {e}"))),
                None => break None,
            }
        };
        match verdict {
            Some(v) => state = engine.client.answer(&state.session, v)?,
            None => {
                let _ = writeln!(out);
                log::warn!("no more answers; keeping the {} given so far", state.queries.len());
                fallback = true;
                break;
            }
        }
    }
    let outcome = engine.client.finish_resolution(&state.session, fallback)?;
    if let Some(path) = &output {
        write_output(Some(path), &outcome.to_json())?;
    }
    export_dot_for(g, &engine, &outcome)?;
    write_output(None, &outcome.summary_text())
}

pub fn tau(g: &Global, graph: &Path) -> Result<(), CliError> {
    let graph = read_graph(graph)?;
    let config = run_config(g)?;
    let engine = engine(g)?;
    let report = engine.client.tau(&TauRequest { graph, assignment: None, scope: config.tau_scope })?;
    write_output(None, &json_text(&report))
}

pub fn export_dot(g: &Global, document: &Path, output: Option<PathBuf>) -> Result<(), CliError> {
    let request = match read_document(document)? {
        Document::Graph(graph) => DotRequest { graph: Some(graph), outcome: None },
        Document::Outcome(outcome) => DotRequest { graph: None, outcome: Some(outcome) },
    };
    let engine = engine(g)?;
    write_output(output.as_deref(), &engine.client.export_dot(&request)?)
}

pub fn export_wcnf(g: &Global, graph: &Path, output: Option<PathBuf>) -> Result<(), CliError> {
    let graph = read_graph(graph)?;
    let engine = engine(g)?;
    write_output(output.as_deref(), &engine.client.export_wcnf(&graph)?)
}

pub fn evaluate(g: &Global, questions: Option<PathBuf>, graphs: Vec<PathBuf>, output: Option<PathBuf>) -> Result<(), CliError> {
    let config = run_config(g)?;
    let request = match (questions, graphs.is_empty()) {
        (Some(path), true) => EvaluateRequest {
            questions: read_questions(&path)?,
            graphs: Vec::new(),
            oracle: Some(oracle_spec(g)?),
            config,
        },
        (None, false) => EvaluateRequest {
            questions: Vec::new(),
            graphs: graphs.iter().map(|p| read_graph(p)).collect::<Result<_, _>>()?,
            oracle: None,
            config,
        },
        _ => return Err(CliError::Input("give --questions or graph files, not both".into())),
    };
    let engine = engine(g)?;
    let report = engine.client.evaluate(&request)?;
    eprintln!(
        "{} questions, {} failed; consistency {:.4} -> {:.4}",
        report.questions.len(),
        report.failures.len(),
        report.mean_consistency_before,
        report.mean_consistency_after
    );
    write_output(output.as_deref(), &json_text(&report))
}

pub fn synth(g: &Global, output: Option<PathBuf>) -> Result<(), CliError> {
    let config = run_config(g)?;
    let engine = engine(g)?;
    let doc = engine.client.synthetic(&SynthRequest { synth: Default::default(), config })?;
    write_output(output.as_deref(), &doc.to_json())
}

pub fn serve(listen: &str, oracle_fixture: Option<PathBuf>) -> Result<(), CliError> {
    let fixture: Option<MockFixture> = oracle_fixture.as_deref().map(read_json).transpose()?;
    let state = AppState::with_fixture(fixture.as_ref()).map_err(|e| CliError::Input(e.to_string()))?;
    belief_server::run_blocking(listen, state).map_err(|e| CliError::Internal(format!("engine on {listen}: {e}")))
}
