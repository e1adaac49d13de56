//! Command-line entry point.
//!
//! Exit statuses: 0 ok, 1 partial result, 2 usage error, 3 internal error.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::analytics::{batch_report, EmotionLexicon, MatchMode};
use crate::domain::{seed_catalog, ScenarioCatalog};
use crate::gateway::{Gateway, MockScript};
use crate::profile::{
    extract_profile_updates, next_interview_question, source_from_answer, InterviewConfig, InterviewState,
    NextQuestion, QuestionList, SimilarityRule,
};
use crate::service::{merge_into_profile, replay_log, write_replay, AppState, Coach, ServiceConfig, SessionStore};

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARTIAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "emocoach", version, about = "Emotion-coaching session engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Token,
    Substring,
}

impl From<ModeArg> for MatchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Token => MatchMode::Token,
            ModeArg::Substring => MatchMode::Substring,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the WebSocket/HTTP service.
    Serve {
        /// TOML config file; EMOCOACH_* variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        store: Option<PathBuf>,
        /// Scenario catalog (TOML); the built-in catalog otherwise.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Rebuild session documents from an event log using the mock provider.
    Replay {
        log: PathBuf,
        /// Directory for the rebuilt documents.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Mock script (TOML); the built-in script otherwise.
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Per-session metrics table (CSV) for a store or sessions directory.
    Analyze {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, value_enum, default_value = "token")]
        mode: ModeArg,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the scenario catalog, or validate a catalog file.
    Scenarios {
        #[arg(long, value_name = "FILE")]
        validate: Option<PathBuf>,
    },
    /// Run the parent interview in the terminal.
    Interview {
        #[arg(long)]
        child: String,
        /// Config file whose routing section picks the provider.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Mock script; ignored when --config binds a live provider.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Store root to load and save the child's profile.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        max_followups: u32,
    },
}

/// Error carrying its exit status.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn internal(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INTERNAL,
        message: message.into(),
    }
}

pub fn run() -> ExitCode {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    ExitCode::from(execute(cli.command, &mut std::io::stdin().lock(), &mut std::io::stdout().lock()))
}

/// Runs one command, writing its output to `out`. Returns the exit status.
pub fn execute(command: Command, input: &mut dyn BufRead, out: &mut dyn Write) -> u8 {
    let result = match command {
        Command::Serve {
            config,
            bind,
            store,
            catalog,
        } => serve(config, bind, store, catalog, out),
        Command::Replay { log, out: dir, script } => replay(&log, dir.as_deref(), script.as_deref(), out),
        Command::Analyze {
            dir,
            lexicon,
            mode,
            out: file,
        } => analyze(&dir, &lexicon, mode.into(), file.as_deref(), out),
        Command::Scenarios { validate } => scenarios(validate.as_deref(), out),
        Command::Interview {
            child,
            config,
            script,
            store,
            max_followups,
        } => interview(&child, config, script, store, max_followups, input, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, Failure> {
    let mut config = match path {
        Some(p) => ServiceConfig::load(p).map_err(|e| usage(e.to_string()))?,
        None => ServiceConfig::default(),
    };
    config.apply_env().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

fn load_catalog(path: Option<&Path>) -> Result<ScenarioCatalog, Failure> {
    match path {
        None => Ok(seed_catalog()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            ScenarioCatalog::parse(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
    }
}

fn serve(
    config: Option<PathBuf>,
    bind: Option<String>,
    store: Option<PathBuf>,
    catalog: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<u8, Failure> {
    let mut config = load_config(config.as_deref())?;
    if let Some(b) = bind {
        config.server.bind = b;
    }
    if let Some(s) = store {
        config.server.store_root = s;
    }
    let catalog = load_catalog(catalog.as_deref())?;
    // the HTTP provider's blocking client must be built outside the runtime
    let gateway = Gateway::from_config(&config.routing).map_err(|e| usage(e.to_string()))?;
    let app = AppState::new(&config, gateway, catalog).map_err(|e| usage(e.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| internal(e.to_string()))?;
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.server.bind)
            .await
            .map_err(|e| usage(format!("binding {}: {e}", config.server.bind)))?;
        let addr = listener.local_addr().map_err(|e| internal(e.to_string()))?;
        writeln!(out, "listening on {addr}").map_err(|e| internal(e.to_string()))?;
        out.flush().map_err(|e| internal(e.to_string()))?;
        crate::service::serve(app.clone(), listener, shutdown_signal())
            .await
            .map_err(|e| internal(e.to_string()))
    });
    drop(runtime);
    drop(app);
    result.map(|()| EXIT_OK)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

fn mock_gateway(script: Option<&Path>) -> Result<Gateway, Failure> {
    let script = match script {
        Some(p) => MockScript::load(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => MockScript::builtin(),
    };
    Ok(Gateway::mock(script))
}

fn replay(log: &Path, dir: Option<&Path>, script: Option<&Path>, out: &mut dyn Write) -> Result<u8, Failure> {
    if !log.is_file() {
        return Err(usage(format!("{}: no such event log", log.display())));
    }
    let coach = Coach::new(mock_gateway(script)?);
    let outcome = replay_log(log, &coach).map_err(|e| internal(e.to_string()))?;
    let io = |e: std::io::Error| internal(e.to_string());
    match &outcome.runtime {
        None => writeln!(out, "empty log: no session").map_err(io)?,
        Some(rt) => {
            writeln!(
                out,
                "session {}: {} events applied, {} turns, {} advice items, finished: {}",
                rt.id(),
                outcome.applied,
                rt.session.transcript.utterances.len(),
                rt.advice.len(),
                rt.session.is_finished()
            )
            .map_err(io)?;
        }
    }
    if let Some(dir) = dir {
        if write_replay(dir, &outcome).map_err(|e| internal(e.to_string()))? {
            writeln!(out, "documents written to {}", dir.display()).map_err(io)?;
        }
    }
    match &outcome.halted {
        Some(h) => {
            writeln!(out, "halted at line {}: {}", h.line, h.reason).map_err(io)?;
            Ok(EXIT_PARTIAL)
        }
        None => Ok(EXIT_OK),
    }
}

fn analyze(dir: &Path, lexicon: &Path, mode: MatchMode, file: Option<&Path>, out: &mut dyn Write) -> Result<u8, Failure> {
    if !dir.is_dir() {
        return Err(usage(format!("{}: not a directory", dir.display())));
    }
    let lexicon = EmotionLexicon::load(lexicon, mode).map_err(|e| usage(e.to_string()))?;
    let report = batch_report(dir, &lexicon).map_err(|e| internal(e.to_string()))?;
    let csv = report.to_csv();
    match file {
        Some(path) => crate::persist::write_atomic(path, csv.as_bytes()).map_err(|e| internal(e.to_string()))?,
        None => out.write_all(csv.as_bytes()).map_err(|e| internal(e.to_string()))?,
    }
    for w in &report.warnings {
        eprintln!("warning: skipped {w}");
    }
    Ok(if report.is_partial() { EXIT_PARTIAL } else { EXIT_OK })
}

fn scenarios(validate: Option<&Path>, out: &mut dyn Write) -> Result<u8, Failure> {
    let io = |e: std::io::Error| internal(e.to_string());
    match validate {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            match ScenarioCatalog::parse(&text) {
                Ok(c) => {
                    writeln!(out, "{} scenarios ok", c.len()).map_err(io)?;
                    Ok(EXIT_OK)
                }
                Err(e) => {
                    writeln!(out, "invalid: {e}").map_err(io)?;
                    Ok(EXIT_PARTIAL)
                }
            }
        }
        None => {
            for s in seed_catalog().scenarios() {
                writeln!(out, "{}\t{}\t{}", s.id, s.category.as_str(), s.title).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn interview(
    child: &str,
    config: Option<PathBuf>,
    script: Option<PathBuf>,
    store: Option<PathBuf>,
    max_followups: u32,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<u8, Failure> {
    let io = |e: std::io::Error| internal(e.to_string());
    let gateway = match (&config, &script) {
        (Some(_), _) => {
            let config = load_config(config.as_deref())?;
            Gateway::from_config(&config.routing).map_err(|e| usage(e.to_string()))?
        }
        (None, s) => mock_gateway(s.as_deref())?,
    };
    let store = store
        .map(|root| SessionStore::open(root).map_err(|e| internal(e.to_string())))
        .transpose()?;
    let mut profile = match &store {
        Some(s) => s.load_profile(child).map_err(|e| internal(e.to_string()))?,
        None => crate::profile::ChildEmotionalProfile::new(child),
    };
    let interview_id = format!("{child}-interview-{}", profile.version + 1);
    let mut state = InterviewState::new(&interview_id, QuestionList::seed(), InterviewConfig { max_followups });
    let rule = SimilarityRule::default();
    let mut answer: Option<String> = None;
    let mut line = String::new();
    loop {
        let answered = state.answers.len();
        let next = next_interview_question(&gateway, &mut state, answer.as_deref());
        if let Some(a) = state.answers.get(answered) {
            let source = source_from_answer(&a.answer_id, &a.question_text, &a.text);
            let request_id = format!("{interview_id}/extract/{}", a.question_id);
            let extraction = extract_profile_updates(&gateway, &request_id, &source, &profile);
            let merged = merge_into_profile(&mut profile, &extraction.entries, &rule);
            if !merged.appended.is_empty() || !merged.merged.is_empty() {
                writeln!(out, "  (profile: {} new, {} merged)", merged.appended.len(), merged.merged.len()).map_err(io)?;
            }
        }
        match next {
            NextQuestion::Done => break,
            NextQuestion::Ask(q) => {
                writeln!(out, "[{}] {}", q.question_id, q.text).map_err(io)?;
                out.flush().map_err(io)?;
                line.clear();
                if input.read_line(&mut line).map_err(io)? == 0 {
                    writeln!(out, "interview stopped before the last question").map_err(io)?;
                    if let Some(s) = &store {
                        s.save_profile(&profile).map_err(|e| internal(e.to_string()))?;
                    }
                    return Ok(EXIT_PARTIAL);
                }
                answer = Some(line.trim().to_string());
            }
        }
    }
    writeln!(out, "interview complete: {} answers, {} profile entries", state.answers.len(), profile.entries.len())
        .map_err(io)?;
    write!(out, "{}", profile.digest()).map_err(io)?;
    if let Some(s) = &store {
        s.save_profile(&profile).map_err(|e| internal(e.to_string()))?;
    }
    Ok(EXIT_OK)
}
