//! Operator CLI. Exit codes: 0 success, 1 domain error, 2 usage error.

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use advisor_core::corpus::{self, ChunkingConfig};
use advisor_core::eval::{self, PublishedReference, SystemLabels};
use advisor_core::generation::HistoryTurn;
use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::ServiceConfig;
use crate::pipeline;
use crate::state::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "advisor", version, about = "Retrieval-augmented advisory service")]
pub struct Cli {
    /// TOML config file; `ADVISOR__SECTION__KEY` variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize, correct and segment the documents of a manifest.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        min_tokens: Option<usize>,
        #[arg(long)]
        max_tokens: Option<usize>,
        /// Write `chunks.jsonl` instead of one Markdown file per chunk.
        #[arg(long)]
        jsonl: bool,
    },
    /// Embed chunk files and persist the vector index.
    Index {
        /// Chunk directory or `.jsonl` file [default: config corpus_dir].
        #[arg(long)]
        chunks: Option<PathBuf>,
        /// Index directory [default: config index_dir].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer one question and print the evidence scores.
    Query {
        #[arg(long)]
        text: String,
        /// Number of evidence chunks.
        #[arg(long)]
        k: Option<usize>,
        /// Also print raw component scores and per-sentence support.
        #[arg(long)]
        explain: bool,
        /// Index directory [default: config index_dir].
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Aggregate expert scores into a comparison report.
    Eval {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        coverage: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Published display values to check the computed report against.
        #[arg(long)]
        published: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Startup(#[from] state::StartupError),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error(transparent)]
    Index(#[from] advisor_core::index::IndexError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error("{0}")]
    Query(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, CliError> {
    Ok(ServiceConfig::load(path, std::env::vars())?)
}

/// Parse `args` and run the command, writing to `out` and `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return if code == 0 { 0 } else { 2 };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { manifest, rules, out: dir, min_tokens, max_tokens, jsonl } => {
            let chunking = ChunkingConfig {
                min_tokens: min_tokens.unwrap_or(cfg.chunking.min_tokens),
                max_tokens: max_tokens.unwrap_or(cfg.chunking.max_tokens),
                min_terminal_tokens: cfg.chunking.min_terminal_tokens.min(min_tokens.unwrap_or(usize::MAX)),
            };
            let docs = corpus::load_manifest(&manifest)?;
            let rules = match rules.or(cfg.ingest.rules) {
                Some(p) => corpus::load_rules(&p)?,
                None => Vec::new(),
            };
            let (chunks, summary) = pipeline::ingest(&docs, &rules, &chunking)?;
            if jsonl {
                std::fs::create_dir_all(&dir)?;
                corpus::write_jsonl(&dir.join(advisor_core::index::CHUNKS_FILE), &chunks)?;
            } else {
                corpus::write_chunk_dir(&dir, &chunks)?;
            }
            writeln!(
                out,
                "ingested documents={} chunks={} corrections={} out={}",
                summary.documents,
                summary.chunks,
                summary.corrections,
                dir.display()
            )?;
        }
        Command::Index { chunks, out: dir } => {
            let src = chunks.unwrap_or_else(|| cfg.corpus_dir.clone());
            let dir = dir.unwrap_or_else(|| cfg.index_dir.clone());
            let chunks = corpus::read_chunk_dir(&src)?;
            let provider = state::make_provider(&cfg);
            let index = pipeline::build_index(
                &chunks,
                provider.as_ref(),
                cfg.index.build,
                cfg.index.query,
                cfg.embedding.batch_size,
            )?;
            index.save(&dir)?;
            writeln!(
                out,
                "indexed chunks={} dims={} provider={} out={}",
                index.len(),
                index.dims(),
                index.provider(),
                dir.display()
            )?;
        }
        Command::Query { text, k, explain, index } => {
            if let Some(dir) = index {
                cfg.index_dir = dir;
            }
            if let Some(k) = k {
                cfg.retrieval.k_final = k;
                cfg.retrieval.k_candidates = cfg.retrieval.k_candidates.max(k);
            }
            let state = AppState::build(cfg)?;
            print_answer(&state, &text, explain, out)?;
        }
        Command::Serve { bind, port } => {
            if let Some(b) = bind {
                cfg.server.bind = b;
            }
            if let Some(p) = port {
                cfg.server.port = p;
            }
            init_logging();
            let state = Arc::new(AppState::build(cfg)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::serve(state))?;
        }
        Command::Eval { records, baseline, coverage, out: dir, published } => {
            let cand = eval::read_eval_records(&records)?;
            let base = eval::read_eval_records(&baseline)?;
            let cov = match coverage {
                Some(p) => eval::read_coverage_records(&p)?,
                None => Vec::new(),
            };
            let published: Option<PublishedReference> = match published {
                Some(p) => {
                    let raw = std::fs::read_to_string(&p)?;
                    Some(serde_json::from_str(&raw).map_err(|e| eval::EvalError::Parse {
                        path: p.display().to_string(),
                        line: e.line(),
                        message: e.to_string(),
                    })?)
                }
                None => None,
            };
            let provider = state::make_provider(&cfg);
            let report = eval::build_report(
                &cand,
                &base,
                &cov,
                provider.as_ref(),
                &SystemLabels::default(),
                published.as_ref(),
            )?;
            eval::write_report(&report, &dir)?;
            writeln!(
                out,
                "composite candidate={:.2} baseline={:.2} gain={:.1}%",
                report.composite.candidate_display, report.composite.baseline_display, report.composite.gain_display
            )?;
            for c in report.reference_checks.iter().filter(|c| !c.matches) {
                let computed = c.computed.map_or("missing".to_owned(), |v| v.to_string());
                writeln!(out, "discrepancy {}: computed {computed} vs published {}", c.key, c.published)?;
            }
            writeln!(out, "report written to {}", dir.display())?;
        }
    }
    Ok(())
}

fn print_answer(state: &AppState, question: &str, explain: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let retrieval = state
        .advisor
        .retrieve(question)
        .map_err(|e| CliError::Query(e.to_string()))?;
    let answer = state
        .advisor
        .answer_from(question, retrieval, &[] as &[HistoryTurn])
        .map_err(|e| CliError::Query(e.to_string()))?;
    let g = &answer.generation;
    writeln!(out, "answer: {}", g.answer_text)?;
    writeln!(out, "citations: {}", g.citations.join(" "))?;
    writeln!(
        out,
        "grounding: sentences={} flagged={} disclaimer={}",
        g.grounding.len(),
        g.grounding.iter().filter(|s| s.flagged).count(),
        g.disclaimer_added
    )?;
    writeln!(out, "evidence:")?;
    for (i, it) in answer.retrieval.items.iter().enumerate() {
        write!(
            out,
            "  [{}] {} fused={:.4} semantic={:.4} lexical={:.4} metadata={:.1}",
            i + 1,
            it.chunk_id,
            it.fused,
            it.semantic,
            it.lexical,
            it.metadata_boost
        )?;
        if explain {
            write!(out, " semantic_raw={:.4} lexical_raw={:.4}", it.semantic_raw, it.lexical_raw)?;
        }
        writeln!(out, " topic=\"{}\"", it.topic)?;
    }
    if explain {
        writeln!(out, "support:")?;
        for s in &g.grounding {
            let block = s.best_block.map_or("-".to_owned(), |b| format!("[{b}]"));
            let mark = if s.flagged { " FLAGGED" } else { "" };
            writeln!(out, "  {:.3} {block}{mark} {}", s.support, s.sentence)?;
        }
    }
    Ok(())
}

fn init_logging() {
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .try_init();
}

