//! `bertscore-viz`: score text pairs from the command line or run the HTTP service.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use bertscore_viz_core::{Error, ProviderConfig, ScoreOptions, ScoreResponse, Scorer, Vocab};
use bertscore_viz_service::{companion_vocab, router, AppState, ServiceConfig};
use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

const EXIT_RUNTIME: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderArg {
    Test,
    Model,
}

/// Token-level BERTScore between reference and candidate texts.
#[derive(Debug, Parser)]
#[command(name = "bertscore-viz", version)]
struct Args {
    /// Reference text (pair mode).
    #[arg(long)]
    reference: Option<String>,
    /// Candidate text (pair mode).
    #[arg(long)]
    candidate: Option<String>,
    /// File of reference texts, one per line (corpus mode).
    #[arg(long)]
    ref_file: Option<PathBuf>,
    /// File of candidate texts, aligned line by line with --ref-file.
    #[arg(long)]
    cand_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// WordPiece vocabulary; defaults to the model's vocab.txt, or the bundled
    /// demo vocabulary for the test provider.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    /// Model directory (config.json + model.safetensors) or weights file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Hidden layer used as embeddings: 0 = embedding output, -1 = last.
    #[arg(long, allow_hyphen_values = true)]
    layer: Option<i64>,
    /// Seed of the deterministic test provider.
    #[arg(long)]
    seed: Option<u64>,
    /// Embedding width of the deterministic test provider.
    #[arg(long)]
    dim: Option<usize>,
    /// Mix token position into test-provider vectors.
    #[arg(long)]
    contextual: bool,
    /// Truncate inputs to 512 tokens instead of failing.
    #[arg(long)]
    truncate: bool,
    /// Run the HTTP service on ADDR (e.g. 127.0.0.1:8080).
    #[arg(long, value_name = "ADDR")]
    serve: Option<SocketAddr>,
    /// Origin allowed by CORS in serve mode ("*" for any).
    #[arg(long)]
    cors_origin: Option<String>,
}

enum Mode {
    Pair { reference: String, candidate: String },
    Files { reference: PathBuf, candidate: PathBuf },
    Serve(SocketAddr),
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(format!("{}: {e}", e.code()))
    }
}

impl Args {
    fn mode(&self) -> Result<Mode, Failure> {
        let pair = self.reference.is_some() || self.candidate.is_some();
        let files = self.ref_file.is_some() || self.cand_file.is_some();
        let serve = self.serve.is_some();
        if [pair, files, serve].iter().filter(|&&m| m).count() != 1 {
            return Err(Failure::Usage(
                "choose exactly one of --reference/--candidate, --ref-file/--cand-file, or --serve"
                    .into(),
            ));
        }
        if let Some(addr) = self.serve {
            return Ok(Mode::Serve(addr));
        }
        if pair {
            return match (&self.reference, &self.candidate) {
                (Some(r), Some(c)) => Ok(Mode::Pair {
                    reference: r.clone(),
                    candidate: c.clone(),
                }),
                _ => Err(Failure::Usage("--reference and --candidate go together".into())),
            };
        }
        match (&self.ref_file, &self.cand_file) {
            (Some(r), Some(c)) => Ok(Mode::Files {
                reference: r.clone(),
                candidate: c.clone(),
            }),
            _ => Err(Failure::Usage("--ref-file and --cand-file go together".into())),
        }
    }

    /// Provider from flags, falling back to `base` for anything unspecified.
    fn provider_config(&self, base: &ProviderConfig) -> Result<ProviderConfig, Failure> {
        let kind = self.provider.unwrap_or(match base {
            ProviderConfig::DeterministicTest { .. } => ProviderArg::Test,
            ProviderConfig::ModelFile { .. } => ProviderArg::Model,
        });
        match kind {
            ProviderArg::Test => {
                let (dim, seed, contextual) = match *base {
                    ProviderConfig::DeterministicTest {
                        dim,
                        seed,
                        contextual,
                    } => (dim, seed, contextual),
                    ProviderConfig::ModelFile { .. } => (8, 0, false),
                };
                Ok(ProviderConfig::DeterministicTest {
                    dim: self.dim.unwrap_or(dim),
                    seed: self.seed.unwrap_or(seed),
                    contextual: self.contextual || contextual,
                })
            }
            ProviderArg::Model => {
                let (base_path, base_layer) = match base {
                    ProviderConfig::ModelFile { model_path, layer } => {
                        (Some(model_path.clone()), *layer)
                    }
                    ProviderConfig::DeterministicTest { .. } => (None, -1),
                };
                let model_path = self
                    .model
                    .clone()
                    .or(base_path)
                    .ok_or_else(|| Failure::Usage("--provider model requires --model".into()))?;
                Ok(ProviderConfig::ModelFile {
                    model_path,
                    layer: self.layer.unwrap_or(base_layer),
                })
            }
        }
    }
}

fn load_vocab(explicit: Option<&Path>, provider: &ProviderConfig) -> Result<Vocab, Error> {
    match (explicit, provider) {
        (Some(path), _) => Vocab::from_file(path),
        (None, ProviderConfig::ModelFile { model_path, .. }) => {
            Vocab::from_file(companion_vocab(model_path))
        }
        (None, ProviderConfig::DeterministicTest { .. }) => Ok(Vocab::demo()),
    }
}

fn tsv_row(r: &ScoreResponse) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}",
        r.precision,
        r.recall,
        r.f1,
        r.unmatched_reference.len(),
        r.unmatched_candidate.len()
    )
}

fn run_pair(args: &Args, scorer: &Scorer, reference: &str, candidate: &str) -> Result<String, Failure> {
    let options = ScoreOptions {
        truncate: args.truncate,
    };
    let response = scorer.score_response(reference, candidate, options)?;
    Ok(match args.format {
        Format::Json => response.to_json(),
        Format::Tsv => tsv_row(&response),
    })
}

#[derive(Serialize)]
struct CorpusSummary {
    pairs: usize,
    precision: f64,
    recall: f64,
    f1: f64,
}

fn read_lines(path: &Path) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Scores line-aligned files. Everything is scored before anything is
/// printed, so a failure leaves stdout empty.
fn run_files(args: &Args, scorer: &Scorer, ref_path: &Path, cand_path: &Path) -> Result<String, Failure> {
    let refs = read_lines(ref_path)?;
    let cands = read_lines(cand_path)?;
    if refs.len() != cands.len() {
        return Err(Failure::Runtime(format!(
            "line count mismatch: {} has {} lines, {} has {}",
            ref_path.display(),
            refs.len(),
            cand_path.display(),
            cands.len()
        )));
    }
    if refs.is_empty() {
        return Err(Failure::Runtime("input files contain no pairs".into()));
    }
    let options = ScoreOptions {
        truncate: args.truncate,
    };
    let responses = refs
        .par_iter()
        .zip(cands.par_iter())
        .enumerate()
        .map(|(i, (r, c))| {
            scorer
                .score_response(r, c, options)
                .map_err(|e| Failure::Runtime(format!("line {}: {}: {e}", i + 1, e.code())))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n = responses.len() as f64;
    let (p, r, f) = responses.iter().fold((0.0, 0.0, 0.0), |(p, r, f), resp| {
        (p + resp.precision, r + resp.recall, f + resp.f1)
    });
    let summary = CorpusSummary {
        pairs: responses.len(),
        precision: p / n,
        recall: r / n,
        f1: f / n,
    };

    let mut out = String::new();
    for resp in &responses {
        match args.format {
            Format::Json => out.push_str(&resp.to_json()),
            Format::Tsv => out.push_str(&tsv_row(resp)),
        }
        out.push('\n');
    }
    match args.format {
        Format::Json => {
            let wrapped = serde_json::json!({ "summary": summary });
            out.push_str(&wrapped.to_string());
        }
        Format::Tsv => out.push_str(&format!(
            "mean\t{}\t{}\t{}",
            summary.precision, summary.recall, summary.f1
        )),
    }
    Ok(out)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = terminate => {}
    }
}

fn run_serve(args: &Args, addr: SocketAddr) -> Result<(), Failure> {
    let base = ServiceConfig::from_env().map_err(|e| Failure::Usage(e.to_string()))?;
    let config = ServiceConfig {
        bind: addr,
        provider: args.provider_config(&base.provider)?,
        vocab_path: args.vocab.clone().or(base.vocab_path),
        cors_origin: args.cors_origin.clone().or(base.cors_origin),
    };
    let state = AppState::from_config(&config)?;

    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| Failure::Runtime(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let (listener, local) = bertscore_viz_service::bind(config.bind)
            .await
            .map_err(|e| Failure::Runtime(format!("cannot bind {}: {e}", config.bind)))?;
        println!("listening on http://{local}");
        let _ = std::io::stdout().flush();
        let app = router(Arc::new(state), config.cors_origin.as_deref());
        bertscore_viz_service::serve(listener, app, shutdown_signal())
            .await
            .map_err(|e| Failure::Runtime(format!("server error: {e}")))
    })
}

fn run(args: Args) -> Result<Option<String>, Failure> {
    let mode = args.mode()?;
    if let Mode::Serve(addr) = mode {
        run_serve(&args, addr)?;
        return Ok(None);
    }
    let provider = args.provider_config(&ProviderConfig::default())?;
    let vocab = load_vocab(args.vocab.as_deref(), &provider)?;
    let scorer = Scorer::from_config(vocab, &provider)?;
    match mode {
        Mode::Pair {
            reference,
            candidate,
        } => run_pair(&args, &scorer, &reference, &candidate).map(Some),
        Mode::Files {
            reference,
            candidate,
        } => run_files(&args, &scorer, &reference, &candidate).map(Some),
        Mode::Serve(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(args) {
        Ok(Some(out)) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
