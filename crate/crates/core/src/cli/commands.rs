use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::config::{validate_config, ClientKind, LlmConfig};
use super::phase::{embed_examples, run_phase, train_and_evaluate};
use super::CliError;
use crate::classifier::{emit_report, evaluate, load_checkpoint, render_markdown, EvalReport, Patience, TrainingConfig};
use crate::corpus::{
    apply_enhancements, class_distribution, encode_categories, load_dataset, merge_augmented, save_jsonl, split, to_binary,
    DataFormat, Dataset, Mode, SplitRatios, VersionTag, DEFAULT_SPLIT_SEED,
};
use crate::encoder::{EncoderRegistry, Pooling};
use crate::llm::{annotate_batch, enhance_batch, Language, MockFallback};
use crate::review::{router, ReviewQueue, ReviewService};
use crate::util::SystemClock;

#[derive(Debug, Parser)]
#[command(name = "ironia", version, about = "Irony annotation and classification workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pre-label entries with the classification prompt.
    Annotate {
        #[arg(long)]
        input: PathBuf,
        /// Annotations JSONL to write.
        #[arg(long)]
        output: PathBuf,
        /// Where to record entries the model failed on.
        #[arg(long)]
        failures: Option<PathBuf>,
        /// Also enqueue the annotations into this review event log.
        #[arg(long)]
        queue: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Expand entry texts with the enhancement prompt.
    Enhance {
        #[arg(long)]
        input: PathBuf,
        /// Dataset JSONL with expanded texts.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        failures: Option<PathBuf>,
        /// Mock client echoes texts without a fixture entry.
        #[arg(long)]
        mock_identity: bool,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Serve the review queue over HTTP.
    ReviewServe {
        #[arg(long)]
        queue: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long, default_value_t = crate::review::DEFAULT_LEASE_MINUTES)]
        lease_minutes: i64,
    },
    /// Write the verified entries of a fully reviewed queue.
    Export {
        #[arg(long)]
        queue: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Append verified entries to a primary dataset.
    Merge {
        #[arg(long)]
        primary: PathBuf,
        #[arg(long)]
        verified: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a head on one encoder and save the checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "stub")]
        encoder: String,
        #[arg(long)]
        output: PathBuf,
        /// Training history JSON.
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        training: TrainArgs,
    },
    /// Score a saved head on the test split (or the whole dataset).
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        whole: bool,
        /// Report JSON to write; markdown always goes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run one experiment phase from a TOML config.
    Phase {
        #[arg(long)]
        config: PathBuf,
    },
    /// Combine report JSON files into markdown and CSV tables.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        markdown: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Class distribution of a dataset, or agreement figures of a review queue.
    Stats {
        #[arg(long, conflicts_with = "queue", required_unless_present = "queue")]
        data: Option<PathBuf>,
        #[arg(long, default_value = "multiclass")]
        mode: Mode,
        #[arg(long)]
        queue: Option<PathBuf>,
        /// Report over resolved items even if some are still open.
        #[arg(long)]
        partial: bool,
    },
}

#[derive(Debug, Args)]
pub struct LlmArgs {
    #[arg(long, value_enum, default_value = "mock")]
    pub client: ClientArg,
    /// Mock fixture JSONL of {key, response} lines.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value = "OPENAI_API_KEY")]
    pub api_key_env: String,
    #[arg(long, default_value = "es")]
    pub language: Language,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ClientArg {
    Mock,
    Remote,
}

impl LlmArgs {
    fn config(&self) -> LlmConfig {
        LlmConfig {
            client: match self.client {
                ClientArg::Mock => ClientKind::Mock,
                ClientArg::Remote => ClientKind::Remote,
            },
            fixture: self.fixture.clone(),
            base_url: self.base_url.clone(),
            model: self.model.clone(),
            api_key_env: self.api_key_env.clone(),
            language: self.language,
            max_in_flight: self.max_in_flight,
            retries: self.retries,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "multiclass")]
    pub mode: Mode,
    #[arg(long, default_value_t = DEFAULT_SPLIT_SEED)]
    pub split_seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 1500)]
    pub max_epochs: usize,
    /// Epochs without improvement; 0 disables early stopping.
    #[arg(long, default_value_t = 50)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.1)]
    pub divergence_gap: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    #[arg(long, default_value = "first_token")]
    pub pooling: Pooling,
}

fn load_in_mode(args: &DataArgs) -> Result<Dataset, CliError> {
    let ds = load_input(&args.data)?;
    let ds = if args.mode == Mode::Binary { to_binary(&ds)? } else { ds };
    Ok(encode_categories(&ds)?)
}

fn load_input(path: &Path) -> Result<Dataset, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("file not found: {}", path.display())));
    }
    Ok(load_dataset(path, DataFormat::from_path(path))?)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(|e| CliError::Data(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Annotate { input, output, failures, queue, llm } => {
            let ds = load_input(&input)?;
            let cfg = llm.config();
            let client = cfg.build_client(MockFallback::Fail)?;
            let outcome = annotate_batch(ds.entries(), client.as_ref(), &cfg.policy(), &SystemClock)?;
            write_jsonl(&output, &outcome.ok)?;
            if let Some(path) = failures {
                write_jsonl(&path, &outcome.failures)?;
            }
            eprintln!("annotated {} entries, {} failures", outcome.ok.len(), outcome.failures.len());
            if let Some(path) = queue {
                let mut q = ReviewQueue::open(path, Arc::new(SystemClock))?;
                let batch = outcome.ok.into_iter().map(|a| (ds.get(&a.entry_id).expect("same dataset").clone(), a)).collect();
                eprintln!("enqueued {} items", q.enqueue(batch)?);
            }
            Ok(())
        }
        Command::Enhance { input, output, failures, mock_identity, llm } => {
            let ds = load_input(&input)?;
            let cfg = llm.config();
            let fallback = if mock_identity { MockFallback::Identity } else { MockFallback::Fail };
            let client = cfg.build_client(fallback)?;
            let outcome = enhance_batch(ds.entries(), client.as_ref(), &cfg.policy())?;
            if let Some(path) = failures {
                write_jsonl(&path, &outcome.failures)?;
            }
            if !outcome.failures.is_empty() {
                return Err(CliError::Backend(format!("{} entries could not be enhanced", outcome.failures.len())));
            }
            let enhanced = apply_enhancements(&ds, outcome.ok.iter().map(|e| (e.entry_id.as_str(), e.expanded_text.as_str())))?;
            save_jsonl(&enhanced, &output)?;
            eprintln!("enhanced {} entries", enhanced.len());
            Ok(())
        }
        Command::ReviewServe { queue, bind, lease_minutes } => {
            let q = ReviewQueue::open(&queue, Arc::new(SystemClock))?.with_lease(chrono::Duration::minutes(lease_minutes));
            let app = router(ReviewService::new(q));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind).await?;
                log::info!("review service listening on {}", listener.local_addr()?);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
            Ok(())
        }
        Command::Export { queue, output } => {
            let q = ReviewQueue::open(&queue, Arc::new(SystemClock))?;
            let verified = q.export_verified()?;
            let mut out = BufWriter::new(File::create(&output)?);
            crate::corpus::write_jsonl(&mut out, &verified)?;
            out.flush()?;
            eprintln!("exported {} verified entries ({} unreadable)", verified.len(), q.counts().unreadable);
            Ok(())
        }
        Command::Merge { primary, verified, output } => {
            let p = load_input(&primary)?;
            let v = load_input(&verified)?;
            let merged = merge_augmented(&p, v.entries())?;
            save_jsonl(&merged, &output)?;
            eprintln!("{} + {} = {} entries", p.len(), v.len(), merged.len());
            Ok(())
        }
        Command::Train { data, encoder, output, history, training } => {
            let ds = load_in_mode(&data)?;
            let parts = split(&ds, SplitRatios::default(), data.split_seed)?;
            let config = TrainingConfig {
                max_epochs: training.max_epochs,
                patience: if training.patience == 0 { Patience::Infinite } else { Patience::Epochs(training.patience) },
                divergence_gap: training.divergence_gap,
                learning_rate: training.learning_rate,
                batch_size: training.batch_size,
                seed: training.seed,
                mode: data.mode,
            };
            let registry = EncoderRegistry::from_env();
            let (report, hist, head) = train_and_evaluate(&parts, &registry, &encoder, training.pooling, &config)?;
            crate::classifier::save_checkpoint(&output, &head, &encoder, training.pooling, training.seed)?;
            if let Some(path) = history {
                write_json(&path, &hist)?;
            }
            print!("{}", render_markdown(std::slice::from_ref(&report))?);
            Ok(())
        }
        Command::Evaluate { data, checkpoint, whole, output } => {
            let (header, head) = load_checkpoint(&checkpoint)?;
            if header.mode != data.mode {
                return Err(CliError::Config(format!("checkpoint is {} but --mode is {}", header.mode, data.mode)));
            }
            let ds = load_in_mode(&data)?;
            let target = if whole { ds } else { split(&ds, SplitRatios::default(), data.split_seed)?.test };
            let examples = embed_examples(&target, &EncoderRegistry::from_env(), &header.encoder_id, header.pooling)?;
            let report = evaluate(&head, &examples)?.with_model(header.encoder_id.clone());
            if let Some(path) = output {
                write_json(&path, &report)?;
            }
            print!("{}", render_markdown(std::slice::from_ref(&report))?);
            Ok(())
        }
        Command::Phase { config } => {
            let cfg = validate_config(&config)?;
            let out = run_phase(&cfg)?;
            print!("{}", std::fs::read_to_string(&out.markdown)?);
            eprintln!("wrote {} files to {}", out.files.len(), cfg.output_dir.display());
            Ok(())
        }
        Command::Report { input, markdown, csv } => {
            let reports = input
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                    serde_json::from_str::<EvalReport>(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let (md, csv_text) = emit_report(&reports)?;
            match &markdown {
                Some(p) => std::fs::write(p, &md)?,
                None => print!("{md}"),
            }
            if let Some(p) = csv {
                std::fs::write(p, csv_text)?;
            }
            Ok(())
        }
        Command::Stats { data, mode, queue, partial } => {
            if let Some(path) = queue {
                let q = ReviewQueue::open(&path, Arc::new(SystemClock))?;
                let report = if partial { q.stats().agreement } else { q.agreement_report()? };
                let c = q.counts();
                println!("{report}");
                println!("\n{} items: {} pending, {} assigned, {} resolved", c.total, c.pending, c.assigned, c.resolved);
            } else if let Some(path) = data {
                let ds = load_input(&path)?;
                let ds = if mode == Mode::Binary { to_binary(&ds)? } else { ds };
                println!("{}", class_distribution(&ds)?);
                let versions = ds.entries().iter().filter(|e| e.version_tag == VersionTag::Augmented).count();
                if versions > 0 {
                    println!("\n{versions} entries come from verified annotations");
                }
            }
            Ok(())
        }
    }
}

