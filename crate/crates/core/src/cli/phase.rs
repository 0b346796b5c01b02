use std::fs;
use std::path::{Path, PathBuf};

use super::config::{Phase, RunConfig};
use super::CliError;
use crate::classifier::{
    emit_report, evaluate, metrics_from_confusion, save_checkpoint, train, Averaging, ConfusionMatrix, EvalReport,
    Examples, HeadParams, TrainingConfig, TrainingHistory,
};
use crate::corpus::{
    encode_categories, load_dataset, merge_augmented, split, to_binary, DataFormat, Dataset, Mode, Split,
};
use crate::encoder::{EncoderRegistry, Pooling};
use crate::llm::{annotate_batch, LlmClient, MockFallback};
use crate::util::{Clock, SystemClock};

/// Files written by a phase run.
#[derive(Debug, Clone)]
pub struct PhaseOutput {
    pub reports: Vec<EvalReport>,
    pub markdown: PathBuf,
    pub csv: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Turns an encoder or model id into a file-name fragment.
pub fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

fn load(path: &Path) -> Result<Dataset, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("dataset not found: {}", path.display())));
    }
    Ok(load_dataset(path, DataFormat::from_path(path))?)
}

/// Loads the dataset a phase trains on, in the configured mode with
/// `category_encoded` filled in.
pub fn phase_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let ds = match cfg.phase {
        Phase::BaselineGpt | Phase::BaselineBert => load(&cfg.data.primary)?,
        Phase::Enhanced => load(cfg.data.enhanced.as_deref().ok_or_else(|| CliError::Config("data.enhanced missing".into()))?)?,
        Phase::Augmented => {
            let primary = load(&cfg.data.primary)?;
            let verified =
                load(cfg.data.verified.as_deref().ok_or_else(|| CliError::Config("data.verified missing".into()))?)?;
            merge_augmented(&primary, verified.entries())?
        }
    };
    let ds = if cfg.mode == Mode::Binary { to_binary(&ds)? } else { ds };
    Ok(encode_categories(&ds)?)
}

pub fn embed_examples(
    ds: &Dataset,
    registry: &EncoderRegistry,
    encoder_id: &str,
    pooling: Pooling,
) -> Result<Examples, CliError> {
    let texts: Vec<&str> = ds.entries().iter().map(|e| e.text.as_str()).collect();
    let inputs = registry.embed(&texts, encoder_id, pooling)?;
    Ok(Examples::new(inputs, ds.class_indices()?)?)
}

/// Embeds the split, trains a fresh head and scores it on the test part.
pub fn train_and_evaluate(
    parts: &Split,
    registry: &EncoderRegistry,
    encoder_id: &str,
    pooling: Pooling,
    training: &TrainingConfig,
) -> Result<(EvalReport, TrainingHistory, HeadParams), CliError> {
    let train_set = embed_examples(&parts.train, registry, encoder_id, pooling)?;
    let val_set = embed_examples(&parts.val, registry, encoder_id, pooling)?;
    let test_set = embed_examples(&parts.test, registry, encoder_id, pooling)?;
    let head = HeadParams::init(training.mode.num_classes(), training.seed)?;
    let (head, history) = train(head, &train_set, &val_set, training)?;
    log::info!(
        "{encoder_id}: {} epochs ({:?}), best epoch {}",
        history.len(),
        history.stop_reason,
        history.best_epoch
    );
    let report = evaluate(&head, &test_set)?.with_model(encoder_id);
    Ok((report, history, head))
}

/// Scores machine tags for the test split directly against gold labels.
/// Entries the model failed on are left out of the confusion matrix.
pub fn score_machine_tags(
    test: &Dataset,
    client: &dyn LlmClient,
    cfg: &RunConfig,
    clock: &dyn Clock,
) -> Result<(EvalReport, Vec<crate::llm::Failure>), CliError> {
    let outcome = annotate_batch(test.entries(), client, &cfg.llm.policy(), clock)?;
    for f in &outcome.failures {
        log::warn!("annotation failed for {}: {:?} {}", f.entry_id, f.kind, f.message);
    }
    let mode = test.mode();
    let mut cm = ConfusionMatrix::zeros(mode);
    for a in &outcome.ok {
        let gold = test.get(&a.entry_id).and_then(|e| e.label).expect("annotated entries come from the test split");
        let predicted = if mode == Mode::Binary { a.tag.to_binary() } else { a.tag };
        cm.record(gold, predicted)?;
    }
    let report = metrics_from_confusion(&cm, Averaging::for_mode(mode))?.with_model(client.model_id());
    Ok((report, outcome.failures))
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::write(&path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

/// Runs one experiment phase with the registry and LLM client from `cfg`.
pub fn run_phase(cfg: &RunConfig) -> Result<PhaseOutput, CliError> {
    let registry = cfg.registry();
    let client = if cfg.phase == Phase::BaselineGpt { Some(cfg.llm.build_client(MockFallback::Fail)?) } else { None };
    run_phase_with(cfg, &registry, client.as_deref(), &SystemClock)
}

/// Like [`run_phase`] with injected backends.
pub fn run_phase_with(
    cfg: &RunConfig,
    registry: &EncoderRegistry,
    client: Option<&dyn LlmClient>,
    clock: &dyn Clock,
) -> Result<PhaseOutput, CliError> {
    let violations = cfg.violations(registry);
    if !violations.is_empty() {
        return Err(CliError::Config(violations.join("; ")));
    }
    let ds = phase_dataset(cfg)?;
    let parts = split(&ds, cfg.split.ratios(), cfg.split.seed)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::Data(format!("{}: {e}", cfg.output_dir.display())))?;
    let prefix = format!("{}_{}", cfg.phase.as_str(), cfg.mode);
    let mut files = Vec::new();
    let mut reports = Vec::new();

    if cfg.phase == Phase::BaselineGpt {
        let client = client.ok_or_else(|| CliError::Config("baseline_gpt needs an LLM client".into()))?;
        let (report, failures) = score_machine_tags(&parts.test, client, cfg, clock)?;
        let stem = format!("{prefix}_{}", file_stem(&report.model));
        write(cfg.output_dir.join(format!("{stem}.json")), to_json(&report), &mut files)?;
        if !failures.is_empty() {
            write(cfg.output_dir.join(format!("{stem}.failures.json")), to_json(&failures), &mut files)?;
        }
        reports.push(report);
    } else {
        let run = |enc: &String| train_and_evaluate(&parts, registry, enc, cfg.encoder.pooling, &cfg.training);
        let results: Vec<_> = if cfg.parallel {
            std::thread::scope(|s| {
                let handles: Vec<_> = cfg.encoders.iter().map(|enc| s.spawn(move || run(enc))).collect();
                handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
            })
        } else {
            cfg.encoders.iter().map(run).collect()
        };
        for (enc, result) in cfg.encoders.iter().zip(results) {
            let (report, history, head) = result?;
            let stem = format!("{prefix}_{}", file_stem(enc));
            write(cfg.output_dir.join(format!("{stem}.json")), to_json(&report), &mut files)?;
            write(cfg.output_dir.join(format!("{stem}.history.json")), to_json(&history), &mut files)?;
            let ckpt = cfg.output_dir.join(format!("{stem}.head"));
            save_checkpoint(&ckpt, &head, enc, cfg.encoder.pooling, cfg.training.seed)?;
            files.push(ckpt);
            reports.push(report);
        }
    }

    let (md, csv) = emit_report(&reports)?;
    let markdown = cfg.output_dir.join(format!("{prefix}.md"));
    let csv_path = cfg.output_dir.join(format!("{prefix}.csv"));
    write(markdown.clone(), md, &mut files)?;
    write(csv_path.clone(), csv, &mut files)?;
    Ok(PhaseOutput { reports, markdown, csv: csv_path, files })
}
